#include "perco/skeleton.hpp"

#include "perco/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace perco {

namespace {

double distance(const Norm& xi, const Site& a, const Site& b) { return xi(Point((a - b).cast<double>())); }

bool adjacent(const Site& a, const Site& b) { return (a - b).cwiseAbs().sum() == 1; }

bool edge_open(const BondConfiguration& config, const Site& a, const Site& b) {
  const LatticeBox& box = config.box();
  if (!box.contains(a) || !box.contains(b) || !adjacent(a, b)) return false;
  const Site d = b - a;
  int axis = 0;
  while (d[axis] == 0) ++axis;
  const Site& lo = d[axis] > 0 ? a : b;
  return config.is_open(box.forward_edge(box.index(lo), axis));
}

double min_distance(const std::vector<Site>& points, const Site& x, const Norm& xi) {
  double best = std::numeric_limits<double>::infinity();
  for (const Site& y : points) best = std::min(best, distance(xi, x, y));
  return best;
}

constexpr double kSlack = 1e-12;

}  // namespace

Skeleton m_skeleton(const std::vector<Site>& path, double M, const Norm& xi, int source) {
  if (path.empty()) throw std::invalid_argument("empty path");
  double step = 0.0;
  for (int a = 0; a < xi.dimension(); ++a) {
    Point e = Point::Zero(xi.dimension());
    e[a] = 1.0;
    step = std::max({step, xi(e), xi(Point(-e))});
  }
  if (!(M > step)) throw std::invalid_argument("scale must exceed the norm of one lattice step");
  std::set<Site, SiteLess> seen;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!seen.insert(path[i]).second) throw std::invalid_argument("path is not self-avoiding");
    if (i > 0 && !adjacent(path[i - 1], path[i])) throw std::invalid_argument("path steps must join neighbours");
  }
  Skeleton out;
  out.scale = M;
  out.source = source;
  out.points.push_back(path.front());
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (distance(xi, path[i], out.points.back()) >= M) out.points.push_back(path[i]);
  }
  if (out.points.back() != path.back()) out.points.push_back(path.back());
  return out;
}

Skeleton skeleton_classify(Skeleton s, const Norm& xi, const Point& t, double eta) {
  const geometry::SurchargeCone<double> cone(xi, t);
  const int m = static_cast<int>(s.points.size());
  auto in_cone = [&](int from, int to) {
    return cone.contains(eta, Point((s.points[to] - s.points[from]).cast<double>()));
  };
  s.good.assign(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < m; ++i) {
    bool good = true;
    for (int j = 0; j < m && good; ++j) good = in_cone(i, j) == (j <= i);
    s.good[static_cast<std::size_t>(i)] = good;
  }
  s.backtracking.clear();
  for (int l = 1; l < m; ++l) {
    if (!in_cone(l, l - 1)) s.backtracking.push_back(l);
  }
  s.bad_intervals.clear();
  s.bad.clear();
  s.bad_surcharge = 0.0;
  int upper = m - 1;
  while (true) {
    int l = -1;
    for (int j = upper; j >= 0; --j) {
      if (!s.good[static_cast<std::size_t>(j)]) {
        l = j;
        break;
      }
    }
    if (l < 0) break;
    int r = -1;
    for (int j = l - 1; j >= 0; --j) {
      if (!in_cone(l, j)) {
        r = j;
        break;
      }
    }
    s.bad_intervals.emplace_back(r + 1, l);
    for (int j = std::max(r + 1, 1); j <= l; ++j) {
      s.bad_surcharge += cone.surcharge(Point((s.points[j - 1] - s.points[j]).cast<double>()));
    }
    if (r < 0) break;
    upper = r;
  }
  for (const auto& [a, b] : s.bad_intervals) {
    for (int j = a; j <= b; ++j) s.bad.push_back(j);
  }
  std::sort(s.bad.begin(), s.bad.end());
  if (!s.bad.empty()) s.surcharge_ratio = s.bad_surcharge / (eta * s.scale * static_cast<double>(s.bad.size()));
  s.classified = true;
  return s;
}

bool covered_by(const std::vector<Site>& points, const Site& x, double M, const Norm& xi) {
  return min_distance(points, x, xi) <= M * (1.0 + kSlack);
}

std::vector<Site> TreeSkeleton::branch(int i) const {
  std::vector<Site> out = trunks[static_cast<std::size_t>(i)].points;
  const auto& l = leaves[static_cast<std::size_t>(i)];
  out.insert(out.end(), l.begin(), l.end());
  return out;
}

std::vector<Site> TreeSkeleton::points() const {
  std::vector<Site> out;
  std::set<Site, SiteLess> seen;
  for (int i = 0; i < 3; ++i) {
    for (const Site& y : branch(i)) {
      if (seen.insert(y).second) out.push_back(y);
    }
  }
  return out;
}

TreeSkeleton tree_skeleton(const BondConfiguration& config, const PathSet& witness, double M, const Norm& xi) {
  const LatticeBox& box = config.box();
  for (int i = 0; i < 3; ++i) {
    const auto& p = witness.paths[static_cast<std::size_t>(i)];
    if (p.empty() || p.front() != witness.junction || p.back() != witness.targets[static_cast<std::size_t>(i)]) {
      throw std::invalid_argument("witness path does not join the junction to its target");
    }
    for (std::size_t j = 1; j < p.size(); ++j) {
      if (!edge_open(config, p[j - 1], p[j])) throw std::invalid_argument("witness path uses a closed edge");
    }
  }
  TreeSkeleton tree;
  tree.junction = witness.junction;
  tree.targets = witness.targets;
  tree.scale = M;
  for (int i = 0; i < 3; ++i) {
    const auto& p = witness.paths[static_cast<std::size_t>(i)];
    tree.trunks[static_cast<std::size_t>(i)] = m_skeleton(std::vector<Site>(p.rbegin(), p.rend()), M, xi, i);
  }
  SiteMarks marks;
  std::vector<SiteId> ids = explore_cluster(config, box.index(witness.junction), marks);
  for (SiteId s : ids) tree.cluster.push_back(box.site(s));
  std::sort(tree.cluster.begin(), tree.cluster.end(), SiteLess{});

  // Whether an open path from y inside the uncovered region reaches ξ-distance M from y.
  auto escapes = [&](const Site& y, const std::vector<Site>& all) {
    if (covered_by(all, y, M, xi)) return false;
    std::set<Site, SiteLess> visited{y};
    std::vector<Site> queue{y};
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const Site x = queue[h];
      if (distance(xi, x, y) >= M) return true;
      for (int a = 0; a < box.dimension(); ++a) {
        for (int sign : {-1, 1}) {
          Site z = x;
          z[a] += sign;
          if (visited.count(z) || !edge_open(config, x, z) || covered_by(all, z, M, xi)) continue;
          visited.insert(z);
          queue.push_back(z);
        }
      }
    }
    return false;
  };

  for (int i = 0; i < 3; ++i) {
    const Site& target = tree.targets[static_cast<std::size_t>(i)];
    // Step 1: every cluster site not owned by another branch is within M of this branch's cells.
    {
      const auto all = tree.points();
      const auto own = tree.branch(i);
      bool done = true;
      for (const Site& y : tree.cluster) {
        const bool elsewhere = !covered_by(own, y, M, xi) && covered_by(all, y, M, xi);
        if (elsewhere) continue;
        if (min_distance(own, y, xi) > 2.0 * M * (1.0 + kSlack)) {
          done = false;
          break;
        }
      }
      if (done) continue;
    }
    // Update loop: screen crossing sites around each branch point, restart after every admission.
    while (true) {
      const auto all = tree.points();
      std::vector<Site> order = tree.branch(i);
      std::sort(order.begin(), order.end(), SiteLess{});
      order.erase(std::unique(order.begin(), order.end()), order.end());
      std::stable_partition(order.begin(), order.end(), [&](const Site& y) { return y == target; });
      bool admitted = false;
      for (const Site& yj : order) {
        for (const Site& y : tree.cluster) {
          if (distance(xi, y, yj) < M) continue;
          bool crossing = false;
          for (int a = 0; a < box.dimension() && !crossing; ++a) {
            for (int sign : {-1, 1}) {
              Site z = y;
              z[a] += sign;
              if (distance(xi, z, yj) < M) crossing = true;
            }
          }
          if (!crossing || !escapes(y, all)) continue;
          tree.leaves[static_cast<std::size_t>(i)].push_back(y);
          admitted = true;
          break;
        }
        if (admitted) break;
      }
      if (!admitted) break;
    }
  }

  {
    const auto all = tree.points();
    for (const Site& y : tree.cluster) {
      if (!covered_by(all, y, M, xi)) tree.uncovered_after_loop.push_back(y);
    }
  }
  // Completion: the first uncovered site becomes a leaf of the nearest branch.
  while (true) {
    const auto all = tree.points();
    const auto it = std::find_if(tree.cluster.begin(), tree.cluster.end(),
                                 [&](const Site& y) { return !covered_by(all, y, M, xi); });
    if (it == tree.cluster.end()) break;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
      const double d = min_distance(tree.branch(i), *it, xi);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    tree.leaves[static_cast<std::size_t>(best)].push_back(*it);
    ++tree.completion[static_cast<std::size_t>(best)];
  }
  const auto all = tree.points();
  tree.compatible = std::all_of(tree.cluster.begin(), tree.cluster.end(),
                                [&](const Site& y) { return covered_by(all, y, M, xi); });
  return tree;
}

DeltaGoodReport delta_good(const TreeSkeleton& tree, const Norm& xi, double delta, double eta, double R) {
  DeltaGoodReport rep;
  rep.delta = delta;
  rep.good = true;
  const double M = tree.scale;
  for (int i = 0; i < 3; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Site& n = tree.targets[ui];
    const Point arm = (n - tree.junction).cast<double>();
    const Point t = geometry::polar_point(xi, arm);
    const geometry::SurchargeCone<double> cone(xi, t);
    const Skeleton s = skeleton_classify(tree.trunks[ui], xi, t, eta);
    rep.trunks[ui] = s;
    rep.threshold[ui] = delta / M * arm.norm();
    rep.bad_points[ui] = static_cast<int>(s.bad.size());

    auto& js = rep.anchors[ui];
    const int m = static_cast<int>(s.points.size());
    for (int j = 0; j < m; ++j) {
      if (s.good[static_cast<std::size_t>(j)]) {
        js.push_back(j);
        break;
      }
    }
    while (!js.empty()) {
      const int last = js.back();
      int next = -1;
      for (int j = last; j < m; ++j) {
        if (s.good[static_cast<std::size_t>(j)] &&
            (s.points[static_cast<std::size_t>(j)] - s.points[static_cast<std::size_t>(last)]).cast<double>().norm() >=
                R * M) {
          next = j;
          break;
        }
      }
      if (next < 0) break;
      js.push_back(next);
    }
    for (const Site& y : tree.leaves[ui]) {
      const Point py = y.cast<double>();
      bool inside = false;
      for (std::size_t l = 1; l < js.size() && !inside; ++l) {
        const Point a = s.points[static_cast<std::size_t>(js[l])].cast<double>();
        const Point b = s.points[static_cast<std::size_t>(js[l - 1])].cast<double>();
        const double lo = std::min(t.dot(a), t.dot(b)), hi = std::max(t.dot(a), t.dot(b));
        const double level = t.dot(py);
        if (level < lo - kSlack || level > hi + kSlack) continue;
        inside = cone.distance_to_cone(eta, a, py) <= R * M * (1.0 + kSlack);
      }
      if (!inside) rep.bad_leaves[ui].push_back(y);
    }
    const double limit = rep.threshold[ui] * (1.0 + kSlack);
    if (static_cast<double>(rep.bad_leaves[ui].size()) > limit || static_cast<double>(rep.bad_points[ui]) > limit) {
      rep.good = false;
    }
  }
  return rep;
}

}  // namespace perco
