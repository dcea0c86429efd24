#include "doctest.h"

#include "corpus.hpp"

#include <random>
#include <set>

using namespace perco;
using corpus::S;

namespace {

// Self-avoiding walk grown at random until stuck or `steps` long.
std::vector<Site> random_walk(std::mt19937_64& rng, int steps) {
  std::vector<Site> path{S(0, 0)};
  std::set<Site, SiteLess> seen{path.front()};
  std::uniform_int_distribution<int> dir(0, 3);
  for (int s = 0; s < steps; ++s) {
    std::vector<Site> free;
    for (int d = 0; d < 4; ++d) {
      Site y = path.back();
      y[d / 2] += d % 2 ? 1 : -1;
      if (!seen.count(y)) free.push_back(y);
    }
    if (free.empty()) break;
    const Site y = free[static_cast<std::size_t>(dir(rng)) % free.size()];
    seen.insert(y);
    path.push_back(y);
  }
  return path;
}

}  // namespace

TEST_CASE("hand-built corpus") {
  const auto cases = corpus::hand_built();
  CHECK(cases.size() >= 15);
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(c.run() == "");
  }
}

TEST_CASE("skeleton input checks") {
  const auto xi = Norm::euclidean(2);
  CHECK_THROWS_AS(m_skeleton({}, 3.0, xi), std::invalid_argument);
  CHECK_THROWS_AS(m_skeleton({S(0, 0), S(1, 0), S(0, 0)}, 3.0, xi), std::invalid_argument);
  CHECK_THROWS_AS(m_skeleton({S(0, 0), S(2, 0)}, 3.0, xi), std::invalid_argument);
  CHECK_THROWS_AS(m_skeleton({S(0, 0), S(1, 0)}, 1.0, xi), std::invalid_argument);
}

TEST_CASE("skeleton spacing on random walks") {
  const auto xi = Norm::lp(2, 1.5);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const auto path = random_walk(rng, 60);
    const double M = 2.0 + 0.25 * (trial % 8);
    const auto s = m_skeleton(path, M, xi);
    REQUIRE(!s.points.empty());
    CHECK(s.points.front() == path.front());
    CHECK(s.points.back() == path.back());
    for (std::size_t i = 1; i + 1 < s.points.size(); ++i) {
      const double gap = xi(Point((s.points[i] - s.points[i - 1]).cast<double>()));
      CHECK(gap >= M);
      // one step beyond the hop never exceeds the step length
      CHECK(gap < M + xi.upper_constant() + 1e-9);
    }
  }
}

TEST_CASE("monotone skeleton has no bad points") {
  const auto xi = Norm::euclidean(2);
  const auto s = skeleton_classify(m_skeleton(corpus::row(9, 0, 0), 3.0, xi), xi, corpus::e1(), 0.2);
  CHECK(s.points.size() == 4);
  CHECK(std::all_of(s.good.begin(), s.good.end(), [](char g) { return g != 0; }));
  CHECK(s.bad.empty());
  CHECK(s.backtracking.empty());
  CHECK(std::isnan(s.surcharge_ratio));
}

TEST_CASE("backtracking skeleton surcharge") {
  const auto xi = Norm::euclidean(2);
  Skeleton s;
  s.scale = 3.0;
  s.points = {S(12, 0), S(9, 0), S(9, 3), S(6, 3), S(0, 0)};
  const auto c = skeleton_classify(s, xi, corpus::e1(), 0.2);
  REQUIRE(c.bad_intervals.size() == 1);
  CHECK(c.bad_intervals[0] == std::pair<int, int>{2, 3});
  // S(0,-3) + S(3,0) = 3 over η M |bad| = 0.2 * 3 * 2
  CHECK(c.bad_surcharge == doctest::Approx(3.0));
  CHECK(c.surcharge_ratio == doctest::Approx(2.5));
}

TEST_CASE("backtracking increments carry surcharge at least eta M") {
  const auto xi = Norm::quadratic((Eigen::Matrix2d() << 1.3, 0.2, 0.2, 0.8).finished());
  Point t = geometry::polar_point(xi, Point(corpus::e1()));
  std::mt19937_64 rng(23);
  int seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto path = random_walk(rng, 80);
    const double M = 3.0;
    const auto s = skeleton_classify(m_skeleton(path, M, xi), xi, t, 0.3);
    const geometry::SurchargeCone<double> cone(xi, t);
    for (int l : s.backtracking) {
      if (l + 1 == static_cast<int>(s.points.size())) continue;  // the last hop may be short
      const Point w = (s.points[l - 1] - s.points[l]).cast<double>();
      CHECK(cone.surcharge(w) >= 0.3 * M - 1e-9);
      ++seen;
    }
    // intervals are disjoint, decreasing and cover only non-good or enclosed points
    for (std::size_t i = 1; i < s.bad_intervals.size(); ++i) {
      CHECK(s.bad_intervals[i].second < s.bad_intervals[i - 1].first);
    }
    for (const auto& [a, b] : s.bad_intervals) CHECK_FALSE(s.good[static_cast<std::size_t>(b)]);
  }
  CHECK(seen > 100);
}

TEST_CASE("tree skeleton on random clusters") {
  const auto xi = Norm::euclidean(2);
  const LatticeBox box(S(0, 0), S(14, 14));
  const Triple n{S(1, 1), S(13, 2), S(7, 13)};
  std::mt19937_64 rng(29);
  int trees = 0;
  while (trees < 60) {
    BondConfiguration c(box, 0.0);
    std::bernoulli_distribution open(0.5);
    for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, open(rng));
    const auto junctions = find_junctions(c, n);
    if (junctions.empty()) continue;
    ++trees;
    const auto witness = event_F(c, junctions.front(), n);
    REQUIRE(witness);
    const auto tree = tree_skeleton(c, *witness, 3.0, xi);
    CHECK(tree.compatible);
    // trunks meet only at the junction
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        for (const Site& a : tree.trunks[i].points) {
          if (a == junctions.front()) continue;
          CHECK(std::find(tree.trunks[j].points.begin(), tree.trunks[j].points.end(), a) ==
                tree.trunks[j].points.end());
        }
      }
    }
    int completion = 0;
    for (int i = 0; i < 3; ++i) completion += tree.completion[i];
    CHECK(completion <= static_cast<int>(tree.uncovered_after_loop.size()));
    CHECK((completion == 0) == tree.uncovered_after_loop.empty());
  }
}

TEST_CASE("tree skeleton rejects a broken witness") {
  const auto xi = Norm::euclidean(2);
  const LatticeBox box(S(0, 0), S(20, 20));
  const auto c = BondConfiguration::from_walks(box, corpus::three_arms());
  auto witness = event_F(c, S(10, 10), Triple{S(18, 10), S(2, 10), S(10, 18)});
  REQUIRE(witness);
  witness->paths[0].back() = S(18, 11);
  CHECK_THROWS_AS(tree_skeleton(c, *witness, 3.0, xi), std::invalid_argument);
}

TEST_CASE("delta-goodness") {
  const auto xi = Norm::euclidean(2);
  const LatticeBox box(S(0, 0), S(20, 20));
  const Triple arms{S(18, 10), S(2, 10), S(10, 18)};
  {
    const auto c = BondConfiguration::from_walks(box, corpus::three_arms());
    const auto tree = tree_skeleton(c, *event_F(c, S(10, 10), arms), 3.0, xi);
    const auto rep = delta_good(tree, xi, 1e-3, 0.2, 1.0);
    CHECK(rep.good);
    for (int i = 0; i < 3; ++i) {
      CHECK(rep.bad_leaves[i].empty());
      CHECK(rep.bad_points[i] == 0);
    }
  }
  auto walks = corpus::three_arms();
  walks.push_back({S(15, 10), S(15, 9), S(15, 8), S(16, 8), S(16, 7), S(16, 6), S(16, 5), S(16, 4)});
  const auto c = BondConfiguration::from_walks(box, walks);
  const auto tree = tree_skeleton(c, *event_F(c, S(10, 10), arms), 3.0, xi);
  REQUIRE(tree.leaves[0].size() == 1);
  // R = 1: the leaf lies within RM of the cone at (15,10), inside the slab [15, 18]
  const auto wide = delta_good(tree, xi, 0.01, 0.2, 1.0);
  CHECK(wide.anchors[0] == std::vector<int>{0, 1, 2});
  CHECK(wide.bad_leaves[0].empty());
  CHECK(wide.good);
  // R = 1/2: ξ-distance 1.8 from the cone exceeds RM = 1.5
  const auto narrow = delta_good(tree, xi, 0.3, 0.2, 0.5);
  CHECK(narrow.anchors[0] == std::vector<int>{0, 1, 2, 3});
  CHECK(narrow.bad_leaves[0] == std::vector<Site>{S(16, 7)});
  CHECK_FALSE(narrow.good);  // 1 > (0.3 / 3) * 8
  // threshold (3/8 / 3) * 8 = 1 exactly: inclusive
  CHECK(delta_good(tree, xi, 0.375, 0.2, 0.5).good);
}
