#include "perco/renewal.hpp"

#include "perco/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace perco {

RationalDirection::RationalDirection(const Point& t) : value_(t) {
  if (t.size() < 1) throw std::invalid_argument("direction must be nonempty");
  numerators_.resize(static_cast<std::size_t>(t.size()));
  double err2 = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double scaled = std::round(t[i] * static_cast<double>(kDenominator));
    numerators_[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(scaled);
    const double diff = t[i] - scaled / static_cast<double>(kDenominator);
    err2 += diff * diff;
  }
  snap_error_ = std::sqrt(err2);
}

std::int64_t RationalDirection::level(const Site& x) const {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < numerators_.size(); ++i) s += numerators_[i] * x[static_cast<Eigen::Index>(i)];
  return s;
}

int RationalDirection::leading_axis() const {
  int best = 0;
  for (int i = 1; i < dimension(); ++i) {
    if (numerators_[static_cast<std::size_t>(i)] > numerators_[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

namespace {

constexpr std::int64_t kNoLimit = std::numeric_limits<std::int64_t>::max();

/// A configuration seen through the slab geometry of one (k, n) query.
class SlabView {
 public:
  SlabView(const BondConfiguration& c, const RationalDirection& t, int axis, SlabEdgeRule rule, std::int64_t top)
      : config_(c), box_(c.box()), t_(t), axis_(axis), rule_(rule), top_(top) {
    level_.resize(static_cast<std::size_t>(box_.site_count()));
    for (SiteId s = 0; s < box_.site_count(); ++s) level_[static_cast<std::size_t>(s)] = t.level(box_.site(s));
  }

  const LatticeBox& box() const { return box_; }
  std::int64_t level(SiteId s) const { return level_[static_cast<std::size_t>(s)]; }
  std::int64_t step_level() const { return t_.numerators()[static_cast<std::size_t>(axis_)]; }

  /// Site id of x + sign * e, or kNoSite outside the box.
  SiteId shifted(SiteId s, int sign) const {
    Site x = box_.site(s);
    x[axis_] += sign;
    return box_.index_or_none(x);
  }

  /// Open cluster of `start` among sites with level in [lo, hi].
  std::vector<SiteId> cluster(SiteId start, std::int64_t lo = -kNoLimit, std::int64_t hi = kNoLimit) const {
    const auto keep_site = [&](SiteId s) { return level(s) >= lo && level(s) <= hi; };
    const auto keep_edge = [&](EdgeId e) {
      if (rule_ == SlabEdgeRule::closed) return true;
      const auto& ends = box_.endpoints(e);
      return !(level(ends.lo) == top_ && level(ends.hi) == top_);
    };
    SiteMarks marks;
    return explore_cluster(config_, start, marks, keep_site, keep_edge);
  }

  /// Sites of `set` with level in [level(a), level(b)] are exactly {a, b}.
  bool meets_exactly(const std::vector<SiteId>& set, SiteId a, SiteId b) const {
    if (a == kNoSite || b == kNoSite) return false;
    const std::int64_t lo = level(a), hi = level(b);
    bool has_a = false, has_b = false;
    for (SiteId s : set) {
      if (level(s) < lo || level(s) > hi) continue;
      if (s == a) {
        has_a = true;
      } else if (s == b) {
        has_b = true;
      } else {
        return false;
      }
    }
    return has_a && has_b;
  }

  /// t-break points of the slab cluster `slab` of the pair (k, n).
  std::vector<SiteId> t_breaks(const std::vector<SiteId>& slab, SiteId k, SiteId n) const {
    const std::int64_t te = step_level();
    std::vector<char> member(static_cast<std::size_t>(box_.site_count()), 0);
    for (SiteId s : slab) member[static_cast<std::size_t>(s)] = 1;
    std::vector<SiteId> out;
    for (SiteId b : slab) {
      if (level(b) < level(k) + te || level(b) > level(n) - te) continue;
      const SiteId below = shifted(b, -1), above = shifted(b, 1);
      if (below == kNoSite || above == kNoSite || !member[below] || !member[above]) continue;
      int count = 0;
      for (SiteId s : slab) {
        if (level(s) >= level(b) - te && level(s) <= level(b) + te) ++count;
      }
      if (count == 3) out.push_back(b);
    }
    std::sort(out.begin(), out.end(), [&](SiteId x, SiteId y) {
      if (level(x) != level(y)) return level(x) < level(y);
      return SiteLess{}(box_.site(x), box_.site(y));
    });
    return out;
  }

 private:
  const BondConfiguration& config_;
  const LatticeBox& box_;
  const RationalDirection& t_;
  int axis_;
  SlabEdgeRule rule_;
  std::int64_t top_;
  std::vector<std::int64_t> level_;
};

Point to_point(const Site& s) { return s.cast<double>(); }

}  // namespace

ConnectionAnalyzer::ConnectionAnalyzer(const Norm& xi, const Point& t, double eta, double K, SlabEdgeRule rule)
    : xi_(&xi), t_(t), cone_(xi, t), axis_(t_.leading_axis()), eta_(eta), K_(K), rule_(rule) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0,1)");
  if (!(K > 0.0)) throw std::invalid_argument("K must be positive");
  if (t.size() != xi.dimension()) throw std::invalid_argument("direction dimension does not match the norm");
}

bool ConnectionAnalyzer::in_cone(const Site& apex, const Point& x, double eta) const {
  const Point w = x - to_point(apex);
  const double f = (*xi_)(w);
  return cone_.direction().dot(w) >= (1.0 - eta) * f - 1e-12 * (1.0 + f);
}

std::vector<Site> t_break_points(const BondConfiguration& config, const Point& t, const Site& k, const Site& n,
                                 SlabEdgeRule rule) {
  const RationalDirection dir(t);
  const LatticeBox& box = config.box();
  const SiteId kid = box.index(k), nid = box.index(n);
  if (dir.level(n) <= dir.level(k)) throw std::invalid_argument("need (t, n - k) > 0");
  const SlabView view(config, dir, dir.leading_axis(), rule, dir.level(n));
  const auto slab = view.cluster(kid, view.level(kid), view.level(nid));
  if (std::find(slab.begin(), slab.end(), nid) == slab.end()) {
    throw std::invalid_argument("sites are not connected inside the slab");
  }
  std::vector<Site> out;
  for (SiteId b : view.t_breaks(slab, kid, nid)) out.push_back(box.site(b));
  return out;
}

std::vector<Site> ConnectionAnalyzer::t_break_points(const BondConfiguration& config, const Site& k,
                                                     const Site& n) const {
  return perco::t_break_points(config, t_.value(), k, n, rule_);
}

BreakPointReport ConnectionAnalyzer::break_points(const BondConfiguration& config, const Site& k,
                                                  const Site& n) const {
  const LatticeBox& box = config.box();
  const SiteId kid = box.index(k), nid = box.index(n);
  if (t_.level(n) <= t_.level(k)) throw std::invalid_argument("need (t, n - k) > 0");
  const SlabView view(config, t_, axis_, rule_, t_.level(n));
  const auto cluster = view.cluster(kid);
  if (std::find(cluster.begin(), cluster.end(), nid) == cluster.end()) {
    throw std::invalid_argument("sites are not connected");
  }
  BreakPointReport rep;
  rep.axis = axis_;
  rep.snap_error = t_.snap_error();
  const auto slab = view.cluster(kid, view.level(kid), view.level(nid));
  const bool slab_connected = std::find(slab.begin(), slab.end(), nid) != slab.end();
  std::vector<SiteId> tb;
  if (slab_connected) tb = view.t_breaks(slab, kid, nid);
  for (SiteId b : tb) rep.t_break_points.push_back(box.site(b));

  const Point shift = K_ * cone_.dual_point();
  auto confined_from = [&](SiteId apex, const std::vector<SiteId>& sites, std::int64_t from_level) {
    const Point base = to_point(box.site(apex)) - shift;
    for (SiteId x : sites) {
      if (view.level(x) < from_level) continue;
      const Point w = to_point(box.site(x)) - base;
      const double f = (*xi_)(w);
      if (cone_.direction().dot(w) < (1.0 - eta_) * f - 1e-12 * (1.0 + f)) return false;
    }
    return true;
  };

  // b_1: maximal level among admissible anchors, ties to the lexicographically smallest.
  SiteId anchor = kNoSite;
  for (SiteId l : cluster) {
    if (view.level(l) < view.level(kid)) continue;
    if (!view.meets_exactly(cluster, view.shifted(l, -1), l)) continue;
    if (!confined_from(l, cluster, view.level(l))) continue;
    if (anchor == kNoSite || view.level(l) > view.level(anchor) ||
        (view.level(l) == view.level(anchor) && SiteLess{}(box.site(l), box.site(anchor)))) {
      anchor = l;
    }
  }
  if (anchor == kNoSite) return rep;
  rep.anchor = box.site(anchor);

  std::vector<SiteId> chain{anchor};
  for (auto it = tb.rbegin(); it != tb.rend(); ++it) {
    const SiteId b = *it;
    const SiteId prev = chain.back();
    if (view.level(b) >= view.level(prev)) continue;
    const Site bj = box.site(prev), bn = box.site(b);
    if (!in_cone(bn, to_point(bj), eta_)) continue;
    if ((*xi_)(Point((bj - bn).cast<double>())) < 2.0 * K_ / eta_) continue;
    const auto piece = view.cluster(b, view.level(b), view.level(prev));
    if (!confined_from(b, piece, view.level(b))) continue;
    chain.push_back(b);
    rep.cone_break_points.push_back(bn);
  }
  if (chain.size() >= 2) {
    rep.last_index = static_cast<int>(chain.size());
    const SiteId before = chain[chain.size() - 2];
    const Site last = box.site(chain.back());
    bool holds = true;
    for (SiteId x : cluster) {
      if (view.level(x) < view.level(before)) continue;
      if (!in_cone(last, to_point(box.site(x)), 2.0 * eta_)) {
        holds = false;
        break;
      }
    }
    rep.confinement_holds = holds;
  }
  return rep;
}

ConnectionFlags ConnectionAnalyzer::classify(const BondConfiguration& config, const Site& k, const Site& n) const {
  const LatticeBox& box = config.box();
  const SiteId kid = box.index(k), nid = box.index(n);
  if (kid == nid) throw std::invalid_argument("classification needs k != n");
  const std::int64_t gap = t_.level(n) - t_.level(k);
  if (gap <= 0) throw std::invalid_argument("need (t, n - k) > 0");
  const SlabView view(config, t_, axis_, rule_, t_.level(n));
  ConnectionFlags out;
  out.short_separation = gap < view.step_level();
  const auto cluster = view.cluster(kid);
  out.connected = std::find(cluster.begin(), cluster.end(), nid) != cluster.end();
  if (!out.connected) return out;
  const auto slab = view.cluster(kid, view.level(kid), view.level(nid));
  out.strip_connected = std::find(slab.begin(), slab.end(), nid) != slab.end();
  out.report = break_points(config, k, n);
  const bool no_cone_breaks = out.report.cone_break_points.empty();

  const SiteId k_up = view.shifted(kid, 1), k_down = view.shifted(kid, -1), n_down = view.shifted(nid, -1);
  out.clean_ends = out.strip_connected && view.meets_exactly(slab, kid, k_up) && view.meets_exactly(slab, n_down, nid);
  out.irreducible = out.clean_ends && out.report.t_break_points.empty();
  out.clean_tail = view.meets_exactly(cluster, n_down, nid);
  out.clean_tail_irreducible = out.clean_tail && no_cone_breaks;

  const Point base_k = to_point(k) - K_ * cone_.dual_point();
  auto confined = [&](const std::vector<SiteId>& sites, bool upper_only) {
    for (SiteId x : sites) {
      if (upper_only && view.level(x) < view.level(kid)) continue;
      const Point w = to_point(box.site(x)) - base_k;
      const double f = (*xi_)(w);
      if (cone_.direction().dot(w) < (1.0 - eta_) * f - 1e-12 * (1.0 + f)) return false;
    }
    return true;
  };
  out.cone_head = confined(cluster, true) && view.meets_exactly(cluster, k_down, kid);
  out.cone_head_irreducible = out.cone_head && no_cone_breaks;
  out.cone_confined = out.clean_ends && in_cone(k, to_point(n), eta_) && confined(slab, false);
  out.cone_irreducible = out.cone_confined && no_cone_breaks;
  return out;
}

}  // namespace perco
