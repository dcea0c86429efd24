#include "perco/strip.hpp"

#include <stdexcept>

namespace perco {

ConnectionValues exact_h_f(const LatticeBox& strip, const ExactProbability& p, const ConnectionAnalyzer& analyzer,
                           const Site& k, const Site& n) {
  ConnectionValues out;
  out.edge_count = strip.edge_count();
  if (k == n) {
    out.h = out.h_cone = out.h_tail = 1;
    out.f = out.f_cone = out.f_tail = 0;
    return out;
  }
  const auto& t = analyzer.direction();
  if (t.level(n) <= t.level(k)) throw std::invalid_argument("need (t, n - k) > 0");
  if (!strip.contains(k) || !strip.contains(n)) throw std::invalid_argument("k and n must lie in the strip");
  const auto profiles = enumerate_events(strip, 6, [&](const BondConfiguration& c) -> std::uint32_t {
    const auto fl = analyzer.classify(c, k, n);
    return (fl.clean_ends ? 1U : 0U) | (fl.irreducible ? 2U : 0U) | (fl.cone_confined ? 4U : 0U) |
           (fl.cone_irreducible ? 8U : 0U) | (fl.clean_tail ? 16U : 0U) | (fl.clean_tail_irreducible ? 32U : 0U);
  });
  out.h = profiles[0].evaluate(p);
  out.f = profiles[1].evaluate(p);
  out.h_cone = profiles[2].evaluate(p);
  out.f_cone = profiles[3].evaluate(p);
  out.h_tail = profiles[4].evaluate(p);
  out.f_tail = profiles[5].evaluate(p);
  out.short_separation = t.level(n) - t.level(k) < t.numerators()[static_cast<std::size_t>(analyzer.axis())];
  return out;
}

StripModel::StripModel(const ConnectionAnalyzer& analyzer, int width) : analyzer_(&analyzer), width_(width) {
  if (width < 1) throw std::invalid_argument("strip width must be positive");
}

LatticeBox StripModel::box(const Site& k, const Site& n) const {
  const int d = analyzer_->direction().dimension();
  Site lo = Site::Zero(d), hi = Site::Constant(d, width_ - 1);
  lo[axis()] = k[axis()];
  hi[axis()] = n[axis()];
  return LatticeBox(lo, hi);
}

std::vector<Site> StripModel::sites(int lo, int hi) const {
  const int d = analyzer_->direction().dimension();
  Site a = Site::Zero(d), b = Site::Constant(d, width_ - 1);
  a[axis()] = lo;
  b[axis()] = hi;
  const LatticeBox all(a, b);
  std::vector<Site> out;
  for (SiteId s = 0; s < all.site_count(); ++s) out.push_back(all.site(s));
  return out;
}

ConnectionValues StripModel::values(const ExactProbability& p, const Site& k, const Site& n) const {
  const auto& t = analyzer_->direction();
  if (k != n && t.level(n) <= t.level(k)) {
    ConnectionValues zero;
    zero.h = zero.f = zero.h_cone = zero.f_cone = zero.h_tail = zero.f_tail = 0;
    return zero;
  }
  return exact_h_f(box(k, n), p, *analyzer_, k, n);
}

RenewalCheck verify_renewal(const StripModel& model, const ExactProbability& p, const Site& k, const Site& n) {
  const int a = model.axis();
  if (n[a] < k[a]) throw std::invalid_argument("n must not lie below k along the strip axis");
  RenewalCheck out;
  out.lhs = model.values(p, k, n).h_cone;
  out.rhs = 0;
  for (const Site& b : model.sites(k[a], n[a])) {
    const Decimal head = model.values(p, k, b).h_cone;
    if (head == 0) continue;
    const Decimal tail = model.values(p, b, n).f_cone;
    if (tail == 0) continue;
    out.rhs += head * tail;
    ++out.terms;
  }
  out.residual = abs(out.lhs - out.rhs);
  return out;
}

}  // namespace perco
