#ifndef PERCO_STRIP_HPP
#define PERCO_STRIP_HPP

#include "perco/exact.hpp"
#include "perco/renewal.hpp"

#include <vector>

namespace perco {

/// Exact probabilities of the four connection events from k to n.
struct ConnectionValues {
  Decimal h;        // clean_ends
  Decimal f;        // irreducible
  Decimal h_cone;   // cone_confined
  Decimal f_cone;   // cone_irreducible
  Decimal h_tail;   // clean_tail
  Decimal f_tail;   // clean_tail_irreducible
  bool short_separation = false;
  int edge_count = 0;
};

/// Enumerates `strip` with the analyzer's classification as event predicate.
/// k == n returns the conventions h = 1, f = 0. Throws GuardError when the
/// strip is too large and std::invalid_argument when (t, n - k) <= 0.
ConnectionValues exact_h_f(const LatticeBox& strip, const ExactProbability& p, const ConnectionAnalyzer& analyzer,
                           const Site& k, const Site& n);

/// Lattice truncated to transverse coordinates [0, width - 1] around the
/// analyzer's leading axis. Every (k, n) query is evaluated on the box whose
/// extent along the axis is [k_axis, n_axis].
class StripModel {
 public:
  StripModel(const ConnectionAnalyzer& analyzer, int width);

  const ConnectionAnalyzer& analyzer() const { return *analyzer_; }
  int width() const { return width_; }
  int axis() const { return analyzer_->axis(); }

  LatticeBox box(const Site& k, const Site& n) const;
  /// All sites of the model with axis coordinate in [lo, hi].
  std::vector<Site> sites(int lo, int hi) const;
  /// exact_h_f on box(k, n); pairs with (t, n - k) <= 0 and k != n give 0.
  ConnectionValues values(const ExactProbability& p, const Site& k, const Site& n) const;

 private:
  const ConnectionAnalyzer* analyzer_;
  int width_;
};

struct RenewalCheck {
  Decimal lhs;      // h_cone(k, n)
  Decimal rhs;      // Σ_b h_cone(k, b) f_cone(b, n)
  Decimal residual;
  int terms = 0;    // b with a nonzero product
};

/// Renewal identity for the cone-confined connections on the strip model.
RenewalCheck verify_renewal(const StripModel& model, const ExactProbability& p, const Site& k, const Site& n);

}  // namespace perco

#endif
