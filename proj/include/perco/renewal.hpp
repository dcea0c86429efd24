#ifndef PERCO_RENEWAL_HPP
#define PERCO_RENEWAL_HPP

#include "perco/configuration.hpp"
#include "perco/geometry/polar.hpp"

#include <optional>
#include <vector>

namespace perco {

using Norm = geometry::DirectionalNorm<double>;

/// Direction with integer numerators over a fixed denominator, so that slab
/// membership (t, a) <= (t, x) <= (t, b) is decided exactly on lattice sites.
class RationalDirection {
 public:
  static constexpr std::int64_t kDenominator = 1'000'000;

  explicit RationalDirection(const Point& t);

  const Point& value() const { return value_; }
  const std::vector<std::int64_t>& numerators() const { return numerators_; }
  /// Euclidean distance between the requested and the snapped direction.
  double snap_error() const { return snap_error_; }
  int dimension() const { return static_cast<int>(numerators_.size()); }

  /// kDenominator * (t, x), exact.
  std::int64_t level(const Site& x) const;
  /// First coordinate axis maximizing (t, e_i).
  int leading_axis() const;

 private:
  Point value_;
  std::vector<std::int64_t> numerators_;
  double snap_error_ = 0.0;
};

/// The slab {x : (t, a) <= (t, x) <= (t, b)}, boundaries included.
struct SlabSpec {
  RationalDirection t;
  Site a;
  Site b;

  bool contains(const Site& x) const {
    const auto l = t.level(x);
    return t.level(a) <= l && l <= t.level(b);
  }
};

/// Which open edges the analysis may use. `half_open` drops edges lying in
/// the upper bounding hyperplane (t, x) = (t, n): strips glued along such a
/// hyperplane then own disjoint edge sets.
enum class SlabEdgeRule { closed, half_open };

struct BreakPointReport {
  int axis = 0;
  std::vector<Site> t_break_points;           // increasing (t, ·)
  std::optional<Site> anchor;                 // b_1
  std::vector<Site> cone_break_points;        // b_2, b_3, ... in the order found (decreasing (t, ·))
  int last_index = 0;                         // μ; 0 when no b_2 exists
  std::optional<bool> confinement_holds;      // cluster beyond b_{μ-1} inside b_μ + C_2η
  double snap_error = 0.0;
};

struct ConnectionFlags {
  bool connected = false;            // k, n in one open cluster of the box
  bool strip_connected = false;      // ... inside the slab between them
  bool clean_ends = false;           // slab cluster meets the end slabs in exactly {k, k+e}, {n-e, n}
  bool irreducible = false;          // clean_ends and no t-break point
  bool clean_tail = false;           // full cluster meets the slab at n in exactly {n-e, n}
  bool clean_tail_irreducible = false;
  bool cone_head = false;            // cone confinement from k and a clean slab {k-e, k}
  bool cone_head_irreducible = false;
  bool cone_confined = false;        // clean_ends plus the two cone conditions
  bool cone_irreducible = false;     // cone_confined and no cone break point
  bool short_separation = false;     // 0 < (t, n-k) < (t, e): the end slabs overlap
  BreakPointReport report;
};

/// Connection classification in a fixed direction t ∈ ∂K with cone
/// parameters η ∈ (0, 1), K > 0.
class ConnectionAnalyzer {
 public:
  ConnectionAnalyzer(const Norm& xi, const Point& t, double eta, double K, SlabEdgeRule rule = SlabEdgeRule::closed);

  const RationalDirection& direction() const { return t_; }
  int axis() const { return axis_; }
  double eta() const { return eta_; }
  double K() const { return K_; }
  const Point& dual_point() const { return cone_.dual_point(); }
  const geometry::SurchargeCone<double>& cone() const { return cone_; }

  /// x ∈ apex + C_η(t), with a 1e-12 relative slack against rounding.
  bool in_cone(const Site& apex, const Point& x, double eta) const;

  ConnectionFlags classify(const BondConfiguration& config, const Site& k, const Site& n) const;
  /// Throws std::invalid_argument when k and n are not connected in the slab.
  std::vector<Site> t_break_points(const BondConfiguration& config, const Site& k, const Site& n) const;
  /// Throws std::invalid_argument when k and n are not connected.
  BreakPointReport break_points(const BondConfiguration& config, const Site& k, const Site& n) const;

 private:
  const Norm* xi_;
  RationalDirection t_;
  geometry::SurchargeCone<double> cone_;
  int axis_;
  double eta_;
  double K_;
  SlabEdgeRule rule_;
};

/// t-break points only need the direction: no norm, no cone.
std::vector<Site> t_break_points(const BondConfiguration& config, const Point& t, const Site& k, const Site& n,
                                 SlabEdgeRule rule = SlabEdgeRule::closed);

inline ConnectionFlags classify_connection(const BondConfiguration& config, const Norm& xi, const Point& t,
                                           const Site& k, const Site& n, double eta, double K,
                                           SlabEdgeRule rule = SlabEdgeRule::closed) {
  return ConnectionAnalyzer(xi, t, eta, K, rule).classify(config, k, n);
}

inline BreakPointReport eta_K_break_points(const BondConfiguration& config, const Norm& xi, const Point& t,
                                           const Site& k, const Site& n, double eta, double K,
                                           SlabEdgeRule rule = SlabEdgeRule::closed) {
  return ConnectionAnalyzer(xi, t, eta, K, rule).break_points(config, k, n);
}

}  // namespace perco

#endif
