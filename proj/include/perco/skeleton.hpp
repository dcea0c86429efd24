#ifndef PERCO_SKELETON_HPP
#define PERCO_SKELETON_HPP

#include "perco/events.hpp"
#include "perco/geometry/polar.hpp"

#include <array>
#include <limits>
#include <utility>
#include <vector>

namespace perco {

using Norm = geometry::DirectionalNorm<double>;

/// Coarse-grained path x_1, ..., x_m at scale M. Indices below are 0-based:
/// points[0] is x_1.
struct Skeleton {
  std::vector<Site> points;
  double scale = 0.0;
  int source = -1;

  // Filled by skeleton_classify.
  bool classified = false;
  std::vector<char> good;                          // x_i + C_η meets the skeleton in exactly x_1..x_i
  std::vector<int> backtracking;                   // l with x_{l-1} - x_l outside C_η
  std::vector<std::pair<int, int>> bad_intervals;  // [first, last], found from the far end
  std::vector<int> bad;                            // union of the intervals, increasing
  double bad_surcharge = 0.0;                      // Σ of S_t over the increments inside the intervals
  double surcharge_ratio = std::numeric_limits<double>::quiet_NaN();  // bad_surcharge / (η M |bad|)
};

/// Greedy ξ-ball hopping: keep the first site, then every first site at
/// ξ-distance >= M from the last kept one, and always the last site.
/// Throws std::invalid_argument for paths that are empty, not nearest-neighbour
/// or not self-avoiding, and when M does not exceed the ξ-length of one step.
Skeleton m_skeleton(const std::vector<Site>& path, double M, const Norm& xi, int source = -1);

Skeleton skeleton_classify(Skeleton skeleton, const Norm& xi, const Point& t, double eta);

/// Three trunks (skeletons of the witness paths run from n_i to k) and the
/// leaves grown around them.
struct TreeSkeleton {
  Site junction;
  Triple targets;
  double scale = 0.0;
  std::array<Skeleton, 3> trunks;
  /// Leaves of trunk i in admission order; the last completion[i] of them come
  /// from the completion pass, the others from the screening loop.
  std::array<std::vector<Site>, 3> leaves;
  std::array<int, 3> completion{};
  std::vector<Site> cluster;              // sites of the cluster of k
  std::vector<Site> uncovered_after_loop; // cluster sites farther than M from Γ after the loop
  bool compatible = false;                // every cluster site within ξ-distance M of Γ

  /// Γ_i: trunk i followed by its leaves.
  std::vector<Site> branch(int i) const;
  /// Γ: union of the branches, k listed once.
  std::vector<Site> points() const;
};

/// Throws std::invalid_argument when the witness does not run through open
/// edges of `config`.
TreeSkeleton tree_skeleton(const BondConfiguration& config, const PathSet& witness, double M, const Norm& xi);

/// min over y ∈ points of ξ(x - y) <= M.
bool covered_by(const std::vector<Site>& points, const Site& x, double M, const Norm& xi);

struct DeltaGoodReport {
  bool good = false;
  double delta = 0.0;
  std::array<double, 3> threshold{};           // (δ/M) ‖n_i - k‖
  std::array<std::vector<Site>, 3> bad_leaves;
  std::array<int, 3> bad_points{};             // |bad| of each classified trunk
  std::array<std::vector<int>, 3> anchors;     // j_0, j_1, ... per trunk
  std::array<Skeleton, 3> trunks;              // classified with t_i polar to n_i - k
};

/// Both counts of every trunk at most (δ/M) ‖n_i - k‖, inclusive.
DeltaGoodReport delta_good(const TreeSkeleton& tree, const Norm& xi, double delta, double eta, double R);

}  // namespace perco

#endif
