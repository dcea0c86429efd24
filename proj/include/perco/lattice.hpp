#ifndef PERCO_LATTICE_HPP
#define PERCO_LATTICE_HPP

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace perco {

/// Integer lattice point of Z^d.
using Site = Eigen::Matrix<int, Eigen::Dynamic, 1>;
/// Real point of R^d.
using Point = Eigen::VectorXd;

using SiteId = std::int32_t;
using EdgeId = std::int32_t;

inline constexpr SiteId kNoSite = -1;
inline constexpr EdgeId kNoEdge = -1;

struct SiteLess {
  bool operator()(const Site& a, const Site& b) const {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
  }
};

Site make_site(std::initializer_list<int> coords);

class LatticeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned finite window [lower, upper] of Z^d with its nearest-neighbour
/// edges. Sites are numbered lexicographically (last axis fastest); edges are
/// numbered lexicographically by lower endpoint, then by axis.
class LatticeBox {
 public:
  LatticeBox() = default;
  LatticeBox(Site lower, Site upper);

  /// Box with `sizes[a]` sites along axis a and lower corner at the origin.
  static LatticeBox from_sizes(const std::vector<int>& sizes);

  int dimension() const { return static_cast<int>(lower_.size()); }
  const Site& lower() const { return lower_; }
  const Site& upper() const { return upper_; }
  int extent(int axis) const { return upper_[axis] - lower_[axis] + 1; }

  SiteId site_count() const { return site_count_; }
  EdgeId edge_count() const { return static_cast<EdgeId>(tables_->endpoints.size()); }

  bool contains(const Site& x) const;
  SiteId index(const Site& x) const;  // throws LatticeError when outside
  SiteId index_or_none(const Site& x) const;
  Site site(SiteId id) const;
  int coordinate(SiteId id, int axis) const {
    return lower_[axis] + (id / strides_[axis]) % extent(axis);
  }

  /// Edge from `s` to `s + e_axis`, or kNoEdge at the upper face.
  EdgeId forward_edge(SiteId s, int axis) const { return tables_->forward[s * dimension() + axis]; }
  /// Edge from `s - e_axis` to `s`, or kNoEdge at the lower face.
  EdgeId backward_edge(SiteId s, int axis) const {
    if (coordinate(s, axis) == lower_[axis]) return kNoEdge;
    return forward_edge(s - strides_[axis], axis);
  }
  SiteId step(SiteId s, int axis, int sign) const { return s + sign * strides_[axis]; }

  struct Endpoints {
    SiteId lo;
    SiteId hi;
    int axis;
  };
  const Endpoints& endpoints(EdgeId e) const { return tables_->endpoints[e]; }

  /// Calls f(neighbour, edge) for every nearest neighbour inside the box.
  template <typename F>
  void for_each_neighbour(SiteId s, F&& f) const {
    const int d = dimension();
    for (int a = 0; a < d; ++a) {
      const EdgeId fwd = forward_edge(s, a);
      if (fwd != kNoEdge) f(s + strides_[a], fwd);
      const EdgeId bwd = backward_edge(s, a);
      if (bwd != kNoEdge) f(s - strides_[a], bwd);
    }
  }

  /// Σ over axes of the number of unit steps fitting in the box.
  static std::int64_t expected_edge_count(const Site& lower, const Site& upper);

  std::string describe() const;

  friend bool operator==(const LatticeBox& a, const LatticeBox& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  struct Tables {
    std::vector<EdgeId> forward;
    std::vector<Endpoints> endpoints;
  };

  Site lower_;
  Site upper_;
  std::vector<SiteId> strides_;
  SiteId site_count_ = 0;
  std::shared_ptr<const Tables> tables_;
};

/// Smallest box containing all `sites`, padded by `margin` on every side.
LatticeBox bounding_box(const std::vector<Site>& sites, int margin);

/// Componentwise floor of x (the integer part [x] used for lattice anchors).
Site floor_site(const Point& x);

}  // namespace perco

#endif
