#include "perco/lattice.hpp"

#include <cmath>
#include <sstream>

namespace perco {

Site make_site(std::initializer_list<int> coords) {
  Site s(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (int c : coords) s[i++] = c;
  return s;
}

LatticeBox::LatticeBox(Site lower, Site upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  const int d = dimension();
  if (d < 1 || upper_.size() != d) throw LatticeError("box corners must have equal positive dimension");
  for (int a = 0; a < d; ++a) {
    if (lower_[a] > upper_[a]) throw LatticeError("box lower corner exceeds upper corner on axis " + std::to_string(a));
  }
  strides_.assign(d, 1);
  std::int64_t count = 1;
  for (int a = d - 1; a >= 0; --a) {
    strides_[a] = static_cast<SiteId>(count);
    count *= extent(a);
    if (count > (std::int64_t{1} << 30)) throw LatticeError("box too large");
  }
  site_count_ = static_cast<SiteId>(count);

  auto tables = std::make_shared<Tables>();
  tables->forward.assign(static_cast<std::size_t>(site_count_) * d, kNoEdge);
  tables->endpoints.reserve(static_cast<std::size_t>(expected_edge_count(lower_, upper_)));
  for (SiteId s = 0; s < site_count_; ++s) {
    for (int a = 0; a < d; ++a) {
      if (coordinate(s, a) < upper_[a]) {
        tables->forward[s * d + a] = static_cast<EdgeId>(tables->endpoints.size());
        tables->endpoints.push_back({s, s + strides_[a], a});
      }
    }
  }
  tables_ = std::move(tables);
}

LatticeBox LatticeBox::from_sizes(const std::vector<int>& sizes) {
  Site lo = Site::Zero(static_cast<Eigen::Index>(sizes.size()));
  Site hi(lo.size());
  for (std::size_t a = 0; a < sizes.size(); ++a) {
    if (sizes[a] < 1) throw LatticeError("box sizes must be positive");
    hi[static_cast<Eigen::Index>(a)] = sizes[a] - 1;
  }
  return LatticeBox(lo, hi);
}

bool LatticeBox::contains(const Site& x) const {
  if (x.size() != lower_.size()) return false;
  return (x.array() >= lower_.array()).all() && (x.array() <= upper_.array()).all();
}

SiteId LatticeBox::index_or_none(const Site& x) const {
  if (!contains(x)) return kNoSite;
  SiteId id = 0;
  for (int a = 0; a < dimension(); ++a) id += (x[a] - lower_[a]) * strides_[a];
  return id;
}

SiteId LatticeBox::index(const Site& x) const {
  const SiteId id = index_or_none(x);
  if (id == kNoSite) {
    std::ostringstream os;
    os << "site (" << x.transpose() << ") outside box " << describe();
    throw LatticeError(os.str());
  }
  return id;
}

Site LatticeBox::site(SiteId id) const {
  Site x(dimension());
  for (int a = 0; a < dimension(); ++a) x[a] = coordinate(id, a);
  return x;
}

std::int64_t LatticeBox::expected_edge_count(const Site& lower, const Site& upper) {
  std::int64_t total = 0;
  for (Eigen::Index a = 0; a < lower.size(); ++a) {
    std::int64_t n = upper[a] - lower[a];
    for (Eigen::Index b = 0; b < lower.size(); ++b) {
      if (b != a) n *= upper[b] - lower[b] + 1;
    }
    total += n;
  }
  return total;
}

std::string LatticeBox::describe() const {
  std::ostringstream os;
  os << "[";
  for (int a = 0; a < dimension(); ++a) os << (a ? "," : "") << lower_[a] << ".." << upper_[a];
  os << "]";
  return os.str();
}

LatticeBox bounding_box(const std::vector<Site>& sites, int margin) {
  if (sites.empty()) throw LatticeError("bounding_box of no sites");
  Site lo = sites.front();
  Site hi = sites.front();
  for (const Site& s : sites) {
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
  }
  lo.array() -= margin;
  hi.array() += margin;
  return LatticeBox(lo, hi);
}

Site floor_site(const Point& x) {
  // Absorbs rounding in products such as 24 * (1.0 / 6).
  constexpr double kSlack = 1e-9;
  Site s(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s[i] = static_cast<int>(std::floor(x[i] + kSlack));
  return s;
}

}  // namespace perco
