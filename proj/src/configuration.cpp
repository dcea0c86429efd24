#include "perco/configuration.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace perco {

EdgeKey::EdgeKey(std::uint64_t master_seed, std::uint64_t trial_index)
    : key_(mix(mix(master_seed ^ 0x6a09e667f3bcc908ULL) + trial_index * 0xd1b54a32d192ed03ULL)) {}

BernoulliThreshold::BernoulliThreshold(double p) : p_(p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in [0,1]");
  if (p >= 1.0) {
    always_ = true;
  } else {
    threshold_ = static_cast<std::uint64_t>(std::ldexp(p, 64));
  }
}

BondConfiguration::BondConfiguration(LatticeBox box, double p, std::optional<SeedProvenance> seed)
    : box_(std::move(box)), p_(p), seed_(seed), words_((static_cast<std::size_t>(box_.edge_count()) + 63) / 64, 0) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability must lie in [0,1]");
}

BondConfiguration BondConfiguration::all_open(const LatticeBox& box) {
  BondConfiguration c(box, 1.0);
  for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, true);
  return c;
}

BondConfiguration BondConfiguration::from_open_pairs(const LatticeBox& box,
                                                     const std::vector<std::pair<Site, Site>>& pairs) {
  BondConfiguration c(box, 0.0);
  for (const auto& [a, b] : pairs) c.open_between(a, b);
  return c;
}

BondConfiguration BondConfiguration::from_walks(const LatticeBox& box, const std::vector<std::vector<Site>>& walks) {
  BondConfiguration c(box, 0.0);
  for (const auto& walk : walks) {
    for (std::size_t i = 1; i < walk.size(); ++i) c.open_between(walk[i - 1], walk[i]);
  }
  return c;
}

void BondConfiguration::set_open(EdgeId e, bool open) {
  const std::uint64_t mask = std::uint64_t{1} << (e & 63);
  auto& w = words_[static_cast<std::size_t>(e) >> 6];
  w = open ? (w | mask) : (w & ~mask);
}

void BondConfiguration::open_between(const Site& a, const Site& b) {
  const Site diff = b - a;
  if (diff.cwiseAbs().sum() != 1) throw LatticeError("sites are not nearest neighbours");
  const SiteId ia = box_.index(a);
  const SiteId ib = box_.index(b);
  int axis = 0;
  while (diff[axis] == 0) ++axis;
  const EdgeId e = diff[axis] > 0 ? box_.forward_edge(ia, axis) : box_.forward_edge(ib, axis);
  set_open(e, true);
}

EdgeId BondConfiguration::open_count() const {
  EdgeId n = 0;
  for (auto w : words_) n += std::popcount(w);
  return n;
}

BondConfiguration sample_configuration(double p, const LatticeBox& box, std::uint64_t master_seed,
                                       std::uint64_t trial_index) {
  BondConfiguration c(box, p, SeedProvenance{master_seed, trial_index});
  const EdgeKey key(master_seed, trial_index);
  const BernoulliThreshold open(p);
  for (EdgeId e = 0; e < box.edge_count(); ++e) {
    if (open(key.bits(e))) c.set_open(e, true);
  }
  return c;
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("truncated configuration stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_configuration(std::ostream& os, const BondConfiguration& config) {
  const LatticeBox& box = config.box();
  os.write("PBC1", 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(box.dimension()));
  for (int a = 0; a < box.dimension(); ++a) put<std::int32_t>(os, box.lower()[a]);
  for (int a = 0; a < box.dimension(); ++a) put<std::int32_t>(os, box.upper()[a]);
  put<double>(os, config.p());
  const auto& seed = config.seed();
  put<std::uint8_t>(os, seed ? 1 : 0);
  put<std::uint64_t>(os, seed ? seed->master_seed : 0);
  put<std::uint64_t>(os, seed ? seed->trial_index : 0);
  const auto m = static_cast<std::uint64_t>(config.edge_count());
  put<std::uint64_t>(os, m);
  for (std::uint64_t byte = 0; byte < (m + 7) / 8; ++byte) {
    const std::uint64_t word = config.words()[byte / 8];
    put<std::uint8_t>(os, static_cast<std::uint8_t>(word >> (8 * (byte % 8))));
  }
}

BondConfiguration read_configuration(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "PBC1", 4) != 0) throw std::runtime_error("bad configuration magic");
  const auto d = get<std::uint32_t>(is);
  if (d < 1 || d > 16) throw std::runtime_error("bad configuration dimension");
  Site lo(d), hi(d);
  for (std::uint32_t a = 0; a < d; ++a) lo[a] = get<std::int32_t>(is);
  for (std::uint32_t a = 0; a < d; ++a) hi[a] = get<std::int32_t>(is);
  const double p = get<double>(is);
  const bool has_seed = get<std::uint8_t>(is) != 0;
  const auto master = get<std::uint64_t>(is);
  const auto trial = get<std::uint64_t>(is);
  std::optional<SeedProvenance> seed;
  if (has_seed) seed = SeedProvenance{master, trial};
  BondConfiguration c(LatticeBox(lo, hi), p, seed);
  const auto m = get<std::uint64_t>(is);
  if (m != static_cast<std::uint64_t>(c.edge_count())) throw std::runtime_error("edge count does not match box");
  for (std::uint64_t byte = 0; byte < (m + 7) / 8; ++byte) {
    const auto b = get<std::uint8_t>(is);
    for (int bit = 0; bit < 8; ++bit) {
      const std::uint64_t e = byte * 8 + static_cast<std::uint64_t>(bit);
      if (e < m && ((b >> bit) & 1U)) c.set_open(static_cast<EdgeId>(e), true);
    }
  }
  return c;
}

}  // namespace perco
