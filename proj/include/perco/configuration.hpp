#ifndef PERCO_CONFIGURATION_HPP
#define PERCO_CONFIGURATION_HPP

#include "perco/lattice.hpp"

#include <concepts>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace perco {

/// Counter-based keyed generator: the state of edge `e` in trial `i` of a run
/// with master seed `s` is a pure function of (s, i, e).
class EdgeKey {
 public:
  EdgeKey(std::uint64_t master_seed, std::uint64_t trial_index);

  std::uint64_t bits(EdgeId e) const { return mix(key_ + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(e) + 1)); }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
};

/// Threshold turning 64 random bits into a Bernoulli(p) draw.
class BernoulliThreshold {
 public:
  explicit BernoulliThreshold(double p);
  bool operator()(std::uint64_t bits) const { return always_ || bits < threshold_; }
  double p() const { return p_; }

 private:
  double p_;
  std::uint64_t threshold_ = 0;
  bool always_ = false;
};

struct SeedProvenance {
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
  friend bool operator==(const SeedProvenance&, const SeedProvenance&) = default;
};

/// Anything exposing a box and a per-edge open/closed state.
template <typename C>
concept BondState = requires(const C& c, EdgeId e) {
  { c.box() } -> std::convertible_to<const LatticeBox&>;
  { c.is_open(e) } -> std::convertible_to<bool>;
};

/// Materialized open/closed assignment on the edges of a box.
class BondConfiguration {
 public:
  BondConfiguration() = default;
  BondConfiguration(LatticeBox box, double p, std::optional<SeedProvenance> seed = std::nullopt);

  static BondConfiguration all_closed(const LatticeBox& box) { return BondConfiguration(box, 0.0); }
  static BondConfiguration all_open(const LatticeBox& box);
  /// Configuration whose open edges are exactly those of the listed site pairs.
  static BondConfiguration from_open_pairs(const LatticeBox& box, const std::vector<std::pair<Site, Site>>& pairs);
  /// Open edges along a nearest-neighbour walk through `sites`.
  static BondConfiguration from_walks(const LatticeBox& box, const std::vector<std::vector<Site>>& walks);

  const LatticeBox& box() const { return box_; }
  double p() const { return p_; }
  const std::optional<SeedProvenance>& seed() const { return seed_; }
  EdgeId edge_count() const { return box_.edge_count(); }

  bool is_open(EdgeId e) const { return (words_[static_cast<std::size_t>(e) >> 6] >> (e & 63)) & 1U; }
  void set_open(EdgeId e, bool open);
  void flip(EdgeId e) { words_[static_cast<std::size_t>(e) >> 6] ^= std::uint64_t{1} << (e & 63); }
  /// Opens the edge joining two adjacent sites.
  void open_between(const Site& a, const Site& b);

  EdgeId open_count() const;
  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const BondConfiguration& a, const BondConfiguration& b) {
    return a.box_ == b.box_ && a.words_ == b.words_;
  }

 private:
  LatticeBox box_;
  double p_ = 0.0;
  std::optional<SeedProvenance> seed_;
  std::vector<std::uint64_t> words_;
};

/// Lazily evaluated sample: edge states are computed on demand from the key,
/// so exploring a small cluster never touches the rest of the box. Agrees
/// bit-for-bit with sample_configuration for the same inputs.
class KeyedSample {
 public:
  KeyedSample(const LatticeBox& box, double p, std::uint64_t master_seed, std::uint64_t trial_index)
      : box_(&box), key_(master_seed, trial_index), threshold_(p) {}

  const LatticeBox& box() const { return *box_; }
  bool is_open(EdgeId e) const { return threshold_(key_.bits(e)); }

 private:
  const LatticeBox* box_;
  EdgeKey key_;
  BernoulliThreshold threshold_;
};

static_assert(BondState<BondConfiguration>);
static_assert(BondState<KeyedSample>);

BondConfiguration sample_configuration(double p, const LatticeBox& box, std::uint64_t master_seed,
                                       std::uint64_t trial_index);

/// Materializes any bond state.
template <BondState C>
BondConfiguration materialize(const C& c, double p) {
  BondConfiguration out(c.box(), p);
  for (EdgeId e = 0; e < c.box().edge_count(); ++e) out.set_open(e, c.is_open(e));
  return out;
}

/// Binary layout (little-endian):
///   "PBC1" | u32 d | i32 lower[d] | i32 upper[d] | f64 p | u8 has_seed |
///   u64 master_seed | u64 trial_index | u64 edge_count | ceil(m/8) bytes,
///   edge i stored in byte i/8, bit i%8.
void write_configuration(std::ostream& os, const BondConfiguration& config);
BondConfiguration read_configuration(std::istream& is);

}  // namespace perco

#endif
