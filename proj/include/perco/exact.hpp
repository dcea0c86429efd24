#ifndef PERCO_EXACT_HPP
#define PERCO_EXACT_HPP

#include "perco/configuration.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <bit>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace perco {

using Decimal = boost::multiprecision::cpp_dec_float_50;
using Rational = boost::multiprecision::cpp_rational;

inline constexpr int kMaxEnumeratedEdges = 26;

/// Refusal to enumerate a graph with more than kMaxEnumeratedEdges edges.
class GuardError : public std::runtime_error {
 public:
  explicit GuardError(int required)
      : std::runtime_error("exact enumeration needs " + std::to_string(required) + " edges, guard is " +
                           std::to_string(kMaxEnumeratedEdges)),
        required_(required) {}
  int required_edges() const { return required_; }

 private:
  int required_;
};

/// A probability known both as a double and as an exact rational. Doubles are
/// read through their shortest round-trip decimal, so 0.3 becomes 3/10.
class ExactProbability {
 public:
  ExactProbability(double p);  // NOLINT: implicit on purpose
  static ExactProbability parse(const std::string& text);

  double value() const { return value_; }
  const Rational& rational() const { return rational_; }
  const std::string& text() const { return text_; }

 private:
  ExactProbability(double v, Rational r, std::string text)
      : value_(v), rational_(std::move(r)), text_(std::move(text)) {}
  double value_;
  Rational rational_;
  std::string text_;
};

/// Number of accepted configurations with each count of open edges: the event
/// probability is Σ_j counts[j] p^j (1-p)^(m-j).
struct OpenCountProfile {
  int edge_count = 0;
  std::vector<std::uint64_t> counts;

  Decimal evaluate(const ExactProbability& p) const;
  Rational evaluate_rational(const ExactProbability& p) const;
  std::uint64_t accepted() const;
};

struct ExactResult {
  Decimal probability;
  std::optional<Rational> rational;
  int edge_count = 0;
  double seconds = 0.0;
  OpenCountProfile profile;

  double value() const { return probability.convert_to<double>(); }
};

/// Exhaustive sum over the 2^m configurations of `box` for several events at
/// once. `events` maps a configuration to a bit mask, bit i set when event i
/// holds. The range is walked in Gray-code order in contiguous chunks, one
/// per task; the result does not depend on the split.
template <typename Events>
std::vector<OpenCountProfile> enumerate_events(const LatticeBox& box, int event_count, Events&& events) {
  const int m = box.edge_count();
  if (m > kMaxEnumeratedEdges) throw GuardError(m);
  const std::uint64_t total = std::uint64_t{1} << m;
  const std::uint64_t chunks = std::min<std::uint64_t>(total, 256);
  const auto width = static_cast<std::size_t>(m) + 1;
  std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(width * event_count, 0));
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(chunks); ++ci) {
    const auto c = static_cast<std::uint64_t>(ci);
    const std::uint64_t begin = total / chunks * c;
    const std::uint64_t end = c + 1 == chunks ? total : total / chunks * (c + 1);
    BondConfiguration config(box, 0.0);
    const std::uint64_t gray = begin ^ (begin >> 1);
    int open = 0;
    for (int e = 0; e < m; ++e) {
      if ((gray >> e) & 1U) {
        config.set_open(e, true);
        ++open;
      }
    }
    auto& counts = partial[c];
    for (std::uint64_t i = begin;;) {
      const std::uint32_t mask = events(static_cast<const BondConfiguration&>(config));
      for (int ev = 0; ev < event_count; ++ev) {
        if ((mask >> ev) & 1U) ++counts[static_cast<std::size_t>(ev) * width + static_cast<std::size_t>(open)];
      }
      if (++i == end) break;
      const int e = std::countr_zero(i);
      config.flip(e);
      open += config.is_open(e) ? 1 : -1;
    }
  }
  std::vector<OpenCountProfile> out(static_cast<std::size_t>(event_count),
                                    OpenCountProfile{m, std::vector<std::uint64_t>(width, 0)});
  for (const auto& counts : partial) {
    for (int ev = 0; ev < event_count; ++ev) {
      for (std::size_t j = 0; j < width; ++j) out[static_cast<std::size_t>(ev)].counts[j] += counts[ev * width + j];
    }
  }
  return out;
}

template <typename Event>
OpenCountProfile enumerate_event(const LatticeBox& box, Event&& event) {
  return enumerate_events(box, 1, [&](const BondConfiguration& c) -> std::uint32_t { return event(c) ? 1U : 0U; })
      .front();
}

template <typename Event>
ExactResult exact_probability(const LatticeBox& box, const ExactProbability& p, Event&& event, bool rational = false) {
  const auto start = std::chrono::steady_clock::now();
  ExactResult r;
  r.profile = enumerate_event(box, std::forward<Event>(event));
  r.edge_count = r.profile.edge_count;
  r.probability = r.profile.evaluate(p);
  if (rational) r.rational = r.profile.evaluate_rational(p);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string to_string(const Decimal& x, int digits = 20);
std::string to_string(const Rational& x);

}  // namespace perco

#endif
