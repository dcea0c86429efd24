#include "doctest.h"

#include "perco/strip.hpp"

#include <optional>
#include <random>

using namespace perco;

namespace {

Site S(int x, int y) {
  Site s(2);
  s << x, y;
  return s;
}

Point e1() {
  Point t(2);
  t << 1.0, 0.0;
  return t;
}

std::vector<Site> row(int from, int to, int y) {
  std::vector<Site> w;
  for (int x = from; x <= to; ++x) w.push_back(S(x, y));
  return w;
}

// Slab cluster of k in x ∈ [k.x, n.x] and its t-break points for t = e1, by
// coordinate flood fill and the literal definition.
std::optional<std::vector<Site>> brute_t_breaks(const BondConfiguration& c, const Site& k, const Site& n) {
  const LatticeBox& box = c.box();
  std::vector<char> in(static_cast<std::size_t>(box.site_count()), 0);
  std::vector<Site> queue{k};
  in[box.index(k)] = 1;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const Site x = queue[h];
    for (int a = 0; a < 2; ++a) {
      for (int sign : {-1, 1}) {
        Site y = x;
        y[a] += sign;
        if (!box.contains(y) || y[0] < k[0] || y[0] > n[0] || in[box.index(y)]) continue;
        const Site lo = sign > 0 ? x : y;
        if (!c.is_open(box.forward_edge(box.index(lo), a))) continue;
        in[box.index(y)] = 1;
        queue.push_back(y);
      }
    }
  }
  if (!in[box.index(n)]) return std::nullopt;
  std::vector<Site> out;
  for (int x = k[0] + 1; x <= n[0] - 1; ++x) {
    for (int y = box.lower()[1]; y <= box.upper()[1]; ++y) {
      const Site b = S(x, y);
      if (!in[box.index(b)] || !in[box.index(S(x - 1, y))] || !in[box.index(S(x + 1, y))]) continue;
      int count = 0;
      for (const Site& s : queue) count += (s[0] >= x - 1 && s[0] <= x + 1) ? 1 : 0;
      if (count == 3) out.push_back(b);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("rational direction snaps exactly") {
  const RationalDirection t(e1());
  CHECK(t.level(S(3, 7)) == 3'000'000);
  CHECK(t.leading_axis() == 0);
  CHECK(t.snap_error() == 0.0);
  Point d(2);
  d << 0.5, 0.5;
  CHECK(RationalDirection(d).leading_axis() == 0);
  d << 0.1234567, 0.9;
  const RationalDirection r(d);
  CHECK(r.leading_axis() == 1);
  CHECK(r.snap_error() == doctest::Approx(3e-8).epsilon(0.05));
}

TEST_CASE("straight segments") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const LatticeBox box(S(-1, 0), S(5, 2));
  for (int len = 1; len <= 4; ++len) {
    const auto c = BondConfiguration::from_walks(box, {row(0, len, 1)});
    const auto fl = an.classify(c, S(0, 1), S(len, 1));
    CAPTURE(len);
    CHECK(fl.connected);
    CHECK(fl.strip_connected);
    CHECK(fl.clean_ends);
    CHECK(fl.irreducible == (len == 1));
    CHECK(fl.cone_confined);
    CHECK(fl.cone_irreducible == (len == 1));
    CHECK(fl.clean_tail);
    CHECK_FALSE(fl.cone_head);  // k - e is not in the cluster
    CHECK(fl.report.t_break_points.size() == static_cast<std::size_t>(std::max(0, len - 1)));
    CHECK(fl.report.anchor == S(len, 1));
  }
  const auto c = BondConfiguration::from_walks(box, {row(0, 4, 1)});
  const auto rep = an.break_points(c, S(0, 1), S(4, 1));
  CHECK(rep.t_break_points == std::vector<Site>{S(1, 1), S(2, 1), S(3, 1)});
  CHECK(rep.cone_break_points == std::vector<Site>{S(3, 1), S(2, 1), S(1, 1)});
  CHECK(rep.last_index == 4);
  REQUIRE(rep.confinement_holds.has_value());
  CHECK(*rep.confinement_holds);
}

TEST_CASE("straight segment extended below k has a clean head") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const LatticeBox box(S(-1, 0), S(5, 2));
  const auto c = BondConfiguration::from_walks(box, {row(-1, 3, 1)});
  const auto fl = an.classify(c, S(0, 1), S(3, 1));
  CHECK(fl.cone_head);
  CHECK_FALSE(fl.cone_head_irreducible);
  CHECK(fl.clean_ends);  // the slab starts at k
}

TEST_CASE("spur next to k spoils the clean ends") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const LatticeBox box(S(0, 0), S(4, 2));
  const auto c = BondConfiguration::from_walks(box, {row(0, 4, 1), {S(0, 1), S(0, 2)}});
  const auto fl = an.classify(c, S(0, 1), S(4, 1));
  CHECK(fl.strip_connected);
  CHECK_FALSE(fl.clean_ends);
  CHECK_FALSE(fl.irreducible);
  CHECK_FALSE(fl.cone_confined);
  CHECK(fl.clean_tail);
  // the spur sits in the window of (1,1) only
  CHECK(fl.report.t_break_points == std::vector<Site>{S(2, 1), S(3, 1)});
}

TEST_CASE("blob at the midpoint removes every t-break point") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const LatticeBox box(S(0, 0), S(4, 2));
  const auto c = BondConfiguration::from_walks(box, {row(0, 4, 1), {S(2, 1), S(2, 2)}});
  const auto fl = an.classify(c, S(0, 1), S(4, 1));
  CHECK(fl.report.t_break_points.empty());
  CHECK(fl.irreducible);
  CHECK(fl.cone_irreducible);
  CHECK(fl.report.cone_break_points.empty());
  CHECK(fl.report.last_index == 0);
  CHECK_FALSE(fl.report.confinement_holds.has_value());
}

TEST_CASE("a tall branch leaves the cone") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const LatticeBox box(S(0, 0), S(4, 3));
  // (2,3) - (k - 0.1 e) = (2.1, 3): 2.1 < 0.8 * |(2.1, 3)|
  const auto c = BondConfiguration::from_walks(box, {row(0, 4, 0), {S(2, 0), S(2, 1), S(2, 2), S(2, 3)}});
  const auto fl = an.classify(c, S(0, 0), S(4, 0));
  CHECK(fl.clean_ends);
  CHECK(fl.irreducible);
  CHECK_FALSE(fl.cone_confined);
  CHECK_FALSE(fl.cone_irreducible);
}

TEST_CASE("cone spacing skips close break points") {
  const auto xi = Norm::euclidean(2);
  // 2K/eta = 2: consecutive cone break points are at least two steps apart
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.2);
  const LatticeBox box(S(0, 0), S(6, 1));
  const auto c = BondConfiguration::from_walks(box, {row(0, 6, 0)});
  const auto rep = an.break_points(c, S(0, 0), S(6, 0));
  CHECK(rep.anchor == S(6, 0));
  CHECK(rep.cone_break_points == std::vector<Site>{S(4, 0), S(2, 0)});
  CHECK(rep.last_index == 3);
}

TEST_CASE("closed configuration gives no connection") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1);
  const BondConfiguration c(LatticeBox(S(0, 0), S(4, 2)), 0.0);
  const auto fl = an.classify(c, S(0, 1), S(4, 1));
  CHECK_FALSE(fl.connected);
  CHECK_FALSE(fl.strip_connected);
  CHECK_FALSE(fl.clean_ends);
  CHECK_FALSE(fl.irreducible);
  CHECK_FALSE(fl.cone_confined);
  CHECK_FALSE(fl.cone_irreducible);
  CHECK_FALSE(fl.clean_tail);
  CHECK_FALSE(fl.cone_head);
  CHECK_THROWS_AS(an.break_points(c, S(0, 1), S(4, 1)), std::invalid_argument);
  CHECK_THROWS_AS(an.classify(c, S(4, 1), S(0, 1)), std::invalid_argument);
}

TEST_CASE("t-break points match the definition on random configurations") {
  const LatticeBox box(S(-2, 0), S(8, 2));
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    BondConfiguration c(box, 0.0);
    std::bernoulli_distribution open(0.6);
    for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, open(rng));
    const Site k = S(0, 1), n = S(6, 1);
    const auto expected = brute_t_breaks(c, k, n);
    if (!expected) {
      CHECK_THROWS_AS(t_break_points(c, e1(), k, n), std::invalid_argument);
      continue;
    }
    CHECK(t_break_points(c, e1(), k, n) == *expected);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("t-break points ignore edges outside the slab") {
  const LatticeBox box(S(-2, 0), S(8, 2));
  std::mt19937_64 rng(5);
  const Site k = S(0, 1), n = S(6, 1);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    BondConfiguration c(box, 0.0);
    std::bernoulli_distribution open(0.65);
    for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, open(rng));
    std::vector<Site> before;
    try {
      before = t_break_points(c, e1(), k, n);
    } catch (const std::invalid_argument&) {
      continue;
    }
    for (EdgeId e = 0; e < box.edge_count(); ++e) {
      const auto& ends = box.endpoints(e);
      const int lo = box.coordinate(ends.lo, 0), hi = box.coordinate(ends.hi, 0);
      if (hi < k[0] || lo > n[0] || (lo < k[0] && hi == k[0]) || (lo == n[0] && hi > n[0])) c.flip(e);
    }
    CHECK(t_break_points(c, e1(), k, n) == before);
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("connection flags are nested") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.3, 0.2);
  const LatticeBox box(S(-1, 0), S(7, 2));
  std::mt19937_64 rng(3);
  int connected = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    BondConfiguration c(box, 0.0);
    std::bernoulli_distribution open(0.55);
    for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, open(rng));
    const auto fl = an.classify(c, S(0, 1), S(5, 1));
    if (!fl.connected) continue;
    ++connected;
    CHECK((!fl.clean_ends || fl.strip_connected));
    CHECK((!fl.irreducible || fl.clean_ends));
    CHECK((!fl.cone_confined || fl.clean_ends));
    CHECK((!fl.cone_irreducible || fl.cone_confined));
    CHECK((!fl.clean_tail_irreducible || fl.clean_tail));
    CHECK((!fl.cone_head_irreducible || fl.cone_head));
    // every cone break point is a t-break point
    for (const Site& b : fl.report.cone_break_points) {
      CHECK(std::find(fl.report.t_break_points.begin(), fl.report.t_break_points.end(), b) !=
            fl.report.t_break_points.end());
    }
    CHECK((!fl.irreducible || fl.cone_irreducible == fl.cone_confined));
  }
  CHECK(connected > 200);
}

TEST_CASE("exact connection values on tiny strips") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1, SlabEdgeRule::half_open);
  const ExactProbability p = ExactProbability::parse("0.3");

  const auto same = exact_h_f(LatticeBox(S(0, 0), S(0, 0)), p, an, S(0, 0), S(0, 0));
  CHECK(same.h == 1);
  CHECK(same.f == 0);
  CHECK(same.h_cone == 1);
  CHECK(same.f_cone == 0);

  const auto pair = exact_h_f(LatticeBox(S(0, 0), S(1, 0)), p, an, S(0, 0), S(1, 0));
  CHECK(pair.edge_count == 1);
  CHECK(pair.h == Decimal("0.3"));
  CHECK(pair.f == Decimal("0.3"));
  CHECK(pair.h_cone == Decimal("0.3"));

  const StripModel strip(an, 2);
  // one open step and a closed rung at k; the rung at n is not part of the model
  CHECK(strip.values(p, S(0, 0), S(1, 0)).h == Decimal("0.21"));
  // a straight path with closed rungs at levels 0 and 1
  const auto two = strip.values(p, S(0, 0), S(2, 0));
  CHECK(two.h == Decimal("0.0441"));
  CHECK(two.f == 0);
  CHECK(strip.values(p, S(0, 0), S(3, 0)).f == 0);
  CHECK(strip.values(p, S(0, 0), S(1, 1)).h == 0);

  const auto closed = strip.values(ExactProbability(0.0), S(0, 0), S(3, 0));
  CHECK(closed.h == 0);
  CHECK(closed.f == 0);
  CHECK(closed.h_cone == 0);
  CHECK(closed.f_cone == 0);
  CHECK_THROWS_AS(exact_h_f(strip.box(S(0, 0), S(2, 0)), p, an, S(2, 0), S(0, 0)), std::invalid_argument);
}

TEST_CASE("renewal identity holds on width-2 strips") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.1, SlabEdgeRule::half_open);
  const StripModel strip(an, 2);
  for (const char* text : {"0", "0.2", "0.3"}) {
    const auto p = ExactProbability::parse(text);
    for (int len = 1; len <= 4; ++len) {
      for (int y = 0; y < 2; ++y) {
        const auto r = verify_renewal(strip, p, S(0, 0), S(len, y));
        CAPTURE(text);
        CAPTURE(len);
        CHECK(r.residual <= Decimal("1e-12"));
      }
    }
  }
  // adjacent ends: only b = k contributes
  const auto r = verify_renewal(strip, 0.3, S(0, 0), S(1, 0));
  CHECK(r.terms == 1);
  CHECK(r.lhs == Decimal("0.21"));
}

TEST_CASE("renewal identity breaks when the cone spacing exceeds one step") {
  const auto xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, e1(), 0.2, 0.5, SlabEdgeRule::half_open);
  const StripModel strip(an, 2);
  CHECK(verify_renewal(strip, 0.3, S(0, 0), S(2, 0)).residual > Decimal("1e-3"));
}
