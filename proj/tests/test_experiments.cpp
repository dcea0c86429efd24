#include "doctest.h"

#include "oracle_events.hpp"
#include "perco/experiments.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <random>

using namespace perco;
using oracle_events::S;

namespace {

EventSpec make_event(EventKind kind, std::vector<Site> sites) {
  EventSpec e;
  e.kind = kind;
  e.sites = std::move(sites);
  return e;
}

XiRow synthetic_row(int n, double prob) {
  XiRow r;
  r.N = n;
  r.length = n;
  r.hits = 1;
  r.trials = 1;
  r.probability = prob;
  return r;
}

std::vector<Point> gaussian_draws(const Eigen::MatrixXd& cov, const Point& mean, int count, std::uint64_t seed) {
  const Eigen::MatrixXd l = cov.llt().matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Point> out;
  for (int i = 0; i < count; ++i) {
    Point z(cov.rows());
    for (Eigen::Index a = 0; a < z.size(); ++a) z[a] = normal(rng);
    out.push_back(mean + l * z);
  }
  return out;
}

}  // namespace

TEST_CASE("estimate invariants") {
  const LatticeBox box = oracle_events::Box(3, 3);
  const Estimate always = mc_estimate(make_event(EventKind::always, {}), 0.3, box, 1000, 1, 1);
  CHECK(always.mean == 1.0);
  CHECK(always.stderr_ == 0.0);
  const Estimate none = mc_estimate(make_event(EventKind::connect, {S(0, 0), S(2, 2)}), 0.0, box, 1000, 1, 1);
  CHECK(none.hits == 0);
  CHECK(none.mean == 0.0);

  const Estimate e = make_estimate("x", 37, 100, 5, box, 0.3);
  CHECK(e.mean == doctest::Approx(0.37));
  CHECK(e.stderr_ == doctest::Approx(std::sqrt(0.37 * 0.63 / 100)));
}

TEST_CASE("estimates do not depend on the worker count") {
  const LatticeBox box = oracle_events::Box(4, 4);
  const EventSpec ev = make_event(EventKind::E, {S(0, 0), S(3, 1), S(1, 3)});
  const Estimate a = mc_estimate(ev, 0.45, box, 3 * kTrialChunk + 17, 99, 1);
  const Estimate b = mc_estimate(ev, 0.45, box, 3 * kTrialChunk + 17, 99, 3);
  CHECK(a.hits == b.hits);
  const Estimate c = mc_estimate(ev, 0.45, box, 3 * kTrialChunk + 17, 100, 1);
  CHECK(a.hits != c.hits);
}

TEST_CASE("event specs are validated") {
  const LatticeBox box = oracle_events::Box(3, 3);
  CHECK_THROWS_AS(mc_estimate(make_event(EventKind::connect, {S(0, 0), S(5, 0)}), 0.3, box, 10, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(mc_estimate(make_event(EventKind::E, {S(0, 0), S(1, 0)}), 0.3, box, 10, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(mc_estimate(make_event(EventKind::E, {S(0, 0), S(1, 0), S(1, 0)}), 0.3, box, 10, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(mc_estimate(make_event(EventKind::always, {}), 0.3, box, 0, 1, 1), std::invalid_argument);
  EventSpec h = make_event(EventKind::h, {S(2, 0), S(0, 0)});
  h.direction = Point::Unit(2, 0);
  CHECK_THROWS_AS(mc_estimate(h, 0.3, box, 10, 1, 1), std::invalid_argument);
  CHECK(parse_event_kind("f_cone") == EventKind::f_cone);
  CHECK_THROWS(parse_event_kind("G"));
}

TEST_CASE("estimates agree with the exact oracle across seeds") {
  const LatticeBox box = oracle_events::Box(3, 3);
  const EventSpec ev = make_event(EventKind::E, {S(0, 0), S(2, 0), S(0, 2)});
  const double exact = exact_probability(box, 0.45, EventEvaluator(ev)).value();
  int inside = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Estimate e = mc_estimate(ev, 0.45, box, 4000, seed, 1);
    if (std::abs(e.mean - exact) <= 4.0 * e.stderr_) ++inside;
  }
  CHECK(inside >= 95);
}

TEST_CASE("confidence intervals cover the exact values") {
  int covered = 0;
  const auto cases = oracle_events::cases();
  REQUIRE(cases.size() == 20);
  std::uint64_t seed = 7;
  for (const auto& c : cases) {
    if (c.box.edge_count() > 20) continue;  // the largest boxes are left to the acceptance run
    const double exact = oracle_events::exact_value(c);
    const Estimate e = mc_estimate(c.event, c.p, c.box, 20000, seed++, 1);
    if (std::abs(e.mean - exact) <= 1.96 * std::max(e.stderr_, 1e-12)) ++covered;
    CHECK_MESSAGE(std::abs(e.mean - exact) <= 5.0 * e.stderr_ + 1e-12, c.event.name());
  }
  CHECK(covered >= 14);
}

TEST_CASE("weighted line fit") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> s{0.1, 0.2, 0.1, 0.5};
  std::vector<double> y;
  for (double v : x) y.push_back(0.5 + 1.25 * v);
  const LineFit exact = weighted_line_fit(x, y, s);
  CHECK(exact.slope == doctest::Approx(1.25));
  CHECK(exact.intercept == doctest::Approx(0.5));
  CHECK(exact.chi2 == doctest::Approx(0.0).epsilon(1e-9));

  // Noisy data against the normal equations solved by Eigen.
  const std::vector<double> yn{1.9, 3.1, 4.2, 5.0};
  const LineFit fit = weighted_line_fit(x, yn, s);
  Eigen::MatrixXd a(4, 2);
  Eigen::VectorXd b(4);
  for (int i = 0; i < 4; ++i) {
    a(i, 0) = 1.0 / s[i];
    a(i, 1) = x[i] / s[i];
    b[i] = yn[i] / s[i];
  }
  const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(b);
  const Eigen::MatrixXd cov = (a.transpose() * a).inverse();
  CHECK(fit.intercept == doctest::Approx(sol[0]));
  CHECK(fit.slope == doctest::Approx(sol[1]));
  CHECK(fit.slope_stderr == doctest::Approx(std::sqrt(cov(1, 1))));
  CHECK_THROWS(weighted_line_fit({1, 1}, {1, 2}, {1, 1}));
}

TEST_CASE("correlation length estimate") {
  CHECK_THROWS_AS(estimate_xi(0.0, S(1, 0), {2, 3}, 100, 1, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_xi(0.5, S(1, 0), {2, 3}, 100, 1, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_xi(0.3, S(1, 0), {3, 2}, 100, 1, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(estimate_xi(0.3, S(0, 0), {2, 3}, 100, 1, 2, 1), std::invalid_argument);

  const XiEstimate a = estimate_xi(0.3, S(1, 0), {2, 3, 4, 5}, 100000, 11, 3, 1);
  const XiEstimate b = estimate_xi(0.3, S(0, 1), {2, 3, 4, 5}, 100000, 12, 3, 1);
  CHECK(a.rows.size() == 4);
  CHECK(a.positive);
  CHECK(a.within_upper);
  CHECK(a.upper_bound == doctest::Approx(-std::log(0.3)));
  CHECK(std::abs(a.slope - b.slope) <= 3.0 * std::hypot(a.slope_stderr, b.slope_stderr));
  const XiEstimate d = estimate_xi(0.3, S(1, 1), {1, 2}, 1000, 11, 2, 1);
  CHECK(d.upper_bound == doctest::Approx(-std::log(0.3) * std::sqrt(2.0)));

  // Zero-hit rows are dropped from the first one on.
  const XiEstimate c = estimate_xi(0.1, S(1, 0), {1, 2, 8, 9}, 2000, 3, 1, 1);
  CHECK(c.largest_usable_N == 2);
  CHECK(c.dropped == std::vector<int>{8, 9});
  CHECK_THROWS_AS(estimate_xi(0.05, S(1, 0), {1, 9, 10}, 200, 3, 1, 1), InsufficientData);
}

TEST_CASE("prefactor flatness on synthetic asymptotics") {
  const double xi = 0.8, psi = 0.6;
  std::vector<XiRow> rows;
  for (int n = 4; n <= 16; ++n) {
    rows.push_back(synthetic_row(n, psi / std::sqrt(2.0 * std::numbers::pi * n) * std::exp(-xi * n)));
  }
  const PrefactorEstimate corrected = oz_prefactor(rows, xi, 2);
  CHECK(corrected.power == 0.5);
  CHECK(corrected.flatness <= 0.02);
  for (const auto& r : corrected.rows) CHECK(r.value == doctest::Approx(psi));
  const PrefactorEstimate naive = oz_prefactor(rows, xi, 2, 0.0);
  CHECK(naive.flatness > 0.02);
  for (std::size_t i = 1; i < naive.rows.size(); ++i) CHECK(naive.rows[i].value < naive.rows[i - 1].value);

  rows.push_back(synthetic_row(17, 0.0));
  rows.back().hits = 0;
  CHECK(oz_prefactor(rows, xi, 2).dropped == std::vector<int>{17});
  CHECK(flatness({1.0, 1.0, 1.0}) == 0.0);
  CHECK(flatness({0.9, 1.0, 1.1}) == doctest::Approx(0.2));
}

TEST_CASE("gaussian fit recovers a known law") {
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  const auto draws = gaussian_draws(cov, Point::Zero(2), 100000, 3);
  const GaussianFit fit = fit_gaussian(draws, cov);
  CHECK(fit.samples == 100000);
  CHECK(std::abs(fit.mean_z[0]) <= 3.0);
  CHECK(std::abs(fit.mean_z[1]) <= 3.0);
  CHECK(fit.covariance_error <= 0.05);
  CHECK(std::abs(fit.kurtosis_z) <= 4.0);

  // A shifted mean and a wrong covariance are both detected.
  const auto shifted = gaussian_draws(cov, Point::Constant(2, 0.05), 100000, 4);
  const GaussianFit bad = fit_gaussian(shifted, 2.0 * cov);
  CHECK(std::abs(bad.mean_z[0]) > 3.0);
  CHECK(bad.covariance_error > 0.4);

  // Uniform samples have the wrong fourth moment.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point> flat;
  for (int i = 0; i < 20000; ++i) flat.push_back(Point{{u(rng), u(rng)}});
  CHECK(fit_gaussian(flat, Eigen::MatrixXd::Identity(2, 2) / 3.0).kurtosis_z < -10.0);
  CHECK_THROWS_AS(fit_gaussian({Point::Zero(2)}, cov), InsufficientData);
}

TEST_CASE("junction trials") {
  const LatticeBox box(S(0, 0), S(6, 6));
  const Triple anchors{S(0, 0), S(6, 0), S(3, 6)};
  const JunctionRun open = run_junction_trials(box, 1.0, anchors, 5, 1, 1);
  CHECK(open.connected == 5);
  CHECK(open.junctions[0] == find_junctions(BondConfiguration::all_open(box), anchors));
  CHECK(open.junctions[0].size() > 30);

  const JunctionRun run = run_junction_trials(box, 0.5, anchors, 2 * kTrialChunk, 3, 1);
  const JunctionRun again = run_junction_trials(box, 0.5, anchors, 2 * kTrialChunk, 3, 2);
  CHECK(run.trial_index == again.trial_index);
  CHECK(run.junctions == again.junctions);
  REQUIRE(run.connected > 0);
  for (std::size_t i = 0; i < run.trial_index.size(); ++i) {
    const BondConfiguration c = sample_configuration(0.5, box, 3, run.trial_index[i]);
    CHECK(event_E(c, anchors));
    CHECK(std::is_sorted(run.junctions[i].begin(), run.junctions[i].end(), SiteLess{}));
  }
}

TEST_CASE("far junction tail") {
  const LatticeBox box(S(0, 0), S(8, 8));
  const Triple anchors{S(0, 0), S(8, 0), S(4, 8)};
  const Point center{{4.0, 2.3}};
  const std::vector<double> alphas{0.55, 0.6, 0.7, 0.8, 0.9, 0.95};

  // All open: every site with three disjoint routes is a junction, so the
  // farthest junction is (1, 8) or (7, 8) at distance sqrt(41.49) < 8^0.9.
  const TailReport all = tail_from_run(run_junction_trials(box, 1.0, anchors, 3, 1, 1), center, 8, 1.0, alphas);
  for (const auto& r : all.rows) CHECK(r.ratio == (r.threshold <= std::sqrt(41.49) ? 1.0 : 0.0));

  const JunctionRun run = run_junction_trials(box, 0.55, anchors, 3 * kTrialChunk, 9, 1);
  REQUIRE(run.connected > 0);
  const TailReport t = tail_from_run(run, center, 8, 0.55, alphas);
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    CHECK(t.rows[i].hits <= t.rows[i - 1].hits);
    CHECK(t.rows[i].ratio <= t.rows[i - 1].ratio);
  }
  // Nearly impossible inside the box.
  const TailReport edge = tail_from_run(run, center, 8, 0.55, {0.999});
  CHECK(edge.rows[0].threshold > 7.9);

  const Norm xi = Norm::euclidean(2);
  const geometry::Anchors<double> unit{Point{{0.0, 0.0}}, Point{{1.0, 0.0}}, Point{{0.5, 0.8}}};
  CHECK_THROWS_AS(far_junction_tail(xi, 0.4, unit, 8, {0.4}, 10, 1, 2, 1), std::invalid_argument);
  const TailReport small = far_junction_tail(xi, 0.5, unit, 8, {0.6, 0.75}, 2000, 1, 2, 1);
  CHECK(small.anchors[2] == S(4, 6));
  CHECK(small.rows.size() == 2);
  CHECK(small.rows[1].hits <= small.rows[0].hits);
}

TEST_CASE("junction histogram") {
  const Norm xi = Norm::euclidean(2);
  const geometry::Anchors<double> line{Point{{0.0, 0.0}}, Point{{0.5, 0.0}}, Point{{1.0, 0.0}}};
  CHECK_THROWS_AS(llt_junction_histogram(xi, 0.45, line, 6, 10, 1, 0.3, 2, 1), geometry::GeometryError);

  const double h = std::sqrt(3.0) / 2.0;
  const geometry::Anchors<double> tri{Point{{0.0, 0.0}}, Point{{1.0, 0.0}}, Point{{0.5, h}}};
  const LLTReport r = llt_junction_histogram(xi, 0.5, tri, 8, 20000, 2, 0.3, 2, 1);
  CHECK(r.anchors[1] == S(8, 0));
  CHECK(r.anchors[2] == S(4, 6));
  CHECK(r.connected > 0);
  CHECK(r.samples.size() + r.without_junction == r.connected);
  CHECK(r.far_pairs <= r.multi_junction);
  CHECK(r.far_pair_fraction <= 1.0);
  // The realized triple (0,0), (1,0), (1/2,3/4) is isosceles; its Fermat point
  // sees the base at 30 degrees, and H = Σ (I − u uᵀ) / r over the three arms.
  CHECK(r.triple.x0[0] == doctest::Approx(0.5));
  CHECK(r.triple.x0[1] == doctest::Approx(0.5 / std::sqrt(3.0)));
  Eigen::Matrix2d closed = Eigen::Matrix2d::Zero();
  for (const auto& a : r.triple.anchors) {
    const Eigen::Vector2d v = a - r.triple.x0;
    closed += (Eigen::Matrix2d::Identity() - v * v.transpose() / v.squaredNorm()) / v.norm();
  }
  CHECK((r.predicted - Eigen::MatrixXd(closed.inverse())).norm() <= 1e-8);
  for (const auto& y : r.samples) CHECK(y.allFinite());
}

TEST_CASE("mass gap scan") {
  const Norm xi = Norm::euclidean(2);
  const ConnectionAnalyzer analyzer(xi, Point::Unit(2, 0), 0.2, 0.1, SlabEdgeRule::half_open);
  const StripModel strip(analyzer, 2);
  const MassGapTable t = mass_gap_scan(strip, 0.3, {1, 2, 3});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].ratio == 1);
  CHECK(t.rows[0].h_cone == t.rows[0].h);
  for (const auto& r : t.rows) CHECK(r.f_cone <= r.h_cone);
  CHECK_THROWS_AS(mass_gap_scan(strip, 0.3, {0}), std::invalid_argument);
}

TEST_CASE("derived seeds") {
  CHECK(derive_seed(1, 4) != derive_seed(1, 5));
  CHECK(derive_seed(1, 4) != derive_seed(2, 4));
  CHECK(derive_seed(1, 4) == derive_seed(1, 4));
}
