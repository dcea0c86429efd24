// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is 1 when any criterion fails.

#include "corpus.hpp"
#include "oracle_events.hpp"
#include "perco/cli.hpp"
#include "perco/events.hpp"
#include "perco/experiments.hpp"
#include "perco/geometry/triple.hpp"
#include "perco/strip.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace perco;
namespace fs = std::filesystem;
using Json = cli::Json;
using V = geometry::Vec<double>;
using M = geometry::Mat<double>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

V vec(double a, double b) {
  V v(2);
  v << a, b;
  return v;
}

fs::path scratch_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / ("perco_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  return Json::parse(in);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli_run(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "perco");
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

// 1. Monte Carlo against exact enumeration.
Outcome oracle_equivalence() {
  const auto cases = oracle_events::cases();
  int within = 0;
  double worst = 0;
  std::string misses;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const double exact = oracle_events::exact_value(c);
    const Estimate est = mc_estimate(c.event, c.p, c.box, 1'000'000, derive_seed(20240611, i));
    const double se = std::sqrt(exact * (1 - exact) / static_cast<double>(est.trials));
    const double z = se > 0 ? std::abs(est.mean - exact) / se : (est.mean == exact ? 0.0 : INFINITY);
    worst = std::max(worst, z);
    if (z <= 4.0) {
      ++within;
    } else {
      misses += " " + c.event.name() + "@" + num(c.p);
    }
  }
  return {cases.size() >= 20 && within >= 19,
          std::to_string(within) + "/" + std::to_string(cases.size()) + " within 4 sigma, max |z| " + num(worst) +
              (misses.empty() ? "" : ", outside:" + misses)};
}

// 2. Exact renewal identity for cone-confined connections.
Outcome renewal_identity() {
  const Norm xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, Point::Unit(2, 0), 0.2, 0.1, SlabEdgeRule::half_open);
  const StripModel strip(an, 2);
  Decimal worst = 0;
  int checked = 0;
  for (const char* p : {"0.2", "0.3"}) {
    const auto prob = ExactProbability::parse(p);
    for (int len = 1; len <= 5; ++len) {
      for (int y = 0; y < 2; ++y) {
        const RenewalCheck r = verify_renewal(strip, prob, make_site({0, 0}), make_site({len, y}));
        if (r.residual > worst) worst = r.residual;
        ++checked;
      }
    }
  }
  return {worst <= Decimal("1e-12"), std::to_string(checked) + " pairs, max residual " + to_string(worst, 3)};
}

// 3. Decay rate along the axes at p = 0.3.
Outcome decay_rate() {
  const std::vector<int> N{4, 5, 6, 7, 8, 9, 10, 11, 12};
  const XiEstimate a = estimate_xi(0.3, make_site({1, 0}), N, 1'000'000, 31, 4);
  const XiEstimate b = estimate_xi(0.3, make_site({0, 1}), N, 1'000'000, 32, 4);
  const double bound = -std::log(0.3);
  bool ok = true;
  for (const XiEstimate* x : {&a, &b}) ok = ok && x->slope > 0 && x->slope <= bound + 3 * x->slope_stderr;
  const double gap = std::abs(a.slope - b.slope), tol = 3 * std::hypot(a.slope_stderr, b.slope_stderr);
  ok = ok && gap <= tol;
  return {ok, "e1 " + num(a.slope) + " +- " + num(a.slope_stderr) + ", e2 " + num(b.slope) + " +- " +
                  num(b.slope_stderr) + ", bound " + num(bound) + ", |difference| " + num(gap) + " vs " + num(tol)};
}

std::vector<Norm> geometry_norms() {
  M a(2, 2);
  a << 2.0, 0.3, 0.3, 1.0;
  std::vector<geometry::TableRow<double>> rows{{vec(1, 0), 1.05},
                                               {vec(2, 1).normalized(), 1.05 * 0.98},
                                               {vec(1, 1).normalized(), 1.05 * 0.96}};
  return {Norm::euclidean(2, 1.3), Norm::quadratic(a), Norm::lp(2, 1.5, 0.8), Norm::lp(2, 3.0),
          Norm::tabulated(geometry::densify_square_symmetric(rows, 2))};
}

// 4. Norm and potential identities on random inputs.
Outcome geometry_suite() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> lam(0.1, 10.0);
  double euler = 0, triangle = 0, hom = 0, hess_hom = 0, polar = 0, residual = 0;
  int triples = 0;
  for (const Norm& xi : geometry_norms()) {
    for (int i = 0; i < 1000; ++i) {
      const V x = vec(n(rng), n(rng)), y = vec(n(rng), n(rng));
      const double l = lam(rng), fx = xi(x);
      euler = std::max(euler, std::abs(geometry::norm_gradient(xi, x).dot(x) - fx) / fx);
      triangle = std::max(triangle, (xi(V(x + y)) - xi(x) - xi(y)) / (xi(x) + xi(y)));
      hom = std::max(hom, std::abs(xi(V(l * x)) - l * fx) / (l * fx));
      const M h = geometry::norm_hessian(xi, x);
      const M hl = geometry::norm_hessian(xi, V(l * x));
      hess_hom = std::max(hess_hom, (l * hl - h).norm() / h.norm());
      const V t = geometry::polar_point(xi, x);
      polar = std::max(polar, std::abs(t.dot(x) - fx) / fx);
    }
    for (int i = 0; i < 40; ++i) {
      const geometry::Anchors<double> anchors{vec(n(rng), n(rng)), vec(n(rng), n(rng)), vec(n(rng), n(rng))};
      const auto tri = geometry::minimize_phi(xi, anchors);
      if (!tri.admissible) continue;
      residual = std::max(residual, tri.gradient_residual);
      ++triples;
    }
  }
  const Norm e = Norm::euclidean(2);
  const double R = 2.5;
  geometry::Anchors<double> eq;
  for (int i = 0; i < 3; ++i) {
    const double angle = 2 * std::numbers::pi * i / 3 + 0.3;
    eq[static_cast<std::size_t>(i)] = vec(R * std::cos(angle), R * std::sin(angle));
  }
  const auto tri = geometry::minimize_phi(e, eq);
  const double closed = 3 / (2 * R);
  const double hess_err = (tri.hessian - closed * M::Identity(2, 2)).norm() / closed;
  const bool ok = euler <= 1e-6 && triangle <= 1e-6 && hom <= 1e-6 && hess_hom <= 1e-6 && polar <= 1e-6 &&
                  triples > 0 && residual <= 1e-8 && tri.admissible && hess_err <= 1e-4;
  return {ok, "euler " + num(euler) + ", triangle excess " + num(triangle) + ", homogeneity " + num(hom) +
                  ", hessian homogeneity " + num(hess_hom) + ", polar " + num(polar) + ", minimizer residual " +
                  num(residual) + " over " + std::to_string(triples) + " triples, equilateral hessian " +
                  num(hess_err)};
}

// 5. Admissibility and the quadratic lower bound.
Outcome admissibility_probes() {
  const Norm e = Norm::euclidean(2);
  const bool collinear = !geometry::in_X3prime(e, geometry::Anchors<double>{vec(0, 0), vec(1, 0), vec(3, 0)}).admissible;
  geometry::Anchors<double> eq;
  for (int i = 0; i < 3; ++i) {
    const double angle = 2 * std::numbers::pi * i / 3;
    eq[static_cast<std::size_t>(i)] = vec(std::cos(angle), std::sin(angle));
  }
  const auto d = geometry::in_X3prime(e, eq);
  double margin_err = 0;
  for (double m : d.margins) margin_err = std::max(margin_err, std::abs(m - std::sqrt(3.0)));
  const auto tri = geometry::minimize_phi(e, eq);
  const auto probe = geometry::quadratic_bound_probe(e, tri, 0.05, 10000);
  const bool ok = collinear && d.admissible && margin_err <= 1e-6 && probe.samples == 10000 && probe.positive &&
                  probe.constant > 0;
  return {ok, std::string("collinear ") + (collinear ? "rejected" : "accepted") + ", equilateral margins " +
                  num(d.margins[0]) + " (error " + num(margin_err) + "), probe constant " + num(probe.constant) +
                  " over " + std::to_string(probe.samples) + " samples"};
}

// 6. Hand-built corpus and random three-armed clusters.
Outcome skeleton_determinism() {
  const auto cases = corpus::hand_built();
  int passed = 0;
  std::string first_failure;
  for (const auto& c : cases) {
    const std::string msg = c.run();
    if (msg.empty()) {
      ++passed;
    } else if (first_failure.empty()) {
      first_failure = c.name + ": " + msg;
    }
  }
  const Norm xi = Norm::euclidean(2);
  const LatticeBox box(make_site({0, 0}), make_site({14, 14}));
  const Triple n{make_site({1, 1}), make_site({13, 2}), make_site({7, 13})};
  std::mt19937_64 rng(6006);
  std::bernoulli_distribution open(0.5);
  int trees = 0, compatible = 0;
  while (trees < 1000) {
    BondConfiguration c(box, 0.0);
    for (EdgeId e = 0; e < box.edge_count(); ++e) c.set_open(e, open(rng));
    const auto junctions = find_junctions(c, n);
    if (junctions.empty()) continue;
    ++trees;
    const auto witness = event_F(c, junctions.front(), n);
    if (witness && tree_skeleton(c, *witness, 3.0, xi).compatible) ++compatible;
  }
  const bool ok = cases.size() >= 15 && passed == static_cast<int>(cases.size()) && compatible == trees;
  return {ok, std::to_string(passed) + "/" + std::to_string(cases.size()) + " corpus cases, " +
                  std::to_string(compatible) + "/" + std::to_string(trees) + " random trees compatible" +
                  (first_failure.empty() ? "" : ", first failure " + first_failure)};
}

// 7. Exact f/h along the strip.
Outcome mass_gap() {
  const Norm xi = Norm::euclidean(2);
  const ConnectionAnalyzer an(xi, Point::Unit(2, 0), 0.2, 0.1, SlabEdgeRule::half_open);
  const StripModel strip(an, 2);
  const MassGapTable t = mass_gap_scan(strip, ExactProbability::parse("0.3"), {2, 3, 4, 5});
  std::string seq;
  for (const auto& r : t.rows) seq += (seq.empty() ? "" : ", ") + to_string(r.ratio, 4);
  return {t.strictly_decreasing, "ratios by length 2..5: " + seq};
}

// 8. Junction fluctuations at N = 24.
Outcome local_limit() {
  const fs::path out = scratch_root() / "llt";
  std::string log;
  const int code = cli_run({"llt", "--p", "0.35", "--N", "24", "--trials", "100000000", "--seed", "8", "--beta", "0.3",
                            "--out", out.string()},
                           &log);
  if (!fs::exists(out / "llt.json")) return {false, "llt run did not produce output (exit " + std::to_string(code) + "): " + log};
  const Json r = read_json(out / "llt.json");
  const auto z = r["mean_z"].get<std::vector<double>>();
  double zmax = 0;
  for (double v : z) zmax = std::max(zmax, std::abs(v));
  const double cov = r["covariance_error"].get<double>(), far = r["far_pair_fraction"].get<double>();
  const bool ok = zmax <= 3 && cov <= 0.25 && far < 0.01;
  return {ok, std::to_string(r["trials"].get<long long>()) + " trials, " + std::to_string(r["samples"].get<long long>()) +
                  " samples, max |mean z| " + num(zmax) + " (<= 3), covariance error " + num(cov) +
                  " (<= 0.25), far-pair fraction " + num(far) + " (< 0.01)"};
}

// 9. Far-junction ratio over the N ladder and in alpha.
Outcome far_junction() {
  const fs::path out = scratch_root() / "tail";
  std::string log;
  const int code = cli_run({"tail", "--p", "0.35", "--N", "12,18,24", "--trials", "30000000", "--seed", "9", "--alpha",
                            "0.6,0.65,0.7,0.75,0.8,0.9", "--out", out.string()},
                           &log);
  if (!fs::exists(out / "tail.json")) return {false, "tail run did not produce output (exit " + std::to_string(code) + "): " + log};
  const Json j = read_json(out / "tail.json");
  bool alpha_ok = true, ladder_ok = true;
  std::string seq;
  double prev = NAN, prev_se = NAN;
  for (const auto& rep : j["reports"]) {
    long long prev_hits = -1;
    for (const auto& row : rep["rows"]) {
      const long long hits = row["hits"].get<long long>();
      if (prev_hits >= 0 && hits > prev_hits) alpha_ok = false;
      prev_hits = hits;
      if (std::abs(row["alpha"].get<double>() - 0.75) > 1e-12) continue;
      const double r = row["ratio"].get<double>(), se = row["ratio_stderr"].get<double>();
      if (!std::isnan(prev) && r - prev > 2 * std::hypot(se, prev_se)) ladder_ok = false;
      prev = r;
      prev_se = se;
      seq += (seq.empty() ? "" : ", ") + std::string("N ") + std::to_string(rep["N"].get<int>()) + ": " + num(r) +
             " +- " + num(se) + " of " + std::to_string(rep["connected"].get<long long>());
    }
  }
  return {alpha_ok && ladder_ok && !seq.empty(),
          "alpha 0.75 ratios " + seq + (alpha_ok ? ", monotone in alpha" : ", NOT monotone in alpha")};
}

// 10. Replays across worker counts.
Outcome reproducibility() {
  const fs::path root = scratch_root() / "replay";
  const std::vector<std::vector<std::string>> runs{
      {"sample", "--box", "9x7", "--p", "0.4", "--seed", "5", "--trial", "2", "--dump", "c.bin"},
      {"oracle", "--box", "3x3", "--p", "0.3", "--event", "corner-corner"},
      {"xi", "--p", "0.3", "--N", "2..6", "--trials", "40000"},
      {"oz", "--p", "0.35", "--N", "2..7", "--trials", "40000"},
      {"llt", "--N", "12", "--trials", "200000", "--xi-trials", "20000"},
      {"tail", "--N", "8,10", "--trials", "100000", "--xi-trials", "20000"},
      {"renewal", "--lengths", "1..3"},
      {"massgap", "--lengths", "2..4"},
      {"skeleton", "--trials", "2000"}};
  int identical = 0, total = 0;
  std::string bad;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path dir = root / std::to_string(i);
    auto args = runs[i];
    args.insert(args.end(), {"--workers", "1", "--out", dir.string()});
    cli_run(args);
    if (!fs::exists(dir / "manifest.json")) {
      bad += " " + runs[i][0] + "(no manifest)";
      continue;
    }
    const Json manifest = read_json(dir / "manifest.json");
    for (int workers : {2, 3}) {
      ++total;
      const fs::path again = root / (std::to_string(i) + "_w" + std::to_string(workers));
      std::ostringstream o, e;
      bool same = cli::replay((dir / "manifest.json").string(), again.string(), workers, o, e) == cli::kOk;
      for (const auto& f : manifest["outputs"]) {
        const std::string name = f["file"].get<std::string>();
        same = same && slurp(dir / name) == slurp(again / name);
      }
      if (same) {
        ++identical;
      } else {
        bad += " " + runs[i][0] + "@" + std::to_string(workers);
      }
    }
  }
  return {identical == total && total > 0,
          std::to_string(identical) + "/" + std::to_string(total) + " replays byte-identical" +
              (bad.empty() ? "" : ", differing:" + bad)};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{{1, "oracle equivalence", oracle_equivalence},
                                   {2, "exact renewal identity", renewal_identity},
                                   {3, "decay rate sanity", decay_rate},
                                   {4, "geometry suite", geometry_suite},
                                   {5, "admissibility probes", admissibility_probes},
                                   {6, "break points and skeletons", skeleton_determinism},
                                   {7, "mass gap surrogate", mass_gap},
                                   {8, "junction local limit shape", local_limit},
                                   {9, "far junction tail", far_junction},
                                   {10, "reproducibility", reproducibility}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << " " << c.title << ": " << o.detail
              << " [" << num(secs) << " s]" << std::endl;
  }
  fs::remove_all(scratch_root());
  return failed ? 1 : 0;
}
