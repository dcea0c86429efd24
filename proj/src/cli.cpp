#include "perco/cli.hpp"

#include "perco/experiments.hpp"
#include "perco/report.hpp"
#include "perco/skeleton.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#ifndef PERCO_VERSION
#define PERCO_VERSION "0.0.0"
#endif

namespace perco::cli {

namespace fs = std::filesystem;
using report::fmt;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

long long parse_integer(const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not an integer: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("not an integer: '" + text + "'");
  return v;
}

double parse_real(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    return parse_real(text.substr(0, slash)) / parse_real(text.substr(slash + 1));
  }
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("not a number: '" + text + "'");
  return v;
}

/// "4,5,8" or "4..12" or a mix such as "2..5,8".
std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(static_cast<int>(parse_integer(part)));
      continue;
    }
    const long long a = parse_integer(part.substr(0, dots)), b = parse_integer(part.substr(dots + 2));
    if (b < a || b - a > 100000) throw ConfigError("bad range '" + part + "'");
    for (long long v = a; v <= b; ++v) out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_real(part));
  return out;
}

Site parse_site(const std::string& text, int d) {
  const auto parts = split(text, ',');
  if (static_cast<int>(parts.size()) != d) throw ConfigError("site '" + text + "' needs " + std::to_string(d) + " coordinates");
  Site s(d);
  for (int i = 0; i < d; ++i) s[i] = static_cast<int>(parse_integer(parts[static_cast<std::size_t>(i)]));
  return s;
}

std::vector<Site> parse_sites(const std::string& text, int d) {
  std::vector<Site> out;
  if (text.empty()) return out;
  for (const auto& part : split(text, ';')) out.push_back(parse_site(part, d));
  return out;
}

Point parse_point(const std::string& text, int d) {
  const auto parts = split(text, ',');
  if (static_cast<int>(parts.size()) != d) throw ConfigError("point '" + text + "' needs " + std::to_string(d) + " coordinates");
  Point x(d);
  for (int i = 0; i < d; ++i) x[i] = parse_real(parts[static_cast<std::size_t>(i)]);
  return x;
}

LatticeBox parse_box(const std::string& text, int d) {
  std::vector<int> sizes;
  for (const auto& part : split(text, 'x')) sizes.push_back(static_cast<int>(parse_integer(part)));
  if (static_cast<int>(sizes.size()) != d) throw ConfigError("box '" + text + "' does not have dimension " + std::to_string(d));
  for (int s : sizes) {
    if (s < 1 || s > 4096) throw ConfigError("box sizes must lie in [1, 4096]");
  }
  return LatticeBox::from_sizes(sizes);
}

/// "e2" or integer components "1,1".
Site parse_direction(const std::string& text, int d) {
  if (!text.empty() && text[0] == 'e') {
    const long long i = parse_integer(text.substr(1));
    if (i < 1 || i > d) throw ConfigError("direction '" + text + "' outside dimension " + std::to_string(d));
    Site s = Site::Zero(d);
    s[static_cast<Eigen::Index>(i - 1)] = 1;
    return s;
  }
  const Site s = parse_site(text, d);
  if (s.cwiseAbs().sum() == 0) throw ConfigError("direction must be nonzero");
  return s;
}

Json list_json(const std::vector<int>& v) { return Json(v); }

std::vector<int> range(int a, int b) {
  std::vector<int> out;
  for (int i = a; i <= b; ++i) out.push_back(i);
  return out;
}

struct Output {
  std::string name;
  std::string content;
};

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::vector<Output> files;
  int workers = 1;

  void write(std::string name, std::string content) { files.push_back({std::move(name), std::move(content)}); }
  void write_json(std::string name, const Json& j) { write(std::move(name), j.dump(2) + "\n"); }
};

Json with_config(const Context& ctx, Json body) {
  Json out{{"config", ctx.cfg.result_config()}};
  for (auto it = body.begin(); it != body.end(); ++it) out[it.key()] = it.value();
  return out;
}

int dimension(const RunConfig& cfg) { return static_cast<int>(cfg.integer("d")); }

double subcritical_guard(const RunConfig& cfg) {
  const double p_max = cfg.real("p_max");
  if (p_max > 0.0) return p_max;
  if (dimension(cfg) == 2) return 0.45;
  throw ConfigError("no default subcritical guard for d = " + std::to_string(dimension(cfg)) + "; set p_max explicitly");
}

geometry::Anchors<double> unit_anchors(const RunConfig& cfg) {
  const auto parts = split(cfg.text("anchors"), ';');
  if (parts.size() != 3) throw ConfigError("anchors need three points 'x,y;x,y;x,y'");
  const int d = dimension(cfg);
  return {parse_point(parts[0], d), parse_point(parts[1], d), parse_point(parts[2], d)};
}

/// "euclidean", "table:dx,dy=value;..." or "estimate" (ξ̂ along e1 and the
/// diagonal, interpolated with the lattice symmetry).
Norm resolve_norm(Context& ctx, Json& info) {
  const RunConfig& cfg = ctx.cfg;
  const std::string spec = cfg.text("norm");
  const int d = dimension(cfg);
  if (spec == "euclidean") {
    info = Json{{"kind", "euclidean"}};
    return Norm::euclidean(d);
  }
  if (d != 2) throw ConfigError("tabulated and estimated norms are two-dimensional; use norm = euclidean");
  std::vector<geometry::TableRow<double>> samples;
  Json estimates = Json::array();
  if (spec.rfind("table:", 0) == 0) {
    for (const auto& entry : split(spec.substr(6), ';')) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) throw ConfigError("table entries look like 'dx,dy=value'");
      const Point dir = parse_point(entry.substr(0, eq), d);
      const double v = parse_real(entry.substr(eq + 1));
      if (!(dir.norm() > 0.0) || !(v > 0.0)) throw ConfigError("table entries need a nonzero direction and positive value");
      samples.push_back({dir.normalized(), v});
    }
  } else if (spec == "estimate") {
    const double p = cfg.real("p");
    const struct {
      Site step;
      const char* key;
      std::uint64_t stream;
    } runs[] = {{make_site({1, 0}), "xi_N", 0xA1}, {make_site({1, 1}), "xi_N_diag", 0xA2}};
    for (const auto& r : runs) {
      const XiEstimate xi = estimate_xi(p, r.step, cfg.ints(r.key), static_cast<std::uint64_t>(cfg.integer("xi_trials")),
                                        derive_seed(static_cast<std::uint64_t>(cfg.integer("seed")), r.stream),
                                        static_cast<int>(cfg.integer("margin")), ctx.workers, subcritical_guard(cfg));
      if (!(xi.slope > 0.0)) throw InsufficientData("estimated decay rate is not positive");
      samples.push_back(xi.table_row());
      estimates.push_back(report::to_json(xi));
    }
  } else {
    throw ConfigError("unknown norm '" + spec + "' (euclidean, estimate or table:...)");
  }
  if (samples.size() < 2) throw ConfigError("a tabulated norm needs at least two directions");
  Json rows = Json::array();
  for (const auto& s : samples) rows.push_back(Json{{"direction", report::to_json(s.direction)}, {"value", s.value}});
  info = Json{{"kind", spec == "estimate" ? "estimate" : "table"}, {"samples", rows}};
  if (!estimates.empty()) info["estimates"] = estimates;
  const int harmonics = std::min<int>(static_cast<int>(samples.size()) - 1, 3);
  return Norm::tabulated(geometry::densify_square_symmetric(samples, harmonics));
}

// Commands -------------------------------------------------------------------

int cmd_sample(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const LatticeBox box = parse_box(cfg.text("box"), dimension(cfg));
  const double p = cfg.real("p");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const auto trial = static_cast<std::uint64_t>(cfg.integer("trial"));
  const BondConfiguration c = sample_configuration(p, box, seed, trial);
  const ClusterPartition clusters = build_clusters(c);
  std::size_t largest = 0;
  for (SiteId s = 0; s < box.site_count(); ++s) largest = std::max<std::size_t>(largest, clusters.size_of(s));
  ctx.write_json("sample.json", with_config(ctx, Json{{"box", report::to_json(box)},
                                                      {"p", p},
                                                      {"master_seed", seed},
                                                      {"trial", trial},
                                                      {"edge_count", box.edge_count()},
                                                      {"open_edges", c.open_count()},
                                                      {"largest_cluster", largest}}));
  if (!cfg.text("dump").empty()) {
    std::ostringstream bin(std::ios::binary);
    write_configuration(bin, c);
    ctx.write(cfg.text("dump"), bin.str());
  }
  ctx.out << "edges " << box.edge_count() << ", open " << c.open_count() << ", largest cluster " << largest << "\n";
  return kOk;
}

EventSpec oracle_event(const RunConfig& cfg, const LatticeBox& box) {
  const int d = dimension(cfg);
  EventSpec e;
  const std::string name = cfg.text("event");
  if (name == "corner-corner") {
    e.kind = EventKind::connect;
    e.sites = {box.lower(), box.upper()};
  } else {
    try {
      e.kind = parse_event_kind(name);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string(ex.what()) + " (corner-corner, always, connect, E, F, h, f, h_tail, f_tail, h_cone, f_cone)");
    }
    e.sites = parse_sites(cfg.text("sites"), d);
  }
  e.direction = parse_direction(cfg.text("dir"), d).cast<double>();
  e.eta = cfg.real("eta");
  e.K = cfg.real("K");
  e.validate(box);
  return e;
}

int cmd_oracle(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const LatticeBox box = parse_box(cfg.text("box"), dimension(cfg));
  const EventSpec event = oracle_event(cfg, box);
  if (box.edge_count() > kMaxEnumeratedEdges) throw GuardError(box.edge_count());
  const ExactProbability p(cfg.real("p"));
  const ExactResult r = exact_probability(box, p, EventEvaluator(event), true);
  const std::string rational = to_string(*r.rational);
  ctx.write_json("oracle.json", with_config(ctx, Json{{"event", event.name()},
                                                      {"box", report::to_json(box)},
                                                      {"p", p.value()},
                                                      {"p_rational", to_string(p.rational())},
                                                      {"edge_count", r.edge_count},
                                                      {"probability", to_string(r.probability, 30)},
                                                      {"rational", rational}}));
  ctx.out << (cfg.flag("rational") ? rational : to_string(r.probability, 20)) << "\n";
  return kOk;
}

int cmd_xi(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const XiEstimate xi = estimate_xi(cfg.real("p"), parse_direction(cfg.text("dir"), dimension(cfg)), cfg.ints("N"),
                                    static_cast<std::uint64_t>(cfg.integer("trials")),
                                    static_cast<std::uint64_t>(cfg.integer("seed")), static_cast<int>(cfg.integer("margin")),
                                    ctx.workers, subcritical_guard(cfg));
  ctx.write("xi.csv", report::xi_csv(xi).str());
  ctx.write_json("xi.json", with_config(ctx, report::to_json(xi)));
  ctx.out << "xi_hat " << fmt(xi.slope) << " +- " << fmt(xi.slope_stderr) << " (upper bound " << fmt(xi.upper_bound)
          << ", largest usable N " << xi.largest_usable_N << ")\n";
  int code = kOk;
  if (!xi.positive) {
    ctx.out << "FAIL slope is not positive\n";
    code = kStatisticalFailure;
  }
  if (!xi.within_upper) {
    ctx.out << "FAIL slope exceeds the direct-path bound by more than 3 stderr\n";
    code = kStatisticalFailure;
  }
  return code;
}

int cmd_oz(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const OzScan scan = oz_prefactor_scan(cfg.real("p"), parse_direction(cfg.text("dir"), dimension(cfg)), cfg.ints("N"),
                                        static_cast<std::uint64_t>(cfg.integer("trials")),
                                        static_cast<std::uint64_t>(cfg.integer("seed")),
                                        static_cast<int>(cfg.integer("margin")), ctx.workers, subcritical_guard(cfg));
  ctx.write("oz.csv", report::prefactor_csv(scan).str());
  ctx.write_json("oz.json", with_config(ctx, Json{{"xi", report::to_json(scan.xi)},
                                                  {"corrected_slope", scan.corrected.slope},
                                                  {"corrected_slope_stderr", scan.corrected.slope_stderr},
                                                  {"prefactor", report::to_json(scan.prefactor)}}));
  ctx.out << "corrected xi_hat " << fmt(scan.corrected.slope) << ", flatness " << fmt(scan.prefactor.flatness) << "\n";
  return kOk;
}

int cmd_llt(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const auto N = cfg.ints("N");
  if (N.size() != 1) throw ConfigError("llt takes a single N");
  Json norm_info;
  const Norm xi = resolve_norm(ctx, norm_info);
  const LLTReport r = llt_junction_histogram(xi, cfg.real("p"), unit_anchors(cfg), N.front(),
                                             static_cast<std::uint64_t>(cfg.integer("trials")),
                                             static_cast<std::uint64_t>(cfg.integer("seed")), cfg.real("beta"),
                                             static_cast<int>(cfg.integer("margin")), ctx.workers);
  const double cov_tol = cfg.real("cov_tol"), spread_tol = cfg.real("spread_tol");
  const bool mean_ok = r.fit.mean_z.cwiseAbs().maxCoeff() <= 3.0;
  const bool cov_ok = r.fit.covariance_error <= cov_tol;
  const bool spread_ok = r.far_pair_fraction < spread_tol;
  Json body = report::to_json(r);
  body["norm"] = norm_info;
  body["checks"] = Json{{"mean_within_3sigma", mean_ok}, {"covariance_within_tolerance", cov_ok},
                        {"spread_below_tolerance", spread_ok}};
  ctx.write("llt.csv", report::llt_csv(r).str());
  ctx.write_json("llt.json", with_config(ctx, body));
  ctx.out << "conditioned " << r.connected << ", samples " << r.samples.size() << ", mean z (" << fmt(r.fit.mean_z[0]);
  for (Eigen::Index i = 1; i < r.fit.mean_z.size(); ++i) ctx.out << ", " << fmt(r.fit.mean_z[i]);
  ctx.out << "), covariance error " << fmt(r.fit.covariance_error) << ", far-pair fraction "
          << fmt(r.far_pair_fraction) << "\n";
  int code = kOk;
  if (!mean_ok) ctx.out << "FAIL mean fluctuation beyond 3 sigma\n";
  if (!cov_ok) ctx.out << "FAIL covariance error above " << fmt(cov_tol) << "\n";
  if (!spread_ok) ctx.out << "FAIL far-pair fraction not below " << fmt(spread_tol) << "\n";
  if (!(mean_ok && cov_ok && spread_ok)) code = kStatisticalFailure;
  return code;
}

int cmd_tail(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  Json norm_info;
  const Norm xi = resolve_norm(ctx, norm_info);
  const auto x = unit_anchors(cfg);
  std::vector<double> alphas = cfg.reals("alpha");
  std::sort(alphas.begin(), alphas.end());
  report::Csv csv = report::tail_csv_header();
  Json reports = Json::array();
  std::vector<TailReport> all;
  for (int n : cfg.ints("N")) {
    all.push_back(far_junction_tail(xi, cfg.real("p"), x, n, alphas, static_cast<std::uint64_t>(cfg.integer("trials")),
                                    derive_seed(static_cast<std::uint64_t>(cfg.integer("seed")), static_cast<std::uint64_t>(n)),
                                    static_cast<int>(cfg.integer("margin")), ctx.workers));
    report::append_tail_rows(csv, all.back());
    reports.push_back(report::to_json(all.back()));
  }
  bool alpha_ok = true, ladder_ok = true;
  for (const auto& t : all) {
    for (std::size_t i = 1; i < t.rows.size(); ++i) alpha_ok = alpha_ok && t.rows[i].hits <= t.rows[i - 1].hits;
  }
  for (std::size_t j = 1; j < all.size(); ++j) {
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const TailRow &a = all[j - 1].rows[i], &b = all[j].rows[i];
      if (b.ratio - a.ratio > 2.0 * std::hypot(a.ratio_stderr, b.ratio_stderr)) ladder_ok = false;
    }
  }
  ctx.write("tail.csv", csv.str());
  ctx.write_json("tail.json", with_config(ctx, Json{{"norm", norm_info},
                                                    {"reports", reports},
                                                    {"checks", {{"nonincreasing_in_alpha", alpha_ok},
                                                                {"nonincreasing_in_N", ladder_ok}}}}));
  for (const auto& t : all) {
    ctx.out << "N " << t.N << ": conditioned " << t.connected;
    for (const auto& r : t.rows) ctx.out << ", alpha " << fmt(r.alpha) << " ratio " << fmt(r.ratio);
    ctx.out << "\n";
  }
  if (!alpha_ok) ctx.out << "FAIL ratio increases with alpha\n";
  if (!ladder_ok) ctx.out << "FAIL ratio increases with N beyond the error bars\n";
  return alpha_ok && ladder_ok ? kOk : kStatisticalFailure;
}

StripModel strip_model(const RunConfig& cfg, const Norm& xi, std::unique_ptr<ConnectionAnalyzer>& holder) {
  const Site dir = parse_direction(cfg.text("dir"), dimension(cfg));
  if (dir.cwiseAbs().sum() != 1) throw ConfigError("strip experiments need an axis direction such as e1");
  holder = std::make_unique<ConnectionAnalyzer>(xi, dir.cast<double>(), cfg.real("eta"), cfg.real("K"),
                                                SlabEdgeRule::half_open);
  return StripModel(*holder, static_cast<int>(cfg.integer("width")));
}

int cmd_renewal(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Norm xi = Norm::euclidean(dimension(cfg));
  std::unique_ptr<ConnectionAnalyzer> analyzer;
  const StripModel strip = strip_model(cfg, xi, analyzer);
  const ExactProbability p(cfg.real("p"));
  report::Csv csv({"length", "offset", "lhs", "rhs", "residual", "terms"});
  Decimal worst = 0;
  const Site origin = Site::Zero(dimension(cfg));
  for (int len : cfg.ints("lengths")) {
    for (const Site& n : strip.sites(len, len)) {
      const RenewalCheck r = verify_renewal(strip, p, origin, n);
      Site offset = n;
      offset[strip.axis()] = 0;
      csv.row({std::to_string(len), fmt(offset, ' '), to_string(r.lhs), to_string(r.rhs), to_string(r.residual, 6),
               std::to_string(r.terms)});
      worst = std::max(worst, r.residual);
    }
  }
  const bool ok = worst <= Decimal("1e-12");
  ctx.write("renewal.csv", csv.str());
  ctx.write_json("renewal.json", with_config(ctx, Json{{"max_residual", to_string(worst, 6)}, {"identity_holds", ok}}));
  ctx.out << "max residual " << to_string(worst, 6) << "\n";
  if (!ok) ctx.out << "FAIL renewal residual above 1e-12\n";
  return ok ? kOk : kStatisticalFailure;
}

int cmd_massgap(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const Norm xi = Norm::euclidean(dimension(cfg));
  std::unique_ptr<ConnectionAnalyzer> analyzer;
  const StripModel strip = strip_model(cfg, xi, analyzer);
  const MassGapTable t = mass_gap_scan(strip, ExactProbability(cfg.real("p")), cfg.ints("lengths"));
  ctx.write("massgap.csv", report::mass_gap_csv(t).str());
  ctx.write_json("massgap.json", with_config(ctx, Json{{"strictly_decreasing", t.strictly_decreasing}}));
  for (const auto& r : t.rows) ctx.out << "length " << r.length << " f/h " << to_string(r.ratio, 12) << "\n";
  if (!t.strictly_decreasing) ctx.out << "FAIL ratio is not strictly decreasing\n";
  return t.strictly_decreasing ? kOk : kStatisticalFailure;
}

int cmd_skeleton(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const int d = dimension(cfg);
  const LatticeBox box = parse_box(cfg.text("box"), d);
  const auto sites = parse_sites(cfg.text("sites"), d);
  if (sites.size() != 3) throw ConfigError("skeleton needs three target sites 'x,y;x,y;x,y'");
  const Triple n{sites[0], sites[1], sites[2]};
  for (const auto& s : n) {
    if (!box.contains(s)) throw ConfigError("target site outside the box");
  }
  detail::require_distinct(n);
  Json norm_info;
  const Norm xi = resolve_norm(ctx, norm_info);
  const double p = cfg.real("p");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  const auto trials = static_cast<std::uint64_t>(cfg.integer("trials"));
  for (std::uint64_t i = 0; i < trials; ++i) {
    const BondConfiguration c = sample_configuration(p, box, seed, i);
    if (!event_E(c, n)) continue;
    const auto junctions = find_junctions(c, n);
    if (junctions.empty()) continue;
    const auto witness = event_F(c, junctions.front(), n);
    const TreeSkeleton tree = tree_skeleton(c, *witness, cfg.real("M"), xi);
    const DeltaGoodReport good = delta_good(tree, xi, cfg.real("delta"), cfg.real("eta"), cfg.real("R"));
    Json body = report::to_json(tree, good);
    body["trial"] = i;
    body["norm"] = norm_info;
    ctx.write("skeleton.csv", report::tree_csv(tree).str());
    ctx.write_json("skeleton.json", with_config(ctx, body));
    ctx.out << "trial " << i << ": junction (" << fmt(tree.junction, ',') << "), " << tree.points().size()
            << " skeleton points, compatible " << (tree.compatible ? "yes" : "no") << ", delta-good "
            << (good.good ? "yes" : "no") << "\n";
    if (!tree.compatible) ctx.out << "FAIL skeleton does not cover the cluster\n";
    return tree.compatible ? kOk : kStatisticalFailure;
  }
  throw InsufficientData("no trial among " + std::to_string(trials) + " had a junction for the targets");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

// Configuration --------------------------------------------------------------

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"sample", "oracle", "xi", "oz", "llt", "tail", "renewal", "skeleton", "massgap"};
  return c;
}

const std::vector<KeyInfo>& schema() {
  using T = KeyType;
  static const std::vector<KeyInfo> keys{
      {"schema_version", T::integer, kSchemaVersion, "configuration schema version"},
      {"command", T::text, "", "subcommand"},
      {"d", T::integer, 2, "lattice dimension"},
      {"p", T::real, 0.3, "edge probability"},
      {"box", T::text, "2x2", "box sizes in sites, e.g. 4x3"},
      {"margin", T::integer, 4, "padding around anchors and targets"},
      {"event", T::text, "corner-corner", "oracle event"},
      {"sites", T::text, "", "lattice sites 'x,y;x,y'"},
      {"dir", T::text, "e1", "lattice direction: e1, e2 or integer components '1,1'"},
      {"anchors", T::text, "0,0;0.5,0;0.25,0.42", "unit-scale triple 'x,y;x,y;x,y'"},
      {"N", T::int_list, list_json(range(4, 12)), "scale ladder, e.g. 4..12"},
      {"trials", T::integer, 1000000, "Monte-Carlo trials"},
      {"seed", T::integer, 1, "master seed"},
      {"trial", T::integer, 0, "trial index for sample"},
      {"eta", T::real, 0.2, "cone aperture in (0,1)"},
      {"K", T::real, 0.1, "cone apex shift"},
      {"M", T::real, 3.0, "skeleton scale"},
      {"R", T::real, 1.0, "delta-goodness cone distance factor"},
      {"delta", T::real, 0.5, "delta-goodness threshold"},
      {"alpha", T::real_list, Json::array({0.75}), "far-junction exponents in (1/2,1)"},
      {"beta", T::real, 0.3, "junction spread exponent in (0,1/2)"},
      {"width", T::integer, 2, "strip width"},
      {"lengths", T::int_list, list_json(range(1, 5)), "strip lengths"},
      {"norm", T::text, "estimate", "euclidean, estimate, or table:dx,dy=value;..."},
      {"xi_N", T::int_list, list_json(range(2, 12)), "ladder for the e1 decay rate"},
      {"xi_N_diag", T::int_list, list_json(range(1, 8)), "ladder for the diagonal decay rate"},
      {"xi_trials", T::integer, 1000000, "trials per decay-rate row"},
      {"cov_tol", T::real, 0.25, "llt covariance tolerance"},
      {"spread_tol", T::real, 0.01, "llt far-pair tolerance"},
      {"p_max", T::real, 0.0, "subcritical guard; 0 means 0.45 in d = 2"},
      {"rational", T::boolean, false, "oracle prints the exact rational"},
      {"dump", T::text, "", "sample writes the binary configuration under this name"},
      {"out", T::text, "perco_out", "output directory"},
      {"workers", T::integer, 0, "worker threads; 0 uses PERCO_WORKERS or all cores"},
  };
  return keys;
}

namespace {

const KeyInfo& key_info(const std::string& key) {
  for (const auto& k : schema()) {
    if (k.name == key) return k;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

Json coerce(const KeyInfo& k, const Json& v) {
  auto bad = [&] { return ConfigError("key '" + k.name + "' has the wrong type"); };
  switch (k.type) {
    case KeyType::integer:
      if (!v.is_number_integer()) throw bad();
      return v;
    case KeyType::real:
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case KeyType::text:
      if (!v.is_string()) throw bad();
      return v;
    case KeyType::boolean:
      if (!v.is_boolean()) throw bad();
      return v;
    case KeyType::int_list:
      if (!v.is_array()) throw bad();
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw bad();
      }
      return v;
    case KeyType::real_list: {
      if (!v.is_array()) throw bad();
      Json out = Json::array();
      for (const auto& e : v) {
        if (!e.is_number()) throw bad();
        out.push_back(e.get<double>());
      }
      return out;
    }
  }
  throw bad();
}

}  // namespace

RunConfig RunConfig::defaults(const std::string& command) {
  if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  RunConfig c;
  for (const auto& k : schema()) c.data_[k.name] = k.fallback;
  c.data_["command"] = command;
  const std::map<std::string, Json> overrides = [&]() -> std::map<std::string, Json> {
    if (command == "sample") return {{"box", "8x8"}, {"trials", 1}};
    if (command == "oracle") return {{"box", "2x2"}, {"p", 0.5}};
    if (command == "oz") return {{"p", 0.35}, {"N", list_json(range(6, 16))}};
    if (command == "llt") return {{"p", 0.35}, {"N", Json::array({24})}, {"trials", 10000000}};
    if (command == "tail") {
      return {{"p", 0.35}, {"N", Json::array({12, 18, 24})}, {"trials", 10000000},
              {"alpha", Json::array({0.6, 0.65, 0.7, 0.75, 0.8, 0.9})}};
    }
    if (command == "massgap") return {{"lengths", list_json(range(2, 5))}};
    if (command == "skeleton") {
      return {{"box", "16x16"}, {"p", 0.5}, {"sites", "2,2;13,2;7,13"}, {"trials", 10000}, {"norm", "euclidean"}};
    }
    return {};
  }();
  for (const auto& [k, v] : overrides) c.data_[k] = v;
  return c;
}

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion) {
    throw ConfigError("configuration needs \"schema_version\": " + std::to_string(kSchemaVersion));
  }
  if (!j.contains("command") || !j["command"].is_string()) throw ConfigError("configuration needs a \"command\"");
  RunConfig c = defaults(j["command"].get<std::string>());
  for (auto it = j.begin(); it != j.end(); ++it) c.set(it.key(), it.value());
  return c;
}

Json RunConfig::result_config() const {
  Json out = data_;
  out.erase("out");
  out.erase("workers");
  return out;
}

const std::string& RunConfig::command() const { return data_["command"].get_ref<const std::string&>(); }

void RunConfig::set(const std::string& key, const Json& value) {
  const KeyInfo& k = key_info(key);
  Json v = coerce(k, value);
  if (key == "schema_version" && v != kSchemaVersion) throw ConfigError("unsupported schema_version");
  if (key == "command" && data_.contains("command") && v != data_["command"]) {
    throw ConfigError("configuration is for command '" + v.get<std::string>() + "', not '" + command() + "'");
  }
  data_[key] = std::move(v);
}

void RunConfig::set_text(const std::string& key, const std::string& text) {
  const KeyInfo& k = key_info(key);
  switch (k.type) {
    case KeyType::integer: set(key, parse_integer(text)); break;
    case KeyType::real: set(key, parse_real(text)); break;
    case KeyType::text: set(key, text); break;
    case KeyType::boolean:
      if (text == "true" || text == "1" || text == "yes") {
        set(key, true);
      } else if (text == "false" || text == "0" || text == "no") {
        set(key, false);
      } else {
        throw ConfigError("key '" + key + "' expects true or false");
      }
      break;
    case KeyType::int_list: set(key, Json(parse_int_list(text))); break;
    case KeyType::real_list: set(key, Json(parse_real_list(text))); break;
  }
}

long long RunConfig::integer(const std::string& key) const { return data_.at(key).get<long long>(); }
double RunConfig::real(const std::string& key) const { return data_.at(key).get<double>(); }
std::string RunConfig::text(const std::string& key) const { return data_.at(key).get<std::string>(); }
bool RunConfig::flag(const std::string& key) const { return data_.at(key).get<bool>(); }
std::vector<int> RunConfig::ints(const std::string& key) const { return data_.at(key).get<std::vector<int>>(); }
std::vector<double> RunConfig::reals(const std::string& key) const { return data_.at(key).get<std::vector<double>>(); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  auto increasing = [](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 1 || (i && v[i] <= v[i - 1])) return false;
    }
    return !v.empty();
  };
  require(integer("d") >= 1 && integer("d") <= 8, "d must lie in [1, 8]");
  require(real("p") >= 0.0 && real("p") <= 1.0, "p must lie in [0, 1]");
  require(integer("margin") >= 0, "margin must be nonnegative");
  require(integer("trials") >= 1, "trials must be at least 1");
  require(integer("seed") >= 0, "seed must be nonnegative");
  require(integer("trial") >= 0, "trial must be nonnegative");
  require(real("eta") > 0.0 && real("eta") < 1.0, "eta must lie in (0, 1)");
  require(real("K") > 0.0, "K must be positive");
  require(real("M") > 0.0, "M must be positive");
  require(real("R") > 0.0, "R must be positive");
  require(real("delta") > 0.0, "delta must be positive");
  require(!reals("alpha").empty(), "alpha needs at least one value");
  for (double a : reals("alpha")) require(a > 0.5 && a < 1.0, "alpha must lie in (1/2, 1)");
  require(real("beta") > 0.0 && real("beta") < 0.5, "beta must lie in (0, 1/2)");
  require(integer("width") >= 1, "width must be at least 1");
  require(increasing(ints("lengths")), "lengths must be positive and increasing");
  require(increasing(ints("N")), "N must be positive and increasing");
  require(increasing(ints("xi_N")) && ints("xi_N").size() >= 2, "xi_N must be increasing with two entries or more");
  require(increasing(ints("xi_N_diag")) && ints("xi_N_diag").size() >= 2,
          "xi_N_diag must be increasing with two entries or more");
  require(integer("xi_trials") >= 1, "xi_trials must be at least 1");
  require(real("cov_tol") > 0.0, "cov_tol must be positive");
  require(real("spread_tol") > 0.0, "spread_tol must be positive");
  require(real("p_max") >= 0.0 && real("p_max") <= 1.0, "p_max must lie in [0, 1]");
  require(integer("workers") >= 0 && integer("workers") <= 4096, "workers must lie in [0, 4096]");
  require(!text("out").empty(), "out must name a directory");
  const std::string dump = text("dump");
  require(dump.find('/') == std::string::npos && dump != "." && dump != "..", "dump is a file name inside out");
}

// Execution ------------------------------------------------------------------

int execute(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  Context ctx{config, out, {}, 1};
  int code = kOk;
  try {
    config.validate();
    ctx.workers = config.integer("workers") > 0 ? static_cast<int>(config.integer("workers")) : default_workers();
    const std::string& c = config.command();
    if (c == "sample") code = cmd_sample(ctx);
    else if (c == "oracle") code = cmd_oracle(ctx);
    else if (c == "xi") code = cmd_xi(ctx);
    else if (c == "oz") code = cmd_oz(ctx);
    else if (c == "llt") code = cmd_llt(ctx);
    else if (c == "tail") code = cmd_tail(ctx);
    else if (c == "renewal") code = cmd_renewal(ctx);
    else if (c == "massgap") code = cmd_massgap(ctx);
    else if (c == "skeleton") code = cmd_skeleton(ctx);
    else throw ConfigError("unknown command '" + c + "'");
  } catch (const GuardError& e) {
    err << "guard refusal: " << e.what() << "\n";
    return kGuardRefusal;
  } catch (const InsufficientData& e) {
    err << "statistical failure: " << e.what() << "\n";
    return kStatisticalFailure;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const LatticeError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const geometry::GeometryError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const fs::path dir(config.text("out"));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    err << "config error: cannot create " << dir << ": " << ec.message() << "\n";
    return kConfigError;
  }
  Json outputs = Json::array();
  for (const auto& f : ctx.files) {
    std::ofstream o(dir / f.name, std::ios::binary);
    o << f.content;
    if (!o) {
      err << "config error: cannot write " << (dir / f.name) << "\n";
      return kConfigError;
    }
    outputs.push_back(Json{{"file", f.name}, {"bytes", f.content.size()}, {"fnv1a64", report::fnv1a64(f.content)}});
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Json manifest{{"schema_version", kSchemaVersion},
                      {"artifact_version", PERCO_VERSION},
                      {"command", config.command()},
                      {"exit_code", code},
                      {"config", config.to_json()},
                      {"started_utc", started},
                      {"wall_clock_seconds", seconds},
                      {"workers_used", ctx.workers},
                      {"outputs", outputs}};
  std::ofstream m(dir / "manifest.json", std::ios::binary);
  m << manifest.dump(2) << "\n";
  return code;
}

int replay(const std::string& manifest_path, const std::string& out_dir, int workers, std::ostream& out,
           std::ostream& err) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path));
    if (!manifest.contains("config") || !manifest.contains("outputs")) throw ConfigError("not a run manifest");
  } catch (const Json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(manifest["config"]);
    const std::string target =
        out_dir.empty() ? (fs::path(manifest_path).parent_path() / "replay").string() : out_dir;
    cfg.set("out", target);
    if (workers > 0) cfg.set("workers", workers);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  std::ostringstream sink;
  const int code = execute(cfg, sink, err);
  const fs::path dir(cfg.text("out"));
  Json fresh;
  try {
    fresh = Json::parse(read_file((dir / "manifest.json").string()));
  } catch (const std::exception& e) {
    err << "replay produced no manifest: " << e.what() << "\n";
    return kStatisticalFailure;
  }
  bool same = code == manifest.value("exit_code", 0) && fresh["outputs"].size() == manifest["outputs"].size();
  for (std::size_t i = 0; same && i < manifest["outputs"].size(); ++i) {
    const auto &a = manifest["outputs"][i], &b = fresh["outputs"][i];
    if (a["file"] != b["file"] || a["fnv1a64"] != b["fnv1a64"] || a["bytes"] != b["bytes"]) {
      out << "differs: " << a["file"].get<std::string>() << "\n";
      same = false;
    }
  }
  if (same) {
    out << "replay identical: " << manifest["outputs"].size() << " outputs, exit code " << code << "\n";
    return kOk;
  }
  out << "replay differs from the manifest\n";
  return kStatisticalFailure;
}

// Command line ---------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subcritical percolation experiments", "perco"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> config_files;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, bool> rational;
  for (const auto& name : commands()) {
    static const std::map<std::string, std::string> about{
        {"sample", "draw one configuration and optionally dump it in binary"},
        {"oracle", "exact probability of a small-box event"},
        {"xi", "decay rate of point-to-point connections along a direction"},
        {"oz", "decay rate with the power-law correction and the rescaled prefactor"},
        {"llt", "histogram of rescaled junction positions"},
        {"tail", "share of connected trials with a far junction"},
        {"renewal", "exact renewal identity on a strip"},
        {"massgap", "exact f/h ratios on a strip"},
        {"skeleton", "tree skeleton of one sampled three-armed cluster"}};
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    subs[name] = sub;
    sub->add_option("--config", config_files[name], "flat JSON configuration file");
    for (const auto& k : schema()) {
      if (k.name == "schema_version" || k.name == "command") continue;
      std::string flag = "--" + k.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (k.type == KeyType::boolean) {
        sub->add_flag(flag, rational[name + "/" + k.name], k.help);
      } else {
        sub->add_option(flag, values[name][k.name], k.help);
      }
    }
  }
  std::string manifest_path, replay_out;
  int replay_workers = 0;
  CLI::App* rep = app.add_subcommand("replay", "re-run a manifest and compare outputs byte for byte");
  rep->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rep->add_option("--out", replay_out, "output directory (default: <manifest dir>/replay)");
  rep->add_option("--workers", replay_workers, "worker threads");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) failing = sub;
    }
    err << failing->help();
    return kConfigError;
  }
  if (rep->parsed()) return replay(manifest_path, replay_out, replay_workers, out, err);

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      RunConfig cfg = RunConfig::defaults(name);
      if (!config_files[name].empty()) {
        Json file;
        try {
          file = Json::parse(read_file(config_files[name]));
        } catch (const Json::exception& e) {
          throw ConfigError(std::string("malformed configuration: ") + e.what());
        }
        if (!file.contains("command")) file["command"] = name;
        const RunConfig parsed = RunConfig::from_json(file);
        if (parsed.command() != name) throw ConfigError("configuration file is for '" + parsed.command() + "'");
        cfg = parsed;
      }
      for (const auto& k : schema()) {
        if (k.name == "schema_version" || k.name == "command") continue;
        std::string flag = "--" + k.name;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (sub->count(flag) == 0) continue;
        if (k.type == KeyType::boolean) {
          cfg.set(k.name, rational[name + "/" + k.name]);
        } else {
          cfg.set_text(k.name, values[name][k.name]);
        }
      }
      return execute(cfg, out, err);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
      return kConfigError;
    }
  }
  return kConfigError;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace perco::cli
