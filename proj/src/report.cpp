#include "perco/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace perco::report {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string fmt(const Site& s, char sep) {
  std::string out;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(s[i]);
  }
  return out;
}

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Csv::Csv(std::vector<std::string> header) : width_(header.size()) { row(header); }

Csv& Csv::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
  return *this;
}

Json to_json(const Site& s) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < s.size(); ++i) out.push_back(s[i]);
  return out;
}

Json to_json(const Point& x) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x[i]);
  return out;
}

Json to_json(const LatticeBox& box) { return Json{{"lower", to_json(box.lower())}, {"upper", to_json(box.upper())}}; }

Json to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Point(m.row(i).transpose())));
  return out;
}

Json to_json(const Estimate& e) {
  return Json{{"event", e.event},          {"hits", e.hits}, {"trials", e.trials},
              {"mean", e.mean},            {"stderr", e.stderr_}, {"master_seed", e.master_seed},
              {"box", to_json(e.box)},     {"p", e.p}};
}

Json to_json(const XiEstimate& xi) {
  Json rows = Json::array();
  for (const auto& r : xi.rows) {
    rows.push_back(Json{{"N", r.N},
                        {"target", to_json(r.target)},
                        {"length", r.length},
                        {"hits", r.hits},
                        {"trials", r.trials},
                        {"probability", r.probability},
                        {"neglog", r.neglog},
                        {"neglog_stderr", r.neglog_stderr}});
  }
  return Json{{"step", to_json(xi.step)},
              {"direction", to_json(xi.direction)},
              {"p", xi.p},
              {"master_seed", xi.master_seed},
              {"margin", xi.margin},
              {"slope", xi.slope},
              {"slope_stderr", xi.slope_stderr},
              {"intercept", xi.intercept},
              {"chi2", xi.chi2},
              {"dof", xi.dof},
              {"upper_bound", xi.upper_bound},
              {"positive", xi.positive},
              {"within_upper", xi.within_upper},
              {"largest_usable_N", xi.largest_usable_N},
              {"dropped_N", xi.dropped},
              {"rows", rows}};
}

Csv xi_csv(const XiEstimate& xi) {
  Csv csv({"N", "target", "length", "hits", "trials", "probability", "neglog", "neglog_stderr"});
  for (const auto& r : xi.rows) {
    csv.row({std::to_string(r.N), fmt(r.target), fmt(r.length), std::to_string(r.hits), std::to_string(r.trials),
             fmt(r.probability), fmt(r.neglog), fmt(r.neglog_stderr)});
  }
  return csv;
}

Json to_json(const PrefactorEstimate& pf) {
  Json rows = Json::array();
  for (const auto& r : pf.rows) rows.push_back(Json{{"N", r.N}, {"length", r.length}, {"value", r.value}});
  return Json{{"xi", pf.xi}, {"power", pf.power}, {"flatness", pf.flatness}, {"dropped_N", pf.dropped}, {"rows", rows}};
}

Csv prefactor_csv(const OzScan& scan) {
  Csv csv({"N", "length", "hits", "trials", "probability", "prefactor"});
  for (const auto& r : scan.xi.rows) {
    std::string value = "nan";
    for (const auto& q : scan.prefactor.rows) {
      if (q.N == r.N) value = fmt(q.value);
    }
    csv.row({std::to_string(r.N), fmt(r.length), std::to_string(r.hits), std::to_string(r.trials),
             fmt(r.probability), value});
  }
  return csv;
}

Json to_json(const LLTReport& r) {
  Json anchors = Json::array();
  for (const auto& a : r.anchors) anchors.push_back(to_json(a));
  Json unit = Json::array();
  for (const auto& a : r.triple.anchors) unit.push_back(to_json(a));
  return Json{{"N", r.N},
              {"p", r.p},
              {"beta", r.beta},
              {"master_seed", r.master_seed},
              {"trials", r.trials},
              {"box", to_json(r.box)},
              {"anchors", anchors},
              {"unit_anchors", unit},
              {"x0", to_json(r.triple.x0)},
              {"center", to_json(r.center)},
              {"hessian", to_json(r.triple.hessian)},
              {"predicted_covariance", to_json(r.predicted)},
              {"connected", r.connected},
              {"samples", r.samples.size()},
              {"without_junction", r.without_junction},
              {"multi_junction", r.multi_junction},
              {"far_pairs", r.far_pairs},
              {"far_pair_fraction", r.far_pair_fraction},
              {"max_spread", r.max_spread},
              {"mean", to_json(r.fit.mean)},
              {"mean_z", to_json(r.fit.mean_z)},
              {"covariance", to_json(r.fit.covariance)},
              {"covariance_error", r.fit.covariance_error},
              {"kurtosis_z", r.fit.kurtosis_z}};
}

Csv llt_csv(const LLTReport& r) {
  std::vector<std::string> header{"sample"};
  for (Eigen::Index i = 0; i < r.center.size(); ++i) header.push_back("y" + std::to_string(i + 1));
  Csv csv(header);
  for (std::size_t s = 0; s < r.samples.size(); ++s) {
    std::vector<std::string> cells{std::to_string(s)};
    for (Eigen::Index i = 0; i < r.samples[s].size(); ++i) cells.push_back(fmt(r.samples[s][i]));
    csv.row(cells);
  }
  return csv;
}

Json to_json(const TailReport& t) {
  Json anchors = Json::array();
  for (const auto& a : t.anchors) anchors.push_back(to_json(a));
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back(Json{{"alpha", r.alpha},
                        {"threshold", r.threshold},
                        {"hits", r.hits},
                        {"ratio", r.ratio},
                        {"ratio_stderr", r.ratio_stderr}});
  }
  return Json{{"N", t.N},           {"p", t.p},
              {"master_seed", t.master_seed}, {"trials", t.trials},
              {"box", to_json(t.box)}, {"anchors", anchors},
              {"center", to_json(t.center)}, {"connected", t.connected},
              {"rows", rows}};
}

Csv tail_csv_header() { return Csv({"N", "alpha", "threshold", "connected", "hits", "ratio", "ratio_stderr"}); }

void append_tail_rows(Csv& csv, const TailReport& t) {
  for (const auto& r : t.rows) {
    csv.row({std::to_string(t.N), fmt(r.alpha), fmt(r.threshold), std::to_string(t.connected), std::to_string(r.hits),
             fmt(r.ratio), fmt(r.ratio_stderr)});
  }
}

Csv mass_gap_csv(const MassGapTable& t) {
  Csv csv({"length", "distance", "h", "f", "h_cone", "f_cone", "ratio"});
  for (const auto& r : t.rows) {
    csv.row({std::to_string(r.length), fmt(r.distance), to_string(r.h), to_string(r.f), to_string(r.h_cone),
             to_string(r.f_cone), to_string(r.ratio)});
  }
  return csv;
}

Json to_json(const Skeleton& s) {
  Json points = Json::array();
  for (const auto& x : s.points) points.push_back(to_json(x));
  Json out{{"scale", s.scale}, {"points", points}};
  if (s.classified) {
    Json intervals = Json::array();
    for (const auto& [a, b] : s.bad_intervals) intervals.push_back(Json::array({a, b}));
    std::vector<int> good(s.good.begin(), s.good.end());
    out["good"] = good;
    out["backtracking"] = s.backtracking;
    out["bad_intervals"] = intervals;
    out["bad"] = s.bad;
    out["bad_surcharge"] = s.bad_surcharge;
    if (!std::isnan(s.surcharge_ratio)) out["surcharge_ratio"] = s.surcharge_ratio;
  }
  return out;
}

Json to_json(const TreeSkeleton& tree, const DeltaGoodReport& good) {
  Json targets = Json::array();
  for (const auto& t : tree.targets) targets.push_back(to_json(t));
  Json branches = Json::array();
  for (int i = 0; i < 3; ++i) {
    Json leaves = Json::array();
    for (const auto& x : tree.leaves[i]) leaves.push_back(to_json(x));
    Json bad_leaves = Json::array();
    for (const auto& x : good.bad_leaves[i]) bad_leaves.push_back(to_json(x));
    branches.push_back(Json{{"trunk", to_json(good.trunks[i])},
                            {"leaves", leaves},
                            {"completion_leaves", tree.completion[i]},
                            {"threshold", good.threshold[i]},
                            {"bad_points", good.bad_points[i]},
                            {"bad_leaves", bad_leaves},
                            {"anchors", good.anchors[i]}});
  }
  return Json{{"junction", to_json(tree.junction)},
              {"targets", targets},
              {"scale", tree.scale},
              {"cluster_size", tree.cluster.size()},
              {"uncovered_after_loop", tree.uncovered_after_loop.size()},
              {"compatible", tree.compatible},
              {"delta", good.delta},
              {"delta_good", good.good},
              {"branches", branches}};
}

Csv tree_csv(const TreeSkeleton& tree) {
  std::vector<std::string> header{"branch", "kind", "index"};
  for (Eigen::Index i = 0; i < tree.junction.size(); ++i) header.push_back("x" + std::to_string(i + 1));
  Csv csv(header);
  auto add = [&](int b, const std::string& kind, std::size_t idx, const Site& x) {
    std::vector<std::string> cells{std::to_string(b), kind, std::to_string(idx)};
    for (Eigen::Index i = 0; i < x.size(); ++i) cells.push_back(std::to_string(x[i]));
    csv.row(cells);
  };
  for (int b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < tree.trunks[b].points.size(); ++i) add(b, "trunk", i, tree.trunks[b].points[i]);
    const std::size_t loop = tree.leaves[b].size() - static_cast<std::size_t>(tree.completion[b]);
    for (std::size_t i = 0; i < tree.leaves[b].size(); ++i) {
      add(b, i < loop ? "leaf" : "completion", i, tree.leaves[b][i]);
    }
  }
  return csv;
}

}  // namespace perco::report
