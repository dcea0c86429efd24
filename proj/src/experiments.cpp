#include "perco/experiments.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace perco {

namespace {

Point as_point(const Site& s) { return s.cast<double>(); }

int expected_sites(EventKind kind) {
  switch (kind) {
    case EventKind::always:
      return 0;
    case EventKind::E:
      return 3;
    case EventKind::F:
      return 4;
    default:
      return 2;
  }
}

bool is_connection_kind(EventKind kind) {
  return kind != EventKind::always && kind != EventKind::connect && kind != EventKind::E && kind != EventKind::F;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream) {
  return EdgeKey::mix(EdgeKey::mix(master_seed ^ 0x5851f42d4c957f2dULL) + stream);
}

// Events ---------------------------------------------------------------------

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::always: return "always";
    case EventKind::connect: return "connect";
    case EventKind::E: return "E";
    case EventKind::F: return "F";
    case EventKind::h: return "h";
    case EventKind::f: return "f";
    case EventKind::h_tail: return "h_tail";
    case EventKind::f_tail: return "f_tail";
    case EventKind::h_cone: return "h_cone";
    case EventKind::f_cone: return "f_cone";
  }
  return "?";
}

EventKind parse_event_kind(const std::string& text) {
  for (EventKind k : {EventKind::always, EventKind::connect, EventKind::E, EventKind::F, EventKind::h, EventKind::f,
                      EventKind::h_tail, EventKind::f_tail, EventKind::h_cone, EventKind::f_cone}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown event '" + text + "'");
}

std::string EventSpec::name() const {
  std::string out = to_string(kind);
  if (sites.empty()) return out;
  out += "(";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (i) out += ";";
    for (Eigen::Index a = 0; a < sites[i].size(); ++a) out += (a ? "," : "") + std::to_string(sites[i][a]);
  }
  return out + ")";
}

void EventSpec::validate(const LatticeBox& box) const {
  if (static_cast<int>(sites.size()) != expected_sites(kind)) {
    throw std::invalid_argument("event " + to_string(kind) + " needs " + std::to_string(expected_sites(kind)) +
                                " sites");
  }
  for (const Site& s : sites) {
    if (s.size() != box.dimension()) throw std::invalid_argument("event site has the wrong dimension");
    if (!box.contains(s)) throw std::invalid_argument("event site outside the box " + box.describe());
  }
  if (kind == EventKind::E || kind == EventKind::F) {
    const std::size_t first = kind == EventKind::F ? 1 : 0;
    for (std::size_t i = first; i < sites.size(); ++i) {
      for (std::size_t j = i + 1; j < sites.size(); ++j) {
        if (sites[i] == sites[j]) throw std::invalid_argument("event targets must be distinct");
      }
    }
    if (kind == EventKind::F) {
      for (std::size_t i = 1; i < 4; ++i) {
        if (sites[0] == sites[i]) throw std::invalid_argument("junction must differ from the targets");
      }
    }
  }
  if (is_connection_kind(kind)) {
    if (direction.size() != box.dimension() || !(direction.norm() > 0.0)) {
      throw std::invalid_argument("connection events need a nonzero direction");
    }
    const RationalDirection t(direction.normalized());
    if (t.level(sites[1]) <= t.level(sites[0])) throw std::invalid_argument("connection events need (t, n - k) > 0");
  }
}

EventEvaluator::EventEvaluator(EventSpec spec) : spec_(std::move(spec)) {
  if (is_connection_kind(spec_.kind)) {
    const int d = static_cast<int>(spec_.direction.size());
    if (d < 1 || !(spec_.direction.norm() > 0.0)) throw std::invalid_argument("connection events need a direction");
    xi_ = std::make_shared<const Norm>(Norm::euclidean(d));
    analyzer_ = std::make_shared<const ConnectionAnalyzer>(*xi_, Point(spec_.direction.normalized()), spec_.eta,
                                                           spec_.K);
  }
}

bool EventEvaluator::connection(const BondConfiguration& config) const {
  const ConnectionFlags flags = analyzer_->classify(config, spec_.sites[0], spec_.sites[1]);
  switch (spec_.kind) {
    case EventKind::h: return flags.clean_ends;
    case EventKind::f: return flags.irreducible;
    case EventKind::h_tail: return flags.clean_tail;
    case EventKind::f_tail: return flags.clean_tail_irreducible;
    case EventKind::h_cone: return flags.cone_confined;
    case EventKind::f_cone: return flags.cone_irreducible;
    default: return false;
  }
}

// Estimates ------------------------------------------------------------------

Estimate make_estimate(std::string event, std::uint64_t hits, std::uint64_t trials, std::uint64_t master_seed,
                       const LatticeBox& box, double p) {
  Estimate e;
  e.event = std::move(event);
  e.hits = hits;
  e.trials = trials;
  e.mean = trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  e.stderr_ = trials ? std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(trials)) : 0.0;
  e.master_seed = master_seed;
  e.box = box;
  e.p = p;
  return e;
}

int default_workers() {
  if (const char* env = std::getenv("PERCO_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 4096) return static_cast<int>(v);
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Estimate mc_estimate(const EventSpec& event, double p, const LatticeBox& box, std::uint64_t trials,
                     std::uint64_t master_seed, int workers) {
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  event.validate(box);
  const EventEvaluator eval(event);
  const std::uint64_t hits = count_hits(box, p, trials, master_seed, workers, eval);
  return make_estimate(event.name(), hits, trials, master_seed, box, p);
}

// Correlation length ---------------------------------------------------------

LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& sigma) {
  if (x.size() != y.size() || x.size() != sigma.size()) throw std::invalid_argument("fit inputs differ in length");
  if (x.size() < 2) throw std::invalid_argument("a line fit needs two points");
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(sigma[i] > 0.0)) throw std::invalid_argument("fit weights need positive sigma");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    s += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double delta = s * sxx - sx * sx;
  if (!(delta > 0.0)) throw std::invalid_argument("a line fit needs two distinct abscissae");
  LineFit out;
  out.slope = (s * sxy - sx * sy) / delta;
  out.intercept = (sxx * sy - sx * sxy) / delta;
  out.slope_stderr = std::sqrt(s / delta);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - out.intercept - out.slope * x[i]) / sigma[i];
    out.chi2 += r * r;
  }
  return out;
}

XiEstimate estimate_xi(double p, const Site& step, const std::vector<int>& N, std::uint64_t trials,
                       std::uint64_t master_seed, int margin, int workers, double p_max) {
  if (!(p > 0.0)) throw std::invalid_argument("p must be positive: p = 0 gives no hits at any distance");
  if (!(p <= p_max)) {
    throw std::invalid_argument("p = " + std::to_string(p) + " exceeds the subcritical guard " + std::to_string(p_max));
  }
  if (step.size() < 1 || step.cwiseAbs().sum() == 0) throw std::invalid_argument("step must be a nonzero lattice vector");
  if (N.size() < 2) throw std::invalid_argument("the N ladder needs at least two entries");
  for (std::size_t i = 0; i < N.size(); ++i) {
    if (N[i] < 1 || (i && N[i] <= N[i - 1])) throw std::invalid_argument("the N ladder must be positive and increasing");
  }
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (margin < 0) throw std::invalid_argument("margin must be nonnegative");

  XiEstimate out;
  out.step = step;
  out.direction = as_point(step).normalized();
  out.p = p;
  out.master_seed = master_seed;
  out.margin = margin;
  const double l1 = static_cast<double>(step.cwiseAbs().sum());
  const double l2 = as_point(step).norm();
  out.upper_bound = -std::log(p) * l1 / l2;

  const Site origin = Site::Zero(step.size());
  bool exhausted = false;
  for (int n : N) {
    if (exhausted) {
      out.dropped.push_back(n);
      continue;
    }
    const Site target = step * n;
    const LatticeBox box = bounding_box({origin, target}, margin);
    const SiteId a = box.index(origin), b = box.index(target);
    const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(n));
    const std::uint64_t hits = count_hits(box, p, trials, seed, workers, [&](const KeyedSample& s) {
      thread_local SiteMarks marks;
      explore_cluster(s, a, marks);
      return marks.marked(b);
    });
    if (hits == 0) {
      exhausted = true;
      out.dropped.push_back(n);
      continue;
    }
    XiRow row;
    row.N = n;
    row.target = target;
    row.length = as_point(target).norm();
    row.hits = hits;
    row.trials = trials;
    row.probability = static_cast<double>(hits) / static_cast<double>(trials);
    row.neglog = -std::log(row.probability);
    row.neglog_stderr = std::sqrt((1.0 - row.probability) / (row.probability * static_cast<double>(trials)));
    // A certain event has no sampling error; keep it usable in the fit.
    if (row.neglog_stderr == 0.0) row.neglog_stderr = 1.0 / static_cast<double>(trials);
    out.rows.push_back(row);
    out.largest_usable_N = n;
  }
  if (out.rows.size() < 2) {
    throw InsufficientData("fewer than two N with hits (largest usable N = " + std::to_string(out.largest_usable_N) +
                           "); raise trials or shorten the ladder");
  }
  std::vector<double> x, y, s;
  for (const auto& r : out.rows) {
    x.push_back(r.length);
    y.push_back(r.neglog);
    s.push_back(r.neglog_stderr);
  }
  const LineFit fit = weighted_line_fit(x, y, s);
  out.slope = fit.slope;
  out.slope_stderr = fit.slope_stderr;
  out.intercept = fit.intercept;
  out.chi2 = fit.chi2;
  out.dof = static_cast<int>(out.rows.size()) - 2;
  out.positive = out.slope > 0.0;
  out.within_upper = out.slope <= out.upper_bound + 3.0 * out.slope_stderr;
  return out;
}

double flatness(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return (v.back() - v.front()) / median;
}

PrefactorEstimate oz_prefactor(const std::vector<XiRow>& rows, double xi, int d, double power) {
  PrefactorEstimate out;
  out.xi = xi;
  out.power = power;
  (void)d;
  for (const auto& r : rows) {
    if (r.hits == 0 || !(r.probability > 0.0)) {
      out.dropped.push_back(r.N);
      continue;
    }
    const double value =
        r.probability * std::pow(2.0 * std::numbers::pi * r.length, power) * std::exp(xi * r.length);
    out.rows.push_back({r.N, r.length, value});
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const auto& a, const auto& b) { return a.N < b.N; });
  const std::size_t half = out.rows.size() / 2;
  std::vector<double> top;
  for (std::size_t i = half; i < out.rows.size(); ++i) top.push_back(out.rows[i].value);
  out.flatness = flatness(top);
  return out;
}

PrefactorEstimate oz_prefactor(const std::vector<XiRow>& rows, double xi, int d) {
  return oz_prefactor(rows, xi, d, 0.5 * (d - 1));
}

OzScan oz_prefactor_scan(double p, const Site& step, const std::vector<int>& N, std::uint64_t trials,
                         std::uint64_t master_seed, int margin, int workers, double p_max) {
  OzScan out;
  out.xi = estimate_xi(p, step, N, trials, master_seed, margin, workers, p_max);
  const int d = static_cast<int>(step.size());
  const double power = 0.5 * (d - 1);
  std::vector<double> x, y, s;
  for (const auto& r : out.xi.rows) {
    x.push_back(r.length);
    y.push_back(r.neglog - power * std::log(2.0 * std::numbers::pi * r.length));
    s.push_back(r.neglog_stderr);
  }
  out.corrected = weighted_line_fit(x, y, s);
  out.prefactor = oz_prefactor(out.xi.rows, out.corrected.slope, d, power);
  out.prefactor.dropped.insert(out.prefactor.dropped.end(), out.xi.dropped.begin(), out.xi.dropped.end());
  return out;
}

// Junction statistics --------------------------------------------------------

JunctionRun run_junction_trials(const LatticeBox& box, double p, const Triple& anchors, std::uint64_t trials,
                                std::uint64_t master_seed, int workers) {
  detail::require_distinct(anchors);
  for (const Site& a : anchors) {
    if (!box.contains(a)) throw std::invalid_argument("anchor outside the box " + box.describe());
  }
  struct Acc {
    std::vector<std::uint64_t> index;
    std::vector<std::vector<Site>> junctions;
  };
  Acc acc = farm_trials<Acc>(
      trials, workers,
      [&](std::uint64_t i, Acc& a) {
        const KeyedSample s(box, p, master_seed, i);
        if (!event_E(s, anchors)) return;
        a.index.push_back(i);
        a.junctions.push_back(find_junctions(s, anchors));
      },
      [](Acc& out, Acc& part) {
        out.index.insert(out.index.end(), part.index.begin(), part.index.end());
        for (auto& j : part.junctions) out.junctions.push_back(std::move(j));
      });
  JunctionRun run;
  run.box = box;
  run.anchors = anchors;
  run.trials = trials;
  run.master_seed = master_seed;
  run.connected = acc.index.size();
  run.trial_index = std::move(acc.index);
  run.junctions = std::move(acc.junctions);
  return run;
}

GaussianFit fit_gaussian(const std::vector<Point>& samples, const Eigen::MatrixXd& predicted) {
  if (samples.size() < 3) throw InsufficientData("a Gaussian fit needs at least three samples");
  const Eigen::Index d = samples.front().size();
  if (predicted.rows() != d || predicted.cols() != d) throw std::invalid_argument("predicted covariance has the wrong shape");
  const double n = static_cast<double>(samples.size());
  GaussianFit out;
  out.samples = samples.size();
  out.mean = Point::Zero(d);
  for (const auto& s : samples) out.mean += s;
  out.mean /= n;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Point c = s - out.mean;
    scatter += c * c.transpose();
  }
  out.covariance = scatter / (n - 1.0);
  out.mean_z = Point(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double se = std::sqrt(out.covariance(i, i) / n);
    out.mean_z[i] = se > 0.0 ? out.mean[i] / se : 0.0;
  }
  const Eigen::MatrixXd diff = out.covariance - predicted;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ed(0.5 * (diff + diff.transpose()), Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(0.5 * (predicted + predicted.transpose()),
                                                          Eigen::EigenvaluesOnly);
  out.covariance_error = ed.eigenvalues().cwiseAbs().maxCoeff() / ep.eigenvalues().cwiseAbs().maxCoeff();

  const Eigen::MatrixXd ml = scatter / n;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(ml);
  if (lu.isInvertible()) {
    const Eigen::MatrixXd inv = lu.inverse();
    double b2 = 0.0;
    for (const auto& s : samples) {
      const Point c = s - out.mean;
      const double q = c.dot(inv * c);
      b2 += q * q;
    }
    b2 /= n;
    const double dd = static_cast<double>(d);
    out.kurtosis_z = (b2 - dd * (dd + 2.0)) / std::sqrt(8.0 * dd * (dd + 2.0) / n);
  }
  return out;
}

Triple scaled_anchors(const geometry::Anchors<double>& x, int N) {
  Triple out;
  for (int i = 0; i < 3; ++i) out[i] = floor_site(static_cast<double>(N) * x[i]);
  return out;
}

LLTReport llt_junction_histogram(const Norm& xi, double p, const geometry::Anchors<double>& x, int N,
                                 std::uint64_t trials, std::uint64_t master_seed, double beta, int margin,
                                 int workers) {
  if (N < 1) throw std::invalid_argument("N must be positive");
  LLTReport out;
  out.N = N;
  out.p = p;
  out.beta = beta;
  out.trials = trials;
  out.master_seed = master_seed;
  if (!geometry::minimize_phi(xi, x).admissible) throw geometry::GeometryError("triple is not admissible (outside X3')");
  out.anchors = scaled_anchors(x, N);
  // The realized triple [N x_i] / N; it equals x when N x is integral.
  const double scale = static_cast<double>(N);
  out.triple = geometry::minimize_phi(
      xi, geometry::Anchors<double>{as_point(out.anchors[0]) / scale, as_point(out.anchors[1]) / scale,
                                    as_point(out.anchors[2]) / scale});
  if (!out.triple.admissible) throw geometry::GeometryError("rounded triple [N x] / N is not admissible");
  out.center = scale * out.triple.x0;
  out.box = bounding_box({out.anchors[0], out.anchors[1], out.anchors[2], floor_site(out.center)}, margin);
  out.predicted = out.triple.hessian.inverse();

  const JunctionRun run = run_junction_trials(out.box, p, out.anchors, trials, master_seed, workers);
  out.connected = run.connected;
  if (run.connected == 0) throw InsufficientData("no trial connected the three anchors");
  const double far = std::pow(static_cast<double>(N), beta);
  const double root = std::sqrt(static_cast<double>(N));
  std::uint64_t with_junction = 0;
  for (const auto& js : run.junctions) {
    if (js.empty()) {
      ++out.without_junction;
      continue;
    }
    ++with_junction;
    out.samples.push_back((as_point(js.front()) - out.center) / root);
    if (js.size() > 1) ++out.multi_junction;
    double spread = 0.0;
    for (std::size_t i = 0; i < js.size(); ++i) {
      for (std::size_t j = i + 1; j < js.size(); ++j) spread = std::max(spread, as_point(js[i] - js[j]).norm());
    }
    out.max_spread = std::max(out.max_spread, spread);
    if (spread > far) ++out.far_pairs;
  }
  out.far_pair_fraction = with_junction ? static_cast<double>(out.far_pairs) / static_cast<double>(with_junction) : 0.0;
  out.fit = fit_gaussian(out.samples, out.predicted);
  return out;
}

TailReport tail_from_run(const JunctionRun& run, const Point& center, int N, double p,
                         const std::vector<double>& alphas) {
  TailReport out;
  out.N = N;
  out.p = p;
  out.anchors = run.anchors;
  out.center = center;
  out.box = run.box;
  out.trials = run.trials;
  out.master_seed = run.master_seed;
  out.connected = run.connected;
  std::vector<double> reach;
  reach.reserve(run.junctions.size());
  for (const auto& js : run.junctions) {
    double r = -1.0;
    for (const Site& k : js) r = std::max(r, (as_point(k) - center).norm());
    reach.push_back(r);
  }
  for (double alpha : alphas) {
    TailRow row;
    row.alpha = alpha;
    row.threshold = std::pow(static_cast<double>(N), alpha);
    for (double r : reach) {
      if (r >= row.threshold) ++row.hits;
    }
    if (run.connected) {
      const double c = static_cast<double>(run.connected);
      row.ratio = static_cast<double>(row.hits) / c;
      row.ratio_stderr = std::sqrt(row.ratio * (1.0 - row.ratio) / c);
    }
    out.rows.push_back(row);
  }
  return out;
}

TailReport far_junction_tail(const Norm& xi, double p, const geometry::Anchors<double>& x, int N,
                             const std::vector<double>& alphas, std::uint64_t trials, std::uint64_t master_seed,
                             int margin, int workers) {
  for (double a : alphas) {
    if (!(a > 0.5 && a < 1.0)) throw std::invalid_argument("alpha must lie in (1/2, 1)");
  }
  if (N < 1) throw std::invalid_argument("N must be positive");
  const Triple anchors = scaled_anchors(x, N);
  const geometry::Anchors<double> lattice{as_point(anchors[0]), as_point(anchors[1]), as_point(anchors[2])};
  const Point center = geometry::minimize_phi(xi, lattice).x0;
  const LatticeBox box = bounding_box({anchors[0], anchors[1], anchors[2], floor_site(center)}, margin);
  const JunctionRun run = run_junction_trials(box, p, anchors, trials, master_seed, workers);
  return tail_from_run(run, center, N, p, alphas);
}

// Mass gap -------------------------------------------------------------------

MassGapTable mass_gap_scan(const StripModel& strip, const ExactProbability& p, const std::vector<int>& lengths) {
  MassGapTable out;
  const int d = strip.analyzer().direction().dimension();
  for (int len : lengths) {
    if (len < 1) throw std::invalid_argument("lengths must be positive");
    const Site k = Site::Zero(d);
    Site n = k;
    n[strip.axis()] = len;
    const ConnectionValues v = strip.values(p, k, n);
    MassGapRow row;
    row.length = len;
    row.distance = static_cast<double>(len);
    row.h = v.h;
    row.f = v.f;
    row.h_cone = v.h_cone;
    row.f_cone = v.f_cone;
    row.ratio = v.h_cone > 0 ? Decimal(v.f_cone / v.h_cone) : Decimal(0);
    out.rows.push_back(row);
  }
  out.strictly_decreasing = !out.rows.empty();
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].ratio < out.rows[i - 1].ratio)) out.strictly_decreasing = false;
  }
  return out;
}

}  // namespace perco
