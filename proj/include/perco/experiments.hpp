#ifndef PERCO_EXPERIMENTS_HPP
#define PERCO_EXPERIMENTS_HPP

#include "perco/events.hpp"
#include "perco/geometry/triple.hpp"
#include "perco/renewal.hpp"
#include "perco/strip.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace perco {

enum class EventKind { always, connect, E, F, h, f, h_tail, f_tail, h_cone, f_cone };

/// A named event on a box. Sites: always {}; connect {a, b}; E {n1, n2, n3};
/// F {k, n1, n2, n3}; h/f variants {k, n} in direction `direction` with cone
/// parameters (eta, K) under the Euclidean norm.
struct EventSpec {
  EventKind kind = EventKind::connect;
  std::vector<Site> sites;
  Point direction;
  double eta = 0.2;
  double K = 0.1;

  std::string name() const;
  /// Throws std::invalid_argument when a site lies outside `box` or the site
  /// count does not fit the kind.
  void validate(const LatticeBox& box) const;
};

EventKind parse_event_kind(const std::string& text);
std::string to_string(EventKind kind);

/// Evaluates an EventSpec on any bond state.
class EventEvaluator {
 public:
  explicit EventEvaluator(EventSpec spec);

  const EventSpec& spec() const { return spec_; }

  template <BondState C>
  bool operator()(const C& config) const {
    const LatticeBox& box = config.box();
    switch (spec_.kind) {
      case EventKind::always:
        return true;
      case EventKind::connect: {
        thread_local SiteMarks marks;
        explore_cluster(config, box.index(spec_.sites[0]), marks);
        return marks.marked(box.index(spec_.sites[1]));
      }
      case EventKind::E:
        return event_E(config, Triple{spec_.sites[0], spec_.sites[1], spec_.sites[2]});
      case EventKind::F:
        return event_F(config, spec_.sites[0], Triple{spec_.sites[1], spec_.sites[2], spec_.sites[3]}).has_value();
      default:
        break;
    }
    if constexpr (std::is_same_v<C, BondConfiguration>) {
      return connection(config);
    } else {
      return connection(materialize(config, 0.0));
    }
  }

 private:
  bool connection(const BondConfiguration& config) const;

  EventSpec spec_;
  std::shared_ptr<const Norm> xi_;
  std::shared_ptr<const ConnectionAnalyzer> analyzer_;
};

/// Raised when a run yields too few hits or conditioned trials to report.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent stream seed for sub-run `stream` of a master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream);

struct Estimate {
  std::string event;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::uint64_t master_seed = 0;
  LatticeBox box;
  double p = 0.0;
};

Estimate make_estimate(std::string event, std::uint64_t hits, std::uint64_t trials, std::uint64_t master_seed,
                       const LatticeBox& box, double p);

inline constexpr std::uint64_t kTrialChunk = 4096;

/// Worker count from PERCO_WORKERS, else the OpenMP default.
int default_workers();

/// Runs trial(i, acc) for i in [0, trials) in fixed chunks of kTrialChunk
/// trials, one accumulator per chunk, then folds the accumulators in chunk
/// order. The result does not depend on `workers`.
template <typename Acc, typename Trial, typename Merge>
Acc farm_trials(std::uint64_t trials, int workers, Trial&& trial, Merge&& merge) {
  const std::uint64_t chunks = (trials + kTrialChunk - 1) / kTrialChunk;
  std::vector<Acc> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers > 0 ? workers : 1)
  for (std::int64_t ci = 0; ci < static_cast<std::int64_t>(chunks); ++ci) {
    const auto c = static_cast<std::uint64_t>(ci);
    const std::uint64_t end = std::min(trials, (c + 1) * kTrialChunk);
    Acc& acc = partial[static_cast<std::size_t>(c)];
    for (std::uint64_t i = c * kTrialChunk; i < end; ++i) trial(i, acc);
  }
  Acc out{};
  for (auto& acc : partial) merge(out, acc);
  return out;
}

template <typename Event>
std::uint64_t count_hits(const LatticeBox& box, double p, std::uint64_t trials, std::uint64_t seed, int workers,
                         const Event& event) {
  return farm_trials<std::uint64_t>(
      trials, workers,
      [&](std::uint64_t i, std::uint64_t& acc) {
        if (event(KeyedSample(box, p, seed, i))) ++acc;
      },
      [](std::uint64_t& out, std::uint64_t v) { out += v; });
}

Estimate mc_estimate(const EventSpec& event, double p, const LatticeBox& box, std::uint64_t trials,
                     std::uint64_t master_seed, int workers = default_workers());

// Correlation length ---------------------------------------------------------

struct XiRow {
  int N = 0;
  Site target;
  double length = 0.0;  // Euclidean |target|
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double probability = 0.0;
  double neglog = 0.0;
  double neglog_stderr = 0.0;
};

struct XiEstimate {
  Site step;        // lattice direction; targets are N * step
  Point direction;  // step / |step|
  double p = 0.0;
  std::uint64_t master_seed = 0;
  int margin = 0;
  std::vector<XiRow> rows;  // usable rows only
  std::vector<int> dropped;  // N with zero hits
  int largest_usable_N = 0;
  double slope = 0.0;  // ξ̂ per unit Euclidean length
  double slope_stderr = 0.0;
  double intercept = 0.0;
  double chi2 = 0.0;
  int dof = 0;
  double upper_bound = 0.0;  // -ln p * |step|_1 / |step|_2: the direct-path bound
  bool positive = false;
  bool within_upper = false;  // slope <= upper_bound + 3 stderr

  geometry::TableRow<double> table_row() const { return {direction, slope}; }
};

/// P̂[0 <-> N step] in the box spanned by 0 and N step padded by `margin`,
/// followed by a weighted least-squares fit of -log P̂ against |N step|.
/// Throws std::invalid_argument for p outside (0, p_max] or fewer than two
/// usable rows.
XiEstimate estimate_xi(double p, const Site& step, const std::vector<int>& N, std::uint64_t trials,
                       std::uint64_t master_seed, int margin, int workers = default_workers(), double p_max = 0.45);

struct LineFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  double chi2 = 0.0;
};

/// Weighted least squares y = a + b x with weights 1/σ².
LineFit weighted_line_fit(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma);

struct PrefactorRow {
  int N = 0;
  double length = 0.0;
  double value = 0.0;
};

struct PrefactorEstimate {
  double xi = 0.0;
  double power = 0.0;  // exponent of (2π |x|)
  std::vector<PrefactorRow> rows;
  std::vector<int> dropped;
  double flatness = 0.0;  // (max - min) / median over the upper half of the rows
};

/// P̂ (2π |x|)^power e^{ξ |x|} for each row; power defaults to (d-1)/2.
PrefactorEstimate oz_prefactor(const std::vector<XiRow>& rows, double xi, int d, double power);
PrefactorEstimate oz_prefactor(const std::vector<XiRow>& rows, double xi, int d);
double flatness(const std::vector<double>& values);

struct OzScan {
  XiEstimate xi;
  LineFit corrected;  // fit of -log P̂ - power log(2π|x|) against |x|
  PrefactorEstimate prefactor;
};

/// estimate_xi followed by the prefactor sequence. The decay rate used for
/// the rescaling comes from the fit with the power-law correction removed.
OzScan oz_prefactor_scan(double p, const Site& step, const std::vector<int>& N, std::uint64_t trials,
                         std::uint64_t master_seed, int margin, int workers = default_workers(),
                         double p_max = 0.45);

// Junction statistics --------------------------------------------------------

/// Trials in which the three anchors are connected, with their junction sets.
struct JunctionRun {
  LatticeBox box;
  Triple anchors;
  std::uint64_t trials = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t connected = 0;
  std::vector<std::uint64_t> trial_index;        // one entry per connected trial
  std::vector<std::vector<Site>> junctions;      // lexicographic, may be empty
};

JunctionRun run_junction_trials(const LatticeBox& box, double p, const Triple& anchors, std::uint64_t trials,
                                std::uint64_t master_seed, int workers = default_workers());

struct GaussianFit {
  std::size_t samples = 0;
  Point mean;
  Eigen::MatrixXd covariance;
  Point mean_z;                  // mean / sqrt(diag(cov) / n)
  double covariance_error = 0.0; // ‖cov - predicted‖₂ / ‖predicted‖₂
  double kurtosis_z = 0.0;       // Mardia's multivariate kurtosis, standardized
};

GaussianFit fit_gaussian(const std::vector<Point>& samples, const Eigen::MatrixXd& predicted);

struct LLTReport {
  int N = 0;
  double p = 0.0;
  double beta = 0.0;
  geometry::TripleConfig<double> triple;  // realized unit triple [N x_i] / N
  Triple anchors;                         // [N x_i]
  Point center;                           // N x_0
  LatticeBox box;
  std::uint64_t trials = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t connected = 0;
  std::uint64_t without_junction = 0;
  std::uint64_t multi_junction = 0;
  std::uint64_t far_pairs = 0;            // trials with two junctions farther apart than N^β
  double far_pair_fraction = 0.0;         // far_pairs over trials with a junction
  double max_spread = 0.0;
  std::vector<Point> samples;             // (k_rep - N x_0) / sqrt(N)
  Eigen::MatrixXd predicted;              // H_φ^{-1}
  GaussianFit fit;
};

/// Throws geometry::GeometryError for a triple outside X3'.
LLTReport llt_junction_histogram(const Norm& xi, double p, const geometry::Anchors<double>& x, int N,
                                 std::uint64_t trials, std::uint64_t master_seed, double beta, int margin,
                                 int workers = default_workers());

/// Anchors [N x_i], componentwise floor.
Triple scaled_anchors(const geometry::Anchors<double>& x, int N);

struct TailRow {
  double alpha = 0.0;
  double threshold = 0.0;  // N^α
  std::uint64_t hits = 0;
  double ratio = 0.0;      // P̂[A] / P̂[E]
  double ratio_stderr = 0.0;
};

struct TailReport {
  int N = 0;
  double p = 0.0;
  Triple anchors;
  Point center;  // minimizer of φ for the integer anchors
  LatticeBox box;
  std::uint64_t trials = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t connected = 0;
  std::vector<TailRow> rows;  // in the order of the requested α
};

TailReport far_junction_tail(const Norm& xi, double p, const geometry::Anchors<double>& x, int N,
                             const std::vector<double>& alphas, std::uint64_t trials, std::uint64_t master_seed,
                             int margin, int workers = default_workers());
TailReport tail_from_run(const JunctionRun& run, const Point& center, int N, double p,
                         const std::vector<double>& alphas);

// Mass gap -------------------------------------------------------------------

struct MassGapRow {
  int length = 0;
  double distance = 0.0;
  Decimal h_cone, f_cone, ratio;  // ratio = f_cone / h_cone
  Decimal h, f;
};

struct MassGapTable {
  std::vector<MassGapRow> rows;
  bool strictly_decreasing = false;
};

/// Exact f/h of the cone-confined connections from k = 0 to n = length * e
/// along the strip axis.
MassGapTable mass_gap_scan(const StripModel& strip, const ExactProbability& p, const std::vector<int>& lengths);

}  // namespace perco

#endif
