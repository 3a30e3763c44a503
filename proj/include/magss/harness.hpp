#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "magss/diagnostics.hpp"
#include "magss/geodesics.hpp"
#include "magss/metrics.hpp"
#include "magss/samplers.hpp"
#include "magss/slice.hpp"
#include "magss/targets.hpp"

namespace magss::harness {

using nlohmann::json;

struct InitSpec {
  enum class Kind { standard_normal, fixed, reference };
  Kind kind = Kind::standard_normal;
  Eigen::VectorXd point;  // for Kind::fixed
};

/// Fully resolved experiment description. Parsed strictly from JSON: unknown
/// keys anywhere are configuration errors, and the seed is mandatory.
struct ExperimentConfig {
  std::string target_name;
  json target_params = json::object();
  std::string sampler_name = "magss";
  json sampler_params = json::object();
  std::string metric_name = "euclidean";
  json metric_params = json::object();
  geo::IntegratorConfig integrator;
  slice::SliceParams slice_params;
  long n_chains = 1;
  long n_samples = 100;
  long burn_in = -1;  // -1: default to 10% of n_samples
  long thinning = 1;
  std::uint64_t seed = 0;
  InitSpec init;
  std::string output_dir = "out";
  long workers = 1;
  long ksd_max_samples = 2000;

  long effective_burn_in() const {
    return burn_in >= 0 ? burn_in : n_samples / 10;
  }
  /// Canonical JSON form (excludes output_dir and workers).
  json canonical() const;
  /// FNV-1a hash of the canonical form, as fixed-width hex.
  std::string hash() const;
};

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config_file(const std::string& path);

/// Builds the target named in `name`; `warnings` collects non-fatal notes.
std::shared_ptr<targets::TargetDensity> make_target(
    const std::string& name, const json& params, std::vector<std::string>* warnings = nullptr);

std::shared_ptr<metrics::MetricField> make_metric(
    const std::string& name, const json& params,
    const std::shared_ptr<targets::TargetDensity>& target,
    std::vector<std::string>* warnings = nullptr);

/// One MCMC kernel instance driving one chain. step() advances by one emitted
/// sample (thinning handled by the caller).
class ChainRunner {
 public:
  virtual ~ChainRunner() = default;
  virtual void step() = 0;
  virtual const Eigen::VectorXd& position() const = 0;
  virtual slice::SliceStats last_stats() const { return {}; }
};

std::unique_ptr<ChainRunner> make_runner(
    const ExperimentConfig& config, std::shared_ptr<targets::TargetDensity> target,
    std::shared_ptr<metrics::MetricField> metric, const Eigen::VectorXd& x0,
    std::uint64_t seed);

struct ChainResult {
  long index = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  Eigen::MatrixXd samples;
  double avg_stepout = 0.0;
  double avg_shrink = 0.0;
  long fallbacks = 0;
  double seconds = 0.0;
};

struct DiagnosticReport {
  Eigen::VectorXd w1_per_dimension;  // empty when no reference sampler
  double w1_mean = -1.0;             // -1 marks "not available"
  double ksd = -1.0;
  double ksd_spread_chains = -1.0;
  double min_ess = 0.0;
  double avg_ess = 0.0;
  double jump_rate_percent = -1.0;
  long sample_count = 0;
  double wall_clock_seconds = 0.0;

  json to_json() const;
};

struct RunReport {
  std::string config_hash;
  std::vector<std::string> chain_files;
  std::vector<ChainResult> chains;  // samples cleared after persisting
  DiagnosticReport diagnostics;
  std::vector<std::string> warnings;
  long n_failed = 0;
};

/// Runs the configured experiment: chains in parallel up to `workers`, chain
/// CSVs + metadata sidecars + report.json + summary.csv under output_dir.
/// Throws ConfigError for invalid configurations; chain-level runtime
/// failures are recorded per chain instead of thrown.
RunReport run_experiment(const ExperimentConfig& config);

/// Recomputes the diagnostic report for a previously persisted run directory.
RunReport recompute_report(const std::string& output_dir);

struct GridCell {
  json overrides;
  double score = 0.0;   // primary ranking value (lower is better)
  double w1_mean = -1.0;
  double jump_rate = -1.0;
  bool valid = false;
};

struct GridResult {
  std::vector<GridCell> cells;  // sorted best-first
  ExperimentConfig best;
};

/// Runs every cell of a one- or two-parameter grid at reduced budget and
/// ranks by mean marginal W1 when the target has a reference sampler, else by
/// jump rate. Writes grid.csv under output_dir.
GridResult grid_search(const ExperimentConfig& base, const json& grid_spec);

struct TraceConfig {
  Eigen::VectorXd origin;
  int n_directions = 8;
  double t_max = 5.0;
  int t_steps = 100;  // rows per direction (t > 0)
};

/// Integrates geodesics from a common origin along random unit tangents and
/// writes rows (direction_id, t, x_1..x_D, euclidean_speed, riemannian_speed,
/// truncated) to `csv_path`.
void trace_geodesics(const targets::TargetDensity& target,
                     const metrics::MetricField& metric,
                     const geo::IntegratorConfig& icfg, const TraceConfig& tc,
                     std::uint64_t seed, const std::string& csv_path);

struct TuneResult {
  double step_size = 0.0;
  double acceptance = 0.0;
  bool bracket_exhausted = false;
};

/// Bisection on the MALA step size until the pilot acceptance rate is within
/// +-5% of `target_rate`. Returns the best value found (with a warning flag)
/// when the bracket cannot reach the target.
TuneResult mala_tune(const targets::TargetDensity& target, double target_rate,
                     double bracket_lo, double bracket_hi, long pilot_steps,
                     std::uint64_t seed);

/// Chain CSV round-trip helpers (17 significant digits, exact for doubles).
void write_chain_csv(const std::string& path, long chain_id,
                     const Eigen::MatrixXd& samples);
Eigen::MatrixXd read_chain_csv(const std::string& path);

}  // namespace magss::harness
