#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "magss/errors.hpp"
#include "magss/harness.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<long> seed;
  std::optional<std::string> output_dir;
  std::optional<long> workers;
  std::optional<std::string> target_name;
  std::optional<std::string> sampler_name;
  std::optional<std::string> metric_name;
  std::optional<double> alpha2, lambda, p0, step_size, rtol, atol, w;
  std::optional<long> m, n_samples, n_chains, dim;
  std::optional<std::string> integrator;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--output-dir", f.output_dir, "output directory");
  cmd->add_option("--workers", f.workers, "parallel chain workers");
  cmd->add_option("--target", f.target_name, "target name");
  cmd->add_option("--sampler", f.sampler_name, "sampler name");
  cmd->add_option("--metric", f.metric_name, "metric name");
  cmd->add_option("--alpha2", f.alpha2, "Monge-family alpha^2");
  cmd->add_option("--lambda", f.lambda, "generative-family lambda");
  cmd->add_option("--p0", f.p0, "generative-family p0");
  cmd->add_option("--integrator", f.integrator,
                  "euler_fixed | rk4_fixed | dopri5_fixed | dopri5_adaptive");
  cmd->add_option("--step-size", f.step_size, "MALA step size");
  cmd->add_option("--rtol", f.rtol, "adaptive integrator rtol");
  cmd->add_option("--atol", f.atol, "adaptive integrator atol");
  cmd->add_option("--w", f.w, "slice step-out width");
  cmd->add_option("--m", f.m, "slice step-out budget");
  cmd->add_option("--n-samples", f.n_samples, "emitted samples per chain");
  cmd->add_option("--n-chains", f.n_chains, "number of chains");
  cmd->add_option("--dim", f.dim, "target dimension");
}

json load_doc(const CommonFlags& f) {
  json doc = json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw magss::ConfigError("cannot open config file " + f.config_path);
    in >> doc;
  }
  if (!doc.contains("schema_version")) doc["schema_version"] = 1;
  if (f.seed) doc["seed"] = *f.seed;
  if (f.output_dir) doc["output_dir"] = *f.output_dir;
  if (f.workers) doc["workers"] = *f.workers;
  if (f.target_name) doc["target"]["name"] = *f.target_name;
  if (f.sampler_name) doc["sampler"]["name"] = *f.sampler_name;
  if (f.metric_name) doc["metric"]["name"] = *f.metric_name;
  if (f.alpha2) doc["metric"]["params"]["alpha2"] = *f.alpha2;
  if (f.lambda) doc["metric"]["params"]["lambda"] = *f.lambda;
  if (f.p0) doc["metric"]["params"]["p0"] = *f.p0;
  if (f.integrator) doc["integrator"]["kind"] = *f.integrator;
  if (f.step_size) doc["sampler"]["params"]["step_size"] = *f.step_size;
  if (f.rtol) doc["integrator"]["rtol"] = *f.rtol;
  if (f.atol) doc["integrator"]["atol"] = *f.atol;
  if (f.w) doc["slice"]["w"] = *f.w;
  if (f.m) doc["slice"]["m"] = *f.m;
  if (f.n_samples) doc["n_samples"] = *f.n_samples;
  if (f.n_chains) doc["n_chains"] = *f.n_chains;
  if (f.dim) doc["target"]["params"]["dim"] = *f.dim;
  return doc;
}

int report_outcome(const magss::harness::RunReport& report, long n_chains) {
  for (const auto& warning : report.warnings)
    std::cerr << "warning: " << warning << "\n";
  for (const auto& chain : report.chains)
    if (chain.failed)
      std::cerr << "chain " << chain.index << " failed: " << chain.error << "\n";
  std::cout << report.diagnostics.to_json().dump(2) << "\n";
  if (report.n_failed == n_chains) {
    std::cerr << "error: all chains failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geodesic slice sampling benchmark harness"};
  app.require_subcommand(1);

  CommonFlags run_flags, grid_flags, trace_flags, tune_flags;

  auto* cmd_run = app.add_subcommand("run", "run a sampling experiment");
  add_common_flags(cmd_run, run_flags);

  auto* cmd_grid = app.add_subcommand("grid", "grid search over 1-2 parameters");
  add_common_flags(cmd_grid, grid_flags);
  std::string grid_param1, grid_param2;
  std::vector<double> grid_values1, grid_values2;
  std::optional<long> grid_samples;
  cmd_grid->add_option("--param1", grid_param1, "first grid parameter, e.g. metric.alpha2");
  cmd_grid->add_option("--values1", grid_values1, "first parameter values");
  cmd_grid->add_option("--param2", grid_param2, "second grid parameter");
  cmd_grid->add_option("--values2", grid_values2, "second parameter values");
  cmd_grid->add_option("--grid-samples", grid_samples, "samples per grid cell");

  auto* cmd_trace = app.add_subcommand("trace", "trace geodesics to CSV");
  add_common_flags(cmd_trace, trace_flags);
  std::vector<double> trace_origin;
  long trace_directions = 8, trace_steps = 100;
  double trace_tmax = 5.0;
  std::string trace_out;
  cmd_trace->add_option("--origin", trace_origin, "origin point");
  cmd_trace->add_option("--n-directions", trace_directions, "number of directions");
  cmd_trace->add_option("--t-max", trace_tmax, "maximum arc length");
  cmd_trace->add_option("--t-steps", trace_steps, "rows per direction");
  cmd_trace->add_option("--trace-output", trace_out, "trace CSV path");

  auto* cmd_tune = app.add_subcommand("tune", "tune the MALA step size");
  add_common_flags(cmd_tune, tune_flags);
  double tune_rate = 0.6, tune_lo = 1e-6, tune_hi = 10.0;
  long tune_pilot = 2000;
  cmd_tune->add_option("--rate", tune_rate, "target acceptance rate");
  cmd_tune->add_option("--bracket-lo", tune_lo, "step size bracket lower end");
  cmd_tune->add_option("--bracket-hi", tune_hi, "step size bracket upper end");
  cmd_tune->add_option("--pilot-steps", tune_pilot, "pilot transitions per probe");

  auto* cmd_report = app.add_subcommand("report", "recompute diagnostics for a run");
  std::string report_dir;
  cmd_report->add_option("--output-dir", report_dir, "existing run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      const auto cfg = magss::harness::parse_config(load_doc(run_flags));
      const auto report = magss::harness::run_experiment(cfg);
      return report_outcome(report, cfg.n_chains);
    }
    if (cmd_grid->parsed()) {
      json doc = load_doc(grid_flags);
      json grid = json::object();
      if (doc.contains("grid")) {
        grid = doc["grid"];
        doc.erase("grid");
      }
      if (!grid_param1.empty()) {
        grid["param1"] = grid_param1;
        grid["values1"] = grid_values1;
      }
      if (!grid_param2.empty()) {
        grid["param2"] = grid_param2;
        grid["values2"] = grid_values2;
      }
      if (grid_samples) grid["n_samples"] = *grid_samples;
      const auto cfg = magss::harness::parse_config(doc);
      const auto result = magss::harness::grid_search(cfg, grid);
      std::cout << "best cell: " << result.cells.front().overrides.dump()
                << " score " << result.cells.front().score << "\n";
      return 0;
    }
    if (cmd_trace->parsed()) {
      json doc = load_doc(trace_flags);
      doc.erase("n_chains");
      const auto cfg = magss::harness::parse_config(doc);
      std::vector<std::string> warnings;
      auto target = magss::harness::make_target(cfg.target_name, cfg.target_params, &warnings);
      auto metric =
          magss::harness::make_metric(cfg.metric_name, cfg.metric_params, target, &warnings);
      magss::harness::TraceConfig tc;
      tc.origin = trace_origin.empty()
                      ? Eigen::VectorXd::Zero(target->dim()).eval()
                      : Eigen::Map<Eigen::VectorXd>(trace_origin.data(),
                                                    static_cast<Eigen::Index>(trace_origin.size()))
                            .eval();
      tc.n_directions = static_cast<int>(trace_directions);
      tc.t_max = trace_tmax;
      tc.t_steps = static_cast<int>(trace_steps);
      const std::string path =
          trace_out.empty() ? cfg.output_dir + "/trace.csv" : trace_out;
      magss::harness::trace_geodesics(*target, *metric, cfg.integrator, tc, cfg.seed, path);
      std::cout << "trace written to " << path << "\n";
      return 0;
    }
    if (cmd_tune->parsed()) {
      const auto cfg = magss::harness::parse_config(load_doc(tune_flags));
      std::vector<std::string> warnings;
      auto target = magss::harness::make_target(cfg.target_name, cfg.target_params, &warnings);
      const auto result =
          magss::harness::mala_tune(*target, tune_rate, tune_lo, tune_hi, tune_pilot, cfg.seed);
      if (result.bracket_exhausted)
        std::cerr << "warning: bracket exhausted; returning best found\n";
      std::cout << json{{"step_size", result.step_size},
                        {"acceptance", result.acceptance},
                        {"bracket_exhausted", result.bracket_exhausted}}
                       .dump(2)
                << "\n";
      return 0;
    }
    if (cmd_report->parsed()) {
      const auto report = magss::harness::recompute_report(report_dir);
      std::cout << report.diagnostics.to_json().dump(2) << "\n";
      return report.n_failed == static_cast<long>(report.chains.size()) ? 1 : 0;
    }
  } catch (const magss::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
