#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "magss/geodesics.hpp"
#include "magss/metrics.hpp"
#include "magss/rng.hpp"
#include "magss/slice.hpp"
#include "magss/targets.hpp"

namespace magss::samplers {

/// State owned by one chain: position, its private random stream, and the
/// statistics of the most recent transition.
struct ChainState {
  Eigen::VectorXd x;
  RngStream rng;
  slice::SliceStats last;

  ChainState(Eigen::VectorXd x0, std::uint64_t seed)
      : x(std::move(x0)), rng(seed) {}
};

struct MagssConfig {
  const metrics::MetricField* metric = nullptr;
  geo::IntegratorConfig integrator;
  slice::SliceParams slice;
};

/// One geodesic slice transition: draw a level under the Hausdorff density,
/// draw a unit tangent, step out and shrink along the geodesic, land on the
/// accepted point. Metric or integration failures keep the current point and
/// set the fallback flag.
void magss_step(ChainState& state, const targets::TargetDensity& target,
                const MagssConfig& config);

/// Slice sampling along a uniformly random straight line; identical to
/// magss_step under the Euclidean metric (and implemented as exactly that).
void hit_and_run_step(ChainState& state, const targets::TargetDensity& target,
                      const slice::SliceParams& params);

struct MetaConfig {
  MagssConfig magss;
  int k_global = 1;       // geodesic slice sweeps per emitted sample
  int l_local = 0;        // local MALA steps per emitted sample
  double step_size = 0.1; // local MALA step size
};

/// K geodesic slice sweeps followed by L local MALA steps, emitted as a
/// single sample.
void meta_magss_step(ChainState& state, const targets::TargetDensity& target,
                     const MetaConfig& config);

/// Langevin proposal x + eps * grad + sqrt(2 eps) * xi with the
/// Metropolis-Hastings correction. Returns whether the proposal was accepted.
/// Non-finite proposals auto-reject; the RNG consumption per call is fixed.
bool mala_step(ChainState& state, const targets::TargetDensity& target,
               double step_size);

/// MALA targeting an arbitrary differentiable log density.
bool mala_transition(Eigen::VectorXd& x, RngStream& rng, double step_size,
                     const std::function<double(const Eigen::VectorXd&)>& log_density,
                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad);

struct PtConfig {
  std::vector<double> ladder;  // temperatures, ascending, ladder[0] == 1
  double step_size = 0.1;      // MALA step shared by all levels

  void validate() const;
};

/// Parallel tempering state: one walker per temperature plus the sweep's
/// random stream, all owned by a single chain executor.
struct PtState {
  std::vector<Eigen::VectorXd> xs;
  RngStream rng;

  PtState(const Eigen::VectorXd& x0, std::size_t n_levels, std::uint64_t seed)
      : xs(n_levels, x0), rng(seed) {}
};

/// One sweep: a MALA move per level on p^{1/tau_i}, then one swap attempt on
/// a uniformly chosen adjacent pair. The cold walker xs[0] is the sample.
void pt_step(PtState& state, const targets::TargetDensity& target,
             const PtConfig& config);

/// Log acceptance of exchanging the walkers at temperatures tau_i and tau_j
/// whose (un-tempered) log densities are log_p_i and log_p_j.
double pt_swap_log_acceptance(double log_p_i, double log_p_j, double tau_i,
                              double tau_j);

struct DigsConfig {
  std::vector<double> alphas;  // noise schedule, each in (0, 1)
  int mala_steps = 10;         // local MALA steps per denoising
  double step_size = 0.1;

  void validate() const;
};

/// One Gibbs sweep over the noise schedule: noise the state, then sample the
/// denoising posterior p(x | x~) by a Metropolis-Hastings initialization
/// (Gaussian proposal centered at x~/alpha with standard deviation
/// sigma/alpha) followed by local MALA steps.
void digs_step(ChainState& state, const targets::TargetDensity& target,
               const DigsConfig& config);

}  // namespace magss::samplers
