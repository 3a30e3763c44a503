#include "magss/samplers.hpp"

#include <cmath>
#include <limits>

#include "magss/errors.hpp"

namespace magss::samplers {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_hausdorff(const targets::TargetDensity& target,
                     const metrics::MetricField& metric, const Eigen::VectorXd& x) {
  const double lp = target.log_density(x);
  const double ld = metric.log_det(x);
  const double v = lp - 0.5 * ld;
  return std::isnan(v) ? kNegInf : v;
}

// Shared by magss_step and hit_and_run_step so that the Euclidean metric
// reduces one to the other exactly, including the RNG draw sequence.
void slice_transition(ChainState& state, const targets::TargetDensity& target,
                      const metrics::MetricField& metric,
                      const geo::IntegratorConfig& icfg,
                      const slice::SliceParams& params) {
  params.validate();
  state.last = slice::SliceStats{};
  try {
    const double log_ph = log_hausdorff(target, metric, state.x);
    if (!std::isfinite(log_ph))
      throw EvaluationError("non-finite Hausdorff log density at current point");
    const double level = slice::draw_log_level(log_ph, state.rng);
    const Eigen::VectorXd v = metrics::sample_unit_tangent(metric, state.x, state.rng);
    geo::GeodesicCurve curve(metric, state.x, v, icfg);
    const slice::CurveDensity f = [&](double t) -> double {
      try {
        return log_hausdorff(target, metric, curve.eval(t));
      } catch (const std::exception&) {
        return kNegInf;  // beyond a failed integration: outside every slice
      }
    };
    const auto [l, r] = slice::step_out(level, f, params, state.rng, &state.last);
    const double t_star = slice::shrink(level, f, l, r, params, state.rng, &state.last);
    if (t_star != 0.0) state.x = curve.eval(t_star);
  } catch (const std::exception&) {
    state.last.fallback = true;  // keep the current point
  }
}

}  // namespace

void magss_step(ChainState& state, const targets::TargetDensity& target,
                const MagssConfig& config) {
  if (config.metric == nullptr) throw ConfigError("magss_step requires a metric");
  slice_transition(state, target, *config.metric, config.integrator, config.slice);
}

void hit_and_run_step(ChainState& state, const targets::TargetDensity& target,
                      const slice::SliceParams& params) {
  const metrics::EuclideanMetric metric(target.dim());
  slice_transition(state, target, metric, geo::IntegratorConfig{}, params);
}

void meta_magss_step(ChainState& state, const targets::TargetDensity& target,
                     const MetaConfig& config) {
  for (int k = 0; k < config.k_global; ++k) magss_step(state, target, config.magss);
  for (int l = 0; l < config.l_local; ++l) mala_step(state, target, config.step_size);
}

bool mala_transition(Eigen::VectorXd& x, RngStream& rng, double step_size,
                     const std::function<double(const Eigen::VectorXd&)>& log_density,
                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad) {
  if (step_size <= 0) throw ConfigError("MALA step size must be > 0");
  const Eigen::Index d = x.size();
  const double lp = log_density(x);
  const Eigen::VectorXd g = grad(x);
  const Eigen::VectorXd xi = rng.normal_vector(d);
  const double noise = std::sqrt(2.0 * step_size);
  const Eigen::VectorXd prop = x + step_size * g + noise * xi;

  double log_alpha = kNegInf;
  if (prop.allFinite()) {
    const double lp_prop = log_density(prop);
    if (std::isfinite(lp_prop)) {
      const Eigen::VectorXd g_prop = grad(prop);
      const double fwd = (prop - x - step_size * g).squaredNorm();
      const double bwd = (x - prop - step_size * g_prop).squaredNorm();
      log_alpha = lp_prop - lp + (fwd - bwd) / (4.0 * step_size);
      if (std::isnan(log_alpha)) log_alpha = kNegInf;
    }
  }
  const double log_u = std::log(rng.uniform());
  if (log_u < log_alpha) {
    x = prop;
    return true;
  }
  return false;
}

bool mala_step(ChainState& state, const targets::TargetDensity& target,
               double step_size) {
  return mala_transition(
      state.x, state.rng, step_size,
      [&](const Eigen::VectorXd& y) { return target.log_density(y); },
      [&](const Eigen::VectorXd& y) { return target.grad_log_density(y); });
}

void PtConfig::validate() const {
  if (ladder.empty()) throw ConfigError("temperature ladder is empty");
  if (ladder.front() != 1.0) throw ConfigError("temperature ladder must start at 1");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] <= ladder[i - 1])
      throw ConfigError("temperature ladder must be strictly increasing");
  if (step_size <= 0) throw ConfigError("MALA step size must be > 0");
}

void pt_step(PtState& state, const targets::TargetDensity& target,
             const PtConfig& config) {
  config.validate();
  const std::size_t n = config.ladder.size();
  if (state.xs.size() != n) throw ConfigError("tempering state/ladder size mismatch");

  for (std::size_t i = 0; i < n; ++i) {
    const double inv_tau = 1.0 / config.ladder[i];
    mala_transition(
        state.xs[i], state.rng, config.step_size,
        [&](const Eigen::VectorXd& y) { return inv_tau * target.log_density(y); },
        [&](const Eigen::VectorXd& y) {
          return (inv_tau * target.grad_log_density(y)).eval();
        });
  }
  if (n >= 2) {
    const std::size_t j = state.rng.uniform_int(n - 1);
    const double log_alpha = pt_swap_log_acceptance(
        target.log_density(state.xs[j]), target.log_density(state.xs[j + 1]),
        config.ladder[j], config.ladder[j + 1]);
    if (std::log(state.rng.uniform()) < log_alpha)
      std::swap(state.xs[j], state.xs[j + 1]);
  }
}

double pt_swap_log_acceptance(double log_p_i, double log_p_j, double tau_i,
                              double tau_j) {
  return (1.0 / tau_i - 1.0 / tau_j) * (log_p_j - log_p_i);
}

void DigsConfig::validate() const {
  if (alphas.empty()) throw ConfigError("noise schedule is empty");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw ConfigError("noise schedule values must lie in (0, 1)");
  if (mala_steps < 0) throw ConfigError("mala_steps must be >= 0");
  if (step_size <= 0) throw ConfigError("MALA step size must be > 0");
}

void digs_step(ChainState& state, const targets::TargetDensity& target,
               const DigsConfig& config) {
  config.validate();
  const Eigen::Index d = state.x.size();
  for (const double alpha : config.alphas) {
    const double sigma = std::sqrt(1.0 - alpha * alpha);
    const double inv_var = 1.0 / (sigma * sigma);
    const Eigen::VectorXd xt = alpha * state.x + sigma * state.rng.normal_vector(d);

    // Denoising posterior pi(x) proportional to p(x) N(xt | alpha x, sigma^2 I).
    const auto log_pi = [&](const Eigen::VectorXd& y) {
      return target.log_density(y) - 0.5 * inv_var * (xt - alpha * y).squaredNorm();
    };
    const auto grad_pi = [&](const Eigen::VectorXd& y) {
      return (target.grad_log_density(y) + (alpha * inv_var) * (xt - alpha * y)).eval();
    };

    // Independence MH initialization from N(xt / alpha, (sigma / alpha)^2 I).
    const double prop_sd = sigma / alpha;
    const Eigen::VectorXd center = xt / alpha;
    const Eigen::VectorXd prop = center + prop_sd * state.rng.normal_vector(d);
    const double lq_prop = -0.5 * (prop - center).squaredNorm() / (prop_sd * prop_sd);
    const double lq_cur = -0.5 * (state.x - center).squaredNorm() / (prop_sd * prop_sd);
    double log_alpha = log_pi(prop) - log_pi(state.x) + lq_cur - lq_prop;
    if (std::isnan(log_alpha)) log_alpha = kNegInf;
    if (std::log(state.rng.uniform()) < log_alpha) state.x = prop;

    for (int j = 0; j < config.mala_steps; ++j)
      mala_transition(state.x, state.rng, config.step_size, log_pi, grad_pi);
  }
}

}  // namespace magss::samplers
