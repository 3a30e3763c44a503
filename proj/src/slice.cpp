#include "magss/slice.hpp"

#include <cmath>
#include <limits>

#include "magss/errors.hpp"

namespace magss::slice {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double eval_or_neg_inf(const CurveDensity& f, double t, SliceStats* stats) {
  if (stats) ++stats->evals;
  try {
    const double v = f(t);
    return std::isnan(v) ? kNegInf : v;
  } catch (const std::exception&) {
    return kNegInf;
  }
}

}  // namespace

void SliceParams::validate() const {
  if (w <= 0) throw ConfigError("slice width w must be > 0");
  if (m < 1) throw ConfigError("step-out budget m must be >= 1");
  if (max_shrink_iters < 0) throw ConfigError("max_shrink_iters must be >= 0");
}

double draw_log_level(double log_fx, RngStream& rng) {
  return log_fx + std::log(rng.uniform());
}

std::pair<double, double> step_out(double log_level, const CurveDensity& f,
                                   const SliceParams& params, RngStream& rng,
                                   SliceStats* stats) {
  const double w = params.w;
  double l = -rng.uniform(0.0, w);
  double r = l + w;
  const long iota = 1 + static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(params.m)));
  // Left side may widen iota - 1 times, right side m - iota times.
  for (long i = 2; i <= iota && eval_or_neg_inf(f, l, stats) > log_level; ++i) {
    l -= w;
    if (stats) ++stats->expansions;
  }
  for (long j = 2; j <= params.m + 1 - iota && eval_or_neg_inf(f, r, stats) > log_level; ++j) {
    r += w;
    if (stats) ++stats->expansions;
  }
  return {l, r};
}

double shrink(double log_level, const CurveDensity& f, double l, double r,
              const SliceParams& params, RngStream& rng, SliceStats* stats) {
  if (l > 0 || r < 0) throw ConfigError("shrink interval must contain 0");
  double lo = l, hi = r;
  for (int iter = 0; iter < params.max_shrink_iters; ++iter) {
    const double len = hi - lo;
    const double theta_h = rng.uniform(0.0, len);
    const double t = theta_h > hi ? theta_h - len : theta_h;  // unwrap to (lo, hi]
    if (eval_or_neg_inf(f, t, stats) > log_level) return t;
    if (stats) ++stats->shrink_iters;
    if (t > 0)
      hi = t;
    else if (t < 0)
      lo = t;
    else
      break;  // rejected the current point itself; nothing left to shrink
  }
  if (stats) stats->fallback = true;
  return 0.0;
}

double slice_1d_step(double x, const std::function<double(double)>& log_density_1d,
                     const SliceParams& params, RngStream& rng, SliceStats* stats) {
  params.validate();
  const double lp = log_density_1d(x);
  if (!std::isfinite(lp))
    throw EvaluationError("slice_1d_step requires finite log density at the current point");
  const double level = draw_log_level(lp, rng);
  const CurveDensity f = [&](double t) { return log_density_1d(x + t); };
  const auto [l, r] = step_out(level, f, params, rng, stats);
  const double t_star = shrink(level, f, l, r, params, rng, stats);
  return x + t_star;
}

}  // namespace magss::slice
