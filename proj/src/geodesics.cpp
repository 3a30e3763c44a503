#include "magss/geodesics.hpp"

#include <algorithm>
#include <cmath>

#include "magss/errors.hpp"

namespace magss::geo {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2;
constexpr double kFacMax = 5.0;
constexpr double kPiAlpha = 0.7 / 5.0;
constexpr double kPiBeta = 0.4 / 5.0;

}  // namespace

IntegratorKind integrator_kind_from_name(const std::string& name) {
  if (name == "euler_fixed") return IntegratorKind::euler_fixed;
  if (name == "rk4_fixed") return IntegratorKind::rk4_fixed;
  if (name == "dopri5_fixed") return IntegratorKind::dopri5_fixed;
  if (name == "dopri5_adaptive") return IntegratorKind::dopri5_adaptive;
  throw ConfigError("unknown integrator '" + name + "'");
}

std::string integrator_kind_name(IntegratorKind kind) {
  switch (kind) {
    case IntegratorKind::euler_fixed: return "euler_fixed";
    case IntegratorKind::rk4_fixed: return "rk4_fixed";
    case IntegratorKind::dopri5_fixed: return "dopri5_fixed";
    case IntegratorKind::dopri5_adaptive: return "dopri5_adaptive";
  }
  return "?";
}

void IntegratorConfig::validate() const {
  if (h <= 0) throw ConfigError("integrator step h must be > 0");
  if (rtol <= 0 || atol <= 0) throw ConfigError("rtol and atol must be > 0");
  if (h_max <= 0) throw ConfigError("h_max must be > 0");
  if (max_steps_per_unit < 1) throw ConfigError("max_steps_per_unit must be >= 1");
  if (t_max <= 0) throw ConfigError("t_max must be > 0");
  if (state_cap <= 0) throw ConfigError("state_cap must be > 0");
}

GeodesicCurve::GeodesicCurve(const metrics::MetricField& metric,
                             Eigen::VectorXd x0, Eigen::VectorXd v0,
                             IntegratorConfig cfg)
    : metric_(&metric), cfg_(cfg), x0_(std::move(x0)), v0_(std::move(v0)) {
  cfg_.validate();
  dim_ = x0_.size();
  if (v0_.size() != dim_) throw ConfigError("geodesic x0/v0 dimension mismatch");
  const double norm_g = std::sqrt(metric_->quadratic_form(x0_, v0_));
  if (!std::isfinite(norm_g) || std::abs(norm_g - 1.0) > 1e-8)
    throw ConfigError("initial velocity must have unit Riemannian norm, got " +
                      std::to_string(norm_g));
  v0_ /= norm_g;  // t is exact arc length from here on
  flat_ = metric_->is_flat();
}

void GeodesicCurve::rhs_into(const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
  dy.resize(2 * dim_);
  dy.head(dim_) = y.tail(dim_);
  metric_->acceleration_into(y.head(dim_), y.tail(dim_), dy.tail(dim_));
}

void GeodesicCurve::extend(Cache& cache, double dir, double target_abs_t) {
  if (!cache.knots.empty() &&
      std::abs(cache.knots.back().t) >= target_abs_t)
    return;
  if (cache.dead)
    throw IntegrationError("geodesic integration previously failed",
                           cache.knots.empty() ? 0.0 : cache.knots.back().t);
  if (cache.knots.empty()) {
    Knot k0;
    k0.t = 0.0;
    k0.y.resize(2 * dim_);
    k0.y.head(dim_) = x0_;
    k0.y.tail(dim_) = v0_;
    try {
      rhs_into(k0.y, k0.dy);
    } catch (const std::exception&) {
      cache.dead = true;
      throw IntegrationError("geodesic right-hand side failed at origin", 0.0);
    }
    if (!k0.dy.allFinite()) {
      cache.dead = true;
      throw IntegrationError("geodesic right-hand side non-finite at origin", 0.0);
    }
    cache.knots.push_back(std::move(k0));
    cache.h_next = cfg_.h;
  }

  const long budget =
      cfg_.max_steps_per_unit *
      static_cast<long>(std::ceil(std::max(1.0, target_abs_t)));
  const bool adaptive = cfg_.kind == IntegratorKind::dopri5_adaptive;

  while (std::abs(cache.knots.back().t) < target_abs_t) {
    if (cache.steps >= budget) {
      cache.dead = true;
      throw IntegrationError("geodesic step budget exhausted",
                             cache.knots.back().t);
    }
    const Knot& cur = cache.knots.back();
    const double h_abs = adaptive ? cache.h_next : cfg_.h;
    const double h = dir * h_abs;
    if (h_abs < 1e-14 * std::max(1.0, std::abs(cur.t))) {
      cache.dead = true;
      throw IntegrationError("geodesic step size underflow", cur.t);
    }

    double err = 0.0;
    bool have_err = false;
    try {
      switch (cfg_.kind) {
        case IntegratorKind::euler_fixed: {
          ws_y1_ = cur.y + h * cur.dy;
          rhs_into(ws_y1_, ws_dy1_);
          break;
        }
        case IntegratorKind::rk4_fixed: {
          const Eigen::VectorXd& k1 = cur.dy;
          ws_tmp_ = cur.y + (h / 2) * k1;
          rhs_into(ws_tmp_, ws_k2_);
          ws_tmp_ = cur.y + (h / 2) * ws_k2_;
          rhs_into(ws_tmp_, ws_k3_);
          ws_tmp_ = cur.y + h * ws_k3_;
          rhs_into(ws_tmp_, ws_k4_);
          ws_y1_ = cur.y + (h / 6) * (k1 + 2 * ws_k2_ + 2 * ws_k3_ + ws_k4_);
          rhs_into(ws_y1_, ws_dy1_);
          break;
        }
        case IntegratorKind::dopri5_fixed:
        case IntegratorKind::dopri5_adaptive: {
          const Eigen::VectorXd& k1 = cur.dy;  // FSAL
          ws_tmp_ = cur.y + h * (a21 * k1);
          rhs_into(ws_tmp_, ws_k2_);
          ws_tmp_ = cur.y + h * (a31 * k1 + a32 * ws_k2_);
          rhs_into(ws_tmp_, ws_k3_);
          ws_tmp_ = cur.y + h * (a41 * k1 + a42 * ws_k2_ + a43 * ws_k3_);
          rhs_into(ws_tmp_, ws_k4_);
          ws_tmp_ = cur.y + h * (a51 * k1 + a52 * ws_k2_ + a53 * ws_k3_ + a54 * ws_k4_);
          rhs_into(ws_tmp_, ws_k5_);
          ws_tmp_ = cur.y +
                    h * (a61 * k1 + a62 * ws_k2_ + a63 * ws_k3_ + a64 * ws_k4_ +
                         a65 * ws_k5_);
          rhs_into(ws_tmp_, ws_k6_);
          ws_y1_ = cur.y + h * (b1 * k1 + b3 * ws_k3_ + b4 * ws_k4_ +
                                b5 * ws_k5_ + b6 * ws_k6_);
          rhs_into(ws_y1_, ws_dy1_);  // = k7, reused as k1 of the next step
          if (cfg_.kind == IntegratorKind::dopri5_adaptive) {
            ws_tmp_ = h * (e1 * k1 + e3 * ws_k3_ + e4 * ws_k4_ + e5 * ws_k5_ +
                           e6 * ws_k6_ + e7 * ws_dy1_);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < ws_tmp_.size(); ++i) {
              const double sc =
                  cfg_.atol +
                  cfg_.rtol * std::max(std::abs(cur.y[i]), std::abs(ws_y1_[i]));
              const double q = ws_tmp_[i] / sc;
              acc += q * q;
            }
            err = std::sqrt(acc / static_cast<double>(ws_tmp_.size()));
            have_err = true;
          }
          break;
        }
      }
    } catch (const std::exception&) {
      // Evaluation failure inside a stage: for adaptive, retry smaller before
      // giving up; fixed-step integrators abort immediately.
      ++cache.steps;
      if (adaptive && h_abs > 1e-12) {
        cache.h_next = h_abs * kFacMin;
        continue;
      }
      cache.dead = true;
      throw IntegrationError("geodesic right-hand side failed",
                             cache.knots.back().t);
    }
    ++cache.steps;

    const bool finite = ws_y1_.allFinite() && ws_dy1_.allFinite() && std::isfinite(err);
    if (!finite) {
      if (adaptive && h_abs > 1e-12) {
        cache.h_next = h_abs * kFacMin;
        continue;
      }
      cache.dead = true;
      throw IntegrationError("geodesic state non-finite",
                             cache.knots.back().t);
    }
    if (ws_y1_.cwiseAbs().maxCoeff() > cfg_.state_cap) {
      cache.dead = true;
      throw IntegrationError("geodesic state exceeded magnitude cap",
                             cache.knots.back().t);
    }

    if (have_err && err > 1.0) {
      cache.h_next =
          h_abs * std::max(kFacMin, kSafety * std::pow(err, -0.2));
      continue;  // rejected step
    }

    Knot next;
    next.t = cur.t + h;
    next.y = ws_y1_;
    next.dy = ws_dy1_;
    cache.knots.push_back(std::move(next));

    if (have_err) {
      const double e_clamped = std::max(err, 1e-10);
      double fac = kSafety * std::pow(e_clamped, -kPiAlpha) *
                   std::pow(cache.err_prev, kPiBeta);
      fac = std::clamp(fac, kFacMin, kFacMax);
      cache.h_next = std::min(h_abs * fac, cfg_.h_max);
      cache.err_prev = e_clamped;
    }
  }
}

Eigen::VectorXd GeodesicCurve::state_at(double t) {
  Cache& cache = t >= 0 ? fwd_ : bwd_;
  extend(cache, t >= 0 ? 1.0 : -1.0, std::abs(t));

  // Knots are ordered by |t|; locate the bracketing pair.
  const auto& ks = cache.knots;
  std::size_t lo = 0, hi = ks.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (std::abs(ks[mid].t) <= std::abs(t))
      lo = mid;
    else
      hi = mid;
  }
  if (ks[lo].t == t) return ks[lo].y;
  if (ks[hi].t == t) return ks[hi].y;

  const Knot& p0 = ks[lo];
  const Knot& p1 = ks[hi];
  const double dt = p1.t - p0.t;
  const double s = (t - p0.t) / dt;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * p0.y + (h10 * dt) * p0.dy + h01 * p1.y + (h11 * dt) * p1.dy;
}

Eigen::VectorXd GeodesicCurve::eval(double t) {
  if (!std::isfinite(t)) throw ConfigError("geodesic parameter must be finite");
  if (std::abs(t) > cfg_.t_max)
    throw ConfigError("geodesic parameter exceeds t_max");
  if (t == 0.0) return x0_;
  if (flat_) return x0_ + t * v0_;
  return state_at(t).head(dim_);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> GeodesicCurve::eval_with_velocity(double t) {
  if (!std::isfinite(t)) throw ConfigError("geodesic parameter must be finite");
  if (std::abs(t) > cfg_.t_max)
    throw ConfigError("geodesic parameter exceeds t_max");
  if (t == 0.0) return {x0_, v0_};
  if (flat_) return {x0_ + t * v0_, v0_};
  const Eigen::VectorXd y = state_at(t);
  return {y.head(dim_), y.tail(dim_)};
}

}  // namespace magss::geo
