#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "magss/metrics.hpp"

namespace magss::geo {

enum class IntegratorKind { euler_fixed, rk4_fixed, dopri5_fixed, dopri5_adaptive };

IntegratorKind integrator_kind_from_name(const std::string& name);
std::string integrator_kind_name(IntegratorKind kind);

struct IntegratorConfig {
  IntegratorKind kind = IntegratorKind::dopri5_adaptive;
  double h = 0.01;       // fixed step size; initial trial step when adaptive
  double rtol = 1e-5;
  double atol = 1e-6;
  double h_max = 10.0;   // adaptive step ceiling
  long max_steps_per_unit = 100000;
  double t_max = 1000.0; // hard cap on |t| accepted by eval()
  // States with any coordinate beyond this magnitude abort the curve. Inverse
  // metrics accelerate geodesics exponentially through vanishing density;
  // without a cap they grind toward floating-point overflow.
  double state_cap = 1e8;

  void validate() const;
};

/// One geodesic of a metric field, integrated lazily and cached. The curve is
/// parameterized by Riemannian arc length: the initial velocity is
/// renormalized to unit Riemannian norm at construction (it must already be
/// within 1e-8 of unit). Two independent caches cover t >= 0 and t <= 0 and
/// only ever grow outward, so evaluation at a previously covered t is
/// bit-identical and performs no new integration work. Between accepted steps
/// positions and velocities are cubic-Hermite interpolated.
///
/// A curve is owned by a single chain at a time; evaluation mutates caches.
class GeodesicCurve {
 public:
  GeodesicCurve(const metrics::MetricField& metric, Eigen::VectorXd x0,
                Eigen::VectorXd v0, IntegratorConfig cfg);

  /// Position at signed arc length t. Throws IntegrationError (with the last
  /// valid t) if the trajectory blew up or ran out of step budget before
  /// reaching t.
  Eigen::VectorXd eval(double t);

  /// Position and velocity at t.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> eval_with_velocity(double t);

  /// Total integration steps taken so far (accepted + rejected).
  long step_count() const { return fwd_.steps + bwd_.steps; }

  const Eigen::VectorXd& origin() const { return x0_; }
  const Eigen::VectorXd& initial_velocity() const { return v0_; }
  const metrics::MetricField& metric() const { return *metric_; }

 private:
  struct Knot {
    double t;
    Eigen::VectorXd y;   // (x, v) stacked
    Eigen::VectorXd dy;  // (v, acceleration)
  };
  struct Cache {
    std::vector<Knot> knots;  // |t| non-decreasing, knots[0].t == 0
    double h_next = 0.0;
    double err_prev = 1.0;
    bool dead = false;
    long steps = 0;
  };

  void rhs_into(const Eigen::VectorXd& y, Eigen::VectorXd& dy) const;
  void extend(Cache& cache, double dir, double target_abs_t);
  Eigen::VectorXd state_at(double t);

  const metrics::MetricField* metric_;
  IntegratorConfig cfg_;
  Eigen::VectorXd x0_, v0_;
  Eigen::Index dim_;
  bool flat_;
  Cache fwd_, bwd_;
  // stage workspace, reused across steps (a curve is single-threaded)
  Eigen::VectorXd ws_tmp_, ws_k2_, ws_k3_, ws_k4_, ws_k5_, ws_k6_, ws_y1_, ws_dy1_;
};

}  // namespace magss::geo
