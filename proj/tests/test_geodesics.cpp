#include <doctest.h>

#include <cmath>
#include <memory>

#include "magss/errors.hpp"
#include "magss/geodesics.hpp"
#include "magss/metrics.hpp"
#include "magss/targets.hpp"
#include "oracles.hpp"

using namespace magss;
using namespace magss::geo;

namespace {

std::shared_ptr<targets::TargetDensity> gaussian(Eigen::Index d, double sigma = 1.0) {
  return std::make_shared<targets::GaussianMixtureTarget>(
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(d)},
      std::vector<double>{sigma}, std::vector<double>{1.0});
}

class FlatTarget : public targets::TargetDensity {
 public:
  explicit FlatTarget(Eigen::Index d) : d_(d) {}
  Eigen::Index dim() const override { return d_; }
  double log_density(const Eigen::VectorXd&) const override { return -0.5; }
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(d_);
  }
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Zero(d_, d_);
  }

 private:
  Eigen::Index d_;
};

Eigen::VectorXd unit_tangent(const metrics::MetricField& m, const Eigen::VectorXd& x,
                             RngStream& rng) {
  return metrics::sample_unit_tangent(m, x, rng);
}

}  // namespace

TEST_CASE("euclidean geodesics are exact straight lines for every integrator") {
  metrics::EuclideanMetric eu(3);
  RngStream rng(3);
  const Eigen::VectorXd x0 = rng.normal_vector(3);
  const Eigen::VectorXd v = unit_tangent(eu, x0, rng);
  for (IntegratorKind kind :
       {IntegratorKind::euler_fixed, IntegratorKind::rk4_fixed,
        IntegratorKind::dopri5_fixed, IntegratorKind::dopri5_adaptive}) {
    IntegratorConfig cfg;
    cfg.kind = kind;
    GeodesicCurve curve(eu, x0, v, cfg);
    for (double t : {-7.3, -1.0, 0.0, 0.4, 2.0, 9.9}) {
      CHECK((curve.eval(t) - (x0 + t * v)).cwiseAbs().maxCoeff() <= 1e-12);
      const auto [x, vel] = curve.eval_with_velocity(t);
      CHECK((vel - v).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(curve.step_count() == 0);  // flat metric never integrates
  }
}

TEST_CASE("t = 0 returns the origin exactly") {
  auto t = gaussian(2);
  metrics::MongeMetric monge(t, 1.0);
  RngStream rng(5);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(monge, x0, rng);
  GeodesicCurve curve(monge, x0, v, {});
  CHECK(curve.eval(0.0) == x0);
  const auto [x, vel] = curve.eval_with_velocity(0.0);
  CHECK(x == x0);
  CHECK((vel - v).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("backward evaluation mirrors forward with negated velocity") {
  auto t = std::make_shared<targets::FunnelTarget>(2);
  metrics::MongeMetric monge(t, 1.0);
  RngStream rng(7);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(monge, x0, rng);
  GeodesicCurve fwd(monge, x0, v, {});
  GeodesicCurve bwd(monge, x0, (-v).eval(), {});
  for (double s : {0.5, 1.0, 2.5, 4.0}) {
    CHECK((fwd.eval(-s) - bwd.eval(s)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("conformal metric over a flat density gives straight lines") {
  auto flat = std::make_shared<FlatTarget>(2);
  metrics::GenerativeMetric gen(flat, 0.5, 1.0);
  RngStream rng(11);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(gen, x0, rng);
  GeodesicCurve curve(gen, x0, v, {});
  for (double t : {-3.0, 1.0, 3.0}) {
    CHECK((curve.eval(t) - (x0 + t * v)).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("velocity-norm ratio identity for the inverse generative metric") {
  // along a geodesic of G = ((p+l)/(p0+l))^2 I the euclidean speed scales as
  // the reciprocal of (p + lambda)
  auto bimodal = std::make_shared<targets::GaussianMixtureTarget>(
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(1, -2.0),
                                   Eigen::VectorXd::Constant(1, 2.0)},
      std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5});
  const double lambda = 0.1;
  metrics::InverseGenerativeMetric metric(bimodal, lambda, 1.0);
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, -2.0);
  RngStream rng(13);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);
  IntegratorConfig cfg;
  cfg.rtol = 1e-7;
  cfg.atol = 1e-9;
  GeodesicCurve curve(metric, x0, v, cfg);
  const double c0 = v.norm() * (std::exp(bimodal->log_density(x0)) + lambda);
  for (double t : {-2.0, -1.0, -0.3, 0.3, 0.7, 1.3, 2.0, 3.0}) {
    const auto [x, vel] = curve.eval_with_velocity(t);
    const double c = vel.norm() * (std::exp(bimodal->log_density(x)) + lambda);
    CHECK(std::abs(c - c0) / c0 < 1e-3);
  }
}

TEST_CASE("inverse monge geodesics from a mode never slow down") {
  auto t = gaussian(2);
  metrics::InverseMongeMetric metric(t, 0.5);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);  // exact mode
  RngStream rng(17);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);
  GeodesicCurve curve(metric, x0, v, {});
  const double v0_norm = v.norm();
  for (double s : {0.2, 0.5, 1.0, 2.0, 3.5, 5.0, -0.7, -2.2, -4.4}) {
    const auto [x, vel] = curve.eval_with_velocity(s);
    CHECK(vel.norm() >= v0_norm - 1e-6);
  }
}

TEST_CASE("riemannian speed is conserved along adaptive geodesics") {
  RngStream rng(19);
  auto funnel = std::make_shared<targets::FunnelTarget>(2);
  metrics::MongeMetric monge(funnel, 1.0);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(monge, x0, rng);
  GeodesicCurve curve(monge, x0, v, {});  // adaptive dopri5 defaults
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(-5.0, 5.0);
    const auto [x, vel] = curve.eval_with_velocity(t);
    const double speed = std::sqrt(monge.quadratic_form(x, vel));
    CHECK(std::abs(speed - 1.0) <= 1e-3);
  }
}

TEST_CASE("adaptive runs self-converge as rtol tightens") {
  RngStream rng(23);
  auto funnel = std::make_shared<targets::FunnelTarget>(2);
  metrics::MongeMetric metric(funnel, 1.0);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);
  IntegratorConfig tight;
  tight.rtol = 1e-8;
  tight.atol = 1e-10;
  IntegratorConfig tighter = tight;
  tighter.rtol = 5e-9;
  GeodesicCurve c1(metric, x0, v, tight);
  GeodesicCurve c2(metric, x0, v, tighter);
  for (double t : {-5.0, -2.5, -1.0, 1.0, 2.5, 5.0}) {
    CHECK((c1.eval(t) - c2.eval(t)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("euler converges at first order against a tight reference") {
  RngStream rng(29);
  auto g = gaussian(2);
  metrics::GenerativeMetric metric(g, 1.0, 1.0);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);

  IntegratorConfig ref_cfg;
  ref_cfg.rtol = 1e-10;
  ref_cfg.atol = 1e-12;
  GeodesicCurve ref(metric, x0, v, ref_cfg);
  const Eigen::VectorXd truth = ref.eval(1.0);

  const auto euler_error = [&](double h) {
    IntegratorConfig cfg;
    cfg.kind = IntegratorKind::euler_fixed;
    cfg.h = h;
    GeodesicCurve c(metric, x0, v, cfg);
    return (c.eval(1.0) - truth).norm();
  };
  const double ratio = euler_error(0.01) / euler_error(0.005);
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("caches are monotone and deterministic") {
  auto funnel = std::make_shared<targets::FunnelTarget>(2);
  metrics::MongeMetric metric(funnel, 1.0);
  RngStream rng(31);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);

  GeodesicCurve curve(metric, x0, v, {});
  const Eigen::VectorXd at5 = curve.eval(5.0);
  const long steps_after_5 = curve.step_count();
  const Eigen::VectorXd at3 = curve.eval(3.0);
  CHECK(curve.step_count() == steps_after_5);  // no new integration work
  CHECK(curve.eval(5.0) == at5);               // bit-identical repeat
  CHECK(curve.eval(3.0) == at3);

  GeodesicCurve twin(metric, x0, v, {});
  CHECK(twin.eval(5.0) == at5);  // identical inputs, identical trajectory
  CHECK(twin.eval(3.0) == at3);
}

TEST_CASE("integration failures carry the last valid parameter") {
  auto funnel = std::make_shared<targets::FunnelTarget>(2);
  metrics::MongeMetric metric(funnel, 1.0);
  RngStream rng(37);
  const Eigen::VectorXd x0 = rng.normal_vector(2);
  const Eigen::VectorXd v = unit_tangent(metric, x0, rng);
  IntegratorConfig cfg;
  cfg.kind = IntegratorKind::euler_fixed;
  cfg.h = 0.01;
  cfg.max_steps_per_unit = 3;  // starve the budget: 50/h steps needed
  GeodesicCurve curve(metric, x0, v, cfg);
  try {
    curve.eval(50.0);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(std::isfinite(e.last_valid_t));
    CHECK(std::abs(e.last_valid_t) < 50.0);
    // the surviving range stays evaluable
    CHECK(curve.eval(e.last_valid_t * 0.5).allFinite());
    CHECK_THROWS_AS(curve.eval(50.0), IntegrationError);
  }
}

TEST_CASE("construction contract") {
  metrics::EuclideanMetric eu(2);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd bad_v = Eigen::VectorXd::Constant(2, 0.9);  // norm != 1
  CHECK_THROWS_AS(GeodesicCurve(eu, x0, bad_v, {}), ConfigError);

  Eigen::VectorXd v(2);
  v << 1.0, 0.0;
  GeodesicCurve curve(eu, x0, v, {});
  CHECK_THROWS_AS(curve.eval(1e6), ConfigError);  // beyond t_max

  IntegratorConfig bad;
  bad.h = -1.0;
  CHECK_THROWS_AS(GeodesicCurve(eu, x0, v, bad), ConfigError);
}
