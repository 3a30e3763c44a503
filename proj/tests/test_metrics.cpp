#include <doctest.h>

#include <cmath>
#include <memory>

#include "magss/errors.hpp"
#include "magss/metrics.hpp"
#include "magss/targets.hpp"
#include "oracles.hpp"

using namespace magss;
using namespace magss::metrics;

namespace {

std::shared_ptr<targets::TargetDensity> gaussian(Eigen::Index d, double sigma = 1.0) {
  return std::make_shared<targets::GaussianMixtureTarget>(
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Zero(d)},
      std::vector<double>{sigma}, std::vector<double>{1.0});
}

std::shared_ptr<targets::TargetDensity> two_gaussian(Eigen::Index d, double sigma) {
  return std::make_shared<targets::GaussianMixtureTarget>(
      std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(d, -1.0),
                                   Eigen::VectorXd::Constant(d, 1.0)},
      std::vector<double>{sigma, sigma}, std::vector<double>{0.2, 0.8});
}

std::shared_ptr<const targets::LogisticRegressionTarget> small_logistic(Eigen::Index d) {
  RngStream rng(42);
  Eigen::MatrixXd x(30, d);
  for (Eigen::Index i = 0; i < 30; ++i) x.row(i) = rng.normal_vector(d).transpose();
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return std::make_shared<targets::LogisticRegressionTarget>(x, y, 100.0);
}

// identity scaled by a constant; exercises norms without target coupling
class ScaledIdentityMetric : public MetricField {
 public:
  ScaledIdentityMetric(Eigen::Index d, double c) : d_(d), c_(c) {}
  Eigen::Index dim() const override { return d_; }
  Eigen::MatrixXd tensor(const Eigen::VectorXd&) const override {
    return c_ * c_ * Eigen::MatrixXd::Identity(d_, d_);
  }
  Eigen::MatrixXd inverse(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Identity(d_, d_) / (c_ * c_);
  }
  double log_det(const Eigen::VectorXd&) const override {
    return 2.0 * d_ * std::log(c_);
  }
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z) const override {
    return z / c_;
  }
  Eigen::VectorXd acceleration(const Eigen::VectorXd&,
                               const Eigen::VectorXd& v) const override {
    return Eigen::VectorXd::Zero(v.size());
  }

 private:
  Eigen::Index d_;
  double c_;
};

struct MetricCase {
  std::string name;
  std::shared_ptr<MetricField> metric;
};

std::vector<MetricCase> standard_cases(const std::shared_ptr<targets::TargetDensity>& t,
                                       double alpha2 = 0.5, double lambda = 1.0,
                                       double p0 = 1.0) {
  return {
      {"monge", std::make_shared<MongeMetric>(t, alpha2)},
      {"inverse_monge", std::make_shared<InverseMongeMetric>(t, alpha2)},
      {"generative", std::make_shared<GenerativeMetric>(t, lambda, p0)},
      {"inverse_generative", std::make_shared<InverseGenerativeMetric>(t, lambda, p0)},
  };
}

}  // namespace

TEST_CASE("identity reductions") {
  auto t = gaussian(3);
  EuclideanMetric eu(3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.7);
  CHECK(eu.tensor(x).isIdentity(0.0));
  CHECK(eu.log_det(x) == 0.0);

  // Monge at a mode: the rank-1 term vanishes
  MongeMetric monge(t, 2.0);
  CHECK(monge.tensor(Eigen::VectorXd::Zero(3)).isIdentity(1e-15));
  CHECK(monge.acceleration(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3))
            .cwiseAbs()
            .maxCoeff() <= 1e-15);

  // Generative with p0 = p(x): the scalar factor is exactly 1
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  const double p_at = std::exp(t->log_density(x0));
  GenerativeMetric gen(t, 0.5, p_at);
  CHECK(gen.tensor(x0).isIdentity(1e-12));
}

TEST_CASE("tensor-inverse products and log determinants") {
  RngStream rng(7);
  for (Eigen::Index d : {2L, 3L, 8L}) {
    auto t = std::make_shared<targets::FunnelTarget>(d);
    auto cases = standard_cases(t);
    if (d <= 4) cases.push_back({"fisher", std::make_shared<FisherLogisticMetric>(small_logistic(d))});
    for (const auto& mc : cases) {
      CAPTURE(mc.name);
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd x = rng.normal_vector(d) * 1.5;
        const Eigen::MatrixXd g = mc.metric->tensor(x);
        const Eigen::MatrixXd gi = mc.metric->inverse(x);
        CHECK((g * gi - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
        const double ld_dense = std::log(g.determinant());
        CHECK(std::abs(mc.metric->log_det(x) - ld_dense) <=
              1e-8 * std::max(1.0, std::abs(ld_dense)));
        // symmetric positive definite
        CHECK((g - g.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff() > 0.0);
      }
    }
  }
}

TEST_CASE("inverse-pair duality") {
  RngStream rng(13);
  auto t = two_gaussian(3, 0.8);
  MongeMetric monge(t, 0.7);
  InverseMongeMetric inv_monge(t, 0.7);
  GenerativeMetric gen(t, 0.3, 1.2);
  InverseGenerativeMetric inv_gen(t, 0.3, 1.2);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::VectorXd x = rng.normal_vector(3) * 2.0;
    CHECK((inv_monge.tensor(x) - monge.inverse(x)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((inv_gen.tensor(x) - gen.inverse(x)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(inv_monge.log_det(x) == doctest::Approx(-monge.log_det(x)).epsilon(1e-12));
    CHECK(inv_gen.log_det(x) == doctest::Approx(-gen.log_det(x)).epsilon(1e-12));
  }
}

TEST_CASE("square-root identities including vanishing gradients") {
  RngStream rng(17);
  auto t = gaussian(3);
  const double a2 = 1.3;
  MongeMetric monge(t, a2);
  InverseMongeMetric inv_monge(t, a2);

  std::vector<Eigen::VectorXd> points;
  for (int rep = 0; rep < 30; ++rep) points.push_back(rng.normal_vector(3) * 2.0);
  points.push_back(Eigen::VectorXd::Zero(3));  // exact mode
  points.push_back(Eigen::VectorXd::Constant(3, 1e-8));  // |grad|^2 ~ 3e-16

  for (const auto& x : points) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, k);
      // G^{-1/2} applied twice equals G^{-1}
      const Eigen::VectorXd twice = monge.inv_sqrt_apply(x, monge.inv_sqrt_apply(x, e));
      CHECK((twice - monge.inverse(x) * e).cwiseAbs().maxCoeff() <= 1e-10);
      // the inverse metric's G^{-1/2} is the forward metric's G^{1/2}:
      // applying it twice must reproduce the forward tensor
      const Eigen::VectorXd sq =
          inv_monge.inv_sqrt_apply(x, inv_monge.inv_sqrt_apply(x, e));
      CHECK((sq - monge.tensor(x) * e).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("analytic accelerations match the finite-difference Christoffel oracle") {
  RngStream rng(23);
  std::vector<std::shared_ptr<targets::TargetDensity>> targets_list = {
      std::make_shared<targets::FunnelTarget>(2), gaussian(2), two_gaussian(2, 1.0),
      std::make_shared<targets::FunnelTarget>(3), two_gaussian(3, 1.0)};
  for (const auto& t : targets_list) {
    for (const auto& mc : standard_cases(t, 0.4, 0.8, 1.0)) {
      CAPTURE(mc.name);
      double worst = 0.0;
      for (int rep = 0; rep < 25; ++rep) {
        const Eigen::VectorXd x = rng.normal_vector(t->dim()) * 1.2;
        const Eigen::VectorXd v = rng.normal_vector(t->dim());
        const Eigen::VectorXd a = mc.metric->acceleration(x, v);
        const Eigen::VectorXd a_fd = christoffel_oracle(
            [&](const Eigen::VectorXd& y) { return mc.metric->tensor(y); }, x, v, 1e-5);
        const double rel = (a - a_fd).norm() / std::max(1.0, a.norm());
        worst = std::max(worst, rel);
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("inverse monge on the funnel matches the oracle at alpha2 = 0.1") {
  RngStream rng(29);
  auto t = std::make_shared<targets::FunnelTarget>(2);
  InverseMongeMetric m(t, 0.1);
  for (int rep = 0; rep < 25; ++rep) {
    const Eigen::VectorXd x = rng.normal_vector(2) * 1.5;
    const Eigen::VectorXd v = rng.normal_vector(2);
    const Eigen::VectorXd a = m.acceleration(x, v);
    const Eigen::VectorXd a_fd = christoffel_oracle(
        [&](const Eigen::VectorXd& y) { return m.tensor(y); }, x, v, 1e-5);
    CHECK((a - a_fd).norm() / std::max(1.0, a.norm()) < 1e-4);
  }
}

TEST_CASE("oracle degenerate cases") {
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.4);
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(3);
  const auto identity_fn = [](const Eigen::VectorXd& y) {
    return Eigen::MatrixXd::Identity(y.size(), y.size()).eval();
  };
  CHECK(christoffel_oracle(identity_fn, x, v).cwiseAbs().maxCoeff() <= 1e-12);
  const auto constant_fn = [](const Eigen::VectorXd& y) {
    return (4.0 * Eigen::MatrixXd::Identity(y.size(), y.size())).eval();
  };
  CHECK(christoffel_oracle(constant_fn, x, v).cwiseAbs().maxCoeff() <= 1e-12);
  const auto singular_fn = [](const Eigen::VectorXd& y) {
    return Eigen::MatrixXd::Zero(y.size(), y.size()).eval();
  };
  CHECK_THROWS_AS(christoffel_oracle(singular_fn, x, v), OracleError);
  CHECK_THROWS_AS(christoffel_oracle(identity_fn, Eigen::VectorXd::Zero(17),
                                     Eigen::VectorXd::Ones(17)),
                  OracleError);
}

TEST_CASE("generative acceleration vanishes on a plateau") {
  // a constant log-density has zero score, so grad log f = 0
  class Flat : public targets::TargetDensity {
   public:
    Eigen::Index dim() const override { return 2; }
    double log_density(const Eigen::VectorXd&) const override { return -1.0; }
    Eigen::VectorXd grad_log_density(const Eigen::VectorXd&) const override {
      return Eigen::VectorXd::Zero(2);
    }
    Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd&) const override {
      return Eigen::MatrixXd::Zero(2, 2);
    }
  };
  auto flat = std::make_shared<Flat>();
  GenerativeMetric gen(flat, 0.5, 1.0);
  InverseGenerativeMetric inv_gen(flat, 0.5, 1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.3);
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(2);
  CHECK(gen.acceleration(x, v).cwiseAbs().maxCoeff() == 0.0);
  CHECK(inv_gen.acceleration(x, v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fisher metric tensor form and symmetric inverse square root") {
  auto logistic = small_logistic(3);
  FisherLogisticMetric fisher(logistic);
  RngStream rng(31);
  const Eigen::VectorXd theta = rng.normal_vector(3);

  // X' Lambda X + I / prior_scale assembled by hand
  const Eigen::VectorXd s = logistic->predicted(theta);
  const Eigen::MatrixXd& xm = logistic->covariates();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
  for (Eigen::Index i = 0; i < xm.rows(); ++i)
    expected += s[i] * (1.0 - s[i]) * xm.row(i).transpose() * xm.row(i);
  expected += Eigen::MatrixXd::Identity(3, 3) / 100.0;
  CHECK((fisher.tensor(theta) - expected).cwiseAbs().maxCoeff() <= 1e-12);

  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd e = Eigen::VectorXd::Unit(3, k);
    const Eigen::VectorXd twice = fisher.inv_sqrt_apply(theta, fisher.inv_sqrt_apply(theta, e));
    CHECK((twice - fisher.inverse(theta) * e).cwiseAbs().maxCoeff() <= 1e-10);
  }

  // acceleration agrees with the (dimension-guarded) oracle by construction;
  // check it is finite and quadratic in v
  const Eigen::VectorXd v = rng.normal_vector(3);
  const Eigen::VectorXd a1 = fisher.acceleration(theta, v);
  const Eigen::VectorXd a2 = fisher.acceleration(theta, (2.0 * v).eval());
  CHECK(a1.allFinite());
  CHECK((a2 - 4.0 * a1).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, a1.cwiseAbs().maxCoeff()));
}

TEST_CASE("unit tangent sampling") {
  RngStream rng(37);
  auto t = std::make_shared<targets::FunnelTarget>(3);

  SUBCASE("riemannian norm is one by construction") {
    for (const auto& mc : standard_cases(t)) {
      CAPTURE(mc.name);
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::VectorXd x = rng.normal_vector(3);
        const Eigen::VectorXd v = sample_unit_tangent(*mc.metric, x, rng);
        CHECK(std::sqrt(mc.metric->quadratic_form(x, v)) ==
              doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }
  SUBCASE("scaled identity gives euclidean norm 1/c") {
    ScaledIdentityMetric m(3, 2.5);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd v = sample_unit_tangent(m, x, rng);
      CHECK(v.norm() == doctest::Approx(1.0 / 2.5).epsilon(1e-10));
    }
  }
  SUBCASE("euclidean draws are isotropic") {
    EuclideanMetric eu(3);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    const int n = 100000;
    Eigen::MatrixXd draws(n, 3);
    for (int i = 0; i < n; ++i)
      draws.row(i) = sample_unit_tangent(eu, x, rng).transpose();
    for (int j = 0; j < 3; ++j) CHECK(std::abs(draws.col(j).mean()) < 0.02);
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        const double corr = (draws.col(a).array() * draws.col(b).array()).mean();
        CHECK(std::abs(corr) < 0.02);
      }
  }
}

TEST_CASE("quadratic_form matches dense tensor") {
  RngStream rng(41);
  auto t = two_gaussian(3, 0.7);
  auto cases = standard_cases(t, 1.1, 0.4, 0.9);
  for (const auto& mc : cases) {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd x = rng.normal_vector(3) * 1.5;
      const Eigen::VectorXd v = rng.normal_vector(3);
      const double direct = mc.metric->quadratic_form(x, v);
      const double dense = v.dot(mc.metric->tensor(x) * v);
      CHECK(direct == doctest::Approx(dense).epsilon(1e-10));
    }
  }
}

TEST_CASE("non-finite gradients raise evaluation errors") {
  auto t = std::make_shared<targets::FunnelTarget>(2);
  MongeMetric monge(t, 1.0);
  Eigen::VectorXd x(2);
  x << 3.0, -800.0;  // exp(-x_2) overflows in the score
  CHECK_THROWS_AS(monge.tensor(x), EvaluationError);
  CHECK_THROWS_AS(MongeMetric(t, -1.0), ConfigError);
  CHECK_THROWS_AS(GenerativeMetric(t, -0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(GenerativeMetric(t, 0.1, 0.0), ConfigError);
}
