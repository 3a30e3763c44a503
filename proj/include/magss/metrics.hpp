#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "magss/rng.hpp"
#include "magss/targets.hpp"

namespace magss::metrics {

/// Position-dependent Riemannian metric G(x). Dense tensor()/inverse()
/// assemblies exist for tests and for inherently dense metrics; everything on
/// the geodesic hot path (log_det, inv_sqrt_apply, acceleration,
/// quadratic_form) has an O(D) closed form wherever one exists.
class MetricField {
 public:
  virtual ~MetricField() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd inverse(const Eigen::VectorXd& x) const = 0;
  /// ln det G(x).
  virtual double log_det(const Eigen::VectorXd& x) const = 0;
  /// G^{-1/2}(x) z for the symmetric square root.
  virtual Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& z) const = 0;
  /// Right-hand side of the velocity equation of the geodesic system,
  /// component k equal to -v' Gamma^k v.
  virtual Eigen::VectorXd acceleration(const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& v) const = 0;

  /// In-place variant used by the integrator inner loop.
  virtual void acceleration_into(const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                                 Eigen::Ref<Eigen::VectorXd> out) const {
    out = acceleration(x, v);
  }
  /// v' G(x) v.
  virtual double quadratic_form(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& v) const {
    return v.dot(tensor(x) * v);
  }
  /// True only when G is the identity everywhere; geodesics are then exact
  /// straight lines and never integrated numerically.
  virtual bool is_flat() const { return false; }
};

class EuclideanMetric : public MetricField {
 public:
  explicit EuclideanMetric(Eigen::Index dim) : dim_(dim) {}
  Eigen::Index dim() const override { return dim_; }
  Eigen::MatrixXd tensor(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Identity(dim_, dim_);
  }
  Eigen::MatrixXd inverse(const Eigen::VectorXd&) const override {
    return Eigen::MatrixXd::Identity(dim_, dim_);
  }
  double log_det(const Eigen::VectorXd&) const override { return 0.0; }
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd&,
                                 const Eigen::VectorXd& z) const override {
    return z;
  }
  Eigen::VectorXd acceleration(const Eigen::VectorXd&,
                               const Eigen::VectorXd& v) const override {
    return Eigen::VectorXd::Zero(v.size());
  }
  double quadratic_form(const Eigen::VectorXd&,
                        const Eigen::VectorXd& v) const override {
    return v.squaredNorm();
  }
  bool is_flat() const override { return true; }

 private:
  Eigen::Index dim_;
};

/// Rank-1 update of the identity driven by the score of the target:
/// G = I + alpha2 * grad grad'. All derived quantities use the closed rank-1
/// forms, including the conjugate-rescaled inverse square root that stays
/// finite as the gradient vanishes.
class MongeMetric : public MetricField {
 public:
  MongeMetric(std::shared_ptr<const targets::TargetDensity> target, double alpha2);
  Eigen::Index dim() const override { return target_->dim(); }
  Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd inverse(const Eigen::VectorXd& x) const override;
  double log_det(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& z) const override;
  Eigen::VectorXd acceleration(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& v) const override;
  double quadratic_form(const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v) const override;

 private:
  std::shared_ptr<const targets::TargetDensity> target_;
  double alpha2_;
};

/// The matrix inverse of the Monge tensor used as a metric in its own right;
/// shrinks distances along the score direction, which pulls distant modes
/// closer together.
class InverseMongeMetric : public MetricField {
 public:
  InverseMongeMetric(std::shared_ptr<const targets::TargetDensity> target, double alpha2);
  Eigen::Index dim() const override { return target_->dim(); }
  Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd inverse(const Eigen::VectorXd& x) const override;
  double log_det(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& z) const override;
  Eigen::VectorXd acceleration(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& v) const override;
  double quadratic_form(const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v) const override;

 private:
  std::shared_ptr<const targets::TargetDensity> target_;
  double alpha2_;
};

/// Conformal metric G = f(x) I with f = ((p0 + lambda) / (p(x) + lambda))^2,
/// or its reciprocal for the inverse variant. f is carried in log space so the
/// metric stays usable where the density underflows.
class GenerativeMetric : public MetricField {
 public:
  GenerativeMetric(std::shared_ptr<const targets::TargetDensity> target,
                   double lambda, double p0, bool inverse_variant = false);
  Eigen::Index dim() const override { return target_->dim(); }
  Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd inverse(const Eigen::VectorXd& x) const override;
  double log_det(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& z) const override;
  Eigen::VectorXd acceleration(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& v) const override;
  double quadratic_form(const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v) const override;

  double log_scalar(const Eigen::VectorXd& x) const;  // ln f(x)

 private:
  Eigen::VectorXd grad_log_scalar(const Eigen::VectorXd& x) const;
  std::shared_ptr<const targets::TargetDensity> target_;
  double lambda_, log_lambda_, log_p0_lambda_;
  double sign_;  // +1 generative, -1 inverse variant
};

class InverseGenerativeMetric : public GenerativeMetric {
 public:
  InverseGenerativeMetric(std::shared_ptr<const targets::TargetDensity> target,
                          double lambda, double p0)
      : GenerativeMetric(std::move(target), lambda, p0, true) {}
};

/// Fisher information of the logistic-regression likelihood plus prior
/// curvature: G = X' Lambda X + I / prior_scale. Dense; factorized per
/// evaluation. The geodesic acceleration falls back to finite differences of
/// the tensor since no closed form is available.
class FisherLogisticMetric : public MetricField {
 public:
  explicit FisherLogisticMetric(
      std::shared_ptr<const targets::LogisticRegressionTarget> target);
  Eigen::Index dim() const override { return target_->dim(); }
  Eigen::MatrixXd tensor(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd inverse(const Eigen::VectorXd& x) const override;
  double log_det(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd inv_sqrt_apply(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& z) const override;
  Eigen::VectorXd acceleration(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& v) const override;

 private:
  std::shared_ptr<const targets::LogisticRegressionTarget> target_;
};

/// Geodesic acceleration -v' Gamma^k v assembled from central finite
/// differences of an arbitrary tensor field and a dense inverse, via the
/// general Christoffel formula. Shared by the Fisher metric and, at test
/// scale, by the oracle that cross-checks every analytic acceleration.
Eigen::VectorXd christoffel_acceleration_fd(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& tensor_fn,
    const Eigen::VectorXd& x, const Eigen::VectorXd& v, double step = 1e-5);

/// Test oracle wrapper: dimension-guarded version of the above.
Eigen::VectorXd christoffel_oracle(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& tensor_fn,
    const Eigen::VectorXd& x, const Eigen::VectorXd& v, double step = 1e-5);

/// Uniform draw from the unit tangent sphere at x: z ~ N(0, I), push through
/// G^{-1/2}, normalize to Riemannian length one. Degenerate draws are retried
/// a bounded number of times.
Eigen::VectorXd sample_unit_tangent(const MetricField& metric,
                                    const Eigen::VectorXd& x, RngStream& rng);

}  // namespace magss::metrics
