#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "magss/rng.hpp"

namespace magss::targets {

/// Unnormalized target density with analytic derivatives. All evaluations are
/// in natural-log space; the raw density is never materialized. Immutable
/// after construction and safe to share across chains.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double log_density(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const = 0;

  /// Gradient and Hessian in one evaluation; geodesic right-hand sides call
  /// this in their inner loop. Overrides share the per-point work.
  virtual void grad_hessian_log_density(const Eigen::VectorXd& x,
                                        Eigen::VectorXd& grad,
                                        Eigen::MatrixXd& hess) const {
    grad = grad_log_density(x);
    hess = hessian_log_density(x);
  }

  /// Exact i.i.d. samples via the target's bijective construction, one row per
  /// sample. Throws CapabilityError when no such construction exists.
  virtual Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const;
  virtual bool has_reference_sampler() const { return false; }

  /// Deterministic mode label. Throws CapabilityError when unsupported.
  virtual int classify_mode(const Eigen::VectorXd& x) const;
  virtual bool has_mode_classifier() const { return false; }

 protected:
  void check_point(const Eigen::VectorXd& x) const;
};

/// Neal-style funnel: the last coordinate sets the log-scale of the others.
/// p(x) = N(x_D | 0, sigma^2) * N(x_{1:D-1} | mu, exp(x_D) I).
class FunnelTarget : public TargetDensity {
 public:
  explicit FunnelTarget(Eigen::Index dim, double sigma = 3.0, double mu = 0.0);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const override;
  bool has_reference_sampler() const override { return true; }

  double sigma() const { return sigma_; }

 private:
  Eigen::Index dim_;
  double sigma_, mu_;
};

/// Hybrid Rosenbrock: one global coordinate followed by independent blocks of
/// chained quadratic ridges. Requires (dim - 1) divisible by block_size; the
/// classic 2-d banana is block_size = 1.
class HybridRosenbrockTarget : public TargetDensity {
 public:
  HybridRosenbrockTarget(Eigen::Index dim, double a = 1.0, double b = 100.0,
                         int block_size = 3);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const override;
  bool has_reference_sampler() const override { return true; }

 private:
  // Index of the (j, i) block variable; i == -1 refers to the global one.
  Eigen::Index at(Eigen::Index j, Eigen::Index i) const {
    return i < 0 ? 0 : 1 + j * block_ + i;
  }
  Eigen::Index dim_, blocks_;
  double a_, b_;
  int block_;
};

/// Sinusoidal ridge: z1 = x1, z_i = x_i + sin(a x1), z ~ N(0, diag(5, 1/2, ...)).
class SquiggleTarget : public TargetDensity {
 public:
  explicit SquiggleTarget(Eigen::Index dim, double a = 1.5);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const override;
  bool has_reference_sampler() const override { return true; }

 private:
  Eigen::Index dim_;
  double a_;
};

/// Mixture of isotropic Gaussians. Log-density via log-sum-exp.
class GaussianMixtureTarget : public TargetDensity {
 public:
  GaussianMixtureTarget(std::vector<Eigen::VectorXd> means,
                        std::vector<double> scales, std::vector<double> weights);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  void grad_hessian_log_density(const Eigen::VectorXd& x, Eigen::VectorXd& grad,
                                Eigen::MatrixXd& hess) const override;
  Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const override;
  bool has_reference_sampler() const override { return true; }
  int classify_mode(const Eigen::VectorXd& x) const override;
  bool has_mode_classifier() const override { return true; }

  Eigen::Index n_components() const { return static_cast<Eigen::Index>(means_.size()); }

 private:
  // log weights + per-component Gaussian log-densities, used by all three
  // derivative routines.
  Eigen::VectorXd component_logs(const Eigen::VectorXd& x) const;
  std::vector<Eigen::VectorXd> means_;
  std::vector<double> scales_, weights_, log_weights_;
  Eigen::Index dim_;
};

/// Discretized scalar field with a double-well potential on a 1-d lattice with
/// zero boundaries. 2^D local maxima at the sign patterns of (+-1, ..., +-1).
class FieldSystemTarget : public TargetDensity {
 public:
  explicit FieldSystemTarget(Eigen::Index dim = 16, double beta = 1.0);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  int classify_mode(const Eigen::VectorXd& x) const override;
  bool has_mode_classifier() const override { return true; }

 private:
  Eigen::Index dim_;
  double beta_, a_, b_, ds_;
};

/// Mixture whose components are location/scale transforms of bijective base
/// targets: x = loc + sqrt(scale) .* y with y distributed per the base.
/// `scale` entries act as per-coordinate variance factors, so the density
/// correction is prod(scale)^{-1/2}.
class TransformedMixtureTarget : public TargetDensity {
 public:
  struct Component {
    std::shared_ptr<const TargetDensity> base;
    Eigen::VectorXd loc;
    Eigen::VectorXd scale;  // variances, all > 0
  };

  TransformedMixtureTarget(std::vector<Component> components,
                           std::vector<double> weights);

  Eigen::Index dim() const override { return dim_; }
  double log_density(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd reference_sample(Eigen::Index n, RngStream& rng) const override;
  bool has_reference_sampler() const override { return true; }
  int classify_mode(const Eigen::VectorXd& x) const override;
  bool has_mode_classifier() const override { return true; }

 private:
  double component_log_density(Eigen::Index k, const Eigen::VectorXd& x) const;
  std::vector<Component> comps_;
  std::vector<double> weights_, log_weights_;
  Eigen::Index dim_;
};

/// Bayesian logistic regression posterior over the weight vector, Gaussian
/// prior N(0, prior_scale I).
class LogisticRegressionTarget : public TargetDensity {
 public:
  LogisticRegressionTarget(Eigen::MatrixXd covariates, Eigen::VectorXd labels,
                           double prior_scale = 100.0);

  Eigen::Index dim() const override { return covariates_.cols(); }
  double log_density(const Eigen::VectorXd& theta) const override;
  Eigen::VectorXd grad_log_density(const Eigen::VectorXd& theta) const override;
  Eigen::MatrixXd hessian_log_density(const Eigen::VectorXd& theta) const override;

  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double prior_scale() const { return prior_scale_; }
  /// sigmoid(X theta) evaluated row-wise.
  Eigen::VectorXd predicted(const Eigen::VectorXd& theta) const;

 private:
  Eigen::MatrixXd covariates_;
  Eigen::VectorXd labels_;
  double prior_scale_;
};

struct LogisticData {
  Eigen::MatrixXd covariates;  // standardized to zero mean / unit variance
  Eigen::VectorXd labels;
  std::vector<std::string> warnings;
};

/// Reads a CSV of real covariates with a trailing {0,1} label column and
/// standardizes the covariates. Constant columns are zeroed with a warning.
LogisticData load_logistic_data(const std::string& path);

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::VectorXd& v);

}  // namespace magss::targets
