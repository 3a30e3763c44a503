#include "magss/metrics.hpp"

#include <cmath>

#include "magss/errors.hpp"

namespace magss::metrics {

namespace {

Eigen::VectorXd finite_gradient(const targets::TargetDensity& target,
                                const Eigen::VectorXd& x) {
  Eigen::VectorXd g = target.grad_log_density(x);
  if (!g.allFinite()) throw EvaluationError("non-finite log-density gradient");
  return g;
}

}  // namespace

// ------------------------------------------------------------------ Monge

MongeMetric::MongeMetric(std::shared_ptr<const targets::TargetDensity> target,
                         double alpha2)
    : target_(std::move(target)), alpha2_(alpha2) {
  if (alpha2_ < 0) throw ConfigError("alpha2 must be >= 0");
}

Eigen::MatrixXd MongeMetric::tensor(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  return Eigen::MatrixXd::Identity(dim(), dim()) + alpha2_ * g * g.transpose();
}

Eigen::MatrixXd MongeMetric::inverse(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  return Eigen::MatrixXd::Identity(dim(), dim()) - (alpha2_ / L) * g * g.transpose();
}

double MongeMetric::log_det(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  return std::log1p(alpha2_ * g.squaredNorm());
}

Eigen::VectorXd MongeMetric::inv_sqrt_apply(const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& z) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  const double c = alpha2_ / (L + std::sqrt(L));
  return z - c * g.dot(z) * g;
}

double MongeMetric::quadratic_form(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double gv = g.dot(v);
  return v.squaredNorm() + alpha2_ * gv * gv;
}

Eigen::VectorXd MongeMetric::acceleration(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& v) const {
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  target_->grad_hessian_log_density(x, g, h);
  if (!g.allFinite()) throw EvaluationError("non-finite log-density gradient");
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  const double vhv = v.dot(h * v);
  Eigen::VectorXd a = -(alpha2_ / L) * vhv * g;
  if (!a.allFinite()) throw EvaluationError("non-finite geodesic acceleration");
  return a;
}

// ---------------------------------------------------------- Inverse Monge

InverseMongeMetric::InverseMongeMetric(
    std::shared_ptr<const targets::TargetDensity> target, double alpha2)
    : target_(std::move(target)), alpha2_(alpha2) {
  if (alpha2_ < 0) throw ConfigError("alpha2 must be >= 0");
}

Eigen::MatrixXd InverseMongeMetric::tensor(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  return Eigen::MatrixXd::Identity(dim(), dim()) - (alpha2_ / L) * g * g.transpose();
}

Eigen::MatrixXd InverseMongeMetric::inverse(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  return Eigen::MatrixXd::Identity(dim(), dim()) + alpha2_ * g * g.transpose();
}

double InverseMongeMetric::log_det(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  return -std::log1p(alpha2_ * g.squaredNorm());
}

Eigen::VectorXd InverseMongeMetric::inv_sqrt_apply(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& z) const {
  // (I + a2 gg')^{1/2} z: square root of the inverse tensor.
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  const double c = alpha2_ / (1.0 + std::sqrt(L));
  return z + c * g.dot(z) * g;
}

double InverseMongeMetric::quadratic_form(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& v) const {
  const Eigen::VectorXd g = finite_gradient(*target_, x);
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  const double gv = g.dot(v);
  return v.squaredNorm() - (alpha2_ / L) * gv * gv;
}

Eigen::VectorXd InverseMongeMetric::acceleration(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& v) const {
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  target_->grad_hessian_log_density(x, g, h);
  if (!g.allFinite()) throw EvaluationError("non-finite log-density gradient");
  const double L = 1.0 + alpha2_ * g.squaredNorm();
  const double f = -1.0 / L;
  const Eigen::VectorXd hg = h * g;
  const Eigen::VectorXd grad_f = (2.0 * alpha2_ / (L * L)) * hg;
  const double gv = g.dot(v);
  const double fv = grad_f.dot(v);
  const double fg = grad_f.dot(g);
  const double vhv = v.dot(h * v);
  const double coeff = 2.0 * L * (fv * gv + f * vhv) - alpha2_ * fg * gv * gv;
  Eigen::VectorXd a = -(alpha2_ / 2.0) * (coeff * g - gv * gv * grad_f);
  if (!a.allFinite()) throw EvaluationError("non-finite geodesic acceleration");
  return a;
}

// ------------------------------------------------------- Generative family

GenerativeMetric::GenerativeMetric(
    std::shared_ptr<const targets::TargetDensity> target, double lambda,
    double p0, bool inverse_variant)
    : target_(std::move(target)), lambda_(lambda),
      sign_(inverse_variant ? -1.0 : 1.0) {
  if (lambda_ < 0) throw ConfigError("lambda must be >= 0");
  if (p0 <= 0) throw ConfigError("p0 must be > 0");
  log_lambda_ = lambda_ > 0 ? std::log(lambda_)
                            : -std::numeric_limits<double>::infinity();
  log_p0_lambda_ = std::log(p0 + lambda_);
}

double GenerativeMetric::log_scalar(const Eigen::VectorXd& x) const {
  const double lp = target_->log_density(x);
  if (std::isnan(lp)) throw EvaluationError("non-finite log-density");
  // ln(p + lambda) via two-term log-sum-exp; with lambda = 0 it is ln p itself.
  double log_p_lambda;
  if (lambda_ == 0.0) {
    log_p_lambda = lp;
  } else {
    const double hi = std::max(lp, log_lambda_);
    const double lo = std::min(lp, log_lambda_);
    log_p_lambda = hi + std::log1p(std::exp(lo - hi));
  }
  return sign_ * 2.0 * (log_p0_lambda_ - log_p_lambda);
}

Eigen::VectorXd GenerativeMetric::grad_log_scalar(const Eigen::VectorXd& x) const {
  const double lp = target_->log_density(x);
  double ratio;  // p / (p + lambda)
  if (lambda_ == 0.0) {
    ratio = 1.0;
  } else {
    const double hi = std::max(lp, log_lambda_);
    const double lo = std::min(lp, log_lambda_);
    ratio = std::exp(lp - (hi + std::log1p(std::exp(lo - hi))));
  }
  return (-sign_ * 2.0 * ratio) * finite_gradient(*target_, x);
}

Eigen::MatrixXd GenerativeMetric::tensor(const Eigen::VectorXd& x) const {
  return std::exp(log_scalar(x)) * Eigen::MatrixXd::Identity(dim(), dim());
}

Eigen::MatrixXd GenerativeMetric::inverse(const Eigen::VectorXd& x) const {
  return std::exp(-log_scalar(x)) * Eigen::MatrixXd::Identity(dim(), dim());
}

double GenerativeMetric::log_det(const Eigen::VectorXd& x) const {
  return static_cast<double>(dim()) * log_scalar(x);
}

Eigen::VectorXd GenerativeMetric::inv_sqrt_apply(const Eigen::VectorXd& x,
                                                 const Eigen::VectorXd& z) const {
  return std::exp(-0.5 * log_scalar(x)) * z;
}

double GenerativeMetric::quadratic_form(const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& v) const {
  return std::exp(log_scalar(x)) * v.squaredNorm();
}

Eigen::VectorXd GenerativeMetric::acceleration(const Eigen::VectorXd& x,
                                               const Eigen::VectorXd& v) const {
  const Eigen::VectorXd glf = grad_log_scalar(x);
  Eigen::VectorXd a = 0.5 * v.squaredNorm() * glf - v.dot(glf) * v;
  if (!a.allFinite()) throw EvaluationError("non-finite geodesic acceleration");
  return a;
}

// --------------------------------------------------------- Fisher logistic

FisherLogisticMetric::FisherLogisticMetric(
    std::shared_ptr<const targets::LogisticRegressionTarget> target)
    : target_(std::move(target)) {}

Eigen::MatrixXd FisherLogisticMetric::tensor(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd s = target_->predicted(x);
  const Eigen::VectorXd lam = (s.array() * (1.0 - s.array())).matrix();
  const Eigen::MatrixXd& cov = target_->covariates();
  Eigen::MatrixXd g = cov.transpose() * lam.asDiagonal() * cov;
  g.diagonal().array() += 1.0 / target_->prior_scale();
  return g;
}

Eigen::MatrixXd FisherLogisticMetric::inverse(const Eigen::VectorXd& x) const {
  return tensor(x).llt().solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

double FisherLogisticMetric::log_det(const Eigen::VectorXd& x) const {
  const Eigen::LLT<Eigen::MatrixXd> llt(tensor(x));
  if (llt.info() != Eigen::Success)
    throw EvaluationError("Fisher tensor not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Eigen::VectorXd FisherLogisticMetric::inv_sqrt_apply(const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& z) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tensor(x));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0)
    throw EvaluationError("Fisher tensor not positive definite");
  return es.eigenvectors() *
         (es.eigenvalues().array().rsqrt() *
          (es.eigenvectors().transpose() * z).array())
             .matrix();
}

Eigen::VectorXd FisherLogisticMetric::acceleration(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& v) const {
  return christoffel_acceleration_fd(
      [this](const Eigen::VectorXd& y) { return tensor(y); }, x, v);
}

// ------------------------------------------------- finite-difference path

Eigen::VectorXd christoffel_acceleration_fd(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& tensor_fn,
    const Eigen::VectorXd& x, const Eigen::VectorXd& v, double step) {
  const Eigen::Index d = x.size();
  // v' Gamma^k v = 1/2 [G^{-1} (2w - q)]_k with
  //   w_m = sum_i v_i (dG_i v)_m  and  q_m = v' dG_m v,
  // where dG_i is the derivative of the tensor along coordinate i.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd q(d);
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    const Eigen::MatrixXd dg = (tensor_fn(xp) - tensor_fn(xm)) / (2.0 * step);
    xp[i] = x[i];
    xm[i] = x[i];
    w.noalias() += v[i] * (dg * v);
    q[i] = v.dot(dg * v);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(tensor_fn(x));
  if (!lu.isInvertible()) throw OracleError("singular metric tensor");
  return lu.solve(0.5 * q - w);
}

Eigen::VectorXd christoffel_oracle(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& tensor_fn,
    const Eigen::VectorXd& x, const Eigen::VectorXd& v, double step) {
  if (x.size() > 16) throw OracleError("oracle limited to dim <= 16");
  return christoffel_acceleration_fd(tensor_fn, x, v, step);
}

Eigen::VectorXd sample_unit_tangent(const MetricField& metric,
                                    const Eigen::VectorXd& x, RngStream& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Eigen::VectorXd z = rng.normal_vector(metric.dim());
    const Eigen::VectorXd v = metric.inv_sqrt_apply(x, z);
    const double norm_g = std::sqrt(metric.quadratic_form(x, v));
    if (norm_g >= 1e-300 && std::isfinite(norm_g)) return v / norm_g;
  }
  throw EvaluationError("unit tangent draw degenerate after 100 retries");
}

}  // namespace magss::metrics
