#include "magss/targets.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "magss/errors.hpp"

namespace magss::targets {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}
}  // namespace

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a NaN, propagated)
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

void TargetDensity::check_point(const Eigen::VectorXd& x) const {
  if (x.size() != dim())
    throw ConfigError("point has dimension " + std::to_string(x.size()) +
                      ", target expects " + std::to_string(dim()));
  if (!x.allFinite()) throw EvaluationError("non-finite point");
}

Eigen::MatrixXd TargetDensity::reference_sample(Eigen::Index, RngStream&) const {
  throw CapabilityError("target has no reference sampler");
}

int TargetDensity::classify_mode(const Eigen::VectorXd&) const {
  throw CapabilityError("target has no mode classifier");
}

// ---------------------------------------------------------------- Funnel

FunnelTarget::FunnelTarget(Eigen::Index dim, double sigma, double mu)
    : dim_(dim), sigma_(sigma), mu_(mu) {
  if (dim < 2) throw ConfigError("funnel requires dim >= 2");
  if (sigma <= 0) throw ConfigError("funnel sigma must be positive");
}

double FunnelTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index k = dim_ - 1;
  const double xd = x[k];
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double d = x[i] - mu_;
    sum_sq += d * d;
  }
  double lp = log_normal_pdf(xd, 0.0, sigma_ * sigma_);
  lp += -0.5 * static_cast<double>(k) * (kLog2Pi + xd);
  if (sum_sq > 0.0) lp -= 0.5 * std::exp(-xd) * sum_sq;
  return lp;
}

Eigen::VectorXd FunnelTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index k = dim_ - 1;
  const double xd = x[k];
  const double e = std::exp(-xd);
  Eigen::VectorXd g(dim_);
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double d = x[i] - mu_;
    sum_sq += d * d;
    g[i] = -e * d;
  }
  g[k] = -xd / (sigma_ * sigma_) - 0.5 * static_cast<double>(k);
  if (sum_sq > 0.0) g[k] += 0.5 * e * sum_sq;
  return g;
}

Eigen::MatrixXd FunnelTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index k = dim_ - 1;
  const double e = std::exp(-x[k]);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double d = x[i] - mu_;
    sum_sq += d * d;
    h(i, i) = -e;
    h(i, k) = e * d;
    h(k, i) = h(i, k);
  }
  h(k, k) = -1.0 / (sigma_ * sigma_);
  if (sum_sq > 0.0) h(k, k) -= 0.5 * e * sum_sq;
  return h;
}

Eigen::MatrixXd FunnelTarget::reference_sample(Eigen::Index n, RngStream& rng) const {
  Eigen::MatrixXd out(n, dim_);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd z = rng.normal_vector(dim_);
    const double xd = sigma_ * z[dim_ - 1];
    const double s = std::exp(0.5 * xd);
    for (Eigen::Index i = 0; i < dim_ - 1; ++i) out(r, i) = mu_ + s * z[i];
    out(r, dim_ - 1) = xd;
  }
  return out;
}

// ------------------------------------------------------ Hybrid Rosenbrock

HybridRosenbrockTarget::HybridRosenbrockTarget(Eigen::Index dim, double a,
                                               double b, int block_size)
    : dim_(dim), a_(a), b_(b), block_(block_size) {
  if (dim < 2) throw ConfigError("hybrid rosenbrock requires dim >= 2");
  if (block_size < 1) throw ConfigError("block_size must be >= 1");
  if ((dim - 1) % block_size != 0)
    throw ConfigError("hybrid rosenbrock requires (dim - 1) divisible by block_size " +
                      std::to_string(block_size) + ", got dim " + std::to_string(dim));
  if (b <= 0) throw ConfigError("rosenbrock b must be positive");
  blocks_ = (dim - 1) / block_size;
}

double HybridRosenbrockTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const double g = x[0];
  double lp = -0.5 * std::log(M_PI) - (g - a_) * (g - a_);
  const double c = -0.5 * std::log(M_PI / b_);
  for (Eigen::Index j = 0; j < blocks_; ++j) {
    double prev = g;
    for (Eigen::Index i = 0; i < block_; ++i) {
      const double xi = x[at(j, i)];
      const double r = xi - prev * prev;
      lp += c - b_ * r * r;
      prev = xi;
    }
  }
  return lp;
}

Eigen::VectorXd HybridRosenbrockTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const double g = x[0];
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim_);
  grad[0] = -2.0 * (g - a_);
  for (Eigen::Index j = 0; j < blocks_; ++j) {
    for (Eigen::Index i = 0; i < block_; ++i) {
      const double prev = x[at(j, i - 1)];
      const double r = x[at(j, i)] - prev * prev;
      grad[at(j, i)] -= 2.0 * b_ * r;
      grad[at(j, i - 1)] += 4.0 * b_ * prev * r;
    }
  }
  return grad;
}

Eigen::MatrixXd HybridRosenbrockTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  h(0, 0) = -2.0;
  for (Eigen::Index j = 0; j < blocks_; ++j) {
    for (Eigen::Index i = 0; i < block_; ++i) {
      const Eigen::Index p = at(j, i - 1), q = at(j, i);
      const double prev = x[p];
      const double r = x[q] - prev * prev;
      h(q, q) -= 2.0 * b_;
      h(p, p) += 4.0 * b_ * r - 8.0 * b_ * prev * prev;
      h(p, q) += 4.0 * b_ * prev;
      h(q, p) = h(p, q);
    }
  }
  return h;
}

Eigen::MatrixXd HybridRosenbrockTarget::reference_sample(Eigen::Index n,
                                                         RngStream& rng) const {
  Eigen::MatrixXd out(n, dim_);
  const double s1 = 1.0 / std::sqrt(2.0);
  const double sb = 1.0 / std::sqrt(2.0 * b_);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd z = rng.normal_vector(dim_);
    out(r, 0) = a_ + s1 * z[0];
    for (Eigen::Index j = 0; j < blocks_; ++j) {
      for (Eigen::Index i = 0; i < block_; ++i) {
        const double prev = out(r, at(j, i - 1));
        out(r, at(j, i)) = prev * prev + sb * z[at(j, i)];
      }
    }
  }
  return out;
}

// -------------------------------------------------------------- Squiggle

SquiggleTarget::SquiggleTarget(Eigen::Index dim, double a) : dim_(dim), a_(a) {
  if (dim < 2) throw ConfigError("squiggle requires dim >= 2");
}

double SquiggleTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const double s = std::sin(a_ * x[0]);
  double lp = log_normal_pdf(x[0], 0.0, 5.0);
  for (Eigen::Index i = 1; i < dim_; ++i) lp += log_normal_pdf(x[i] + s, 0.0, 0.5);
  return lp;
}

Eigen::VectorXd SquiggleTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const double s = std::sin(a_ * x[0]);
  const double c = std::cos(a_ * x[0]);
  Eigen::VectorXd g(dim_);
  double zsum = 0.0;
  for (Eigen::Index i = 1; i < dim_; ++i) {
    const double z = x[i] + s;
    zsum += z;
    g[i] = -2.0 * z;
  }
  g[0] = -x[0] / 5.0 - 2.0 * a_ * c * zsum;
  return g;
}

Eigen::MatrixXd SquiggleTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const double s = std::sin(a_ * x[0]);
  const double c = std::cos(a_ * x[0]);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  double zsum = 0.0;
  for (Eigen::Index i = 1; i < dim_; ++i) {
    zsum += x[i] + s;
    h(i, i) = -2.0;
    h(0, i) = -2.0 * a_ * c;
    h(i, 0) = h(0, i);
  }
  h(0, 0) = -0.2 - 2.0 * a_ * a_ * (c * c * static_cast<double>(dim_ - 1) - s * zsum);
  return h;
}

Eigen::MatrixXd SquiggleTarget::reference_sample(Eigen::Index n, RngStream& rng) const {
  Eigen::MatrixXd out(n, dim_);
  const double s1 = std::sqrt(5.0);
  const double s2 = 1.0 / std::sqrt(2.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd z = rng.normal_vector(dim_);
    const double z1 = s1 * z[0];
    out(r, 0) = z1;
    const double s = std::sin(a_ * z1);
    for (Eigen::Index i = 1; i < dim_; ++i) out(r, i) = s2 * z[i] - s;
  }
  return out;
}

// ------------------------------------------------------- Gaussian mixture

GaussianMixtureTarget::GaussianMixtureTarget(std::vector<Eigen::VectorXd> means,
                                             std::vector<double> scales,
                                             std::vector<double> weights)
    : means_(std::move(means)), scales_(std::move(scales)), weights_(std::move(weights)) {
  if (means_.empty() || means_.size() != scales_.size() ||
      means_.size() != weights_.size())
    throw ConfigError("mixture needs equal non-zero counts of means/scales/weights");
  dim_ = means_[0].size();
  double wsum = 0.0;
  for (std::size_t k = 0; k < means_.size(); ++k) {
    if (means_[k].size() != dim_) throw ConfigError("mixture means differ in dimension");
    if (scales_[k] <= 0) throw ConfigError("mixture scales must be positive");
    if (weights_[k] < 0) throw ConfigError("mixture weights must be non-negative");
    wsum += weights_[k];
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw ConfigError("mixture weights must sum to 1 (got " + std::to_string(wsum) + ")");
  for (double w : weights_)
    log_weights_.push_back(w > 0 ? std::log(w)
                                 : -std::numeric_limits<double>::infinity());
}

Eigen::VectorXd GaussianMixtureTarget::component_logs(const Eigen::VectorXd& x) const {
  Eigen::VectorXd lc(n_components());
  for (Eigen::Index k = 0; k < n_components(); ++k) {
    const double var = scales_[k] * scales_[k];
    const double q = (x - means_[k]).squaredNorm();
    lc[k] = log_weights_[k] -
            0.5 * static_cast<double>(dim_) * (kLog2Pi + std::log(var)) -
            q / (2.0 * var);
  }
  return lc;
}

double GaussianMixtureTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  return log_sum_exp(component_logs(x));
}

Eigen::VectorXd GaussianMixtureTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::VectorXd lc = component_logs(x);
  const double lp = log_sum_exp(lc);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index k = 0; k < n_components(); ++k) {
    const double r = std::exp(lc[k] - lp);
    if (r == 0.0) continue;
    g.noalias() += (r / (scales_[k] * scales_[k])) * (means_[k] - x);
  }
  return g;
}

Eigen::MatrixXd GaussianMixtureTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::VectorXd lc = component_logs(x);
  const double lp = log_sum_exp(lc);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index k = 0; k < n_components(); ++k) {
    const double r = std::exp(lc[k] - lp);
    if (r == 0.0) continue;
    const double inv_var = 1.0 / (scales_[k] * scales_[k]);
    const Eigen::VectorXd gk = inv_var * (means_[k] - x);
    h.noalias() += r * (gk * gk.transpose());
    h.diagonal().array() -= r * inv_var;
    g.noalias() += r * gk;
  }
  h.noalias() -= g * g.transpose();
  return h;
}

void GaussianMixtureTarget::grad_hessian_log_density(const Eigen::VectorXd& x,
                                                     Eigen::VectorXd& grad,
                                                     Eigen::MatrixXd& hess) const {
  check_point(x);
  const Eigen::VectorXd lc = component_logs(x);
  const double lp = log_sum_exp(lc);
  grad.setZero(dim_);
  hess.setZero(dim_, dim_);
  for (Eigen::Index k = 0; k < n_components(); ++k) {
    const double r = std::exp(lc[k] - lp);
    if (r == 0.0) continue;
    const double inv_var = 1.0 / (scales_[k] * scales_[k]);
    const Eigen::VectorXd gk = inv_var * (means_[k] - x);
    hess.noalias() += r * (gk * gk.transpose());
    hess.diagonal().array() -= r * inv_var;
    grad.noalias() += r * gk;
  }
  hess.noalias() -= grad * grad.transpose();
}

Eigen::MatrixXd GaussianMixtureTarget::reference_sample(Eigen::Index n,
                                                        RngStream& rng) const {
  Eigen::MatrixXd out(n, dim_);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = rng.uniform();
    double acc = 0.0;
    Eigen::Index k = n_components() - 1;
    for (Eigen::Index j = 0; j < n_components(); ++j) {
      acc += weights_[j];
      if (u < acc) {
        k = j;
        break;
      }
    }
    out.row(r) = (means_[k] + scales_[k] * rng.normal_vector(dim_)).transpose();
  }
  return out;
}

int GaussianMixtureTarget::classify_mode(const Eigen::VectorXd& x) const {
  check_point(x);
  int best = 0;
  double best_d = (x - means_[0]).squaredNorm();
  for (Eigen::Index k = 1; k < n_components(); ++k) {
    const double d = (x - means_[k]).squaredNorm();
    if (d < best_d) {  // ties keep the lowest index
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// ------------------------------------------------------------ Field system

FieldSystemTarget::FieldSystemTarget(Eigen::Index dim, double beta)
    : dim_(dim), beta_(beta), a_(0.1), b_(10.0), ds_(1.0 / static_cast<double>(dim)) {
  if (dim < 1) throw ConfigError("field system requires dim >= 1");
  if (beta <= 0) throw ConfigError("field system beta must be positive");
}

double FieldSystemTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  double smooth = x[0] * x[0] + x[dim_ - 1] * x[dim_ - 1];
  for (Eigen::Index i = 1; i < dim_; ++i) {
    const double d = x[i] - x[i - 1];
    smooth += d * d;
  }
  double well = 0.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double w = 1.0 - x[i] * x[i];
    well += w * w;
  }
  return -beta_ * (a_ / (2.0 * ds_) * smooth + b_ * ds_ / 4.0 * well);
}

Eigen::VectorXd FieldSystemTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  Eigen::VectorXd g(dim_);
  const double cs = a_ / ds_;
  const double cw = b_ * ds_;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double left = i > 0 ? x[i - 1] : 0.0;
    const double right = i + 1 < dim_ ? x[i + 1] : 0.0;
    const double dsmooth = cs * (2.0 * x[i] - left - right);
    const double dwell = -cw * x[i] * (1.0 - x[i] * x[i]);
    g[i] = -beta_ * (dsmooth + dwell);
  }
  return g;
}

Eigen::MatrixXd FieldSystemTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  const double cs = a_ / ds_;
  const double cw = b_ * ds_;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    h(i, i) = -beta_ * (2.0 * cs - cw * (1.0 - 3.0 * x[i] * x[i]));
    if (i + 1 < dim_) {
      h(i, i + 1) = beta_ * cs;
      h(i + 1, i) = beta_ * cs;
    }
  }
  return h;
}

int FieldSystemTarget::classify_mode(const Eigen::VectorXd& x) const {
  check_point(x);
  if (dim_ > 31) throw CapabilityError("sign-pattern labels limited to dim <= 31");
  int label = 0;
  for (Eigen::Index i = 0; i < dim_; ++i)
    if (x[i] > 0.0) label |= 1 << i;
  return label;
}

// ----------------------------------------------------- Transformed mixture

TransformedMixtureTarget::TransformedMixtureTarget(std::vector<Component> components,
                                                   std::vector<double> weights)
    : comps_(std::move(components)), weights_(std::move(weights)) {
  if (comps_.empty() || comps_.size() != weights_.size())
    throw ConfigError("transformed mixture needs matching components/weights");
  dim_ = comps_[0].base->dim();
  double wsum = 0.0;
  for (const auto& c : comps_) {
    if (!c.base->has_reference_sampler())
      throw ConfigError("transformed mixture components must be bijective targets");
    if (c.base->dim() != dim_ || c.loc.size() != dim_ || c.scale.size() != dim_)
      throw ConfigError("transformed mixture component dimensions disagree");
    if ((c.scale.array() <= 0).any())
      throw ConfigError("transformed mixture scales must be positive");
  }
  for (double w : weights_) {
    if (w < 0) throw ConfigError("mixture weights must be non-negative");
    wsum += w;
    log_weights_.push_back(w > 0 ? std::log(w)
                                 : -std::numeric_limits<double>::infinity());
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("mixture weights must sum to 1");
}

double TransformedMixtureTarget::component_log_density(Eigen::Index k,
                                                       const Eigen::VectorXd& x) const {
  const auto& c = comps_[static_cast<std::size_t>(k)];
  const Eigen::VectorXd y =
      ((x - c.loc).array() / c.scale.array().sqrt()).matrix();
  return c.base->log_density(y) - 0.5 * c.scale.array().log().sum();
}

double TransformedMixtureTarget::log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  Eigen::VectorXd lc(static_cast<Eigen::Index>(comps_.size()));
  for (Eigen::Index k = 0; k < lc.size(); ++k)
    lc[k] = log_weights_[static_cast<std::size_t>(k)] + component_log_density(k, x);
  return log_sum_exp(lc);
}

Eigen::VectorXd TransformedMixtureTarget::grad_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index n = static_cast<Eigen::Index>(comps_.size());
  Eigen::VectorXd lc(n);
  for (Eigen::Index k = 0; k < n; ++k)
    lc[k] = log_weights_[static_cast<std::size_t>(k)] + component_log_density(k, x);
  const double lp = log_sum_exp(lc);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double r = std::exp(lc[k] - lp);
    if (r == 0.0) continue;
    const auto& c = comps_[static_cast<std::size_t>(k)];
    const Eigen::ArrayXd inv_sd = c.scale.array().rsqrt();
    const Eigen::VectorXd y = ((x - c.loc).array() * inv_sd).matrix();
    g.noalias() += r * (c.base->grad_log_density(y).array() * inv_sd).matrix();
  }
  return g;
}

Eigen::MatrixXd TransformedMixtureTarget::hessian_log_density(const Eigen::VectorXd& x) const {
  check_point(x);
  const Eigen::Index n = static_cast<Eigen::Index>(comps_.size());
  Eigen::VectorXd lc(n);
  for (Eigen::Index k = 0; k < n; ++k)
    lc[k] = log_weights_[static_cast<std::size_t>(k)] + component_log_density(k, x);
  const double lp = log_sum_exp(lc);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double r = std::exp(lc[k] - lp);
    if (r == 0.0) continue;
    const auto& c = comps_[static_cast<std::size_t>(k)];
    const Eigen::ArrayXd inv_sd = c.scale.array().rsqrt();
    const Eigen::VectorXd y = ((x - c.loc).array() * inv_sd).matrix();
    const Eigen::VectorXd gk = (c.base->grad_log_density(y).array() * inv_sd).matrix();
    const Eigen::MatrixXd hk =
        inv_sd.matrix().asDiagonal() * c.base->hessian_log_density(y) *
        inv_sd.matrix().asDiagonal();
    h.noalias() += r * (hk + gk * gk.transpose());
    g.noalias() += r * gk;
  }
  h.noalias() -= g * g.transpose();
  return h;
}

Eigen::MatrixXd TransformedMixtureTarget::reference_sample(Eigen::Index n,
                                                           RngStream& rng) const {
  Eigen::MatrixXd out(n, dim_);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t k = comps_.size() - 1;
    for (std::size_t j = 0; j < comps_.size(); ++j) {
      acc += weights_[j];
      if (u < acc) {
        k = j;
        break;
      }
    }
    const auto& c = comps_[k];
    const Eigen::MatrixXd y = c.base->reference_sample(1, rng);
    out.row(r) =
        (c.loc.array() + c.scale.array().sqrt() * y.row(0).transpose().array())
            .transpose();
  }
  return out;
}

int TransformedMixtureTarget::classify_mode(const Eigen::VectorXd& x) const {
  check_point(x);
  int best = 0;
  double best_d = (x - comps_[0].loc).squaredNorm();
  for (std::size_t k = 1; k < comps_.size(); ++k) {
    const double d = (x - comps_[k].loc).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// ------------------------------------------------------ Logistic regression

LogisticRegressionTarget::LogisticRegressionTarget(Eigen::MatrixXd covariates,
                                                   Eigen::VectorXd labels,
                                                   double prior_scale)
    : covariates_(std::move(covariates)), labels_(std::move(labels)),
      prior_scale_(prior_scale) {
  if (covariates_.rows() != labels_.size())
    throw ConfigError("covariate rows and label count disagree");
  if (covariates_.rows() == 0 || covariates_.cols() == 0)
    throw ConfigError("empty design matrix");
  if (prior_scale_ <= 0) throw ConfigError("prior scale must be positive");
  for (Eigen::Index i = 0; i < labels_.size(); ++i)
    if (labels_[i] != 0.0 && labels_[i] != 1.0)
      throw ConfigError("labels must be 0 or 1");
}

Eigen::VectorXd LogisticRegressionTarget::predicted(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd t = covariates_ * theta;
  return t.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

double LogisticRegressionTarget::log_density(const Eigen::VectorXd& theta) const {
  check_point(theta);
  const Eigen::VectorXd t = covariates_ * theta;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    // y*t - log(1 + e^t), evaluated without overflow for large |t|
    const double softplus = t[i] > 0 ? t[i] + std::log1p(std::exp(-t[i]))
                                     : std::log1p(std::exp(t[i]));
    lp += labels_[i] * t[i] - softplus;
  }
  lp -= 0.5 * theta.squaredNorm() / prior_scale_;
  lp -= 0.5 * static_cast<double>(dim()) * (kLog2Pi + std::log(prior_scale_));
  return lp;
}

Eigen::VectorXd LogisticRegressionTarget::grad_log_density(const Eigen::VectorXd& theta) const {
  check_point(theta);
  return covariates_.transpose() * (labels_ - predicted(theta)) - theta / prior_scale_;
}

Eigen::MatrixXd LogisticRegressionTarget::hessian_log_density(const Eigen::VectorXd& theta) const {
  check_point(theta);
  const Eigen::VectorXd s = predicted(theta);
  const Eigen::VectorXd lam = (s.array() * (1.0 - s.array())).matrix();
  Eigen::MatrixXd h = -covariates_.transpose() * lam.asDiagonal() * covariates_;
  h.diagonal().array() -= 1.0 / prior_scale_;
  return h;
}

LogisticData load_logistic_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  Eigen::Index ncols = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
          ++pos;
        if (pos != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw IngestionError("row " + std::to_string(lineno) + ": cannot parse '" +
                                 cell + "'", lineno);
      }
    }
    if (row.size() < 2)
      throw IngestionError("row " + std::to_string(lineno) +
                               ": need at least one covariate and a label", lineno);
    if (ncols < 0) ncols = static_cast<Eigen::Index>(row.size());
    if (static_cast<Eigen::Index>(row.size()) != ncols)
      throw IngestionError("row " + std::to_string(lineno) + ": expected " +
                               std::to_string(ncols) + " columns", lineno);
    const double label = row.back();
    if (label != 0.0 && label != 1.0)
      throw IngestionError("row " + std::to_string(lineno) + ": label must be 0 or 1, got " +
                               std::to_string(label), lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IngestionError("empty file " + path);

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = ncols - 1;
  LogisticData data;
  data.covariates.resize(n, d);
  data.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j)
      data.covariates(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    data.labels[i] = rows[static_cast<std::size_t>(i)].back();
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = data.covariates.col(j).mean();
    const double var =
        (data.covariates.col(j).array() - mean).square().sum() / static_cast<double>(n);
    if (var < 1e-12) {
      data.covariates.col(j).setZero();
      data.warnings.push_back("column " + std::to_string(j + 1) +
                              " is constant; standardized to zeros");
    } else {
      data.covariates.col(j) =
          (data.covariates.col(j).array() - mean) / std::sqrt(var);
    }
  }
  return data;
}

}  // namespace magss::targets
