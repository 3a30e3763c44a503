// Test-only oracles: finite differences, brute-force reimplementations, and
// independently coded reference transforms. Nothing here shares code with the
// implementation paths it checks.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "magss/rng.hpp"

namespace oracles {

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-5) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd j(f(x).size(), n);
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return j;
}

// Literal transcription of the Stein-kernel double loop with the inverse
// multiquadric kernel, including its derivatives spelled out term by term.
inline double naive_ksd(const Eigen::MatrixXd& samples,
                        const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd x = samples.row(i).transpose();
      const Eigen::VectorXd y = samples.row(j).transpose();
      const Eigen::VectorXd u = x - y;
      const double r2 = u.squaredNorm();
      const double k = std::pow(1.0 + r2, -0.5);
      const Eigen::VectorXd dk_dx = -std::pow(1.0 + r2, -1.5) * u;
      const Eigen::VectorXd dk_dy = std::pow(1.0 + r2, -1.5) * u;
      const double trace_term = static_cast<double>(d) * std::pow(1.0 + r2, -1.5) -
                                3.0 * r2 * std::pow(1.0 + r2, -2.5);
      const Eigen::VectorXd sx = score(x);
      const Eigen::VectorXd sy = score(y);
      total += trace_term + dk_dx.dot(sy) + dk_dy.dot(sx) + k * sx.dot(sy);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

// Independent push-forward transforms for the bijective targets, written
// directly from the change-of-variable maps.
inline Eigen::VectorXd funnel_push(const Eigen::VectorXd& z, double sigma, double mu) {
  const Eigen::Index d = z.size();
  Eigen::VectorXd x(d);
  x[d - 1] = sigma * z[d - 1];
  for (Eigen::Index i = 0; i < d - 1; ++i)
    x[i] = mu + std::exp(sigma * z[d - 1] / 2.0) * z[i];
  return x;
}

inline Eigen::VectorXd rosenbrock_push(const Eigen::VectorXd& z, double a, double b,
                                       int block) {
  const Eigen::Index d = z.size();
  Eigen::VectorXd x(d);
  x[0] = a + z[0] / std::sqrt(2.0);
  const Eigen::Index blocks = (d - 1) / block;
  for (Eigen::Index j = 0; j < blocks; ++j) {
    for (Eigen::Index i = 0; i < block; ++i) {
      const Eigen::Index idx = 1 + j * block + i;
      const double prev = i == 0 ? x[0] : x[idx - 1];
      x[idx] = prev * prev + z[idx] / std::sqrt(2.0 * b);
    }
  }
  return x;
}

inline Eigen::VectorXd squiggle_push(const Eigen::VectorXd& z, double a) {
  const Eigen::Index d = z.size();
  Eigen::VectorXd x(d);
  const double z1 = std::sqrt(5.0) * z[0];
  x[0] = z1;
  for (Eigen::Index i = 1; i < d; ++i)
    x[i] = z[i] / std::sqrt(2.0) - std::sin(a * z1);
  return x;
}

inline Eigen::MatrixXd random_points(magss::RngStream& rng, Eigen::Index n,
                                     Eigen::Index d, double lo = -3.0, double hi = 3.0) {
  Eigen::MatrixXd pts(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) pts(i, j) = rng.uniform(lo, hi);
  return pts;
}

}  // namespace oracles
