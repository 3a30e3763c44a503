#include "magss/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <unsupported/Eigen/FFT>

#include "magss/errors.hpp"

namespace magss::diag {

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein_1d: empty input");
  if (a.size() != b.size())
    throw ConfigError("wasserstein_1d: sample sizes differ (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

MarginalW1 marginal_w1(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference) {
  if (samples.cols() != reference.cols())
    throw ConfigError("marginal_w1: dimension mismatch");
  MarginalW1 out;
  out.per_dimension.resize(samples.cols());
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    std::vector<double> a(samples.col(j).data(), samples.col(j).data() + samples.rows());
    std::vector<double> b(reference.col(j).data(),
                          reference.col(j).data() + reference.rows());
    out.per_dimension[j] = wasserstein_1d(std::move(a), std::move(b));
  }
  out.mean = out.per_dimension.mean();
  return out;
}

double ksd_vstat(const Eigen::MatrixXd& samples,
                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_log_p) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 1) throw ConfigError("ksd_vstat: need at least one sample");

  Eigen::MatrixXd scores(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd s = grad_log_p(samples.row(i).transpose());
    if (!s.allFinite()) throw EvaluationError("ksd_vstat: non-finite score");
    scores.row(i) = s.transpose();
  }

  // Stein kernel for k(x,x') = (1+r^2)^{-1/2} with u = x - x', r^2 = |u|^2:
  //   k_pi = c3 (d - 3 r^2 / (1+r^2)) + c3 u.(s_i - s_j) + c1 s_i.s_j,
  // with c1 = (1+r^2)^{-1/2}, c3 = (1+r^2)^{-3/2}. Symmetric in (i, j).
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    total += static_cast<double>(d) + scores.row(i).squaredNorm();  // diagonal
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Eigen::RowVectorXd u = samples.row(i) - samples.row(j);
      const double r2 = u.squaredNorm();
      const double base = 1.0 + r2;
      const double c1 = 1.0 / std::sqrt(base);
      const double c3 = c1 / base;
      const double term =
          c3 * (static_cast<double>(d) - 3.0 * r2 / base) +
          c3 * u.dot(scores.row(i) - scores.row(j)) +
          c1 * scores.row(i).dot(scores.row(j));
      total += 2.0 * term;
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n));
}

namespace {

// All-lag autocovariances (divisor n). Direct sums for short chains, FFT of
// the zero-padded series otherwise.
std::vector<double> autocovariances(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> gamma(n, 0.0);
  if (n <= 256) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t t = 0; t + k < n; ++t)
        acc += (chain[t] - mean) * (chain[t + k] - mean);
      gamma[k] = acc / static_cast<double>(n);
    }
    return gamma;
  }

  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  std::vector<std::complex<double>> padded(m, 0.0), freq(m);
  for (std::size_t t = 0; t < n; ++t) padded[t] = chain[t] - mean;
  Eigen::FFT<double> fft;
  fft.fwd(freq, padded);
  for (auto& f : freq) f *= std::conj(f);
  fft.inv(padded, freq);
  for (std::size_t k = 0; k < n; ++k)
    gamma[k] = padded[k].real() / static_cast<double>(n);
  return gamma;
}

}  // namespace

double effective_sample_size(const std::vector<double>& chain) {
  const std::size_t n = chain.size();
  if (n < 10) throw ConfigError("effective_sample_size: need at least 10 samples");

  const std::vector<double> gamma = autocovariances(chain);
  const double g0 = gamma[0];
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);
  // a constant chain leaves only rounding residue around its mean
  if (g0 <= 1e-28 * (1.0 + mean * mean)) return 1.0;

  // Sum autocovariances while adjacent lag pairs stay positive.
  double acc = 0.0;
  for (std::size_t m = 0; 2 * m < n; ++m) {
    const double pair = gamma[2 * m] + (2 * m + 1 < n ? gamma[2 * m + 1] : 0.0);
    if (pair <= 0.0) break;
    acc += pair;
  }
  const double tau = -1.0 + 2.0 * acc / g0;
  const double ess = static_cast<double>(n) / std::max(tau, 1e-12);
  return std::clamp(ess, 1.0, static_cast<double>(n));
}

double jump_rate(const SampleSet& set,
                 const std::function<int(const Eigen::VectorXd&)>& classifier) {
  if (!classifier) throw CapabilityError("jump_rate: no mode classifier");
  double rate_sum = 0.0;
  Eigen::Index counted = 0;
  for (Eigen::Index c = 0; c < set.n_chains(); ++c) {
    const Eigen::Index begin = set.chain_begin(c);
    const Eigen::Index end = set.chain_end(c);
    if (end - begin < 2) continue;
    long jumps = 0;
    int prev = classifier(set.samples.row(begin).transpose());
    for (Eigen::Index i = begin + 1; i < end; ++i) {
      const int cur = classifier(set.samples.row(i).transpose());
      if (cur != prev) ++jumps;
      prev = cur;
    }
    rate_sum += 100.0 * static_cast<double>(jumps) / static_cast<double>(end - begin - 1);
    ++counted;
  }
  if (counted == 0) throw ConfigError("jump_rate: need chains with at least 2 samples");
  return rate_sum / static_cast<double>(counted);
}

}  // namespace magss::diag
