#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace magss::diag {

/// Samples stacked row-wise, optionally split into chains by row offsets
/// (chain c spans rows [offsets[c], offsets[c+1])). Without offsets the whole
/// matrix is one chain.
struct SampleSet {
  Eigen::MatrixXd samples;           // n x D
  std::vector<Eigen::Index> offsets; // size n_chains + 1 when present

  Eigen::Index n_chains() const {
    return offsets.empty() ? 1 : static_cast<Eigen::Index>(offsets.size()) - 1;
  }
  Eigen::Index chain_begin(Eigen::Index c) const {
    return offsets.empty() ? 0 : offsets[static_cast<std::size_t>(c)];
  }
  Eigen::Index chain_end(Eigen::Index c) const {
    return offsets.empty() ? samples.rows() : offsets[static_cast<std::size_t>(c) + 1];
  }
};

/// Earth mover's distance between equal-size 1-d samples: mean absolute
/// difference of the sorted values.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct MarginalW1 {
  Eigen::VectorXd per_dimension;
  double mean = 0.0;
};

/// Per-coordinate 1-d Wasserstein distance, mean reported as the headline.
MarginalW1 marginal_w1(const Eigen::MatrixXd& samples, const Eigen::MatrixXd& reference);

/// Kernel Stein discrepancy V-statistic with the inverse multiquadric kernel
/// (1 + |x - x'|^2)^{-1/2}: (1/n^2) sum_ij k_pi(x_i, x_j). Biased, >= 0,
/// requires only the score of the target.
double ksd_vstat(const Eigen::MatrixXd& samples,
                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_log_p);

/// Effective sample size of a univariate chain: n / (1 + 2 sum rho_k) with
/// autocorrelations truncated by the initial-positive-sequence rule (sums of
/// adjacent lag pairs stay positive). Clamped to (1, n]; a zero-variance chain
/// has ESS 1 by convention.
double effective_sample_size(const std::vector<double>& chain);

/// Percent of consecutive samples whose mode labels differ, computed per
/// chain and averaged over chains.
double jump_rate(const SampleSet& set,
                 const std::function<int(const Eigen::VectorXd&)>& classifier);

}  // namespace magss::diag
