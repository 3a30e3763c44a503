#pragma once

#include <functional>
#include <utility>

#include "magss/rng.hpp"

namespace magss::slice {

struct SliceParams {
  double w = 3.0;            // step-out width, in curve-parameter units
  int m = 8;                 // total step-out budget
  int max_shrink_iters = 100;

  void validate() const;
};

/// Per-transition slice statistics.
struct SliceStats {
  int expansions = 0;    // accepted step-out widenings
  int shrink_iters = 0;  // rejected shrinkage draws
  int evals = 0;         // curve-density evaluations
  bool fallback = false; // shrinkage gave up and kept the current point
};

/// Log density along a curve, parameterized by signed arc length. Evaluations
/// that throw are treated as log density -infinity (outside every slice).
using CurveDensity = std::function<double(double)>;

/// log s = log f(x) + ln(U), the slice level in log space.
double draw_log_level(double log_fx, RngStream& rng);

/// Randomized bracketing of the slice around t = 0. Consumes one uniform for
/// the initial offset and one integer draw splitting the expansion budget
/// between the two sides; each side then widens by w while its endpoint stays
/// inside the slice and its share of the budget lasts.
std::pair<double, double> step_out(double log_level, const CurveDensity& f,
                                   const SliceParams& params, RngStream& rng,
                                   SliceStats* stats = nullptr);

/// Samples a curve parameter inside the slice from (l, r) by circular
/// shrinkage. The interval is treated as a circle with the current point at
/// the seam: each draw picks theta_h uniform on (0, r-l) of the current
/// interval and unwraps it to t in (l, r]; a rejected draw replaces the
/// endpoint on its side of 0, so the interval always shrinks toward the
/// current point. Returns 0 (the current point) with stats->fallback set once
/// max_shrink_iters draws have been rejected.
double shrink(double log_level, const CurveDensity& f, double l, double r,
              const SliceParams& params, RngStream& rng,
              SliceStats* stats = nullptr);

/// One univariate slice-sampling transition along gamma(t) = x + t.
double slice_1d_step(double x, const std::function<double(double)>& log_density_1d,
                     const SliceParams& params, RngStream& rng,
                     SliceStats* stats = nullptr);

}  // namespace magss::slice
