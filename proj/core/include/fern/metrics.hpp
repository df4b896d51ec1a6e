#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fern/tensor.hpp"

namespace fern::metrics {

double mse(const num::Tensor& a, const num::Tensor& b);
double mae(const num::Tensor& a, const num::Tensor& b);

// Squared 2-Wasserstein distance between two equal-length scalar samples:
// sort both and take the mean squared difference of the matched order
// statistics. Note this is the squared quantity; every table and report in
// this project stores W2 distances in squared form.
double w2_1d(std::span<const double> a, std::span<const double> b);

// Sliced variant for samples living in R^H (the rows of each matrix).
// Projects the rows onto `projections` random unit directions (standard
// normal draws, normalized) and averages w2_1d across the projections.
// Requires at least two rows; the direction set depends only on the seed.
double swd(const num::Tensor& preds, const num::Tensor& truths,
           std::size_t projections, std::uint64_t seed);
// Same, with caller-supplied unit directions (one per row of `directions`).
double swd_with_directions(const num::Tensor& preds,
                           const num::Tensor& truths,
                           const num::Tensor& directions);

// First 1-based step whose absolute error strictly exceeds eps; h when the
// error never does. Larger is better, bounded by the horizon.
double ept_row(std::span<const double> pred, std::span<const double> truth,
               double eps);

inline constexpr std::uint64_t kDefaultProjectionSeed = 101;

struct SwdSpec {
  // 0 disables the sliced metric entirely (shock-protocol evaluation uses
  // the unprojected per-window w2_1d instead).
  std::size_t projections = 500;
  std::uint64_t seed = kDefaultProjectionSeed;
};

struct MetricReport {
  double mse = 0.0;
  double mae = 0.0;
  // Mean over windows of the per-window squared W2 between the predicted
  // and true horizon samples.
  double wd = 0.0;
  // Sliced distance across the window batch, averaged over channels; NaN
  // when projections were disabled.
  double swd = 0.0;
  double ept = 0.0;
  std::size_t windows = 0;
  std::size_t channels = 0;
  std::size_t horizon = 0;
  std::size_t swd_projections = 0;
  std::uint64_t swd_seed = 0;

  std::string to_json() const;
};

// Scores a batch of forecasts. Rows of preds/truths are horizon windows;
// channel_of_row tags each row with its channel; eps_per_channel feeds the
// exceedance metric (every entry must be positive). The sliced metric is
// computed per channel across that channel's windows, then averaged.
MetricReport evaluate_forecasts(const num::Tensor& preds,
                                const num::Tensor& truths,
                                std::span<const std::size_t> channel_of_row,
                                std::span<const double> eps_per_channel,
                                const SwdSpec& swd_spec);

// Per-step error profiles over the horizon (position-wise means across
// windows), for callers that want the breakdown as well as the scalars.
std::vector<double> per_step_mse(const num::Tensor& preds,
                                 const num::Tensor& truths);
std::vector<double> per_step_mae(const num::Tensor& preds,
                                 const num::Tensor& truths);

}  // namespace fern::metrics
