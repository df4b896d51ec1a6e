#include "fern/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "fern/rng.hpp"

namespace fern::metrics {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("metrics: " + what);
}

void require_same_shape(const num::Tensor& a, const num::Tensor& b) {
  if (!a.same_shape(b)) fail("tensors must have identical shapes");
  if (a.size() == 0) fail("empty tensors");
}

}  // namespace

double mse(const num::Tensor& a, const num::Tensor& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return acc / static_cast<double>(a.size());
}

double mae(const num::Tensor& a, const num::Tensor& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double w2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail("w2_1d: samples must have equal length");
  if (a.empty()) fail("w2_1d: empty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = sa[i] - sb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(sa.size());
}

double swd_with_directions(const num::Tensor& preds,
                           const num::Tensor& truths,
                           const num::Tensor& directions) {
  if (preds.rank() != 2 || truths.rank() != 2 || directions.rank() != 2) {
    fail("swd: expected rank-2 inputs");
  }
  if (!preds.same_shape(truths)) fail("swd: shape mismatch");
  if (directions.cols() != preds.cols()) {
    fail("swd: direction dimension mismatch");
  }
  const std::size_t rows = preds.rows();
  if (rows < 2) fail("swd: need at least two windows per sample");
  const std::size_t h = preds.cols();
  const std::size_t n_dirs = directions.rows();
  if (n_dirs == 0) fail("swd: no directions");

  std::vector<double> pa(rows), pb(rows);
  double acc = 0.0;
  for (std::size_t l = 0; l < n_dirs; ++l) {
    const double* dir = directions.data() + l * h;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* rp = preds.data() + i * h;
      const double* rt = truths.data() + i * h;
      double dp = 0.0, dt = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        dp += rp[j] * dir[j];
        dt += rt[j] * dir[j];
      }
      pa[i] = dp;
      pb[i] = dt;
    }
    acc += w2_1d(pa, pb);
  }
  return acc / static_cast<double>(n_dirs);
}

namespace {

num::Tensor draw_directions(std::size_t projections, std::size_t h,
                            std::uint64_t seed) {
  num::Tensor dirs({projections, h});
  rng::Stream s = rng::Stream(seed).split("swd-dirs");
  for (std::size_t l = 0; l < projections; ++l) {
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        const double g = s.normal();
        dirs[l * h + j] = g;
        norm2 += g * g;
      }
    } while (norm2 < 1e-24);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < h; ++j) dirs[l * h + j] *= inv;
  }
  return dirs;
}

}  // namespace

double swd(const num::Tensor& preds, const num::Tensor& truths,
           std::size_t projections, std::uint64_t seed) {
  if (projections == 0) fail("swd: need at least one projection");
  if (preds.rank() != 2) fail("swd: expected rank-2 inputs");
  return swd_with_directions(preds, truths,
                             draw_directions(projections, preds.cols(), seed));
}

double ept_row(std::span<const double> pred, std::span<const double> truth,
               double eps) {
  if (!(eps > 0.0)) fail("ept: threshold must be positive");
  if (pred.size() != truth.size() || pred.empty()) {
    fail("ept: mismatched or empty windows");
  }
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (std::abs(pred[j] - truth[j]) > eps) {
      return static_cast<double>(j + 1);
    }
  }
  return static_cast<double>(pred.size());
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "fern-metrics-v1";
  j["mse"] = mse;
  j["mae"] = mae;
  j["wd"] = wd;
  if (std::isnan(swd)) {
    j["swd"] = nullptr;
  } else {
    j["swd"] = swd;
  }
  j["ept"] = ept;
  j["windows"] = windows;
  j["channels"] = channels;
  j["horizon"] = horizon;
  j["swd_projections"] = swd_projections;
  j["swd_seed"] = swd_seed;
  return j.dump(2);
}

MetricReport evaluate_forecasts(const num::Tensor& preds,
                                const num::Tensor& truths,
                                std::span<const std::size_t> channel_of_row,
                                std::span<const double> eps_per_channel,
                                const SwdSpec& swd_spec) {
  if (preds.rank() != 2) fail("evaluate: expected rank-2 window batches");
  require_same_shape(preds, truths);
  const std::size_t rows = preds.rows();
  const std::size_t h = preds.cols();
  if (channel_of_row.size() != rows) fail("evaluate: bad channel tagging");
  std::size_t channels = 0;
  for (std::size_t c : channel_of_row) channels = std::max(channels, c + 1);
  if (eps_per_channel.size() < channels) {
    fail("evaluate: missing exceedance thresholds");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (!(eps_per_channel[c] > 0.0)) {
      fail("evaluate: thresholds must be positive");
    }
  }

  MetricReport rep;
  rep.mse = mse(preds, truths);
  rep.mae = mae(preds, truths);
  rep.windows = rows;
  rep.channels = channels;
  rep.horizon = h;
  rep.swd_projections = swd_spec.projections;
  rep.swd_seed = swd_spec.seed;

  double wd_acc = 0.0;
  double ept_acc = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::span<const double> rp(preds.data() + i * h, h);
    const std::span<const double> rt(truths.data() + i * h, h);
    wd_acc += w2_1d(rp, rt);
    ept_acc += ept_row(rp, rt, eps_per_channel[channel_of_row[i]]);
  }
  rep.wd = wd_acc / static_cast<double>(rows);
  rep.ept = ept_acc / static_cast<double>(rows);

  if (swd_spec.projections == 0) {
    rep.swd = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }

  const num::Tensor dirs =
      draw_directions(swd_spec.projections, h, swd_spec.seed);
  double swd_acc = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (channel_of_row[i] == c) ++count;
    }
    if (count < 2) fail("evaluate: a channel has fewer than two windows");
    num::Tensor cp({count, h}), ct({count, h});
    std::size_t k = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (channel_of_row[i] != c) continue;
      for (std::size_t j = 0; j < h; ++j) {
        cp[k * h + j] = preds[i * h + j];
        ct[k * h + j] = truths[i * h + j];
      }
      ++k;
    }
    swd_acc += swd_with_directions(cp, ct, dirs);
  }
  rep.swd = swd_acc / static_cast<double>(channels);
  return rep;
}

std::vector<double> per_step_mse(const num::Tensor& preds,
                                 const num::Tensor& truths) {
  require_same_shape(preds, truths);
  const std::size_t rows = preds.rows(), h = preds.cols();
  std::vector<double> out(h, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      const double e = preds[i * h + j] - truths[i * h + j];
      out[j] += e * e;
    }
  }
  for (double& v : out) v /= static_cast<double>(rows);
  return out;
}

std::vector<double> per_step_mae(const num::Tensor& preds,
                                 const num::Tensor& truths) {
  require_same_shape(preds, truths);
  const std::size_t rows = preds.rows(), h = preds.cols();
  std::vector<double> out(h, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      out[j] += std::abs(preds[i * h + j] - truths[i * h + j]);
    }
  }
  for (double& v : out) v /= static_cast<double>(rows);
  return out;
}

}  // namespace fern::metrics
