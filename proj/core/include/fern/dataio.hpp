#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fern/tensor.hpp"

namespace fern::io {

// Rectangular numeric table with named columns and an optional timestamp
// column kept as raw strings alongside the values.
struct SeriesFrame {
  std::vector<std::string> columns;
  num::Tensor values;  // [rows, cols]
  std::vector<std::string> timestamps;  // empty or one per row
  std::string timestamp_column;

  std::size_t rows() const { return values.rank() == 2 ? values.rows() : 0; }
  std::size_t cols() const { return columns.size(); }
  std::size_t column_index(const std::string& name) const;
};

struct FrameConfig {
  // Name of the timestamp column to carry through unparsed ("" = none).
  std::string timestamp_column;
  // Numeric columns to keep, in this order (empty = all non-timestamp).
  std::vector<std::string> columns;
};

SeriesFrame read_frame(const std::filesystem::path& path,
                       const FrameConfig& config = {});
void write_frame(const SeriesFrame& frame, const std::filesystem::path& path);

// Exact-zero accounting for one column. A zero is an entry that compares
// equal to 0.0; isolated zeros form runs of length one, clustered zeros
// belong to longer runs, and the two always sum to the total.
struct ColumnZeroStats {
  std::string column;
  std::size_t total = 0;
  double percent = 0.0;
  std::size_t isolated = 0;
  std::size_t clustered = 0;
  std::size_t longest_run = 0;
};

struct ZeroReport {
  std::size_t rows = 0;
  std::vector<ColumnZeroStats> columns;

  std::string to_json() const;
};

ZeroReport zero_report(const SeriesFrame& frame);

// Cleanup policy. Thresholds are fixed; the sentinel list is manual (no
// auto-detection) and the sampling interval converts run lengths to
// durations. Per column: more than 10% sentinels or more than 15% zeros
// drops the column, 10-15% zeros applies asinh, a zero run longer than a
// week drops the column. Rows inside zero runs longer than 3 hours are
// deleted across the whole frame; the remaining zero runs are closed with
// a forward then backward fill. Applying the policy to its own output
// changes nothing.
struct PolicySpec {
  std::vector<double> sentinels;
  // Minutes spanned by one row; 0 means unknown, which is an error as soon
  // as any run-duration rule has to fire.
  double minutes_per_row = 0.0;
};

struct PolicyAction {
  std::string column;  // empty for frame-wide actions
  std::string rule;
  std::size_t count = 0;
};

struct PolicyResult {
  SeriesFrame frame;
  std::vector<PolicyAction> log;

  std::string log_json() const;
};

PolicyResult apply_policy(const SeriesFrame& frame, const PolicySpec& policy);

enum class ScalerKind { kStandard, kRobust };

// Per-column affine normalizer fitted on training rows only. Standard uses
// mean and population standard deviation; robust uses median and median
// absolute deviation. Denominators are floored at 1e-8.
struct Scaler {
  ScalerKind kind = ScalerKind::kStandard;
  std::vector<double> center;
  std::vector<double> scale;

  num::Tensor transform(const num::Tensor& raw) const;
  num::Tensor inverse_transform(const num::Tensor& scaled) const;
};

Scaler fit_scaler(const num::Tensor& train_rows, ScalerKind kind);

struct SplitSpec {
  double train_ratio = 0.7;
  double val_ratio = 0.2;
  double test_ratio = 0.1;
  std::size_t context_len = 336;
  std::size_t horizon = 336;

  void validate() const;
};

// Stride-1 windows of one split, all channels concatenated along the batch
// axis (channel-major, then window offset).
struct WindowedSplit {
  num::Tensor contexts;  // [B, L]
  num::Tensor targets;   // [B, H]
  std::vector<std::size_t> channel_of_row;
};

struct WindowedDataset {
  WindowedSplit train;
  WindowedSplit val;
  WindowedSplit test;
  Scaler scaler;
  // Per-channel population std of the raw training rows, and the same
  // value expressed in scaled units (raw divided by the scaler's scale).
  std::vector<double> eps_raw;
  std::vector<double> eps_scaled;
  std::size_t channels = 0;
  // Row boundaries actually used: train is [0, b1), val [b1, b2), test
  // [b2, rows).
  std::size_t train_end = 0;
  std::size_t val_end = 0;
};

// Splits rows at floor(cumulative ratio * rows) before any windowing, fits
// the scaler on the training rows, scales every split with it, and windows
// each split independently so no window straddles a boundary.
WindowedDataset split_and_window(const SeriesFrame& frame,
                                 const SplitSpec& spec,
                                 ScalerKind kind = ScalerKind::kStandard);

}  // namespace fern::io
