#include "fern/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fern/csv.hpp"

namespace fern::io {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("dataio: " + what);
}

constexpr double kSentinelDropFraction = 0.10;
constexpr double kZeroDropFraction = 0.15;
constexpr double kZeroAsinhFraction = 0.10;
constexpr double kWeekMinutes = 7.0 * 24.0 * 60.0;
constexpr double kFillMinutes = 3.0 * 60.0;

struct ZeroRun {
  std::size_t start;
  std::size_t length;
};

std::vector<ZeroRun> zero_runs(const SeriesFrame& frame, std::size_t col) {
  std::vector<ZeroRun> runs;
  const std::size_t rows = frame.rows(), cols = frame.cols();
  std::size_t i = 0;
  while (i < rows) {
    if (frame.values[i * cols + col] == 0.0) {
      std::size_t j = i;
      while (j < rows && frame.values[j * cols + col] == 0.0) ++j;
      runs.push_back({i, j - i});
      i = j;
    } else {
      ++i;
    }
  }
  return runs;
}

bool is_sentinel(double v, const std::vector<double>& sentinels) {
  for (double s : sentinels) {
    if (std::isnan(s) ? std::isnan(v) : v == s) return true;
  }
  return false;
}

SeriesFrame keep_columns(const SeriesFrame& frame,
                         const std::vector<std::size_t>& keep) {
  SeriesFrame out;
  out.timestamps = frame.timestamps;
  out.timestamp_column = frame.timestamp_column;
  const std::size_t rows = frame.rows(), cols = frame.cols();
  out.values = num::Tensor({rows, keep.size()});
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.columns.push_back(frame.columns[keep[k]]);
    for (std::size_t i = 0; i < rows; ++i) {
      out.values[i * keep.size() + k] = frame.values[i * cols + keep[k]];
    }
  }
  return out;
}

SeriesFrame delete_rows(const SeriesFrame& frame,
                        const std::set<std::size_t>& doomed) {
  SeriesFrame out;
  out.columns = frame.columns;
  out.timestamp_column = frame.timestamp_column;
  const std::size_t rows = frame.rows(), cols = frame.cols();
  out.values = num::Tensor({rows - doomed.size(), cols});
  std::size_t w = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (doomed.count(i)) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      out.values[w * cols + j] = frame.values[i * cols + j];
    }
    if (!frame.timestamps.empty()) {
      out.timestamps.push_back(frame.timestamps[i]);
    }
    ++w;
  }
  return out;
}

double population_std(const double* data, std::size_t n, std::size_t stride) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += data[i * stride];
  mean /= static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data[i * stride] - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::size_t SeriesFrame::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return j;
  }
  fail("no column named '" + name + "'");
}

SeriesFrame read_frame(const std::filesystem::path& path,
                       const FrameConfig& config) {
  const CsvTable table = read_csv(path);
  SeriesFrame frame;
  frame.timestamp_column = config.timestamp_column;

  std::size_t ts_col = static_cast<std::size_t>(-1);
  if (!config.timestamp_column.empty()) {
    const auto it = std::find(table.header.begin(), table.header.end(),
                              config.timestamp_column);
    if (it == table.header.end()) {
      fail("timestamp column '" + config.timestamp_column + "' not in " +
           path.string());
    }
    ts_col = static_cast<std::size_t>(it - table.header.begin());
  }

  std::vector<std::size_t> numeric;
  if (config.columns.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j != ts_col) numeric.push_back(j);
    }
  } else {
    for (const std::string& name : config.columns) {
      const auto it =
          std::find(table.header.begin(), table.header.end(), name);
      if (it == table.header.end()) {
        fail("column '" + name + "' not in " + path.string());
      }
      numeric.push_back(static_cast<std::size_t>(it - table.header.begin()));
    }
  }

  const std::size_t rows = table.rows.size();
  frame.values = num::Tensor({rows, numeric.size()});
  for (std::size_t k = 0; k < numeric.size(); ++k) {
    frame.columns.push_back(table.header[numeric[k]]);
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      try {
        frame.values[i * numeric.size() + k] =
            parse_double(table.rows[i][numeric[k]]);
      } catch (const std::exception&) {
        fail("column '" + frame.columns[k] + "' is not numeric at row " +
             std::to_string(i));
      }
    }
    if (ts_col != static_cast<std::size_t>(-1)) {
      frame.timestamps.push_back(table.rows[i][ts_col]);
    }
  }
  return frame;
}

void write_frame(const SeriesFrame& frame,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  const bool ts = !frame.timestamps.empty();
  if (ts) out << csv_field(frame.timestamp_column) << ',';
  for (std::size_t j = 0; j < frame.cols(); ++j) {
    if (j) out << ',';
    out << csv_field(frame.columns[j]);
  }
  out << '\n';
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    if (ts) out << csv_field(frame.timestamps[i]) << ',';
    for (std::size_t j = 0; j < frame.cols(); ++j) {
      if (j) out << ',';
      out << format_double(frame.values[i * frame.cols() + j]);
    }
    out << '\n';
  }
}

ZeroReport zero_report(const SeriesFrame& frame) {
  ZeroReport report;
  report.rows = frame.rows();
  for (std::size_t j = 0; j < frame.cols(); ++j) {
    ColumnZeroStats st;
    st.column = frame.columns[j];
    for (const ZeroRun& run : zero_runs(frame, j)) {
      st.total += run.length;
      if (run.length == 1) {
        st.isolated += 1;
      } else {
        st.clustered += run.length;
      }
      st.longest_run = std::max(st.longest_run, run.length);
    }
    st.percent = report.rows == 0
                     ? 0.0
                     : 100.0 * static_cast<double>(st.total) /
                           static_cast<double>(report.rows);
    report.columns.push_back(std::move(st));
  }
  return report;
}

std::string ZeroReport::to_json() const {
  nlohmann::json j;
  j["schema"] = "fern-zero-report-v1";
  j["rows"] = rows;
  j["columns"] = nlohmann::json::array();
  for (const ColumnZeroStats& st : columns) {
    nlohmann::json c;
    c["column"] = st.column;
    c["total"] = st.total;
    c["percent"] = st.percent;
    c["isolated"] = st.isolated;
    c["clustered"] = st.clustered;
    c["longest_run"] = st.longest_run;
    j["columns"].push_back(std::move(c));
  }
  return j.dump(2);
}

PolicyResult apply_policy(const SeriesFrame& frame,
                          const PolicySpec& policy) {
  const std::size_t rows = frame.rows();
  if (rows == 0) fail("policy on an empty frame");
  const double n = static_cast<double>(rows);

  PolicyResult result;
  auto log = [&result](const std::string& column, const std::string& rule,
                       std::size_t count) {
    result.log.push_back({column, rule, count});
  };

  auto run_minutes = [&policy](std::size_t len) {
    if (policy.minutes_per_row <= 0.0) {
      fail("policy needs minutes_per_row to judge zero-run durations");
    }
    return static_cast<double>(len) * policy.minutes_per_row;
  };

  // Column decisions are taken against the input frame only.
  std::vector<std::size_t> keep;
  std::vector<std::size_t> to_asinh;
  for (std::size_t j = 0; j < frame.cols(); ++j) {
    const std::string& name = frame.columns[j];

    std::size_t sentinel_count = 0;
    if (!policy.sentinels.empty()) {
      for (std::size_t i = 0; i < rows; ++i) {
        if (is_sentinel(frame.values[i * frame.cols() + j],
                        policy.sentinels)) {
          ++sentinel_count;
        }
      }
    }
    if (static_cast<double>(sentinel_count) / n > kSentinelDropFraction) {
      log(name, "sentinel>10%: drop column", sentinel_count);
      continue;
    }

    const std::vector<ZeroRun> runs = zero_runs(frame, j);
    std::size_t zero_count = 0;
    std::size_t longest = 0;
    for (const ZeroRun& r : runs) {
      zero_count += r.length;
      longest = std::max(longest, r.length);
    }
    const double zero_fraction = static_cast<double>(zero_count) / n;
    if (zero_fraction > kZeroDropFraction) {
      log(name, "zeros>15%: drop column", zero_count);
      continue;
    }
    if (longest > 0 && run_minutes(longest) > kWeekMinutes) {
      log(name, "zero-run>1week: drop column", longest);
      continue;
    }
    if (zero_fraction > kZeroAsinhFraction) {
      log(name, "zeros in 10-15%: asinh transform", zero_count);
      to_asinh.push_back(keep.size());
    }
    keep.push_back(j);
  }

  SeriesFrame work = keep_columns(frame, keep);
  for (std::size_t k : to_asinh) {
    for (std::size_t i = 0; i < work.rows(); ++i) {
      double& v = work.values[i * work.cols() + k];
      v = std::asinh(v);
    }
  }

  // Rows inside long zero runs go away frame-wide; the runs are judged on
  // the input data, so deletions in one column cannot promote another
  // column's short runs.
  std::set<std::size_t> doomed;
  for (std::size_t k = 0; k < work.cols(); ++k) {
    std::size_t affected = 0;
    for (const ZeroRun& r : zero_runs(work, k)) {
      if (run_minutes(r.length) > kFillMinutes) {
        for (std::size_t i = r.start; i < r.start + r.length; ++i) {
          doomed.insert(i);
        }
        affected += r.length;
      }
    }
    if (affected) log(work.columns[k], "zero-run>3h: delete rows", affected);
  }
  if (!doomed.empty()) {
    log("", "deleted rows", doomed.size());
    work = delete_rows(work, doomed);
  }

  // Whatever zeros survive sat in short runs of the input; close them with
  // the previous non-zero value, then the next one for leading runs.
  for (std::size_t k = 0; k < work.cols(); ++k) {
    std::size_t filled = 0;
    double prev = 0.0;
    bool have_prev = false;
    for (std::size_t i = 0; i < work.rows(); ++i) {
      double& v = work.values[i * work.cols() + k];
      if (v == 0.0) {
        if (have_prev) {
          v = prev;
          ++filled;
        }
      } else {
        prev = v;
        have_prev = true;
      }
    }
    double next = 0.0;
    bool have_next = false;
    for (std::size_t i = work.rows(); i-- > 0;) {
      double& v = work.values[i * work.cols() + k];
      if (v == 0.0) {
        if (have_next) {
          v = next;
          ++filled;
        }
      } else {
        next = v;
        have_next = true;
      }
    }
    if (filled) {
      log(work.columns[k], "zero-run<=3h: forward-backward fill", filled);
    }
  }

  result.frame = std::move(work);
  return result;
}

std::string PolicyResult::log_json() const {
  nlohmann::json j;
  j["schema"] = "fern-policy-log-v1";
  j["actions"] = nlohmann::json::array();
  for (const PolicyAction& a : log) {
    nlohmann::json e;
    e["column"] = a.column;
    e["rule"] = a.rule;
    e["count"] = a.count;
    j["actions"].push_back(std::move(e));
  }
  return j.dump(2);
}

Scaler fit_scaler(const num::Tensor& train_rows, ScalerKind kind) {
  if (train_rows.rank() != 2 || train_rows.rows() == 0) {
    fail("scaler needs a non-empty [rows, cols] training block");
  }
  const std::size_t rows = train_rows.rows(), cols = train_rows.cols();
  Scaler s;
  s.kind = kind;
  for (std::size_t j = 0; j < cols; ++j) {
    if (kind == ScalerKind::kStandard) {
      double mean = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        mean += train_rows[i * cols + j];
      }
      mean /= static_cast<double>(rows);
      s.center.push_back(mean);
      s.scale.push_back(std::max(
          population_std(train_rows.data() + j, rows, cols), 1e-8));
    } else {
      std::vector<double> col(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        col[i] = train_rows[i * cols + j];
      }
      const double med = median_of(col);
      for (double& v : col) v = std::abs(v - med);
      s.center.push_back(med);
      s.scale.push_back(std::max(median_of(std::move(col)), 1e-8));
    }
  }
  return s;
}

num::Tensor Scaler::transform(const num::Tensor& raw) const {
  if (raw.rank() != 2 || raw.cols() != center.size()) {
    fail("scaler column mismatch");
  }
  num::Tensor out = raw;
  const std::size_t cols = raw.cols();
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = (raw[i * cols + j] - center[j]) / scale[j];
    }
  }
  return out;
}

num::Tensor Scaler::inverse_transform(const num::Tensor& scaled) const {
  if (scaled.rank() != 2 || scaled.cols() != center.size()) {
    fail("scaler column mismatch");
  }
  num::Tensor out = scaled;
  const std::size_t cols = scaled.cols();
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = scaled[i * cols + j] * scale[j] + center[j];
    }
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(train_ratio > 0.0 && val_ratio > 0.0 && test_ratio > 0.0)) {
    fail("split ratios must be positive");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    fail("split ratios must sum to 1");
  }
  if (context_len == 0 || horizon == 0) {
    fail("context and horizon must be positive");
  }
}

namespace {

WindowedSplit window_block(const num::Tensor& scaled, std::size_t begin,
                           std::size_t end, std::size_t l, std::size_t h,
                           const char* split_name) {
  const std::size_t len = end - begin;
  if (len < l + h) {
    fail(std::string(split_name) + " split has " + std::to_string(len) +
         " rows, fewer than one window of " + std::to_string(l + h));
  }
  const std::size_t cols = scaled.cols();
  const std::size_t per_channel = len - (l + h) + 1;
  WindowedSplit out;
  out.contexts = num::Tensor({per_channel * cols, l});
  out.targets = num::Tensor({per_channel * cols, h});
  std::size_t row = 0;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < per_channel; ++i) {
      for (std::size_t t = 0; t < l; ++t) {
        out.contexts[row * l + t] = scaled[(begin + i + t) * cols + c];
      }
      for (std::size_t t = 0; t < h; ++t) {
        out.targets[row * h + t] = scaled[(begin + i + l + t) * cols + c];
      }
      out.channel_of_row.push_back(c);
      ++row;
    }
  }
  return out;
}

}  // namespace

WindowedDataset split_and_window(const SeriesFrame& frame,
                                 const SplitSpec& spec, ScalerKind kind) {
  spec.validate();
  const std::size_t rows = frame.rows();
  const std::size_t cols = frame.cols();
  if (rows == 0 || cols == 0) fail("cannot window an empty frame");

  WindowedDataset ds;
  ds.channels = cols;
  ds.train_end = static_cast<std::size_t>(
      std::floor(spec.train_ratio * static_cast<double>(rows)));
  ds.val_end = ds.train_end +
               static_cast<std::size_t>(std::floor(
                   spec.val_ratio * static_cast<double>(rows)));

  num::Tensor train_raw({ds.train_end, cols});
  for (std::size_t i = 0; i < ds.train_end * cols; ++i) {
    train_raw[i] = frame.values[i];
  }
  ds.scaler = fit_scaler(train_raw, kind);
  for (std::size_t j = 0; j < cols; ++j) {
    const double e = population_std(train_raw.data() + j, ds.train_end, cols);
    ds.eps_raw.push_back(e);
    ds.eps_scaled.push_back(e / ds.scaler.scale[j]);
  }

  const num::Tensor scaled = ds.scaler.transform(frame.values);
  ds.train = window_block(scaled, 0, ds.train_end, spec.context_len,
                          spec.horizon, "train");
  ds.val = window_block(scaled, ds.train_end, ds.val_end, spec.context_len,
                        spec.horizon, "val");
  ds.test = window_block(scaled, ds.val_end, rows, spec.context_len,
                         spec.horizon, "test");
  return ds;
}

}  // namespace fern::io
