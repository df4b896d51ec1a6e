#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fern/model.hpp"
#include "fern/tensor.hpp"

namespace fern::diag {

// Spectral summary of one patch transport, read straight off the emitted
// eigenvalues: the spectral radius, the trace, and the log determinant.
struct PatchStats {
  double max_eig = 0.0;
  double trace = 0.0;
  double logdet = 0.0;
};

// How a nonpositive eigenvalue shows up in the log determinant. kFloor
// clamps at 1e-12 so every export stays plottable; kSentinel reports -inf.
enum class LogDetMode { kFloor, kSentinel };

inline constexpr double kLogDetFloor = 1e-12;

struct EigenProfile {
  std::size_t windows = 0;
  std::size_t patches = 0;
  // per_patch[b][j] summarizes patch j of window b; window_mean[b] averages
  // the patch statistics of window b.
  std::vector<std::vector<PatchStats>> per_patch;
  std::vector<PatchStats> window_mean;
  std::vector<std::size_t> channel_of_row;
};

// Summarizes the factors of one forward pass. Every patch must carry the
// same number of rows, and channel_of_row tags each row.
EigenProfile eigen_profile(const std::vector<model::SPDFactors>& factors,
                           std::span<const std::size_t> channel_of_row,
                           LogDetMode mode = LogDetMode::kFloor);

// One line of the tidy export. patch is -1 on the across-patch mean rows.
struct ProfileRow {
  std::size_t step = 0;
  std::size_t channel = 0;
  std::int64_t patch = -1;
  double log_abs_err = 0.0;
  double max_eig = 0.0;
  double trace = 0.0;
  double logdet = 0.0;

  friend bool operator==(const ProfileRow&, const ProfileRow&) = default;
};

// Flattens a profile against an aligned per-window absolute error: patch
// rows first, then the mean row, per window. The error column stores
// log(max(|e|, 1e-12)).
std::vector<ProfileRow> profile_rows(const EigenProfile& profile,
                                     std::span<const double> abs_err);

void write_profile_csv(const std::filesystem::path& path,
                       std::span<const ProfileRow> rows);
std::vector<ProfileRow> read_profile_csv(const std::filesystem::path& path);

}  // namespace fern::diag
