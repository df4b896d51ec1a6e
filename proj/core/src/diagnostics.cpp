#include "fern/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "fern/csv.hpp"

namespace fern::diag {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("diagnostics: " + what);
}

double log_det_term(double lambda, LogDetMode mode) {
  if (mode == LogDetMode::kSentinel) {
    return lambda > 0.0 ? std::log(lambda)
                        : -std::numeric_limits<double>::infinity();
  }
  return std::log(std::max(lambda, kLogDetFloor));
}

constexpr char kSchema[] = "# fern-eigenprofile-v1";
constexpr char kHeader[] = "step,channel,patch,log_abs_err,max_eig,trace,logdet";

}  // namespace

EigenProfile eigen_profile(const std::vector<model::SPDFactors>& factors,
                           std::span<const std::size_t> channel_of_row,
                           LogDetMode mode) {
  if (factors.empty()) fail("no factors to profile");
  const std::size_t rows = factors.front().eigenvalues.rows();
  for (const model::SPDFactors& f : factors) {
    if (f.eigenvalues.rank() != 2 || f.eigenvalues.rows() != rows) {
      fail("patches disagree on the window count");
    }
  }
  if (channel_of_row.size() != rows) {
    fail("channel map does not match the window count");
  }

  EigenProfile profile;
  profile.windows = rows;
  profile.patches = factors.size();
  profile.channel_of_row.assign(channel_of_row.begin(), channel_of_row.end());
  profile.per_patch.resize(rows);
  profile.window_mean.resize(rows);

  for (std::size_t b = 0; b < rows; ++b) {
    profile.per_patch[b].reserve(factors.size());
    PatchStats mean;
    for (const model::SPDFactors& f : factors) {
      const std::size_t p = f.eigenvalues.cols();
      PatchStats s;
      s.max_eig = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < p; ++k) {
        const double lambda = f.eigenvalues.at(b, k);
        s.max_eig = std::max(s.max_eig, lambda);
        s.trace += lambda;
        s.logdet += log_det_term(lambda, mode);
      }
      mean.max_eig += s.max_eig;
      mean.trace += s.trace;
      mean.logdet += s.logdet;
      profile.per_patch[b].push_back(s);
    }
    const double n = double(factors.size());
    mean.max_eig /= n;
    mean.trace /= n;
    mean.logdet /= n;
    profile.window_mean[b] = mean;
  }
  return profile;
}

std::vector<ProfileRow> profile_rows(const EigenProfile& profile,
                                     std::span<const double> abs_err) {
  if (abs_err.size() != profile.windows) {
    fail("error series does not align with the profile windows");
  }
  std::vector<ProfileRow> rows;
  rows.reserve(profile.windows * (profile.patches + 1));
  for (std::size_t b = 0; b < profile.windows; ++b) {
    const double log_err =
        std::log(std::max(std::abs(abs_err[b]), kLogDetFloor));
    for (std::size_t j = 0; j < profile.patches; ++j) {
      const PatchStats& s = profile.per_patch[b][j];
      rows.push_back({b, profile.channel_of_row[b],
                      static_cast<std::int64_t>(j), log_err, s.max_eig,
                      s.trace, s.logdet});
    }
    const PatchStats& m = profile.window_mean[b];
    rows.push_back({b, profile.channel_of_row[b], -1, log_err, m.max_eig,
                    m.trace, m.logdet});
  }
  return rows;
}

void write_profile_csv(const std::filesystem::path& path,
                       std::span<const ProfileRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out << kSchema << "\n" << kHeader << "\n";
  for (const ProfileRow& r : rows) {
    out << r.step << ',' << r.channel << ',' << r.patch << ','
        << io::format_double(r.log_abs_err) << ','
        << io::format_double(r.max_eig) << ',' << io::format_double(r.trace)
        << ',' << io::format_double(r.logdet) << "\n";
  }
  if (!out) fail("short write to " + path.string());
}

std::vector<ProfileRow> read_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  std::size_t start = 0;
  bool saw_schema = false;
  while (start < text.size() && text[start] == '#') {
    std::size_t eol = text.find('\n', start);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + start, eol - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == kSchema) saw_schema = true;
    start = eol < text.size() ? eol + 1 : eol;
  }
  if (!saw_schema) fail(path.string() + " is not an eigen-profile export");

  const io::CsvTable table = io::parse_csv(text.substr(start));
  if (table.header != std::vector<std::string>{"step", "channel", "patch",
                                               "log_abs_err", "max_eig",
                                               "trace", "logdet"}) {
    fail("unexpected eigen-profile header");
  }
  std::vector<ProfileRow> rows;
  rows.reserve(table.rows.size());
  for (const std::vector<std::string>& r : table.rows) {
    if (r.size() != 7) fail("malformed eigen-profile row");
    ProfileRow row;
    row.step = std::stoull(r[0]);
    row.channel = std::stoull(r[1]);
    row.patch = std::stoll(r[2]);
    row.log_abs_err = io::parse_double(r[3]);
    row.max_eig = io::parse_double(r[4]);
    row.trace = io::parse_double(r[5]);
    row.logdet = io::parse_double(r[6]);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fern::diag
