#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fern/dataio.hpp"
#include "fern/diagnostics.hpp"
#include "fern/generators.hpp"
#include "fern/model.hpp"
#include "fern/training.hpp"

namespace fern::experiment {

// The two published evaluation protocols. Shock runs 70/20/10 splits,
// batch 95, lr 3e-4, grace 3, the unprojected transport distance, one
// 336-step horizon, and seeds {7, 1955}. Detailed runs 70/10/20 splits,
// batch 128, lr 9e-4, grace 0, the 500-projection sliced distance,
// horizons {96, 192, 336, 720}, and seeds {7, 1955, 2023, 4}.
enum class Protocol { kShock, kDetailed };

enum class ModelKind { kFern, kMean, kPersistence, kRidge };

std::string to_string(Protocol p);
std::string to_string(ModelKind m);
Protocol protocol_from_string(std::string_view s);
ModelKind model_from_string(std::string_view s);

struct ProtocolDefaults {
  io::SplitSpec split;
  train::TrainConfig train;
  std::vector<std::size_t> horizons;
  std::vector<std::uint64_t> seeds;
};

ProtocolDefaults protocol_defaults(Protocol protocol);

// Self-test of the compiled-in protocol constants; throws std::logic_error
// as soon as any default drifts from the published numbers above.
void verify_protocol_defaults();

// One experiment: a data source, a protocol, a model, and the resolved
// configuration. make_* fills every field from the protocol defaults;
// callers then adjust fields directly and note what they changed in
// `overrides` so run logs show the deviation.
struct ExperimentSpec {
  std::string scenario;            // premade scenario id ("" for csv data)
  std::filesystem::path csv;       // raw series path ("" for scenarios)
  std::string timestamp_column;    // csv column carried through unparsed
  Protocol protocol = Protocol::kShock;
  ModelKind model = ModelKind::kFern;
  model::FernConfig model_config;  // horizon is rewritten per run
  train::TrainConfig train_config;
  io::SplitSpec split;             // horizon is rewritten per run
  std::vector<std::size_t> horizons;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir = ".";
  std::vector<std::string> overrides;

  static ExperimentSpec for_scenario(const std::string& id,
                                     Protocol protocol, ModelKind model);
  static ExperimentSpec for_csv(const std::filesystem::path& path,
                                Protocol protocol, ModelKind model);

  // Scenario id, or the csv stem when reading a file.
  std::string dataset_name() const;
  void validate() const;
};

// FERN_SEED ("7,1955") replaces the seed list and FERN_OUT the output
// directory; both are recorded in spec.overrides.
void apply_env_overrides(ExperimentSpec& spec);

// One line of the results table. Per-run rows carry the seed number and
// NaN standard errors; the per-horizon aggregate row carries seed "mean"
// and the standard error of each metric across seeds.
struct ResultRow {
  std::string scenario;
  std::string protocol;
  std::string model;
  std::size_t horizon = 0;
  std::string seed;
  std::string status;  // "ok" or "failed: <reason>"
  double mse = 0.0;
  double mse_se = 0.0;
  double mae = 0.0;
  double mae_se = 0.0;
  double wd = 0.0;
  double wd_se = 0.0;
  double swd = 0.0;
  double swd_se = 0.0;
  double ept = 0.0;
  double ept_se = 0.0;
  double wall_seconds = 0.0;
  std::string config_hash;
  std::string code_version;
};

// Appends rows to a results table, writing the header first when the file
// does not exist yet. NaN cells are stored empty and read back as NaN.
void append_results_csv(const std::filesystem::path& path,
                        std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

// Runs every (seed x horizon) cell of the spec, flushing each row to
// out_dir/results.csv as soon as it exists and appending one seed-averaged
// row per horizon. Fern runs also leave a checkpoint and a JSON run record
// under out_dir/runs/. A failed run is flushed with a failure marker before
// the error is rethrown.
std::vector<ResultRow> run(const ExperimentSpec& spec);

// A named configuration variant for the ablation table.
struct AblationVariant {
  std::string name;
  model::FernConfig config;
};

// Expands grid items into validated variants on top of `base`. Items:
// no_rotation, no_patch, only_encoder, no_encoder_no_mu, reflections=N,
// patch=N, hidden=N. The base row itself is not included.
std::vector<AblationVariant> ablation_grid(
    const model::FernConfig& base, std::span<const std::string> items);

struct AblationRow {
  std::string variant;
  std::size_t horizon = 0;
  std::string seeds;  // run seeds joined with ';'
  double mse = 0.0;
  double mae = 0.0;
  double wd = 0.0;
  double ept = 0.0;
  double wall_seconds = 0.0;
  // Counted reflection multiply-adds of one test-split evaluation.
  std::uint64_t reflection_madds = 0;
  std::string config_hash;
  std::string code_version;
};

void write_ablation_csv(const std::filesystem::path& path,
                        std::span<const AblationRow> rows);

// Trains the base configuration plus every grid variant at the first
// horizon, averaging metrics over the spec's seeds, and writes
// out_dir/ablation.csv. The base row comes first.
std::vector<AblationRow> ablate(const ExperimentSpec& spec,
                                std::span<const std::string> grid);

struct DiagnoseResult {
  std::filesystem::path profile_csv;
  std::size_t windows = 0;
  std::size_t patches = 0;
  std::size_t fallback_count = 0;
  metrics::MetricReport test;
};

// Trains the spec's first (seed, horizon) cell, captures the per-patch
// transport factors over the test split, and writes the eigenvalue profile
// against per-window absolute error to out_dir/eigenprofile.csv. Requires
// model == kFern.
DiagnoseResult diagnose(const ExperimentSpec& spec);

struct GenerateResult {
  std::filesystem::path csv;
  std::filesystem::path sidecar;
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::int64_t shock_index = -1;
};

// Simulates a premade scenario and writes <id>.csv plus <id>.json under
// out_dir.
GenerateResult generate(const std::string& scenario_id,
                        const std::filesystem::path& out_dir);

struct InspectResult {
  io::ZeroReport report;
  std::vector<io::PolicyAction> actions;
  std::optional<std::filesystem::path> processed;
  std::optional<std::filesystem::path> action_log;
};

// Reports zero patterns and the actions the cleanup policy would take.
// With apply set, also writes <stem>_processed.csv and <stem>_policy.json
// under out_dir; without it the input is never touched.
InspectResult inspect(const std::filesystem::path& csv_path,
                      const io::PolicySpec& policy, bool apply,
                      const std::filesystem::path& out_dir,
                      const std::string& timestamp_column = "");

}  // namespace fern::experiment
