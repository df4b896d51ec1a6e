#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fern/csv.hpp"
#include "fern/dataio.hpp"
#include "fern/diagnostics.hpp"
#include "fern/experiment.hpp"
#include "fern/model.hpp"
#include "fern/rng.hpp"
#include "fern/version.hpp"

namespace xp = fern::experiment;
namespace io = fern::io;
namespace model = fern::model;
using xp::ExperimentSpec;
using xp::ModelKind;
using xp::Protocol;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path dir = temp_path(name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Single column of iid standard normal draws, written through the frame
// writer so runs exercise the real ingestion path.
std::filesystem::path noise_csv(const std::string& name, std::size_t rows,
                                std::uint64_t seed) {
  io::SeriesFrame frame;
  frame.columns = {"x0"};
  fern::num::Tensor values({rows, 1});
  fern::rng::Stream stream(seed);
  for (std::size_t i = 0; i < rows; ++i) values.at(i, 0) = stream.normal();
  frame.values = values;
  const std::filesystem::path path = temp_path(name);
  io::write_frame(frame, path);
  return path;
}

// Desk-scale spec over a small csv: context 12, one 8-step horizon, two
// seeds, two epochs.
ExperimentSpec desk_spec(const std::filesystem::path& csv, ModelKind kind,
                         const std::filesystem::path& out) {
  ExperimentSpec spec = ExperimentSpec::for_csv(csv, Protocol::kShock, kind);
  spec.model_config.context_len = 12;
  spec.model_config.patch = 4;
  spec.model_config.reflections = 2;
  spec.model_config.encoder_layers = 2;
  spec.model_config.decoder_steps = 1;
  spec.model_config.hidden = 6;
  spec.model_config.block_layers = {2};
  spec.split.context_len = 12;
  spec.horizons = {8};
  spec.seeds = {7, 9};
  spec.train_config.epochs = 2;
  spec.train_config.batch_size = 32;
  spec.train_config.grace = 0;
  spec.out_dir = out;
  return spec;
}

bool same_number(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool same_row(const xp::ResultRow& a, const xp::ResultRow& b) {
  return a.scenario == b.scenario && a.protocol == b.protocol &&
         a.model == b.model && a.horizon == b.horizon && a.seed == b.seed &&
         a.status == b.status && same_number(a.mse, b.mse) &&
         same_number(a.mse_se, b.mse_se) && same_number(a.mae, b.mae) &&
         same_number(a.mae_se, b.mae_se) && same_number(a.wd, b.wd) &&
         same_number(a.wd_se, b.wd_se) && same_number(a.swd, b.swd) &&
         same_number(a.swd_se, b.swd_se) && same_number(a.ept, b.ept) &&
         same_number(a.ept_se, b.ept_se) &&
         same_number(a.wall_seconds, b.wall_seconds) &&
         a.config_hash == b.config_hash && a.code_version == b.code_version;
}

}  // namespace

TEST_CASE("protocol defaults match the published setups") {
  CHECK_NOTHROW(xp::verify_protocol_defaults());

  const xp::ProtocolDefaults s = xp::protocol_defaults(Protocol::kShock);
  CHECK(s.split.train_ratio == 0.7);
  CHECK(s.split.val_ratio == 0.2);
  CHECK(s.split.test_ratio == 0.1);
  CHECK(s.split.context_len == 336);
  CHECK(s.train.batch_size == 95);
  CHECK(s.train.learning_rate == 3e-4);
  CHECK(s.train.grace == 3);
  CHECK(s.train.swd_projections == 0);
  CHECK(s.horizons == std::vector<std::size_t>{336});
  CHECK(s.seeds == std::vector<std::uint64_t>{7, 1955});

  const xp::ProtocolDefaults d = xp::protocol_defaults(Protocol::kDetailed);
  CHECK(d.split.train_ratio == 0.7);
  CHECK(d.split.val_ratio == 0.1);
  CHECK(d.split.test_ratio == 0.2);
  CHECK(d.train.batch_size == 128);
  CHECK(d.train.learning_rate == 9e-4);
  CHECK(d.train.grace == 0);
  CHECK(d.train.swd_projections == 500);
  CHECK(d.horizons == std::vector<std::size_t>{96, 192, 336, 720});
  CHECK(d.seeds == std::vector<std::uint64_t>{7, 1955, 2023, 4});
  CHECK(d.train.w_mse == 0.1);
  CHECK(d.train.w_mae == 1.0);
  CHECK(d.train.w_dist == 0.1);
}

TEST_CASE("protocol and model names round trip") {
  CHECK(xp::to_string(Protocol::kShock) == "shock");
  CHECK(xp::to_string(Protocol::kDetailed) == "detailed");
  CHECK(xp::protocol_from_string("shock") == Protocol::kShock);
  CHECK(xp::protocol_from_string("detailed") == Protocol::kDetailed);
  CHECK_THROWS_AS(xp::protocol_from_string("fast"), std::runtime_error);
  for (ModelKind m : {ModelKind::kFern, ModelKind::kMean,
                      ModelKind::kPersistence, ModelKind::kRidge}) {
    CHECK(xp::model_from_string(xp::to_string(m)) == m);
  }
  CHECK_THROWS_AS(xp::model_from_string("arima"), std::runtime_error);
}

TEST_CASE("scenario specs resolve premade ids and reject unknown ones") {
  const ExperimentSpec spec = ExperimentSpec::for_scenario(
      "LORENZ_BASE", Protocol::kShock, ModelKind::kFern);
  CHECK(spec.scenario == "LORENZ_BASE");
  CHECK(spec.dataset_name() == "LORENZ_BASE");
  CHECK(spec.model_config.context_len == 336);
  CHECK(spec.split.context_len == 336);
  CHECK_NOTHROW(spec.validate());

  try {
    ExperimentSpec::for_scenario("NOT_A_SCENARIO", Protocol::kShock,
                                 ModelKind::kFern);
    FAIL("unknown scenario accepted");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("LORENZ_BASE") != std::string::npos);
  }
}

TEST_CASE("spec validation rejects inconsistent sources and contexts") {
  const std::filesystem::path csv =
      noise_csv("xp_validate.csv", 200, 3);
  ExperimentSpec spec =
      ExperimentSpec::for_csv(csv, Protocol::kShock, ModelKind::kMean);
  spec.horizons = {8};
  spec.model_config.context_len = 12;
  spec.split.context_len = 12;
  CHECK_NOTHROW(spec.validate());

  ExperimentSpec both = spec;
  both.scenario = "LORENZ_BASE";
  CHECK_THROWS_AS(both.validate(), std::runtime_error);

  ExperimentSpec neither = spec;
  neither.csv.clear();
  CHECK_THROWS_AS(neither.validate(), std::runtime_error);

  ExperimentSpec skew = spec;
  skew.split.context_len = 24;
  CHECK_THROWS_AS(skew.validate(), std::runtime_error);

  ExperimentSpec no_seeds = spec;
  no_seeds.seeds.clear();
  CHECK_THROWS_AS(no_seeds.validate(), std::runtime_error);

  ExperimentSpec no_horizons = spec;
  no_horizons.horizons.clear();
  CHECK_THROWS_AS(no_horizons.validate(), std::runtime_error);
}

TEST_CASE("environment variables override seeds and output directory") {
  const std::filesystem::path csv = noise_csv("xp_env.csv", 200, 4);
  ExperimentSpec spec =
      ExperimentSpec::for_csv(csv, Protocol::kShock, ModelKind::kMean);

  setenv("FERN_SEED", "11,22,33", 1);
  setenv("FERN_OUT", "/tmp/fern_env_out", 1);
  xp::apply_env_overrides(spec);
  unsetenv("FERN_SEED");
  unsetenv("FERN_OUT");
  CHECK(spec.seeds == std::vector<std::uint64_t>{11, 22, 33});
  CHECK(spec.out_dir == std::filesystem::path("/tmp/fern_env_out"));
  REQUIRE(spec.overrides.size() == 2);
  CHECK(spec.overrides[0] == "FERN_SEED=11,22,33");
  CHECK(spec.overrides[1] == "FERN_OUT=/tmp/fern_env_out");

  setenv("FERN_SEED", "seven", 1);
  CHECK_THROWS_AS(xp::apply_env_overrides(spec), std::runtime_error);
  unsetenv("FERN_SEED");

  ExperimentSpec untouched =
      ExperimentSpec::for_csv(csv, Protocol::kShock, ModelKind::kMean);
  xp::apply_env_overrides(untouched);
  CHECK(untouched.seeds == std::vector<std::uint64_t>{7, 1955});
  CHECK(untouched.overrides.empty());
}

TEST_CASE("results csv round trips NaN cells and quoted statuses") {
  const std::filesystem::path path = temp_path("xp_results_roundtrip.csv");
  std::filesystem::remove(path);

  xp::ResultRow run;
  run.scenario = "OU_BASE";
  run.protocol = "shock";
  run.model = "fern";
  run.horizon = 336;
  run.seed = "7";
  run.status = "ok";
  run.mse = 0.125;
  run.mse_se = std::nan("");
  run.mae = 0.25;
  run.mae_se = std::nan("");
  run.wd = 0.0625;
  run.wd_se = std::nan("");
  run.swd = std::nan("");
  run.swd_se = std::nan("");
  run.ept = 17.5;
  run.ept_se = std::nan("");
  run.wall_seconds = 1.75;
  run.config_hash = "0123456789abcdef";
  run.code_version = "0.1.0";

  xp::ResultRow failed = run;
  failed.seed = "9";
  failed.status = "failed: boom, with \"comma\"";
  failed.mse = failed.mae = failed.wd = failed.ept = std::nan("");
  failed.wall_seconds = std::nan("");

  const std::vector<xp::ResultRow> rows = {run, failed};
  xp::append_results_csv(path, rows);
  const std::vector<xp::ResultRow> back = xp::read_results_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(same_row(back[0], run));
  CHECK(same_row(back[1], failed));

  xp::append_results_csv(path, {&run, 1});
  CHECK(xp::read_results_csv(path).size() == 3);
}

TEST_CASE("mean baseline run produces per-seed rows plus one aggregate") {
  const std::filesystem::path csv = noise_csv("xp_mean.csv", 2000, 11);
  const std::filesystem::path out = fresh_dir("xp_mean_out");
  const ExperimentSpec spec = desk_spec(csv, ModelKind::kMean, out);

  const std::vector<xp::ResultRow> rows = xp::run(spec);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].seed == "7");
  CHECK(rows[1].seed == "9");
  CHECK(rows[2].seed == "mean");
  for (const xp::ResultRow& r : rows) {
    CHECK(r.status == "ok");
    CHECK(r.scenario == "xp_mean");
    CHECK(r.protocol == "shock");
    CHECK(r.model == "mean");
    CHECK(r.horizon == 8);
    CHECK(r.code_version == fern::kVersion);
    CHECK(r.config_hash.size() == 16);
  }

  // The baseline ignores the seed, so both rows agree and the dispersion
  // across seeds is exactly zero.
  CHECK(rows[0].mse == rows[1].mse);
  CHECK(rows[2].mse == rows[0].mse);
  CHECK(rows[2].mse_se == 0.0);
  CHECK(std::isnan(rows[0].mse_se));

  // Standardized iid noise: predicting the mean scores an MSE near the
  // unit variance.
  CHECK(rows[2].mse == doctest::Approx(1.0).epsilon(0.2));

  // The shock protocol evaluates the unprojected distance, so the sliced
  // column stays empty.
  CHECK(std::isnan(rows[2].swd));
  CHECK(rows[2].wd > 0.0);

  const std::vector<xp::ResultRow> back =
      xp::read_results_csv(out / "results.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CAPTURE(i);
    // Wall time is measured inside run(), so compare everything else.
    xp::ResultRow a = back[i];
    xp::ResultRow b = rows[i];
    a.wall_seconds = b.wall_seconds = 0.0;
    CHECK(same_row(a, b));
  }
}

TEST_CASE("fern run writes checkpoints, run records, and identical reruns") {
  const std::filesystem::path csv = noise_csv("xp_fern.csv", 400, 12);
  const std::filesystem::path out = fresh_dir("xp_fern_out");
  const ExperimentSpec spec = desk_spec(csv, ModelKind::kFern, out);

  const std::vector<xp::ResultRow> rows = xp::run(spec);
  REQUIRE(rows.size() == 3);
  for (const xp::ResultRow& r : rows) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.mse));
    CHECK(std::isfinite(r.mae));
    CHECK(std::isfinite(r.wd));
    CHECK(r.ept >= 1.0);
    CHECK(r.ept <= 8.0);
  }
  CHECK(rows[0].config_hash == rows[1].config_hash);
  CHECK(rows[2].mse == (rows[0].mse + rows[1].mse) / 2.0);

  const std::filesystem::path ckpt =
      out / "runs" / "xp_fern_fern_h8_s7.ckpt";
  const std::filesystem::path record =
      out / "runs" / "xp_fern_fern_h8_s7.json";
  REQUIRE(std::filesystem::exists(ckpt));
  REQUIRE(std::filesystem::exists(record));

  const model::Checkpoint loaded = model::load_checkpoint(ckpt);
  CHECK(loaded.config.context_len == 12);
  CHECK(loaded.config.horizon == 8);
  CHECK(loaded.config.hidden == 6);

  std::ifstream in(record);
  nlohmann::json j;
  in >> j;
  CHECK(j["dataset"] == "xp_fern");
  CHECK(j["model"] == "fern");
  CHECK(j["horizon"] == 8);
  REQUIRE_FALSE(j["record"]["test"].is_null());
  CHECK(j["record"]["test"]["mse"].is_number());
  CHECK(j["record"]["seed"] == 7);
  CHECK(j["model_config"]["hidden"] == 6);

  const std::filesystem::path out2 = fresh_dir("xp_fern_out2");
  ExperimentSpec again = spec;
  again.out_dir = out2;
  const std::vector<xp::ResultRow> rerun = xp::run(again);
  REQUIRE(rerun.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(i);
    CHECK(rows[i].mse == rerun[i].mse);
    CHECK(rows[i].mae == rerun[i].mae);
    CHECK(rows[i].wd == rerun[i].wd);
    CHECK(rows[i].ept == rerun[i].ept);
    CHECK(rows[i].config_hash == rerun[i].config_hash);
  }
}

TEST_CASE("ridge and persistence baselines run under the detailed protocol") {
  const std::filesystem::path csv = noise_csv("xp_detail.csv", 1200, 13);
  const std::filesystem::path out = fresh_dir("xp_detail_out");
  ExperimentSpec spec = desk_spec(csv, ModelKind::kRidge, out);
  spec.protocol = Protocol::kDetailed;
  spec.train_config.swd_projections = 16;
  spec.horizons = {8, 4};
  spec.seeds = {7};

  const std::vector<xp::ResultRow> rows = xp::run(spec);
  REQUIRE(rows.size() == 4);  // (1 run + 1 aggregate) per horizon
  CHECK(rows[0].horizon == 8);
  CHECK(rows[1].horizon == 8);
  CHECK(rows[1].seed == "mean");
  CHECK(rows[2].horizon == 4);
  CHECK(rows[3].seed == "mean");
  for (const xp::ResultRow& r : rows) {
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.swd));  // projections enabled here
  }

  ExperimentSpec pers = spec;
  pers.model = ModelKind::kPersistence;
  pers.out_dir = fresh_dir("xp_detail_pers");
  const std::vector<xp::ResultRow> prows = xp::run(pers);
  REQUIRE(prows.size() == 4);
  CHECK(prows[0].model == "persistence");
  CHECK(std::isfinite(prows[0].mse));
}

TEST_CASE("a failing horizon is flushed with a failure marker") {
  const std::filesystem::path csv = noise_csv("xp_fail.csv", 400, 14);
  const std::filesystem::path out = fresh_dir("xp_fail_out");
  ExperimentSpec spec = desk_spec(csv, ModelKind::kMean, out);
  spec.horizons = {8, 100000};  // second horizon cannot be windowed

  CHECK_THROWS_AS(xp::run(spec), std::exception);

  const std::vector<xp::ResultRow> rows =
      xp::read_results_csv(out / "results.csv");
  REQUIRE(rows.size() == 4);  // two runs, one aggregate, one marker
  CHECK(rows[0].status == "ok");
  CHECK(rows[1].status == "ok");
  CHECK(rows[2].seed == "mean");
  CHECK(rows[3].horizon == 100000);
  CHECK(rows[3].seed == "-");
  CHECK(rows[3].status.rfind("failed: ", 0) == 0);
  CHECK(std::isnan(rows[3].mse));
}

TEST_CASE("ablation grid expands flags and rejects bad combinations") {
  model::FernConfig base;
  base.context_len = 12;
  base.horizon = 24;
  base.patch = 24;
  base.reflections = 2;
  base.hidden = 8;
  base.encoder_layers = 2;
  base.decoder_steps = 1;
  base.block_layers = {2};

  const std::vector<std::string> items = {"no_rotation", "reflections=8",
                                          "patch=8", "hidden=4",
                                          "only_encoder"};
  const std::vector<xp::AblationVariant> grid =
      xp::ablation_grid(base, items);
  REQUIRE(grid.size() == 5);
  CHECK(grid[0].name == "no_rotation");
  CHECK(grid[0].config.no_rotation);
  CHECK(grid[1].config.reflections == 8);
  CHECK(grid[2].config.patch == 8);
  CHECK(grid[3].config.hidden == 4);
  CHECK(grid[4].config.only_encoder);

  CHECK_THROWS_AS(
      xp::ablation_grid(base, std::vector<std::string>{"dropout=0.5"}),
      std::runtime_error);
  CHECK_THROWS_AS(
      xp::ablation_grid(base, std::vector<std::string>{"reflections=3"}),
      std::exception);

  // A single full-horizon patch cannot host more reflections than it has
  // dimensions.
  model::FernConfig wide = base;
  wide.reflections = 40;
  CHECK_THROWS_AS(
      xp::ablation_grid(wide, std::vector<std::string>{"no_patch"}),
      std::exception);
}

TEST_CASE("ablation rows count reflection work in exact proportion") {
  const std::filesystem::path csv = noise_csv("xp_ablate.csv", 500, 15);
  const std::filesystem::path out = fresh_dir("xp_ablate_out");
  ExperimentSpec spec = desk_spec(csv, ModelKind::kFern, out);
  spec.model_config.patch = 24;
  spec.model_config.reflections = 2;
  spec.model_config.hidden = 8;
  spec.horizons = {24};
  spec.seeds = {7};
  spec.train_config.epochs = 1;

  const std::vector<std::string> grid = {"reflections=8", "reflections=24",
                                         "no_rotation"};
  const std::vector<xp::AblationRow> rows = xp::ablate(spec, grid);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].variant == "base");
  CHECK(rows[1].variant == "reflections=8");
  CHECK(rows[2].variant == "reflections=24");
  CHECK(rows[3].variant == "no_rotation");

  // base runs R=2; the counted multiply-adds scale exactly with R.
  REQUIRE(rows[0].reflection_madds > 0);
  CHECK(rows[1].reflection_madds == 4 * rows[0].reflection_madds);
  CHECK(rows[2].reflection_madds == 12 * rows[0].reflection_madds);
  CHECK(rows[3].reflection_madds == 0);

  for (const xp::AblationRow& r : rows) {
    CHECK(r.horizon == 24);
    CHECK(r.seeds == "7");
    CHECK(std::isfinite(r.mse));
    CHECK(std::isfinite(r.mae));
    CHECK(std::isfinite(r.wd));
    CHECK(r.ept >= 1.0);
    CHECK(r.wall_seconds > 0.0);
    CHECK(r.config_hash.size() == 16);
  }
  CHECK(rows[0].config_hash != rows[1].config_hash);

  REQUIRE(std::filesystem::exists(out / "ablation.csv"));
  const io::CsvTable table = fern::io::read_csv(out / "ablation.csv");
  REQUIRE(table.rows.size() == 4);
  CHECK(table.header.front() == "variant");
  CHECK(table.rows[2][0] == "reflections=24");

  ExperimentSpec bad = spec;
  bad.model = ModelKind::kMean;
  CHECK_THROWS_AS(xp::ablate(bad, grid), std::runtime_error);
}

TEST_CASE("diagnose writes an eigenvalue profile aligned with test error") {
  const std::filesystem::path csv = noise_csv("xp_diag.csv", 400, 16);
  const std::filesystem::path out = fresh_dir("xp_diag_out");
  ExperimentSpec spec = desk_spec(csv, ModelKind::kFern, out);
  spec.seeds = {7};
  spec.train_config.epochs = 1;
  spec.train_config.batch_size = 8;  // forces several capture chunks

  const xp::DiagnoseResult result = xp::diagnose(spec);
  CHECK(result.patches == 2);  // horizon 8, patch 4
  CHECK(result.windows > 8);   // more windows than one chunk
  REQUIRE(std::filesystem::exists(result.profile_csv));

  const std::vector<fern::diag::ProfileRow> rows =
      fern::diag::read_profile_csv(result.profile_csv);
  REQUIRE(rows.size() == result.windows * (result.patches + 1));

  // Rows come out window by window: the per-patch lines then the mean
  // line, all sharing the window's error column.
  double err_sum = 0.0;
  for (std::size_t b = 0; b < result.windows; ++b) {
    const auto* first = &rows[b * (result.patches + 1)];
    CHECK(first[0].patch == 0);
    CHECK(first[1].patch == 1);
    CHECK(first[2].patch == -1);
    CHECK(first[0].log_abs_err == first[2].log_abs_err);
    CHECK(first[2].trace ==
          doctest::Approx((first[0].trace + first[1].trace) / 2.0)
              .epsilon(1e-12));
    for (int k = 0; k < 3; ++k) {
      CHECK(std::isfinite(first[k].max_eig));
      CHECK(first[k].max_eig > 0.0);
    }
    err_sum += std::exp(first[0].log_abs_err);
  }

  // The profile's error column is the per-window mean absolute error, so
  // its average reproduces the test MAE.
  CHECK(err_sum / static_cast<double>(result.windows) ==
        doctest::Approx(result.test.mae).epsilon(1e-9));

  ExperimentSpec bad = spec;
  bad.model = ModelKind::kPersistence;
  CHECK_THROWS_AS(xp::diagnose(bad), std::runtime_error);
}

TEST_CASE("generate writes a deterministic trajectory and sidecar") {
  const std::filesystem::path out = fresh_dir("xp_generate_out");
  const xp::GenerateResult r = xp::generate("LORENZ_BASE", out);
  CHECK(r.dim == 3);
  CHECK(r.steps == 35999);
  CHECK(r.shock_index == -1);
  REQUIRE(std::filesystem::exists(r.csv));
  REQUIRE(std::filesystem::exists(r.sidecar));

  const io::SeriesFrame frame = io::read_frame(r.csv);
  CHECK(frame.rows() == 35999);
  CHECK(frame.cols() == 3);

  std::ifstream in(r.sidecar);
  nlohmann::json j;
  in >> j;
  CHECK(j["scenario"] == "LORENZ_BASE");

  const xp::GenerateResult shocked = xp::generate("OU_PARAM", out);
  CHECK(shocked.shock_index > 0);

  CHECK_THROWS_AS(xp::generate("NOT_A_SCENARIO", out),
                  std::runtime_error);
}

TEST_CASE("inspect reports zero patterns without touching the input") {
  const std::filesystem::path out = fresh_dir("xp_inspect_out");

  io::SeriesFrame frame;
  frame.columns = {"a", "b"};
  fern::num::Tensor values({40, 2});
  for (std::size_t i = 0; i < 40; ++i) {
    values.at(i, 0) = 1.0 + static_cast<double>(i);
    values.at(i, 1) = (i >= 10 && i < 15) ? 0.0 : 2.0;
  }
  frame.values = values;
  const std::filesystem::path csv = temp_path("xp_inspect.csv");
  io::write_frame(frame, csv);
  const auto before = std::filesystem::last_write_time(csv);
  const auto size_before = std::filesystem::file_size(csv);

  const xp::InspectResult dry = xp::inspect(csv, {.minutes_per_row = 15.0},
                                            false, out);
  CHECK(dry.report.rows == 40);
  REQUIRE(dry.report.columns.size() == 2);
  CHECK(dry.report.columns[0].total == 0);
  CHECK(dry.report.columns[1].total == 5);
  CHECK(dry.report.columns[1].clustered == 5);
  CHECK_FALSE(dry.actions.empty());
  CHECK_FALSE(dry.processed.has_value());
  CHECK(std::filesystem::last_write_time(csv) == before);
  CHECK(std::filesystem::file_size(csv) == size_before);

  const xp::InspectResult applied =
      xp::inspect(csv, {.minutes_per_row = 15.0}, true, out);
  REQUIRE(applied.processed.has_value());
  REQUIRE(applied.action_log.has_value());
  REQUIRE(std::filesystem::exists(*applied.processed));
  REQUIRE(std::filesystem::exists(*applied.action_log));
  const io::SeriesFrame cleaned = io::read_frame(*applied.processed);
  CHECK(cleaned.cols() == 2);

  // A clean frame reports nothing and the policy has nothing to do.
  io::SeriesFrame clean;
  clean.columns = {"a"};
  fern::num::Tensor cv({10, 1});
  for (std::size_t i = 0; i < 10; ++i) cv.at(i, 0) = 1.0;
  clean.values = cv;
  const std::filesystem::path clean_csv = temp_path("xp_inspect_clean.csv");
  io::write_frame(clean, clean_csv);
  const xp::InspectResult quiet =
      xp::inspect(clean_csv, {.minutes_per_row = 15.0}, false, out);
  CHECK(quiet.report.columns[0].total == 0);
  CHECK(quiet.actions.empty());
}
