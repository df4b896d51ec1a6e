#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fern/experiment.hpp"
#include "fern/version.hpp"

namespace xp = fern::experiment;

namespace {

struct DataArgs {
  std::string scenario;
  std::string csv;
  std::string timestamp_column;
};

struct ModelArgs {
  std::string protocol = "shock";
  std::string model = "fern";
  std::string seeds;
  std::vector<std::size_t> horizons;
  std::size_t context = 0;
  std::size_t patch = 0;
  std::size_t reflections = 0;
  std::size_t hidden = 0;
  std::size_t epochs = 0;
  std::size_t batch = 0;
  double learning_rate = 0.0;
  long grace = -1;
  bool no_rotation = false;
  bool no_patch = false;
  bool only_encoder = false;
};

void add_data_options(CLI::App& cmd, DataArgs& args) {
  auto* scenario =
      cmd.add_option("--scenario", args.scenario, "Premade scenario id");
  auto* csv = cmd.add_option("--csv", args.csv, "Raw series csv path");
  scenario->excludes(csv);
  cmd.add_option("--timestamp-column", args.timestamp_column,
                 "Csv column carried through unparsed");
}

void add_model_options(CLI::App& cmd, ModelArgs& args) {
  cmd.add_option("--protocol", args.protocol,
                 "Evaluation protocol: shock or detailed")
      ->check(CLI::IsMember({"shock", "detailed"}));
  cmd.add_option("--model", args.model,
                 "Forecaster: fern, mean, persistence, or ridge")
      ->check(CLI::IsMember({"fern", "mean", "persistence", "ridge"}));
  cmd.add_option("--seeds", args.seeds, "Comma-separated run seeds");
  cmd.add_option("--horizon", args.horizons,
                 "Forecast horizon; repeat to run several");
  cmd.add_option("--context", args.context, "Context window length");
  cmd.add_option("--patch", args.patch, "Output patch size");
  cmd.add_option("--reflections", args.reflections,
                 "Householder reflections per patch");
  cmd.add_option("--hidden", args.hidden, "Encoder feature width");
  cmd.add_option("--epochs", args.epochs, "Training epoch budget");
  cmd.add_option("--batch", args.batch, "Mini-batch size");
  cmd.add_option("--lr", args.learning_rate, "Learning rate");
  cmd.add_option("--grace", args.grace,
                 "Epochs exempt from checkpoint selection");
  cmd.add_flag("--no-rotation", args.no_rotation,
               "Drop the rotation factor");
  cmd.add_flag("--no-patch", args.no_patch,
               "Treat the horizon as one patch");
  cmd.add_flag("--only-encoder", args.only_encoder,
               "Drop the shift decoder");
}

xp::ExperimentSpec build_spec(const CLI::App& cmd, const DataArgs& data,
                              const ModelArgs& args,
                              const std::string& out_dir) {
  const xp::Protocol protocol = xp::protocol_from_string(args.protocol);
  const xp::ModelKind model = xp::model_from_string(args.model);
  if (data.scenario.empty() && data.csv.empty()) {
    throw CLI::ValidationError("data source",
                               "pass --scenario or --csv");
  }
  xp::ExperimentSpec spec =
      data.scenario.empty()
          ? xp::ExperimentSpec::for_csv(data.csv, protocol, model)
          : xp::ExperimentSpec::for_scenario(data.scenario, protocol,
                                             model);
  spec.timestamp_column = data.timestamp_column;
  spec.out_dir = out_dir;

  const auto note = [&spec](const std::string& text) {
    spec.overrides.push_back(text);
  };
  if (cmd.count("--seeds")) {
    spec.seeds.clear();
    std::string token;
    std::istringstream in(args.seeds);
    while (std::getline(in, token, ',')) {
      if (!token.empty()) spec.seeds.push_back(std::stoull(token));
    }
    note("seeds=" + args.seeds);
  }
  if (cmd.count("--horizon")) {
    spec.horizons = args.horizons;
    std::string joined;
    for (std::size_t h : args.horizons) {
      if (!joined.empty()) joined += ',';
      joined += std::to_string(h);
    }
    note("horizon=" + joined);
  }
  if (cmd.count("--context")) {
    spec.model_config.context_len = args.context;
    spec.split.context_len = args.context;
    note("context=" + std::to_string(args.context));
  }
  if (cmd.count("--patch")) {
    spec.model_config.patch = args.patch;
    note("patch=" + std::to_string(args.patch));
  }
  if (cmd.count("--reflections")) {
    spec.model_config.reflections = args.reflections;
    note("reflections=" + std::to_string(args.reflections));
  }
  if (cmd.count("--hidden")) {
    spec.model_config.hidden = args.hidden;
    note("hidden=" + std::to_string(args.hidden));
  }
  if (cmd.count("--epochs")) {
    spec.train_config.epochs = args.epochs;
    note("epochs=" + std::to_string(args.epochs));
  }
  if (cmd.count("--batch")) {
    spec.train_config.batch_size = args.batch;
    note("batch=" + std::to_string(args.batch));
  }
  if (cmd.count("--lr")) {
    spec.train_config.learning_rate = args.learning_rate;
    note("lr=" + std::to_string(args.learning_rate));
  }
  if (args.grace >= 0) {
    spec.train_config.grace = static_cast<std::size_t>(args.grace);
    note("grace=" + std::to_string(args.grace));
  }
  if (args.no_rotation) {
    spec.model_config.no_rotation = true;
    note("no_rotation");
  }
  if (args.no_patch) {
    spec.model_config.no_patch = true;
    note("no_patch");
  }
  if (args.only_encoder) {
    spec.model_config.only_encoder = true;
    note("only_encoder");
  }
  xp::apply_env_overrides(spec);
  return spec;
}

std::string metric_cell(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void print_result_rows(const std::vector<xp::ResultRow>& rows) {
  std::printf("%-14s %-12s %-8s %7s %6s %10s %10s %10s %10s %8s\n",
              "scenario", "model", "seed", "horizon", "status", "mse",
              "mae", "wd", "swd", "ept");
  for (const xp::ResultRow& r : rows) {
    std::printf("%-14s %-12s %-8s %7zu %6s %10s %10s %10s %10s %8s\n",
                r.scenario.c_str(), r.model.c_str(), r.seed.c_str(),
                r.horizon, r.status == "ok" ? "ok" : "FAIL",
                metric_cell(r.mse).c_str(), metric_cell(r.mae).c_str(),
                metric_cell(r.wd).c_str(), metric_cell(r.swd).c_str(),
                metric_cell(r.ept).c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fern ellipsoidal forecaster and shock benchmark runner"};
  app.set_version_flag("--version", fern::kVersion);
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Simulate a premade scenario to csv plus sidecar");
  std::string gen_scenario;
  std::string gen_out = ".";
  generate->add_option("--scenario", gen_scenario, "Premade scenario id")
      ->required();
  generate->add_option("--out", gen_out, "Output directory");

  // inspect
  auto* inspect = app.add_subcommand(
      "inspect", "Report zero patterns and dry-run the cleanup policy");
  std::string ins_csv;
  std::string ins_out = ".";
  std::string ins_timestamp;
  double ins_minutes = 0.0;
  std::vector<double> ins_sentinels;
  bool ins_apply = false;
  inspect->add_option("csv", ins_csv, "Series csv to inspect")->required();
  inspect->add_option("--out", ins_out, "Output directory for --apply");
  inspect->add_option("--timestamp-column", ins_timestamp,
                      "Csv column carried through unparsed");
  inspect->add_option("--minutes-per-row", ins_minutes,
                      "Sampling interval in minutes");
  inspect->add_option("--sentinel", ins_sentinels,
                      "Sentinel value; repeatable");
  inspect->add_flag("--apply", ins_apply,
                    "Write the processed csv and action log");

  // run
  auto* run = app.add_subcommand(
      "run", "Train and evaluate every (seed x horizon) cell");
  DataArgs run_data;
  ModelArgs run_model;
  std::string run_out = ".";
  add_data_options(*run, run_data);
  add_model_options(*run, run_model);
  run->add_option("--out", run_out, "Output directory");

  // ablate
  auto* ablate = app.add_subcommand(
      "ablate", "Compare configuration variants against the base model");
  DataArgs abl_data;
  ModelArgs abl_model;
  std::string abl_out = ".";
  std::vector<std::string> abl_grid;
  add_data_options(*ablate, abl_data);
  add_model_options(*ablate, abl_model);
  ablate->add_option("--out", abl_out, "Output directory");
  ablate->add_option("--grid", abl_grid,
                     "Variant such as reflections=2 or no_rotation; "
                     "repeatable");

  // diagnose
  auto* diagnose = app.add_subcommand(
      "diagnose", "Export the per-patch eigenvalue profile over the test "
                  "split");
  DataArgs dia_data;
  ModelArgs dia_model;
  std::string dia_out = ".";
  add_data_options(*diagnose, dia_data);
  add_model_options(*diagnose, dia_model);
  diagnose->add_option("--out", dia_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    xp::verify_protocol_defaults();
    if (generate->parsed()) {
      const xp::GenerateResult r = xp::generate(gen_scenario, gen_out);
      std::printf("wrote %s (%zu rows x %zu columns)\n",
                  r.csv.string().c_str(), r.steps, r.dim);
      std::printf("wrote %s\n", r.sidecar.string().c_str());
      if (r.shock_index >= 0) {
        std::printf("shock at row %lld\n",
                    static_cast<long long>(r.shock_index));
      }
    } else if (inspect->parsed()) {
      fern::io::PolicySpec policy;
      policy.sentinels = ins_sentinels;
      policy.minutes_per_row = ins_minutes;
      const xp::InspectResult r =
          xp::inspect(ins_csv, policy, ins_apply, ins_out, ins_timestamp);
      std::printf("%s\n", r.report.to_json().c_str());
      if (r.actions.empty()) {
        std::printf("policy: no actions\n");
      }
      for (const fern::io::PolicyAction& a : r.actions) {
        std::printf("policy: %s %s (%zu)\n",
                    a.column.empty() ? "<frame>" : a.column.c_str(),
                    a.rule.c_str(), a.count);
      }
      if (r.processed) {
        std::printf("wrote %s\n", r.processed->string().c_str());
        std::printf("wrote %s\n", r.action_log->string().c_str());
      }
    } else if (run->parsed()) {
      const xp::ExperimentSpec spec =
          build_spec(*run, run_data, run_model, run_out);
      const std::vector<xp::ResultRow> rows = xp::run(spec);
      print_result_rows(rows);
      std::printf("wrote %s\n",
                  (spec.out_dir / "results.csv").string().c_str());
    } else if (ablate->parsed()) {
      const xp::ExperimentSpec spec =
          build_spec(*ablate, abl_data, abl_model, abl_out);
      const std::vector<xp::AblationRow> rows = xp::ablate(spec, abl_grid);
      std::printf("%-16s %7s %10s %10s %10s %8s %9s %14s\n", "variant",
                  "horizon", "mse", "mae", "wd", "ept", "wall_s",
                  "refl_madds");
      for (const xp::AblationRow& r : rows) {
        std::printf("%-16s %7zu %10s %10s %10s %8s %9.3f %14llu\n",
                    r.variant.c_str(), r.horizon,
                    metric_cell(r.mse).c_str(), metric_cell(r.mae).c_str(),
                    metric_cell(r.wd).c_str(), metric_cell(r.ept).c_str(),
                    r.wall_seconds,
                    static_cast<unsigned long long>(r.reflection_madds));
      }
      std::printf("wrote %s\n",
                  (spec.out_dir / "ablation.csv").string().c_str());
    } else if (diagnose->parsed()) {
      const xp::ExperimentSpec spec =
          build_spec(*diagnose, dia_data, dia_model, dia_out);
      const xp::DiagnoseResult r = xp::diagnose(spec);
      std::printf("wrote %s (%zu windows x %zu patches, %zu fallbacks)\n",
                  r.profile_csv.string().c_str(), r.windows, r.patches,
                  r.fallback_count);
      std::printf("test mse %s mae %s wd %s ept %s\n",
                  metric_cell(r.test.mse).c_str(),
                  metric_cell(r.test.mae).c_str(),
                  metric_cell(r.test.wd).c_str(),
                  metric_cell(r.test.ept).c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
