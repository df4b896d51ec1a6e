#include "fern/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "fern/csv.hpp"
#include "fern/metrics.hpp"
#include "fern/rng.hpp"
#include "fern/version.hpp"

namespace fern::experiment {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error("experiment: " + msg);
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(ModelKind model, const model::FernConfig& mc,
                        const train::TrainConfig& tc) {
  return hash_hex(to_string(model) + "\n" + mc.to_json() + "\n" +
                  tc.to_json());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(n - 1)) /
         std::sqrt(static_cast<double>(n));
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

std::string num_cell(double v) {
  return std::isnan(v) ? std::string() : io::format_double(v);
}

double cell_num(const std::string& s) {
  return s.empty() ? kNan : io::parse_double(s);
}

io::SeriesFrame load_series(const ExperimentSpec& spec) {
  if (!spec.scenario.empty()) {
    const gen::Scenario sc = gen::premade(spec.scenario);
    const gen::Trajectory traj = gen::simulate(sc.spec, sc.shock);
    io::SeriesFrame frame;
    frame.values = traj.values;
    for (std::size_t d = 0; d < traj.spec.dim(); ++d) {
      frame.columns.push_back("x" + std::to_string(d));
    }
    return frame;
  }
  io::FrameConfig fc;
  fc.timestamp_column = spec.timestamp_column;
  return io::read_frame(spec.csv, fc);
}

metrics::MetricReport evaluate_test(const ExperimentSpec& spec,
                                    const model::FernConfig& mc,
                                    const io::WindowedDataset& data,
                                    const model::FernParameters& params,
                                    std::uint64_t seed) {
  return train::evaluate_split(params, mc, data, data.test,
                               spec.train_config,
                               rng::Stream(seed).split("test"));
}

metrics::MetricReport evaluate_baseline(const ExperimentSpec& spec,
                                        const io::WindowedDataset& data,
                                        train::BaselineKind kind) {
  const num::Tensor preds =
      train::baseline_predict(kind, data, data.test);
  const metrics::SwdSpec swd{spec.train_config.swd_projections,
                             spec.train_config.swd_seed};
  return metrics::evaluate_forecasts(preds, data.test.targets,
                                     data.test.channel_of_row,
                                     data.eps_scaled, swd);
}

train::BaselineKind baseline_kind(ModelKind model) {
  switch (model) {
    case ModelKind::kMean:
      return train::BaselineKind::kMean;
    case ModelKind::kPersistence:
      return train::BaselineKind::kPersistence;
    case ModelKind::kRidge:
      return train::BaselineKind::kRidge;
    default:
      fail("not a baseline model");
  }
}

ExperimentSpec spec_with_defaults(Protocol protocol, ModelKind model) {
  ExperimentSpec spec;
  spec.protocol = protocol;
  spec.model = model;
  const ProtocolDefaults d = protocol_defaults(protocol);
  spec.split = d.split;
  spec.train_config = d.train;
  spec.horizons = d.horizons;
  spec.seeds = d.seeds;
  spec.model_config.context_len = d.split.context_len;
  return spec;
}

std::string run_stem(const ExperimentSpec& spec, std::size_t horizon,
                     std::uint64_t seed) {
  return spec.dataset_name() + "_" + to_string(spec.model) + "_h" +
         std::to_string(horizon) + "_s" + std::to_string(seed);
}

void write_run_json(const std::filesystem::path& path,
                    const ExperimentSpec& spec, std::size_t horizon,
                    const model::FernConfig& mc,
                    const train::RunRecord& record) {
  nlohmann::json j;
  j["dataset"] = spec.dataset_name();
  j["protocol"] = to_string(spec.protocol);
  j["model"] = to_string(spec.model);
  j["horizon"] = horizon;
  j["overrides"] = spec.overrides;
  j["model_config"] = nlohmann::json::parse(mc.to_json());
  j["train_config"] = nlohmann::json::parse(spec.train_config.to_json());
  j["record"] = nlohmann::json::parse(record.to_json());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

const std::vector<std::string>& results_header() {
  static const std::vector<std::string> h{
      "scenario", "protocol", "model",   "horizon",      "seed",
      "status",   "mse",      "mse_se",  "mae",          "mae_se",
      "wd",       "wd_se",    "swd",     "swd_se",       "ept",
      "ept_se",   "wall_seconds",        "config_hash",  "code_version"};
  return h;
}

const std::vector<std::string>& ablation_header() {
  static const std::vector<std::string> h{
      "variant", "horizon",      "seeds",            "mse",
      "mae",     "wd",           "ept",              "wall_seconds",
      "reflection_madds",        "config_hash",      "code_version"};
  return h;
}

void write_csv_line(std::ostream& out,
                    const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << io::csv_field(cells[i]);
  }
  out << '\n';
}

std::vector<std::string> result_cells(const ResultRow& r) {
  return {r.scenario,          r.protocol,
          r.model,             std::to_string(r.horizon),
          r.seed,              r.status,
          num_cell(r.mse),     num_cell(r.mse_se),
          num_cell(r.mae),     num_cell(r.mae_se),
          num_cell(r.wd),      num_cell(r.wd_se),
          num_cell(r.swd),     num_cell(r.swd_se),
          num_cell(r.ept),     num_cell(r.ept_se),
          num_cell(r.wall_seconds),
          r.config_hash,       r.code_version};
}

std::size_t parse_size(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(std::string("bad ") + what + " value '" + s + "'");
  }
}

}  // namespace

std::string to_string(Protocol p) {
  return p == Protocol::kShock ? "shock" : "detailed";
}

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kFern:
      return "fern";
    case ModelKind::kMean:
      return "mean";
    case ModelKind::kPersistence:
      return "persistence";
    case ModelKind::kRidge:
      return "ridge";
  }
  fail("unknown model kind");
}

Protocol protocol_from_string(std::string_view s) {
  if (s == "shock") return Protocol::kShock;
  if (s == "detailed") return Protocol::kDetailed;
  fail("unknown protocol '" + std::string(s) +
       "' (expected shock or detailed)");
}

ModelKind model_from_string(std::string_view s) {
  if (s == "fern") return ModelKind::kFern;
  if (s == "mean") return ModelKind::kMean;
  if (s == "persistence") return ModelKind::kPersistence;
  if (s == "ridge") return ModelKind::kRidge;
  fail("unknown model '" + std::string(s) +
       "' (expected fern, mean, persistence, or ridge)");
}

ProtocolDefaults protocol_defaults(Protocol protocol) {
  ProtocolDefaults d;
  d.split.context_len = 336;
  d.train.w_mse = 0.1;
  d.train.w_mae = 1.0;
  d.train.w_dist = 0.1;
  if (protocol == Protocol::kShock) {
    d.split.train_ratio = 0.7;
    d.split.val_ratio = 0.2;
    d.split.test_ratio = 0.1;
    d.train.batch_size = 95;
    d.train.learning_rate = 3e-4;
    d.train.grace = 3;
    d.train.swd_projections = 0;
    d.horizons = {336};
    d.seeds = {7, 1955};
  } else {
    d.split.train_ratio = 0.7;
    d.split.val_ratio = 0.1;
    d.split.test_ratio = 0.2;
    d.train.batch_size = 128;
    d.train.learning_rate = 9e-4;
    d.train.grace = 0;
    d.train.swd_projections = 500;
    d.horizons = {96, 192, 336, 720};
    d.seeds = {7, 1955, 2023, 4};
  }
  d.split.horizon = d.horizons.front();
  return d;
}

void verify_protocol_defaults() {
  const auto check = [](bool ok, const char* what) {
    if (!ok) {
      throw std::logic_error(std::string("protocol self-test failed: ") +
                             what);
    }
  };
  const ProtocolDefaults s = protocol_defaults(Protocol::kShock);
  check(s.split.train_ratio == 0.7 && s.split.val_ratio == 0.2 &&
            s.split.test_ratio == 0.1,
        "shock split ratios");
  check(s.split.context_len == 336, "shock context length");
  check(s.train.batch_size == 95, "shock batch size");
  check(s.train.learning_rate == 3e-4, "shock learning rate");
  check(s.train.grace == 3, "shock grace period");
  check(s.train.swd_projections == 0, "shock distance mode");
  check(s.horizons == std::vector<std::size_t>{336}, "shock horizons");
  check(s.seeds == std::vector<std::uint64_t>{7, 1955}, "shock seeds");
  const ProtocolDefaults d = protocol_defaults(Protocol::kDetailed);
  check(d.split.train_ratio == 0.7 && d.split.val_ratio == 0.1 &&
            d.split.test_ratio == 0.2,
        "detailed split ratios");
  check(d.split.context_len == 336, "detailed context length");
  check(d.train.batch_size == 128, "detailed batch size");
  check(d.train.learning_rate == 9e-4, "detailed learning rate");
  check(d.train.grace == 0, "detailed grace period");
  check(d.train.swd_projections == 500, "detailed distance mode");
  check(d.horizons == std::vector<std::size_t>{96, 192, 336, 720},
        "detailed horizons");
  check(d.seeds == std::vector<std::uint64_t>{7, 1955, 2023, 4},
        "detailed seeds");
  const auto& common = [&](const ProtocolDefaults& p, const char* name) {
    check(p.train.w_mse == 0.1 && p.train.w_mae == 1.0 &&
              p.train.w_dist == 0.1,
          name);
  };
  common(s, "shock objective weights");
  common(d, "detailed objective weights");
}

ExperimentSpec ExperimentSpec::for_scenario(const std::string& id,
                                            Protocol protocol,
                                            ModelKind model) {
  gen::premade(id);  // rejects unknown ids up front
  ExperimentSpec spec = spec_with_defaults(protocol, model);
  spec.scenario = id;
  return spec;
}

ExperimentSpec ExperimentSpec::for_csv(const std::filesystem::path& path,
                                       Protocol protocol, ModelKind model) {
  ExperimentSpec spec = spec_with_defaults(protocol, model);
  spec.csv = path;
  return spec;
}

std::string ExperimentSpec::dataset_name() const {
  return scenario.empty() ? csv.stem().string() : scenario;
}

void ExperimentSpec::validate() const {
  if (scenario.empty() == csv.empty()) {
    fail("exactly one of scenario and csv must be set");
  }
  if (horizons.empty()) fail("horizon list is empty");
  if (seeds.empty()) fail("seed list is empty");
  if (out_dir.empty()) fail("output directory is empty");
  if (split.context_len != model_config.context_len) {
    fail("split context length disagrees with the model context length");
  }
  train_config.validate();
  for (std::size_t h : horizons) {
    model::FernConfig mc = model_config;
    mc.horizon = h;
    io::SplitSpec sp = split;
    sp.horizon = h;
    sp.validate();
    if (model == ModelKind::kFern) mc.validate();
  }
}

void apply_env_overrides(ExperimentSpec& spec) {
  if (const char* raw = std::getenv("FERN_SEED")) {
    std::vector<std::uint64_t> seeds;
    std::string token;
    std::istringstream in((std::string(raw)));
    while (std::getline(in, token, ',')) {
      if (token.empty()) continue;
      seeds.push_back(parse_size(token, "FERN_SEED"));
    }
    if (seeds.empty()) fail("FERN_SEED is set but holds no seeds");
    spec.seeds = seeds;
    spec.overrides.push_back(std::string("FERN_SEED=") + raw);
  }
  if (const char* raw = std::getenv("FERN_OUT")) {
    if (*raw == '\0') fail("FERN_OUT is set but empty");
    spec.out_dir = raw;
    spec.overrides.push_back(std::string("FERN_OUT=") + raw);
  }
}

void append_results_csv(const std::filesystem::path& path,
                        std::span<const ResultRow> rows) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) fail("cannot open " + path.string());
  if (fresh) write_csv_line(out, results_header());
  for (const ResultRow& r : rows) write_csv_line(out, result_cells(r));
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv(path);
  if (table.header != results_header()) {
    fail("unexpected results header in " + path.string());
  }
  std::vector<ResultRow> rows;
  for (const auto& c : table.rows) {
    if (c.size() != results_header().size()) {
      fail("ragged results row in " + path.string());
    }
    ResultRow r;
    r.scenario = c[0];
    r.protocol = c[1];
    r.model = c[2];
    r.horizon = parse_size(c[3], "horizon");
    r.seed = c[4];
    r.status = c[5];
    r.mse = cell_num(c[6]);
    r.mse_se = cell_num(c[7]);
    r.mae = cell_num(c[8]);
    r.mae_se = cell_num(c[9]);
    r.wd = cell_num(c[10]);
    r.wd_se = cell_num(c[11]);
    r.swd = cell_num(c[12]);
    r.swd_se = cell_num(c[13]);
    r.ept = cell_num(c[14]);
    r.ept_se = cell_num(c[15]);
    r.wall_seconds = cell_num(c[16]);
    r.config_hash = c[17];
    r.code_version = c[18];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> run(const ExperimentSpec& spec) {
  spec.validate();
  verify_protocol_defaults();
  std::filesystem::create_directories(spec.out_dir);
  const std::filesystem::path results = spec.out_dir / "results.csv";
  const io::SeriesFrame frame = load_series(spec);

  std::vector<ResultRow> rows;
  ResultRow base;
  base.scenario = spec.dataset_name();
  base.protocol = to_string(spec.protocol);
  base.model = to_string(spec.model);
  base.code_version = kVersion;
  base.mse = base.mse_se = base.mae = base.mae_se = kNan;
  base.wd = base.wd_se = base.swd = base.swd_se = kNan;
  base.ept = base.ept_se = base.wall_seconds = kNan;

  for (std::size_t h : spec.horizons) {
    model::FernConfig mc = spec.model_config;
    mc.horizon = h;
    io::SplitSpec sp = spec.split;
    sp.horizon = h;
    io::WindowedDataset data;
    try {
      data = io::split_and_window(frame, sp);
    } catch (const std::exception& e) {
      ResultRow row = base;
      row.horizon = h;
      row.seed = "-";
      row.status = "failed: " + one_line(e.what());
      append_results_csv(results, {&row, 1});
      throw;
    }
    std::vector<ResultRow> seed_rows;
    for (std::uint64_t seed : spec.seeds) {
      ResultRow row = base;
      row.horizon = h;
      row.seed = std::to_string(seed);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        metrics::MetricReport report;
        if (spec.model == ModelKind::kFern) {
          train::TrainResult tr =
              train::train(mc, data, spec.train_config, seed);
          report = evaluate_test(spec, mc, data, tr.best_params, seed);
          tr.record.has_test = true;
          tr.record.test = report;
          row.config_hash = tr.record.config_hash;
          const std::filesystem::path run_dir = spec.out_dir / "runs";
          std::filesystem::create_directories(run_dir);
          const std::string stem = run_stem(spec, h, seed);
          model::save_checkpoint(run_dir / (stem + ".ckpt"),
                                 tr.best_params, mc);
          write_run_json(run_dir / (stem + ".json"), spec, h, mc,
                         tr.record);
        } else {
          report = evaluate_baseline(spec, data, baseline_kind(spec.model));
          row.config_hash = config_hash(spec.model, mc, spec.train_config);
        }
        row.status = "ok";
        row.mse = report.mse;
        row.mae = report.mae;
        row.wd = report.wd;
        row.swd = report.swd;
        row.ept = report.ept;
      } catch (const std::exception& e) {
        row.status = "failed: " + one_line(e.what());
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        append_results_csv(results, {&row, 1});
        throw;
      }
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        t0)
              .count();
      append_results_csv(results, {&row, 1});
      seed_rows.push_back(row);
      rows.push_back(std::move(row));
    }

    ResultRow agg = base;
    agg.horizon = h;
    agg.seed = "mean";
    agg.status = "ok";
    agg.config_hash = seed_rows.front().config_hash;
    const auto column = [&seed_rows](double ResultRow::* field) {
      std::vector<double> v;
      for (const ResultRow& r : seed_rows) v.push_back(r.*field);
      return v;
    };
    const auto fill = [&column, &agg](double ResultRow::* mean_field,
                                      double ResultRow::* se_field) {
      const std::vector<double> v = column(mean_field);
      agg.*mean_field = mean_of(v);
      agg.*se_field = standard_error(v);
    };
    fill(&ResultRow::mse, &ResultRow::mse_se);
    fill(&ResultRow::mae, &ResultRow::mae_se);
    fill(&ResultRow::wd, &ResultRow::wd_se);
    fill(&ResultRow::swd, &ResultRow::swd_se);
    fill(&ResultRow::ept, &ResultRow::ept_se);
    agg.wall_seconds = mean_of(column(&ResultRow::wall_seconds));
    append_results_csv(results, {&agg, 1});
    rows.push_back(std::move(agg));
  }
  return rows;
}

std::vector<AblationVariant> ablation_grid(
    const model::FernConfig& base, std::span<const std::string> items) {
  std::vector<AblationVariant> out;
  for (const std::string& item : items) {
    AblationVariant v{item, base};
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    if (eq == std::string::npos) {
      if (key == "no_rotation") {
        v.config.no_rotation = true;
      } else if (key == "no_patch") {
        v.config.no_patch = true;
      } else if (key == "only_encoder") {
        v.config.only_encoder = true;
      } else if (key == "no_encoder_no_mu") {
        v.config.no_encoder_no_mu = true;
      } else {
        fail("unknown ablation item '" + item + "'");
      }
    } else {
      const std::size_t value =
          parse_size(item.substr(eq + 1), "ablation value");
      if (key == "reflections") {
        v.config.reflections = value;
      } else if (key == "patch") {
        v.config.patch = value;
      } else if (key == "hidden") {
        v.config.hidden = value;
      } else {
        fail("unknown ablation item '" + item + "'");
      }
    }
    v.config.validate();
    out.push_back(std::move(v));
  }
  return out;
}

void write_ablation_csv(const std::filesystem::path& path,
                        std::span<const AblationRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot open " + path.string());
  write_csv_line(out, ablation_header());
  for (const AblationRow& r : rows) {
    write_csv_line(
        out, {r.variant, std::to_string(r.horizon), r.seeds,
              num_cell(r.mse), num_cell(r.mae), num_cell(r.wd),
              num_cell(r.ept), num_cell(r.wall_seconds),
              std::to_string(r.reflection_madds), r.config_hash,
              r.code_version});
  }
}

std::vector<AblationRow> ablate(const ExperimentSpec& spec,
                                std::span<const std::string> grid) {
  if (spec.model != ModelKind::kFern) {
    fail("ablations only apply to the fern model");
  }
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  const std::size_t h = spec.horizons.front();
  const io::SeriesFrame frame = load_series(spec);
  io::SplitSpec sp = spec.split;
  sp.horizon = h;
  const io::WindowedDataset data = io::split_and_window(frame, sp);

  std::vector<AblationVariant> variants;
  {
    model::FernConfig base = spec.model_config;
    base.horizon = h;
    base.validate();
    variants.push_back({"base", base});
    model::FernConfig grid_base = spec.model_config;
    grid_base.horizon = h;
    for (AblationVariant& v : ablation_grid(grid_base, grid)) {
      variants.push_back(std::move(v));
    }
  }

  std::string seeds_cell;
  for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
    if (i) seeds_cell += ';';
    seeds_cell += std::to_string(spec.seeds[i]);
  }

  std::vector<AblationRow> rows;
  for (const AblationVariant& variant : variants) {
    AblationRow row;
    row.variant = variant.name;
    row.horizon = h;
    row.seeds = seeds_cell;
    row.config_hash =
        config_hash(ModelKind::kFern, variant.config, spec.train_config);
    row.code_version = kVersion;
    std::vector<double> mse, mae, wd, ept, wall;
    for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
      const std::uint64_t seed = spec.seeds[i];
      const auto t0 = std::chrono::steady_clock::now();
      const train::TrainResult tr =
          train::train(variant.config, data, spec.train_config, seed);
      if (i == 0) model::reset_reflection_madds();
      const metrics::MetricReport report =
          evaluate_test(spec, variant.config, data, tr.best_params, seed);
      if (i == 0) row.reflection_madds = model::reflection_madds();
      wall.push_back(std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count());
      mse.push_back(report.mse);
      mae.push_back(report.mae);
      wd.push_back(report.wd);
      ept.push_back(report.ept);
    }
    row.mse = mean_of(mse);
    row.mae = mean_of(mae);
    row.wd = mean_of(wd);
    row.ept = mean_of(ept);
    row.wall_seconds = mean_of(wall);
    rows.push_back(std::move(row));
    write_ablation_csv(spec.out_dir / "ablation.csv", rows);
  }
  return rows;
}

DiagnoseResult diagnose(const ExperimentSpec& spec) {
  if (spec.model != ModelKind::kFern) {
    fail("diagnosis requires the fern model");
  }
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  const std::size_t h = spec.horizons.front();
  const std::uint64_t seed = spec.seeds.front();
  model::FernConfig mc = spec.model_config;
  mc.horizon = h;
  io::SplitSpec sp = spec.split;
  sp.horizon = h;
  const io::SeriesFrame frame = load_series(spec);
  const io::WindowedDataset data = io::split_and_window(frame, sp);
  const train::TrainResult tr =
      train::train(mc, data, spec.train_config, seed);

  const num::Tensor& contexts = data.test.contexts;
  const num::Tensor& targets = data.test.targets;
  const std::size_t rows = contexts.rows();
  const std::size_t chunk = spec.train_config.batch_size;
  rng::Stream noise = rng::Stream(seed).split("test");

  diag::EigenProfile profile;
  profile.patches = mc.patch_count();
  std::vector<double> abs_err(rows, 0.0);
  std::size_t fallbacks = 0;
  for (std::size_t start = 0; start < rows; start += chunk) {
    const std::size_t b = std::min(chunk, rows - start);
    num::Tensor x({b, mc.context_len});
    std::copy(contexts.data() + start * mc.context_len,
              contexts.data() + (start + b) * mc.context_len, x.data());
    const num::Tensor z0 =
        model::draw_noise(noise, b, mc.latent_dim(), mc.noise_scale);
    const num::Tensor y0 =
        model::draw_noise(noise, b, mc.horizon, mc.noise_scale);
    num::Tape tape;
    const model::BoundParameters bound =
        model::bind_parameters(tape, tr.best_params);
    const model::ForwardResult r =
        model::forward(tape, bound, mc, x, z0, y0, true);
    fallbacks += r.fallback_count;
    std::vector<std::size_t> channels(
        data.test.channel_of_row.begin() + start,
        data.test.channel_of_row.begin() + start + b);
    const diag::EigenProfile part = diag::eigen_profile(r.factors, channels);
    profile.per_patch.insert(profile.per_patch.end(),
                             part.per_patch.begin(), part.per_patch.end());
    profile.window_mean.insert(profile.window_mean.end(),
                               part.window_mean.begin(),
                               part.window_mean.end());
    profile.channel_of_row.insert(profile.channel_of_row.end(),
                                  part.channel_of_row.begin(),
                                  part.channel_of_row.end());
    const num::Tensor& pred = tape.value(r.prediction);
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < mc.horizon; ++t) {
        s += std::abs(pred.at(i, t) - targets.at(start + i, t));
      }
      abs_err[start + i] = s / static_cast<double>(mc.horizon);
    }
  }
  profile.windows = rows;

  const std::vector<diag::ProfileRow> out_rows =
      diag::profile_rows(profile, abs_err);
  DiagnoseResult result;
  result.profile_csv = spec.out_dir / "eigenprofile.csv";
  diag::write_profile_csv(result.profile_csv, out_rows);
  result.windows = rows;
  result.patches = profile.patches;
  result.fallback_count = fallbacks;
  result.test = evaluate_test(spec, mc, data, tr.best_params, seed);
  return result;
}

GenerateResult generate(const std::string& scenario_id,
                        const std::filesystem::path& out_dir) {
  const gen::Scenario sc = gen::premade(scenario_id);
  std::filesystem::create_directories(out_dir);
  const gen::Trajectory traj = gen::simulate(sc.spec, sc.shock);
  GenerateResult r;
  r.csv = out_dir / (scenario_id + ".csv");
  r.sidecar = out_dir / (scenario_id + ".json");
  gen::write_trajectory_csv(traj, r.csv);
  gen::write_trajectory_sidecar(traj, r.sidecar, scenario_id);
  r.steps = traj.spec.steps;
  r.dim = traj.spec.dim();
  r.shock_index = traj.shock_index;
  return r;
}

InspectResult inspect(const std::filesystem::path& csv_path,
                      const io::PolicySpec& policy, bool apply,
                      const std::filesystem::path& out_dir,
                      const std::string& timestamp_column) {
  io::FrameConfig fc;
  fc.timestamp_column = timestamp_column;
  const io::SeriesFrame frame = io::read_frame(csv_path, fc);
  InspectResult result;
  result.report = io::zero_report(frame);
  io::PolicyResult applied = io::apply_policy(frame, policy);
  result.actions = applied.log;
  if (apply) {
    std::filesystem::create_directories(out_dir);
    const std::string stem = csv_path.stem().string();
    result.processed = out_dir / (stem + "_processed.csv");
    result.action_log = out_dir / (stem + "_policy.json");
    io::write_frame(applied.frame, *result.processed);
    std::ofstream log(*result.action_log, std::ios::binary);
    if (!log) fail("cannot write " + result.action_log->string());
    log << applied.log_json() << '\n';
  }
  return result;
}

}  // namespace fern::experiment
