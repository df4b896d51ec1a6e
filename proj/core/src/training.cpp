#include "fern/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fern/tape.hpp"

namespace fern::train {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("training: " + what);
}

std::string hash_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(rng::fnv1a64(text)));
  return buf;
}

num::Tensor gather_rows(const num::Tensor& source,
                        std::span<const std::size_t> rows) {
  const std::size_t cols = source.cols();
  num::Tensor out({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = source.data() + rows[i] * cols;
    std::copy(src, src + cols, out.data() + i * cols);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (epochs == 0) fail("epoch count must be positive");
  if (patience == 0) fail("patience must be at least one epoch");
  if (grace >= epochs) fail("grace period must end before the last epoch");
  if (batch_size == 0) fail("batch size must be positive");
  if (!(huber_delta > 0.0)) fail("huber threshold must be positive");
  if (w_mse < 0.0 || w_mae < 0.0 || w_dist < 0.0) {
    fail("objective weights must be nonnegative");
  }
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["learning_rate"] = learning_rate;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["grace"] = grace;
  j["batch_size"] = batch_size;
  j["huber_delta"] = huber_delta;
  j["w_mse"] = w_mse;
  j["w_mae"] = w_mae;
  j["w_dist"] = w_dist;
  j["swd_projections"] = swd_projections;
  j["swd_seed"] = swd_seed;
  return j.dump(2);
}

double eval_objective(const TrainConfig& config,
                      const metrics::MetricReport& report) {
  const double dist = config.swd_projections == 0 ? report.wd : report.swd;
  return config.w_mse * report.mse + config.w_mae * report.mae +
         config.w_dist * dist;
}

AdamW::AdamW(double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  if (!(lr > 0.0)) fail("optimizer learning rate must be positive");
}

bool AdamW::step(const std::vector<num::Tensor*>& params,
                 const std::vector<const num::Tensor*>& grads) {
  if (params.size() != grads.size()) {
    fail("parameter and gradient lists differ in length");
  }
  if (state_.empty()) {
    state_.reserve(params.size());
    for (const num::Tensor* p : params) {
      state_.push_back({num::Tensor(p->shape()), num::Tensor(p->shape())});
    }
  }
  if (state_.size() != params.size()) {
    fail("optimizer state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(*grads[k])) {
      fail("gradient shape does not match its parameter");
    }
    if (!grads[k]->all_finite()) return false;
  }

  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    num::Tensor& p = *params[k];
    const num::Tensor& g = *grads[k];
    num::Tensor& m = state_[k].m;
    num::Tensor& v = state_[k].v;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr_ * (m_hat / (std::sqrt(v_hat) + eps_) +
                     weight_decay_ * p[i]);
    }
  }
  return true;
}

EarlyStopper::EarlyStopper(std::size_t grace, std::size_t patience)
    : grace_(grace), patience_(patience) {
  if (patience == 0) fail("patience must be at least one epoch");
}

bool EarlyStopper::observe(std::size_t epoch, double value) {
  if (epoch <= grace_) return false;
  if (std::isfinite(value) && value < best_value_) {
    best_value_ = value;
    best_epoch_ = epoch;
    bad_ = 0;
    return true;
  }
  bad_ += 1;
  return false;
}

std::string RunRecord::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["best_epoch"] = best_epoch;
  j["best_val"] = best_val;
  j["wall_seconds"] = wall_seconds;
  j["skipped_steps"] = skipped_steps;
  j["shuffled"] = shuffled;
  j["epochs"] = nlohmann::json::array();
  for (const EpochLog& e : epochs) {
    j["epochs"].push_back(
        {{"train_loss", e.train_loss}, {"val_objective", e.val_objective}});
  }
  j["test"] = has_test ? nlohmann::json::parse(test.to_json())
                       : nlohmann::json();
  return j.dump(2);
}

num::Tensor predict(const model::FernParameters& params,
                    const model::FernConfig& config,
                    const num::Tensor& contexts, std::size_t batch_size,
                    rng::Stream noise) {
  if (contexts.rank() != 2 || contexts.cols() != config.context_len) {
    fail("contexts must be [rows, context_len]");
  }
  if (batch_size == 0) fail("batch size must be positive");
  const std::size_t rows = contexts.rows();
  num::Tensor out({rows, config.horizon});
  for (std::size_t start = 0; start < rows; start += batch_size) {
    const std::size_t b = std::min(batch_size, rows - start);
    std::vector<std::size_t> idx(b);
    for (std::size_t i = 0; i < b; ++i) idx[i] = start + i;
    const num::Tensor x = gather_rows(contexts, idx);
    const num::Tensor z0 =
        model::draw_noise(noise, b, config.latent_dim(), config.noise_scale);
    const num::Tensor y0 =
        model::draw_noise(noise, b, config.horizon, config.noise_scale);
    num::Tape tape;
    const model::BoundParameters bound = model::bind_parameters(tape, params);
    const model::ForwardResult r =
        model::forward(tape, bound, config, x, z0, y0);
    const num::Tensor& pred = tape.value(r.prediction);
    std::copy(pred.data(), pred.data() + pred.size(),
              out.data() + start * config.horizon);
  }
  return out;
}

metrics::MetricReport evaluate_split(const model::FernParameters& params,
                                     const model::FernConfig& model_config,
                                     const io::WindowedDataset& data,
                                     const io::WindowedSplit& split,
                                     const TrainConfig& config,
                                     rng::Stream noise) {
  const num::Tensor preds = predict(params, model_config, split.contexts,
                                    config.batch_size, noise);
  return metrics::evaluate_forecasts(
      preds, split.targets, split.channel_of_row, data.eps_scaled,
      {config.swd_projections, config.swd_seed});
}

TrainResult train(const model::FernConfig& model_config,
                  const io::WindowedDataset& data,
                  const TrainConfig& config, std::uint64_t seed) {
  model_config.validate();
  config.validate();
  if (data.train.contexts.rank() != 2 || data.train.contexts.rows() == 0) {
    fail("training split is empty");
  }
  if (data.val.contexts.rank() != 2 || data.val.contexts.rows() == 0) {
    fail("validation split is empty");
  }
  if (data.train.contexts.cols() != model_config.context_len ||
      data.train.targets.cols() != model_config.horizon) {
    fail("window shape does not match the model configuration");
  }

  const auto t0 = std::chrono::steady_clock::now();
  const rng::Stream root(seed);
  model::FernParameters params =
      model::init_parameters(model_config, root.split("init"));
  const rng::Stream shuffle_root = root.split("shuffle");
  rng::Stream noise = root.split("noise");
  const rng::Stream eval_root = root.split("eval");

  AdamW optimizer(config.learning_rate);
  std::vector<num::Tensor*> param_ptrs;
  params.for_each([&param_ptrs](const std::string&, num::Tensor& t) {
    param_ptrs.push_back(&t);
  });

  EarlyStopper stopper(config.grace, config.patience);
  TrainResult result;
  result.record.seed = seed;
  result.record.config_hash =
      hash_hex(model_config.to_json() + config.to_json());

  const std::size_t rows = data.train.contexts.rows();
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng::Stream shuffler = shuffle_root.split(epoch);
    for (std::size_t i = rows - 1; i > 0; --i) {
      const std::size_t j = shuffler.next_u64() % (i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < rows; start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, rows - start);
      const std::span<const std::size_t> idx(order.data() + start, b);
      const num::Tensor x = gather_rows(data.train.contexts, idx);
      const num::Tensor target = gather_rows(data.train.targets, idx);
      const num::Tensor z0 = model::draw_noise(
          noise, b, model_config.latent_dim(), model_config.noise_scale);
      const num::Tensor y0 = model::draw_noise(noise, b, model_config.horizon,
                                               model_config.noise_scale);

      num::Tape tape;
      const model::BoundParameters bound =
          model::bind_parameters(tape, params);
      const model::ForwardResult r =
          model::forward(tape, bound, model_config, x, z0, y0);
      const num::Tape::Id loss =
          tape.huber(r.prediction, tape.input(target), config.huber_delta);
      tape.backward(loss);
      loss_sum += tape.value(loss)[0] * double(b);

      std::vector<const num::Tensor*> grads;
      grads.reserve(bound.all.size());
      for (num::Tape::Id id : bound.all) grads.push_back(&tape.grad(id));
      if (!optimizer.step(param_ptrs, grads)) {
        result.record.skipped_steps += 1;
      }
    }

    const metrics::MetricReport val_report =
        evaluate_split(params, model_config, data, data.val, config,
                       eval_root.split(epoch));
    const double objective = eval_objective(config, val_report);
    result.record.epochs.push_back({loss_sum / double(rows), objective});

    if (stopper.observe(epoch, objective)) {
      result.best_params = params;
    }
    if (stopper.should_stop()) break;
  }

  result.record.best_epoch = stopper.best_epoch();
  result.record.best_val = stopper.best_value();
  if (result.record.best_epoch == 0) {
    // No eligible epoch ever improved; fall back to the final parameters
    // rather than returning an empty model.
    result.best_params = params;
  }
  result.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

BaselineKind baseline_from_string(std::string_view name) {
  if (name == "mean") return BaselineKind::kMean;
  if (name == "persistence") return BaselineKind::kPersistence;
  if (name == "ridge") return BaselineKind::kRidge;
  fail("unknown baseline: " + std::string(name));
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kMean:
      return "mean";
    case BaselineKind::kPersistence:
      return "persistence";
    case BaselineKind::kRidge:
      return "ridge";
  }
  fail("unknown baseline kind");
}

namespace {

// Lower Cholesky factor of a symmetric positive definite matrix, row major.
std::vector<double> cholesky(std::vector<double> g, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = g[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= g[j * n + k] * g[j * n + k];
    if (!(d > 0.0)) fail("normal equations are not positive definite");
    const double root = std::sqrt(d);
    g[j * n + j] = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= g[i * n + k] * g[j * n + k];
      g[i * n + j] = s / root;
    }
  }
  return g;
}

void cholesky_solve(const std::vector<double>& low, std::size_t n,
                    std::vector<double>& rhs) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= low[i * n + k] * rhs[k];
    rhs[i] = s / low[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= low[k * n + i] * rhs[k];
    rhs[i] = s / low[i * n + i];
  }
}

std::vector<std::size_t> channel_rows(const io::WindowedSplit& split,
                                      std::size_t channel) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < split.channel_of_row.size(); ++i) {
    if (split.channel_of_row[i] == channel) rows.push_back(i);
  }
  return rows;
}

}  // namespace

num::Tensor baseline_predict(BaselineKind kind,
                             const io::WindowedDataset& data,
                             const io::WindowedSplit& split,
                             double lambda) {
  if (split.contexts.rank() != 2 || split.targets.rank() != 2) {
    fail("split is not windowed");
  }
  const std::size_t rows = split.contexts.rows();
  const std::size_t l = split.contexts.cols();
  const std::size_t h = split.targets.cols();
  num::Tensor out({rows, h});

  if (kind == BaselineKind::kPersistence) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double last = split.contexts.at(i, l - 1);
      for (std::size_t k = 0; k < h; ++k) out.at(i, k) = last;
    }
    return out;
  }

  if (kind == BaselineKind::kMean) {
    std::vector<double> mean(data.channels, 0.0);
    std::vector<std::size_t> count(data.channels, 0);
    for (std::size_t i = 0; i < data.train.targets.rows(); ++i) {
      const std::size_t c = data.train.channel_of_row[i];
      for (std::size_t k = 0; k < data.train.targets.cols(); ++k) {
        mean[c] += data.train.targets.at(i, k);
      }
      count[c] += data.train.targets.cols();
    }
    for (std::size_t c = 0; c < data.channels; ++c) {
      if (count[c] == 0) fail("channel has no training windows");
      mean[c] /= double(count[c]);
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const double m = mean.at(split.channel_of_row.at(i));
      for (std::size_t k = 0; k < h; ++k) out.at(i, k) = m;
    }
    return out;
  }

  if (!(lambda > 0.0)) fail("ridge penalty must be positive");
  if (data.train.contexts.cols() != l || data.train.targets.cols() != h) {
    fail("training windows do not match the requested split");
  }
  for (std::size_t c = 0; c < data.channels; ++c) {
    const std::vector<std::size_t> fit_rows = channel_rows(data.train, c);
    if (fit_rows.empty()) fail("channel has no training windows");

    std::vector<double> gram(l * l, 0.0);
    std::vector<double> xty(l * h, 0.0);
    for (const std::size_t r : fit_rows) {
      const double* x = data.train.contexts.data() + r * l;
      const double* y = data.train.targets.data() + r * h;
      for (std::size_t a = 0; a < l; ++a) {
        for (std::size_t b = a; b < l; ++b) gram[a * l + b] += x[a] * x[b];
        for (std::size_t k = 0; k < h; ++k) xty[a * h + k] += x[a] * y[k];
      }
    }
    for (std::size_t a = 0; a < l; ++a) {
      for (std::size_t b = a + 1; b < l; ++b) gram[b * l + a] = gram[a * l + b];
      gram[a * l + a] += lambda;
    }
    const std::vector<double> low = cholesky(std::move(gram), l);

    std::vector<double> weights(l * h);
    std::vector<double> column(l);
    for (std::size_t k = 0; k < h; ++k) {
      for (std::size_t a = 0; a < l; ++a) column[a] = xty[a * h + k];
      cholesky_solve(low, l, column);
      for (std::size_t a = 0; a < l; ++a) weights[a * h + k] = column[a];
    }

    for (std::size_t i = 0; i < rows; ++i) {
      if (split.channel_of_row.at(i) != c) continue;
      const double* x = split.contexts.data() + i * l;
      for (std::size_t k = 0; k < h; ++k) {
        double s = 0.0;
        for (std::size_t a = 0; a < l; ++a) s += x[a] * weights[a * h + k];
        out.at(i, k) = s;
      }
    }
  }
  return out;
}

}  // namespace fern::train
