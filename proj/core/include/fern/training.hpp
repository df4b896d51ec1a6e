#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "fern/dataio.hpp"
#include "fern/metrics.hpp"
#include "fern/model.hpp"
#include "fern/rng.hpp"
#include "fern/tensor.hpp"

namespace fern::train {

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  // Epochs up to and including this index are logged but can never set the
  // checkpoint, so an early lucky validation score cannot freeze training.
  std::size_t grace = 3;
  std::size_t batch_size = 95;
  double huber_delta = 1.0;
  // Validation objective weights: w_mse * MSE + w_mae * MAE + w_dist * D,
  // where D is the per-window transport distance when swd_projections is
  // zero and the sliced distance otherwise.
  double w_mse = 0.1;
  double w_mae = 1.0;
  double w_dist = 0.1;
  std::size_t swd_projections = 0;
  std::uint64_t swd_seed = metrics::kDefaultProjectionSeed;

  void validate() const;
  std::string to_json() const;
};

double eval_objective(const TrainConfig& config,
                      const metrics::MetricReport& report);

// Decoupled-decay Adam over a flattened parameter list. A step with any
// non-finite gradient is skipped entirely and leaves parameters and state
// untouched.
class AdamW {
 public:
  explicit AdamW(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8, double weight_decay = 0.0);

  // Applies one update in place. params and grads pair up index by index
  // and every pair must agree in shape.
  bool step(const std::vector<num::Tensor*>& params,
            const std::vector<const num::Tensor*>& grads);

  std::size_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  struct Slot {
    num::Tensor m;
    num::Tensor v;
  };
  std::vector<Slot> state_;
  std::size_t t_ = 0;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  double weight_decay_;
};

// Checkpoint selection with a grace period: observe() returns true when the
// epoch becomes the new checkpoint, which requires epoch > grace and a
// strictly smaller value than every previous eligible epoch. Non-improving
// eligible epochs accumulate toward the patience limit.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t grace, std::size_t patience);
  bool observe(std::size_t epoch, double value);  // epochs are 1-based
  bool should_stop() const { return bad_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  std::size_t grace_;
  std::size_t patience_;
  std::size_t bad_ = 0;
  std::size_t best_epoch_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
};

struct EpochLog {
  double train_loss = 0.0;
  double val_objective = 0.0;
};

struct RunRecord {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 means nothing was eligible
  double best_val = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t skipped_steps = 0;
  bool shuffled = true;
  bool has_test = false;
  metrics::MetricReport test;

  std::string to_json() const;
};

struct TrainResult {
  RunRecord record;
  model::FernParameters best_params;
};

// Trains on data.train and selects the checkpoint on data.val. The returned
// parameters are the checkpointed ones, never the final ones. The seed
// fans out into independent streams: "init" for parameters, "shuffle" then
// the epoch index for batch order, "noise" for training-time reference
// draws, and "eval" then the epoch index for validation draws.
TrainResult train(const model::FernConfig& model_config,
                  const io::WindowedDataset& data,
                  const TrainConfig& config, std::uint64_t seed);

// Forecasts a whole split in mini-batches, drawing reference noise from the
// given stream. Returns [rows, horizon] predictions.
num::Tensor predict(const model::FernParameters& params,
                    const model::FernConfig& config,
                    const num::Tensor& contexts, std::size_t batch_size,
                    rng::Stream noise);

// Scores one split with freshly drawn reference noise.
metrics::MetricReport evaluate_split(const model::FernParameters& params,
                                     const model::FernConfig& model_config,
                                     const io::WindowedDataset& data,
                                     const io::WindowedSplit& split,
                                     const TrainConfig& config,
                                     rng::Stream noise);

enum class BaselineKind { kMean, kPersistence, kRidge };

BaselineKind baseline_from_string(std::string_view name);
std::string to_string(BaselineKind kind);

// Reference comparators. Mean tiles each channel's training-target mean;
// persistence tiles the last context value; ridge maps context to horizon
// per channel by L2-regularized least squares fit on the training windows.
num::Tensor baseline_predict(BaselineKind kind,
                             const io::WindowedDataset& data,
                             const io::WindowedSplit& split,
                             double lambda = 1e-3);

}  // namespace fern::train
