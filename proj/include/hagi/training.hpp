#pragma once

#include "hagi/diffusion.hpp"
#include "hagi/inference.hpp"
#include "hagi/model.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace hagi {

struct TrainConfig {
  int epochs = 500;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::vector<int> decay_epochs = {375, 450};  // lr *= decay_factor from each listed epoch on
  double decay_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-2;
  bool clip_gradients = true;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;

  int diffusion_steps = 50;
  double min_noise = 1e-4;
  double max_noise = 0.5;

  int validation_protocol = 50;  // 100 for generation-mode models
  int validate_every = 1;        // epochs; the last epoch is always validated
  int validation_windows = 0;    // 0 = the whole validation split
  int validation_draws = 1;

  /// "full" (the defaults), "desk" (30 epochs, batch 32) or "micro" (5 epochs, batch 16).
  static TrainConfig preset(const std::string& name);

  void validate() const;
  /// Epochs count from 1.
  double lr_at(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  long long step = 0;  // optimizer steps taken so far
  double loss = 0.0;   // mean over the epoch's steps
  double lr = 0.0;
  std::optional<double> val_mae;
  double seconds = 0.0;
};

struct TrainResult {
  NoiseSchedule schedule;
  DenoiserParams<float> best;   // lowest validation MAE
  DenoiserParams<float> final;
  int best_epoch = 0;
  double best_val_mae = 0.0;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
};

/// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(const DenoiserParams<float>& like, const TrainConfig& config);
  void step(DenoiserParams<float>& params, const DenoiserParams<float>& grad, double lr);

 private:
  DenoiserParams<float> m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long t_ = 0;
};

/// Global L2 norm over every gradient tensor.
double gradient_norm(const DenoiserParams<float>& grad);

/// Assembles one training batch: per-window train masks (all-hidden in
/// generation mode), uniform steps and fresh noise. Exposed for tests.
struct TrainBatch {
  DenoiserInput<float> input;
  Matrix<float> eps;
  std::vector<std::uint8_t> target;
};
TrainBatch make_train_batch(const DenoiserConfig& config, const NoiseSchedule& schedule,
                            const std::vector<const Sample*>& windows, Rng& rng);

/// Validation MAE at the configured protocol with fixed masks and sampling seed.
double validation_mae(const Denoiser<float>& model, const NoiseSchedule& schedule, const Dataset& validation,
                      const TrainConfig& config);

/// Trains a fresh model. `log`, when set, receives one JSON object per epoch.
/// Throws RuntimeFailure on a non-finite loss, naming the step, lr and windows.
TrainResult train(const Dataset& train_set, const Dataset& validation_set, const DenoiserConfig& model_config,
                  const TrainConfig& config, std::ostream* log = nullptr,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace hagi
