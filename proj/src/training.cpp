#include "hagi/training.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hagi {

TrainConfig TrainConfig::preset(const std::string& name) {
  TrainConfig c;
  if (name == "full" || name == "default") return c;
  if (name == "desk") {
    c.epochs = 30;
    c.batch_size = 32;
    c.decay_epochs = {23, 27};
    c.validate_every = 5;
    c.validation_windows = 64;
    return c;
  }
  if (name == "micro") {
    c.epochs = 5;
    c.batch_size = 16;
    c.decay_epochs = {4};
    c.validate_every = 5;
    c.validation_windows = 16;
    return c;
  }
  throw ConfigError("unknown training preset '" + name + "' (expected full, desk or micro)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0) || !(decay_factor > 0.0)) throw ConfigError("learning rate and decay factor must be positive");
  for (int e : decay_epochs)
    if (e < 1 || e >= epochs) throw ConfigError("decay epochs must lie in [1, epochs)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0) || weight_decay < 0.0) throw ConfigError("adam_eps must be positive, weight_decay >= 0");
  if (clip_gradients && !(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (validate_every < 1 || validation_windows < 0 || validation_draws < 1) {
    throw ConfigError("validate_every and validation_draws must be >= 1, validation_windows >= 0");
  }
  protocol_from_percent(validation_protocol);
  build_schedule(diffusion_steps, min_noise, max_noise);
}

double TrainConfig::lr_at(int epoch) const {
  double lr = learning_rate;
  for (int e : decay_epochs)
    if (epoch >= e) lr *= decay_factor;
  return lr;
}

AdamW::AdamW(const DenoiserParams<float>& like, const TrainConfig& config)
    : m_(like.zeros_like()),
      v_(like.zeros_like()),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay) {}

void AdamW::step(DenoiserParams<float>& params, const DenoiserParams<float>& grad, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto p = params.tensors();
  const auto g = grad.tensors();
  const auto m = m_.tensors();
  const auto v = v_.tensors();
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step = static_cast<float>(lr / c1);
  const float vscale = static_cast<float>(1.0 / std::sqrt(c2));
  const float decay = static_cast<float>(1.0 - lr * weight_decay_);
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& mi = *m[i].tensor;
    auto& vi = *v[i].tensor;
    const auto& gi = *g[i].tensor;
    mi = b1 * mi + (1.0f - b1) * gi;
    vi = b2 * vi + (1.0f - b2) * gi.cwiseAbs2();
    auto& w = *p[i].tensor;
    w *= decay;
    w.array() -= step * mi.array() / (vi.array().sqrt() * vscale + eps);
  }
}

double gradient_norm(const DenoiserParams<float>& grad) {
  double sum = 0.0;
  for (const auto& t : grad.tensors()) sum += t.tensor->template cast<double>().squaredNorm();
  return std::sqrt(sum);
}

TrainBatch make_train_batch(const DenoiserConfig& config, const NoiseSchedule& schedule,
                            const std::vector<const Sample*>& windows, Rng& rng) {
  const int L = config.seq_len;
  InputBuilder<float> builder(config, static_cast<int>(windows.size()));
  TrainBatch batch;
  batch.eps.resize(Eigen::Index(windows.size()) * L, 2);
  batch.target.reserve(windows.size() * static_cast<std::size_t>(L));
  std::uniform_int_distribution<int> step(1, schedule.steps);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const Sample& s = *windows[w];
    if (s.length() != L) throw ValidationError("training window length does not match the model");
    const ObservationMask mask =
        config.imputation() ? train_mask(s.gaze, rng) : eval_mask(s.gaze, MaskProtocol::Generation100, rng);
    const int t = step(rng);
    const Matrix<float> eps = standard_normal<float>(L, 2, rng);
    const Matrix<float> x0 = s.gaze.values.cast<float>();
    const Matrix<float> x_t = forward_noise(x0, t, schedule, eps);
    const auto enc = encode_conditioning<float>(s, config);
    if (config.imputation()) {
      builder.add_imputation(enc, x_t, s.gaze.values, conditioning_frames(mask, s.gaze.valid), t);
    } else {
      builder.add_generation(enc, x_t, t);
    }
    batch.eps.middleRows(Eigen::Index(w) * L, L) = eps;
    const auto target = target_frames(mask, s.gaze.valid);
    batch.target.insert(batch.target.end(), target.begin(), target.end());
  }
  batch.input = builder.finish();
  return batch;
}

double validation_mae(const Denoiser<float>& model, const NoiseSchedule& schedule, const Dataset& validation,
                      const TrainConfig& config) {
  Dataset subset;
  const std::size_t n = config.validation_windows > 0
                            ? std::min(validation.size(), static_cast<std::size_t>(config.validation_windows))
                            : validation.size();
  subset.samples.assign(validation.samples.begin(), validation.samples.begin() + static_cast<std::ptrdiff_t>(n));
  subset.sources.assign(validation.sources.begin(), validation.sources.begin() + static_cast<std::ptrdiff_t>(n));
  const int protocol = model.config().imputation() ? config.validation_protocol : 100;
  const std::uint64_t seed = config.seed ^ 0x5eedf00dULL;
  apply_protocol(subset, protocol, seed);
  SamplingOptions opts;
  opts.draws = config.validation_draws;
  opts.seed = seed;
  const auto pred = model_predict(model, schedule, subset.samples, opts);
  const auto report = score_predictions("validation", protocol, subset, pred, seed, opts.draws);
  if (!report.mae_deg) throw ValidationError("validation split has no scorable frames");
  return *report.mae_deg;
}

TrainResult train(const Dataset& train_set, const Dataset& validation_set, const DenoiserConfig& model_config,
                  const TrainConfig& config, std::ostream* log,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  model_config.validate();
  if (train_set.size() == 0) throw ValidationError("training split is empty");

  TrainResult result;
  result.schedule = build_schedule(config.diffusion_steps, config.min_noise, config.max_noise);
  Rng rng(config.seed);
  Denoiser<float> model(model_config, init_params<float>(model_config, rng));
  AdamW optimizer(model.params(), config);
  DenoiserParams<float> grad = model.params().zeros_like();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  result.best_val_mae = std::numeric_limits<double>::infinity();
  long long global_step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = config.lr_at(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(config.batch_size));
      std::vector<const Sample*> windows;
      for (std::size_t i = b; i < e; ++i) windows.push_back(&train_set.samples[order[i]]);
      const TrainBatch batch = make_train_batch(model_config, result.schedule, windows, rng);

      for (auto& t : grad.tensors()) t.tensor->setZero();
      const double loss = model.loss_and_gradient(batch.input, batch.eps, batch.target, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", step " << global_step + 1 << " (lr " << lr
            << "); batch windows:";
        for (std::size_t i = b; i < e; ++i) msg << ' ' << order[i];
        throw RuntimeFailure(msg.str());
      }
      if (config.clip_gradients) {
        const double norm = gradient_norm(grad);
        if (norm > config.clip_norm) {
          const float scale = static_cast<float>(config.clip_norm / norm);
          for (auto& t : grad.tensors()) *t.tensor *= scale;
        }
      }
      optimizer.step(model.params(), grad, lr);
      result.step_losses.push_back(loss);
      loss_sum += loss;
      ++steps;
      ++global_step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = global_step;
    rec.loss = loss_sum / steps;
    rec.lr = lr;
    const bool validate_now = validation_set.size() > 0 && (epoch % config.validate_every == 0 || epoch == config.epochs);
    if (validate_now) {
      rec.val_mae = validation_mae(model, result.schedule, validation_set, config);
      if (*rec.val_mae < result.best_val_mae) {
        result.best_val_mae = *rec.val_mae;
        result.best_epoch = epoch;
        result.best = model.params();
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.epochs.push_back(rec);
    if (log) {
      nlohmann::json line = {{"epoch", rec.epoch}, {"step", rec.step}, {"loss", rec.loss}, {"lr", rec.lr},
                             {"val_mae", rec.val_mae ? nlohmann::json(*rec.val_mae) : nlohmann::json(nullptr)},
                             {"seconds", rec.seconds}};
      *log << line.dump() << '\n' << std::flush;
    }
    if (on_epoch) on_epoch(rec);
  }

  result.final = model.params();
  if (result.best_epoch == 0) {
    result.best = result.final;
    result.best_epoch = config.epochs;
    result.best_val_mae = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

}  // namespace hagi
