#include "hagi/model.hpp"

#include "hagi/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hagi {

std::string to_string(DenoiserMode mode) {
  return mode == DenoiserMode::Imputation ? "imputation" : "generation";
}

DenoiserMode denoiser_mode_from_string(const std::string& name) {
  if (name == "imputation" || name == "impute") return DenoiserMode::Imputation;
  if (name == "generation" || name == "generate") return DenoiserMode::Generation;
  throw ConfigError("unknown mode '" + name + "' (expected impute or generate)");
}

bool DenoiserConfig::has_modality(MotionSource s) const {
  return std::find(modalities.begin(), modalities.end(), s) != modalities.end();
}

void DenoiserConfig::validate() const {
  if (seq_len < 1) throw ConfigError("sequence length must be positive");
  if (latent_dim < 1 || blocks < 1 || heads < 1 || ffn_multiplier < 1) {
    throw ConfigError("latent_dim, blocks, heads and ffn_multiplier must be positive");
  }
  if (latent_dim % heads != 0 || (2 * latent_dim) % heads != 0) {
    throw ConfigError("latent_dim must be divisible by the head count");
  }
  if (bands < 0) throw ConfigError("Fourier band count must be >= 0");
  std::set<MotionSource> seen;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (!seen.insert(modalities[i]).second) throw ConfigError("modality listed twice: " + to_string(modalities[i]));
    if (i > 0 && modalities[i] < modalities[i - 1]) {
      throw ConfigError("modalities must be in canonical order head, wrist-left, wrist-right");
    }
  }
  if (!imputation() && modalities.empty()) {
    throw ConfigError("generation mode needs at least one motion modality");
  }
}

namespace {

// B stream layout: head, mask (imputation), wrists. Entries index
// config.modalities; kMaskStream marks the mask.
constexpr int kMaskStream = -1;

std::vector<int> stream_layout(const DenoiserConfig& config) {
  std::vector<int> layout;
  std::size_t next = 0;
  if (!config.modalities.empty() && config.modalities.front() == MotionSource::Head) layout.push_back(int(next++));
  if (config.imputation()) layout.push_back(kMaskStream);
  for (; next < config.modalities.size(); ++next) layout.push_back(int(next));
  return layout;
}

template <typename S, typename P, typename F>
void visit_tensors(P& p, F&& f) {
  const auto lin = [&](const std::string& name, auto& l) {
    if (l.weight.size() == 0 && l.bias.size() == 0) return;
    f(name + ".weight", l.weight);
    f(name + ".bias", l.bias);
  };
  const auto mlp = [&](const std::string& name, auto& m) {
    lin(name + ".hidden", m.hidden);
    lin(name + ".out", m.out);
  };
  const auto norm = [&](const std::string& name, auto& n) {
    f(name + ".gamma", n.gamma);
    f(name + ".beta", n.beta);
  };
  mlp("noisy", p.noisy);
  mlp("observed", p.observed);
  mlp("mask", p.mask);
  for (std::size_t i = 0; i < p.motion.size(); ++i) mlp("motion." + std::to_string(i), p.motion[i]);
  mlp("step", p.step);
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    auto& blk = p.blocks[b];
    const std::string pre = "blocks." + std::to_string(b) + ".";
    lin(pre + "step", blk.step);
    norm(pre + "self_norm", blk.self_norm);
    lin(pre + "self_q", blk.self_q);
    lin(pre + "self_k", blk.self_k);
    lin(pre + "self_v", blk.self_v);
    lin(pre + "self_out", blk.self_out);
    norm(pre + "cross_norm", blk.cross_norm);
    for (std::size_t c = 0; c < blk.context_norms.size(); ++c)
      norm(pre + "context_norm." + std::to_string(c), blk.context_norms[c]);
    lin(pre + "cross_q", blk.cross_q);
    lin(pre + "cross_k", blk.cross_k);
    lin(pre + "cross_v", blk.cross_v);
    lin(pre + "cross_out", blk.cross_out);
    norm(pre + "ffn_norm", blk.ffn_norm);
    lin(pre + "ffn_in", blk.ffn_in);
    lin(pre + "ffn_out", blk.ffn_out);
    lin(pre + "film_context", blk.film_context);
    lin(pre + "film_scale", blk.film_scale);
    lin(pre + "film_shift", blk.film_shift);
  }
  mlp("output", p.output);
}

template <typename S>
nn::Linear<S> make_linear(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(in, 1)));
  std::uniform_real_distribution<double> uni(-bound, bound);
  nn::Linear<S> l;
  l.weight.resize(in, out);
  l.bias.resize(1, out);
  for (Eigen::Index c = 0; c < out; ++c)
    for (Eigen::Index r = 0; r < in; ++r) l.weight(r, c) = static_cast<S>(uni(rng));
  for (Eigen::Index c = 0; c < out; ++c) l.bias(0, c) = static_cast<S>(uni(rng));
  return l;
}

template <typename S>
nn::Perceptron<S> make_perceptron(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, Rng& rng) {
  nn::Perceptron<S> p;
  p.hidden = make_linear<S>(in, hidden, rng);
  p.out = make_linear<S>(hidden, out, rng);
  return p;
}

template <typename S>
nn::LayerNorm<S> make_norm(Eigen::Index width) {
  return {Matrix<S>::Ones(1, width), Matrix<S>::Zero(1, width)};
}

template <typename To, typename From>
nn::Linear<To> cast_linear(const nn::Linear<From>& l) {
  return {l.weight.template cast<To>(), l.bias.template cast<To>()};
}

template <typename To, typename From>
nn::Perceptron<To> cast_perceptron(const nn::Perceptron<From>& p) {
  return {cast_linear<To>(p.hidden), cast_linear<To>(p.out)};
}

template <typename To, typename From>
nn::LayerNorm<To> cast_norm(const nn::LayerNorm<From>& n) {
  return {n.gamma.template cast<To>(), n.beta.template cast<To>()};
}

/// Adds row w of `per_window` to the L rows of window w.
template <typename S>
void add_per_window(Matrix<S>& tokens, const Matrix<S>& per_window, int length) {
  for (Eigen::Index w = 0; w < per_window.rows(); ++w) tokens.middleRows(w * length, length).rowwise() += per_window.row(w);
}

/// Column sums of each window's L rows, one output row per window.
template <typename S>
Matrix<S> sum_per_window(const Matrix<S>& tokens, int windows, int length) {
  Matrix<S> out(windows, tokens.cols());
  for (int w = 0; w < windows; ++w) out.row(w) = tokens.middleRows(Eigen::Index(w) * length, length).colwise().sum();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

template <typename S>
std::vector<NamedTensor<S>> DenoiserParams<S>::tensors() {
  std::vector<NamedTensor<S>> out;
  visit_tensors<S>(*this, [&](const std::string& name, Matrix<S>& t) { out.push_back({name, &t}); });
  return out;
}

template <typename S>
std::vector<ConstNamedTensor<S>> DenoiserParams<S>::tensors() const {
  std::vector<ConstNamedTensor<S>> out;
  visit_tensors<S>(*this, [&](const std::string& name, const Matrix<S>& t) { out.push_back({name, &t}); });
  return out;
}

template <typename S>
DenoiserParams<S> DenoiserParams<S>::zeros_like() const {
  DenoiserParams<S> out = *this;
  for (auto& t : out.tensors()) t.tensor->setZero();
  return out;
}

template <typename S>
std::size_t DenoiserParams<S>::parameter_count() const {
  std::size_t n = 0;
  visit_tensors<S>(*this, [&](const std::string&, const Matrix<S>& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

template <typename S>
template <typename Other>
DenoiserParams<Other> DenoiserParams<S>::cast() const {
  DenoiserParams<Other> o;
  o.noisy = cast_perceptron<Other>(noisy);
  o.observed = cast_perceptron<Other>(observed);
  o.mask = cast_perceptron<Other>(mask);
  for (const auto& m : motion) o.motion.push_back(cast_perceptron<Other>(m));
  o.step = cast_perceptron<Other>(step);
  for (const auto& b : blocks) {
    BlockParams<Other> c;
    c.step = cast_linear<Other>(b.step);
    c.self_norm = cast_norm<Other>(b.self_norm);
    c.self_q = cast_linear<Other>(b.self_q);
    c.self_k = cast_linear<Other>(b.self_k);
    c.self_v = cast_linear<Other>(b.self_v);
    c.self_out = cast_linear<Other>(b.self_out);
    c.cross_norm = cast_norm<Other>(b.cross_norm);
    for (const auto& n : b.context_norms) c.context_norms.push_back(cast_norm<Other>(n));
    c.cross_q = cast_linear<Other>(b.cross_q);
    c.cross_k = cast_linear<Other>(b.cross_k);
    c.cross_v = cast_linear<Other>(b.cross_v);
    c.cross_out = cast_linear<Other>(b.cross_out);
    c.ffn_norm = cast_norm<Other>(b.ffn_norm);
    c.ffn_in = cast_linear<Other>(b.ffn_in);
    c.ffn_out = cast_linear<Other>(b.ffn_out);
    c.film_context = cast_linear<Other>(b.film_context);
    c.film_scale = cast_linear<Other>(b.film_scale);
    c.film_shift = cast_linear<Other>(b.film_shift);
    o.blocks.push_back(std::move(c));
  }
  o.output = cast_perceptron<Other>(output);
  return o;
}

template <typename S>
DenoiserParams<S> init_params(const DenoiserConfig& config, Rng& rng) {
  config.validate();
  const int D = config.latent_dim;
  const int W = config.token_width();
  const int F = config.feature_width();
  DenoiserParams<S> p;
  p.noisy = make_perceptron<S>(2, D, D, rng);
  if (config.imputation()) {
    p.observed = make_perceptron<S>(2, D, D, rng);
    p.mask = make_perceptron<S>(1, D, D, rng);
  }
  for (std::size_t i = 0; i < config.modalities.size(); ++i) p.motion.push_back(make_perceptron<S>(F, D, D, rng));
  p.step = make_perceptron<S>(W, W, W, rng);
  for (int b = 0; b < config.blocks; ++b) {
    BlockParams<S> blk;
    blk.step = make_linear<S>(W, W, rng);
    blk.self_norm = make_norm<S>(W);
    blk.self_q = make_linear<S>(W, W, rng);
    blk.self_k = make_linear<S>(W, W, rng);
    blk.self_v = make_linear<S>(W, W, rng);
    blk.self_out = make_linear<S>(W, W, rng);
    blk.cross_norm = make_norm<S>(W);
    for (int c = 0; c < config.motion_streams(); ++c) blk.context_norms.push_back(make_norm<S>(D));
    blk.cross_q = make_linear<S>(W, W, rng);
    blk.cross_k = make_linear<S>(config.motion_width(), W, rng);
    blk.cross_v = make_linear<S>(config.motion_width(), W, rng);
    blk.cross_out = make_linear<S>(W, W, rng);
    blk.ffn_norm = make_norm<S>(W);
    blk.ffn_in = make_linear<S>(W, W * config.ffn_multiplier, rng);
    blk.ffn_out = make_linear<S>(W * config.ffn_multiplier, W, rng);
    if (config.uses_film()) {
      blk.film_context = make_linear<S>(config.context_width(), W, rng);
      blk.film_scale = {Matrix<S>::Zero(W, W), Matrix<S>::Ones(1, W)};
      blk.film_shift = {Matrix<S>::Zero(W, W), Matrix<S>::Zero(1, W)};
    }
    p.blocks.push_back(std::move(blk));
  }
  p.output = make_perceptron<S>(W, W, 2, rng);
  p.output.out.weight.setZero();
  p.output.out.bias.setZero();
  return p;
}

// ---------------------------------------------------------------------------
// Conditioning and input assembly

template <typename S>
EncodedConditioning<S> encode_conditioning(const Sample& sample, const DenoiserConfig& config) {
  EncodedConditioning<S> out;
  const int F = config.feature_width();
  out.context.resize(1, config.context_width());
  for (std::size_t i = 0; i < config.modalities.size(); ++i) {
    const MotionSource source = config.modalities[i];
    const RelativeMotion<double>* motion = sample.motion(source);
    if (!motion) throw ValidationError("sample lacks the '" + to_string(source) + "' modality");
    if (static_cast<int>(motion->length()) != config.seq_len) {
      throw ValidationError("'" + to_string(source) + "' stream has " + std::to_string(motion->length()) +
                            " frames, model expects " + std::to_string(config.seq_len));
    }
    const MotionFilter filter = source == MotionSource::Head ? config.head_filter : config.wrist_filter;
    Matrix<S> enc = flatten_and_encode(apply_filter(*motion, filter), config.bands).template cast<S>();
    out.context.middleCols(Eigen::Index(i) * F, F) = enc.colwise().mean();
    out.motion.push_back(std::move(enc));
  }
  return out;
}

template <typename S>
InputBuilder<S>::InputBuilder(const DenoiserConfig& config, int capacity) : config_(config), capacity_(capacity) {
  const Eigen::Index rows = Eigen::Index(capacity) * config.seq_len;
  input_.noisy.resize(rows, 2);
  if (config.imputation()) {
    input_.observed.resize(rows, 2);
    input_.mask.resize(rows, 1);
  }
  input_.motion.assign(config.modalities.size(), Matrix<S>(rows, config.feature_width()));
  input_.context.resize(capacity, config.context_width());
}

template <typename S>
void InputBuilder<S>::add_common(const EncodedConditioning<S>& cond, int step) {
  if (input_.windows >= capacity_) throw RuntimeFailure("InputBuilder capacity exceeded");
  if (cond.motion.size() != config_.modalities.size()) throw ValidationError("conditioning modality count mismatch");
  const Eigen::Index r0 = Eigen::Index(input_.windows) * config_.seq_len;
  for (std::size_t i = 0; i < cond.motion.size(); ++i) input_.motion[i].middleRows(r0, config_.seq_len) = cond.motion[i];
  input_.context.row(input_.windows) = cond.context;
  input_.steps.push_back(step);
}

template <typename S>
void InputBuilder<S>::add_imputation(const EncodedConditioning<S>& cond, const Matrix<S>& x_t,
                                     const MatrixXd& x0_values, const std::vector<std::uint8_t>& conditioning,
                                     int step) {
  if (!config_.imputation()) throw ConfigError("imputation input given to a generation-mode model");
  const int L = config_.seq_len;
  if (x_t.rows() != L || x0_values.rows() != L || static_cast<int>(conditioning.size()) != L) {
    throw ValidationError("window length does not match the model's sequence length");
  }
  const Eigen::Index r0 = Eigen::Index(input_.windows) * L;
  for (int l = 0; l < L; ++l) {
    const bool obs = conditioning[static_cast<std::size_t>(l)] != 0;
    input_.noisy.row(r0 + l) = obs ? Matrix<S>::Zero(1, 2) : Matrix<S>(x_t.row(l));
    input_.observed.row(r0 + l) = obs ? Matrix<S>(x0_values.row(l).template cast<S>()) : Matrix<S>::Zero(1, 2);
    input_.mask(r0 + l, 0) = obs ? S(1) : S(0);
  }
  add_common(cond, step);
  ++input_.windows;
}

template <typename S>
void InputBuilder<S>::add_generation(const EncodedConditioning<S>& cond, const Matrix<S>& x_t, int step) {
  if (config_.imputation()) throw ConfigError("generation input given to an imputation-mode model");
  const int L = config_.seq_len;
  if (x_t.rows() != L) throw ValidationError("window length does not match the model's sequence length");
  input_.noisy.middleRows(Eigen::Index(input_.windows) * L, L) = x_t;
  add_common(cond, step);
  ++input_.windows;
}

template <typename S>
DenoiserInput<S> InputBuilder<S>::finish() {
  const Eigen::Index rows = Eigen::Index(input_.windows) * config_.seq_len;
  DenoiserInput<S> out = std::move(input_);
  out.noisy.conservativeResize(rows, 2);
  if (config_.imputation()) {
    out.observed.conservativeResize(rows, 2);
    out.mask.conservativeResize(rows, 1);
  }
  for (auto& m : out.motion) m.conservativeResize(rows, m.cols());
  out.context.conservativeResize(out.windows, out.context.cols());
  input_ = DenoiserInput<S>{};
  return out;
}

// ---------------------------------------------------------------------------
// Denoiser

template <typename S>
Denoiser<S>::Denoiser(DenoiserConfig config, DenoiserParams<S> params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  Rng rng(0);
  const auto reference = init_params<S>(config_, rng);
  const auto expected = reference.tensors();
  const auto actual = std::as_const(params_).tensors();
  if (expected.size() != actual.size()) {
    throw ValidationError("parameter set does not match the model configuration (" + std::to_string(actual.size()) +
                          " tensors, expected " + std::to_string(expected.size()) + ")");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i].name != actual[i].name || expected[i].tensor->rows() != actual[i].tensor->rows() ||
        expected[i].tensor->cols() != actual[i].tensor->cols()) {
      throw ValidationError("parameter '" + actual[i].name + "' does not match the model configuration");
    }
  }
  positional_ = config_.positional_encoding ? nn::sinusoidal_table<S>(config_.seq_len, config_.latent_dim)
                                            : Matrix<S>::Zero(config_.seq_len, config_.latent_dim);
}

template <typename S>
void Denoiser<S>::check_input(const DenoiserInput<S>& in) const {
  const Eigen::Index rows = Eigen::Index(in.windows) * config_.seq_len;
  if (in.noisy.rows() != rows || static_cast<int>(in.steps.size()) != in.windows) {
    throw ValidationError("model input is inconsistent with its window count");
  }
  if (config_.imputation()) {
    if (in.observed.rows() != rows || in.mask.rows() != rows) throw ValidationError("imputation input lacks observed gaze");
  } else if (in.observed.size() != 0 || in.mask.size() != 0) {
    throw ValidationError("observed gaze is not accepted in generation mode");
  }
  if (in.motion.size() != config_.modalities.size()) throw ValidationError("model input has the wrong modality count");
  for (const auto& m : in.motion)
    if (m.rows() != rows || m.cols() != config_.feature_width()) throw ValidationError("motion features have the wrong shape");
  if (in.context.rows() != in.windows || in.context.cols() != config_.context_width()) {
    throw ValidationError("context vector has the wrong shape");
  }
}

template <typename S>
TokenTensors<S> Denoiser<S>::embed(const DenoiserInput<S>& in) const {
  check_input(in);
  const int D = config_.latent_dim;
  const Matrix<S> pe = positional_.replicate(in.windows, 1);
  TokenTensors<S> t;
  t.gaze.resize(in.noisy.rows(), config_.token_width());
  t.gaze.leftCols(D) = nn::perceptron(in.noisy, params_.noisy, static_cast<nn::PerceptronCache<S>*>(nullptr)) + pe;
  if (config_.imputation()) {
    t.gaze.rightCols(D) = nn::perceptron(in.observed, params_.observed, static_cast<nn::PerceptronCache<S>*>(nullptr)) + pe;
  }
  const auto layout = stream_layout(config_);
  t.motion.resize(in.noisy.rows(), config_.motion_width());
  for (std::size_t c = 0; c < layout.size(); ++c) {
    auto chunk = t.motion.middleCols(Eigen::Index(c) * D, D);
    if (layout[c] == kMaskStream) {
      chunk = nn::perceptron(in.mask, params_.mask, static_cast<nn::PerceptronCache<S>*>(nullptr));
    } else {
      const auto i = static_cast<std::size_t>(layout[c]);
      chunk = nn::perceptron(in.motion[i], params_.motion[i], static_cast<nn::PerceptronCache<S>*>(nullptr)) + pe;
    }
  }
  t.context = in.context;
  return t;
}

template <typename S>
Matrix<S> Denoiser<S>::block_forward(const Matrix<S>& gaze, const Matrix<S>& motion, const Matrix<S>& context,
                                     const Matrix<S>& step_features, int block, int windows,
                                     BlockCache<S>* cache) const {
  const auto& p = params_.blocks.at(static_cast<std::size_t>(block));
  const int L = config_.seq_len;
  const int D = config_.latent_dim;

  // Diffusion step.
  Matrix<S> g = gaze;
  add_per_window(g, nn::linear(step_features, p.step), L);

  // Self-attention over gaze tokens.
  {
    nn::LayerNormCache<S>* nc = cache ? &cache->self_norm : nullptr;
    Matrix<S> a = nn::layer_norm(g, p.self_norm, nc);
    Matrix<S> q = nn::linear(a, p.self_q);
    Matrix<S> k = nn::linear(a, p.self_k);
    Matrix<S> v = nn::linear(a, p.self_v);
    Matrix<S> att = nn::attention(q, k, v, windows, L, config_.heads, cache ? &cache->self_probs : nullptr);
    g += nn::linear(att, p.self_out);
    if (cache) {
      cache->self_in = std::move(a);
      cache->self_q = std::move(q);
      cache->self_k = std::move(k);
      cache->self_v = std::move(v);
      cache->self_attended = std::move(att);
    }
  }

  // Cross-attention from gaze tokens to the motion context.
  {
    Matrix<S> a = nn::layer_norm(g, p.cross_norm, cache ? &cache->cross_norm : nullptr);
    Matrix<S> bn(motion.rows(), motion.cols());
    if (cache) cache->context_norm.resize(p.context_norms.size());
    for (std::size_t c = 0; c < p.context_norms.size(); ++c) {
      const Matrix<S> chunk = motion.middleCols(Eigen::Index(c) * D, D);
      bn.middleCols(Eigen::Index(c) * D, D) =
          nn::layer_norm(chunk, p.context_norms[c], cache ? &cache->context_norm[c] : nullptr);
    }
    Matrix<S> q = nn::linear(a, p.cross_q);
    Matrix<S> k = nn::linear(bn, p.cross_k);
    Matrix<S> v = nn::linear(bn, p.cross_v);
    Matrix<S> att = nn::attention(q, k, v, windows, L, config_.heads, cache ? &cache->cross_probs : nullptr);
    g += nn::linear(att, p.cross_out);
    if (cache) {
      cache->cross_in = std::move(a);
      cache->context_in = std::move(bn);
      cache->cross_q = std::move(q);
      cache->cross_k = std::move(k);
      cache->cross_v = std::move(v);
      cache->cross_attended = std::move(att);
    }
  }

  // Feed-forward.
  {
    Matrix<S> x = nn::layer_norm(g, p.ffn_norm, cache ? &cache->ffn_norm : nullptr);
    Matrix<S> pre = nn::linear(x, p.ffn_in);
    Matrix<S> h = nn::gelu(pre);
    g += nn::linear(h, p.ffn_out);
    if (cache) {
      cache->ffn_x = std::move(x);
      cache->ffn_pre = std::move(pre);
      cache->ffn_hidden = std::move(h);
    }
  }

  // FiLM skip fusion from the pooled motion context.
  if (config_.uses_film()) {
    Matrix<S> z = nn::linear(context, p.film_context);
    Matrix<S> scale = nn::linear(z, p.film_scale);
    const Matrix<S> shift = nn::linear(z, p.film_shift);
    if (cache) cache->film_in = g;
    for (int w = 0; w < windows; ++w) {
      auto rows = g.middleRows(Eigen::Index(w) * L, L);
      rows = (rows.array().rowwise() * scale.row(w).array()).matrix();
      rows.rowwise() += shift.row(w);
    }
    if (cache) {
      cache->film_z = std::move(z);
      cache->film_scale = std::move(scale);
    }
  }
  if (cache) cache->step_in = step_features;
  return g;
}

template <typename S>
Matrix<S> Denoiser<S>::forward(const DenoiserInput<S>& in, ForwardTrace<S>* trace) const {
  check_input(in);
  const int D = config_.latent_dim;
  const int W = config_.token_width();
  const Matrix<S> pe = positional_.replicate(in.windows, 1);

  TokenTensors<S> tokens;
  tokens.gaze.resize(in.noisy.rows(), W);
  tokens.gaze.leftCols(D) = nn::perceptron(in.noisy, params_.noisy, trace ? &trace->noisy : nullptr) + pe;
  if (config_.imputation()) {
    tokens.gaze.rightCols(D) = nn::perceptron(in.observed, params_.observed, trace ? &trace->observed : nullptr) + pe;
  }
  const auto layout = stream_layout(config_);
  if (trace) trace->motion.resize(config_.modalities.size());
  tokens.motion.resize(in.noisy.rows(), config_.motion_width());
  for (std::size_t c = 0; c < layout.size(); ++c) {
    auto chunk = tokens.motion.middleCols(Eigen::Index(c) * D, D);
    if (layout[c] == kMaskStream) {
      chunk = nn::perceptron(in.mask, params_.mask, trace ? &trace->mask : nullptr);
    } else {
      const auto i = static_cast<std::size_t>(layout[c]);
      chunk = nn::perceptron(in.motion[i], params_.motion[i], trace ? &trace->motion[i] : nullptr) + pe;
    }
  }
  tokens.context = in.context;

  const Matrix<S> step_features =
      nn::perceptron(nn::step_embedding<S>(in.steps, W), params_.step, trace ? &trace->step : nullptr);

  Matrix<S> g = tokens.gaze;
  if (trace) trace->blocks.resize(params_.blocks.size());
  for (int b = 0; b < config_.blocks; ++b) {
    g = block_forward(g, tokens.motion, tokens.context, step_features, b, in.windows,
                      trace ? &trace->blocks[static_cast<std::size_t>(b)] : nullptr);
  }
  Matrix<S> out = nn::perceptron(g, params_.output, trace ? &trace->output : nullptr);
  if (trace) {
    trace->tokens = std::move(tokens);
    trace->step_features = step_features;
    trace->final_gaze = std::move(g);
  }
  return out;
}

template <typename S>
Matrix<S> Denoiser<S>::predict(const DenoiserInput<S>& in) const {
  return forward(in, nullptr);
}

namespace {

template <typename S>
double window_losses(const Matrix<S>& eps_hat, const Matrix<S>& eps, const std::vector<std::uint8_t>& target,
                     int windows, int L, Matrix<S>* grad) {
  if (eps.rows() != eps_hat.rows() || eps.cols() != 2 || static_cast<Eigen::Index>(target.size()) != eps.rows()) {
    throw ValidationError("noise target does not match the model output");
  }
  if (grad) grad->setZero(eps.rows(), 2);
  double total = 0.0;
  for (int w = 0; w < windows; ++w) {
    const Eigen::Index r0 = Eigen::Index(w) * L;
    double sum = 0.0;
    for (int l = 0; l < L; ++l) {
      if (!target[static_cast<std::size_t>(r0 + l)]) continue;
      const auto diff = (eps_hat.row(r0 + l) - eps.row(r0 + l)).eval();
      sum += static_cast<double>(diff.squaredNorm());
      if (grad) grad->row(r0 + l) = diff;
    }
    const double norm = std::sqrt(sum);
    total += norm;
    if (grad) {
      if (norm > 0.0) {
        grad->middleRows(r0, L) *= S(1.0 / (norm * windows));
      } else {
        grad->middleRows(r0, L).setZero();
      }
    }
  }
  return total / windows;
}

}  // namespace

template <typename S>
double Denoiser<S>::loss(const DenoiserInput<S>& in, const Matrix<S>& eps,
                         const std::vector<std::uint8_t>& target) const {
  return window_losses<S>(predict(in), eps, target, in.windows, config_.seq_len, nullptr);
}

template <typename S>
double Denoiser<S>::loss_and_gradient(const DenoiserInput<S>& in, const Matrix<S>& eps,
                                      const std::vector<std::uint8_t>& target, DenoiserParams<S>& grad) const {
  ForwardTrace<S> tr;
  const Matrix<S> eps_hat = forward(in, &tr);
  Matrix<S> d_out;
  const double value = window_losses<S>(eps_hat, eps, target, in.windows, config_.seq_len, &d_out);

  const int L = config_.seq_len;
  const int D = config_.latent_dim;
  const int windows = in.windows;

  Matrix<S> dg = nn::perceptron_backward(tr.output, params_.output, d_out, grad.output);
  Matrix<S> d_motion = Matrix<S>::Zero(tr.tokens.motion.rows(), tr.tokens.motion.cols());
  Matrix<S> d_step = Matrix<S>::Zero(tr.step_features.rows(), tr.step_features.cols());

  for (int b = config_.blocks - 1; b >= 0; --b) {
    const auto& p = params_.blocks[static_cast<std::size_t>(b)];
    auto& gp = grad.blocks[static_cast<std::size_t>(b)];
    const auto& c = tr.blocks[static_cast<std::size_t>(b)];

    // FiLM
    if (config_.uses_film()) {
      Matrix<S> d_scale(windows, dg.cols());
      Matrix<S> d_shift(windows, dg.cols());
      for (int w = 0; w < windows; ++w) {
        const auto rows = dg.middleRows(Eigen::Index(w) * L, L);
        d_scale.row(w) = (rows.array() * c.film_in.middleRows(Eigen::Index(w) * L, L).array()).colwise().sum().matrix();
        d_shift.row(w) = rows.colwise().sum();
      }
      for (int w = 0; w < windows; ++w) {
        auto rows = dg.middleRows(Eigen::Index(w) * L, L);
        rows = (rows.array().rowwise() * c.film_scale.row(w).array()).matrix();
      }
      Matrix<S> dz = nn::linear_backward(c.film_z, p.film_scale, d_scale, gp.film_scale);
      dz += nn::linear_backward(c.film_z, p.film_shift, d_shift, gp.film_shift);
      nn::linear_backward(tr.tokens.context, p.film_context, dz, gp.film_context);
    }

    // Feed-forward
    {
      const Matrix<S> dh = nn::linear_backward(c.ffn_hidden, p.ffn_out, dg, gp.ffn_out);
      const Matrix<S> dpre = nn::gelu_backward(c.ffn_pre, dh);
      const Matrix<S> dx = nn::linear_backward(c.ffn_x, p.ffn_in, dpre, gp.ffn_in);
      dg += nn::layer_norm_backward(c.ffn_norm, p.ffn_norm, dx, gp.ffn_norm);
    }

    // Cross-attention
    {
      const Matrix<S> datt = nn::linear_backward(c.cross_attended, p.cross_out, dg, gp.cross_out);
      Matrix<S> dq, dk, dv;
      nn::attention_backward(c.cross_q, c.cross_k, c.cross_v, c.cross_probs, datt, windows, L, config_.heads, dq, dk,
                             dv);
      const Matrix<S> da = nn::linear_backward(c.cross_in, p.cross_q, dq, gp.cross_q);
      Matrix<S> dbn = nn::linear_backward(c.context_in, p.cross_k, dk, gp.cross_k);
      dbn += nn::linear_backward(c.context_in, p.cross_v, dv, gp.cross_v);
      for (std::size_t s = 0; s < p.context_norms.size(); ++s) {
        const Matrix<S> chunk = dbn.middleCols(Eigen::Index(s) * D, D);
        d_motion.middleCols(Eigen::Index(s) * D, D) +=
            nn::layer_norm_backward(c.context_norm[s], p.context_norms[s], chunk, gp.context_norms[s]);
      }
      dg += nn::layer_norm_backward(c.cross_norm, p.cross_norm, da, gp.cross_norm);
    }

    // Self-attention
    {
      const Matrix<S> datt = nn::linear_backward(c.self_attended, p.self_out, dg, gp.self_out);
      Matrix<S> dq, dk, dv;
      nn::attention_backward(c.self_q, c.self_k, c.self_v, c.self_probs, datt, windows, L, config_.heads, dq, dk, dv);
      Matrix<S> da = nn::linear_backward(c.self_in, p.self_q, dq, gp.self_q);
      da += nn::linear_backward(c.self_in, p.self_k, dk, gp.self_k);
      da += nn::linear_backward(c.self_in, p.self_v, dv, gp.self_v);
      dg += nn::layer_norm_backward(c.self_norm, p.self_norm, da, gp.self_norm);
    }

    // Diffusion step
    d_step += nn::linear_backward(c.step_in, p.step, sum_per_window(dg, windows, L), gp.step);
  }

  nn::perceptron_backward(tr.step, params_.step, d_step, grad.step);
  nn::perceptron_backward(tr.noisy, params_.noisy, Matrix<S>(dg.leftCols(D)), grad.noisy);
  if (config_.imputation()) {
    nn::perceptron_backward(tr.observed, params_.observed, Matrix<S>(dg.rightCols(D)), grad.observed);
  }
  const auto layout = stream_layout(config_);
  for (std::size_t c = 0; c < layout.size(); ++c) {
    const Matrix<S> chunk = d_motion.middleCols(Eigen::Index(c) * D, D);
    if (layout[c] == kMaskStream) {
      nn::perceptron_backward(tr.mask, params_.mask, chunk, grad.mask);
    } else {
      const auto i = static_cast<std::size_t>(layout[c]);
      nn::perceptron_backward(tr.motion[i], params_.motion[i], chunk, grad.motion[i]);
    }
  }
  return value;
}

template struct DenoiserParams<float>;
template struct DenoiserParams<double>;
template DenoiserParams<float> DenoiserParams<double>::cast<float>() const;
template DenoiserParams<double> DenoiserParams<float>::cast<double>() const;
template DenoiserParams<double> DenoiserParams<double>::cast<double>() const;
template DenoiserParams<float> DenoiserParams<float>::cast<float>() const;
template DenoiserParams<float> init_params<float>(const DenoiserConfig&, Rng&);
template DenoiserParams<double> init_params<double>(const DenoiserConfig&, Rng&);
template EncodedConditioning<float> encode_conditioning<float>(const Sample&, const DenoiserConfig&);
template EncodedConditioning<double> encode_conditioning<double>(const Sample&, const DenoiserConfig&);
template class InputBuilder<float>;
template class InputBuilder<double>;
template class Denoiser<float>;
template class Denoiser<double>;

}  // namespace hagi
