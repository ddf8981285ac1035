#pragma once

#include "hagi/geometry.hpp"
#include "hagi/nn.hpp"
#include "hagi/sequences.hpp"

#include <string>
#include <vector>

namespace hagi {

enum class DenoiserMode { Imputation, Generation };

std::string to_string(DenoiserMode mode);
DenoiserMode denoiser_mode_from_string(const std::string& name);

struct DenoiserConfig {
  int seq_len = kDefaultWindowLength;
  int latent_dim = 64;  // D
  int blocks = 4;       // N
  int heads = 8;
  int ffn_multiplier = 4;
  int bands = 4;  // Fourier bands on flattened motion
  /// Motion streams in canonical order (head, wrist-left, wrist-right). Empty
  /// disables motion conditioning (the csdi-lite ablation).
  std::vector<MotionSource> modalities = {MotionSource::Head};
  DenoiserMode mode = DenoiserMode::Imputation;
  bool film = true;
  bool positional_encoding = true;
  MotionFilter head_filter = MotionFilter::Full;
  MotionFilter wrist_filter = MotionFilter::Full;

  void validate() const;

  bool imputation() const { return mode == DenoiserMode::Imputation; }
  /// Width of the gaze tokens G: 2D (noisy + observed) or D in generation mode.
  int token_width() const { return imputation() ? 2 * latent_dim : latent_dim; }
  /// Streams concatenated into B: motion modalities plus the mask when imputing.
  int motion_streams() const { return static_cast<int>(modalities.size()) + (imputation() ? 1 : 0); }
  int motion_width() const { return motion_streams() * latent_dim; }
  int feature_width() const { return encoded_width(bands); }
  int context_width() const { return static_cast<int>(modalities.size()) * feature_width(); }
  bool uses_film() const { return film && !modalities.empty(); }
  bool has_modality(MotionSource s) const;
};

template <typename Scalar>
struct BlockParams {
  nn::Linear<Scalar> step;

  nn::LayerNorm<Scalar> self_norm;
  nn::Linear<Scalar> self_q, self_k, self_v, self_out;

  nn::LayerNorm<Scalar> cross_norm;
  std::vector<nn::LayerNorm<Scalar>> context_norms;  // one per B stream
  nn::Linear<Scalar> cross_q, cross_k, cross_v, cross_out;

  nn::LayerNorm<Scalar> ffn_norm;
  nn::Linear<Scalar> ffn_in, ffn_out;

  nn::Linear<Scalar> film_context, film_scale, film_shift;
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Matrix<Scalar>* tensor;
};

template <typename Scalar>
struct ConstNamedTensor {
  std::string name;
  const Matrix<Scalar>* tensor;
};

template <typename Scalar>
struct DenoiserParams {
  nn::Perceptron<Scalar> noisy;
  nn::Perceptron<Scalar> observed;  // imputation only
  nn::Perceptron<Scalar> mask;      // imputation only
  std::vector<nn::Perceptron<Scalar>> motion;  // per modality
  nn::Perceptron<Scalar> step;
  std::vector<BlockParams<Scalar>> blocks;
  nn::Perceptron<Scalar> output;

  /// Every learnable tensor with a stable dotted name, in a fixed order.
  std::vector<NamedTensor<Scalar>> tensors();
  std::vector<ConstNamedTensor<Scalar>> tensors() const;

  /// Same shapes, all zeros (gradient accumulator).
  DenoiserParams zeros_like() const;
  std::size_t parameter_count() const;

  template <typename Other>
  DenoiserParams<Other> cast() const;
};

/// Allocates and initializes weights: fan-in uniform for linear layers,
/// LayerNorm at identity, FiLM at identity (scale 1, shift 0) and a zero
/// final output layer so the initial noise estimate is zero.
template <typename Scalar>
DenoiserParams<Scalar> init_params(const DenoiserConfig& config, Rng& rng);

/// Per-window conditioning that does not depend on the diffusion state:
/// Fourier-encoded motion streams and their mean-pooled context vector.
template <typename Scalar>
struct EncodedConditioning {
  std::vector<Matrix<Scalar>> motion;  // per modality, L x feature_width
  Matrix<Scalar> context;              // 1 x context_width
};

/// Applies the configured ablation filters and Fourier-encodes every declared
/// modality. Throws ValidationError naming a modality missing from the sample.
template <typename Scalar>
EncodedConditioning<Scalar> encode_conditioning(const Sample& sample, const DenoiserConfig& config);

/// Stacked model input for a batch of windows.
template <typename Scalar>
struct DenoiserInput {
  int windows = 0;
  Matrix<Scalar> noisy;     // (windows*L) x 2
  Matrix<Scalar> observed;  // (windows*L) x 2, imputation only
  Matrix<Scalar> mask;      // (windows*L) x 1, imputation only
  std::vector<Matrix<Scalar>> motion;
  Matrix<Scalar> context;  // windows x context_width
  std::vector<int> steps;  // one per window
};

/// Builds DenoiserInput window by window.
template <typename Scalar>
class InputBuilder {
 public:
  InputBuilder(const DenoiserConfig& config, int capacity);

  /// Imputation window: the noisy stream is x_t at non-conditioning frames and
  /// zero elsewhere; the observed stream is x0 at conditioning frames.
  void add_imputation(const EncodedConditioning<Scalar>& cond, const Matrix<Scalar>& x_t, const MatrixXd& x0_values,
                      const std::vector<std::uint8_t>& conditioning, int step);
  /// Generation window: noisy stream is x_t everywhere; no gaze is observed.
  void add_generation(const EncodedConditioning<Scalar>& cond, const Matrix<Scalar>& x_t, int step);

  DenoiserInput<Scalar> finish();

 private:
  void add_common(const EncodedConditioning<Scalar>& cond, int step);

  const DenoiserConfig& config_;
  DenoiserInput<Scalar> input_;
  int capacity_;
};

template <typename Scalar>
struct TokenTensors {
  Matrix<Scalar> gaze;     // G: (windows*L) x token_width
  Matrix<Scalar> motion;   // B: (windows*L) x motion_width
  Matrix<Scalar> context;  // C: windows x context_width
};

template <typename Scalar>
struct BlockCache {
  Matrix<Scalar> step_in;
  nn::LayerNormCache<Scalar> self_norm;
  Matrix<Scalar> self_in, self_q, self_k, self_v, self_attended;
  std::vector<Matrix<Scalar>> self_probs;

  nn::LayerNormCache<Scalar> cross_norm;
  std::vector<nn::LayerNormCache<Scalar>> context_norm;
  Matrix<Scalar> cross_in, context_in, cross_q, cross_k, cross_v, cross_attended;
  std::vector<Matrix<Scalar>> cross_probs;

  nn::LayerNormCache<Scalar> ffn_norm;
  Matrix<Scalar> ffn_x, ffn_pre, ffn_hidden;

  Matrix<Scalar> film_in, film_z, film_scale;
};

template <typename Scalar>
struct ForwardTrace {
  nn::PerceptronCache<Scalar> noisy, observed, mask, step, output;
  std::vector<nn::PerceptronCache<Scalar>> motion;
  TokenTensors<Scalar> tokens;
  Matrix<Scalar> step_features;  // windows x token_width
  std::vector<BlockCache<Scalar>> blocks;
  Matrix<Scalar> final_gaze;
};

/// The transformer noise estimator.
template <typename Scalar>
class Denoiser {
 public:
  Denoiser(DenoiserConfig config, DenoiserParams<Scalar> params);

  const DenoiserConfig& config() const { return config_; }
  const DenoiserParams<Scalar>& params() const { return params_; }
  DenoiserParams<Scalar>& params() { return params_; }

  TokenTensors<Scalar> embed(const DenoiserInput<Scalar>& input) const;

  /// Noise estimate, (windows*L) x 2.
  Matrix<Scalar> predict(const DenoiserInput<Scalar>& input) const;

  /// Runs forward and backward for the masked noise loss. Returns the mean over
  /// windows of each window's L2 loss and accumulates d(mean)/d(params) into
  /// `grad`. `target` flags (windows*L) frames that count toward the loss.
  double loss_and_gradient(const DenoiserInput<Scalar>& input, const Matrix<Scalar>& eps,
                           const std::vector<std::uint8_t>& target, DenoiserParams<Scalar>& grad) const;

  /// Mean over windows of the masked L2 noise loss (forward only).
  double loss(const DenoiserInput<Scalar>& input, const Matrix<Scalar>& eps,
              const std::vector<std::uint8_t>& target) const;

  /// Forward pass retaining intermediate activations (for tests and backward).
  Matrix<Scalar> forward(const DenoiserInput<Scalar>& input, ForwardTrace<Scalar>* trace) const;

  /// Single block update; exposed so the block can be exercised in isolation.
  Matrix<Scalar> block_forward(const Matrix<Scalar>& gaze, const Matrix<Scalar>& motion,
                               const Matrix<Scalar>& context, const Matrix<Scalar>& step_features, int block,
                               int windows, BlockCache<Scalar>* cache) const;

 private:
  void check_input(const DenoiserInput<Scalar>& input) const;

  DenoiserConfig config_;
  DenoiserParams<Scalar> params_;
  Matrix<Scalar> positional_;  // L x D
};

}  // namespace hagi
