#pragma once

#include "hagi/common.hpp"
#include "hagi/geometry.hpp"
#include "hagi/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace hagi {

/// Cumulative signal levels alpha_t for t = 1..T (stored at index t-1) with
/// the per-step quantities the reverse process needs.
struct NoiseSchedule {
  int steps = 0;
  double min_noise = 0.0;
  double max_noise = 0.0;
  std::vector<double> noise;               // 1 - alpha_t, kept exact
  std::vector<double> alpha;               // cumulative, strictly decreasing
  std::vector<double> beta;                // 1 - alpha_t / alpha_{t-1}, alpha_0 = 1
  std::vector<double> posterior_variance;  // beta_t (1 - alpha_{t-1}) / (1 - alpha_t)

  double noise_at(int t) const { return noise.at(static_cast<std::size_t>(t - 1)); }
  double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t - 1)); }
  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double posterior_variance_at(int t) const { return posterior_variance.at(static_cast<std::size_t>(t - 1)); }
  void check_step(int t) const;
};

/// Cosine-shaped noise levels:
///   1 - alpha_t = min + (max - min) * (1 - cos(pi (t-1)/(T-1))) / 2
NoiseSchedule build_schedule(int steps, double min_noise, double max_noise);

/// Rebuilds alpha and the per-step vectors from the noise levels 1 - alpha_t
/// (used after loading).
NoiseSchedule schedule_from_noise(std::vector<double> noise, double min_noise, double max_noise);

/// x_t = sqrt(alpha_t) x0 + sqrt(1 - alpha_t) eps
template <typename D0, typename DE>
Matrix<typename D0::Scalar> forward_noise(const Eigen::MatrixBase<D0>& x0, int t, const NoiseSchedule& schedule,
                                          const Eigen::MatrixBase<DE>& eps) {
  using S = typename D0::Scalar;
  schedule.check_step(t);
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ValidationError("forward_noise: shape mismatch");
  const double a = schedule.alpha_at(t);
  return (S(std::sqrt(a)) * x0 + S(std::sqrt(1.0 - a)) * eps).eval();
}

/// Reverse-process mean from a noise estimate:
///   mu = (x_t - beta_t / sqrt(1 - alpha_t) * eps_hat) / sqrt(1 - beta_t)
/// where alpha_t is cumulative and beta_t the per-step noise level.
template <typename DX, typename DE>
Matrix<typename DX::Scalar> denoise_mean(const Eigen::MatrixBase<DX>& x_t, int t, const Eigen::MatrixBase<DE>& eps_hat,
                                         const NoiseSchedule& schedule) {
  using S = typename DX::Scalar;
  schedule.check_step(t);
  if (x_t.rows() != eps_hat.rows() || x_t.cols() != eps_hat.cols()) {
    throw ValidationError("denoise_mean: shape mismatch");
  }
  const double beta = schedule.beta_at(t);
  const double coeff = beta / std::sqrt(1.0 - schedule.alpha_at(t));
  return ((x_t - S(coeff) * eps_hat) / S(std::sqrt(1.0 - beta))).eval();
}

/// Mean of q(x_{t-1} | x_t, x_0): the target denoise_mean reaches with the true noise.
template <typename D0, typename DX>
Matrix<typename D0::Scalar> posterior_mean(const Eigen::MatrixBase<D0>& x0, const Eigen::MatrixBase<DX>& x_t, int t,
                                           const NoiseSchedule& schedule) {
  using S = typename D0::Scalar;
  schedule.check_step(t);
  const double a_t = schedule.alpha_at(t);
  const double a_prev = t > 1 ? schedule.alpha_at(t - 1) : 1.0;
  const double beta = schedule.beta_at(t);
  const double c0 = std::sqrt(a_prev) * beta / (1.0 - a_t);
  const double ct = std::sqrt(1.0 - beta) * (1.0 - a_prev) / (1.0 - a_t);
  return (S(c0) * x0 + S(ct) * x_t).eval();
}

/// Noise-prediction loss: L2 norm of (eps - eps_hat) over frames whose weight
/// is 1 (target and valid). Frame weights are per row.
template <typename DP, typename DE>
double masked_noise_loss(const Eigen::MatrixBase<DP>& eps_hat, const Eigen::MatrixBase<DE>& eps,
                         const std::vector<std::uint8_t>& frame_weight) {
  double sum = 0.0;
  for (Eigen::Index l = 0; l < eps.rows(); ++l) {
    if (!frame_weight[static_cast<std::size_t>(l)]) continue;
    sum += static_cast<double>((eps_hat.row(l) - eps.row(l)).squaredNorm());
  }
  return std::sqrt(sum);
}

/// d loss / d eps_hat for masked_noise_loss; zero where the loss is zero.
template <typename DP, typename DE>
Matrix<typename DP::Scalar> masked_noise_loss_grad(const Eigen::MatrixBase<DP>& eps_hat,
                                                   const Eigen::MatrixBase<DE>& eps,
                                                   const std::vector<std::uint8_t>& frame_weight) {
  using S = typename DP::Scalar;
  Matrix<S> grad = Matrix<S>::Zero(eps.rows(), eps.cols());
  for (Eigen::Index l = 0; l < eps.rows(); ++l) {
    if (frame_weight[static_cast<std::size_t>(l)]) grad.row(l) = eps_hat.row(l) - eps.row(l);
  }
  const double norm = static_cast<double>(grad.norm());
  if (norm > 0.0) grad /= S(norm);
  return grad;
}

/// Frames contributing to the loss and metrics: hidden and valid.
std::vector<std::uint8_t> target_frames(const ObservationMask& mask, const std::vector<std::uint8_t>& valid);

/// Frames the model sees as observed: observed and valid.
std::vector<std::uint8_t> conditioning_frames(const ObservationMask& mask, const std::vector<std::uint8_t>& valid);

template <typename Scalar>
Matrix<Scalar> standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = static_cast<Scalar>(normal(rng));
  return out;
}

/// Per-element median across equally shaped matrices (mean of the middle pair
/// for an even count).
MatrixXd elementwise_median(const std::vector<MatrixXd>& draws);

struct SampleResult {
  MatrixXd median;              // L x 2 angles in radians
  std::vector<MatrixXd> draws;  // each L x 2 angles in radians
};

/// Reverse diffusion for `n_draws` independent draws of one window.
///
/// `predict(x_t, t)` receives the draws stacked row-wise ((n_draws*L) x 2) and
/// returns the noise estimate of the same shape. Frames with conditioning == 1
/// are replaced with `observed_values` (normalized) in the output. No noise is
/// added at t = 1. Outputs are mapped back to angles with arcsin.
template <typename Scalar, typename Predictor>
SampleResult sample(Predictor&& predict, const MatrixXd& observed_values, const std::vector<std::uint8_t>& conditioning,
                    const NoiseSchedule& schedule, Rng& rng, int n_draws) {
  if (n_draws < 1) throw ConfigError("number of draws must be >= 1");
  const Eigen::Index L = observed_values.rows();
  if (static_cast<std::size_t>(L) != conditioning.size()) throw ValidationError("sample: mask length mismatch");
  Matrix<Scalar> x = standard_normal<Scalar>(L * n_draws, 2, rng);
  for (int t = schedule.steps; t >= 1; --t) {
    const Matrix<Scalar> eps = predict(x, t);
    if (eps.rows() != x.rows() || eps.cols() != x.cols()) throw RuntimeFailure("sample: predictor shape mismatch");
    x = denoise_mean(x, t, eps, schedule);
    if (t > 1) {
      x += Scalar(std::sqrt(schedule.posterior_variance_at(t))) * standard_normal<Scalar>(x.rows(), 2, rng);
    }
  }
  SampleResult result;
  for (int d = 0; d < n_draws; ++d) {
    MatrixXd values = x.middleRows(d * L, L).template cast<double>();
    for (Eigen::Index l = 0; l < L; ++l)
      if (conditioning[static_cast<std::size_t>(l)]) values.row(l) = observed_values.row(l);
    result.draws.push_back(denormalize_gaze(values));
  }
  result.median = elementwise_median(result.draws);
  return result;
}

}  // namespace hagi
