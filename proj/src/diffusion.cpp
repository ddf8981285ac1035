#include "hagi/diffusion.hpp"

namespace hagi {

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps) {
    throw ValidationError("diffusion step " + std::to_string(t) + " outside 1.." + std::to_string(steps));
  }
}

NoiseSchedule schedule_from_noise(std::vector<double> noise, double min_noise, double max_noise) {
  NoiseSchedule s;
  s.steps = static_cast<int>(noise.size());
  s.min_noise = min_noise;
  s.max_noise = max_noise;
  s.noise = std::move(noise);
  const std::size_t n = s.noise.size();
  s.alpha.resize(n);
  s.beta.resize(n);
  s.posterior_variance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s.noise[i] > 0.0 && s.noise[i] < 1.0) || (i > 0 && !(s.noise[i] > s.noise[i - 1]))) {
      throw ValidationError("noise levels must increase strictly inside (0, 1)");
    }
    s.alpha[i] = 1.0 - s.noise[i];
    const double prev_noise = i == 0 ? 0.0 : s.noise[i - 1];
    s.beta[i] = i == 0 ? s.noise[0] : 1.0 - s.alpha[i] / s.alpha[i - 1];
    s.posterior_variance[i] = s.beta[i] * prev_noise / s.noise[i];
  }
  return s;
}

NoiseSchedule build_schedule(int steps, double min_noise, double max_noise) {
  if (steps < 2) throw ConfigError("diffusion needs T >= 2 steps");
  if (!(min_noise > 0.0 && min_noise < max_noise && max_noise < 1.0)) {
    throw ConfigError("noise levels must satisfy 0 < min_noise < max_noise < 1");
  }
  std::vector<double> levels(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) {
    double noise;
    if (t == 1) {
      noise = min_noise;
    } else if (t == steps) {
      noise = max_noise;
    } else {
      const double phase = kPi * (t - 1) / (steps - 1);
      noise = min_noise + (max_noise - min_noise) * (1.0 - std::cos(phase)) / 2.0;
    }
    levels[static_cast<std::size_t>(t - 1)] = noise;
  }
  return schedule_from_noise(std::move(levels), min_noise, max_noise);
}

std::vector<std::uint8_t> target_frames(const ObservationMask& mask, const std::vector<std::uint8_t>& valid) {
  std::vector<std::uint8_t> out(valid.size());
  for (std::size_t l = 0; l < valid.size(); ++l) out[l] = (!mask.observed[l] && valid[l]) ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> conditioning_frames(const ObservationMask& mask, const std::vector<std::uint8_t>& valid) {
  std::vector<std::uint8_t> out(valid.size());
  for (std::size_t l = 0; l < valid.size(); ++l) out[l] = (mask.observed[l] && valid[l]) ? 1 : 0;
  return out;
}

MatrixXd elementwise_median(const std::vector<MatrixXd>& draws) {
  if (draws.empty()) throw ValidationError("median of zero draws");
  const auto rows = draws.front().rows();
  const auto cols = draws.front().cols();
  MatrixXd out(rows, cols);
  std::vector<double> buf(draws.size());
  const std::size_t n = draws.size();
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (std::size_t d = 0; d < n; ++d) buf[d] = draws[d](r, c);
      std::sort(buf.begin(), buf.end());
      out(r, c) = n % 2 ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
    }
  }
  return out;
}

}  // namespace hagi
