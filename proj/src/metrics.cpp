#include "hagi/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace hagi {

Eigen::Vector3d angles_to_vector(double pitch, double yaw) {
  return {std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
}

Eigen::Vector2d vector_to_angles(const Eigen::Vector3d& v) {
  const Eigen::Vector3d u = v.normalized();
  return {std::asin(std::clamp(u.y(), -1.0, 1.0)), std::atan2(u.x(), u.z())};
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / kPi;
}

void AngularErrorSum::add(const MatrixXd& pred, const MatrixXd& truth, const std::vector<std::uint8_t>& scored) {
  for (Eigen::Index l = 0; l < truth.rows(); ++l) {
    if (!scored[static_cast<std::size_t>(l)]) continue;
    sum_deg += angle_between_deg(angles_to_vector(pred(l, 0), pred(l, 1)), angles_to_vector(truth(l, 0), truth(l, 1)));
    ++frames;
  }
}

double AngularErrorSum::mean() const {
  if (frames == 0) throw ValidationError("mean angular error over zero scored frames");
  return sum_deg / static_cast<double>(frames);
}

double mean_angular_error(const MatrixXd& pred, const MatrixXd& truth, const std::vector<std::uint8_t>& scored) {
  if (pred.rows() != truth.rows() || static_cast<std::size_t>(truth.rows()) != scored.size()) {
    throw ValidationError("mean_angular_error: shape mismatch");
  }
  AngularErrorSum acc;
  acc.add(pred, truth, scored);
  return acc.mean();
}

std::vector<double> gaze_velocity(const MatrixXd& angles, const std::vector<std::uint8_t>& scored,
                                  const std::vector<std::uint8_t>& valid, double rate_hz) {
  std::vector<double> out;
  for (Eigen::Index l = 1; l < angles.rows(); ++l) {
    const auto i = static_cast<std::size_t>(l);
    if (!scored[i] || !valid[i - 1]) continue;
    out.push_back(angle_between_deg(angles_to_vector(angles(l - 1, 0), angles(l - 1, 1)),
                                    angles_to_vector(angles(l, 0), angles(l, 1))) *
                  rate_hz);
  }
  return out;
}

double js_divergence_probabilities(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.empty()) throw ValidationError("JS divergence: distributions differ in size");
  const auto kl_to_mid = [](double a, double m) { return a > 0.0 ? a * std::log2(a / m) : 0.0; };
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    js += 0.5 * kl_to_mid(p[i], m) + 0.5 * kl_to_mid(q[i], m);
  }
  return std::clamp(js, 0.0, 1.0);
}

double js_divergence(const std::vector<double>& pred, const std::vector<double>& truth, int bins) {
  if (pred.empty() || truth.empty()) throw ValidationError("JS divergence of an empty sample set");
  if (bins < 1) throw ConfigError("JS divergence needs at least one bin");
  const auto [pmin, pmax] = std::minmax_element(pred.begin(), pred.end());
  const auto [tmin, tmax] = std::minmax_element(truth.begin(), truth.end());
  const double lo = std::min(*pmin, *tmin);
  const double hi = std::max(*pmax, *tmax);
  const double width = (hi - lo) / bins;

  const auto histogram = [&](const std::vector<double>& xs) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double x : xs) {
      int b = width > 0.0 ? static_cast<int>((x - lo) / width) : 0;
      b = std::clamp(b, 0, bins - 1);
      h[static_cast<std::size_t>(b)] += 1.0;
    }
    for (auto& v : h) v /= static_cast<double>(xs.size());
    return h;
  };
  return js_divergence_probabilities(histogram(pred), histogram(truth));
}

}  // namespace hagi
