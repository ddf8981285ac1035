#pragma once

#include "hagi/common.hpp"

#include <Eigen/Core>

#include <vector>

namespace hagi {

/// Unit gaze vector in the tracker frame (x left, y up, z forward).
Eigen::Vector3d angles_to_vector(double pitch, double yaw);

/// Inverse of angles_to_vector for non-zero vectors: returns (pitch, yaw).
Eigen::Vector2d vector_to_angles(const Eigen::Vector3d& v);

/// Angle between two direction vectors in degrees; the cosine is clamped to [-1, 1].
double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Running sum for frame-weighted MAE across windows.
struct AngularErrorSum {
  double sum_deg = 0.0;
  long long frames = 0;

  void add(const MatrixXd& pred, const MatrixXd& truth, const std::vector<std::uint8_t>& scored);
  double mean() const;
};

/// Mean angular error in degrees over frames with scored[l] == 1.
/// Throws ValidationError when no frame is scored.
double mean_angular_error(const MatrixXd& pred, const MatrixXd& truth, const std::vector<std::uint8_t>& scored);

/// Angular velocity in deg/s at each scored frame l >= 1 whose predecessor is
/// valid: angle between frames l-1 and l times `rate_hz`.
std::vector<double> gaze_velocity(const MatrixXd& angles, const std::vector<std::uint8_t>& scored,
                                  const std::vector<std::uint8_t>& valid, double rate_hz = kSampleRateHz);

/// Jensen-Shannon divergence (base 2) between two probability vectors.
double js_divergence_probabilities(const std::vector<double>& p, const std::vector<double>& q);

/// Histograms both sample sets on a shared uniform binning over the union of
/// their ranges and returns the base-2 JS divergence in [0, 1].
double js_divergence(const std::vector<double>& pred, const std::vector<double>& truth, int bins = 100);

}  // namespace hagi
