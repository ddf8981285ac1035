#pragma once

#include "hagi/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace hagi {

enum class PoseFrame { WorldToTracker, WorldToBand };
enum class MotionSource { Head, WristLeft, WristRight };

std::string to_string(MotionSource source);
MotionSource motion_source_from_string(const std::string& name);

/// Rigid transform [R | t]; maps points from the local frame into the parent frame.
template <typename Scalar>
struct RigidTransform {
  Eigen::Matrix<Scalar, 3, 3> rotation = Eigen::Matrix<Scalar, 3, 3>::Identity();
  Eigen::Matrix<Scalar, 3, 1> translation = Eigen::Matrix<Scalar, 3, 1>::Zero();

  static RigidTransform identity() { return {}; }
};

/// A device pose in the world frame.
template <typename Scalar>
struct Pose {
  RigidTransform<Scalar> transform;
  PoseFrame frame = PoseFrame::WorldToTracker;
};

template <typename Scalar>
struct RelativeMotion {
  std::vector<RigidTransform<Scalar>> frames;
  MotionSource source = MotionSource::Head;

  std::size_t length() const { return frames.size(); }
};

inline constexpr double kOrthonormalTolerance = 1e-6;

template <typename Scalar>
RigidTransform<Scalar> inverse(const RigidTransform<Scalar>& a) {
  RigidTransform<Scalar> out;
  out.rotation = a.rotation.transpose();
  out.translation = -(out.rotation * a.translation);
  return out;
}

template <typename Scalar>
RigidTransform<Scalar> compose(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  RigidTransform<Scalar> out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

/// (a)^-1 * b without forming the inverse explicitly.
template <typename Scalar>
RigidTransform<Scalar> relative(const RigidTransform<Scalar>& a, const RigidTransform<Scalar>& b) {
  RigidTransform<Scalar> out;
  out.rotation = a.rotation.transpose() * b.rotation;
  out.translation = a.rotation.transpose() * (b.translation - a.translation);
  return out;
}

template <typename Scalar>
bool is_rotation(const Eigen::Matrix<Scalar, 3, 3>& r, double tol = kOrthonormalTolerance) {
  if (!r.allFinite()) return false;
  const double ortho =
      static_cast<double>((r.transpose() * r - Eigen::Matrix<Scalar, 3, 3>::Identity()).cwiseAbs().maxCoeff());
  const double det = static_cast<double>(r.determinant());
  return ortho <= tol && std::abs(det - 1.0) <= tol;
}

template <typename Scalar>
void validate_pose(const RigidTransform<Scalar>& pose, std::size_t frame_index) {
  if (!is_rotation(pose.rotation)) {
    throw ValidationError("pose at frame " + std::to_string(frame_index) +
                          ": rotation is not orthonormal with det +1");
  }
  if (!pose.translation.allFinite()) {
    throw ValidationError("pose at frame " + std::to_string(frame_index) + ": non-finite translation");
  }
}

/// Head motion between consecutive tracker poses: h_l = (T_l)^-1 T_{l+1}.
/// `poses` holds L+1 world->tracker poses and the result has length L.
template <typename Scalar>
RelativeMotion<Scalar> relative_head_motion(std::span<const Pose<Scalar>> poses) {
  if (poses.size() < 2) {
    throw ValidationError("relative_head_motion needs at least two poses");
  }
  for (std::size_t i = 0; i < poses.size(); ++i) validate_pose(poses[i].transform, i);
  RelativeMotion<Scalar> out;
  out.source = MotionSource::Head;
  out.frames.reserve(poses.size() - 1);
  for (std::size_t l = 0; l + 1 < poses.size(); ++l) {
    out.frames.push_back(relative(poses[l].transform, poses[l + 1].transform));
  }
  return out;
}

/// Wrist pose expressed in the tracker frame at the same instant: w_l = (T_tracker)^-1 T_band.
template <typename Scalar>
RelativeMotion<Scalar> relative_wrist_motion(std::span<const Pose<Scalar>> tracker,
                                             std::span<const Pose<Scalar>> band,
                                             MotionSource source = MotionSource::WristLeft) {
  if (tracker.size() != band.size()) {
    throw ValidationError("relative_wrist_motion: tracker has " + std::to_string(tracker.size()) +
                          " poses but band has " + std::to_string(band.size()));
  }
  RelativeMotion<Scalar> out;
  out.source = source;
  out.frames.reserve(tracker.size());
  for (std::size_t l = 0; l < tracker.size(); ++l) {
    validate_pose(tracker[l].transform, l);
    validate_pose(band[l].transform, l);
    out.frames.push_back(relative(tracker[l].transform, band[l].transform));
  }
  return out;
}

/// Validates (pitch, yaw) rows: pitch in [-pi/2, pi/2], yaw in (-pi, pi].
template <typename Derived>
void validate_gaze_angles(const Eigen::MatrixBase<Derived>& angles) {
  if (angles.cols() != 2) throw ValidationError("gaze angles must have two columns (pitch, yaw)");
  for (Eigen::Index l = 0; l < angles.rows(); ++l) {
    const double pitch = static_cast<double>(angles(l, 0));
    const double yaw = static_cast<double>(angles(l, 1));
    if (!std::isfinite(pitch) || !std::isfinite(yaw) || std::abs(pitch) > kPi / 2 || yaw <= -kPi ||
        yaw > kPi) {
      throw ValidationError("gaze angles out of range at frame " + std::to_string(l));
    }
  }
}

/// Sine transform of (pitch, yaw); the model operates on these values.
template <typename Derived>
Matrix<typename Derived::Scalar> normalize_gaze(const Eigen::MatrixBase<Derived>& angles) {
  validate_gaze_angles(angles);
  return angles.array().sin().matrix();
}

/// Inverse of normalize_gaze on [-pi/2, pi/2]; inputs are clamped to [-1, 1].
template <typename Derived>
Matrix<typename Derived::Scalar> denormalize_gaze(const Eigen::MatrixBase<Derived>& values) {
  using S = typename Derived::Scalar;
  return values.array().max(S(-1)).min(S(1)).asin().matrix();
}

inline constexpr int kFlatTransformWidth = 12;

inline int encoded_width(int bands) { return kFlatTransformWidth * (1 + 2 * bands); }

/// One row per frame: R in row-major order followed by t.
template <typename Scalar>
Matrix<Scalar> flatten(const RelativeMotion<Scalar>& motion) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(motion.length()), kFlatTransformWidth);
  for (std::size_t l = 0; l < motion.length(); ++l) {
    const auto& f = motion.frames[l];
    const auto row = static_cast<Eigen::Index>(l);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out(row, 3 * i + j) = f.rotation(i, j);
      out(row, 9 + i) = f.translation(i);
    }
  }
  return out;
}

/// Fourier features of a flattened motion matrix. Column layout per frame:
///   [raw(12) | sin(pi*v)(12) | cos(pi*v)(12) | sin(2pi*v)(12) | cos(2pi*v)(12) | ...]
/// with frequencies pi * 2^k for k = 0 .. bands-1.
template <typename Derived>
Matrix<typename Derived::Scalar> fourier_encode(const Eigen::MatrixBase<Derived>& flat, int bands) {
  using S = typename Derived::Scalar;
  if (bands < 0) throw ConfigError("Fourier band count must be >= 0");
  const Eigen::Index w = flat.cols();
  Matrix<S> out(flat.rows(), w * (1 + 2 * bands));
  out.leftCols(w) = flat;
  for (int k = 0; k < bands; ++k) {
    const S freq = static_cast<S>(kPi * std::ldexp(1.0, k));
    out.middleCols(w * (1 + 2 * k), w) = (flat.array() * freq).sin().matrix();
    out.middleCols(w * (2 + 2 * k), w) = (flat.array() * freq).cos().matrix();
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> flatten_and_encode(const RelativeMotion<Scalar>& motion, int bands) {
  return fourier_encode(flatten(motion), bands);
}

/// Ablation filters applied to motion streams at ingestion.
enum class MotionFilter { Full, RotationOnly, TranslationOnly };

std::string to_string(MotionFilter filter);
MotionFilter motion_filter_from_string(const std::string& name);

/// RotationOnly zeroes translations; TranslationOnly zeroes the nine rotation entries.
template <typename Scalar>
RelativeMotion<Scalar> apply_filter(RelativeMotion<Scalar> motion, MotionFilter filter) {
  for (auto& f : motion.frames) {
    if (filter == MotionFilter::RotationOnly) f.translation.setZero();
    if (filter == MotionFilter::TranslationOnly) f.rotation.setZero();
  }
  return motion;
}

/// Rotation with the given yaw (about +y) then pitch (about -x); maps the
/// forward axis +z onto the gaze direction for those angles.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_from_yaw_pitch(Scalar yaw, Scalar pitch) {
  using Axis = Eigen::AngleAxis<Scalar>;
  return (Axis(yaw, Eigen::Matrix<Scalar, 3, 1>::UnitY()) * Axis(-pitch, Eigen::Matrix<Scalar, 3, 1>::UnitX()))
      .toRotationMatrix();
}

}  // namespace hagi
