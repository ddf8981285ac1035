#pragma once

#include "hagi/geometry.hpp"
#include "hagi/sequences.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <random>
#include <string>

namespace hagi::test {

using Mat4 = Eigen::Matrix4d;

/// Brute-force homogeneous matrix, used as an oracle against the [R | t] algebra.
inline Mat4 homogeneous(const RigidTransform<double>& t) {
  Mat4 m = Mat4::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = t.rotation(i, j);
    m(i, 3) = t.translation(i);
  }
  m(3, 3) = 1.0;
  return m;
}

/// Gauss-Jordan inverse with partial pivoting; deliberately not Eigen's.
inline Mat4 invert4(Mat4 a) {
  Mat4 inv = Mat4::Identity();
  for (int c = 0; c < 4; ++c) {
    int p = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    a.row(c).swap(a.row(p));
    inv.row(c).swap(inv.row(p));
    const double d = a(c, c);
    a.row(c) /= d;
    inv.row(c) /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      a.row(r) -= f * a.row(c);
      inv.row(r) -= f * inv.row(c);
    }
  }
  return inv;
}

inline Mat4 multiply4(const Mat4& a, const Mat4& b) {
  Mat4 out = Mat4::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline RigidTransform<double> random_transform(std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  RigidTransform<double> t;
  t.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
  t.translation = Eigen::Vector3d(n(rng), n(rng), n(rng)) * spread;
  return t;
}

inline Pose<double> pose_of(const RigidTransform<double>& t) { return Pose<double>{t, PoseFrame::WorldToTracker}; }

inline GazeSequence all_valid_gaze(int length) {
  return GazeSequence::from_angles(MatrixXd::Zero(length, 2), std::vector<std::uint8_t>(length, 1));
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hagi_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hagi::test

#include "hagi/recording.hpp"

namespace hagi::test {

/// n frames at exactly 30 Hz with a slowly turning head and small gaze angles.
inline Recording simple_recording(int n, bool wrists = false) {
  Recording rec;
  rec.angles.resize(n, 2);
  if (wrists) {
    rec.wrist_left.emplace();
    rec.wrist_right.emplace();
  }
  for (int i = 0; i < n; ++i) {
    rec.timestamp_ns.push_back(static_cast<std::int64_t>(i) * 1000000000LL / 30);
    rec.angles(i, 0) = 0.1 * std::sin(0.05 * i);
    rec.angles(i, 1) = 0.2 * std::cos(0.03 * i);
    rec.valid.push_back(1);
    RigidTransform<double> head;
    head.rotation = rotation_from_yaw_pitch(0.01 * i, 0.002 * i);
    head.translation = Eigen::Vector3d(0.001 * i, 1.6, -0.002 * i);
    rec.head.push_back(Pose<double>{head, PoseFrame::WorldToTracker});
    if (wrists) {
      RigidTransform<double> l = head, r = head;
      l.translation += Eigen::Vector3d(0.2, -0.4, 0.3);
      r.translation += Eigen::Vector3d(-0.2, -0.4, 0.3 + 0.001 * i);
      rec.wrist_left->push_back(Pose<double>{l, PoseFrame::WorldToBand});
      rec.wrist_right->push_back(Pose<double>{r, PoseFrame::WorldToBand});
    }
  }
  return rec;
}

}  // namespace hagi::test

#include "hagi/inference.hpp"
#include "hagi/synthdata.hpp"

namespace hagi::test {

/// Windows clipped from synthetic recordings, with few blinks so most survive.
inline Dataset synthetic_dataset(int recordings, double seconds, int length, std::uint64_t seed, bool wrists = false) {
  SynthConfig c;
  c.n_recordings = recordings;
  c.duration_s = seconds;
  c.seed = seed;
  c.invalid_fraction = 0.01;
  c.wrists = wrists;
  Dataset out;
  for (int i = 0; i < recordings; ++i) {
    for (auto& s : clip_recording(synthesize_recording(c, i), length)) {
      out.samples.push_back(std::move(s));
      out.sources.push_back("rec" + std::to_string(i));
    }
  }
  return out;
}

inline DenoiserConfig tiny_model(int length, std::vector<MotionSource> modalities = {MotionSource::Head}) {
  DenoiserConfig c;
  c.seq_len = length;
  c.latent_dim = 8;
  c.blocks = 1;
  c.heads = 2;
  c.bands = 1;
  c.modalities = std::move(modalities);
  return c;
}

}  // namespace hagi::test
