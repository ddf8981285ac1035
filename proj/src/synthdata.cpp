#include "hagi/synthdata.hpp"

#include "hagi/metrics.hpp"
#include "hagi/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace hagi {
namespace {

constexpr double kDeg = kPi / 180.0;
constexpr double kMaxTargetYawDeg = 35.0;
constexpr double kMaxTargetPitchDeg = 20.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("synth: " + what);
}

/// Ornstein-Uhlenbeck series with stationary std `sigma` and time constant `tau_s`.
std::vector<double> ou_series(int n, double sigma, double tau_s, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double a = std::exp(-1.0 / (kSampleRateHz * tau_s));
  const double b = std::sqrt(1.0 - a * a) * sigma;
  std::vector<double> x(static_cast<std::size_t>(n));
  double v = sigma * normal(rng);
  for (auto& xi : x) {
    v = a * v + b * normal(rng);
    xi = v;
  }
  return x;
}

/// Causal box filter of width `width`, delayed by `lag` frames; indices before
/// the start clamp to the first sample.
std::vector<double> lagged_box(const std::vector<double>& x, int width, int lag) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size());
  for (int l = 0; l < n; ++l) {
    double sum = 0.0;
    for (int j = 0; j < width; ++j) sum += x[static_cast<std::size_t>(std::max(l - lag - j, 0))];
    out[static_cast<std::size_t>(l)] = sum / width;
  }
  return out;
}

/// World-frame gaze: fixations on random targets joined by 1-3 frame saccades.
void world_gaze(const SynthConfig& c, int n, Rng& rng, std::vector<double>& yaw, std::vector<double>& pitch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> interval(c.saccade_rate);
  std::uniform_int_distribution<int> saccade_frames(1, 3);
  const auto draw = [&](double sd, double limit) { return std::clamp(sd * normal(rng), -limit, limit) * kDeg; };
  yaw.assign(static_cast<std::size_t>(n), 0.0);
  pitch.assign(static_cast<std::size_t>(n), 0.0);
  double cy = draw(c.target_yaw_deg, kMaxTargetYawDeg);
  double cp = draw(c.target_pitch_deg, kMaxTargetPitchDeg);
  int l = 0;
  while (l < n) {
    const int fix = std::max(3, static_cast<int>(std::lround(interval(rng) * kSampleRateHz)));
    for (int k = 0; k < fix && l < n; ++k, ++l) {
      yaw[static_cast<std::size_t>(l)] = cy;
      pitch[static_cast<std::size_t>(l)] = cp;
    }
    const double ny = draw(c.target_yaw_deg, kMaxTargetYawDeg);
    const double np = draw(c.target_pitch_deg, kMaxTargetPitchDeg);
    const int k_frames = saccade_frames(rng);
    for (int k = 1; k <= k_frames && l < n; ++k, ++l) {
      const double w = static_cast<double>(k) / k_frames;
      yaw[static_cast<std::size_t>(l)] = cy + w * (ny - cy);
      pitch[static_cast<std::size_t>(l)] = cp + w * (np - cp);
    }
    cy = ny;
    cp = np;
  }
}

/// Blink-like invalid runs of 150-450 ms, spaced so the expected invalid
/// share equals `fraction`.
std::vector<std::uint8_t> blink_validity(int n, double fraction, Rng& rng) {
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(n), 1);
  if (fraction <= 0.0) return valid;
  std::uniform_real_distribution<double> blink_ms(150.0, 450.0);
  const auto blink_frames = [&] { return static_cast<int>(std::ceil(blink_ms(rng) * kSampleRateHz / 1000.0)); };
  constexpr double kMeanBlinkFrames = 9.5;  // E[ceil(U[4.5, 13.5])]
  const double mean_gap = kMeanBlinkFrames * (1.0 - fraction) / fraction;
  std::uniform_real_distribution<double> gap(0.5 * mean_gap, 1.5 * mean_gap);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double pos = unit(rng) * gap(rng);
  while (true) {
    const int start = static_cast<int>(pos);
    if (start >= n) break;
    const int len = blink_frames();
    for (int l = start; l < std::min(n, start + len); ++l) valid[static_cast<std::size_t>(l)] = 0;
    pos = start + len + gap(rng);
  }
  return valid;
}

RigidTransform<double> make_transform(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  RigidTransform<double> out;
  out.rotation = r;
  out.translation = t;
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  require(n_recordings >= 1, "n_recordings must be >= 1");
  require(std::isfinite(duration_s) && duration_s >= 1.0, "duration_s must be >= 1");
  require(kappa >= 0.0 && kappa <= 1.0, "kappa must be in [0, 1]");
  require(saccade_rate > 0.0 && saccade_rate <= 10.0, "saccade_rate must be in (0, 10] per second");
  require(fixation_noise_deg >= 0.0 && fixation_noise_deg <= 5.0, "fixation_noise_deg must be in [0, 5]");
  require(rho >= 0.0 && rho <= 1.0, "rho must be in [0, 1]");
  require(invalid_fraction >= 0.0 && invalid_fraction <= 0.5, "invalid_fraction must be in [0, 0.5]");
  require(lag_frames >= 0 && lag_frames <= 30, "lag_frames must be in [0, 30]");
  require(smoothing_frames >= 1 && smoothing_frames <= 60, "smoothing_frames must be in [1, 60]");
  require(head_wander_deg >= 0.0 && head_wander_deg <= 30.0, "head_wander_deg must be in [0, 30]");
  require(target_yaw_deg >= 0.0 && target_yaw_deg <= 40.0, "target_yaw_deg must be in [0, 40]");
  require(target_pitch_deg >= 0.0 && target_pitch_deg <= 40.0, "target_pitch_deg must be in [0, 40]");
}

Recording synthesize_recording(const SynthConfig& c, int index) {
  c.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x6a17u};
  Rng rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = static_cast<int>(std::lround(c.duration_s * kSampleRateHz));

  std::vector<double> gaze_yaw, gaze_pitch;
  world_gaze(c, n, rng, gaze_yaw, gaze_pitch);

  // Head rotation: lagged low-pass of the world gaze, scaled by kappa, plus
  // smooth independent wander.
  const auto follow_yaw = lagged_box(gaze_yaw, c.smoothing_frames, c.lag_frames);
  const auto follow_pitch = lagged_box(gaze_pitch, c.smoothing_frames, c.lag_frames);
  const auto wander_yaw = lagged_box(ou_series(n, c.head_wander_deg * kDeg, 1.5, rng), 5, 0);
  const auto wander_pitch = lagged_box(ou_series(n, 0.6 * c.head_wander_deg * kDeg, 1.5, rng), 5, 0);

  // Body translation: walking bouts along a slowly turning heading.
  const auto heading = ou_series(n, 20.0 * kDeg, 10.0, rng);
  std::exponential_distribution<double> bout(1.0 / (8.0 * kSampleRateHz));
  std::uniform_real_distribution<double> walk_speed(0.6, 1.4);
  std::bernoulli_distribution walking(0.5);

  Recording rec;
  rec.timestamp_ns.resize(static_cast<std::size_t>(n));
  rec.angles.resize(n, 2);
  rec.valid = blink_validity(n, c.invalid_fraction, rng);
  rec.head.reserve(static_cast<std::size_t>(n));

  Eigen::Vector3d body = Eigen::Vector3d::Zero();
  double speed = 0.0;
  double target_speed = walking(rng) ? walk_speed(rng) : 0.0;
  double next_switch = bout(rng);
  const Eigen::Vector3d tracker_offset(0.0, 0.08, 0.10);  // from the neck pivot, head frame
  std::vector<Eigen::Matrix3d> head_rot(static_cast<std::size_t>(n));
  MatrixXd eye_dirs(n, 3);

  for (int l = 0; l < n; ++l) {
    const auto i = static_cast<std::size_t>(l);
    rec.timestamp_ns[i] = static_cast<std::int64_t>(l) * 1'000'000'000LL / 30;
    const double hy = c.kappa * follow_yaw[i] + wander_yaw[i];
    const double hp = c.kappa * follow_pitch[i] + wander_pitch[i];
    const Eigen::Matrix3d r = rotation_from_yaw_pitch(hy, hp);
    head_rot[i] = r;

    if (l >= next_switch) {
      target_speed = walking(rng) ? walk_speed(rng) : 0.0;
      next_switch = l + bout(rng);
    }
    speed += 0.05 * (target_speed - speed);
    body += speed / kSampleRateHz * Eigen::Vector3d(std::sin(heading[i]), 0.0, std::cos(heading[i]));
    const Eigen::Vector3d pivot = body + Eigen::Vector3d(0.0, 1.6, 0.0);
    Eigen::Vector3d position = pivot + r * tracker_offset;
    for (int k = 0; k < 3; ++k) position(k) += 0.001 * normal(rng);
    rec.head.push_back({make_transform(r, position), PoseFrame::WorldToTracker});

    const Eigen::Vector3d eye = r.transpose() * angles_to_vector(gaze_pitch[i], gaze_yaw[i]);
    eye_dirs.row(l) = eye.transpose();
    const Eigen::Vector2d a = vector_to_angles(eye);
    if (rec.valid[i]) {
      rec.angles(l, 0) = a(0) + c.fixation_noise_deg * kDeg * normal(rng);
      rec.angles(l, 1) = a(1) + c.fixation_noise_deg * kDeg * normal(rng);
    } else {
      rec.angles.row(l).setZero();
    }
  }

  if (c.wrists) {
    // Band position in the tracker frame relaxes toward a target that mixes
    // the gaze direction (weight rho) with independent hand motion.
    constexpr double kReach = 0.3;
    constexpr double kGazeScale = 0.2;  // rough std of the eye direction's x/y components
    const double indep = std::sqrt(1.0 - c.rho * c.rho);
    for (int side = 0; side < 2; ++side) {
      const Eigen::Vector3d base(side == 0 ? 0.18 : -0.18, -0.40, 0.30);
      const auto nx = ou_series(n, kGazeScale, 1.0, rng);
      const auto ny = ou_series(n, kGazeScale, 1.0, rng);
      const auto nz = ou_series(n, 0.03, 2.0, rng);
      std::vector<Pose<double>> poses;
      poses.reserve(static_cast<std::size_t>(n));
      Eigen::Vector3d p = base;
      for (int l = 0; l < n; ++l) {
        const auto i = static_cast<std::size_t>(l);
        const Eigen::Vector3d target = base + Eigen::Vector3d(kReach * (c.rho * eye_dirs(l, 0) + indep * nx[i]),
                                                              kReach * (c.rho * eye_dirs(l, 1) + indep * ny[i]), nz[i]);
        p += 0.15 * (target - p);
        const Eigen::Matrix3d local_r = rotation_from_yaw_pitch(2.0 * (p(0) - base(0)), 2.0 * (p(1) - base(1)));
        const auto in_tracker = make_transform(local_r, p);
        poses.push_back({compose(rec.head[i].transform, in_tracker), PoseFrame::WorldToBand});
      }
      (side == 0 ? rec.wrist_left : rec.wrist_right) = std::move(poses);
    }
  }
  return rec;
}

std::vector<Recording> generate(const SynthConfig& config) {
  config.validate();
  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(config.n_recordings));
  for (int i = 0; i < config.n_recordings; ++i) out.push_back(synthesize_recording(config, i));
  return out;
}

std::vector<std::filesystem::path> write_synthetic(const SynthConfig& config, const std::filesystem::path& dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < config.n_recordings; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "recording_%03d.csv", i);
    const auto path = dir / name;
    write_recording(path, synthesize_recording(config, i));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace hagi
