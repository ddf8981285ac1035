#pragma once

// Synthetic eye-head-wrist recordings. The generator is a test instrument: it
// reproduces the coupling the model relies on (head rotation following gaze
// shifts with a gain and a lag, wrists drifting toward the gaze target) and
// makes no attempt at biomechanical fidelity.
//
// World gaze follows fixations on random targets joined by short saccades.
// Head yaw/pitch track a box-filtered, lagged copy of the world gaze scaled by
// kappa, plus independent wander. The recorded eye-in-head angles are the world
// gaze direction expressed in the tracker frame, so head wander shows up as a
// counter-rotation of the eye.

#include "hagi/recording.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hagi {

struct SynthConfig {
  int n_recordings = 10;
  double duration_s = 60.0;
  double kappa = 0.8;               // head share of each gaze shift, [0, 1]
  double saccade_rate = 2.0;        // saccades per second
  double fixation_noise_deg = 0.2;  // per-frame eye jitter
  double rho = 0.5;                 // wrist/gaze correlation, [0, 1]
  std::uint64_t seed = 0;
  double invalid_fraction = 0.06;   // expected share of frames lost to blinks
  int lag_frames = 2;
  int smoothing_frames = 6;         // box filter on the gaze the head follows
  double head_wander_deg = 3.0;     // std of gaze-independent head rotation
  double target_yaw_deg = 12.0;     // std of fixation targets
  double target_pitch_deg = 7.0;
  bool wrists = true;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

/// One recording; independent of the other indices for a fixed seed.
Recording synthesize_recording(const SynthConfig& config, int index);

std::vector<Recording> generate(const SynthConfig& config);

/// Writes recording_000.csv, recording_001.csv, ... and returns the paths.
std::vector<std::filesystem::path> write_synthetic(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace hagi
