#pragma once

#include "hagi/geometry.hpp"
#include "hagi/recording.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <vector>

namespace hagi {

using Rng = std::mt19937_64;

inline constexpr int kDefaultWindowLength = 150;  // 5 s at 30 Hz
inline constexpr double kMaxInvalidFraction = 0.05;
/// 150 ms at 30 Hz is 4.5 frames; rounded up so every run lasts at least 150 ms.
inline constexpr int kMinSegmentFrames = 5;
inline constexpr int kMaxSegmentFrames = 20;

/// Gaze window: raw angles, their sine-normalized values and validity flags.
/// Angles (and values) are zero wherever the frame is invalid.
struct GazeSequence {
  MatrixXd angles;  // L x 2 (pitch, yaw), radians
  MatrixXd values;  // L x 2, sin(angles)
  std::vector<std::uint8_t> valid;

  static GazeSequence from_angles(const MatrixXd& angles, std::vector<std::uint8_t> valid);

  int length() const { return static_cast<int>(valid.size()); }
  int valid_count() const;
};

enum class MaskProtocol {
  TrainRandom,
  EvalContiguous10,
  EvalSegmented30,
  EvalSegmented50,
  EvalContiguous90,
  Generation100,
};

std::string to_string(MaskProtocol p);
/// Maps a missing-data percentage {10, 30, 50, 90, 100} to its protocol.
MaskProtocol protocol_from_percent(int percent);
int protocol_percent(MaskProtocol p);

/// observed[l] == 1 marks a conditioning frame, 0 a target frame to impute.
/// Invalid frames are never targets.
struct ObservationMask {
  std::vector<std::uint8_t> observed;
  MaskProtocol provenance = MaskProtocol::TrainRandom;

  static ObservationMask all_observed(int length, MaskProtocol provenance = MaskProtocol::TrainRandom);
  int hidden_count() const;
};

struct Sample {
  GazeSequence gaze;
  RelativeMotion<double> head;
  std::vector<RelativeMotion<double>> wrists;
  ObservationMask mask;
  std::int64_t start_ns = 0;

  int length() const { return gaze.length(); }
  const RelativeMotion<double>* motion(MotionSource source) const;
};

struct TimeWindow {
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

struct ClipPolicy {
  /// Seconds dropped at both ends of the recording (ignored with a window list).
  double edge_trim_s = 1.0;
  /// Optional per-recording windows; each is clipped into non-overlapping L-frame pieces.
  std::optional<std::vector<TimeWindow>> windows;
  double max_invalid_fraction = kMaxInvalidFraction;
};

/// Cuts a recording into non-overlapping L-frame samples, dropping windows
/// with more than `max_invalid_fraction` invalid frames. Recordings too short
/// to hold a window yield an empty result.
std::vector<Sample> clip_recording(const Recording& rec, int length, const ClipPolicy& policy = {});

/// Window list rows: `start_ns,end_ns`; an optional header row is skipped.
std::vector<TimeWindow> read_window_list(const std::filesystem::path& path);

/// floor(ratio * length + 0.5)
int round_half_up_frames(double ratio, int length);

/// Mask generators work on the valid frames only: runs are contiguous and at
/// least `min_run` long once invalid frames are skipped, so an invalid frame
/// can sit inside a data-loss run without being a target.
ObservationMask contiguous_mask(const GazeSequence& gaze, int hidden, Rng& rng, MaskProtocol provenance);
ObservationMask segmented_mask(const GazeSequence& gaze, int hidden, Rng& rng, MaskProtocol provenance,
                               int min_run = kMinSegmentFrames, int max_run = kMaxSegmentFrames);

/// Training mask: ratio ~ U[0.05, 0.95]; contiguous or segmented with probability 1/2 each.
ObservationMask train_mask(const GazeSequence& gaze, Rng& rng);

/// Evaluation masks for the 10/30/50/90/100 % data-loss protocols.
ObservationMask eval_mask(const GazeSequence& gaze, MaskProtocol protocol, Rng& rng);
ObservationMask eval_mask(const GazeSequence& gaze, int percent, Rng& rng);

/// Maximal runs of hidden frames, measured over valid frames only.
std::vector<int> hidden_run_lengths(const ObservationMask& mask, const std::vector<std::uint8_t>& valid);

/// Binary sample cache (little-endian):
///   "HAGISMPL" | u8 version(=1) | u32 count | per sample:
///   i64 start_ns | u32 L | u8 provenance | u8 n_wrists |
///   f64[L*2] angles (row-major) | u8[L] valid | u8[L] observed |
///   f64[L*12] head | n_wrists x (u8 source | f64[L*12])
void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::vector<Sample> load_samples(const std::filesystem::path& path);

}  // namespace hagi
