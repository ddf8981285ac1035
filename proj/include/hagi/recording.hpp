#pragma once

#include "hagi/geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace hagi {

/// One ingested recording at 30 Hz. Angles are eye-in-head (pitch, yaw) in
/// radians with pitch positive up and yaw positive left of the tracker's
/// forward axis.
struct Recording {
  std::vector<std::int64_t> timestamp_ns;
  MatrixXd angles;  // n x 2
  std::vector<std::uint8_t> valid;
  std::vector<Pose<double>> head;  // world -> tracker
  std::optional<std::vector<Pose<double>>> wrist_left;   // world -> band
  std::optional<std::vector<Pose<double>>> wrist_right;  // world -> band

  std::size_t size() const { return timestamp_ns.size(); }
  double duration_s() const { return static_cast<double>(size()) / kSampleRateHz; }
};

/// CSV layout:
///   timestamp_ns,pitch_rad,yaw_rad,valid,head_r00..head_r22,head_tx,head_ty,head_tz
///   [,wrist_left_r00..wrist_left_tz][,wrist_right_r00..wrist_right_tz]
/// Rotations are row-major. The header row is mandatory.
std::vector<std::string> recording_columns(bool wrist_left, bool wrist_right);

/// Parses a recording. Rejects malformed rows and non-orthonormal rotations
/// (ValidationError naming the row). Frames whose gaze is non-finite or whose
/// |yaw| exceeds pi/2 are flagged invalid.
Recording parse_recording(std::istream& in);
Recording read_recording(const std::filesystem::path& path);

/// Doubles are written in shortest round-trip form, so parse -> write is lossless.
void write_recording(std::ostream& out, const Recording& rec);
void write_recording(const std::filesystem::path& path, const Recording& rec);

/// Lists *.csv recordings in a directory in lexical order.
std::vector<std::filesystem::path> list_recordings(const std::filesystem::path& dir);

std::string format_double(double value);

}  // namespace hagi
