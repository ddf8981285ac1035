#pragma once

#include "hagi/common.hpp"

#include <vector>

namespace hagi {

// Classical imputers. Each takes raw (pitch, yaw) angles and the conditioning
// flags (observed and valid) and returns the full L x 2 sequence with every
// non-conditioning frame filled in. Conditioning frames are returned untouched.

/// Per-component linear interpolation between the nearest conditioning
/// frames, with constant extension before the first and after the last one.
MatrixXd linear_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning);

/// Value of the nearest conditioning frame; ties go to the earlier frame.
MatrixXd nearest_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning);

/// Head direction as a gaze proxy: (pitch, yaw) = (0, 0).
MatrixXd head_direction_impute(const MatrixXd& angles, const std::vector<std::uint8_t>& conditioning);

/// Rows of `full` at frames with conditioning == 0, in frame order.
MatrixXd hidden_rows(const MatrixXd& full, const std::vector<std::uint8_t>& conditioning);

}  // namespace hagi
