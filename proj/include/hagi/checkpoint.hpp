#pragma once

#include "hagi/diffusion.hpp"
#include "hagi/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace hagi {

/// Checkpoint file (little-endian):
///   "HAGICKPT" | u8 version(=1) | u32 header_len | header (JSON, UTF-8) |
///   u32 tensor_count | per tensor: u16 name_len | name | u32 rows | u32 cols |
///   f64[rows*cols] row-major
/// The JSON header holds "config", "schedule" (steps, noise levels and the
/// cumulative alphas) and free-form "meta".
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserConfig config;
  NoiseSchedule schedule;
  DenoiserParams<double> params;
  nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json config_to_json(const DenoiserConfig& config);
DenoiserConfig config_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Fails with ValidationError on a bad magic, an unknown version, or any tensor
/// whose name or shape does not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hagi
