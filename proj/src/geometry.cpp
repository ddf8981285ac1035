#include "hagi/geometry.hpp"

namespace hagi {

std::string to_string(MotionSource source) {
  switch (source) {
    case MotionSource::Head:
      return "head";
    case MotionSource::WristLeft:
      return "wrist-left";
    case MotionSource::WristRight:
      return "wrist-right";
  }
  return "unknown";
}

MotionSource motion_source_from_string(const std::string& name) {
  if (name == "head") return MotionSource::Head;
  if (name == "wrist-left") return MotionSource::WristLeft;
  if (name == "wrist-right") return MotionSource::WristRight;
  throw ConfigError("unknown motion modality '" + name + "' (expected head, wrist-left or wrist-right)");
}

std::string to_string(MotionFilter filter) {
  switch (filter) {
    case MotionFilter::Full:
      return "full";
    case MotionFilter::RotationOnly:
      return "rotation-only";
    case MotionFilter::TranslationOnly:
      return "translation-only";
  }
  return "unknown";
}

MotionFilter motion_filter_from_string(const std::string& name) {
  for (auto f : {MotionFilter::Full, MotionFilter::RotationOnly, MotionFilter::TranslationOnly})
    if (to_string(f) == name) return f;
  throw ConfigError("unknown motion filter '" + name + "'");
}

}  // namespace hagi
