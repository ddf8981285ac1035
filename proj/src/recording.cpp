#include "hagi/recording.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace hagi {
namespace {

constexpr const char* kPoseSuffixes[12] = {"r00", "r01", "r02", "r10", "r11", "r12",
                                           "r20", "r21", "r22", "tx",  "ty",  "tz"};

void append_pose_columns(std::vector<std::string>& cols, const std::string& prefix) {
  for (const char* s : kPoseSuffixes) cols.push_back(prefix + "_" + s);
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t row) {
  field = trim(field);
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ValidationError("recording row " + std::to_string(row) + ": cannot parse number '" +
                          std::string(field) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view field, std::size_t row) {
  field = trim(field);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ValidationError("recording row " + std::to_string(row) + ": cannot parse integer '" +
                          std::string(field) + "'");
  }
  return value;
}

Pose<double> parse_pose(const std::vector<std::string_view>& fields, std::size_t first, std::size_t row,
                        PoseFrame frame) {
  Pose<double> pose;
  pose.frame = frame;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pose.transform.rotation(i, j) = parse_double(fields[first + 3 * i + j], row);
    pose.transform.translation(i) = parse_double(fields[first + 9 + i], row);
  }
  if (!is_rotation(pose.transform.rotation)) {
    throw ValidationError("recording row " + std::to_string(row) + ": rotation is not orthonormal with det +1");
  }
  return pose;
}

void write_pose(std::ostream& out, const Pose<double>& pose) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out << ',' << format_double(pose.transform.rotation(i, j));
  for (int i = 0; i < 3; ++i) out << ',' << format_double(pose.transform.translation(i));
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw RuntimeFailure("failed to format number");
  return std::string(buf, ptr);
}

std::vector<std::string> recording_columns(bool wrist_left, bool wrist_right) {
  std::vector<std::string> cols = {"timestamp_ns", "pitch_rad", "yaw_rad", "valid"};
  append_pose_columns(cols, "head");
  if (wrist_left) append_pose_columns(cols, "wrist_left");
  if (wrist_right) append_pose_columns(cols, "wrist_right");
  return cols;
}

Recording parse_recording(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("recording is empty (header row is mandatory)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  std::map<std::string, std::size_t, std::less<>> index;
  {
    const auto header = split(line, ',');
    for (std::size_t i = 0; i < header.size(); ++i) index.emplace(std::string(trim(header[i])), i);
  }
  const auto column = [&](const std::string& name) -> std::size_t {
    const auto it = index.find(name);
    if (it == index.end()) throw ValidationError("recording header lacks column '" + name + "'");
    return it->second;
  };
  const auto has_group = [&](const std::string& prefix) {
    std::size_t present = 0;
    for (const char* s : kPoseSuffixes) present += index.count(prefix + "_" + s);
    if (present != 0 && present != 12) {
      throw ValidationError("recording header has an incomplete '" + prefix + "' pose group");
    }
    return present == 12;
  };

  const std::size_t c_ts = column("timestamp_ns");
  const std::size_t c_pitch = column("pitch_rad");
  const std::size_t c_yaw = column("yaw_rad");
  const std::size_t c_valid = column("valid");
  const std::size_t c_head = column("head_r00");
  for (const char* s : kPoseSuffixes) column(std::string("head_") + s);
  const bool left = has_group("wrist_left");
  const bool right = has_group("wrist_right");
  const std::size_t c_left = left ? column("wrist_left_r00") : 0;
  const std::size_t c_right = right ? column("wrist_right_r00") : 0;
  // Pose groups must be contiguous r00..tz in header order.
  const auto require_contiguous = [&](const std::string& group, std::size_t first) {
    for (int k = 0; k < 12; ++k) {
      if (column(group + "_" + kPoseSuffixes[k]) != first + static_cast<std::size_t>(k)) {
        throw ValidationError("recording header: '" + group + "' columns must be contiguous r00..tz");
      }
    }
  };
  require_contiguous("head", c_head);
  if (left) require_contiguous("wrist_left", c_left);
  if (right) require_contiguous("wrist_right", c_right);

  Recording rec;
  if (left) rec.wrist_left.emplace();
  if (right) rec.wrist_right.emplace();
  std::vector<double> pitch, yaw;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != index.size()) {
      throw ValidationError("recording row " + std::to_string(row) + ": expected " +
                            std::to_string(index.size()) + " fields, got " + std::to_string(fields.size()));
    }
    rec.timestamp_ns.push_back(parse_int(fields[c_ts], row));
    pitch.push_back(parse_double(fields[c_pitch], row));
    yaw.push_back(parse_double(fields[c_yaw], row));
    const auto v = parse_int(fields[c_valid], row);
    if (v != 0 && v != 1) throw ValidationError("recording row " + std::to_string(row) + ": valid must be 0 or 1");
    rec.valid.push_back(static_cast<std::uint8_t>(v));
    rec.head.push_back(parse_pose(fields, c_head, row, PoseFrame::WorldToTracker));
    if (left) rec.wrist_left->push_back(parse_pose(fields, c_left, row, PoseFrame::WorldToBand));
    if (right) rec.wrist_right->push_back(parse_pose(fields, c_right, row, PoseFrame::WorldToBand));
  }

  const std::size_t n = rec.timestamp_ns.size();
  const double period_ns = 1e9 / kSampleRateHz;
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = static_cast<double>(rec.timestamp_ns[i] - rec.timestamp_ns[i - 1]);
    if (dt < 0.8 * period_ns || dt > 1.2 * period_ns) {
      throw ValidationError("recording row " + std::to_string(i + 1) + ": timestamps are not uniform at 30 Hz");
    }
  }

  rec.angles.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    rec.angles(static_cast<Eigen::Index>(i), 0) = pitch[i];
    rec.angles(static_cast<Eigen::Index>(i), 1) = yaw[i];
    const bool in_range = std::isfinite(pitch[i]) && std::isfinite(yaw[i]) && std::abs(pitch[i]) <= kPi / 2 &&
                          std::abs(yaw[i]) <= kPi / 2;
    if (!in_range) rec.valid[i] = 0;
  }
  return rec;
}

Recording read_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open recording " + path.string());
  try {
    return parse_recording(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_recording(std::ostream& out, const Recording& rec) {
  const bool left = rec.wrist_left.has_value();
  const bool right = rec.wrist_right.has_value();
  const auto cols = recording_columns(left, right);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << rec.timestamp_ns[i] << ',' << format_double(rec.angles(r, 0)) << ',' << format_double(rec.angles(r, 1))
        << ',' << int(rec.valid[i]);
    write_pose(out, rec.head[i]);
    if (left) write_pose(out, (*rec.wrist_left)[i]);
    if (right) write_pose(out, (*rec.wrist_right)[i]);
    out << '\n';
  }
}

void write_recording(const std::filesystem::path& path, const Recording& rec) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write recording " + path.string());
  write_recording(out, rec);
  if (!out) throw RuntimeFailure("failed while writing " + path.string());
}

std::vector<std::filesystem::path> list_recordings(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hagi
