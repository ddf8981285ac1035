#include "hagi/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hagi {

GazeSequence GazeSequence::from_angles(const MatrixXd& angles, std::vector<std::uint8_t> valid) {
  if (angles.cols() != 2 || angles.rows() != static_cast<Eigen::Index>(valid.size())) {
    throw ValidationError("gaze angles and validity flags disagree in shape");
  }
  GazeSequence g;
  g.angles = angles;
  for (Eigen::Index l = 0; l < angles.rows(); ++l) {
    if (!valid[static_cast<std::size_t>(l)]) g.angles.row(l).setZero();
  }
  g.values = normalize_gaze(g.angles);
  g.valid = std::move(valid);
  return g;
}

int GazeSequence::valid_count() const {
  return static_cast<int>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

std::string to_string(MaskProtocol p) {
  switch (p) {
    case MaskProtocol::TrainRandom:
      return "train-random";
    case MaskProtocol::EvalContiguous10:
      return "eval-contiguous-10";
    case MaskProtocol::EvalSegmented30:
      return "eval-segmented-30";
    case MaskProtocol::EvalSegmented50:
      return "eval-segmented-50";
    case MaskProtocol::EvalContiguous90:
      return "eval-contiguous-90";
    case MaskProtocol::Generation100:
      return "generation-100";
  }
  return "unknown";
}

MaskProtocol protocol_from_percent(int percent) {
  switch (percent) {
    case 10:
      return MaskProtocol::EvalContiguous10;
    case 30:
      return MaskProtocol::EvalSegmented30;
    case 50:
      return MaskProtocol::EvalSegmented50;
    case 90:
      return MaskProtocol::EvalContiguous90;
    case 100:
      return MaskProtocol::Generation100;
    default:
      throw ConfigError("unknown protocol " + std::to_string(percent) + " (expected 10, 30, 50, 90 or 100)");
  }
}

int protocol_percent(MaskProtocol p) {
  switch (p) {
    case MaskProtocol::EvalContiguous10:
      return 10;
    case MaskProtocol::EvalSegmented30:
      return 30;
    case MaskProtocol::EvalSegmented50:
      return 50;
    case MaskProtocol::EvalContiguous90:
      return 90;
    case MaskProtocol::Generation100:
      return 100;
    case MaskProtocol::TrainRandom:
      return 0;
  }
  return 0;
}

ObservationMask ObservationMask::all_observed(int length, MaskProtocol provenance) {
  ObservationMask m;
  m.observed.assign(static_cast<std::size_t>(length), 1);
  m.provenance = provenance;
  return m;
}

int ObservationMask::hidden_count() const {
  return static_cast<int>(std::count(observed.begin(), observed.end(), std::uint8_t{0}));
}

const RelativeMotion<double>* Sample::motion(MotionSource source) const {
  if (source == MotionSource::Head) return head.length() ? &head : nullptr;
  for (const auto& w : wrists)
    if (w.source == source) return &w;
  return nullptr;
}

namespace {

Sample make_sample(const Recording& rec, std::size_t start, int length) {
  const auto L = static_cast<std::size_t>(length);
  Sample s;
  s.start_ns = rec.timestamp_ns[start];
  s.gaze = GazeSequence::from_angles(rec.angles.middleRows(static_cast<Eigen::Index>(start), length),
                                     {rec.valid.begin() + static_cast<std::ptrdiff_t>(start),
                                      rec.valid.begin() + static_cast<std::ptrdiff_t>(start + L)});
  // h_l needs pose l+1; the recording's final frame falls back to zero motion.
  const std::size_t pose_end = std::min(start + L + 1, rec.size());
  s.head = relative_head_motion<double>(std::span(rec.head).subspan(start, pose_end - start));
  while (s.head.length() < L) s.head.frames.push_back(RigidTransform<double>::identity());

  const auto tracker = std::span(rec.head).subspan(start, L);
  if (rec.wrist_left) {
    s.wrists.push_back(relative_wrist_motion<double>(tracker, std::span(*rec.wrist_left).subspan(start, L),
                                                     MotionSource::WristLeft));
  }
  if (rec.wrist_right) {
    s.wrists.push_back(relative_wrist_motion<double>(tracker, std::span(*rec.wrist_right).subspan(start, L),
                                                     MotionSource::WristRight));
  }
  s.mask = ObservationMask::all_observed(length);
  return s;
}

bool acceptable(const Recording& rec, std::size_t start, int length, double max_invalid_fraction) {
  int invalid = 0;
  for (std::size_t i = start; i < start + static_cast<std::size_t>(length); ++i) invalid += rec.valid[i] ? 0 : 1;
  return invalid <= max_invalid_fraction * length + 1e-9;
}

void clip_range(const Recording& rec, std::size_t begin, std::size_t end, int length, const ClipPolicy& policy,
                std::vector<Sample>& out) {
  const auto L = static_cast<std::size_t>(length);
  for (std::size_t s = begin; s + L <= end; s += L) {
    if (acceptable(rec, s, length, policy.max_invalid_fraction)) out.push_back(make_sample(rec, s, length));
  }
}

}  // namespace

std::vector<Sample> clip_recording(const Recording& rec, int length, const ClipPolicy& policy) {
  if (length < 1) throw ConfigError("window length must be positive");
  std::vector<Sample> out;
  if (policy.windows) {
    for (const auto& w : *policy.windows) {
      const auto first = std::lower_bound(rec.timestamp_ns.begin(), rec.timestamp_ns.end(), w.start_ns);
      const auto last = std::lower_bound(rec.timestamp_ns.begin(), rec.timestamp_ns.end(), w.end_ns);
      clip_range(rec, static_cast<std::size_t>(first - rec.timestamp_ns.begin()),
                 static_cast<std::size_t>(last - rec.timestamp_ns.begin()), length, policy, out);
    }
    return out;
  }
  const auto trim = static_cast<std::size_t>(std::llround(policy.edge_trim_s * kSampleRateHz));
  if (rec.size() < 2 * trim) return out;
  clip_range(rec, trim, rec.size() - trim, length, policy, out);
  return out;
}

std::vector<TimeWindow> read_window_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open window list " + path.string());
  std::vector<TimeWindow> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    if (row == 1 && !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-')) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    TimeWindow w;
    if (!(fields >> w.start_ns >> w.end_ns) || w.end_ns <= w.start_ns) {
      throw ValidationError(path.string() + " row " + std::to_string(row) + ": expected start_ns,end_ns");
    }
    out.push_back(w);
  }
  return out;
}

int round_half_up_frames(double ratio, int length) {
  return static_cast<int>(std::floor(ratio * length + 0.5));
}

namespace {

std::vector<int> valid_indices(const GazeSequence& gaze) {
  std::vector<int> idx;
  for (int l = 0; l < gaze.length(); ++l)
    if (gaze.valid[static_cast<std::size_t>(l)]) idx.push_back(l);
  return idx;
}

ObservationMask hide(const GazeSequence& gaze, const std::vector<int>& valid, const std::vector<int>& positions,
                     MaskProtocol provenance) {
  ObservationMask m = ObservationMask::all_observed(gaze.length(), provenance);
  for (int p : positions) m.observed[static_cast<std::size_t>(valid[static_cast<std::size_t>(p)])] = 0;
  return m;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Random composition of `total` into `parts` non-negative integers.
std::vector<int> random_composition(Rng& rng, int total, int parts) {
  std::vector<int> cuts(static_cast<std::size_t>(parts - 1));
  for (auto& c : cuts) c = uniform_int(rng, 0, total);
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> out(static_cast<std::size_t>(parts));
  int prev = 0;
  for (int i = 0; i < parts - 1; ++i) {
    out[static_cast<std::size_t>(i)] = cuts[static_cast<std::size_t>(i)] - prev;
    prev = cuts[static_cast<std::size_t>(i)];
  }
  out.back() = total - prev;
  return out;
}

}  // namespace

ObservationMask contiguous_mask(const GazeSequence& gaze, int hidden, Rng& rng, MaskProtocol provenance) {
  const auto valid = valid_indices(gaze);
  const int v = static_cast<int>(valid.size());
  hidden = std::clamp(hidden, 0, v);
  if (hidden == 0) return ObservationMask::all_observed(gaze.length(), provenance);
  const int start = uniform_int(rng, 0, v - hidden);
  std::vector<int> positions(static_cast<std::size_t>(hidden));
  std::iota(positions.begin(), positions.end(), start);
  return hide(gaze, valid, positions, provenance);
}

ObservationMask segmented_mask(const GazeSequence& gaze, int hidden, Rng& rng, MaskProtocol provenance,
                               int min_run, int max_run) {
  const auto valid = valid_indices(gaze);
  const int v = static_cast<int>(valid.size());
  hidden = std::clamp(hidden, 0, v);
  if (hidden == 0) return ObservationMask::all_observed(gaze.length(), provenance);
  const int observed = v - hidden;

  // Run count: enough runs to respect max_run where possible, few enough that
  // every run reaches min_run and runs stay separated by observed frames.
  const int k_hi = std::max(1, std::min(hidden / min_run, observed + 1));
  const int k_lo = std::min(k_hi, std::max(1, (hidden + max_run - 1) / max_run));
  const int runs = uniform_int(rng, k_lo, k_hi);

  auto run_len = random_composition(rng, hidden - runs * std::min(min_run, hidden / runs), runs);
  for (auto& r : run_len) r += std::min(min_run, hidden / runs);
  auto gaps = random_composition(rng, observed - (runs - 1), runs + 1);
  for (int i = 1; i < runs; ++i) gaps[static_cast<std::size_t>(i)] += 1;

  std::vector<int> positions;
  positions.reserve(static_cast<std::size_t>(hidden));
  int cursor = 0;
  for (int i = 0; i < runs; ++i) {
    cursor += gaps[static_cast<std::size_t>(i)];
    for (int j = 0; j < run_len[static_cast<std::size_t>(i)]; ++j) positions.push_back(cursor++);
  }
  return hide(gaze, valid, positions, provenance);
}

ObservationMask train_mask(const GazeSequence& gaze, Rng& rng) {
  const double ratio = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
  const bool contiguous = std::bernoulli_distribution(0.5)(rng);
  const int hidden = round_half_up_frames(ratio, gaze.length());
  return contiguous ? contiguous_mask(gaze, hidden, rng, MaskProtocol::TrainRandom)
                    : segmented_mask(gaze, hidden, rng, MaskProtocol::TrainRandom);
}

ObservationMask eval_mask(const GazeSequence& gaze, MaskProtocol protocol, Rng& rng) {
  const int L = gaze.length();
  switch (protocol) {
    case MaskProtocol::EvalContiguous10:
      return contiguous_mask(gaze, round_half_up_frames(0.10, L), rng, protocol);
    case MaskProtocol::EvalSegmented30:
      return segmented_mask(gaze, round_half_up_frames(0.30, L), rng, protocol);
    case MaskProtocol::EvalSegmented50:
      return segmented_mask(gaze, round_half_up_frames(0.50, L), rng, protocol);
    case MaskProtocol::EvalContiguous90:
      return contiguous_mask(gaze, round_half_up_frames(0.90, L), rng, protocol);
    case MaskProtocol::Generation100: {
      ObservationMask m = ObservationMask::all_observed(L, protocol);
      for (int l = 0; l < L; ++l)
        if (gaze.valid[static_cast<std::size_t>(l)]) m.observed[static_cast<std::size_t>(l)] = 0;
      return m;
    }
    case MaskProtocol::TrainRandom:
      break;
  }
  throw ConfigError("eval_mask needs an evaluation protocol");
}

ObservationMask eval_mask(const GazeSequence& gaze, int percent, Rng& rng) {
  return eval_mask(gaze, protocol_from_percent(percent), rng);
}

std::vector<int> hidden_run_lengths(const ObservationMask& mask, const std::vector<std::uint8_t>& valid) {
  std::vector<int> runs;
  int current = 0;
  for (std::size_t l = 0; l < mask.observed.size(); ++l) {
    if (!valid[l]) continue;
    if (!mask.observed[l]) {
      ++current;
    } else if (current) {
      runs.push_back(current);
      current = 0;
    }
  }
  if (current) runs.push_back(current);
  return runs;
}

// ---------------------------------------------------------------------------
// Sample cache

namespace {

constexpr char kCacheMagic[8] = {'H', 'A', 'G', 'I', 'S', 'M', 'P', 'L'};
constexpr std::uint8_t kCacheVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("sample cache is truncated");
  return value;
}

void put_motion(std::ostream& out, const RelativeMotion<double>& m) {
  const MatrixXd flat = flatten(m);
  for (Eigen::Index r = 0; r < flat.rows(); ++r)
    for (Eigen::Index c = 0; c < flat.cols(); ++c) put(out, flat(r, c));
}

RelativeMotion<double> get_motion(std::istream& in, std::uint32_t length, MotionSource source) {
  RelativeMotion<double> m;
  m.source = source;
  m.frames.resize(length);
  for (auto& f : m.frames) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f.rotation(i, j) = get<double>(in);
    for (int i = 0; i < 3; ++i) f.translation(i) = get<double>(in);
  }
  return m;
}

}  // namespace

void save_samples(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write sample cache " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put(out, kCacheVersion);
  put(out, static_cast<std::uint32_t>(samples.size()));
  for (const auto& s : samples) {
    const auto L = static_cast<std::uint32_t>(s.length());
    put(out, s.start_ns);
    put(out, L);
    put(out, static_cast<std::uint8_t>(s.mask.provenance));
    put(out, static_cast<std::uint8_t>(s.wrists.size()));
    for (std::uint32_t l = 0; l < L; ++l) {
      put(out, s.gaze.angles(l, 0));
      put(out, s.gaze.angles(l, 1));
    }
    out.write(reinterpret_cast<const char*>(s.gaze.valid.data()), L);
    out.write(reinterpret_cast<const char*>(s.mask.observed.data()), L);
    put_motion(out, s.head);
    for (const auto& w : s.wrists) {
      put(out, static_cast<std::uint8_t>(w.source));
      put_motion(out, w);
    }
  }
  if (!out) throw RuntimeFailure("failed while writing " + path.string());
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open sample cache " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    throw ValidationError(path.string() + " is not a sample cache");
  }
  const auto version = get<std::uint8_t>(in);
  if (version != kCacheVersion) {
    throw ValidationError("sample cache version " + std::to_string(version) + " is not supported");
  }
  const auto count = get<std::uint32_t>(in);
  std::vector<Sample> samples;
  samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Sample s;
    s.start_ns = get<std::int64_t>(in);
    const auto L = get<std::uint32_t>(in);
    const auto provenance = static_cast<MaskProtocol>(get<std::uint8_t>(in));
    const auto n_wrists = get<std::uint8_t>(in);
    MatrixXd angles(L, 2);
    for (std::uint32_t l = 0; l < L; ++l) {
      angles(l, 0) = get<double>(in);
      angles(l, 1) = get<double>(in);
    }
    std::vector<std::uint8_t> valid(L), observed(L);
    in.read(reinterpret_cast<char*>(valid.data()), L);
    in.read(reinterpret_cast<char*>(observed.data()), L);
    if (!in) throw ValidationError("sample cache is truncated");
    s.gaze = GazeSequence::from_angles(angles, std::move(valid));
    s.mask.observed = std::move(observed);
    s.mask.provenance = provenance;
    s.head = get_motion(in, L, MotionSource::Head);
    for (int w = 0; w < n_wrists; ++w) {
      const auto source = static_cast<MotionSource>(get<std::uint8_t>(in));
      s.wrists.push_back(get_motion(in, L, source));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace hagi
