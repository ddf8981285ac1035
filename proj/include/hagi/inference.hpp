#pragma once

#include "hagi/diffusion.hpp"
#include "hagi/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hagi {

enum class Method { Hagi, CsdiLite, Linear, Nearest, HeadZero };

std::string to_string(Method method);
Method method_from_string(const std::string& name);
bool needs_checkpoint(Method method);

/// Windows plus the recording each came from.
struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> sources;

  std::size_t size() const { return samples.size(); }
  void append(const Dataset& other);
};

/// Loads every recording in `dir` (or a single CSV file, or a sample cache
/// written by save_samples) and clips it into L-frame windows.
Dataset load_dataset(const std::filesystem::path& path, int length, const ClipPolicy& policy = {});

/// Deterministic shuffle then split; the first part gets round(fraction * n) windows.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed);

/// Replaces every window's mask with the protocol's mask. Each window draws
/// from its own stream keyed by (seed, window index, percent), so different
/// methods see identical masks.
void apply_protocol(Dataset& data, int percent, std::uint64_t seed);

struct SamplingOptions {
  int draws = 100;
  std::uint64_t seed = 0;
  int batch_windows = 8;  // windows denoised together (times draws)
};

/// Per-window median prediction (L x 2 angles) from the reverse process. In
/// imputation mode the mask's observed and valid frames condition the model;
/// in generation mode no gaze is used.
std::vector<MatrixXd> model_predict(const Denoiser<float>& model, const NoiseSchedule& schedule,
                                    const std::vector<Sample>& samples, const SamplingOptions& options);

/// Classical imputer for one window (Linear, Nearest or HeadZero).
MatrixXd baseline_predict(Method method, const Sample& sample);

inline constexpr int kReportSchemaVersion = 1;

struct WindowScore {
  std::string source;
  std::int64_t start_ns = 0;
  long long n_frames = 0;
  std::optional<double> mae_deg;  // empty when the window has no scored frame
};

/// Evaluation report. mae_deg is the frame-weighted mean over windows; js
/// compares imputed and true gaze-velocity histograms at scored frames.
struct EvalReport {
  std::string method;
  int protocol = 0;
  std::optional<double> mae_deg;
  std::optional<double> js;
  long long n_frames = 0;
  std::uint64_t seed = 0;
  int draws = 0;
  std::vector<WindowScore> windows;
  std::vector<double> velocity_pred;  // deg/s at scored frames
  std::vector<double> velocity_true;

  nlohmann::json to_json() const;
  /// Throws ValidationError when the document does not follow the schema.
  static EvalReport from_json(const nlohmann::json& j);
};

/// Scores predictions against the windows' ground truth at hidden and valid frames.
EvalReport score_predictions(const std::string& method, int protocol, const Dataset& data,
                             const std::vector<MatrixXd>& predictions, std::uint64_t seed, int draws);

/// Writes one row per frame: source, window, start_ns, frame, observed, valid,
/// true and predicted angles.
void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<MatrixXd>& predictions);

}  // namespace hagi
