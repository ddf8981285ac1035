#include "hagi/inference.hpp"

#include "hagi/baselines.hpp"
#include "hagi/metrics.hpp"
#include "hagi/recording.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace hagi {

std::string to_string(Method method) {
  switch (method) {
    case Method::Hagi:
      return "hagi++";
    case Method::CsdiLite:
      return "csdi-lite";
    case Method::Linear:
      return "linear";
    case Method::Nearest:
      return "nearest";
    case Method::HeadZero:
      return "head-zero";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::Hagi, Method::CsdiLite, Method::Linear, Method::Nearest, Method::HeadZero})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown method '" + name + "' (expected hagi++, csdi-lite, linear, nearest or head-zero)");
}

bool needs_checkpoint(Method method) { return method == Method::Hagi || method == Method::CsdiLite; }

void Dataset::append(const Dataset& other) {
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
  sources.insert(sources.end(), other.sources.begin(), other.sources.end());
}

Dataset load_dataset(const std::filesystem::path& path, int length, const ClipPolicy& policy) {
  Dataset data;
  const auto add_recording = [&](const std::filesystem::path& file) {
    auto clipped = clip_recording(read_recording(file), length, policy);
    for (auto& s : clipped) {
      data.samples.push_back(std::move(s));
      data.sources.push_back(file.filename().string());
    }
  };
  if (std::filesystem::is_directory(path)) {
    const auto files = list_recordings(path);
    if (files.empty()) throw ValidationError("no .csv recordings in " + path.string());
    for (const auto& f : files) add_recording(f);
  } else if (!std::filesystem::exists(path)) {
    throw ValidationError("no such file or directory: " + path.string());
  } else if (path.extension() == ".csv") {
    add_recording(path);
  } else {
    data.samples = load_samples(path);
    for (auto& s : data.samples) {
      if (s.length() != length) {
        throw ValidationError("sample cache holds " + std::to_string(s.length()) + "-frame windows, expected " +
                              std::to_string(length));
      }
    }
    data.sources.assign(data.samples.size(), path.filename().string());
  }
  return data;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("split fraction must be in [0, 1]");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Dataset& dst = i < first ? out.first : out.second;
    dst.samples.push_back(data.samples[order[i]]);
    dst.sources.push_back(data.sources[order[i]]);
  }
  return out;
}

void apply_protocol(Dataset& data, int percent, std::uint64_t seed) {
  const MaskProtocol protocol = protocol_from_percent(percent);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(percent)};
    Rng rng(seq);
    data.samples[i].mask = eval_mask(data.samples[i].gaze, protocol, rng);
  }
}

std::vector<MatrixXd> model_predict(const Denoiser<float>& model, const NoiseSchedule& schedule,
                                    const std::vector<Sample>& samples, const SamplingOptions& options) {
  if (options.draws < 1) throw ConfigError("--draws must be >= 1");
  const DenoiserConfig& cfg = model.config();
  const int L = cfg.seq_len;
  const int per_batch = options.batch_windows > 0 ? options.batch_windows : std::max(1, 64 / options.draws);
  std::vector<MatrixXd> out;
  out.reserve(samples.size());

  for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(per_batch)) {
    const int W = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(per_batch), samples.size() - b));
    std::vector<EncodedConditioning<float>> enc;
    std::vector<std::vector<std::uint8_t>> cond;
    MatrixXd observed(Eigen::Index(W) * L, 2);
    std::vector<std::uint8_t> cond_all;
    for (int w = 0; w < W; ++w) {
      const Sample& s = samples[b + static_cast<std::size_t>(w)];
      if (s.length() != L) {
        throw ValidationError("window has " + std::to_string(s.length()) + " frames, model expects " +
                              std::to_string(L));
      }
      enc.push_back(encode_conditioning<float>(s, cfg));
      cond.push_back(cfg.imputation() ? conditioning_frames(s.mask, s.gaze.valid)
                                      : std::vector<std::uint8_t>(static_cast<std::size_t>(L), 0));
      observed.middleRows(Eigen::Index(w) * L, L) = s.gaze.values;
      cond_all.insert(cond_all.end(), cond.back().begin(), cond.back().end());
    }

    const auto predictor = [&](const Matrix<float>& x, int t) {
      const int total = static_cast<int>(x.rows() / L);
      InputBuilder<float> builder(cfg, total);
      for (int k = 0; k < total; ++k) {
        const int w = k % W;
        const Matrix<float> x_t = x.middleRows(Eigen::Index(k) * L, L);
        if (cfg.imputation()) {
          builder.add_imputation(enc[static_cast<std::size_t>(w)], x_t, samples[b + static_cast<std::size_t>(w)].gaze.values,
                                 cond[static_cast<std::size_t>(w)], t);
        } else {
          builder.add_generation(enc[static_cast<std::size_t>(w)], x_t, t);
        }
      }
      return model.predict(builder.finish());
    };

    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(b)};
    Rng rng(seq);
    const SampleResult result = sample<float>(predictor, observed, cond_all, schedule, rng, options.draws);
    for (int w = 0; w < W; ++w) out.push_back(result.median.middleRows(Eigen::Index(w) * L, L));
  }
  return out;
}

MatrixXd baseline_predict(Method method, const Sample& sample) {
  const auto cond = conditioning_frames(sample.mask, sample.gaze.valid);
  switch (method) {
    case Method::Linear:
      return linear_impute(sample.gaze.angles, cond);
    case Method::Nearest:
      return nearest_impute(sample.gaze.angles, cond);
    case Method::HeadZero:
      return head_direction_impute(sample.gaze.angles, cond);
    default:
      throw ConfigError("method '" + to_string(method) + "' needs a checkpoint");
  }
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw ValidationError(std::string("report field '") + key + "' must be a number or null");
  return v.get<double>();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json wins = nlohmann::json::array();
  for (const auto& w : windows) {
    wins.push_back({{"source", w.source}, {"start_ns", w.start_ns}, {"n_frames", w.n_frames},
                    {"mae_deg", optional_number(w.mae_deg)}});
  }
  return {
      {"schema_version", kReportSchemaVersion},
      {"method", method},
      {"protocol", protocol},
      {"mae_deg", optional_number(mae_deg)},
      {"js", optional_number(js)},
      {"n_frames", n_frames},
      {"n_windows", windows.size()},
      {"seed", seed},
      {"draws", draws},
      {"windows", wins},
      {"velocity_deg_s", {{"pred", velocity_pred}, {"true", velocity_true}}},
  };
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw ValidationError("unsupported report schema version");
    }
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.protocol = j.at("protocol").get<int>();
    r.mae_deg = read_optional(j, "mae_deg");
    r.js = read_optional(j, "js");
    r.n_frames = j.at("n_frames").get<long long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.draws = j.at("draws").get<int>();
    for (const auto& w : j.at("windows")) {
      WindowScore s;
      s.source = w.at("source").get<std::string>();
      s.start_ns = w.at("start_ns").get<std::int64_t>();
      s.n_frames = w.at("n_frames").get<long long>();
      s.mae_deg = read_optional(w, "mae_deg");
      r.windows.push_back(std::move(s));
    }
    if (j.at("n_windows").get<std::size_t>() != r.windows.size()) throw ValidationError("n_windows mismatch");
    r.velocity_pred = j.at("velocity_deg_s").at("pred").get<std::vector<double>>();
    r.velocity_true = j.at("velocity_deg_s").at("true").get<std::vector<double>>();
    if (r.mae_deg && !(*r.mae_deg >= 0.0 && *r.mae_deg <= 180.0)) throw ValidationError("mae_deg outside [0, 180]");
    if (r.js && !(*r.js >= 0.0 && *r.js <= 1.0)) throw ValidationError("js outside [0, 1]");
    if (r.n_frames < 0) throw ValidationError("negative n_frames");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

EvalReport score_predictions(const std::string& method, int protocol, const Dataset& data,
                             const std::vector<MatrixXd>& predictions, std::uint64_t seed, int draws) {
  if (predictions.size() != data.size()) throw RuntimeFailure("prediction count does not match the window count");
  EvalReport report;
  report.method = method;
  report.protocol = protocol;
  report.seed = seed;
  report.draws = draws;
  AngularErrorSum total;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    const auto scored = target_frames(s.mask, s.gaze.valid);
    AngularErrorSum window;
    window.add(predictions[i], s.gaze.angles, scored);
    total.add(predictions[i], s.gaze.angles, scored);
    WindowScore ws;
    ws.source = data.sources[i];
    ws.start_ns = s.start_ns;
    ws.n_frames = window.frames;
    if (window.frames > 0) ws.mae_deg = window.mean();
    report.windows.push_back(std::move(ws));
    const auto vp = gaze_velocity(predictions[i], scored, s.gaze.valid);
    const auto vt = gaze_velocity(s.gaze.angles, scored, s.gaze.valid);
    report.velocity_pred.insert(report.velocity_pred.end(), vp.begin(), vp.end());
    report.velocity_true.insert(report.velocity_true.end(), vt.begin(), vt.end());
  }
  report.n_frames = total.frames;
  if (total.frames > 0) report.mae_deg = total.mean();
  if (!report.velocity_pred.empty() && !report.velocity_true.empty()) {
    report.js = js_divergence(report.velocity_pred, report.velocity_true);
  }
  return report;
}

void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<MatrixXd>& predictions) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "source,window,start_ns,frame,observed,valid,pitch_true,yaw_true,pitch_pred,yaw_pred\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    for (int l = 0; l < s.length(); ++l) {
      const auto u = static_cast<std::size_t>(l);
      out << data.sources[i] << ',' << i << ',' << s.start_ns << ',' << l << ',' << int(s.mask.observed[u]) << ','
          << int(s.gaze.valid[u]) << ',' << format_double(s.gaze.angles(l, 0)) << ','
          << format_double(s.gaze.angles(l, 1)) << ',' << format_double(predictions[i](l, 0)) << ','
          << format_double(predictions[i](l, 1)) << '\n';
    }
  }
  if (!out) throw RuntimeFailure("failed while writing " + path.string());
}

}  // namespace hagi
