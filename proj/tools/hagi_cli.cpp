// Command-line front end: synth, train, impute, generate, evaluate.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 invalid input
// data, 3 runtime failure.

#include "hagi/checkpoint.hpp"
#include "hagi/inference.hpp"
#include "hagi/metrics.hpp"
#include "hagi/synthdata.hpp"
#include "hagi/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_output(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw hagi::RuntimeFailure("cannot create output directory " + dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw hagi::RuntimeFailure("cannot write " + path.string());
}

/// The fully resolved options (defaults, config file and flags) in the
/// format --config reads back.
void write_run_config(const fs::path& dir, const CLI::App& app) {
  write_text(dir / "run_config.toml", app.config_to_str(true, false));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<hagi::MotionSource> parse_modalities(const std::string& text) {
  std::vector<hagi::MotionSource> out;
  if (text == "none") return out;
  for (const auto& name : split_list(text)) out.push_back(hagi::motion_source_from_string(name));
  std::sort(out.begin(), out.end());
  return out;
}

hagi::ClipPolicy clip_policy(const std::string& window_list) {
  hagi::ClipPolicy policy;
  if (!window_list.empty()) policy.windows = hagi::read_window_list(window_list);
  return policy;
}

std::string format_number(const std::optional<double>& v, int precision = 3) {
  if (!v) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << *v;
  return out.str();
}

void print_report(const hagi::EvalReport& r) {
  std::cout << "method=" << r.method << " protocol=" << r.protocol << " mae_deg=" << format_number(r.mae_deg)
            << " js=" << format_number(r.js, 4) << " n_frames=" << r.n_frames << " n_windows=" << r.windows.size()
            << '\n';
}

/// Mask file rows: `window,mask` with one '0'/'1' character per frame (1 = observed).
void apply_mask_file(hagi::Dataset& data, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw hagi::ValidationError("cannot open mask file " + path.string());
  std::string line;
  std::vector<bool> seen(data.size(), false);
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("window", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw hagi::ValidationError("mask file row " + std::to_string(row) + ": expected window,mask");
    std::size_t index = 0;
    try {
      index = std::stoul(line.substr(0, comma));
    } catch (const std::exception&) {
      throw hagi::ValidationError("mask file row " + std::to_string(row) + ": bad window index");
    }
    if (index >= data.size()) throw hagi::ValidationError("mask file row " + std::to_string(row) + ": no such window");
    const std::string bits = line.substr(comma + 1);
    hagi::Sample& s = data.samples[index];
    if (static_cast<int>(bits.size()) != s.length()) {
      throw hagi::ValidationError("mask file row " + std::to_string(row) + ": mask length differs from the window");
    }
    for (std::size_t l = 0; l < bits.size(); ++l) {
      if (bits[l] != '0' && bits[l] != '1') throw hagi::ValidationError("mask file row " + std::to_string(row) + ": mask must be 0/1");
      s.mask.observed[l] = bits[l] == '1' || !s.gaze.valid[l] ? 1 : 0;
    }
    seen[index] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw hagi::ValidationError("mask file has no row for window " + std::to_string(i));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  hagi::SynthConfig config;
  std::string out;
  bool no_wrists = false;
};

void run_synth(SynthArgs& a, const CLI::App& app) {
  a.config.wrists = !a.no_wrists;
  a.config.validate();
  const auto dir = prepare_output(a.out);
  for (const auto& p : hagi::write_synthetic(a.config, dir)) std::cout << p.string() << '\n';
  write_run_config(dir, app);
}

struct ModelArgs {
  std::string modalities = "head";
  std::string mode = "impute";
  int window_length = hagi::kDefaultWindowLength;
  std::optional<int> latent_dim, blocks, heads, bands;
  bool head_rotation_only = false, head_translation_only = false;
  bool wrist_rotation_only = false, wrist_translation_only = false;
  bool no_film = false;
};

hagi::DenoiserConfig model_config(const ModelArgs& a) {
  hagi::DenoiserConfig c;
  c.seq_len = a.window_length;
  c.modalities = parse_modalities(a.modalities);
  c.mode = hagi::denoiser_mode_from_string(a.mode);
  if (a.latent_dim) c.latent_dim = *a.latent_dim;
  if (a.blocks) c.blocks = *a.blocks;
  if (a.heads) c.heads = *a.heads;
  if (a.bands) c.bands = *a.bands;
  c.film = !a.no_film;
  if (a.head_rotation_only && a.head_translation_only) {
    throw hagi::ConfigError("--head-rotation-only and --head-translation-only are mutually exclusive");
  }
  if (a.wrist_rotation_only && a.wrist_translation_only) {
    throw hagi::ConfigError("--wrist-rotation-only and --wrist-translation-only are mutually exclusive");
  }
  if ((a.head_rotation_only || a.head_translation_only) && !c.has_modality(hagi::MotionSource::Head)) {
    throw hagi::ConfigError("head ablation flags need the head modality");
  }
  const bool wrists = c.has_modality(hagi::MotionSource::WristLeft) || c.has_modality(hagi::MotionSource::WristRight);
  if ((a.wrist_rotation_only || a.wrist_translation_only) && !wrists) {
    throw hagi::ConfigError("wrist ablation flags need a wrist modality");
  }
  if (a.head_rotation_only) c.head_filter = hagi::MotionFilter::RotationOnly;
  if (a.head_translation_only) c.head_filter = hagi::MotionFilter::TranslationOnly;
  if (a.wrist_rotation_only) c.wrist_filter = hagi::MotionFilter::RotationOnly;
  if (a.wrist_translation_only) c.wrist_filter = hagi::MotionFilter::TranslationOnly;
  c.validate();
  return c;
}

struct TrainArgs {
  std::string data, val_data, out, window_list;
  std::string preset = "desk";
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::optional<int> epochs, batch_size, steps, validate_every, validation_windows, validation_draws;
  std::optional<double> lr;
  bool no_clip = false;
  ModelArgs model;
};

void run_train(TrainArgs& a, const CLI::App& app) {
  const hagi::DenoiserConfig mc = model_config(a.model);
  hagi::TrainConfig tc = hagi::TrainConfig::preset(a.preset);
  tc.seed = a.seed;
  if (a.epochs) {
    // Keep the decay points at the same fraction of the run.
    const int old = tc.epochs;
    tc.epochs = *a.epochs;
    for (int& e : tc.decay_epochs) e = std::clamp(static_cast<int>(std::lround(double(e) * tc.epochs / old)), 1, tc.epochs);
    tc.decay_epochs.erase(std::remove_if(tc.decay_epochs.begin(), tc.decay_epochs.end(),
                                         [&](int e) { return e >= tc.epochs; }),
                          tc.decay_epochs.end());
  }
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.steps) tc.diffusion_steps = *a.steps;
  if (a.validate_every) tc.validate_every = *a.validate_every;
  if (a.validation_windows) tc.validation_windows = *a.validation_windows;
  if (a.validation_draws) tc.validation_draws = *a.validation_draws;
  if (a.no_clip) tc.clip_gradients = false;
  if (!mc.imputation()) tc.validation_protocol = 100;
  tc.validate();

  const auto policy = clip_policy(a.window_list);
  hagi::Dataset train_set, val_set;
  if (!a.val_data.empty()) {
    train_set = hagi::load_dataset(a.data, mc.seq_len, policy);
    val_set = hagi::load_dataset(a.val_data, mc.seq_len, policy);
  } else {
    auto parts = hagi::split_dataset(hagi::load_dataset(a.data, mc.seq_len, policy), 1.0 - a.val_fraction, a.seed);
    train_set = std::move(parts.first);
    val_set = std::move(parts.second);
  }
  if (train_set.size() == 0) throw hagi::ValidationError("no usable training windows in " + a.data);
  std::cerr << "training on " << train_set.size() << " windows, validating on " << val_set.size() << '\n';

  const auto dir = prepare_output(a.out);
  write_run_config(dir, app);
  std::ofstream log(dir / "train_log.ndjson");
  if (!log) throw hagi::RuntimeFailure("cannot write training log");
  const auto result = hagi::train(train_set, val_set, mc, tc, &log, [&](const hagi::EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "/" << tc.epochs << " loss " << r.loss << " lr " << r.lr;
    if (r.val_mae) std::cerr << " val_mae " << *r.val_mae;
    std::cerr << " (" << std::lround(r.seconds) << " s)\n";
  });

  const json meta = {{"preset", a.preset},         {"seed", a.seed},
                     {"epochs", tc.epochs},        {"best_epoch", result.best_epoch},
                     {"best_val_mae", std::isfinite(result.best_val_mae) ? json(result.best_val_mae) : json(nullptr)},
                     {"train_windows", train_set.size()}, {"val_windows", val_set.size()}};
  hagi::Checkpoint ck{mc, result.schedule, result.best.cast<double>(), meta};
  hagi::save_checkpoint(dir / "best.ckpt", ck);
  ck.params = result.final.cast<double>();
  hagi::save_checkpoint(dir / "final.ckpt", ck);
  std::cout << (dir / "best.ckpt").string() << '\n' << (dir / "final.ckpt").string() << '\n';
}

struct PredictArgs {
  std::string data, checkpoint, out, method = "hagi++", mask_file, window_list;
  std::optional<int> protocol;
  int draws = 100;
  int batch_windows = 0;
  int window_length = hagi::kDefaultWindowLength;
  std::uint64_t seed = 0;
};

struct LoadedModel {
  hagi::Checkpoint checkpoint;
  std::optional<hagi::Denoiser<float>> model;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw hagi::ConfigError("this method needs --checkpoint");
  LoadedModel m{hagi::load_checkpoint(path), std::nullopt};
  m.model.emplace(m.checkpoint.config, m.checkpoint.params.cast<float>());
  return m;
}

void run_predict(PredictArgs& a, const CLI::App& app, bool generation) {
  hagi::Method method = hagi::method_from_string(a.method);
  int protocol = 100;
  if (!generation) {
    if (a.protocol && *a.protocol == 100) {
      throw hagi::ConfigError("protocol 100 means no gaze is observed; use the generate command");
    }
    if (!a.protocol && a.mask_file.empty()) throw hagi::ConfigError("impute needs --protocol or --mask");
    if (a.protocol) {
      if (*a.protocol != 10 && *a.protocol != 30 && *a.protocol != 50 && *a.protocol != 90) {
        throw hagi::ConfigError("--protocol must be one of 10, 30, 50, 90");
      }
      protocol = *a.protocol;
    } else {
      protocol = 0;  // user-supplied mask
    }
  } else if (method != hagi::Method::Hagi && method != hagi::Method::HeadZero) {
    throw hagi::ConfigError("generate supports --method hagi++ or head-zero");
  }

  LoadedModel loaded;
  std::string label = hagi::to_string(method);
  int length = a.window_length;
  if (hagi::needs_checkpoint(method)) {
    loaded = load_model(a.checkpoint);
    const auto& cfg = loaded.checkpoint.config;
    if (generation && cfg.imputation()) {
      throw hagi::ConfigError("checkpoint holds an imputation-mode model; use the impute command");
    }
    if (!generation && !cfg.imputation()) {
      throw hagi::ConfigError("checkpoint holds a generation-mode model; use the generate command");
    }
    const bool motion_free = cfg.modalities.empty();
    if (method == hagi::Method::CsdiLite && !motion_free) {
      throw hagi::ConfigError("--method csdi-lite needs a checkpoint trained with --modalities none");
    }
    label = motion_free ? "csdi-lite" : "hagi++";
    length = cfg.seq_len;
  }

  hagi::Dataset data = hagi::load_dataset(a.data, length, clip_policy(a.window_list));
  if (data.size() == 0) throw hagi::ValidationError("no usable windows in " + a.data);
  if (!a.mask_file.empty()) {
    apply_mask_file(data, a.mask_file);
  } else {
    hagi::apply_protocol(data, protocol, a.seed);
  }

  std::vector<hagi::MatrixXd> predictions;
  int draws = 0;
  if (loaded.model) {
    hagi::SamplingOptions opts;
    opts.draws = a.draws;
    opts.seed = a.seed;
    opts.batch_windows = a.batch_windows;
    predictions = hagi::model_predict(*loaded.model, loaded.checkpoint.schedule, data.samples, opts);
    draws = a.draws;
  } else {
    for (const auto& s : data.samples) predictions.push_back(hagi::baseline_predict(method, s));
  }

  const auto dir = prepare_output(a.out);
  write_run_config(dir, app);
  hagi::write_predictions(dir / (generation ? "generated.csv" : "imputations.csv"), data, predictions);
  const auto report = hagi::score_predictions(label, protocol, data, predictions, a.seed, draws);
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  print_report(report);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> inputs;
  std::string out, group_by;
  int bins = 100;
};

std::vector<fs::path> find_reports(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "summary.json")
          out.push_back(e.path());
    } else if (fs::exists(in)) {
      out.push_back(in);
    } else {
      throw hagi::ValidationError("no such report: " + in);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Cell {
  double weighted_mae = 0.0;
  long long frames = 0;
  std::vector<double> vp, vt;
  std::optional<double> mae() const { return frames > 0 ? std::optional<double>(weighted_mae / frames) : std::nullopt; }
};

void write_histogram_svg(const fs::path& path, const std::string& title, const std::vector<double>& pred,
                         const std::vector<double>& truth, int bins) {
  double hi = 0.0;
  for (double v : pred) hi = std::max(hi, v);
  for (double v : truth) hi = std::max(hi, v);
  if (hi <= 0.0) hi = 1.0;
  const auto histogram = [&](const std::vector<double>& xs) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double x : xs) h[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(x / hi * bins)))] += 1.0;
    for (double& c : h) c /= std::max<std::size_t>(xs.size(), 1);
    return h;
  };
  const auto hp = histogram(pred);
  const auto ht = histogram(truth);
  const double top = std::max(*std::max_element(hp.begin(), hp.end()), *std::max_element(ht.begin(), ht.end()));
  const double w = 640, h = 360, pad = 40;
  const auto polyline = [&](const std::vector<double>& hist, const char* colour) {
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (int b = 0; b < bins; ++b) {
      const double y = h - pad - (top > 0 ? hist[static_cast<std::size_t>(b)] / top : 0.0) * (h - 2 * pad);
      s << pad + (w - 2 * pad) * b / bins << ',' << y << ' ' << pad + (w - 2 * pad) * (b + 1) / bins << ',' << y << ' ';
    }
    s << "\"/>\n";
    return s.str();
  };
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << w - pad << "\" y=\"" << h - 12 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"12\">" << std::fixed << std::setprecision(0) << hi << " deg/s</text>\n"
      << polyline(ht, "black") << polyline(hp, "crimson")
      << "<text x=\"" << w - pad << "\" y=\"24\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
      << "black: ground truth, red: predicted</text>\n</svg>\n";
  write_text(path, svg.str());
}

void run_evaluate(EvaluateArgs& a, const CLI::App& app) {
  const auto files = find_reports(a.inputs);
  if (files.empty()) throw hagi::ValidationError("no reports to evaluate");
  if (!a.group_by.empty() && a.group_by != "protocol") throw hagi::ConfigError("--group-by accepts only 'protocol'");

  std::map<std::pair<std::string, int>, Cell> cells;
  std::set<int> protocols;
  std::set<std::string> methods;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw hagi::ValidationError(f.string() + ": " + e.what());
    }
    const auto r = hagi::EvalReport::from_json(j);
    protocols.insert(r.protocol);
    methods.insert(r.method);
    Cell& c = cells[{r.method, r.protocol}];
    for (const auto& w : r.windows) {
      if (!w.mae_deg) continue;
      c.weighted_mae += *w.mae_deg * static_cast<double>(w.n_frames);
      c.frames += w.n_frames;
    }
    c.vp.insert(c.vp.end(), r.velocity_pred.begin(), r.velocity_pred.end());
    c.vt.insert(c.vt.end(), r.velocity_true.begin(), r.velocity_true.end());
  }
  if (protocols.size() > 1 && a.group_by != "protocol") {
    throw hagi::ConfigError("reports mix several protocols; pass --group-by protocol");
  }

  std::ostringstream md, csv;
  md << "| method |";
  for (int p : protocols) md << " MAE@" << p << " | JS@" << p << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < protocols.size(); ++i) md << "---|---|";
  md << '\n';
  csv << "method,protocol,mae_deg,js,n_frames\n";
  json summary = json::array();
  for (const auto& m : methods) {
    md << "| " << m << " |";
    for (int p : protocols) {
      const auto it = cells.find({m, p});
      if (it == cells.end()) {
        md << " - | - |";
        continue;
      }
      Cell& c = it->second;
      std::optional<double> js;
      if (!c.vp.empty() && !c.vt.empty()) js = hagi::js_divergence(c.vp, c.vt, a.bins);
      md << ' ' << format_number(c.mae()) << " | " << format_number(js, 4) << " |";
      csv << m << ',' << p << ',' << (c.mae() ? hagi::format_double(*c.mae()) : "") << ','
          << (js ? hagi::format_double(*js) : "") << ',' << c.frames << '\n';
      summary.push_back({{"method", m},
                         {"protocol", p},
                         {"mae_deg", c.mae() ? json(*c.mae()) : json(nullptr)},
                         {"js", js ? json(*js) : json(nullptr)},
                         {"n_frames", c.frames}});
    }
    md << '\n';
  }
  std::cout << md.str();

  if (!a.out.empty()) {
    const auto dir = prepare_output(a.out);
    write_run_config(dir, app);
    write_text(dir / "table.md", md.str());
    write_text(dir / "table.csv", csv.str());
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    for (const auto& [key, c] : cells) {
      if (c.vp.empty() || c.vt.empty()) continue;
      std::string name = "velocity_" + key.first + "_" + std::to_string(key.second) + ".svg";
      std::replace(name.begin(), name.end(), '+', 'p');
      write_histogram_svg(dir / name, key.first + ", protocol " + std::to_string(key.second), c.vp, c.vt, 50);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze imputation and generation with a motion-conditioned diffusion model"};
  app.set_config("--config", "", "TOML/INI file supplying option values (flags take precedence)");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write synthetic eye-head-wrist recordings");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--n", synth.config.n_recordings, "Number of recordings")->capture_default_str();
  s->add_option("--duration", synth.config.duration_s, "Seconds per recording")->capture_default_str();
  s->add_option("--kappa", synth.config.kappa, "Head share of gaze shifts, [0, 1]")->capture_default_str();
  s->add_option("--saccade-rate", synth.config.saccade_rate, "Saccades per second")->capture_default_str();
  s->add_option("--fixation-noise", synth.config.fixation_noise_deg, "Eye jitter std in degrees")->capture_default_str();
  s->add_option("--rho", synth.config.rho, "Wrist/gaze correlation, [0, 1]")->capture_default_str();
  s->add_option("--seed", synth.config.seed, "Random seed")->capture_default_str();
  s->add_option("--invalid-fraction", synth.config.invalid_fraction, "Expected share of blink frames")
      ->capture_default_str();
  s->add_option("--lag", synth.config.lag_frames, "Head lag in frames")->capture_default_str();
  s->add_option("--smoothing", synth.config.smoothing_frames, "Head low-pass window in frames")->capture_default_str();
  s->add_option("--head-wander", synth.config.head_wander_deg, "Independent head rotation std in degrees")
      ->capture_default_str();
  s->add_flag("--no-wrists", synth.no_wrists, "Omit wrist poses");

  const auto add_data = [](CLI::App* cmd, std::string& data, std::string& window_list) {
    cmd->add_option("--data", data, "Recording directory, CSV file or sample cache")
        ->envname("HAGI_DATA_DIR")
        ->required();
    cmd->add_option("--window-list", window_list, "CSV of start_ns,end_ns windows to clip");
  };

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a denoiser");
  add_data(t, train.data, train.window_list);
  t->add_option("--val-data", train.val_data, "Separate validation data (default: split --data)");
  t->add_option("--val-fraction", train.val_fraction, "Validation share when splitting --data")->capture_default_str();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--preset", train.preset, "full, desk or micro")->capture_default_str();
  t->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  t->add_option("--epochs", train.epochs, "Override the preset's epoch count");
  t->add_option("--batch-size", train.batch_size, "Override the preset's batch size");
  t->add_option("--lr", train.lr, "Base learning rate");
  t->add_option("--steps", train.steps, "Diffusion steps T");
  t->add_option("--validate-every", train.validate_every, "Epochs between validations");
  t->add_option("--validation-windows", train.validation_windows, "Validation subset size (0 = all)");
  t->add_option("--validation-draws", train.validation_draws, "Sampling draws per validation window");
  t->add_flag("--no-clip", train.no_clip, "Disable gradient clipping");
  t->add_option("--modalities", train.model.modalities, "head[,wrist-left][,wrist-right] or none")
      ->capture_default_str();
  t->add_option("--mode", train.model.mode, "impute or generate")->capture_default_str();
  t->add_option("--window-length", train.model.window_length, "Frames per window")->capture_default_str();
  t->add_option("--latent-dim", train.model.latent_dim, "Latent width D");
  t->add_option("--blocks", train.model.blocks, "Transformer blocks N");
  t->add_option("--heads", train.model.heads, "Attention heads");
  t->add_option("--bands", train.model.bands, "Fourier bands for motion features");
  t->add_flag("--head-rotation-only", train.model.head_rotation_only, "Zero head translations");
  t->add_flag("--head-translation-only", train.model.head_translation_only, "Zero head rotations");
  t->add_flag("--wrist-rotation-only", train.model.wrist_rotation_only, "Zero wrist translations");
  t->add_flag("--wrist-translation-only", train.model.wrist_translation_only, "Zero wrist rotations");
  t->add_flag("--no-film", train.model.no_film, "Disable FiLM fusion");

  const auto add_predict = [&](CLI::App* cmd, PredictArgs& p) {
    add_data(cmd, p.data, p.window_list);
    cmd->add_option("--checkpoint", p.checkpoint, "Model checkpoint");
    cmd->add_option("--method", p.method, "hagi++, csdi-lite, linear, nearest or head-zero")->capture_default_str();
    cmd->add_option("--draws", p.draws, "Sampling draws per window (median is reported)")->capture_default_str();
    cmd->add_option("--batch-windows", p.batch_windows, "Windows denoised together (0 = automatic)");
    cmd->add_option("--seed", p.seed, "Random seed for masks and sampling")->capture_default_str();
    cmd->add_option("--window-length", p.window_length, "Frames per window for baselines")->capture_default_str();
    cmd->add_option("--out", p.out, "Output directory")->required();
  };

  PredictArgs impute;
  auto* im = app.add_subcommand("impute", "Impute hidden gaze and score it");
  add_predict(im, impute);
  im->add_option("--protocol", impute.protocol, "Missing-data protocol: 10, 30, 50 or 90");
  im->add_option("--mask", impute.mask_file, "Mask file (window,mask rows; 1 = observed)");

  PredictArgs generate;
  auto* ge = app.add_subcommand("generate", "Generate gaze from body motion alone");
  add_predict(ge, generate);

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "Aggregate reports into method x protocol tables");
  ev->add_option("reports", evaluate.inputs, "Report files or directories")->required();
  ev->add_option("--group-by", evaluate.group_by, "Set to 'protocol' to tabulate several protocols");
  ev->add_option("--bins", evaluate.bins, "Histogram bins for JS")->capture_default_str();
  ev->add_option("--out", evaluate.out, "Directory for tables and velocity histograms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (s->parsed()) run_synth(synth, app);
    if (t->parsed()) run_train(train, app);
    if (im->parsed()) run_predict(impute, app, false);
    if (ge->parsed()) run_predict(generate, app, true);
    if (ev->parsed()) run_evaluate(evaluate, app);
  } catch (const hagi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
