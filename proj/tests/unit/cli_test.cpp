#include "support.hpp"

#include "hagi/checkpoint.hpp"
#include "hagi/inference.hpp"

#include <nlohmann/json.hpp>

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sys/wait.h>

using namespace hagi;
namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("HAGI_CLI");
  return p ? p : "hagi";
}

struct Run {
  int code;
  std::string out;
};

/// Runs the CLI with stdout and stderr captured to files.
Run run(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli_output.txt";
  const std::string cmd = cli() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::string text{std::istreambuf_iterator<char>(in), {}};
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, text};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

/// Small shared fixture: synthetic recordings and one tiny trained model.
struct Fixture {
  fs::path dir = test::scratch_dir("cli");
  fs::path data = dir / "data";
  fs::path model = dir / "model";
  Fixture() {
    REQUIRE(run("synth --out " + data.string() + " --n 2 --duration 20 --seed 3 --invalid-fraction 0.01", dir).code == 0);
    const auto r = run("train --data " + data.string() + " --out " + model.string() +
                           " --preset micro --epochs 2 --window-length 30 --latent-dim 8 --blocks 1 --heads 2"
                           " --bands 1 --steps 10 --validation-windows 4 --no-film --seed 1",
                       dir);
    INFO(r.out);
    REQUIRE(r.code == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth is byte reproducible and validates ranges") {
    const auto dir = test::scratch_dir("cli_synth");
    REQUIRE(run("synth --out " + (dir / "a").string() + " --n 10 --seed 7 --duration 5", dir).code == 0);
    const auto r = run("synth --out " + (dir / "b").string() + " --n 10 --seed 7 --duration 5", dir);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("recording_009.csv") != std::string::npos);
    for (int i = 0; i < 10; ++i) {
      const std::string name = "recording_00" + std::to_string(i) + ".csv";
      CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }
    const auto bad = run("synth --out " + (dir / "c").string() + " --kappa 1.5", dir);
    CHECK(bad.code == 1);
    CHECK(bad.out.find("kappa must be in [0, 1]") != std::string::npos);
  }

  TEST_CASE("usage errors exit with 1") {
    const auto dir = test::scratch_dir("cli_usage");
    CHECK(run("train --out " + dir.string(), dir).code == 1);
    CHECK(run("frobnicate", dir).code == 1);
    CHECK(run("--help", dir).code == 0);
    CHECK(run("train --data " + fixture().data.string() + " --out " + (dir / "x").string() +
                  " --head-rotation-only --head-translation-only",
              dir)
              .code == 1);
  }

  TEST_CASE("bad data exits with 2") {
    const auto dir = test::scratch_dir("cli_bad");
    fs::create_directories(dir / "data");
    std::ofstream(dir / "data" / "broken.csv") << "timestamp_ns,pitch_rad\n0,0\n";
    const auto r = run("impute --data " + (dir / "data").string() + " --method linear --protocol 10 --out " +
                           (dir / "o").string(),
                       dir);
    CHECK(r.code == 2);
    CHECK(r.out.find("broken.csv") != std::string::npos);
  }

  TEST_CASE("training outputs") {
    const auto& f = fixture();
    CHECK(fs::exists(f.model / "best.ckpt"));
    CHECK(fs::exists(f.model / "final.ckpt"));
    CHECK(fs::exists(f.model / "run_config.toml"));
    CHECK(slurp(f.model / "run_config.toml").find("no-film=true") != std::string::npos);
    const auto ck = load_checkpoint(f.model / "best.ckpt");
    CHECK_FALSE(ck.config.film);
    CHECK(ck.config.seq_len == 30);
    std::ifstream log(f.model / "train_log.ndjson");
    int lines = 0;
    for (std::string line; std::getline(log, line); ++lines) CHECK(nlohmann::json::parse(line).contains("loss"));
    CHECK(lines == 2);
  }

  TEST_CASE("impute with a baseline writes a valid report") {
    const auto& f = fixture();
    const auto out = f.dir / "linear10";
    const auto r = run("impute --data " + f.data.string() + " --method linear --protocol 10 --window-length 30 --out " +
                           out.string(),
                       f.dir);
    INFO(r.out);
    REQUIRE(r.code == 0);
    const auto report = EvalReport::from_json(read_json(out / "report.json"));
    REQUIRE(report.mae_deg);
    CHECK(std::isfinite(*report.mae_deg));
    REQUIRE(report.js);
    CHECK(std::isfinite(*report.js));
    CHECK(fs::exists(out / "imputations.csv"));
    CHECK(fs::exists(out / "run_config.toml"));
  }

  TEST_CASE("protocol 100 is sent to generate and mode mismatches are refused") {
    const auto& f = fixture();
    const auto r = run("impute --data " + f.data.string() + " --method linear --protocol 100 --out " +
                           (f.dir / "p100").string(),
                       f.dir);
    CHECK(r.code == 1);
    CHECK(r.out.find("generate") != std::string::npos);
    const auto g = run("generate --data " + f.data.string() + " --checkpoint " + (f.model / "best.ckpt").string() +
                           " --out " + (f.dir / "gen").string(),
                       f.dir);
    CHECK(g.code == 1);
    CHECK(g.out.find("impute command") != std::string::npos);
  }

  TEST_CASE("head-zero MAE matches the metric oracle on the same masks") {
    const auto& f = fixture();
    const auto out = f.dir / "hz";
    REQUIRE(run("impute --data " + f.data.string() + " --method head-zero --protocol 30 --seed 5 --window-length 30 --out " +
                    out.string(),
                f.dir)
                .code == 0);
    auto data = load_dataset(f.data, 30);
    apply_protocol(data, 30, 5);
    double sum = 0;
    long long n = 0;
    for (const auto& s : data.samples) {
      for (int l = 0; l < s.length(); ++l) {
        if (s.mask.observed[l] || !s.gaze.valid[l]) continue;
        sum += std::acos(std::clamp(std::cos(s.gaze.angles(l, 0)) * std::cos(s.gaze.angles(l, 1)), -1.0, 1.0)) *
               180.0 / kPi;
        ++n;
      }
    }
    const auto report = read_json(out / "report.json");
    CHECK(report.at("n_frames").get<long long>() == n);
    CHECK(report.at("mae_deg").get<double>() == doctest::Approx(sum / n).epsilon(1e-12));
  }

  TEST_CASE("model imputation is reproducible for a fixed seed") {
    const auto& f = fixture();
    const std::string base = "impute --data " + f.data.string() + " --checkpoint " + (f.model / "best.ckpt").string() +
                             " --protocol 50 --draws 1 --seed 3 --out ";
    const auto a = run(base + (f.dir / "m1").string(), f.dir);
    INFO(a.out);
    REQUIRE(a.code == 0);
    REQUIRE(run(base + (f.dir / "m2").string(), f.dir).code == 0);
    CHECK(slurp(f.dir / "m1" / "imputations.csv") == slurp(f.dir / "m2" / "imputations.csv"));
    CHECK(read_json(f.dir / "m1" / "report.json").at("method") == "hagi++");
  }

  TEST_CASE("user mask files") {
    const auto& f = fixture();
    const auto data = load_dataset(f.data, 30);
    std::ofstream mask(f.dir / "mask.csv");
    for (std::size_t i = 0; i < data.size(); ++i) mask << i << ',' << std::string(10, '1') << std::string(20, '0') << '\n';
    mask.close();
    const auto out = f.dir / "masked";
    REQUIRE(run("impute --data " + f.data.string() + " --method nearest --mask " + (f.dir / "mask.csv").string() +
                    " --window-length 30 --out " + out.string(),
                f.dir)
                .code == 0);
    const auto report = EvalReport::from_json(read_json(out / "report.json"));
    long long want = 0;
    for (const auto& s : data.samples)
      for (int l = 10; l < 30; ++l) want += s.gaze.valid[l];
    CHECK(report.n_frames == want);
    std::ofstream(f.dir / "short.csv") << "0,0101\n";
    CHECK(run("impute --data " + f.data.string() + " --method nearest --mask " + (f.dir / "short.csv").string() +
                  " --window-length 30 --out " + (f.dir / "short").string(),
              f.dir)
              .code == 2);
  }

  TEST_CASE("evaluate tabulates methods by protocol") {
    const auto& f = fixture();
    const auto reports = f.dir / "reports";
    for (const char* m : {"linear", "nearest"}) {
      for (int p : {10, 50}) {
        REQUIRE(run("impute --data " + f.data.string() + " --method " + m + " --protocol " + std::to_string(p) +
                        " --window-length 30 --out " + (reports / (std::string(m) + std::to_string(p))).string(),
                    f.dir)
                    .code == 0);
      }
    }
    CHECK(run("evaluate " + reports.string(), f.dir).code == 1);
    const auto out = f.dir / "table";
    const auto r = run("evaluate " + reports.string() + " --group-by protocol --out " + out.string(), f.dir);
    INFO(r.out);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("| linear |") != std::string::npos);
    CHECK(r.out.find("MAE@50") != std::string::npos);
    const auto summary = read_json(out / "summary.json");
    CHECK(summary.size() == 4);
    CHECK(fs::exists(out / "velocity_linear_10.svg"));
    CHECK(fs::exists(out / "table.csv"));

    // Frame-weighted recomputation from the per-window scores.
    const auto rep = EvalReport::from_json(read_json(reports / "nearest50" / "report.json"));
    double sum = 0;
    long long n = 0;
    for (const auto& w : rep.windows) {
      if (!w.mae_deg) continue;
      sum += *w.mae_deg * w.n_frames;
      n += w.n_frames;
    }
    for (const auto& row : summary) {
      if (row.at("method") == "nearest" && row.at("protocol") == 50)
        CHECK(row.at("mae_deg").get<double>() == doctest::Approx(sum / n).epsilon(1e-12));
    }

    const auto empty = test::scratch_dir("cli_empty");
    CHECK(run("evaluate " + empty.string(), f.dir).code == 2);
  }

  TEST_CASE("config files supply defaults and run configs replay") {
    const auto& f = fixture();
    std::ofstream(f.dir / "synth.toml") << "[synth]\nn=1\nduration=3\nseed=11\n";
    const auto out = f.dir / "from_config";
    REQUIRE(run("--config " + (f.dir / "synth.toml").string() + " synth --out " + out.string(), f.dir).code == 0);
    CHECK(fs::exists(out / "recording_000.csv"));
    CHECK_FALSE(fs::exists(out / "recording_001.csv"));
    CHECK(read_recording(out / "recording_000.csv").size() == 90);

    // The written run config reproduces the run; the flag overrides its output path.
    const auto replay = f.dir / "replay";
    REQUIRE(run("--config " + (out / "run_config.toml").string() + " synth --out " + replay.string(), f.dir).code == 0);
    CHECK(slurp(out / "recording_000.csv") == slurp(replay / "recording_000.csv"));
  }
}
