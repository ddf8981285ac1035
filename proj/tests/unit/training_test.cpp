#include "support.hpp"

#include "hagi/checkpoint.hpp"
#include "hagi/training.hpp"

#include <nlohmann/json.hpp>

#include <doctest.h>

#include <sstream>

using namespace hagi;

namespace {

TrainConfig quick(int epochs) {
  TrainConfig t = TrainConfig::preset("micro");
  t.epochs = epochs;
  t.decay_epochs = {};
  t.batch_size = 8;
  t.diffusion_steps = 10;
  t.validate_every = 1;
  t.validation_windows = 6;
  t.seed = 4;
  return t;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("learning rate steps") {
    const TrainConfig t;
    CHECK(t.epochs == 500);
    CHECK(t.batch_size == 256);
    CHECK(t.lr_at(1) == 1e-3);
    CHECK(t.lr_at(374) == 1e-3);
    CHECK(t.lr_at(375) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(t.lr_at(449) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(t.lr_at(450) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(t.lr_at(500) == doctest::Approx(1e-5).epsilon(1e-12));
  }

  TEST_CASE("presets and validation") {
    const auto desk = TrainConfig::preset("desk");
    CHECK(desk.epochs == 30);
    CHECK(desk.batch_size == 32);
    CHECK_NOTHROW(desk.validate());
    CHECK(TrainConfig::preset("full").epochs == 500);
    CHECK_NOTHROW(TrainConfig::preset("micro").validate());
    CHECK_THROWS_AS(TrainConfig::preset("huge"), ConfigError);
    TrainConfig t;
    t.decay_epochs = {600};
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.learning_rate = 0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = {};
    t.validation_protocol = 40;
    CHECK_THROWS_AS(t.validate(), ConfigError);
  }

  TEST_CASE("AdamW matches a hand-rolled update") {
    const auto c = test::tiny_model(8);
    Rng rng(1);
    auto params = init_params<float>(c, rng);
    const auto before = params;
    auto grad = params.zeros_like();
    std::normal_distribution<float> n;
    for (auto& t : grad.tensors())
      for (Eigen::Index i = 0; i < t.tensor->size(); ++i) (*t.tensor)(i) = n(rng);
    TrainConfig cfg;
    AdamW opt(params, cfg);
    const double lr = 1e-2;
    opt.step(params, grad, lr);
    opt.step(params, grad, lr);
    const auto p = params.tensors();
    const auto p0 = before.tensors();
    const auto g = grad.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (Eigen::Index k = 0; k < std::min<Eigen::Index>(3, p[i].tensor->size()); ++k) {
        double w = (*p0[i].tensor)(k), m = 0, v = 0;
        const double gk = (*g[i].tensor)(k);
        for (int t = 1; t <= 2; ++t) {
          m = 0.9 * m + 0.1 * gk;
          v = 0.999 * v + 0.001 * gk * gk;
          w *= 1 - lr * 1e-2;
          w -= lr * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        }
        CHECK((*p[i].tensor)(k) == doctest::Approx(w).epsilon(1e-5));
      }
    }
    double sq = 0;
    for (const auto& t : g) sq += t.tensor->cast<double>().squaredNorm();
    CHECK(gradient_norm(grad) == doctest::Approx(std::sqrt(sq)));
  }

  TEST_CASE("training batches respect masks") {
    const auto data = test::synthetic_dataset(1, 20, 16, 3);
    std::vector<const Sample*> ws;
    for (const auto& s : data.samples) ws.push_back(&s);
    const auto schedule = build_schedule(10, 1e-4, 0.5);
    Rng rng(2);
    const auto c = test::tiny_model(16);
    const auto b = make_train_batch(c, schedule, ws, rng);
    CHECK(b.input.windows == static_cast<int>(ws.size()));
    CHECK(b.eps.rows() == 16 * b.input.windows);
    for (int w = 0; w < b.input.windows; ++w) {
      for (int l = 0; l < 16; ++l) {
        const auto r = static_cast<std::size_t>(w * 16 + l);
        if (b.target[r]) {
          CHECK(ws[w]->gaze.valid[l] == 1);
          CHECK(b.input.mask(static_cast<Eigen::Index>(r), 0) == 0.0f);
          CHECK(b.input.observed.row(static_cast<Eigen::Index>(r)).isZero());
        }
      }
      CHECK(b.input.steps[w] >= 1);
      CHECK(b.input.steps[w] <= 10);
    }
    auto g = c;
    g.mode = DenoiserMode::Generation;
    const auto bg = make_train_batch(g, schedule, ws, rng);
    for (int w = 0; w < bg.input.windows; ++w)
      for (int l = 0; l < 16; ++l) CHECK(bg.target[w * 16 + l] == ws[w]->gaze.valid[l]);
  }

  TEST_CASE("training is deterministic, logs NDJSON and keeps the best epoch") {
    const auto train_set = test::synthetic_dataset(2, 30, 16, 5);
    const auto val_set = test::synthetic_dataset(1, 20, 16, 6);
    const auto c = test::tiny_model(16);
    const auto cfg = quick(3);
    std::ostringstream log;
    const auto a = train(train_set, val_set, c, cfg, &log);
    const auto b = train(train_set, val_set, c, cfg);
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.epochs.size() == 3);
    std::istringstream lines(log.str());
    std::string line;
    int n = 0;
    double best = 1e9;
    while (std::getline(lines, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("epoch") == ++n);
      CHECK(j.at("lr").get<double>() == cfg.learning_rate);
      CHECK(j.contains("loss"));
      CHECK(j.contains("seconds"));
      CHECK(j.at("step").get<long long>() == n * ((static_cast<long long>(train_set.size()) + 7) / 8));
      best = std::min(best, j.at("val_mae").get<double>());
    }
    CHECK(n == 3);
    CHECK(a.best_val_mae == best);

    // Checkpoint round trip keeps the validation MAE.
    Checkpoint ck;
    ck.config = c;
    ck.schedule = a.schedule;
    ck.params = a.best.cast<double>();
    const auto dir = test::scratch_dir("train_ckpt");
    save_checkpoint(dir / "best.ckpt", ck);
    const auto back = load_checkpoint(dir / "best.ckpt");
    const Denoiser<float> loaded(back.config, back.params.cast<float>());
    CHECK(std::abs(validation_mae(loaded, back.schedule, val_set, cfg) - a.best_val_mae) < 1e-9);
  }

  TEST_CASE("loss decreases on synthetic data") {
    const auto train_set = test::synthetic_dataset(4, 60, 16, 7);
    auto cfg = quick(8);
    cfg.diffusion_steps = 50;
    const auto r = train(train_set, Dataset{}, test::tiny_model(16), cfg);
    CHECK(r.epochs.back().loss < r.epochs.front().loss);
    CHECK(r.best_epoch == 8);
  }

  TEST_CASE("non-finite loss aborts with a diagnostic") {
    auto data = test::synthetic_dataset(1, 20, 16, 8);
    data.samples[0].gaze.values(3, 0) = std::numeric_limits<double>::quiet_NaN();
    auto cfg = quick(1);
    cfg.batch_size = 64;
    CHECK_THROWS_WITH_AS(train(data, Dataset{}, test::tiny_model(16), cfg),
                         doctest::Contains("epoch 1, step 1"), RuntimeFailure);
    CHECK_THROWS_AS(train(Dataset{}, Dataset{}, test::tiny_model(16), cfg), ValidationError);
  }
}
