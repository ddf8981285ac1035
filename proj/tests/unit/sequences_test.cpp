#include "support.hpp"

#include "hagi/sequences.hpp"

#include <doctest.h>

#include <fstream>

using namespace hagi;

namespace {

// Runs of hidden frames, counted by walking valid frames in order.
std::vector<int> runs_oracle(const ObservationMask& m, const std::vector<std::uint8_t>& valid) {
  std::vector<int> compact;
  for (std::size_t l = 0; l < valid.size(); ++l)
    if (valid[l]) compact.push_back(m.observed[l] ? 0 : 1);
  std::vector<int> runs;
  int cur = 0;
  for (int h : compact) {
    if (h) {
      ++cur;
    } else if (cur > 0) {
      runs.push_back(cur);
      cur = 0;
    }
  }
  if (cur > 0) runs.push_back(cur);
  return runs;
}

int sum(const std::vector<int>& v) {
  int s = 0;
  for (int x : v) s += x;
  return s;
}

GazeSequence gaze_with_invalid(int length, std::initializer_list<int> invalid) {
  std::vector<std::uint8_t> valid(length, 1);
  for (int i : invalid) valid[i] = 0;
  return GazeSequence::from_angles(MatrixXd::Constant(length, 2, 0.1), valid);
}

}  // namespace

TEST_SUITE("sequences") {
  TEST_CASE("gaze sequence zeroes invalid frames") {
    MatrixXd a = MatrixXd::Constant(3, 2, 0.3);
    const auto g = GazeSequence::from_angles(a, {1, 0, 1});
    CHECK(g.angles(1, 0) == 0.0);
    CHECK(g.values(1, 1) == 0.0);
    CHECK(g.values(0, 0) == doctest::Approx(std::sin(0.3)));
    CHECK(g.valid_count() == 2);
  }

  TEST_CASE("clipping counts") {
    CHECK(clip_recording(test::simple_recording(7 * 30), 150).size() == 1);
    CHECK(clip_recording(test::simple_recording(23 * 30), 150).size() == 4);
    CHECK(clip_recording(test::simple_recording(6 * 30), 150).empty());
    CHECK(clip_recording(test::simple_recording(10), 150).empty());

    // Counting oracle over many durations.
    for (int seconds = 1; seconds < 40; ++seconds) {
      const int n = seconds * 30;
      const int usable = std::max(0, n - 60);
      CHECK(clip_recording(test::simple_recording(n), 150).size() == static_cast<std::size_t>(usable / 150));
    }
  }

  TEST_CASE("windows over the invalid limit are discarded") {
    Recording rec = test::simple_recording(7 * 30);
    for (int i = 30; i < 30 + 12; ++i) rec.valid[i] = 0;  // 8 % of 150
    CHECK(clip_recording(rec, 150).empty());
    rec.valid.assign(rec.size(), 1);
    for (int i = 30; i < 30 + 7; ++i) rec.valid[i] = 0;  // 4.7 %
    const auto kept = clip_recording(rec, 150);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].gaze.valid_count() == 143);
  }

  TEST_CASE("sample contents line up with the recording") {
    const Recording rec = test::simple_recording(300, true);
    const auto samples = clip_recording(rec, 60);
    REQUIRE(samples.size() == 4);
    const Sample& s = samples[1];
    CHECK(s.start_ns == rec.timestamp_ns[90]);
    CHECK(s.gaze.angles(5, 1) == rec.angles(95, 1));
    CHECK(s.head.length() == 60);
    const auto h = relative(rec.head[95].transform, rec.head[96].transform);
    CHECK(s.head.frames[5].rotation.isApprox(h.rotation));
    REQUIRE(s.wrists.size() == 2);
    CHECK(s.motion(MotionSource::WristRight) != nullptr);
    CHECK(s.motion(MotionSource::WristRight)->frames[5].translation.isApprox(
        relative(rec.head[95].transform, rec.wrist_right->at(95).transform).translation));
  }

  TEST_CASE("explicit window lists") {
    const Recording rec = test::simple_recording(400);
    ClipPolicy policy;
    policy.windows = std::vector<TimeWindow>{{rec.timestamp_ns[10], rec.timestamp_ns[10] + 6'000'000'000LL}};
    const auto s = clip_recording(rec, 150, policy);
    REQUIRE(s.size() == 1);
    CHECK(s[0].start_ns == rec.timestamp_ns[10]);

    const auto dir = test::scratch_dir("windows");
    std::ofstream(dir / "w.csv") << "start_ns,end_ns\n100,200\n300,450\n";
    const auto list = read_window_list(dir / "w.csv");
    REQUIRE(list.size() == 2);
    CHECK(list[1].end_ns == 450);
    std::ofstream(dir / "bad.csv") << "5,1\n";
    CHECK_THROWS_AS(read_window_list(dir / "bad.csv"), ValidationError);
  }

  TEST_CASE("round half up") {
    CHECK(round_half_up_frames(0.10, 150) == 15);
    CHECK(round_half_up_frames(0.30, 150) == 45);
    CHECK(round_half_up_frames(0.5, 15) == 8);
    CHECK(round_half_up_frames(0.9, 150) == 135);
  }

  TEST_CASE("protocol 10 and 90 are single runs") {
    Rng rng(1);
    const auto g = test::all_valid_gaze(150);
    for (int i = 0; i < 500; ++i) {
      const auto m10 = eval_mask(g, 10, rng);
      CHECK(runs_oracle(m10, g.valid) == std::vector<int>{15});
      CHECK(m10.provenance == MaskProtocol::EvalContiguous10);
      CHECK(runs_oracle(eval_mask(g, 90, rng), g.valid) == std::vector<int>{135});
    }
  }

  TEST_CASE("protocols 30 and 50 honor totals and run lengths") {
    Rng rng(2);
    const auto g = test::all_valid_gaze(150);
    for (int pct : {30, 50}) {
      const int want = pct == 30 ? 45 : 75;
      for (int i = 0; i < 1000; ++i) {
        const auto runs = runs_oracle(eval_mask(g, pct, rng), g.valid);
        CHECK(std::abs(sum(runs) - want) <= 1);
        for (int r : runs) CHECK(r >= 5);
      }
    }
  }

  TEST_CASE("protocol 100 hides every valid frame") {
    Rng rng(3);
    const auto g = gaze_with_invalid(20, {3});
    const auto m = eval_mask(g, 100, rng);
    for (int l = 0; l < 20; ++l) CHECK(m.observed[l] == (l == 3 ? 1 : 0));
    CHECK_THROWS_AS(eval_mask(g, 40, rng), ConfigError);
    CHECK_THROWS_AS(eval_mask(g, MaskProtocol::TrainRandom, rng), ConfigError);
  }

  TEST_CASE("invalid frames are never hidden") {
    Rng rng(4);
    const auto g = gaze_with_invalid(150, {0, 1, 2, 3, 4, 70, 71, 149});
    for (int i = 0; i < 1000; ++i) {
      for (const auto& m : {train_mask(g, rng), eval_mask(g, 10, rng), eval_mask(g, 30, rng),
                            eval_mask(g, 50, rng), eval_mask(g, 90, rng)}) {
        for (int l : {0, 1, 2, 3, 4, 70, 71, 149}) CHECK(m.observed[l] == 1);
        // the run helper agrees with the oracle
        CHECK(hidden_run_lengths(m, g.valid) == runs_oracle(m, g.valid));
      }
    }
  }

  TEST_CASE("training mask ratio averages one half") {
    Rng rng(5);
    const auto g = test::all_valid_gaze(150);
    double total = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) total += train_mask(g, rng).hidden_count() / 150.0;
    CHECK(total / draws == doctest::Approx(0.5).epsilon(0.04));
  }

  TEST_CASE("contiguous branch at ten percent") {
    Rng rng(6);
    const auto g = test::all_valid_gaze(150);
    const auto m = contiguous_mask(g, round_half_up_frames(0.10, 150), rng, MaskProtocol::TrainRandom);
    CHECK(runs_oracle(m, g.valid) == std::vector<int>{15});
  }

  TEST_CASE("sample cache round trip") {
    const auto samples = clip_recording(test::simple_recording(400, true), 100);
    auto copy = samples;
    Rng rng(7);
    copy[0].mask = eval_mask(copy[0].gaze, 30, rng);
    const auto dir = test::scratch_dir("cache");
    save_samples(dir / "s.bin", copy);
    const auto back = load_samples(dir / "s.bin");
    REQUIRE(back.size() == copy.size());
    CHECK(back[0].mask.observed == copy[0].mask.observed);
    CHECK(back[0].mask.provenance == MaskProtocol::EvalSegmented30);
    CHECK(back[1].gaze.angles == copy[1].gaze.angles);
    CHECK(back[1].start_ns == copy[1].start_ns);
    CHECK(back[2].wrists.size() == 2);
    CHECK(back[2].wrists[1].frames[9].rotation == copy[2].wrists[1].frames[9].rotation);
    CHECK(back[2].head.frames[9].translation == copy[2].head.frames[9].translation);

    std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTACACHE";
    CHECK_THROWS_AS(load_samples(dir / "bad.bin"), ValidationError);
  }
}
