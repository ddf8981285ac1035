#include "support.hpp"

#include "hagi/metrics.hpp"

#include <doctest.h>

using namespace hagi;

namespace {

// Great-circle angle via atan2 of cross and dot products, in degrees.
double angle_oracle(double p1, double y1, double p2, double y2) {
  const Eigen::Vector3d a(std::cos(p1) * std::sin(y1), std::sin(p1), std::cos(p1) * std::cos(y1));
  const Eigen::Vector3d b(std::cos(p2) * std::sin(y2), std::sin(p2), std::cos(p2) * std::cos(y2));
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / kPi;
}

double deg(double d) { return d * kPi / 180.0; }

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("unit vectors") {
    CHECK(angles_to_vector(0, 0).isApprox(Eigen::Vector3d(0, 0, 1)));
    const Eigen::Vector3d up = angles_to_vector(kPi / 2, 0);
    CHECK(std::abs(up.x()) < 1e-15);
    CHECK(up.y() == 1.0);
    CHECK(std::abs(up.z()) < 1e-15);
    const Eigen::Vector3d v = angles_to_vector(deg(30), deg(45));
    CHECK(std::abs(v.x() - 0.6123724356957945) < 1e-15);
    CHECK(std::abs(v.y() - 0.5) < 1e-15);
    CHECK(std::abs(v.z() - 0.6123724356957946) < 1e-15);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pitch(-1.5, 1.5), yaw(-3.1, 3.1);
    for (int i = 0; i < 1000; ++i) {
      const double p = pitch(rng), y = yaw(rng);
      const Eigen::Vector3d u = angles_to_vector(p, y);
      CHECK(std::abs(u.norm() - 1.0) < 1e-9);
      const Eigen::Vector2d back = vector_to_angles(u);
      CHECK(std::abs(back(0) - p) < 1e-9);
      CHECK(std::abs(back(1) - y) < 1e-9);
    }
  }

  TEST_CASE("mean angular error closed forms") {
    MatrixXd a(2, 2), b(2, 2);
    a << 0, 0, 0, 0;
    b << 0, kPi / 2, 0, 0;
    const std::vector<std::uint8_t> both{1, 1};
    CHECK(std::abs(mean_angular_error(a, a, both)) < 1e-9);
    CHECK(std::abs(mean_angular_error(a, b, both) - 45.0) < 1e-9);
    CHECK(std::abs(mean_angular_error(a, b, {1, 0}) - 90.0) < 1e-9);
    CHECK(std::abs(mean_angular_error(a, b, {0, 1})) < 1e-9);
    CHECK_THROWS_AS(mean_angular_error(a, b, {0, 0}), ValidationError);
    CHECK_THROWS_AS(mean_angular_error(a, b, {1}), ValidationError);
  }

  TEST_CASE("mean angular error agrees with the oracle, symmetric and order free") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.4, 1.4);
    const int n = 200;
    MatrixXd p(n, 2), t(n, 2);
    std::vector<std::uint8_t> s(n);
    double want = 0.0;
    int count = 0;
    for (int l = 0; l < n; ++l) {
      p.row(l) << u(rng), u(rng);
      t.row(l) << u(rng), u(rng);
      s[l] = l % 3 != 0;
      if (s[l]) {
        want += angle_oracle(p(l, 0), p(l, 1), t(l, 0), t(l, 1));
        ++count;
      }
    }
    const double got = mean_angular_error(p, t, s);
    CHECK(std::abs(got - want / count) < 1e-9);
    CHECK(std::abs(mean_angular_error(t, p, s) - got) < 1e-12);
    MatrixXd pr = p.colwise().reverse(), tr = t.colwise().reverse();
    std::vector<std::uint8_t> sr(s.rbegin(), s.rend());
    CHECK(std::abs(mean_angular_error(pr, tr, sr) - got) < 1e-9);
  }

  TEST_CASE("velocity") {
    const int n = 10;
    MatrixXd still = MatrixXd::Constant(n, 2, 0.2);
    const std::vector<std::uint8_t> all(n, 1);
    for (double v : gaze_velocity(still, all, all, 30.0)) CHECK(v == 0.0);
    CHECK(gaze_velocity(still, all, all, 30.0).size() == n - 1);

    MatrixXd sweep(n, 2);
    for (int l = 0; l < n; ++l) sweep.row(l) << 0.0, deg(l);
    for (double v : gaze_velocity(sweep, all, all, 30.0)) CHECK(v == doctest::Approx(30.0).epsilon(1e-9));

    // Saccade-like profile against a finite-difference oracle.
    MatrixXd sac(n, 2);
    for (int l = 0; l < n; ++l) sac.row(l) << deg(2.0 * std::tanh(l - 4.5)), deg(10.0 * std::tanh(l - 4.5));
    std::vector<std::uint8_t> scored{0, 1, 1, 0, 1, 1, 1, 1, 1, 1}, valid(n, 1);
    valid[4] = 0;
    const auto v = gaze_velocity(sac, scored, valid, 30.0);
    std::vector<double> want;
    for (int l = 1; l < n; ++l)
      if (scored[l] && valid[l - 1]) want.push_back(30.0 * angle_oracle(sac(l - 1, 0), sac(l - 1, 1), sac(l, 0), sac(l, 1)));
    REQUIRE(v.size() == want.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - want[i]) < 1e-9);
  }

  TEST_CASE("JS divergence") {
    const std::vector<double> p{0.5, 0.5, 0.0}, q{0.0, 0.5, 0.5};
    // KL(p || m) with m = (1/4, 1/2, 1/4) is (1/2) log2 2 = 1/2, so JS = 1/2.
    CHECK(std::abs(js_divergence_probabilities(p, q) - 0.5) < 1e-12);
    CHECK(js_divergence_probabilities(p, p) == 0.0);
    CHECK(js_divergence_probabilities({1, 0}, {0, 1}) == 1.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> a(10, 3), b(14, 5);
    std::vector<double> xs, ys;
    for (int i = 0; i < 2000; ++i) xs.push_back(std::abs(a(rng)));
    for (int i = 0; i < 1500; ++i) ys.push_back(std::abs(b(rng)));
    const double js = js_divergence(xs, ys);
    CHECK(js > 0.0);
    CHECK(js < 1.0);
    CHECK(std::abs(js_divergence(ys, xs) - js) < 1e-12);
    CHECK(js_divergence(xs, xs) == 0.0);
    CHECK(js_divergence({1.0, 1.1, 1.2}, {50.0, 60.0}) == 1.0);
    CHECK(js_divergence({3.0}, {3.0}) == 0.0);
    CHECK_THROWS_AS(js_divergence({}, {1.0}), ValidationError);
    CHECK_THROWS_AS(js_divergence({1.0}, {1.0}, 0), ConfigError);
  }
}
