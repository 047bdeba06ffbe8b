#include <catch_amalgamated.hpp>

#include "ossf/polar.hpp"

using namespace ossf;
using Catch::Approx;

namespace {

Mat diag2(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

std::vector<Mat> test_operators() {
  Mat jordan(2, 2), rot(2, 2);
  jordan << 2, 1, 0, 2;
  rot << 2, 1, -1, 2;
  return {Mat(Mat::Identity(2, 2)), diag2(2.0, 10.0 / 3.0), jordan, rot};
}

}  // namespace

TEST_CASE("radial norm closed forms") {
  SECTION("E = I collapses to the Euclidean norm") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    Vec x(2);
    x << 0.0, 3.0;
    REQUIRE(ps.radial_norm(x) == Approx(3.0).epsilon(1e-10));
  }
  SECTION("x = 0") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    REQUIRE(ps.radial_norm(Vec(Vec::Zero(2))) == 0.0);
  }
  SECTION("E = diag(2,2), x = (2,0): int_0^1 2 t^2 dt/t = 1") {
    polar::PolarSystem ps{diag2(2, 2)};
    Vec x(2);
    x << 2.0, 0.0;
    REQUIRE(ps.radial_norm(x) == Approx(1.0).epsilon(1e-10));
  }
  SECTION("operator not in Q is rejected") {
    REQUIRE_THROWS_AS(polar::PolarSystem{Mat(Mat::Zero(2, 2))},
                      std::domain_error);
  }
}

TEST_CASE("tau closed forms and scaling") {
  SECTION("E = I reduces to |x|") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    Vec x(2);
    x << 0.0, 5.0;
    REQUIRE(ps.tau(x) == Approx(5.0).epsilon(1e-8));
  }
  SECTION("E = diag(2,2): tau = sqrt(|x|/2)") {
    polar::PolarSystem ps{diag2(2, 2)};
    Vec x(2);
    x << 2.0, 0.0;
    REQUIRE(ps.tau(x) == Approx(1.0).epsilon(1e-8));
    Vec y(2);
    y << 0.0, 8.0;
    REQUIRE(ps.tau(y) == Approx(2.0).epsilon(1e-8));
  }
  SECTION("zero rejected") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    REQUIRE_THROWS_AS(ps.tau(Vec(Vec::Zero(2))), std::domain_error);
  }
  SECTION("tau(r^E x) = r tau(x)") {
    for (const Mat& e : test_operators()) {
      polar::PolarSystem ps(e);
      CounterRng rng(0x55);
      for (int i = 0; i < 20; ++i) {
        Vec x(2);
        x << rng.next_gaussian(), rng.next_gaussian();
        if (x.norm() < 1e-6) continue;
        const double t = ps.tau(x);
        for (double r : {0.1, 1.0, 7.0}) {
          const double lhs = ps.tau(linops::mat_pow(r, e) * x);
          REQUIRE(lhs == Approx(r * t).epsilon(1e-8));
        }
        REQUIRE(ps.tau(Vec(-x)) == Approx(t).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("polar decomposition reconstruction") {
  SECTION("E = I, x = (3,4)") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    Vec x(2);
    x << 3.0, 4.0;
    const auto pc = ps.decompose(x);
    REQUIRE(pc.tau == Approx(5.0).epsilon(1e-8));
    REQUIRE(pc.direction(0) == Approx(0.6).epsilon(1e-8));
    REQUIRE(pc.direction(1) == Approx(0.8).epsilon(1e-8));
  }
  SECTION("E = diag(2,2), x = (2,0): Sigma_0 is not the Euclidean sphere") {
    polar::PolarSystem ps{diag2(2, 2)};
    Vec x(2);
    x << 2.0, 0.0;
    const auto pc = ps.decompose(x);
    REQUIRE(pc.tau == Approx(1.0).epsilon(1e-8));
    REQUIRE(pc.direction(0) == Approx(2.0).epsilon(1e-8));
  }
  SECTION("reconstruction + unit radial norm on all test operators") {
    for (const Mat& e : test_operators()) {
      polar::PolarSystem ps(e);
      CounterRng rng(0x66);
      for (int i = 0; i < 50; ++i) {
        Vec x(2);
        x << rng.next_gaussian(), rng.next_gaussian();
        if (x.norm() < 1e-6) continue;
        x *= std::pow(10.0, -3.0 + 6.0 * rng.next_uniform());
        const auto pc = ps.decompose(x);
        const Vec back = linops::mat_pow(pc.tau, e) * pc.direction;
        REQUIRE((back - x).norm() <= 1e-8 * x.norm());
        REQUIRE(ps.radial_norm(pc.direction) == Approx(1.0).margin(1e-10));
      }
    }
  }
}

TEST_CASE("boundary behavior and Sigma_0 compactness proxy") {
  for (const Mat& e : test_operators()) {
    polar::PolarSystem ps(e);
    CounterRng rng(0x77);
    double dir_lo = std::numeric_limits<double>::infinity(), dir_hi = 0.0;
    for (int ray = 0; ray < 16; ++ray) {
      Vec u(2);
      u << rng.next_gaussian(), rng.next_gaussian();
      u.normalize();
      double prev = 0.0;
      for (double s : {1e-3, 1e-1, 1.0, 1e1, 1e3}) {
        const double t = ps.tau(Vec(s * u));
        REQUIRE(t > prev);  // monotone along the ray
        prev = t;
        const auto pc = ps.decompose(Vec(s * u));
        dir_lo = std::min(dir_lo, pc.direction.norm());
        dir_hi = std::max(dir_hi, pc.direction.norm());
      }
      // tau(s u) scales between s^{1/a_max} and s^{1/a_1}; the slowest
      // exponent among the test operators is 1/a_max = 0.3.
      REQUIRE(ps.tau(Vec(1e-8 * u)) < 1e-2);
      REQUIRE(ps.tau(Vec(1e8 * u)) > 1e2);
    }
    REQUIRE(dir_lo > 0.0);
    REQUIRE(std::isfinite(dir_hi));
  }
}

TEST_CASE("triangle constant") {
  SECTION("E = I: Euclidean triangle inequality is tight") {
    polar::PolarSystem ps{Mat(Mat::Identity(2, 2))};
    const double c = ps.triangle_constant(2000, 0x88);
    REQUIRE(c <= 1.0 + 1e-9);
    REQUIRE(c > 0.9);
  }
  SECTION("E = diag(2,2): ratio at x = y = (2,0) is sqrt(2)/2") {
    polar::PolarSystem ps{diag2(2, 2)};
    Vec x(2);
    x << 2.0, 0.0;
    const double ratio = ps.tau(Vec(2.0 * x)) / (2.0 * ps.tau(x));
    REQUIRE(ratio == Approx(std::sqrt(2.0) / 2.0).epsilon(1e-8));
    REQUIRE(ps.triangle_constant(500, 0x99) >= ratio - 1e-9);
  }
}

TEST_CASE("tau sandwich for the diagonal family") {
  SECTION("gamma = (0.5, 0.5): bounded ratio across 6 decades") {
    Vec g(2);
    g << 0.5, 0.5;
    const auto [lo, hi] = polar::tau_sandwich_check(g, 2000, 0xAA);
    REQUIRE(lo > 0.0);
    REQUIRE(std::isfinite(hi));
    REQUIRE(hi / lo < 10.0);  // one fixed positive interval
  }
  SECTION("axis ratio is constant and equals 1/sqrt(2) at x = (2,0)") {
    polar::PolarSystem ps{diag2(2, 2)};
    for (double s : {0.1, 2.0, 50.0}) {
      Vec x(2);
      x << s, 0.0;
      const double ratio = ps.tau(x) / std::sqrt(s);
      REQUIRE(ratio == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
    }
  }
  SECTION("gamma out of range") {
    Vec g(2);
    g << 0.5, 1.5;
    REQUIRE_THROWS_AS(polar::tau_sandwich_check(g, 10, 0), std::domain_error);
  }
}

TEST_CASE("gauss-legendre rule integrates polynomials exactly") {
  std::vector<double> nodes, weights;
  polar::gauss_legendre_01(16, nodes, weights);
  double s0 = 0.0, s3 = 0.0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    s0 += weights[i];
    s3 += weights[i] * nodes[i] * nodes[i] * nodes[i];
  }
  REQUIRE(s0 == Approx(1.0).epsilon(1e-14));
  REQUIRE(s3 == Approx(0.25).epsilon(1e-13));
}
