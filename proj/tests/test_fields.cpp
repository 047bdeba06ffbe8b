#include <catch_amalgamated.hpp>

#include "ossf/fields.hpp"

using namespace ossf;
using Catch::Approx;

namespace {

fields::FieldSpec ma_spec(double alpha = 1.5) {
  fields::FieldSpec spec;
  spec.E = linops::Operator::from_matrix((Mat(2, 2) << 2, 0, 0, 2).finished());
  spec.D = linops::Operator::from_matrix(
      (Mat(2, 2) << 0.4, 0, 0, 0.6).finished());
  spec.alpha = alpha;
  spec.kernel = homog::KernelSpec::sum_of_powers(
      (Vec(2) << 0.5, 0.5).finished());
  spec.variant = fields::Variant::moving_average;
  spec.quad.shells = 12;
  spec.quad.points_per_shell = 24;
  return spec;
}

fields::FieldSpec harm_spec(double alpha = 1.5) {
  fields::FieldSpec spec = ma_spec(alpha);
  spec.variant = fields::Variant::harmonizable;
  return spec;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("field spec validation names the violated hypothesis") {
  auto spec = ma_spec();
  REQUIRE(spec.violated_invariant().empty());
  REQUIRE(spec.q() == Approx(4.0));
  REQUIRE(spec.H() == Approx(0.6));
  REQUIRE(spec.h() == Approx(0.4));
  REQUIRE(spec.a1() == Approx(2.0));

  SECTION("moving average H >= beta") {
    spec.D = linops::Operator::from_matrix(
        (Mat(2, 2) << 0.4, 0, 0, 1.2).finished());
    REQUIRE_THROWS_WITH(spec.validate(),
                        Catch::Matchers::ContainsSubstring("H >= beta"));
  }
  SECTION("harmonizable H >= a_1") {
    auto h = harm_spec();
    h.E = linops::Operator::from_matrix(
        (Mat(2, 2) << 0.5, 0, 0, 0.5).finished());
    REQUIRE_THROWS_WITH(h.validate(),
                        Catch::Matchers::ContainsSubstring("H >= a_1"));
  }
  SECTION("alpha range") {
    spec.alpha = 2.5;
    REQUIRE_THROWS_AS(spec.validate(), std::invalid_argument);
  }
  SECTION("E must lie in Q") {
    spec.E = linops::Operator::from_matrix(
        (Mat(2, 2) << 0, 1, 0, 0).finished());
    REQUIRE_THROWS_WITH(spec.validate(),
                        Catch::Matchers::ContainsSubstring("E not in Q"));
  }
}

TEST_CASE("properness flag") {
  auto spec = ma_spec();  // q/alpha = 4/1.5 = 2.67, eigs of D are 0.4, 0.6
  REQUIRE(spec.proper());
  // Arrange q/alpha = 2 as an eigenvalue of D (keep H < beta by lowering q).
  auto bad = ma_spec(2.0);
  bad.E = linops::Operator::from_matrix(
      (Mat(2, 2) << 0.8, 0, 0, 0.8).finished());  // q = 1.6, q/alpha = 0.8
  bad.D = linops::Operator::from_matrix(
      (Mat(2, 2) << 0.8, 0, 0, 0.4).finished());
  REQUIRE_FALSE(bad.proper());
  REQUIRE(harm_spec().proper());
}

TEST_CASE("moving-average integrand") {
  const auto spec = ma_spec();
  SECTION("x = 0 cancels identically") {
    const auto f = fields::ma_integrand(spec, Vec(Vec::Zero(2)));
    REQUIRE(f.real(v2(0.3, -0.7)).norm() == 0.0);
    REQUIRE(f.singular_points.empty());
  }
  SECTION("d = m = 1 classical linear fractional stable motion kernel") {
    fields::FieldSpec s1;
    s1.E = linops::Operator::from_matrix(Mat(Mat::Identity(1, 1)));
    const double H0 = 0.7, alpha = 1.5;
    s1.D = linops::Operator::from_matrix(Mat(H0 * Mat::Identity(1, 1)));
    s1.alpha = alpha;
    s1.kernel = homog::KernelSpec::custom(
        [](const Vec& y) { return std::abs(y(0)); }, 1.0);
    s1.variant = fields::Variant::moving_average;
    const Vec x = Vec::Constant(1, 2.0);
    const auto f = fields::ma_integrand(s1, x);
    for (double y : {-1.3, 0.4, 3.1}) {
      const double expected = std::pow(std::abs(2.0 - y), H0 - 1.0 / alpha) -
                              std::pow(std::abs(y), H0 - 1.0 / alpha);
      REQUIRE(f.real(Vec(Vec::Constant(1, y)))(0, 0) ==
              Approx(expected).epsilon(1e-12));
    }
  }
  SECTION("recurrence residual <= 1e-9 over random (r, x, y)") {
    CounterRng rng(0x800);
    for (int trial = 0; trial < 10; ++trial) {
      const double r = std::pow(10.0, -1.0 + 2.0 * rng.next_uniform());
      const Vec x = v2(rng.next_gaussian(), rng.next_gaussian());
      std::vector<Vec> probes;
      for (int i = 0; i < 10; ++i)
        probes.push_back(v2(3 * rng.next_gaussian(), 3 * rng.next_gaussian()));
      const auto res = fields::recurrence_residual(spec, r, x, probes);
      REQUIRE(res.max_residual <= 1e-9);
    }
  }
  SECTION("r = 1 residual is exactly 0") {
    const auto res = fields::recurrence_residual(spec, 1.0, v2(1, 0),
                                                 {v2(0.5, 0.25)});
    REQUIRE(res.max_residual == 0.0);
  }
}

TEST_CASE("harmonizable integrand") {
  const auto spec = harm_spec();
  SECTION("x = 0 gives the zero field") {
    const auto f = fields::harm_integrand(spec, Vec(Vec::Zero(2)));
    REQUIRE(f.real(v2(0.4, 0.2)).norm() == Approx(0.0).margin(1e-15));
    REQUIRE(f.imag(v2(0.4, 0.2)).norm() == Approx(0.0).margin(1e-15));
  }
  SECTION("values commute with r^D") {
    const auto f = fields::harm_integrand(spec, v2(1.0, -0.5));
    const Mat rd = linops::mat_pow(3.0, spec.D.entries);
    for (const Vec& y : {v2(0.7, 0.1), v2(-0.2, 1.4)}) {
      const Mat a = f.real(y);
      REQUIRE((rd * a - a * rd).norm() <=
              1e-10 * std::max(1.0, a.norm() * rd.norm()));
    }
  }
  SECTION("corrected recurrence closes; paper-literal does not") {
    CounterRng rng(0x801);
    for (int trial = 0; trial < 5; ++trial) {
      const double r = std::pow(10.0, -0.5 + rng.next_uniform());
      const Vec x = v2(rng.next_gaussian(), rng.next_gaussian());
      std::vector<Vec> probes;
      for (int i = 0; i < 10; ++i)
        probes.push_back(v2(2 * rng.next_gaussian(), 2 * rng.next_gaussian()));
      const auto res = fields::recurrence_residual(spec, r, x, probes);
      REQUIRE(res.max_residual <= 1e-9);
      if (std::abs(r - 1.0) > 0.1) REQUIRE(res.literal_residual > 1e-3);
    }
  }
}

TEST_CASE("finiteness functionals") {
  SECTION("x = 0 gives 0") {
    const auto d = fields::upsilon(ma_spec(), Vec(Vec::Zero(2)));
    REQUIRE(d.finite);
    REQUIRE(d.value == 0.0);
  }
  SECTION("valid moving-average spec is finite") {
    const auto d = fields::upsilon_ma(ma_spec(), v2(1, 0));
    REQUIRE(d.finite);
    REQUIRE(d.value > 0.0);
  }
  SECTION("H >= beta tail divergence is flagged") {
    auto spec = ma_spec();
    spec.D = linops::Operator::from_matrix(
        (Mat(2, 2) << 1.5, 0, 0, 2.0).finished());  // H = 2 >= beta = 1
    const auto d = fields::upsilon_ma(spec, v2(1, 0));
    REQUIRE_FALSE(d.finite);
  }
  SECTION("valid harmonizable spec is finite") {
    const auto d = fields::upsilon_harm(harm_spec(), v2(1, 0));
    REQUIRE(d.finite);
    REQUIRE(d.value > 0.0);
  }
  SECTION("harmonizable H >= a_1 divergence near 0 is flagged") {
    auto spec = harm_spec();
    spec.E = linops::Operator::from_matrix(
        (Mat(2, 2) << 0.5, 0, 0, 0.5).finished());  // a1 = 0.5 < H
    spec.kernel = homog::KernelSpec::custom(
        [](const Vec& y) {
          return std::pow(std::abs(y(0)), 2.0) + std::pow(std::abs(y(1)), 2.0);
        },
        1.0);  // E*-homogeneous for E = 0.5 I
    const auto d = fields::upsilon_harm(spec, v2(1, 0), 6);
    REQUIRE_FALSE(d.finite);
  }
}

TEST_CASE("simulate") {
  SECTION("X(0) = 0 exactly in every replicate") {
    const auto s = fields::simulate(ma_spec(), {Vec(Vec::Zero(2))}, 50, 3);
    for (const auto& row : s.replicates) REQUIRE(row[0].norm() == 0.0);
  }
  SECTION("determinism across seeds and thread counts") {
    const auto spec = ma_spec();
    const std::vector<Vec> pts = {v2(1, 0), v2(0, 1)};
    const auto a = fields::simulate(spec, pts, 40, 77, 1, false);
    const auto b = fields::simulate(spec, pts, 40, 77, 1, false);
    const auto c = fields::simulate(spec, pts, 40, 77, 3, false);
    for (int r = 0; r < 40; ++r)
      for (int j = 0; j < 2; ++j) {
        REQUIRE(a.replicates[r][j] == b.replicates[r][j]);
        REQUIRE(a.replicates[r][j] == c.replicates[r][j]);
      }
  }
  SECTION("alpha = 2: sample variance = 2 x CF exponent") {
    const auto spec = ma_spec(2.0);
    const Vec x = v2(1, 0);
    const int n = 20000;
    const auto s = fields::simulate(spec, {x}, n, 5, 1, false);
    const auto cells = fields::make_field_cells(spec, {x}, spec.quad);
    const Vec th = v2(0.7, -0.4);
    const double expo =
        fields::joint_cf_exponent(spec, {{x, th}}, cells);
    double m1 = 0, m2 = 0;
    for (const auto& row : s.replicates) {
      const double v = th.dot(row[0]);
      m1 += v;
      m2 += v * v;
    }
    const double var = m2 / n - (m1 / n) * (m1 / n);
    REQUIRE(std::abs(var - 2.0 * expo) <=
            3.0 * 2.0 * expo * std::sqrt(2.0 / n));
  }
  SECTION("SaS symmetry: ECF imaginary part vanishes") {
    const auto spec = ma_spec();
    const Vec x = v2(0, 1);
    const auto s = fields::simulate(spec, {x}, 20000, 11, 1, false);
    std::vector<Vec> m;
    for (const auto& row : s.replicates) m.push_back(row[0]);
    for (const Vec& th : {v2(0.1, 0.05), v2(0.3, -0.2)}) {
      const auto e = stable::ecf(m, th);
      REQUIRE(std::abs(e.value.imag()) <= 4.0 * e.se_im + 1e-12);
    }
  }
  SECTION("divergent spec refused") {
    auto spec = ma_spec();
    spec.D = linops::Operator::from_matrix(
        (Mat(2, 2) << 1.1, 0, 0, 1.3).finished());
    REQUIRE_THROWS_AS(fields::simulate(spec, {v2(1, 0)}, 10, 1),
                      std::exception);
  }
}

TEST_CASE("oss cf identity") {
  const auto spec = ma_spec();
  const std::vector<std::pair<Vec, Vec>> pairs = {{v2(1, 0), v2(0.5, 0.2)},
                                                  {v2(0, 1), v2(-0.3, 0.4)}};
  SECTION("r = 1 is exact by construction") {
    const auto [gl, gr] = fields::oss_cf_identity(spec, 1.0, pairs, spec.quad);
    REQUIRE(gl == Approx(gr).epsilon(1e-12));
  }
  SECTION("x = 0 gives 0 on both sides") {
    const auto [gl, gr] = fields::oss_cf_identity(
        spec, 2.0, {{Vec(Vec::Zero(2)), v2(1, 1)}}, spec.quad);
    REQUIRE(gl == Approx(0.0).margin(1e-14));
    REQUIRE(gr == Approx(0.0).margin(1e-14));
  }
  SECTION("r = 2 gap small and shrinking under refinement") {
    double prev_gap = 1e300;
    for (int lvl = 0; lvl < 2; ++lvl) {
      const auto [gl, gr] =
          fields::oss_cf_identity(spec, 2.0, pairs, spec.quad.refined(lvl));
      const double gap = std::abs(gl - gr) / std::max(gl, gr);
      REQUIRE(gap < 1.2 * prev_gap + 1e-12);
      prev_gap = gap;
      if (lvl == 1) REQUIRE(gap < 0.05);
    }
  }
}

TEST_CASE("stationary increments cf identity") {
  const auto spec = ma_spec();
  const std::vector<std::pair<Vec, Vec>> pairs = {{v2(1, 0), v2(0.5, 0.2)},
                                                  {v2(0, 1), v2(-0.3, 0.4)}};
  SECTION("h = 0 is exact") {
    const auto [gl, gr] = fields::stationary_increments_cf_identity(
        spec, Vec(Vec::Zero(2)), pairs, spec.quad);
    REQUIRE(gl == Approx(gr).epsilon(1e-12));
  }
  SECTION("single pair at x = 0: both sides vanish") {
    const auto [gl, gr] = fields::stationary_increments_cf_identity(
        spec, v2(0.5, 0.5), {{Vec(Vec::Zero(2)), v2(1, 1)}}, spec.quad);
    REQUIRE(gr == Approx(0.0).margin(1e-14));
    REQUIRE(gl == Approx(0.0).margin(1e-12));  // X(h) - X(h) cancels exactly
  }
  SECTION("random h: relative gap small at refined quadrature") {
    const auto [gl, gr] = fields::stationary_increments_cf_identity(
        spec, v2(0.3, -0.4), pairs, spec.quad.refined(1));
    REQUIRE(std::abs(gl - gr) / std::max(gl, gr) < 0.08);
  }
}

TEST_CASE("eigendirection reduction") {
  // E = diag(2, 2): every direction is an eigendirection with lambda = 2.
  const auto spec = ma_spec();
  const Vec xi = v2(1.0, 0.0);
  const std::vector<std::pair<Vec, Vec>> pairs = {
      {Vec(0.5 * xi), v2(0.4, 0.1)}, {Vec(1.5 * xi), v2(-0.2, 0.3)}};
  const auto [gl, gr] =
      fields::oss_cf_identity(spec, 2.0, pairs, spec.quad.refined(1));
  REQUIRE(std::abs(gl - gr) / std::max(gl, gr) < 0.05);
}

TEST_CASE("harmonizable integrand matrices are invertible at probes") {
  const auto spec = harm_spec();
  const Mat expo = spec.exponent_matrix();
  CounterRng rng(0x900);
  for (int i = 0; i < 50; ++i) {
    const Vec y = v2(rng.next_gaussian(), rng.next_gaussian());
    if (y.norm() < 1e-3) continue;
    const Mat m = fields::scalar_pow(spec.kernel(y), expo);
    Eigen::JacobiSVD<Mat> svd(m);
    const double cond = svd.singularValues()(0) /
                        svd.singularValues()(svd.singularValues().size() - 1);
    REQUIRE(std::isfinite(cond));
    REQUIRE(svd.singularValues().minCoeff() > 0.0);
  }
}
