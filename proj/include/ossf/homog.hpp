#pragma once

// E-homogeneous kernels phi/psi and their sampled diagnostics:
// homogeneity residuals, admissibility constants, extrema on Sigma_0.
//
// Admissibility is a global analytic property; the checks here gather
// sampled evidence, they do not prove it.

#include <functional>
#include <limits>
#include <utility>

#include "ossf/polar.hpp"

namespace ossf {
namespace homog {

struct KernelSpec {
  enum class Kind { sum_powers, custom };
  Kind kind = Kind::sum_powers;
  Vec gammas;         // for sum_powers
  double beta = 1.0;  // claimed admissibility order
  std::function<double(const Vec&)> evaluator;

  double operator()(const Vec& x) const { return evaluator(x); }

  /// phi(x) = sum_j |x_j|^{gamma_j}; E-homogeneous for E = diag(1/gamma_j)
  /// and (1, E)-admissible.
  static KernelSpec sum_of_powers(const Vec& gammas) {
    for (int j = 0; j < gammas.size(); ++j)
      if (!(gammas(j) > 0.0 && gammas(j) < 1.0))
        throw std::domain_error("gamma out of range");
    KernelSpec k;
    k.kind = Kind::sum_powers;
    k.gammas = gammas;
    k.beta = 1.0;
    Vec g = gammas;
    k.evaluator = [g](const Vec& x) {
      double s = 0.0;
      for (int j = 0; j < g.size(); ++j)
        s += std::pow(std::abs(x(j)), g(j));
      return s;
    };
    return k;
  }

  static KernelSpec custom(std::function<double(const Vec&)> eval,
                           double beta) {
    KernelSpec k;
    k.kind = Kind::custom;
    k.beta = beta;
    k.evaluator = std::move(eval);
    return k;
  }

  /// Matching diagonal operator for a sum_powers kernel.
  Mat matching_operator() const {
    const int d = static_cast<int>(gammas.size());
    Mat e = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j) e(j, j) = 1.0 / gammas(j);
    return e;
  }
};

inline double eval(const KernelSpec& k, const Vec& x) { return k(x); }

/// Max over samples of |k(r^E x) - r k(x)| / (r k(x)).
inline double check_homogeneity(const KernelSpec& k, const Mat& e,
                                int n_samples, uint64_t seed) {
  const int d = static_cast<int>(e.rows());
  CounterRng rng = CounterRng::stream(seed, 0x401ull, 0);
  double worst = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Vec x(d);
    for (int j = 0; j < d; ++j) x(j) = rng.next_gaussian();
    if (x.norm() == 0.0) continue;
    const double r = std::pow(10.0, -3.0 + 6.0 * rng.next_uniform());
    const double rhs = r * k(x);
    if (rhs == 0.0) continue;
    const double lhs = k(linops::mat_pow(r, e) * x);
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(rhs));
  }
  return worst;
}

struct AdmissibilityReport {
  double c1 = 0.0;  // max of |k(x+y)-k(y)| / tau(x)^beta over the samples
  Vec argmax_x, argmax_y;
};

/// Sampled admissibility constant over {tau(x) in tau_range} x
/// {A <= |y| <= B}. Finite and stable estimates across refinements are
/// evidence of (beta, E)-admissibility.
inline AdmissibilityReport check_admissibility(
    const KernelSpec& k, const polar::PolarSystem& ps, double beta,
    std::pair<double, double> annulus, int n_samples, uint64_t seed,
    std::pair<double, double> tau_range = {0.0, 1.0}) {
  const auto [a, b] = annulus;
  if (!(0.0 < a && a < b)) throw std::domain_error("invalid annulus");
  const int d = ps.dim();
  CounterRng rng = CounterRng::stream(seed, 0xAD3ull, 0);
  AdmissibilityReport rep;
  rep.argmax_x = Vec::Zero(d);
  rep.argmax_y = Vec::Zero(d);
  for (int i = 0; i < n_samples; ++i) {
    Vec dir(d), y(d);
    for (int j = 0; j < d; ++j) dir(j) = rng.next_gaussian();
    if (dir.norm() == 0.0) continue;
    // x = r^E theta with theta on Sigma_0, so tau(x) = r by construction.
    const double r = tau_range.first +
                     (tau_range.second - tau_range.first) * rng.next_uniform();
    if (r <= 0.0) continue;
    const Vec theta = ps.decompose(dir).direction;
    const Vec x = linops::mat_pow(r, ps.op().entries) * theta;
    for (int j = 0; j < d; ++j) y(j) = rng.next_gaussian();
    if (y.norm() == 0.0) continue;
    y *= (a + (b - a) * rng.next_uniform()) / y.norm();
    const double ratio = std::abs(k(x + y) - k(y)) / std::pow(r, beta);
    if (ratio > rep.c1) {
      rep.c1 = ratio;
      rep.argmax_x = x;
      rep.argmax_y = y;
    }
  }
  return rep;
}

/// (m_phi, M_phi): extrema of the kernel over an n_grid covering of
/// Sigma_0 (Euclidean directions renormalized through the polar
/// decomposition).
inline std::pair<double, double> extrema_on_sphere(
    const KernelSpec& k, const polar::PolarSystem& ps, int n_grid) {
  const auto dirs = polar::sphere_directions(ps.dim(), n_grid, 0x51D5ull);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& dir : dirs) {
    const Vec theta = ps.decompose(dir).direction;
    const double v = k(theta);
    if (!(v > 0.0)) throw std::runtime_error("kernel not positive");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

}  // namespace homog
}  // namespace ossf
