#pragma once

// Polar coordinates under an operator E in Q(R^d): the radial functional
// ||x||_E = int_0^1 |t^E x| dt/t, the radial part tau(x) solving
// ||tau^{-E} x||_E = 1, and the direction l(x) = tau(x)^{-E} x on
// Sigma_0 = {tau = 1}.

#include <algorithm>
#include <cstring>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ossf/linops.hpp"
#include "ossf/rng.hpp"

namespace ossf {
namespace polar {

/// Gauss-Legendre nodes/weights on [0, 1].
inline void gauss_legendre_01(int n, std::vector<double>& nodes,
                              std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = 0.5 * (1.0 - x);  // descending x -> ascending node
    weights[i] = 0.5 * w;
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[n - 1 - i] = 0.5 * w;
  }
}

struct PolarCoords {
  double tau = 0.0;
  Vec direction;
};

/// Euclidean-sphere direction grid: uniform angles for d = 2, Fibonacci
/// lattice for d = 3, seeded Monte Carlo otherwise.
inline std::vector<Vec> sphere_directions(int d, int n, uint64_t seed = 0) {
  std::vector<Vec> dirs;
  dirs.reserve(n);
  const double pi = 3.14159265358979323846;
  if (d == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
    if (n > 1) dirs.push_back(Vec::Constant(1, -1.0));
    return dirs;
  }
  if (d == 2) {
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * pi * (i + 0.5) / n;
      Vec v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
    return dirs;
  }
  if (d == 3) {
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * i;
      Vec v(3);
      v << rho * std::cos(a), rho * std::sin(a), z;
      dirs.push_back(v);
    }
    return dirs;
  }
  CounterRng rng = CounterRng::stream(seed, 0x5D1Cull, 0);
  for (int i = 0; i < n; ++i) {
    Vec v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.next_gaussian();
    const double nn = v.norm();
    dirs.push_back(nn > 0 ? Vec(v / nn) : Vec(Vec::Unit(d, 0)));
  }
  return dirs;
}

class PolarSystem {
 public:
  explicit PolarSystem(const Mat& e) : op_(linops::Operator::from_matrix(e)) {
    if (!linops::classify(e).in_Q)
      throw std::domain_error("operator not in Q");
    d_ = op_.dim();
    gauss_legendre_01(64, nodes_, weights_);

    // One adaptive refinement pass: halve the log-t block length until
    // the first-block quadrature is converged on the basis vectors.
    block_len_ = 1.0;
    while (block_len_ > 1.0 / 16.0) {
      bool ok = true;
      for (int j = 0; j < d_ && ok; ++j) {
        const Vec x = Vec::Unit(d_, j);
        const double coarse = direct_block(0.0, block_len_, x);
        const double fine = direct_block(0.0, 0.5 * block_len_, x) +
                            direct_block(0.5 * block_len_, block_len_, x);
        if (std::abs(coarse - fine) > 1e-13 * std::max(1.0, fine)) ok = false;
      }
      if (ok) break;
      block_len_ *= 0.5;
    }
    shrink_ = linops::mat_exp(-block_len_ * op_.entries);
  }

  const linops::Operator& op() const { return op_; }
  int dim() const { return d_; }

  /// ||x||_E = int_0^1 |t^E x| dt/t.
  double radial_norm(const Vec& x) const {
    std::lock_guard<std::mutex> lock(mu_);
    return radial_norm_impl(x);
  }

  /// Unique t > 0 with ||t^{-E} x||_E = 1.
  double tau(const Vec& x) const {
    std::lock_guard<std::mutex> lock(mu_);
    return tau_impl(x);
  }

  PolarCoords decompose(const Vec& x) const {
    std::lock_guard<std::mutex> lock(mu_);
    PolarCoords pc;
    pc.tau = tau_impl(x);
    pc.direction = linops::mat_exp(-std::log(pc.tau) * op_.entries) * x;
    return pc;
  }

  /// Sampled lower bound for the triangle constant C_0 in
  /// tau(x+y) <= C_0 (tau(x) + tau(y)).
  double triangle_constant(int n_samples, uint64_t seed) const {
    if (n_samples < 1) throw std::domain_error("n_samples must be >= 1");
    CounterRng rng = CounterRng::stream(seed, 0xC0ull, 0);
    double best = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      Vec x(d_), y(d_);
      for (int j = 0; j < d_; ++j) x(j) = rng.next_gaussian();
      for (int j = 0; j < d_; ++j) y(j) = rng.next_gaussian();
      const double scale = std::pow(10.0, 2.0 * rng.next_uniform() - 1.0);
      x *= scale;
      if ((x + y).norm() == 0.0) continue;
      std::lock_guard<std::mutex> lock(mu_);
      const double ratio = tau_impl(x + y) / (tau_impl(x) + tau_impl(y));
      best = std::max(best, ratio);
    }
    return best;
  }

 private:
  // int_{-hi}^{-lo} |exp(vE) x| dv by direct 64-pt Gauss-Legendre,
  // used only during the construction-time refinement pass.
  double direct_block(double lo, double hi, const Vec& x) const {
    double s = 0.0;
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const double v = -(lo + (hi - lo) * nodes_[i]);
      s += weights_[i] * (linops::mat_exp(v * op_.entries) * x).norm();
    }
    return (hi - lo) * s;
  }

  void ensure_blocks(size_t k) const {
    while (node_mats_.size() <= k) {
      const size_t kk = node_mats_.size();
      std::vector<Mat> row(nodes_.size());
      if (kk == 0) {
        for (size_t i = 0; i < nodes_.size(); ++i)
          row[i] = linops::mat_exp(-block_len_ * nodes_[i] * op_.entries);
      } else {
        for (size_t i = 0; i < nodes_.size(); ++i)
          row[i] = shrink_ * node_mats_[kk - 1][i];
      }
      node_mats_.push_back(std::move(row));
    }
  }

  double radial_norm_impl(const Vec& x) const {
    if (x.size() != d_) throw std::invalid_argument("dimension mismatch");
    if (x.norm() == 0.0) return 0.0;
    double total = 0.0;
    int small_streak = 0;
    for (size_t k = 0;; ++k) {
      ensure_blocks(k);
      double c = 0.0;
      const auto& row = node_mats_[k];
      for (size_t i = 0; i < nodes_.size(); ++i)
        c += weights_[i] * (row[i] * x).norm();
      c *= block_len_;
      total += c;
      if (c < 5e-16 * total) {
        if (++small_streak >= 2) break;
      } else {
        small_streak = 0;
      }
      if (k > 200000)
        throw std::runtime_error("radial norm did not converge");
    }
    return total;
  }

  double tau_impl(const Vec& x) const {
    if (x.size() != d_) throw std::invalid_argument("dimension mismatch");
    const double xnorm = x.norm();
    if (xnorm == 0.0)
      throw std::domain_error("zero has no polar decomposition");

    std::string key(reinterpret_cast<const char*>(x.data()),
                    sizeof(double) * d_);
    auto it = tau_cache_.find(key);
    if (it != tau_cache_.end()) return it->second;

    // f(u) = ln ||exp(-uE) x||_E is strictly decreasing with slope in
    // [-a_p, -a_1]; bracket around u0 = ln|x| then Illinois iteration.
    auto f = [&](double u) {
      return std::log(
          radial_norm_impl(linops::mat_exp(-u * op_.entries) * x));
    };
    double u_lo = std::log(xnorm), u_hi = u_lo;
    double f_lo = f(u_lo), f_hi = f_lo;
    const double step0 = std::log(4.0);
    if (f_lo > 0.0) {
      double step = step0;
      while (f_hi > 0.0) {
        u_hi += step;
        f_hi = f(u_hi);
        step *= 2.0;
        if (u_hi > u_lo + 900) throw std::runtime_error("tau bracket failed");
      }
    } else {
      double step = step0;
      while (f_lo <= 0.0) {
        u_lo -= step;
        f_lo = f(u_lo);
        step *= 2.0;
        if (u_lo < u_hi - 900) throw std::runtime_error("tau bracket failed");
      }
    }

    int side = 0;
    double u_root = 0.5 * (u_lo + u_hi);
    for (int iter = 0; iter < 200; ++iter) {
      double u = (u_lo * f_hi - u_hi * f_lo) / (f_hi - f_lo);
      if (!(u > u_lo && u < u_hi)) u = 0.5 * (u_lo + u_hi);
      const double fu = f(u);
      if (std::abs(fu) < 1e-14) {
        u_root = u;
        break;
      }
      if (fu > 0.0) {
        u_lo = u;
        f_lo = fu;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        u_hi = u;
        f_hi = fu;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
      u_root = 0.5 * (u_lo + u_hi);
      if (u_hi - u_lo < 1e-12) break;
    }
    const double t = std::exp(u_root);
    if (tau_cache_.size() < 4000000) tau_cache_.emplace(std::move(key), t);
    return t;
  }

  linops::Operator op_;
  int d_ = 0;
  double block_len_ = 1.0;
  Mat shrink_;
  std::vector<double> nodes_, weights_;
  mutable std::vector<std::vector<Mat>> node_mats_;
  mutable std::unordered_map<std::string, double> tau_cache_;
  mutable std::mutex mu_;
};

/// Extremes of tau(x) / sum_j |x_j|^{gamma_j} for E = diag(1/gamma_j),
/// sampled across |x| in [1e-3, 1e3].
inline std::pair<double, double> tau_sandwich_check(const Vec& gammas,
                                                    int n_samples,
                                                    uint64_t seed) {
  const int d = static_cast<int>(gammas.size());
  for (int j = 0; j < d; ++j)
    if (!(gammas(j) > 0.0 && gammas(j) < 1.0))
      throw std::domain_error("gamma out of range");
  Mat e = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j) e(j, j) = 1.0 / gammas(j);
  PolarSystem ps(e);

  CounterRng rng = CounterRng::stream(seed, 0x7A0ull, 0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Vec dir(d);
    for (int j = 0; j < d; ++j) dir(j) = rng.next_gaussian();
    if (dir.norm() == 0.0) continue;
    dir.normalize();
    const double radius = std::pow(10.0, -3.0 + 6.0 * rng.next_uniform());
    const Vec x = radius * dir;
    double denom = 0.0;
    for (int j = 0; j < d; ++j) denom += std::pow(std::abs(x(j)), gammas(j));
    const double ratio = ps.tau(x) / denom;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return {lo, hi};
}

}  // namespace polar
}  // namespace ossf
