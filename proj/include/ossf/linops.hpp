#pragma once

// Dense small-matrix operations: matrix exponential, matrix powers r^A,
// operator norms, and classification of operators by the real parts of
// their spectra.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace ossf {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace linops {

// Classification is discontinuous; a fixed tolerance keeps it deterministic.
inline constexpr double kEigTol = 1e-9;

/// Square real matrix with cached spectral metadata.
struct Operator {
  Mat entries;
  double trace = 0.0;
  double eig_real_min = 0.0;
  double eig_real_max = 0.0;

  int dim() const { return static_cast<int>(entries.rows()); }

  static Operator from_matrix(const Mat& a) {
    if (a.rows() != a.cols() || a.rows() < 1)
      throw std::invalid_argument("Operator: matrix must be square");
    Operator op;
    op.entries = a;
    op.trace = a.trace();
    Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
    op.eig_real_min = es.eigenvalues().real().minCoeff();
    op.eig_real_max = es.eigenvalues().real().maxCoeff();
    return op;
  }
};

struct OperatorClass {
  bool in_Q = false;  // all eigenvalue real parts > 0
  bool in_M = false;  // real parts >= 0, zero-real-part eigenvalues simple
                      // in the minimal polynomial
};

/// Matrix exponential, scaling-and-squaring with the degree-13 Pade
/// approximant (Higham 2005). Accurate to ~1e-13 relative for moderate
/// norms; throws on overflow.
inline Mat mat_exp(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  const Mat id = Mat::Identity(n, n);
  const double nrm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  if (!std::isfinite(nrm)) throw std::overflow_error("exp overflow");
  if (nrm == 0.0) return id;

  int squarings = 0;
  const double theta13 = 5.371920351148152;
  if (nrm > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(nrm / theta13)));
  Mat as = a / std::ldexp(1.0, squarings);

  static const double b[] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};

  const Mat a2 = as * as;
  const Mat a4 = a2 * a2;
  const Mat a6 = a2 * a4;
  Mat u = as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
                b[5] * a4 + b[3] * a2 + b[1] * id);
  Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
          b[2] * a2 + b[0] * id;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  if (!r.allFinite()) throw std::overflow_error("exp overflow");
  return r;
}

/// r^A = exp((ln r) A). mat_pow(1, A) is the identity exactly.
inline Mat mat_pow(double r, const Mat& a) {
  if (!(r > 0.0)) throw std::domain_error("mat_pow: domain error (r <= 0)");
  const int n = static_cast<int>(a.rows());
  if (r == 1.0) return Mat::Identity(n, n);
  return mat_exp(std::log(r) * a);
}

inline Mat mat_pow(double r, const Operator& a) { return mat_pow(r, a.entries); }

/// Largest singular value.
inline double op_norm(const Mat& a) {
  return a.jacobiSvd().singularValues()(0);
}

/// Classification into Q(R^n) / M(R^n). Simplicity in the minimal
/// polynomial is decided via geometric multiplicity (rank of A - lambda I),
/// which is numerically stabler than forming the minimal polynomial.
inline OperatorClass classify(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::EigenSolver<Mat> es(a, false);
  const auto ev = es.eigenvalues();

  OperatorClass cls;
  cls.in_Q = true;
  cls.in_M = true;
  for (int i = 0; i < n; ++i) {
    if (ev(i).real() <= kEigTol) cls.in_Q = false;
    if (ev(i).real() < -kEigTol) cls.in_M = false;
  }
  if (!cls.in_M) return cls;

  // Eigenvalues on the imaginary axis must have geometric multiplicity
  // equal to algebraic multiplicity.
  const double cluster_tol = 1e-7 * std::max(1.0, a.norm());
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n && cls.in_M; ++i) {
    if (seen[i] || std::abs(ev(i).real()) > kEigTol) continue;
    int alg = 0;
    for (int j = 0; j < n; ++j) {
      if (std::abs(ev(j) - ev(i)) <= cluster_tol) {
        ++alg;
        seen[j] = true;
      }
    }
    Eigen::MatrixXcd shifted = a.cast<std::complex<double>>();
    shifted.diagonal().array() -= ev(i);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(shifted);
    lu.setThreshold(1e-8);
    const int geo = n - static_cast<int>(lu.rank());
    if (geo != alg) cls.in_M = false;
  }
  return cls;
}

inline OperatorClass classify(const Operator& a) { return classify(a.entries); }

}  // namespace linops
}  // namespace ossf
