#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qkf {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using CVec2 = Eigen::Vector2cd;
using Row2 = Eigen::RowVector2d;

// Thrown for user-facing parameter errors (bad spec files, out-of-range
// values). The CLI maps this to exit code 2.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Single-mode linear quantum system under homodyne detection:
//   H = x^T G x / 2,  c = C^T x  with x = (q, p),
// measured at homodyne phase `phi` with efficiency `eta`.
struct SystemSpec {
  Mat2 G = Mat2::Zero();
  CVec2 C = CVec2::Zero();
  double phi = 0.0;
  double eta = 1.0;
  double hbar = 1.0;

  bool operator==(const SystemSpec&) const = default;
};

// Range-checks a candidate spec and returns it with G exactly symmetric.
// Asymmetry up to 1e-9 * (1 + |G|) is treated as round-off and averaged away;
// anything larger is rejected.
SystemSpec validate_spec(SystemSpec raw);

// The symplectic form [[0, 1], [-1, 0]].
const Mat2& symplectic();

// Every matrix the filter, the Riccati equation and the classical surrogate
// need, derived once from a validated spec.
//
// The surrogate (M, R, S, Q) is the classical linear-Gaussian model
//   dx = A x dt + dw,  dy = M x dt + dv,  E[dw dw^T] = Q dt,
//   E[dv^2] = R dt,  E[dw dv] = S dt,
// whose Kalman-Bucy filter coincides with the quantum filter:
//   A' = A - S M / R,  D = Q - S S^T / R.
struct DerivedModel {
  SystemSpec spec;
  Vec2 Cr = Vec2::Zero();  // Re(exp(-i phi) C)
  Vec2 Ci = Vec2::Zero();  // Im(exp(-i phi) C)
  Mat2 A = Mat2::Zero();
  Mat2 Aprime = Mat2::Zero();
  Mat2 D = Mat2::Zero();
  double kappa = 0.0;  // Cr^T Sigma Ci

  Row2 M = Row2::Zero();
  double R = 1.0;
  Vec2 S = Vec2::Zero();
  Mat2 Q = Mat2::Zero();

  double eta() const { return spec.eta; }
  double hbar() const { return spec.hbar; }

  // Quadratic coefficient of the Riccati equation, (4 eta / hbar) Cr Cr^T.
  Mat2 measurement_weight() const;

  // Filter gain sqrt(eta) [(2/hbar) V Cr + Sigma^T Ci] at covariance V.
  Vec2 gain(const Mat2& V) const;
};

DerivedModel build_derived(const SystemSpec& spec);

// Re(C)^T Sigma Im(C). Computed without reference to phi; equals
// build_derived(spec).kappa for every phase.
double compute_kappa(const SystemSpec& spec);

// Symmetric 2x2 error covariance
//   [[<dq^2>, <(dq dp + dp dq)/2>], [.., <dp^2>]].
class CovMatrix {
 public:
  CovMatrix() = default;
  // Symmetrizes its argument.
  explicit CovMatrix(const Mat2& v);

  static CovMatrix vacuum(double hbar) {
    return CovMatrix(0.5 * hbar * Mat2::Identity());
  }

  const Mat2& matrix() const { return v_; }
  double operator()(int i, int j) const { return v_(i, j); }
  double det() const { return v_.determinant(); }
  double diagonal_product() const { return v_(0, 0) * v_(1, 1); }

  bool is_psd(double tol = 0.0) const;
  // V + (i hbar / 2) Sigma >= -tol, checked on the Hermitian matrix itself.
  bool is_physical(double hbar, double tol = 0.0) const;
  // Smallest eigenvalue of V + (i hbar / 2) Sigma.
  double uncertainty_margin(double hbar) const;

 private:
  Mat2 v_ = Mat2::Zero();
};

}  // namespace qkf
