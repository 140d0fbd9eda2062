#include "qkf/model.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace qkf {

namespace {

bool all_finite(const SystemSpec& s) {
  return s.G.allFinite() && s.C.real().allFinite() &&
         s.C.imag().allFinite() && std::isfinite(s.phi) &&
         std::isfinite(s.eta) && std::isfinite(s.hbar);
}

}  // namespace

SystemSpec validate_spec(SystemSpec raw) {
  if (!all_finite(raw)) throw SpecError("spec contains non-finite entries");
  if (!(raw.eta > 0.0 && raw.eta <= 1.0)) throw SpecError("eta out of range (0, 1]");
  if (!(raw.hbar > 0.0)) throw SpecError("hbar must be positive");

  const double asym = std::abs(raw.G(0, 1) - raw.G(1, 0));
  if (asym > 1e-9 * (1.0 + raw.G.norm())) {
    throw SpecError("G is not symmetric");
  }
  const double off = 0.5 * (raw.G(0, 1) + raw.G(1, 0));
  raw.G(0, 1) = off;
  raw.G(1, 0) = off;
  return raw;
}

const Mat2& symplectic() {
  static const Mat2 sigma = (Mat2() << 0.0, 1.0, -1.0, 0.0).finished();
  return sigma;
}

Mat2 DerivedModel::measurement_weight() const {
  return (4.0 * spec.eta / spec.hbar) * Cr * Cr.transpose();
}

Vec2 DerivedModel::gain(const Mat2& V) const {
  return std::sqrt(spec.eta) *
         ((2.0 / spec.hbar) * V * Cr + symplectic().transpose() * Ci);
}

DerivedModel build_derived(const SystemSpec& spec) {
  const Mat2& sigma = symplectic();
  const double eta = spec.eta;
  const double hbar = spec.hbar;

  DerivedModel m;
  m.spec = spec;

  const CVec2 rotated = std::polar(1.0, -spec.phi) * spec.C;
  m.Cr = rotated.real();
  m.Ci = rotated.imag();

  const Mat2 ri = m.Cr * m.Ci.transpose();
  const Mat2 ir = m.Ci * m.Cr.transpose();
  m.A = sigma * (spec.G + ri - ir);
  m.Aprime = sigma * (spec.G + ri + (2.0 * eta - 1.0) * ir);
  m.D = hbar * sigma.transpose() *
        (m.Cr * m.Cr.transpose() + (1.0 - eta) * m.Ci * m.Ci.transpose()) * sigma;
  m.D = 0.5 * (m.D + m.D.transpose()).eval();
  m.kappa = m.Cr.dot(sigma * m.Ci);

  m.M = 2.0 * std::sqrt(eta) * m.Cr.transpose();
  m.R = hbar;
  m.S = std::sqrt(eta) * hbar * sigma.transpose() * m.Ci;
  m.Q = hbar * sigma *
        (m.Cr * m.Cr.transpose() + m.Ci * m.Ci.transpose()) * sigma.transpose();
  m.Q = 0.5 * (m.Q + m.Q.transpose()).eval();
  return m;
}

double compute_kappa(const SystemSpec& spec) {
  const Vec2 re = spec.C.real();
  const Vec2 im = spec.C.imag();
  return re.dot(symplectic() * im);
}

CovMatrix::CovMatrix(const Mat2& v) : v_(0.5 * (v + v.transpose())) {}

bool CovMatrix::is_psd(double tol) const {
  Eigen::SelfAdjointEigenSolver<Mat2> es(v_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

double CovMatrix::uncertainty_margin(double hbar) const {
  Eigen::Matrix2cd h = v_.cast<std::complex<double>>();
  h += std::complex<double>(0.0, 0.5 * hbar) * symplectic().cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool CovMatrix::is_physical(double hbar, double tol) const {
  return uncertainty_margin(hbar) >= -tol;
}

}  // namespace qkf
