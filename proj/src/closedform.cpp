#include "qkf/closedform.hpp"

#include <cmath>
#include <complex>

namespace qkf {

namespace {

void check_common(double phi, double eta, double hbar) {
  if (!std::isfinite(phi)) throw SpecError("phi must be finite");
  if (!(eta > 0.0 && eta <= 1.0)) throw SpecError("eta out of range (0, 1]");
  if (!(hbar > 0.0) || !std::isfinite(hbar)) throw SpecError("hbar must be positive");
}

void check(const Example1Params& p) {
  if (!(p.m > 0.0) || !std::isfinite(p.m)) throw SpecError("m must be positive");
  if (!(p.omega >= 0.0) || !std::isfinite(p.omega)) throw SpecError("omega must be >= 0");
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw SpecError("alpha must be positive");
  check_common(p.phi, p.eta, p.hbar);
}

void check(const Example2Params& p) {
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw SpecError("beta must be positive");
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) throw SpecError("gamma must be positive");
  check_common(p.phi, p.eta, p.hbar);
}

double heisenberg_eta(double hbar, double eta) { return hbar * hbar / (4.0 * eta); }

}  // namespace

SystemSpec example1_spec(const Example1Params& p) {
  check(p);
  SystemSpec s;
  s.G << p.m * p.omega * p.omega, 0.0, 0.0, 1.0 / p.m;
  s.C << std::sqrt(2.0 * p.alpha), 0.0;
  s.phi = p.phi;
  s.eta = p.eta;
  s.hbar = p.hbar;
  return validate_spec(s);
}

SystemSpec example2_spec(const Example2Params& p) {
  check(p);
  SystemSpec s;
  s.G << 0.0, p.beta, p.beta, 0.0;
  s.C << std::complex<double>(p.gamma, 0.0), std::complex<double>(0.0, p.gamma);
  s.phi = p.phi;
  s.eta = p.eta;
  s.hbar = p.hbar;
  return validate_spec(s);
}

double example1_r1(const Example1Params& p) {
  check(p);
  return p.hbar * p.m * p.omega * p.omega / (8.0 * p.eta * p.alpha);
}

double example2_r2(const Example2Params& p) {
  check(p);
  return p.beta / (p.gamma * p.gamma);
}

double example1_det(const Example1Params& p) {
  check(p);
  const double c = std::cos(p.phi);
  if (std::abs(c) < 1e-12) throw PhaseSingularity("cos(phi) = 0: det V_inf diverges");
  return heisenberg_eta(p.hbar, p.eta) * ((1.0 - p.eta) / (c * c) + p.eta);
}

double example1_product(const Example1Params& p) {
  check(p);
  if (p.phi != 0.0) throw std::invalid_argument("example1_product requires phi = 0");
  const double h = heisenberg_eta(p.hbar, p.eta);
  const double r1 = example1_r1(p);
  return h + h / std::sqrt(r1 * r1 + r1 + h);
}

double example1_product_from_are(const Example1Params& p) {
  check(p);
  if (p.phi != 0.0) throw std::invalid_argument("example1_product_from_are requires phi = 0");
  const double h = heisenberg_eta(p.hbar, p.eta);
  const double r1 = example1_r1(p);
  // sqrt(r1^2 + h) - r1 without cancellation.
  const double v12 = h / (std::sqrt(r1 * r1 + h) + r1);
  return h + v12 * v12;
}

double example2_product(const Example2Params& p) {
  check(p);
  if (p.phi != 0.0) throw std::invalid_argument("example2_product requires phi = 0");
  const double r2 = example2_r2(p);
  const double e = p.eta;
  const double root = std::sqrt(r2 * r2 + 2.0 * (2.0 * e - 1.0) * r2 + 1.0);
  return p.hbar * p.hbar / (8.0 * e) * (root + r2 + 2.0 * e - 1.0) / (1.0 + r2);
}

}  // namespace qkf
