#pragma once

#include <stdexcept>

#include "qkf/model.hpp"

namespace qkf {

class PhaseSingularity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Harmonic oscillator under position measurement:
//   H = m omega^2 q^2 / 2 + p^2 / (2m),  c = sqrt(2 alpha) q.
struct Example1Params {
  double m = 1.0;
  double omega = 1.0;
  double alpha = 0.5;
  double phi = 0.0;
  double eta = 1.0;
  double hbar = 1.0;
};

// Degenerate parametric amplifier with damping:
//   H = beta (q p + p q) / 2,  c = gamma (q + i p).
struct Example2Params {
  double beta = 1.0;
  double gamma = 1.0;
  double phi = 0.0;
  double eta = 1.0;
  double hbar = 1.0;
};

SystemSpec example1_spec(const Example1Params& p);
SystemSpec example2_spec(const Example2Params& p);

// r1 = hbar m omega^2 / (8 eta alpha).
double example1_r1(const Example1Params& p);
// r2 = beta / gamma^2.
double example2_r2(const Example2Params& p);

// det V_inf = (hbar^2 / 4 eta) ((1 - eta) / cos^2 phi + eta).
// Throws PhaseSingularity when |cos phi| < 1e-12.
double example1_det(const Example1Params& p);

// Published phi = 0 product <dq^2><dp^2>:
//   h + h / sqrt(r1^2 + r1 + h),  h = hbar^2 / (4 eta).
// Throws std::invalid_argument unless phi == 0.
double example1_product(const Example1Params& p);

// phi = 0 product obtained by solving the steady-state equations by hand:
// V12 = sqrt(r1^2 + h) - r1, det = h, so <dq^2><dp^2> = h + V12^2.
// Throws std::invalid_argument unless phi == 0.
double example1_product_from_are(const Example1Params& p);

// phi = 0 product
//   (hbar^2 / 8 eta) (sqrt(r2^2 + 2(2 eta - 1) r2 + 1) + r2 + 2 eta - 1) / (1 + r2).
// Throws std::invalid_argument unless phi == 0.
double example2_product(const Example2Params& p);

}  // namespace qkf
