#pragma once

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

#include "qkf/model.hpp"
#include "qkf/riccati.hpp"

namespace qkf {

enum class KappaClass { nonpositive, positive };
enum class StabilityClass { asymptotically_stable, not_asymptotically_stable };

const char* to_string(KappaClass c);
const char* to_string(StabilityClass c);

// kappa within 1e-12 of zero counts as nonpositive.
KappaClass classify_kappa(double kappa);

struct StabilityRecord {
  double kappa = 0.0;
  double det_G = 0.0;
  // Eigenvalues of A, sorted by (real, imag).
  std::array<std::complex<double>, 2> numeric{};
  // Roots of lambda^2 + 2 kappa lambda + kappa^2 + det G, same order.
  std::array<std::complex<double>, 2> analytic{};
  double root_mismatch = 0.0;
  StabilityClass stability = StabilityClass::not_asymptotically_stable;
};

// Hurwitz iff kappa > 0 and kappa^2 + det G > 0.
StabilityRecord classify_stability(const DerivedModel& model);

// hbar^2 / (4 eta) when kappa <= 0, hbar^2 / 4 otherwise.
double theorem_bound(const DerivedModel& model);

class DegenerateBasis : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The steady-state equation written in the orthonormal basis (u, Sigma^T u),
// u = Cr / |Cr|, after rescaling time so that |Cr| = 1 (G -> G/|Cr|^2,
// C -> C/|Cr|; V_inf is unchanged by the rescaling).
struct ProofIdentities {
  double v1 = 0, v2 = 0, v3 = 0;
  double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
  double d1 = 0, d2 = 0, d3 = 0;
  double kappa = 0;  // of the rescaled model

  // Residuals of the three scalar components of the ARE.
  double eq_11 = 0, eq_12 = 0, eq_22 = 0;
  double det = 0;
  double quotient = 0;
  double quotient_residual = 0;
  // |d1 - hbar (1 - eta) kappa^2|
  double d1_residual = 0;
  // |numerator - [hbar v1^2 + hbar (1-eta) (..)^2]|
  double numerator_residual = 0;
  // |a1 + a4 - 2 (eta - 1) kappa|
  double trace_residual = 0;

  // 1 + |V_inf|^2, the round-off scale of every quadratic residual above.
  double scale = 1;

  double max_equation_residual() const;
  double normalized_equation_residual() const { return max_equation_residual() / scale; }
  double normalized_quotient_residual() const { return quotient_residual / scale; }
};

ProofIdentities proof_identities(const DerivedModel& model, const CovMatrix& V_inf);

// |quotient - det(V_inf)| / (1 + |V_inf|^2).
double det_quotient_identity(const DerivedModel& model, const CovMatrix& V_inf);

// f(v) = v^2 / (v^2 + a v - b) >= 4b / (4b + a^2) on v > 0, v^2 + a v - b > 0.
// Vacuously true outside that domain.
bool lemma_f_bound(double a, double b, double v);

struct TheoremReport {
  double kappa = 0.0;
  KappaClass kappa_class = KappaClass::nonpositive;
  StabilityClass stability_class = StabilityClass::not_asymptotically_stable;
  double bound = 0.0;
  double hbar = 1.0;

  bool has_steady_state = false;
  std::string failure;  // set when has_steady_state is false
  std::optional<SteadyState> steady;
  double det_V_inf = 0.0;
  double margin = 0.0;
  bool heisenberg_ok = false;
  std::optional<double> proof_identity_residual;

  bool theorem_holds() const;
};

TheoremReport verify_theorem(const SystemSpec& spec);
TheoremReport verify_theorem(const DerivedModel& model,
                             AreStrategy strategy = AreStrategy::automatic);

}  // namespace qkf
