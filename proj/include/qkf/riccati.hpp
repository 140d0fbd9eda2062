#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkf/model.hpp"

namespace qkf {

// Right-hand side of the covariance flow
//   dV/dt = A' V + V A'^T + D - (4 eta / hbar) V Cr Cr^T V,
// symmetrized.
Mat2 riccati_rhs(const DerivedModel& model, const Mat2& V);

// Operator 2-norm of riccati_rhs(model, V).
double are_residual(const DerivedModel& model, const Mat2& V);

// A' - V (4 eta / hbar) Cr Cr^T: the error dynamics of the filter at V.
Mat2 closed_loop_matrix(const DerivedModel& model, const Mat2& V);

struct RiccatiFlow {
  std::vector<double> times;
  std::vector<CovMatrix> values;
  // First sampled time where |dV/dt| < 1e-12, if reached.
  std::optional<double> settled_time;
};

class RiccatiDivergence : public std::runtime_error {
 public:
  RiccatiDivergence(double t, const std::string& what)
      : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Number of fixed steps of size dt covering [0, t_final]; the last step is
// shortened when t_final is not a multiple of dt.
std::size_t step_count(double t_final, double dt);

// One classical RK4 step of the flow, followed by symmetrization.
Mat2 rk4_step(const DerivedModel& model, const Mat2& V, double h);

// Fixed-step RK4 integration; times[k] = k * dt (last clipped to t_final).
// Throws std::invalid_argument for an unphysical V0 or bad step, and
// RiccatiDivergence when |V| exceeds 1e12.
RiccatiFlow integrate_riccati(const DerivedModel& model, const CovMatrix& V0,
                              double t_final, double dt);

enum class AreMethod { hamiltonian, ode_limit };

const char* to_string(AreMethod m);

struct SteadyState {
  CovMatrix V_inf;
  double residual = 0.0;
  AreMethod method = AreMethod::hamiltonian;
  bool closed_loop_stable = false;
  int newton_steps = 0;
};

class NoSteadySolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AreStrategy { automatic, hamiltonian, ode };

// Stabilizing solution of the algebraic Riccati equation. The automatic
// strategy uses the Hamiltonian invariant subspace and falls back to the
// long-time limit of the flow. Throws NoSteadySolution when neither yields a
// symmetric PSD stabilizing solution.
SteadyState solve_are(const DerivedModel& model,
                      AreStrategy strategy = AreStrategy::automatic);

// Stable invariant subspace of [[A'^T, -W], [-D, -A']] via the matrix sign
// function. nullopt when the spectrum touches the imaginary axis (within
// 1e-9) or the subspace does not give a valid solution.
std::optional<SteadyState> solve_are_hamiltonian(const DerivedModel& model);

// Integrates from the vacuum (hbar/2) I until |dV/dt| < 1e-12 (t <= 1e4),
// then polishes with Newton steps. nullopt on divergence, non-convergence, or
// a non-stabilizing limit.
std::optional<SteadyState> solve_are_ode(const DerivedModel& model);

// Kleinman-Newton refinement; keeps the iterate with the smallest residual.
// Returns the number of accepted steps.
int newton_polish(const DerivedModel& model, Mat2& V, int max_steps = 20);

// Solves F X + X F^T + Q = 0 for symmetric X (2x2).
Mat2 solve_lyapunov(const Mat2& F, const Mat2& Q);

bool is_hurwitz(const Mat2& F);

// Hamiltonian matrix [[A'^T, -W], [-D, -A']].
Eigen::Matrix4d hamiltonian_matrix(const DerivedModel& model);

struct ExistenceProbe {
  std::array<std::complex<double>, 4> spectrum{};
  double axis_distance = 0.0;
  bool hamiltonian_ok = false;
  bool ode_ok = false;
  bool exists = false;
};

ExistenceProbe are_existence_probe(const DerivedModel& model);

}  // namespace qkf
