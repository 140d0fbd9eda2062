#include "qkf/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace qkf {

namespace {

constexpr double kAxisTol = 1e-9;
constexpr double kSettleTol = 1e-12;
constexpr double kDivergence = 1e12;
constexpr double kOdeHorizon = 1e4;

Mat2 symmetrize(const Mat2& m) { return 0.5 * (m + m.transpose()); }

double op_norm(const Mat2& m) {
  // Largest singular value of a 2x2 matrix.
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(0);
}

double residual_tolerance(const Mat2& V) {
  const double n = op_norm(V);
  return 1e-9 * (1.0 + n * n);
}

// Accepts V as a steady state if it is finite, symmetric PSD, stabilizing and
// solves the ARE to tolerance.
std::optional<SteadyState> accept(const DerivedModel& model, const Mat2& V,
                                  AreMethod method, int newton_steps) {
  if (!V.allFinite()) return std::nullopt;
  const CovMatrix cov(V);
  if (!cov.is_psd(1e-9 * (1.0 + op_norm(V)))) return std::nullopt;
  SteadyState out;
  out.V_inf = cov;
  out.residual = are_residual(model, cov.matrix());
  out.method = method;
  out.closed_loop_stable = is_hurwitz(closed_loop_matrix(model, cov.matrix()));
  out.newton_steps = newton_steps;
  if (!out.closed_loop_stable) return std::nullopt;
  if (out.residual > residual_tolerance(cov.matrix())) return std::nullopt;
  return out;
}

}  // namespace

Mat2 riccati_rhs(const DerivedModel& model, const Mat2& V) {
  const Mat2 a_v = model.Aprime * V;
  const Mat2 rhs = a_v + a_v.transpose() + model.D -
                   V * model.measurement_weight() * V;
  return symmetrize(rhs);
}

double are_residual(const DerivedModel& model, const Mat2& V) {
  return op_norm(riccati_rhs(model, V));
}

Mat2 closed_loop_matrix(const DerivedModel& model, const Mat2& V) {
  return model.Aprime - V * model.measurement_weight();
}

bool is_hurwitz(const Mat2& F) {
  // 2x2: both eigenvalues in the open left half-plane iff tr < 0 and det > 0.
  return F.trace() < 0.0 && F.determinant() > 0.0;
}

std::size_t step_count(double t_final, double dt) {
  if (t_final <= 0.0) return 0;
  const double ratio = t_final / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio)) {
    return static_cast<std::size_t>(rounded);
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

Mat2 rk4_step(const DerivedModel& model, const Mat2& V, double h) {
  const Mat2 k1 = riccati_rhs(model, V);
  const Mat2 k2 = riccati_rhs(model, V + 0.5 * h * k1);
  const Mat2 k3 = riccati_rhs(model, V + 0.5 * h * k2);
  const Mat2 k4 = riccati_rhs(model, V + h * k3);
  return symmetrize(V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

RiccatiFlow integrate_riccati(const DerivedModel& model, const CovMatrix& V0,
                              double t_final, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("integrate_riccati: dt must be positive");
  }
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
    throw std::invalid_argument("integrate_riccati: t_final must be >= 0");
  }
  const double hbar = model.hbar();
  const double tol = 1e-12 * (1.0 + V0.matrix().norm());
  if (!V0.is_psd(tol) || V0.det() < 0.25 * hbar * hbar - tol) {
    throw std::invalid_argument("integrate_riccati: V0 is not a physical covariance");
  }

  const std::size_t n = step_count(t_final, dt);
  RiccatiFlow flow;
  flow.times.reserve(n + 1);
  flow.values.reserve(n + 1);
  flow.times.push_back(0.0);
  flow.values.push_back(V0);

  Mat2 V = V0.matrix();
  if (are_residual(model, V) < kSettleTol) flow.settled_time = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double t_prev = flow.times.back();
    const double t_next = (k == n) ? t_final : static_cast<double>(k) * dt;
    V = rk4_step(model, V, t_next - t_prev);
    if (!V.allFinite() || V.norm() > kDivergence) {
      throw RiccatiDivergence(t_next, "Riccati flow diverged (|V| > 1e12)");
    }
    flow.times.push_back(t_next);
    flow.values.emplace_back(V);
    if (!flow.settled_time && are_residual(model, V) < kSettleTol) {
      flow.settled_time = t_next;
    }
  }
  return flow;
}

const char* to_string(AreMethod m) {
  return m == AreMethod::hamiltonian ? "hamiltonian" : "ode_limit";
}

Mat2 solve_lyapunov(const Mat2& F, const Mat2& Q) {
  // Unknowns (x11, x12, x22) of the symmetric solution.
  Eigen::Matrix3d L;
  L << 2.0 * F(0, 0), 2.0 * F(0, 1), 0.0,
       F(1, 0), F(0, 0) + F(1, 1), F(0, 1),
       0.0, 2.0 * F(1, 0), 2.0 * F(1, 1);
  const Eigen::Vector3d rhs(-Q(0, 0), -0.5 * (Q(0, 1) + Q(1, 0)), -Q(1, 1));
  const Eigen::Vector3d x = L.fullPivLu().solve(rhs);
  Mat2 X;
  X << x(0), x(1), x(1), x(2);
  return X;
}

int newton_polish(const DerivedModel& model, Mat2& V, int max_steps) {
  const Mat2 W = model.measurement_weight();
  double best = are_residual(model, V);
  int accepted = 0;
  for (int i = 0; i < max_steps && best > 0.0; ++i) {
    const Mat2 F = model.Aprime - V * W;
    Mat2 next = symmetrize(solve_lyapunov(F, model.D + V * W * V));
    if (!next.allFinite()) break;
    const double r = are_residual(model, next);
    if (!(r < best)) break;
    V = next;
    best = r;
    ++accepted;
  }
  return accepted;
}

Eigen::Matrix4d hamiltonian_matrix(const DerivedModel& model) {
  Eigen::Matrix4d H;
  H.topLeftCorner<2, 2>() = model.Aprime.transpose();
  H.topRightCorner<2, 2>() = -model.measurement_weight();
  H.bottomLeftCorner<2, 2>() = -model.D;
  H.bottomRightCorner<2, 2>() = -model.Aprime;
  return H;
}

namespace {

double axis_distance(const Eigen::Matrix4d& H) {
  Eigen::EigenSolver<Eigen::Matrix4d> es(H, false);
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) d = std::min(d, std::abs(es.eigenvalues()(i).real()));
  return d;
}

// Matrix sign function by scaled Newton iteration.
std::optional<Eigen::Matrix4d> matrix_sign(const Eigen::Matrix4d& H) {
  Eigen::Matrix4d Z = H;
  for (int it = 0; it < 100; ++it) {
    Eigen::FullPivLU<Eigen::Matrix4d> lu(Z);
    if (!lu.isInvertible()) return std::nullopt;
    const double det = std::abs(lu.determinant());
    const double c = (det > 0.0 && std::isfinite(det)) ? std::pow(det, -0.25) : 1.0;
    const Eigen::Matrix4d next = 0.5 * (c * Z + lu.inverse() / c);
    const double change = (next - Z).norm();
    Z = next;
    if (!Z.allFinite()) return std::nullopt;
    if (change <= 1e-13 * Z.norm()) return Z;
  }
  return Z;
}

}  // namespace

std::optional<SteadyState> solve_are_hamiltonian(const DerivedModel& model) {
  const Eigen::Matrix4d H = hamiltonian_matrix(model);
  if (axis_distance(H) < kAxisTol) return std::nullopt;
  const auto sign = matrix_sign(H);
  if (!sign) return std::nullopt;

  // sign(H) [I; V] = -[I; V] on the stable subspace.
  const Eigen::Matrix4d Sp = *sign + Eigen::Matrix4d::Identity();
  Eigen::Matrix<double, 4, 2> lhs;
  lhs << Sp.block<4, 2>(0, 2);
  Eigen::Matrix<double, 4, 2> rhs;
  rhs << -Sp.block<4, 2>(0, 0);
  Mat2 V = lhs.colPivHouseholderQr().solve(rhs);
  V = symmetrize(V);

  int steps = 0;
  if (V.allFinite() && are_residual(model, V) > 1e-13 * (1.0 + V.squaredNorm())) {
    steps = newton_polish(model, V, 3);
  }
  return accept(model, V, AreMethod::hamiltonian, steps);
}

std::optional<SteadyState> solve_are_ode(const DerivedModel& model) {
  const Mat2 W = model.measurement_weight();
  const double scale = 3.0 * op_norm(model.Aprime) +
                       std::sqrt(op_norm(W) * op_norm(model.D)) +
                       0.5 * model.hbar() * op_norm(W);
  double dt = std::min(1e-2, 0.5 / std::max(scale, 1e-12));

  for (int attempt = 0; attempt < 4; ++attempt, dt *= 0.5) {
    Mat2 V = CovMatrix::vacuum(model.hbar()).matrix();
    double t = 0.0;
    double best = are_residual(model, V);
    double best_at = 0.0;
    bool diverged = false;
    bool settled = best < kSettleTol;
    while (!settled && t < kOdeHorizon) {
      V = rk4_step(model, V, dt);
      t += dt;
      if (!V.allFinite() || V.norm() > kDivergence) {
        diverged = true;
        break;
      }
      const double r = are_residual(model, V);
      if (r < best) {
        best = r;
        best_at = t;
      }
      if (r < kSettleTol) {
        settled = true;
      } else if (r < 1e-9 * (1.0 + V.squaredNorm()) && t - best_at > 10.0) {
        // Round-off floor above the absolute threshold; Newton finishes it.
        settled = true;
      }
    }
    if (diverged) continue;
    if (!settled) return std::nullopt;
    const int steps = newton_polish(model, V, 20);
    return accept(model, V, AreMethod::ode_limit, steps);
  }
  return std::nullopt;
}

SteadyState solve_are(const DerivedModel& model, AreStrategy strategy) {
  if (strategy != AreStrategy::ode) {
    if (auto s = solve_are_hamiltonian(model)) return *s;
    if (strategy == AreStrategy::hamiltonian) {
      throw NoSteadySolution("Hamiltonian method found no stabilizing solution");
    }
  }
  if (auto s = solve_are_ode(model)) return *s;
  throw NoSteadySolution("no stabilizing steady solution of the Riccati equation");
}

ExistenceProbe are_existence_probe(const DerivedModel& model) {
  ExistenceProbe probe;
  const Eigen::Matrix4d H = hamiltonian_matrix(model);
  Eigen::EigenSolver<Eigen::Matrix4d> es(H, false);
  std::array<std::complex<double>, 4> ev;
  for (int i = 0; i < 4; ++i) ev[i] = es.eigenvalues()(i);
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  probe.spectrum = ev;
  probe.axis_distance = std::numeric_limits<double>::infinity();
  for (const auto& l : ev) probe.axis_distance = std::min(probe.axis_distance, std::abs(l.real()));
  probe.hamiltonian_ok = solve_are_hamiltonian(model).has_value();
  probe.ode_ok = solve_are_ode(model).has_value();
  probe.exists = probe.hamiltonian_ok || probe.ode_ok;
  return probe;
}

}  // namespace qkf
