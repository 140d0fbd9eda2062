#include "qkf/bounds.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace qkf {

namespace {

constexpr double kKappaDeadBand = 1e-12;

void sort_roots(std::array<std::complex<double>, 2>& r) {
  std::sort(r.begin(), r.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
}

}  // namespace

const char* to_string(KappaClass c) {
  return c == KappaClass::positive ? "positive" : "nonpositive";
}

const char* to_string(StabilityClass c) {
  return c == StabilityClass::asymptotically_stable ? "asymptotically_stable"
                                                    : "not_asymptotically_stable";
}

KappaClass classify_kappa(double kappa) {
  return kappa > kKappaDeadBand ? KappaClass::positive : KappaClass::nonpositive;
}

StabilityRecord classify_stability(const DerivedModel& model) {
  StabilityRecord rec;
  rec.kappa = model.kappa;
  rec.det_G = model.spec.G.determinant();

  Eigen::EigenSolver<Mat2> es(model.A, false);
  rec.numeric = {es.eigenvalues()(0), es.eigenvalues()(1)};
  sort_roots(rec.numeric);

  // lambda = -kappa +- sqrt(-det G)
  const std::complex<double> s = std::sqrt(std::complex<double>(-rec.det_G, 0.0));
  rec.analytic = {-rec.kappa + s, -rec.kappa - s};
  sort_roots(rec.analytic);

  for (int i = 0; i < 2; ++i) {
    rec.root_mismatch = std::max(rec.root_mismatch, std::abs(rec.numeric[i] - rec.analytic[i]));
  }

  const bool stable = classify_kappa(rec.kappa) == KappaClass::positive &&
                      rec.kappa * rec.kappa + rec.det_G > 0.0;
  rec.stability = stable ? StabilityClass::asymptotically_stable
                         : StabilityClass::not_asymptotically_stable;
  return rec;
}

double theorem_bound(const DerivedModel& model) {
  const double h2 = model.hbar() * model.hbar();
  return classify_kappa(model.kappa) == KappaClass::nonpositive ? h2 / (4.0 * model.eta())
                                                                : h2 / 4.0;
}

double ProofIdentities::max_equation_residual() const {
  return std::max({std::abs(eq_11), std::abs(eq_12), std::abs(eq_22)});
}

ProofIdentities proof_identities(const DerivedModel& model, const CovMatrix& V_inf) {
  const double scale = model.Cr.norm();
  if (scale < 1e-12) throw DegenerateBasis("Cr vanishes; the measurement basis is undefined");

  SystemSpec rescaled = model.spec;
  rescaled.G /= scale * scale;
  rescaled.C /= scale;
  const DerivedModel m = build_derived(rescaled);

  const Mat2& sigma = symplectic();
  const Vec2 u = m.Cr;
  const Vec2 ub = sigma.transpose() * u;
  const Mat2& V = V_inf.matrix();
  const double eta = m.eta();
  const double hbar = m.hbar();
  const double w = 4.0 * eta / hbar;

  ProofIdentities p;
  p.v1 = u.dot(V * u);
  p.v2 = u.dot(V * ub);
  p.v3 = ub.dot(V * ub);
  p.a1 = u.dot(m.Aprime * u);
  p.a2 = u.dot(m.Aprime * ub);
  p.a3 = ub.dot(m.Aprime * u);
  p.a4 = ub.dot(m.Aprime * ub);
  p.d1 = u.dot(m.D * u);
  p.d2 = u.dot(m.D * ub);
  p.d3 = ub.dot(m.D * ub);
  p.kappa = m.kappa;

  p.eq_11 = 2.0 * p.a1 * p.v1 + 2.0 * p.a2 * p.v2 + p.d1 - w * p.v1 * p.v1;
  p.eq_12 = p.a3 * p.v1 + (p.a1 + p.a4) * p.v2 + p.a2 * p.v3 + p.d2 - w * p.v1 * p.v2;
  p.eq_22 = 2.0 * p.a3 * p.v2 + 2.0 * p.a4 * p.v3 + p.d3 - w * p.v2 * p.v2;

  const double numerator = p.d3 * p.v1 * p.v1 - 2.0 * p.d2 * p.v1 * p.v2 + p.d1 * p.v2 * p.v2;
  const double denominator = p.v1 * p.v1 - hbar * (p.a1 + p.a4) * p.v1 / (2.0 * eta) -
                             hbar * p.d1 / (4.0 * eta);
  p.det = p.v1 * p.v3 - p.v2 * p.v2;
  p.quotient = hbar / (4.0 * eta) * numerator / denominator;
  p.quotient_residual = std::abs(p.quotient - V_inf.det());

  p.d1_residual = std::abs(p.d1 - hbar * (1.0 - eta) * p.kappa * p.kappa);
  const double cross = ub.dot(sigma * m.Ci) * p.v1 - u.dot(sigma * m.Ci) * p.v2;
  p.numerator_residual =
      std::abs(numerator - (hbar * p.v1 * p.v1 + hbar * (1.0 - eta) * cross * cross));
  p.trace_residual = std::abs(p.a1 + p.a4 - 2.0 * (eta - 1.0) * p.kappa);
  const double vn = V.operatorNorm();
  p.scale = 1.0 + vn * vn;
  return p;
}

double det_quotient_identity(const DerivedModel& model, const CovMatrix& V_inf) {
  return proof_identities(model, V_inf).normalized_quotient_residual();
}

bool lemma_f_bound(double a, double b, double v) {
  const double denom = v * v + a * v - b;
  if (!(v > 0.0) || !(denom > 0.0)) return true;
  const double f = v * v / denom;
  const double bound = 4.0 * b / (4.0 * b + a * a);
  // Equality is attained at v = 2b/a.
  return f >= bound * (1.0 - 1e-14);
}

bool TheoremReport::theorem_holds() const {
  return has_steady_state && margin >= -1e-10 && heisenberg_ok;
}

TheoremReport verify_theorem(const SystemSpec& spec) {
  return verify_theorem(build_derived(validate_spec(spec)));
}

TheoremReport verify_theorem(const DerivedModel& model, AreStrategy strategy) {
  TheoremReport r;
  r.kappa = model.kappa;
  r.kappa_class = classify_kappa(model.kappa);
  r.stability_class = classify_stability(model).stability;
  r.bound = theorem_bound(model);
  r.hbar = model.hbar();

  try {
    r.steady = solve_are(model, strategy);
  } catch (const NoSteadySolution& e) {
    r.has_steady_state = false;
    r.failure = e.what();
    return r;
  }
  r.has_steady_state = true;
  const double h2 = model.hbar() * model.hbar();
  r.det_V_inf = r.steady->V_inf.det();
  r.margin = r.det_V_inf - r.bound;
  r.heisenberg_ok = r.det_V_inf >= h2 / 4.0 - 1e-10;
  if (model.Cr.norm() >= 1e-12) {
    r.proof_identity_residual = det_quotient_identity(model, r.steady->V_inf);
  }
  return r;
}

}  // namespace qkf
