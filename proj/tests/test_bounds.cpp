#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qkf/bounds.hpp"
#include "qkf/closedform.hpp"
#include "qkf/random_specs.hpp"

using namespace qkf;
using cd = std::complex<double>;

namespace {

DerivedModel example2_model(double beta, double gamma, double eta = 1.0, double phi = 0.0) {
  Example2Params p;
  p.beta = beta;
  p.gamma = gamma;
  p.eta = eta;
  p.phi = phi;
  return build_derived(example2_spec(p));
}

}  // namespace

// ---------------------------------------------------------------------------
// classify_stability
// ---------------------------------------------------------------------------

TEST(Stability, Example1IsMarginal) {
  const StabilityRecord r = classify_stability(build_derived(example1_spec({})));
  EXPECT_EQ(r.stability, StabilityClass::not_asymptotically_stable);
  for (const auto& ev : r.numeric) {
    EXPECT_NEAR(ev.real(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(ev.imag()), 1.0, 1e-12);
  }
  EXPECT_LE(r.root_mismatch, 1e-9);
}

TEST(Stability, Example1FrequencyScaling) {
  Example1Params p;
  p.m = 2.0;
  p.omega = 3.0;
  const StabilityRecord r = classify_stability(build_derived(example1_spec(p)));
  for (const auto& ev : r.numeric) EXPECT_NEAR(std::abs(ev.imag()), 3.0, 1e-12);
}

TEST(Stability, Example2StableBranch) {
  const StabilityRecord r = classify_stability(example2_model(1, 2));
  EXPECT_NEAR(r.kappa, 4.0, 1e-12);
  EXPECT_NEAR(r.kappa * r.kappa + r.det_G, 15.0, 1e-12);
  EXPECT_EQ(r.stability, StabilityClass::asymptotically_stable);
  for (const auto& ev : r.numeric) EXPECT_LT(ev.real(), 0.0);
}

TEST(Stability, Example2UnstableDespitePositiveKappa) {
  const StabilityRecord r = classify_stability(example2_model(4, 1));
  EXPECT_NEAR(r.kappa, 1.0, 1e-12);
  EXPECT_NEAR(r.kappa * r.kappa + r.det_G, -15.0, 1e-12);
  EXPECT_EQ(r.stability, StabilityClass::not_asymptotically_stable);
  EXPECT_GT(std::max(r.numeric[0].real(), r.numeric[1].real()), 0.0);
  EXPECT_EQ(classify_kappa(r.kappa), KappaClass::positive);
}

TEST(Stability, AnalyticRootsMatchEigenvalues) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 1000; ++i) {
    const StabilityRecord r = classify_stability(build_derived(random_spec(rng)));
    EXPECT_LE(r.root_mismatch, 1e-9);
  }
}

TEST(Stability, StableImpliesPositiveKappa) {
  std::mt19937_64 rng(32);
  int stable = 0;
  for (int i = 0; i < 2000; ++i) {
    const DerivedModel m = build_derived(random_spec(rng));
    const StabilityRecord r = classify_stability(m);
    if (r.stability == StabilityClass::asymptotically_stable) {
      ++stable;
      EXPECT_EQ(classify_kappa(m.kappa), KappaClass::positive);
    }
  }
  EXPECT_GT(stable, 0);
}

// ---------------------------------------------------------------------------
// theorem_bound
// ---------------------------------------------------------------------------

TEST(TheoremBound, Examples) {
  Example1Params p1;
  p1.eta = 0.25;
  EXPECT_DOUBLE_EQ(theorem_bound(build_derived(example1_spec(p1))), 1.0);
  EXPECT_DOUBLE_EQ(theorem_bound(example2_model(1, 1.5, 0.3)), 0.25);
  EXPECT_DOUBLE_EQ(theorem_bound(example2_model(1, 1.5, 1.0)), 0.25);
  EXPECT_DOUBLE_EQ(theorem_bound(build_derived(example1_spec({}))), 0.25);
}

TEST(TheoremBound, KappaDeadBand) {
  EXPECT_EQ(classify_kappa(0.0), KappaClass::nonpositive);
  EXPECT_EQ(classify_kappa(5e-13), KappaClass::nonpositive);
  EXPECT_EQ(classify_kappa(-1.0), KappaClass::nonpositive);
  EXPECT_EQ(classify_kappa(2e-12), KappaClass::positive);
}

TEST(TheoremBound, NegativeKappaUsesEfficiencyBranch) {
  SystemSpec s;
  s.G = Mat2::Identity();
  s.C = CVec2(cd(1, 0), cd(0, -1));
  s.eta = 0.5;
  s.hbar = 2.0;
  const DerivedModel m = build_derived(s);
  ASSERT_LT(m.kappa, 0.0);
  EXPECT_DOUBLE_EQ(theorem_bound(m), 4.0 / (4.0 * 0.5));
}

// ---------------------------------------------------------------------------
// verify_theorem
// ---------------------------------------------------------------------------

TEST(VerifyTheorem, Example1AttainsEfficiencyBound) {
  Example1Params p;
  p.eta = 0.5;
  const TheoremReport r = verify_theorem(example1_spec(p));
  ASSERT_TRUE(r.has_steady_state);
  EXPECT_NEAR(r.det_V_inf, 0.5, 1e-10);
  EXPECT_DOUBLE_EQ(r.bound, 0.5);
  EXPECT_NEAR(r.margin, 0.0, 1e-10);
  EXPECT_TRUE(r.heisenberg_ok);
  EXPECT_TRUE(r.theorem_holds());
  EXPECT_EQ(r.kappa_class, KappaClass::nonpositive);
}

TEST(VerifyTheorem, Example1OffPhase) {
  Example1Params p;
  p.eta = 0.5;
  p.phi = std::numbers::pi / 3;
  const TheoremReport r = verify_theorem(example1_spec(p));
  ASSERT_TRUE(r.has_steady_state);
  EXPECT_NEAR(r.det_V_inf, 1.25, 1e-9);
  EXPECT_DOUBLE_EQ(r.bound, 0.5);
  EXPECT_NEAR(r.margin, 0.75, 1e-9);
}

TEST(VerifyTheorem, Example2ApproachesHeisenbergLimit) {
  Example2Params p;
  p.gamma = 100.0;
  p.beta = 1.0;  // r2 = 1e-4
  p.eta = 0.7;
  const TheoremReport r = verify_theorem(example2_spec(p));
  ASSERT_TRUE(r.has_steady_state);
  EXPECT_NEAR(r.steady->V_inf.diagonal_product(), 0.25, 1e-3);
  EXPECT_DOUBLE_EQ(r.bound, 0.25);
  EXPECT_EQ(r.kappa_class, KappaClass::positive);
}

TEST(VerifyTheorem, NoSteadyStateIsReported) {
  SystemSpec s;
  s.G = Mat2::Identity();
  const TheoremReport r = verify_theorem(s);
  EXPECT_FALSE(r.has_steady_state);
  EXPECT_FALSE(r.failure.empty());
  EXPECT_FALSE(r.steady.has_value());
  EXPECT_FALSE(r.theorem_holds());
}

TEST(VerifyTheorem, SelfConsistentWithStability) {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 200; ++i) {
    const DerivedModel m = build_derived(random_spec(rng));
    const TheoremReport r = verify_theorem(m);
    EXPECT_EQ(r.stability_class, classify_stability(m).stability);
    EXPECT_EQ(r.kappa_class, classify_kappa(m.kappa));
    EXPECT_EQ(r.bound, theorem_bound(m));
  }
}

TEST(VerifyTheorem, HoldsOnRandomPopulation) {
  std::mt19937_64 rng(34);
  int solved = 0;
  for (int i = 0; i < 1500 && solved < 1000; ++i) {
    const TheoremReport r = verify_theorem(build_derived(random_spec(rng)));
    if (!r.has_steady_state) continue;
    ++solved;
    EXPECT_GE(r.margin, -1e-10) << "spec " << i;
    EXPECT_GE(r.det_V_inf, 0.25 - 1e-10);
    EXPECT_TRUE(r.heisenberg_ok);
  }
  EXPECT_EQ(solved, 1000);
}

// ---------------------------------------------------------------------------
// proof identities
// ---------------------------------------------------------------------------

TEST(ProofIdentities, Example1) {
  const DerivedModel m = build_derived(example1_spec({}));
  const SteadyState s = solve_are(m);
  const ProofIdentities p = proof_identities(m, s.V_inf);
  EXPECT_NEAR(p.d1, 0.0, 1e-15);
  EXPECT_LE(p.max_equation_residual(), 1e-9);
  EXPECT_NEAR(p.quotient, m.hbar() * p.d3 / (4 * m.eta()), 1e-12);
  EXPECT_LE(p.quotient_residual, 1e-9);
  EXPECT_LE(det_quotient_identity(m, s.V_inf), 1e-9);
}

TEST(ProofIdentities, Example2HalfEfficiency) {
  const DerivedModel m = example2_model(1, 1, 0.5);
  const SteadyState s = solve_are(m);
  const ProofIdentities p = proof_identities(m, s.V_inf);
  EXPECT_LE(p.max_equation_residual(), 1e-9);
  EXPECT_LE(p.quotient_residual, 1e-9);
  EXPECT_LE(p.d1_residual, 1e-12);
  EXPECT_NEAR(p.d1, 0.5 * 1.0, 1e-12);
}

TEST(ProofIdentities, UnnormalizedCoupling) {
  Example1Params p;
  p.alpha = 3.0;
  p.phi = 0.5;
  p.eta = 0.4;
  const DerivedModel m = build_derived(example1_spec(p));
  const SteadyState s = solve_are(m);
  const ProofIdentities id = proof_identities(m, s.V_inf);
  EXPECT_LE(id.max_equation_residual(), 1e-9);
  EXPECT_LE(id.quotient_residual, 1e-9);
  EXPECT_LE(id.trace_residual, 1e-12);
  EXPECT_LE(id.numerator_residual, 1e-9);
}

TEST(ProofIdentities, RandomPopulation) {
  std::mt19937_64 rng(35);
  int used = 0;
  for (int i = 0; i < 1500 && used < 1000; ++i) {
    const DerivedModel m = build_derived(random_spec(rng));
    if (m.Cr.norm() < 1e-12) continue;
    std::optional<SteadyState> s;
    try {
      s = solve_are(m);
    } catch (const NoSteadySolution&) {
      continue;
    }
    ++used;
    const ProofIdentities p = proof_identities(m, s->V_inf);
    EXPECT_LE(p.normalized_equation_residual(), 1e-9) << "spec " << i;
    EXPECT_LE(p.normalized_quotient_residual(), 1e-9) << "spec " << i;
    EXPECT_LE(p.d1_residual, 1e-12);
    EXPECT_LE(p.trace_residual, 1e-12);
  }
  EXPECT_EQ(used, 1000);
}

TEST(ProofIdentities, DegenerateBasis) {
  SystemSpec s;
  s.G = Mat2::Identity();
  s.C = CVec2(cd(0, 1), cd(0, 0));  // purely imaginary coupling at phi = 0
  const DerivedModel m = build_derived(s);
  EXPECT_THROW(proof_identities(m, CovMatrix::vacuum(1.0)), DegenerateBasis);
  EXPECT_THROW(det_quotient_identity(m, CovMatrix::vacuum(1.0)), DegenerateBasis);
}

// ---------------------------------------------------------------------------
// lemma_f_bound
// ---------------------------------------------------------------------------

TEST(Lemma, EqualityPoint) {
  EXPECT_TRUE(lemma_f_bound(2, 1, 1));
  const double f = 1.0 / (1 + 2 - 1);
  EXPECT_DOUBLE_EQ(f, 4.0 / (4 + 4));
}

TEST(Lemma, LargeArgument) { EXPECT_TRUE(lemma_f_bound(1, 1, 10)); }

TEST(Lemma, VacuousOutsideDomain) {
  EXPECT_TRUE(lemma_f_bound(1, 1, -2));
  EXPECT_TRUE(lemma_f_bound(1, 1, 0.1));  // v^2 + v - 1 < 0
}

TEST(Lemma, DomainScan) {
  const double a = 3, b = 0.5;
  const double root = 0.5 * (-a + std::sqrt(a * a + 4 * b));
  for (int i = 1; i <= 10000; ++i) {
    const double v = root + 50.0 * i / 10000.0;
    EXPECT_TRUE(lemma_f_bound(a, b, v)) << v;
  }
}

TEST(Lemma, NumericalMinimumMatchesBound) {
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> coef(0.1, 4.0);
  for (int t = 0; t < 50; ++t) {
    const double a = coef(rng), b = coef(rng);
    const double root = 0.5 * (-a + std::sqrt(a * a + 4 * b));
    // Golden-section minimization of f on (root, 100 root + 100 b / a).
    auto f = [&](double v) { return v * v / (v * v + a * v - b); };
    double lo = root * (1 + 1e-9) + 1e-12, hi = 100 * root + 100 * b / a;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
      const double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
      (f(c) < f(d) ? hi : lo) = (f(c) < f(d) ? d : c);
    }
    const double vmin = 0.5 * (lo + hi);
    EXPECT_NEAR(f(vmin), 4 * b / (4 * b + a * a), 1e-10);
    EXPECT_NEAR(vmin, 2 * b / a, 1e-4 * (1 + 2 * b / a));
  }
}
