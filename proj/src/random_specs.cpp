#include "qkf/random_specs.hpp"

#include <complex>
#include <numbers>

namespace qkf {

SystemSpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> entry(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SystemSpec s;
  const double g11 = entry(rng);
  const double g12 = entry(rng);
  const double g22 = entry(rng);
  s.G << g11, g12, g12, g22;
  const double r0 = entry(rng), r1 = entry(rng);
  const double i0 = entry(rng), i1 = entry(rng);
  s.C << std::complex<double>(r0, i0), std::complex<double>(r1, i1);
  s.eta = 1.0 - unit(rng);
  s.phi = 2.0 * std::numbers::pi * unit(rng);
  s.hbar = 1.0;
  return validate_spec(s);
}

}  // namespace qkf
