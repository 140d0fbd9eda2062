#pragma once

#include <random>

#include "qkf/model.hpp"

namespace qkf {

// G, Re C, Im C entries uniform in [-2, 2], eta uniform in (0, 1],
// phi uniform in [0, 2 pi), hbar = 1.
SystemSpec random_spec(std::mt19937_64& rng);

}  // namespace qkf
