#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "qkf/model.hpp"
#include "qkf/riccati.hpp"

namespace qkf {

// Open-loop input waveform u(t).
struct Waveform {
  enum class Kind { none, constant, sine };
  Kind kind = Kind::none;
  double amplitude = 0.0;
  double frequency = 0.0;  // angular, rad per unit time

  static Waveform none() { return {}; }
  static Waveform constant(double c) { return {Kind::constant, c, 0.0}; }
  static Waveform sine(double amplitude, double frequency) {
    return {Kind::sine, amplitude, frequency};
  }

  double operator()(double t) const;
};

// Drive term B u(t) added to the drift of the system and of the filter.
struct Drive {
  Vec2 B = Vec2::Zero();
  Waveform u;
};

struct SimConfig {
  double dt = 1e-3;
  double t_final = 5.0;
  std::uint64_t seed = 0;
  std::size_t ensemble = 1;
  std::optional<Drive> drive;
};

void validate_config(const SimConfig& cfg);

// Test hooks. None of these are reachable from the CLI.
struct SimHooks {
  bool zero_noise = false;  // every Gaussian draw replaced by 0
  bool zero_gain = false;   // filter runs open loop
  std::optional<Vec2> x0_true;
  std::optional<Vec2> x0_hat;
};

struct SurrogateNoise {
  Row2 M = Row2::Zero();
  double R = 1.0;
  Vec2 S = Vec2::Zero();
  Mat2 Q = Mat2::Zero();

  // [[Q, S], [S^T, R]]
  Eigen::Matrix3d joint() const;
};

SurrogateNoise surrogate_matrices(const DerivedModel& model);

// Per-trajectory seed derived from the master seed (splitmix64 mixing).
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index);

// Samples at t_0 .. t_n. dy[k] and innovations[k] are the increments over
// (t_{k-1}, t_k]; entry 0 is 0. innovations = (dy - M x_hat dt) / sqrt(R dt)
// with x_hat taken at the start of the step.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec2> x_true;
  std::vector<Vec2> x_hat;
  std::vector<Vec2> error;  // x_true - x_hat, propagated directly
  std::vector<double> dy;
  std::vector<double> innovations;
  bool noise_free = false;
};

// Euler-Maruyama simulation of the surrogate system, its homodyne record and
// the filter driven by the precomputed covariance flow. The state is carried
// as (x_hat, error) with x_true = x_hat + error: the error recursion
//   e <- e + (A - K M) e dt + dw - K dv
// does not involve the drive, so driven and undriven runs with the same seed
// produce bit-identical error sequences.
//
// `flow` must be sampled on the cfg grid. The initial error is drawn from
// N(0, flow.values[0]) and the initial estimate is 0 unless overridden.
// Noise for trajectory `index` comes from substream_seed(cfg.seed, index).
Trajectory simulate_trajectory(const SystemSpec& spec, const SimConfig& cfg,
                               const RiccatiFlow& flow, const SimHooks& hooks = {},
                               std::uint64_t index = 0);

class InsufficientEnsemble : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Checkpoint {
  double time = 0.0;
  std::size_t step = 0;
  Mat2 sample_error_cov = Mat2::Zero();
  Mat2 standard_errors = Mat2::Zero();
  Mat2 riccati = Mat2::Zero();  // flow value at the same step
};

struct EnsembleStats {
  std::size_t ensemble = 0;
  std::vector<Checkpoint> checkpoints;  // t_final/4, t_final/2, t_final
  // Pooled over all trajectories and steps.
  double innovation_mean = 0.0;
  double innovation_var = 0.0;
  std::size_t innovation_samples = 0;
};

// Entry-wise agreement |sample - riccati| <= max(5% |riccati|, 3 SE).
bool covariance_consistent(const Checkpoint& c);

// Runs cfg.ensemble independent trajectories from the vacuum covariance and
// compares the sample error covariance against the Riccati flow. Results do
// not depend on `threads` (0 = hardware concurrency).
EnsembleStats monte_carlo(const SystemSpec& spec, const SimConfig& cfg,
                          const SimHooks& hooks = {}, unsigned threads = 0);

struct InnovationStats {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t samples = 0;
  bool applicable = true;  // false for noise-free runs
  bool mean_ok = false;    // |mean| <= 4 / sqrt(N)
  bool var_ok = false;     // |var - 1| <= 5 / sqrt(N)

  bool passed() const { return applicable && mean_ok && var_ok; }
};

// Requires at least 1000 increments.
InnovationStats innovation_stats(const Trajectory& traj);

}  // namespace qkf
