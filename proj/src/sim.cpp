#include "qkf/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace qkf {

double Waveform::operator()(double t) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::constant: return amplitude;
    case Kind::sine: return amplitude * std::sin(frequency * t);
  }
  return 0.0;
}

void validate_config(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw std::invalid_argument("dt must be positive");
  if (!(cfg.t_final > 0.0) || !std::isfinite(cfg.t_final)) {
    throw std::invalid_argument("t_final must be positive");
  }
  if (cfg.dt > cfg.t_final) throw std::invalid_argument("dt must not exceed t_final");
  if (cfg.ensemble < 1) throw std::invalid_argument("ensemble must be >= 1");
  if (cfg.drive && !cfg.drive->B.allFinite()) throw std::invalid_argument("drive B must be finite");
}

Eigen::Matrix3d SurrogateNoise::joint() const {
  Eigen::Matrix3d J;
  J.topLeftCorner<2, 2>() = Q;
  J.topRightCorner<2, 1>() = S;
  J.bottomLeftCorner<1, 2>() = S.transpose();
  J(2, 2) = R;
  return J;
}

SurrogateNoise surrogate_matrices(const DerivedModel& model) {
  return {model.M, model.R, model.S, model.Q};
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Square-root factor L with L L^T = J for the PSD (possibly singular) joint
// noise covariance.
Eigen::Matrix3d factor_joint(const Eigen::Matrix3d& J) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(J);
  const Eigen::Vector3d ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12 * (1.0 + J.norm())) {
    throw std::logic_error("joint noise covariance is not PSD");
  }
  return es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void check_grid(const SimConfig& cfg, const RiccatiFlow& flow, std::size_t n) {
  if (flow.times.size() != n + 1 || flow.values.size() != n + 1) {
    throw std::invalid_argument("covariance flow does not cover the simulation grid");
  }
  for (std::size_t k = 0; k <= n; ++k) {
    const double expected = (k == n) ? cfg.t_final : static_cast<double>(k) * cfg.dt;
    if (std::abs(flow.times[k] - expected) > 1e-9 * cfg.dt) {
      throw std::invalid_argument("covariance flow time grid differs from the simulation grid");
    }
  }
}

// Drives one trajectory, reporting every sample to `obs`:
//   obs(k, t, x_hat, error, dy, normalized_innovation)
template <class Observer>
void run_trajectory(const DerivedModel& model, const SimConfig& cfg, const RiccatiFlow& flow,
                    const SimHooks& hooks, std::uint64_t index, Observer&& obs) {
  const std::size_t n = step_count(cfg.t_final, cfg.dt);
  check_grid(cfg, flow, n);

  const Eigen::Matrix3d L = factor_joint(surrogate_matrices(model).joint());
  std::mt19937_64 rng(substream_seed(cfg.seed, index));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] { return hooks.zero_noise ? 0.0 : normal(rng); };

  Vec2 x_hat = hooks.x0_hat.value_or(Vec2::Zero());
  Vec2 e;
  if (hooks.x0_true) {
    e = *hooks.x0_true - x_hat;
  } else {
    const Mat2 chol = flow.values[0].matrix().llt().matrixL();
    const double z0 = draw();
    const double z1 = draw();
    e = chol * Vec2(z0, z1);
  }
  obs(std::size_t{0}, flow.times[0], x_hat, e, 0.0, 0.0);

  const double R = model.R;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = flow.times[k];
    const double h = flow.times[k + 1] - t;
    const double sqrt_h = std::sqrt(h);
    const Vec2 K = hooks.zero_gain ? Vec2::Zero() : model.gain(flow.values[k].matrix());

    const double z0 = draw();
    const double z1 = draw();
    const double z2 = draw();
    const Eigen::Vector3d w = sqrt_h * (L * Eigen::Vector3d(z0, z1, z2));
    const Vec2 dw = w.head<2>();
    const double dv = w(2);

    const Vec2 x_true = x_hat + e;
    const double dy = model.M.dot(x_true) * h + dv;
    const double innovation = dy - model.M.dot(x_hat) * h;

    Vec2 drift = model.A * x_hat;
    if (cfg.drive) drift += cfg.drive->B * cfg.drive->u(t);

    x_hat = x_hat + drift * h + K * innovation;
    e = e + (model.A * e - K * model.M.dot(e)) * h + dw - K * dv;

    obs(k + 1, flow.times[k + 1], x_hat, e, dy, innovation / std::sqrt(R * h));
  }
}

}  // namespace

Trajectory simulate_trajectory(const SystemSpec& spec, const SimConfig& cfg,
                               const RiccatiFlow& flow, const SimHooks& hooks,
                               std::uint64_t index) {
  validate_config(cfg);
  const DerivedModel model = build_derived(validate_spec(spec));
  const std::size_t n = step_count(cfg.t_final, cfg.dt);

  Trajectory tr;
  tr.noise_free = hooks.zero_noise;
  tr.times.reserve(n + 1);
  tr.x_true.reserve(n + 1);
  tr.x_hat.reserve(n + 1);
  tr.error.reserve(n + 1);
  tr.dy.reserve(n + 1);
  tr.innovations.reserve(n + 1);
  run_trajectory(model, cfg, flow, hooks, index,
                 [&](std::size_t, double t, const Vec2& x_hat, const Vec2& e, double dy,
                     double innov) {
                   tr.times.push_back(t);
                   tr.x_hat.push_back(x_hat);
                   tr.error.push_back(e);
                   tr.x_true.push_back(x_hat + e);
                   tr.dy.push_back(dy);
                   tr.innovations.push_back(innov);
                 });
  return tr;
}

bool covariance_consistent(const Checkpoint& c) {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double ref = c.riccati(i, j);
      const double tol = std::max(0.05 * std::abs(ref), 3.0 * c.standard_errors(i, j));
      if (!(std::abs(c.sample_error_cov(i, j) - ref) <= tol)) return false;
    }
  }
  return true;
}

namespace {

struct TrajectorySummary {
  std::array<Vec2, 3> errors{};
  double innov_sum = 0.0;
  double innov_sumsq = 0.0;
  std::size_t innov_count = 0;
};

}  // namespace

EnsembleStats monte_carlo(const SystemSpec& spec, const SimConfig& cfg, const SimHooks& hooks,
                          unsigned threads) {
  validate_config(cfg);
  if (cfg.ensemble < 2) throw InsufficientEnsemble("insufficient ensemble (need >= 2)");

  const DerivedModel model = build_derived(validate_spec(spec));
  const RiccatiFlow flow =
      integrate_riccati(model, CovMatrix::vacuum(model.hbar()), cfg.t_final, cfg.dt);
  const std::size_t n = step_count(cfg.t_final, cfg.dt);
  const std::array<std::size_t, 3> steps = {
      std::max<std::size_t>(1, (n + 2) / 4), std::max<std::size_t>(1, (n + 1) / 2), n};

  std::vector<TrajectorySummary> summaries(cfg.ensemble);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      TrajectorySummary& s = summaries[i];
      run_trajectory(model, cfg, flow, hooks, i,
                     [&](std::size_t k, double, const Vec2&, const Vec2& e, double,
                         double innov) {
                       for (int c = 0; c < 3; ++c) {
                         if (k == steps[c]) s.errors[c] = e;
                       }
                       if (k > 0) {
                         s.innov_sum += innov;
                         s.innov_sumsq += innov * innov;
                         ++s.innov_count;
                       }
                     });
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.ensemble));
  if (workers <= 1) {
    work(0, cfg.ensemble);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.ensemble + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(cfg.ensemble, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  // Aggregation in trajectory order.
  EnsembleStats stats;
  stats.ensemble = cfg.ensemble;
  const double N = static_cast<double>(cfg.ensemble);
  for (int c = 0; c < 3; ++c) {
    Vec2 mean = Vec2::Zero();
    for (const auto& s : summaries) mean += s.errors[c];
    mean /= N;
    Mat2 cov = Mat2::Zero();
    for (const auto& s : summaries) {
      const Vec2 d = s.errors[c] - mean;
      cov += d * d.transpose();
    }
    cov /= (N - 1.0);
    Mat2 spread = Mat2::Zero();
    for (const auto& s : summaries) {
      const Vec2 d = s.errors[c] - mean;
      const Mat2 dev = d * d.transpose() - cov;
      spread += dev.cwiseProduct(dev);
    }
    spread /= (N - 1.0);

    Checkpoint cp;
    cp.step = steps[c];
    cp.time = flow.times[steps[c]];
    cp.sample_error_cov = cov;
    cp.standard_errors = (spread / N).cwiseSqrt();
    cp.riccati = flow.values[steps[c]].matrix();
    stats.checkpoints.push_back(cp);
  }

  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t count = 0;
  for (const auto& s : summaries) {
    sum += s.innov_sum;
    sumsq += s.innov_sumsq;
    count += s.innov_count;
  }
  stats.innovation_samples = count;
  if (count > 1) {
    const double m = sum / static_cast<double>(count);
    stats.innovation_mean = m;
    stats.innovation_var =
        (sumsq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
  }
  return stats;
}

InnovationStats innovation_stats(const Trajectory& traj) {
  if (traj.innovations.size() < 1001) {
    throw std::invalid_argument("innovation_stats needs at least 1000 increments");
  }
  InnovationStats st;
  st.samples = traj.innovations.size() - 1;
  const double N = static_cast<double>(st.samples);
  double sum = 0.0;
  for (std::size_t k = 1; k < traj.innovations.size(); ++k) sum += traj.innovations[k];
  st.mean = sum / N;
  double ss = 0.0;
  for (std::size_t k = 1; k < traj.innovations.size(); ++k) {
    const double d = traj.innovations[k] - st.mean;
    ss += d * d;
  }
  st.variance = ss / (N - 1.0);
  st.applicable = !traj.noise_free;
  st.mean_ok = std::abs(st.mean) <= 4.0 / std::sqrt(N);
  st.var_ok = std::abs(st.variance - 1.0) <= 5.0 / std::sqrt(N);
  return st;
}

}  // namespace qkf
