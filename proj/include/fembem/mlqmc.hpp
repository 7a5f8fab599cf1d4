#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fembem/common.hpp"
#include "fembem/coupling.hpp"
#include "fembem/geometry.hpp"

namespace fembem {

/// Radical inverse of i in the given base: digits reflected about the radix
/// point, least significant first.
inline double radical_inverse(std::uint64_t i, int base) {
  double result = 0.0;
  double digit_value = 1.0 / base;
  while (i > 0) {
    result += static_cast<double>(i % base) * digit_value;
    i /= base;
    digit_value /= base;
  }
  return result;
}

inline std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  primes.reserve(count);
  for (int candidate = 2; static_cast<int>(primes.size()) < count; ++candidate) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > candidate) break;
      if (candidate % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(candidate);
  }
  return primes;
}

/// Halton sequence in the unit cube; coordinate j uses the j-th prime, in the
/// coefficient ordering k = 0, +1, -1, ... of SampleVector. Points start at
/// index 1.
class HaltonGenerator {
 public:
  explicit HaltonGenerator(int dimension = PerturbationSpec{}.dimension())
      : primes_(first_primes(dimension)) {}

  int dimension() const { return static_cast<int>(primes_.size()); }

  Eigen::VectorXd point(std::uint64_t i) const {
    if (i < 1) throw std::invalid_argument("halton_point: index starts at 1");
    Eigen::VectorXd x(dimension());
    for (int j = 0; j < dimension(); ++j) x[j] = radical_inverse(i, primes_[j]);
    return x;
  }

 private:
  std::vector<int> primes_;
};

/// Shifts a unit-cube point to the coefficient cube (-1/2, 1/2)^d.
inline SampleVector map_to_sample(const Eigen::VectorXd& point) {
  SampleVector y;
  y.data = point.array() - 0.5;
  return y;
}

enum class Schedule { kLinear, kQuadratic };

/// Sample counts per level for the multilevel estimator on level L:
/// N_l = 2^(L-l) N_L (linear) or 4^(L-l) N_L (quadratic).
inline std::vector<long> sample_counts(int max_level, long fine_samples, Schedule schedule) {
  std::vector<long> counts(max_level + 1);
  for (int l = 0; l <= max_level; ++l) {
    int gap = max_level - l;
    long factor = schedule == Schedule::kLinear ? (1L << gap) : (1L << (2 * gap));
    counts[l] = factor * fine_samples;
  }
  return counts;
}

struct MlConfig {
  int max_level = 3;
  long fine_samples = 10;
  Schedule schedule = Schedule::kLinear;
  std::function<double(const Vec2&)> u_bar;  // defaults to zero
  EllipseReference ellipse;
  PerturbationSpec perturbation;
};

struct LevelDiagnostics {
  int level = 0;
  long samples = 0;
  double mean_difference = 0.0;
};

struct MlEstimate {
  double value = 0.0;
  std::vector<LevelDiagnostics> per_level;
};

/// Owns lazily built level contexts plus a memoized map from (level, sample
/// index) to the sample functional value; reused across estimator calls so
/// telescoping level sweeps never recompute a solve.
class Estimator {
 public:
  using Functional = std::function<double(const LevelContext&, const FeFunction&)>;

  explicit Estimator(EllipseReference ellipse = {}, PerturbationSpec perturbation = {})
      : ellipse_(ellipse), perturbation_(perturbation), halton_(perturbation.dimension()) {}

  /// Functional evaluated per sample; defaults to the tracking QoI with ubar.
  static Functional qoi_functional(std::function<double(const Vec2&)> u_bar) {
    if (!u_bar) u_bar = [](const Vec2&) { return 0.0; };
    return [u_bar](const LevelContext& ctx, const FeFunction& u) {
      return evaluate_qoi(ctx.geometry(), u, u_bar);
    };
  }

  const LevelContext& context(int level) {
    if (level >= static_cast<int>(contexts_.size())) contexts_.resize(level + 1);
    if (!contexts_[level]) contexts_[level] = std::make_unique<LevelContext>(level);
    return *contexts_[level];
  }

  SampleVector sample(std::uint64_t index) const { return map_to_sample(halton_.point(index)); }

  /// Called once per coupled solve with the consumed sample; used by tests
  /// to verify that both halves of a level difference see the same point.
  std::function<void(int, std::uint64_t, const SampleVector&)> solve_observer;

  /// F(u_level[y_i]), memoized.
  double sample_value(int level, std::uint64_t index, const Functional& f) {
    auto key = std::make_pair(level, index);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const LevelContext& ctx = context(level);
    SampleVector y = sample(index);
    if (solve_observer) solve_observer(level, index, y);
    BoundaryMesh gamma = build_gamma_mesh(ellipse_, perturbation_, y, level);
    CoupledSolution sol = solve_reduced(ctx, gamma, newton_dirichlet_data);
    FeFunction u = interpolate(ctx.mesh(), newton_potential);
    u.coeffs += sol.u_tilde.coeffs;
    double value = f(ctx, u);
    cache_.emplace(key, value);
    return value;
  }

  /// Parallel prefetch of F(u_level[y_i]) for i = 1..n into the cache.
  void prefetch(int level, long n, const Functional& f) {
    context(level);
    std::vector<std::uint64_t> missing;
    for (long i = 1; i <= n; ++i)
      if (!cache_.count({level, static_cast<std::uint64_t>(i)}))
        missing.push_back(static_cast<std::uint64_t>(i));
    if (missing.empty()) return;
    std::vector<double> values(missing.size());
    const LevelContext& ctx = *contexts_[level];
    parallel_for(static_cast<std::ptrdiff_t>(missing.size()), [&](std::ptrdiff_t k) {
      SampleVector y = sample(missing[k]);
      if (solve_observer) solve_observer(level, missing[k], y);
      BoundaryMesh gamma = build_gamma_mesh(ellipse_, perturbation_, y, level);
      CoupledSolution sol = solve_reduced(ctx, gamma, newton_dirichlet_data);
      FeFunction u = interpolate(ctx.mesh(), newton_potential);
      u.coeffs += sol.u_tilde.coeffs;
      values[k] = f(ctx, u);
    });
    for (std::size_t k = 0; k < missing.size(); ++k) cache_.emplace(std::make_pair(level, missing[k]), values[k]);
  }

  /// Plain quasi-Monte Carlo mean of F(u_level) over n Halton points.
  double single_level_estimate(int level, long n, const Functional& f) {
    prefetch(level, n, f);
    double acc = 0.0;
    for (long i = 1; i <= n; ++i) acc += sample_value(level, i, f);
    return acc / static_cast<double>(n);
  }

  /// Multilevel estimator: sum over levels of the sample mean of
  /// F(u_l) - F(u_{l-1}) on shared points, with F(u_{-1}) := F(0).
  MlEstimate multilevel_estimate(int max_level, long fine_samples, Schedule schedule,
                                 const Functional& f) {
    std::vector<long> counts = sample_counts(max_level, fine_samples, schedule);
    for (int l = 0; l <= max_level; ++l) {
      prefetch(l, counts[l], f);
      if (l > 0) prefetch(l - 1, counts[l], f);
    }
    MlEstimate est;
    for (int l = 0; l <= max_level; ++l) {
      double zero_value = 0.0;
      if (l == 0) {
        FeFunction zero{0, Eigen::VectorXd::Zero(context(0).mesh().vertex_count())};
        zero_value = f(context(0), zero);
      }
      double acc = 0.0;
      for (long i = 1; i <= counts[l]; ++i) {
        double fine = sample_value(l, i, f);
        double coarse = (l == 0) ? zero_value : sample_value(l - 1, i, f);
        acc += fine - coarse;
      }
      double mean = acc / static_cast<double>(counts[l]);
      est.value += mean;
      est.per_level.push_back({l, counts[l], mean});
    }
    return est;
  }

  void clear_cache() { cache_.clear(); }

 private:
  EllipseReference ellipse_;
  PerturbationSpec perturbation_;
  HaltonGenerator halton_;
  std::vector<std::unique_ptr<LevelContext>> contexts_;
  std::map<std::pair<int, std::uint64_t>, double> cache_;
};

}  // namespace fembem
