#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "qubo.hpp"
#include "rng.hpp"

namespace efpqubo {

struct Schedule {
  double beta_0 = 10.0;
  double beta_l = 1e10;
  std::size_t steps = 2048;

  void validate() const {
    require(beta_0 > 0 && beta_0 < beta_l && std::isfinite(beta_l), "Schedule: need 0 < beta_0 < beta_l < inf");
    require(steps >= 1, "Schedule: steps must be >= 1");
  }
};

inline std::vector<double> geometric_schedule(const Schedule& s) {
  s.validate();
  std::vector<double> b(s.steps + 1);
  const double ratio = s.beta_l / s.beta_0;
  for (std::size_t i = 0; i <= s.steps; ++i)
    b[i] = s.beta_0 * std::pow(ratio, static_cast<double>(i) / static_cast<double>(s.steps));
  b.front() = s.beta_0;
  b.back() = s.beta_l;
  return b;
}

// Replicas stored flat.  fields[r*n + i] = J_ii + sum_{k != i} J_ik x_k, so the
// cost of flipping bit i is (1 - 2 x_i) * fields[i].
struct Population {
  std::size_t n = 0;
  std::size_t target_size = 0;
  std::vector<std::uint8_t> bits;
  std::vector<double> fields;
  std::vector<double> energies;

  std::size_t size() const { return energies.size(); }
  std::span<std::uint8_t> replica(std::size_t r) { return {bits.data() + r * n, n}; }
  std::span<const std::uint8_t> replica(std::size_t r) const { return {bits.data() + r * n, n}; }
};

namespace detail {

inline void refresh_replica(const DenseQubo& d, const std::uint8_t* x, double* f, double& e) {
  e = d.offset;
  for (std::size_t i = 0; i < d.n; ++i) {
    const double* wi = d.row(i);
    double s = d.diag[i];
    for (std::size_t k = 0; k < d.n; ++k)
      if (x[k]) s += wi[k];
    f[i] = s;
    if (x[i]) e += 0.5 * (s + d.diag[i]);
  }
}

inline constexpr std::uint64_t kInitTag = 0x696e6974ULL;
inline constexpr std::uint64_t kSweepTag = 0x7377656570ULL;
inline constexpr std::uint64_t kResampleTag = 0x7265736dULL;

}  // namespace detail

inline Population random_population(const DenseQubo& d, std::size_t r0, std::uint64_t seed) {
  require(r0 >= 1, "population: r0 must be >= 1");
  Population p;
  p.n = d.n;
  p.target_size = r0;
  p.bits.resize(r0 * d.n);
  p.fields.resize(r0 * d.n);
  p.energies.resize(r0);
  for (std::size_t r = 0; r < r0; ++r) {
    Stream rng = Stream::make(seed, detail::kInitTag, r);
    for (std::size_t i = 0; i < d.n; ++i) p.bits[r * d.n + i] = static_cast<std::uint8_t>(rng() >> 63);
    detail::refresh_replica(d, p.bits.data() + r * d.n, p.fields.data() + r * d.n, p.energies[r]);
  }
  return p;
}

// Recomputes fields and energies; returns the largest energy drift seen.
inline double verify_population(Population& p, const DenseQubo& d) {
  double drift = 0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    const double cached = p.energies[r];
    detail::refresh_replica(d, p.bits.data() + r * p.n, p.fields.data() + r * p.n, p.energies[r]);
    drift = std::max(drift, std::abs(cached - p.energies[r]));
  }
  return drift;
}

// One replica, one sweep: n proposals in a fresh random order.
inline void metropolis_sweep_replica(const DenseQubo& d, double beta, std::uint8_t* x, double* f, double& e,
                                     Stream& rng, std::vector<std::uint32_t>& order) {
  constexpr double kNoDraw = 37.0;  // exp(-37) < 2^-53, the resolution of uniform()
  const std::size_t n = d.n;
  // Every flip rejected without a draw: the sweep cannot change anything.
  double lowest = INFINITY;
  for (std::size_t i = 0; i < n; ++i) lowest = std::min(lowest, x[i] ? -f[i] : f[i]);
  if (beta * lowest > kNoDraw) return;

  order.resize(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below32(static_cast<std::uint32_t>(i))]);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t i = order[t];
    const double delta = x[i] ? -f[i] : f[i];
    if (delta > 0) {
      const double a = beta * delta;
      if (a > kNoDraw || rng.uniform() >= std::exp(-a)) continue;
    }
    x[i] ^= 1u;
    e += delta;
    const double s = x[i] ? 1.0 : -1.0;
    const double* wi = d.row(i);
    for (std::size_t k = 0; k < n; ++k) f[k] += s * wi[k];
  }
}

inline void metropolis_sweep(Population& p, const DenseQubo& d, double beta, std::uint64_t seed, std::uint64_t step,
                             std::uint64_t sweep = 0, unsigned threads = 1) {
  require(beta > 0, "metropolis_sweep: beta must be > 0");
  parallel_for(p.size(), threads, [&](std::size_t r) {
    thread_local std::vector<std::uint32_t> order;
    Stream rng = Stream::make(seed, detail::kSweepTag, step, sweep, r);
    metropolis_sweep_replica(d, beta, p.bits.data() + r * p.n, p.fields.data() + r * p.n, p.energies[r], rng, order);
  });
}

struct ResamplePlan {
  std::vector<double> expected;
  std::vector<std::size_t> counts;
};

// Systematic resampling with offset u0 in [0, 1).  Counts always sum to target.
inline ResamplePlan resample_plan(std::span<const double> energies, double dbeta, std::size_t target, double u0) {
  require(!energies.empty(), "resample: empty population");
  require(target >= 1, "resample: target must be >= 1");
  const std::size_t r = energies.size();
  std::size_t best = 0;
  for (std::size_t k = 1; k < r; ++k)
    if (energies[k] < energies[best]) best = k;
  const double emin = energies[best];

  ResamplePlan plan{std::vector<double>(r, 0.0), std::vector<std::size_t>(r, 0)};
  if (!std::isfinite(emin)) {
    plan.expected[best] = static_cast<double>(target);
    plan.counts[best] = target;
    return plan;
  }
  double total = 0;
  for (std::size_t k = 0; k < r; ++k) {
    const double w = std::isnan(energies[k]) ? 0.0 : std::exp(-dbeta * (energies[k] - emin));
    plan.expected[k] = w;
    total += w;
  }
  for (auto& w : plan.expected) w *= static_cast<double>(target) / total;

  double cum = 0;
  std::size_t j = 0;
  for (std::size_t k = 0; k < r; ++k) {
    cum += plan.expected[k];
    while (j < target && static_cast<double>(j) + u0 < cum) {
      ++plan.counts[k];
      ++j;
    }
  }
  // Rounding in the cumulative sum can leave the last slot unassigned.
  if (j < target) plan.counts[best] += target - j;
  return plan;
}

inline ResamplePlan resample(Population& p, double beta_prev, double beta_next, std::uint64_t seed,
                             std::uint64_t step) {
  require(beta_next > beta_prev, "resample: beta_next must exceed beta_prev");
  Stream rng = Stream::make(seed, detail::kResampleTag, step);
  auto plan = resample_plan(p.energies, beta_next - beta_prev, p.target_size, rng.uniform());
  if (p.size() == p.target_size && std::all_of(plan.counts.begin(), plan.counts.end(), [](auto c) { return c == 1; }))
    return plan;
  thread_local Population next;
  next.n = p.n;
  next.target_size = p.target_size;
  next.bits.resize(p.target_size * p.n);
  next.fields.resize(p.target_size * p.n);
  next.energies.resize(p.target_size);
  std::size_t slot = 0;
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t c = 0; c < plan.counts[k]; ++c, ++slot) {
      std::copy_n(p.bits.begin() + k * p.n, p.n, next.bits.begin() + slot * p.n);
      std::copy_n(p.fields.begin() + k * p.n, p.n, next.fields.begin() + slot * p.n);
      next.energies[slot] = p.energies[k];
    }
  std::swap(p, next);
  return plan;
}

inline std::size_t unique_replicas(const Population& p) {
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t r = 0; r < p.size(); ++r) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    const auto x = p.replica(r);
    for (std::size_t i = 0; i < p.n; i += 64) {
      std::uint64_t word = 0;
      for (std::size_t b = i; b < std::min(p.n, i + 64); ++b) word |= std::uint64_t{x[b]} << (b - i);
      h = mix64(h ^ word);
    }
    seen.insert(h);
  }
  return seen.size();
}

struct AnnealStep {
  std::size_t step;
  double beta;
  double best_energy;
  double mean_energy;
  std::size_t population_size;
  std::size_t unique_replicas;
};

struct AnnealOptions {
  std::size_t verify_interval = 256;  // sweeps between full recomputations
  bool diagnostics = true;
  unsigned threads = 1;
};

struct AnnealResult {
  Bits bits;
  double energy = std::numeric_limits<double>::infinity();
  std::vector<AnnealStep> diagnostics;
};

inline AnnealResult population_anneal(const QuboProblem& q, const Schedule& schedule, std::size_t r0,
                                      std::size_t sweeps_per_step, std::uint64_t seed,
                                      const AnnealOptions& opt = {}) {
  require(r0 >= 1, "population_anneal: r0 must be >= 1");
  const auto betas = geometric_schedule(schedule);
  const DenseQubo d(q);
  Population pop = random_population(d, r0, seed);
  AnnealResult res;
  res.bits.assign(q.n, 0);

  // Accept drift up to a tiny fraction of the coefficient scale.
  double scale = std::abs(q.offset);
  for (double c : q.coeffs) scale += std::abs(c);
  const double drift_tol = 1e-9 * std::max(1.0, scale);

  auto track_best = [&] {
    for (std::size_t r = 0; r < pop.size(); ++r)
      if (pop.energies[r] < res.energy) {
        res.energy = pop.energies[r];
        const auto x = pop.replica(r);
        res.bits.assign(x.begin(), x.end());
      }
  };
  track_best();

  std::size_t sweeps_done = 0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (i > 0) resample(pop, betas[i - 1], betas[i], seed, i);
    for (std::size_t s = 0; s < sweeps_per_step; ++s) {
      metropolis_sweep(pop, d, betas[i], seed, i, s, opt.threads);
      if (opt.verify_interval && ++sweeps_done % opt.verify_interval == 0) {
        const double drift = verify_population(pop, d);
        if (drift > drift_tol) throw std::logic_error("population_anneal: cached energy drift exceeds tolerance");
      }
      track_best();
    }
    if (opt.diagnostics) {
      const double mean = std::accumulate(pop.energies.begin(), pop.energies.end(), 0.0) /
                          static_cast<double>(pop.size());
      res.diagnostics.push_back({i, betas[i], res.energy, mean, pop.size(), unique_replicas(pop)});
    }
  }
  res.energy = energy(q, res.bits);
  return res;
}

inline void write_anneal_diagnostics(std::ostream& out, const std::vector<AnnealStep>& diag) {
  out << "step,beta,best_energy,mean_energy,population_size,unique_replicas\n";
  out.precision(17);
  for (const auto& d : diag)
    out << d.step << ',' << d.beta << ',' << d.best_energy << ',' << d.mean_energy << ',' << d.population_size << ','
        << d.unique_replicas << '\n';
}

}  // namespace efpqubo
