#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "anneal.hpp"
#include "errors.hpp"
#include "qubo.hpp"
#include "rng.hpp"

namespace efpqubo {

// E(s) = offset + sum_i h_i s_i + sum_{i>j} K_ij s_i s_j, with s = 2x - 1.
struct IsingForm {
  std::size_t n = 0;
  std::vector<double> h;
  std::vector<double> k;  // n*n symmetric, zero diagonal
  double offset = 0;

  double K(std::size_t i, std::size_t j) const { return k[i * n + j]; }

  double energy(const std::int8_t* s) const {
    double e = offset;
    for (std::size_t i = 0; i < n; ++i) {
      e += h[i] * s[i];
      for (std::size_t j = 0; j < i; ++j) e += k[i * n + j] * s[i] * s[j];
    }
    return e;
  }
};

inline IsingForm qubo_to_ising(const QuboProblem& q) {
  IsingForm f;
  f.n = q.n;
  f.h.assign(q.n, 0.0);
  f.k.assign(q.n * q.n, 0.0);
  f.offset = q.offset;
  for (std::size_t i = 0; i < q.n; ++i) {
    const double jii = q.J(i, i);
    f.h[i] += jii / 2;
    f.offset += jii / 2;
    for (std::size_t j = 0; j < i; ++j) {
      const double v = q.J(i, j) / 4;
      f.offset += v;
      f.h[i] += v;
      f.h[j] += v;
      f.k[i * q.n + j] = f.k[j * q.n + i] = v;
    }
  }
  return f;
}

inline std::vector<std::int8_t> bits_to_spins(std::span<const std::uint8_t> x) {
  std::vector<std::int8_t> s(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] ? 1 : -1;
  return s;
}

struct TrotterCouplings {
  double j_perp;  // +inf when gamma == 0
  double c_norm;
};

// <s|exp(a sigma_x)|s'> = C exp(B s s') with a = gamma/(P T); j_perp = P T B.
inline TrotterCouplings trotter_couplings(double gamma, std::size_t p, double t) {
  require(t > 0, "trotter_couplings: temperature must be > 0");
  require(p >= 2, "trotter_couplings: need at least 2 slices");
  require(gamma >= 0, "trotter_couplings: gamma must be >= 0");
  const double pt = static_cast<double>(p) * t;
  if (gamma == 0) return {std::numeric_limits<double>::infinity(), 0.0};
  const double a = gamma / pt;
  return {-0.5 * pt * std::log(std::tanh(a)), std::sqrt(0.5 * std::sinh(2 * a))};
}

// Spins site-major: spin(i, m) = spins[i*P + m].  Slice index is periodic.
struct PimcState {
  std::size_t n = 0, p = 0;
  std::vector<std::int8_t> spins;

  PimcState() = default;
  PimcState(std::size_t n_sites, std::size_t slices) : n(n_sites), p(slices), spins(n_sites * slices, 1) {}
  std::int8_t& at(std::size_t i, std::size_t m) { return spins[i * p + m]; }
  std::int8_t at(std::size_t i, std::size_t m) const { return spins[i * p + m]; }
  std::vector<std::int8_t> slice(std::size_t m) const {
    std::vector<std::int8_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = at(i, m);
    return s;
  }
  // sum_m sum_i s_i^m s_i^{m+1}
  long alignment() const {
    long a = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t m = 0; m < p; ++m) a += at(i, m) * at(i, (m + 1) % p);
    return a;
  }
};

// H = sum_m j_scale E(s^m) - j_perp sum_m sum_i s_i^m s_i^{m+1}, sampled at
// beta_eff = 1/(P T).  With gamma = 0 the time bonds are hard constraints:
// they add 0 when every ring is aligned and +inf otherwise.
inline double effective_energy(const PimcState& st, const IsingForm& f, double gamma, double j_scale,
                               std::size_t p, double t) {
  require(st.n == f.n && st.p == p, "effective_energy: dimension mismatch");
  const auto [j_perp, c] = trotter_couplings(gamma, p, t);
  (void)c;
  double e = 0;
  for (std::size_t m = 0; m < p; ++m) {
    const auto s = st.slice(m);
    e += j_scale * f.energy(s.data());
  }
  const long a = st.alignment();
  if (std::isinf(j_perp)) return a == static_cast<long>(st.n * p) ? e : std::numeric_limits<double>::infinity();
  return e - j_perp * static_cast<double>(a);
}

namespace detail {

// Cached per-slice data for one replica.
struct PimcReplica {
  PimcState st;
  std::vector<double> field;   // field[m*n + i] = h_i + sum_k K_ik s_k^m
  std::vector<double> energy;  // Ising energy of slice m

  void refresh(const IsingForm& f) {
    const std::size_t n = st.n, p = st.p;
    field.assign(n * p, 0.0);
    energy.assign(p, 0.0);
    for (std::size_t m = 0; m < p; ++m) {
      double e = f.offset;
      for (std::size_t i = 0; i < n; ++i) {
        double s = f.h[i];
        const double* ki = f.k.data() + i * n;
        for (std::size_t k = 0; k < n; ++k) s += ki[k] * st.at(k, m);
        field[m * n + i] = s;
        e += st.at(i, m) * 0.5 * (s + f.h[i]);
      }
      energy[m] = e;
    }
  }
};

inline constexpr std::uint64_t kPimcInitTag = 0x70696e6974ULL;
inline constexpr std::uint64_t kPimcSweepTag = 0x7073776565ULL;
inline constexpr std::uint64_t kPimcResampleTag = 0x7072736dULL;

// Aligned time bonds are i.i.d. Bernoulli(p_bond); instead of one draw per
// bond, draw the run length of active bonds before the next inactive one.
class BondRuns {
 public:
  BondRuns(double x, Stream& rng) : rng_(rng) {
    // p_bond = 1 - exp(-x); log(p_bond) computed without cancellation.
    log_p_ = std::isinf(x) ? 0.0 : std::log(-std::expm1(-x));
    next();
  }
  bool draw() {
    if (left_ > 0) {
      --left_;
      return true;
    }
    next();
    return false;
  }

 private:
  void next() {
    if (log_p_ == 0.0) {
      left_ = std::numeric_limits<double>::infinity();
      return;
    }
    left_ = std::floor(std::log(rng_.uniform_pos()) / log_p_);
  }
  Stream& rng_;
  double log_p_;
  double left_ = 0;
};

inline void cluster_sweep(PimcReplica& rep, const IsingForm& f, double j_perp, double beta_eff, double j_scale,
                          Stream& rng, std::vector<std::uint8_t>& bond) {
  constexpr double kNoDraw = 37.0;
  const std::size_t n = rep.st.n, p = rep.st.p;
  BondRuns runs(2 * beta_eff * j_perp, rng);
  bond.resize(p);
  for (std::size_t i = 0; i < n; ++i) {
    std::int8_t* ring = rep.st.spins.data() + i * p;
    std::size_t first_open = p;
    for (std::size_t m = 0; m < p; ++m) {
      const bool aligned = ring[m] == ring[m + 1 == p ? 0 : m + 1];
      bond[m] = aligned && runs.draw();
      if (!bond[m] && first_open == p) first_open = m;
    }
    // Walk the ring starting just after an open bond; a fully bonded ring
    // is a single cluster.
    const std::size_t start = first_open == p || first_open + 1 == p ? 0 : first_open + 1;
    std::size_t pos = 0;
    while (pos < p) {
      const std::size_t c0 = pos;
      double du = 0;
      for (;;) {
        const std::size_t m = start + pos < p ? start + pos : start + pos - p;
        du += -2.0 * ring[m] * rep.field[m * n + i];
        ++pos;
        if (!bond[m] || pos == p) break;
      }
      du *= j_scale;
      if (du > 0) {
        const double a = beta_eff * du;
        if (a > kNoDraw || rng.uniform() >= std::exp(-a)) continue;
      }
      const double* ki = f.k.data() + i * n;
      for (std::size_t t = c0; t < pos; ++t) {
        const std::size_t m = start + t < p ? start + t : start + t - p;
        rep.energy[m] += -2.0 * ring[m] * rep.field[m * n + i];
        ring[m] = static_cast<std::int8_t>(-ring[m]);
        const double ds = 2.0 * ring[m];
        double* fm = rep.field.data() + m * n;
        for (std::size_t k = 0; k < n; ++k) fm[k] += ki[k] * ds;
      }
    }
  }
}

}  // namespace detail

// One Swendsen-Wang sweep along imaginary time for every site of `state`.
inline void time_cluster_sweep(PimcState& state, double j_perp, double beta_eff, const IsingForm& f, double j_scale,
                               Stream& rng) {
  require(j_perp >= 0, "time_cluster_sweep: j_perp must be >= 0");
  require(state.n == f.n, "time_cluster_sweep: dimension mismatch");
  detail::PimcReplica rep{state, {}, {}};
  rep.refresh(f);
  std::vector<std::uint8_t> bond;
  detail::cluster_sweep(rep, f, j_perp, beta_eff, j_scale, rng, bond);
  state = std::move(rep.st);
}

struct PimcConfig {
  std::size_t p_slices = 32;
  std::size_t steps = 2048;
  double gamma_start = 1.0;
  double gamma_end = 0.0;
  double gamma_floor = 1e-8;  // last geometric value before a terminal gamma_end of 0
  double j_start = 10.0;
  double j_end = 1e8;
  std::size_t r0 = 32;
  double temperature = 1.0;
  std::size_t sweeps_per_step = 1;

  void validate() const {
    require(p_slices >= 2, "PimcConfig: need at least 2 slices");
    require(steps >= 1, "PimcConfig: steps must be >= 1");
    require(gamma_start > 0 && gamma_end >= 0 && gamma_end <= gamma_start, "PimcConfig: invalid gamma range");
    require(gamma_floor > 0 && gamma_floor <= gamma_start, "PimcConfig: invalid gamma floor");
    require(j_start > 0 && j_end >= j_start, "PimcConfig: invalid j range");
    require(r0 >= 1, "PimcConfig: r0 must be >= 1");
    require(temperature > 0, "PimcConfig: temperature must be > 0");
  }

  double gamma_at(std::size_t i) const {
    if (i == steps) return gamma_end;
    const double lo = gamma_end > 0 ? gamma_end : gamma_floor;
    return gamma_start * std::pow(lo / gamma_start, static_cast<double>(i) / static_cast<double>(steps));
  }
  double j_at(std::size_t i) const {
    if (i == steps) return j_end;
    return j_start * std::pow(j_end / j_start, static_cast<double>(i) / static_cast<double>(steps));
  }
};

struct PimcStep {
  std::size_t step;
  double gamma;
  double j_scale;
  double best_energy;
  double mean_alignment;
};

struct PimcResult {
  Bits bits;
  double energy = std::numeric_limits<double>::infinity();
  std::vector<PimcStep> diagnostics;
};

inline PimcResult pimc_anneal(const QuboProblem& q, const PimcConfig& cfg, std::uint64_t seed,
                              bool diagnostics = true) {
  cfg.validate();
  const IsingForm f = qubo_to_ising(q);
  const std::size_t n = q.n, p = cfg.p_slices;
  const double beta_eff = 1.0 / (static_cast<double>(p) * cfg.temperature);

  std::vector<detail::PimcReplica> pop(cfg.r0);
  for (std::size_t r = 0; r < cfg.r0; ++r) {
    Stream rng = Stream::make(seed, detail::kPimcInitTag, r);
    pop[r].st = PimcState(n, p);
    for (auto& s : pop[r].st.spins) s = (rng() >> 63) ? 1 : -1;
    pop[r].refresh(f);
  }

  PimcResult res;
  res.bits.assign(n, 0);
  std::size_t best_r = 0, best_m = 0;
  bool improved = false;
  auto track_best = [&] {
    for (std::size_t r = 0; r < pop.size(); ++r)
      for (std::size_t m = 0; m < p; ++m)
        if (pop[r].energy[m] < res.energy) {
          res.energy = pop[r].energy[m];
          best_r = r;
          best_m = m;
          improved = true;
        }
    if (improved) {
      for (std::size_t i = 0; i < n; ++i) res.bits[i] = pop[best_r].st.at(i, best_m) > 0;
      improved = false;
    }
  };
  track_best();

  std::vector<std::uint8_t> bond;
  std::vector<double> weight_energy;
  std::vector<detail::PimcReplica> spare;
  double prev_j = 0, prev_perp = 0;
  for (std::size_t i = 0; i <= cfg.steps; ++i) {
    const double gamma = cfg.gamma_at(i), js = cfg.j_at(i);
    const double j_perp = trotter_couplings(gamma, p, cfg.temperature).j_perp;
    if (i > 0) {
      // Ratio of Boltzmann factors between consecutive parameter sets.  A
      // terminal infinite coupling cannot be weighed; only the problem
      // term enters there.
      weight_energy.resize(pop.size());
      for (std::size_t r = 0; r < pop.size(); ++r) {
        const double esum = std::accumulate(pop[r].energy.begin(), pop[r].energy.end(), 0.0);
        double w = (js - prev_j) * esum;
        if (!std::isinf(j_perp)) w -= (j_perp - prev_perp) * static_cast<double>(pop[r].st.alignment());
        weight_energy[r] = w;
      }
      Stream rng = Stream::make(seed, detail::kPimcResampleTag, i);
      const auto plan = resample_plan(weight_energy, beta_eff, cfg.r0, rng.uniform());
      if (!std::all_of(plan.counts.begin(), plan.counts.end(), [](auto c) { return c == 1; })) {
        spare.resize(cfg.r0);
        std::size_t slot = 0;
        for (std::size_t k = 0; k < pop.size(); ++k)
          for (std::size_t c = 0; c < plan.counts[k]; ++c) spare[slot++] = pop[k];
        std::swap(pop, spare);
      }
    }
    for (std::size_t s = 0; s < cfg.sweeps_per_step; ++s)
      for (std::size_t r = 0; r < pop.size(); ++r) {
        Stream rng = Stream::make(seed, detail::kPimcSweepTag, i, s, r);
        detail::cluster_sweep(pop[r], f, j_perp, beta_eff, js, rng, bond);
      }
    if (i % 256 == 255)
      for (auto& rep : pop) rep.refresh(f);
    track_best();
    if (diagnostics) {
      double align = 0;
      for (const auto& rep : pop) align += static_cast<double>(rep.st.alignment());
      align /= static_cast<double>(pop.size() * n * p);
      res.diagnostics.push_back({i, gamma, js, res.energy, align});
    }
    prev_j = js;
    prev_perp = j_perp;
  }
  res.energy = energy(q, res.bits);
  return res;
}

// Tr exp(-beta (j_scale H_problem + gamma sum_i sigma_x)) by dense diagonalization.
inline double exact_quantum_partition(const IsingForm& f, double gamma, double beta, double j_scale = 1.0) {
  if (f.n > 10) throw CapacityError("exact_quantum_partition: n = " + std::to_string(f.n) + " exceeds 10");
  const Eigen::Index dim = Eigen::Index{1} << f.n;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<std::int8_t> s(f.n);
  for (Eigen::Index b = 0; b < dim; ++b) {
    for (std::size_t i = 0; i < f.n; ++i) s[i] = (b >> i) & 1 ? 1 : -1;
    h(b, b) = j_scale * f.energy(s.data());
    for (std::size_t i = 0; i < f.n; ++i) h(b, b ^ (Eigen::Index{1} << i)) = gamma;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return (-beta * es.eigenvalues().array()).exp().sum();
}

// Discretized Z_P for one spin with field h: Tr T^P with
// T_{s s'} = exp(-beta h s / P) C exp(B s s').
inline double trotter_partition_single_spin(double h, double gamma, double beta, std::size_t p) {
  const double t = 1.0 / beta;
  const auto [j_perp, c] = trotter_couplings(gamma, p, t);
  const double b = j_perp / (static_cast<double>(p) * t);
  Eigen::Matrix2d tm;
  const double spin[2] = {1.0, -1.0};
  for (int a = 0; a < 2; ++a)
    for (int k = 0; k < 2; ++k) tm(a, k) = std::exp(-beta * h * spin[a] / static_cast<double>(p)) * c * std::exp(b * spin[a] * spin[k]);
  Eigen::Matrix2d acc = Eigen::Matrix2d::Identity();
  for (std::size_t m = 0; m < p; ++m) acc = acc * tm;
  return acc.trace();
}

inline void write_pimc_diagnostics(std::ostream& out, const std::vector<PimcStep>& diag) {
  out << "step,gamma,j_scale,best_energy,mean_slice_magnetization_alignment\n";
  out.precision(17);
  for (const auto& d : diag)
    out << d.step << ',' << d.gamma << ',' << d.j_scale << ',' << d.best_energy << ',' << d.mean_alignment << '\n';
}

}  // namespace efpqubo
