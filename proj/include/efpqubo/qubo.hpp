#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "encoding.hpp"
#include "errors.hpp"

namespace efpqubo {

// energy(x) = offset + sum_{i >= j} J_ij x_i x_j, J stored packed row-major
// lower-triangular: row i holds J_i0 .. J_ii.
struct QuboProblem {
  std::size_t n = 0;
  std::vector<double> coeffs;
  double offset = 0;

  QuboProblem() = default;
  explicit QuboProblem(std::size_t n_bits, double off = 0) : n(n_bits), coeffs(n_bits * (n_bits + 1) / 2, 0.0), offset(off) {}

  static std::size_t slot(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

  double J(std::size_t i, std::size_t j) const { return i >= j ? coeffs[slot(i, j)] : coeffs[slot(j, i)]; }

  // Order of (i, j) does not matter; i == j is the linear term.
  void add(std::size_t i, std::size_t j, double v) {
    if (i < j) std::swap(i, j);
    coeffs[slot(i, j)] += v;
  }
};

inline void check_bits(const QuboProblem& q, std::span<const std::uint8_t> x) {
  require(x.size() == q.n, "qubo: bitstring length " + std::to_string(x.size()) + " != n " + std::to_string(q.n));
}

inline double energy(const QuboProblem& q, std::span<const std::uint8_t> x) {
  check_bits(q, x);
  double e = q.offset;
  for (std::size_t i = 0; i < q.n; ++i) {
    if (!x[i]) continue;
    const double* row = q.coeffs.data() + QuboProblem::slot(i, 0);
    for (std::size_t j = 0; j <= i; ++j)
      if (x[j]) e += row[j];
  }
  return e;
}

inline double delta_energy(const QuboProblem& q, std::span<const std::uint8_t> x, std::size_t i) {
  check_bits(q, x);
  require(i < q.n, "delta_energy: index out of range");
  double f = q.J(i, i);
  for (std::size_t k = 0; k < q.n; ++k)
    if (k != i && x[k]) f += q.J(i, k);
  return x[i] ? -f : f;
}

// Full symmetric copy for solvers that need fast row access.
struct DenseQubo {
  std::size_t n = 0;
  std::vector<double> diag;
  std::vector<double> w;  // n*n, symmetric, zero diagonal
  double offset = 0;

  explicit DenseQubo(const QuboProblem& q) : n(q.n), diag(q.n), w(q.n * q.n, 0.0), offset(q.offset) {
    for (std::size_t i = 0; i < n; ++i) {
      diag[i] = q.J(i, i);
      for (std::size_t j = 0; j < i; ++j) w[i * n + j] = w[j * n + i] = q.J(i, j);
    }
  }
  const double* row(std::size_t i) const { return w.data() + i * n; }
};

inline QuboProblem assemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BitLayout& layout,
                            double lambda) {
  require(lambda >= 0 && std::isfinite(lambda), "assemble: lambda must be finite and >= 0");
  require(static_cast<std::size_t>(X.cols()) == layout.k_coeffs,
          "assemble: X has " + std::to_string(X.cols()) + " columns, layout expects " +
              std::to_string(layout.k_coeffs));
  require(X.rows() == y.size(), "assemble: X rows != y length");
  layout.validate();

  const Eigen::MatrixXd G = X.transpose() * X;
  const Eigen::VectorXd h = X.transpose() * y;
  QuboProblem q(layout.total_bits(), y.squaredNorm());

  // Signed weight and owning coefficient of every value bit.
  const std::size_t stride = layout.bits_per_coeff(), vb = layout.value_bits(), m = layout.m();
  std::vector<std::size_t> bit, owner;
  std::vector<double> weight;
  for (std::size_t a = 0; a < layout.k_coeffs; ++a)
    for (std::size_t t = 0; t < vb; ++t) {
      bit.push_back(a * stride + t);
      owner.push_back(a);
      weight.push_back(t < m ? layout.g[t] : -layout.g[t - m]);
    }
  for (std::size_t u = 0; u < bit.size(); ++u) {
    const auto a = static_cast<Eigen::Index>(owner[u]);
    q.add(bit[u], bit[u], weight[u] * weight[u] * G(a, a) - 2 * weight[u] * h[a]);
    for (std::size_t v = 0; v < u; ++v)
      q.add(bit[u], bit[v], 2 * weight[u] * weight[v] * G(a, static_cast<Eigen::Index>(owner[v])));
  }

  if (lambda == 0 || layout.scheme == Scheme::plain) return q;
  const double cp = layout.cross_penalty;
  for (std::size_t a = 0; a < layout.k_coeffs; ++a) {
    const std::size_t base = a * stride;
    switch (layout.scheme) {
      case Scheme::l1_mod:
        for (std::size_t t = 0; t < vb; ++t) q.add(base + t, base + t, lambda * std::abs(layout.g[t % m]));
        break;
      case Scheme::l0_single: {
        const std::size_t r = base + vb;
        q.add(r, r, lambda);
        for (std::size_t t = 0; t < vb; ++t) {
          q.add(base + t, base + t, lambda);
          q.add(base + t, r, -lambda);
        }
        break;
      }
      default: {
        const std::size_t r = base + vb, qa = base + vb + 1;
        q.add(qa, qa, lambda);
        q.add(r, r, lambda);
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t p = base + i, n = base + m + i;
          q.add(p, p, lambda);
          q.add(qa, p, cp * lambda);
          q.add(r, p, -lambda);
          q.add(n, n, lambda);
          q.add(r, n, cp * lambda);
          q.add(qa, n, -lambda);
          q.add(p, n, -2 * lambda);
        }
      }
    }
  }
  return q;
}

struct BruteForceResult {
  Bits bits;
  double energy = 0;
  std::uint64_t degeneracy = 0;
};

// Gray-code enumeration with incremental local fields.  Ties are counted with
// a tolerance scaled to the problem's coefficient magnitude.
inline BruteForceResult brute_force(const QuboProblem& q) {
  if (q.n > 24) throw CapacityError("brute_force: n = " + std::to_string(q.n) + " exceeds 24");
  const DenseQubo d(q);
  double scale = std::abs(q.offset);
  for (double c : q.coeffs) scale += std::abs(c);
  const double tol = 1e-10 * std::max(1.0, scale);

  Bits x(q.n, 0), best = x;
  std::vector<double> field(q.n, 0.0);
  double e = q.offset, best_e = e;
  std::uint64_t count = 1;
  const std::uint64_t total = std::uint64_t{1} << q.n;
  for (std::uint64_t s = 1; s < total; ++s) {
    const auto i = static_cast<std::size_t>(std::countr_zero(s));
    const double f = d.diag[i] + field[i];
    const double sgn = x[i] ? -1.0 : 1.0;
    e += sgn * f;
    x[i] ^= 1u;
    const double* wi = d.row(i);
    for (std::size_t k = 0; k < q.n; ++k) field[k] += sgn * wi[k];
    if (e < best_e - tol) {
      best_e = e;
      best = x;
      count = 1;
    } else if (e <= best_e + tol) {
      ++count;
    }
  }
  return {best, energy(q, best), count};
}

inline nlohmann::json qubo_to_json(const QuboProblem& q) {
  nlohmann::json terms = nlohmann::json::array();
  for (std::size_t i = 0; i < q.n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (const double v = q.J(i, j); v != 0) terms.push_back({i, j, v});
  return {{"n", q.n}, {"offset", q.offset}, {"terms", terms}};
}

inline QuboProblem qubo_from_json(const nlohmann::json& j) {
  QuboProblem q(j.at("n").get<std::size_t>(), j.at("offset").get<double>());
  for (const auto& t : j.at("terms")) {
    const auto i = t.at(0).get<std::size_t>(), k = t.at(1).get<std::size_t>();
    require(i < q.n && k < q.n, "qubo_from_json: term index out of range");
    q.add(i, k, t.at(2).get<double>());
  }
  return q;
}

}  // namespace efpqubo
