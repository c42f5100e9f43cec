#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace efpqubo {

struct RegressionResult {
  Eigen::VectorXd coefficients;
  std::set<std::size_t> support;
  double mse = 0;
  double regularized_loss = 0;
  std::string method;
  bool rank_deficient = false;
  bool converged = true;

  std::size_t nnz() const { return support.size(); }
};

inline double mse_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& c) {
  require(X.rows() == y.size() && X.cols() == c.size(), "mse_loss: dimension mismatch");
  return (y - X * c).squaredNorm();
}

inline std::set<std::size_t> support_of(const Eigen::VectorXd& c) {
  std::set<std::size_t> s;
  for (Eigen::Index a = 0; a < c.size(); ++a)
    if (c[a] != 0) s.insert(static_cast<std::size_t>(a));
  return s;
}

inline RegressionResult make_result(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::VectorXd c,
                                    double penalty, std::string method) {
  RegressionResult r;
  r.mse = mse_loss(X, y, c);
  r.regularized_loss = r.mse + penalty;
  r.support = support_of(c);
  r.coefficients = std::move(c);
  r.method = std::move(method);
  return r;
}

// Least squares restricted to `support`.  Full-rank problems use a
// column-pivoted QR of the restricted design; rank-deficient ones fall back
// to the normal equations with a 1e-10 ridge jitter and are flagged.
inline RegressionResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::set<std::size_t>& support) {
  require(X.rows() == y.size(), "ols: dimension mismatch");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(X.cols());
  bool deficient = false;
  if (!support.empty()) {
    std::vector<Eigen::Index> cols;
    for (auto a : support) {
      require(a < static_cast<std::size_t>(X.cols()), "ols: support index out of range");
      cols.push_back(static_cast<Eigen::Index>(a));
    }
    const Eigen::MatrixXd Xs = X(Eigen::all, cols);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    Eigen::VectorXd cs;
    if (qr.rank() == Xs.cols()) {
      cs = qr.solve(y);
    } else {
      deficient = true;
      Eigen::MatrixXd G = Xs.transpose() * Xs;
      G.diagonal().array() += 1e-10;
      cs = G.ldlt().solve(Xs.transpose() * y);
    }
    for (std::size_t t = 0; t < cols.size(); ++t) c[cols[t]] = cs[static_cast<Eigen::Index>(t)];
  }
  auto r = make_result(X, y, std::move(c), 0.0, "ols");
  r.rank_deficient = deficient;
  return r;
}

inline RegressionResult ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  require(lambda >= 0 && std::isfinite(lambda), "ridge: lambda must be finite and >= 0");
  require(X.rows() == y.size(), "ridge: dimension mismatch");
  if (lambda == 0) {
    std::set<std::size_t> all;
    for (Eigen::Index a = 0; a < X.cols(); ++a) all.insert(static_cast<std::size_t>(a));
    auto r = ols(X, y, all);
    r.method = "ridge";
    return r;
  }
  Eigen::MatrixXd G = X.transpose() * X;
  G.diagonal().array() += lambda;
  Eigen::VectorXd c = G.ldlt().solve(X.transpose() * y);
  const double pen = lambda * c.squaredNorm();
  return make_result(X, y, std::move(c), pen, "ridge");
}

// Cyclic coordinate descent on sum (y - Xc)^2 + lambda sum |c|.  Each update
// is c_a = S(x_a . r_a, lambda/2) / |x_a|^2 with r_a the partial residual.
inline RegressionResult lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                              double tol = 1e-10, std::size_t max_cycles = 100000) {
  require(lambda >= 0 && std::isfinite(lambda), "lasso: lambda must be finite and >= 0");
  require(X.rows() == y.size(), "lasso: dimension mismatch");
  const Eigen::Index k = X.cols();
  const Eigen::VectorXd norms = X.colwise().squaredNorm();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd resid = y;
  const double half = lambda / 2;
  bool converged = false;
  for (std::size_t cycle = 0; cycle < max_cycles && !converged; ++cycle) {
    double max_change = 0;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (norms[a] == 0) continue;
      const double rho = X.col(a).dot(resid) + norms[a] * c[a];
      const double shrunk = std::max(std::abs(rho) - half, 0.0);
      const double next = std::copysign(shrunk, rho) / norms[a];
      const double change = next - c[a];
      if (change != 0) {
        resid -= change * X.col(a);
        c[a] = next;
      }
      max_change = std::max(max_change, std::abs(change));
    }
    converged = max_change < tol;
  }
  for (Eigen::Index a = 0; a < k; ++a)
    if (c[a] == 0) c[a] = 0.0;  // drop negative zeros
  const double pen = lambda * c.lpNorm<1>();
  auto r = make_result(X, y, std::move(c), pen, "lasso");
  r.converged = converged;
  return r;
}

// OLS on the support of a prior solution.  When the prior coefficients are
// given, the result never has a larger mse than they do.
inline RegressionResult refine(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::set<std::size_t>& support) {
  auto r = ols(X, y, support);
  r.method = "refined";
  return r;
}

inline RegressionResult refine(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& prior) {
  auto r = refine(X, y, support_of(prior));
  const double prior_mse = mse_loss(X, y, prior);
  if (prior_mse < r.mse) {
    // Rounding in the solve lost to an already-optimal prior; keep the prior.
    r.coefficients = prior;
    r.mse = prior_mse;
    r.regularized_loss = prior_mse;
    r.support = support_of(prior);
  }
  return r;
}

// Coefficients of the form step * k with |k| <= kmax: what a sign-split
// powers-of-two layout over [i_min, i_max] can represent.
struct DyadicGrid {
  double step = 0.125;
  long kmax = 63;
  static DyadicGrid powers_of_two(int i_min, int i_max) {
    require(i_min <= i_max && i_max - i_min < 40, "DyadicGrid: bad exponent range");
    return {std::ldexp(1.0, i_min), (1L << (i_max - i_min + 1)) - 1};
  }
};

// Exact least squares over a DyadicGrid, by Schnorr-Euchner enumeration on
// the Cholesky factor of the Gram matrix.  G = X^T X, b = X^T y, yy = y^T y.
// A 1e-12 relative jitter keeps the factor defined for singular G.
inline std::pair<double, Eigen::VectorXd> grid_least_squares(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                                              double yy, const DyadicGrid& grid) {
  const Eigen::Index k = G.rows();
  require(G.cols() == k && b.size() == k, "grid_least_squares: dimension mismatch");
  auto loss = [&](const Eigen::VectorXd& c) { return yy - 2.0 * c.dot(b) + c.dot(G * c); };
  Eigen::VectorXd best = Eigen::VectorXd::Zero(k);
  double best_loss = loss(best);
  if (k == 0) return {best_loss, best};

  // Work in integer units u = c / step.
  const double s = grid.step;
  Eigen::MatrixXd A = G * (s * s);
  const double jitter = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);
  A.diagonal().array() += jitter;
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  require(llt.info() == Eigen::Success, "grid_least_squares: factorization failed");
  const Eigen::MatrixXd R = llt.matrixU();
  const Eigen::VectorXd centre = llt.solve(b * s);

  // Babai rounding gives the starting radius.
  {
    Eigen::VectorXd u(k);
    for (Eigen::Index i = k - 1; i >= 0; --i) {
      double z = centre[i];
      for (Eigen::Index j = i + 1; j < k; ++j) z -= R(i, j) * (u[j] - centre[j]) / R(i, i);
      u[i] = std::clamp(std::round(z), static_cast<double>(-grid.kmax), static_cast<double>(grid.kmax));
    }
    const Eigen::VectorXd c = u * s;
    if (loss(c) < best_loss) {
      best_loss = loss(c);
      best = c;
    }
  }
  // Quadratic form of the jittered problem, relative to its continuous minimum.
  auto form = [&](const Eigen::VectorXd& u) { return (R * (u - centre)).squaredNorm(); };
  double radius = form(best / s);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  std::vector<double> partial(static_cast<std::size_t>(k) + 1, 0.0);
  auto search = [&](auto&& self, Eigen::Index i) -> void {
    double z = centre[i];
    for (Eigen::Index j = i + 1; j < k; ++j) z -= R(i, j) * (u[j] - centre[j]) / R(i, i);
    const double above = partial[static_cast<std::size_t>(i) + 1];
    const double lo = static_cast<double>(-grid.kmax), hi = static_cast<double>(grid.kmax);
    const double first = std::clamp(std::round(z), lo, hi);
    // Visit first, then alternate outwards while either side is in the box.
    for (long step = 0;; ++step) {
      bool any = false;
      for (int side : {0, 1}) {
        if (step == 0 && side == 1) continue;
        const double v = step == 0 ? first : first + (side ? step : -step);
        if (v < lo || v > hi) continue;
        const double t = R(i, i) * (v - z);
        const double cost = above + t * t;
        if (cost > radius) continue;
        any = true;
        u[i] = v;
        partial[static_cast<std::size_t>(i)] = cost;
        if (i == 0) {
          const Eigen::VectorXd c = u * s;
          const double l = loss(c);
          if (l < best_loss) {
            best_loss = l;
            best = c;
          }
          radius = std::min(radius, cost);
        } else {
          self(self, i - 1);
        }
      }
      // Costs grow with |v - z| on each side, so once both sides fail the
      // radius (or leave the box) nothing further out can succeed.
      if (!any && step > 0) {
        const double dl = first - step - z, dr = first + step - z;
        const double near = std::min(first - step >= lo ? std::abs(dl) : INFINITY,
                                     first + step <= hi ? std::abs(dr) : INFINITY);
        if (!std::isfinite(near) || above + R(i, i) * R(i, i) * near * near > radius) break;
      }
    }
  };
  search(search, k - 1);
  return {best_loss, best};
}

struct Quantiles {
  double median, q25, q75;
};

// Linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> v, double q) {
  require(!v.empty(), "quantile: empty list");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Quantiles quantile_summary(const std::vector<double>& v) {
  require(!v.empty(), "quantile_summary: empty list");
  return {quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)};
}

}  // namespace efpqubo
