#include <cmath>

#include <gtest/gtest.h>

#include <efpqubo/efp.hpp>
#include <efpqubo/regress.hpp>
#include <efpqubo/rng.hpp>

using namespace efpqubo;

namespace {

Eigen::MatrixXd random_matrix(Stream& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

std::set<std::size_t> all_of(Eigen::Index k) {
  std::set<std::size_t> s;
  for (Eigen::Index a = 0; a < k; ++a) s.insert(static_cast<std::size_t>(a));
  return s;
}

}  // namespace

TEST(MseLoss, Examples) {
  Eigen::MatrixXd X(2, 1);
  X << 1, 1;
  Eigen::VectorXd y(2);
  y << 1, 2;
  EXPECT_EQ(mse_loss(X, y, Eigen::VectorXd::Constant(1, 1.5)), 0.5);
  EXPECT_EQ(mse_loss(X, y, Eigen::VectorXd::Zero(1)), 5.0);
  EXPECT_THROW(mse_loss(X, y, Eigen::VectorXd::Zero(2)), ParameterError);
}

TEST(Ols, Examples) {
  Stream rng(3);
  const auto X = random_matrix(rng, 4, 4);
  const Eigen::VectorXd y = random_matrix(rng, 4, 1).col(0);
  const auto full = ols(X, y, all_of(4));
  EXPECT_NEAR(full.mse, 0.0, 1e-20);
  EXPECT_FALSE(full.rank_deficient);
  const auto none = ols(X, y, {});
  EXPECT_EQ(none.coefficients, Eigen::VectorXd::Zero(4));
  EXPECT_EQ(none.mse, y.squaredNorm());
  EXPECT_EQ(none.nnz(), 0u);
  EXPECT_THROW(ols(X, y, {7}), ParameterError);
}

TEST(Ols, MatchesNormalEquationsOnSupport) {
  Stream rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto X = random_matrix(rng, 40, 6);
    const Eigen::VectorXd y = random_matrix(rng, 40, 1).col(0);
    const std::set<std::size_t> s{0, 2, 5};
    const auto r = ols(X, y, s);
    const Eigen::MatrixXd Xs = X(Eigen::all, std::vector<Eigen::Index>{0, 2, 5});
    const Eigen::VectorXd want = (Xs.transpose() * Xs).inverse() * Xs.transpose() * y;
    EXPECT_NEAR(r.coefficients[0], want[0], 1e-10);
    EXPECT_NEAR(r.coefficients[2], want[1], 1e-10);
    EXPECT_NEAR(r.coefficients[5], want[2], 1e-10);
    EXPECT_EQ(r.coefficients[1], 0.0);
    EXPECT_EQ(r.support, s);
    EXPECT_NEAR(r.mse, mse_loss(X, y, r.coefficients), 1e-12);
    // Residual orthogonal to the support columns.
    EXPECT_LT((Xs.transpose() * (y - X * r.coefficients)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Ols, RankDeficientIsFlagged) {
  Stream rng(7);
  Eigen::MatrixXd X = random_matrix(rng, 10, 3);
  X.col(2) = 2 * X.col(0);
  const Eigen::VectorXd y = X.col(0) + X.col(1);
  const auto r = ols(X, y, all_of(3));
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_LT(r.mse, 1e-12 * y.squaredNorm());
}

TEST(Ols, RelationACoefficientIsHalf) {
  const auto rel = find_relation('a');
  const auto dm = design_matrix(generate_events(50, 2, 12, 500, 0.5, 9), rel);
  const auto r = ols(dm.X, dm.y, {0});
  EXPECT_NEAR(r.coefficients[0], 0.5, 1e-8);
}

TEST(Ridge, Examples) {
  Eigen::MatrixXd X(1, 1);
  X << 1;
  Eigen::VectorXd y(1);
  y << 1;
  EXPECT_DOUBLE_EQ(ridge(X, y, 1).coefficients[0], 0.5);
  EXPECT_DOUBLE_EQ(ridge(X, y, 1).regularized_loss, 0.25 + 0.25);
  Stream rng(11);
  const auto A = random_matrix(rng, 30, 5);
  const Eigen::VectorXd b = random_matrix(rng, 30, 1).col(0);
  EXPECT_LT((ridge(A, b, 0).coefficients - ols(A, b, all_of(5)).coefficients).norm(), 1e-10);
  EXPECT_LT(ridge(A, b, 1e12).coefficients.norm(), 1e-6);
  EXPECT_THROW(ridge(A, b, -1), ParameterError);
}

TEST(Ridge, StationarityAndContinuity) {
  Stream rng(13);
  const auto X = random_matrix(rng, 30, 5);
  const Eigen::VectorXd y = random_matrix(rng, 30, 1).col(0);
  for (double lambda : {0.01, 0.3, 5.0}) {
    const auto r = ridge(X, y, lambda);
    const Eigen::VectorXd grad = -2 * X.transpose() * (y - X * r.coefficients) + 2 * lambda * r.coefficients;
    EXPECT_LT(grad.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(r.nnz(), 5u);
    const auto near = ridge(X, y, lambda * (1 + 1e-6));
    EXPECT_LT((near.coefficients - r.coefficients).norm(), 1e-4 * (1 + r.coefficients.norm()));
  }
}

TEST(Lasso, Examples) {
  Eigen::MatrixXd X(1, 1);
  X << 1;
  Eigen::VectorXd y(1);
  y << 1;
  EXPECT_DOUBLE_EQ(lasso(X, y, 1).coefficients[0], 0.5);
  Stream rng(17);
  const auto A = random_matrix(rng, 30, 5);
  const Eigen::VectorXd b = random_matrix(rng, 30, 1).col(0);
  EXPECT_NEAR(lasso(A, b, 0).mse, ols(A, b, all_of(5)).mse, 1e-8);
  const double lmax = 2 * (A.transpose() * b).cwiseAbs().maxCoeff();
  const auto zero = lasso(A, b, lmax);
  EXPECT_EQ(zero.nnz(), 0u);
  EXPECT_EQ(zero.coefficients, Eigen::VectorXd::Zero(5));
  EXPECT_GT(lasso(A, b, 0.9 * lmax).nnz(), 0u);
  EXPECT_THROW(lasso(A, b, NAN), ParameterError);
}

TEST(Lasso, KktConditions) {
  Stream rng(19);
  for (int t = 0; t < 20; ++t) {
    const auto X = random_matrix(rng, 40, 6);
    const Eigen::VectorXd y = random_matrix(rng, 40, 1).col(0);
    const double lmax = 2 * (X.transpose() * y).cwiseAbs().maxCoeff();
    const double lambda = lmax * rng.uniform();
    const auto r = lasso(X, y, lambda);
    EXPECT_TRUE(r.converged);
    const Eigen::VectorXd corr = X.transpose() * (y - X * r.coefficients);
    for (Eigen::Index a = 0; a < 6; ++a) {
      if (r.coefficients[a] != 0)
        EXPECT_NEAR(corr[a], std::copysign(lambda / 2, r.coefficients[a]), 1e-6);
      else
        EXPECT_LE(std::abs(corr[a]), lambda / 2 + 1e-6);
    }
    EXPECT_NEAR(r.regularized_loss, r.mse + lambda * r.coefficients.lpNorm<1>(), 1e-12);
    EXPECT_EQ(r.support, support_of(r.coefficients));
  }
}

TEST(Lasso, NonConvergenceIsFlagged) {
  Stream rng(23);
  const auto X = random_matrix(rng, 20, 4);
  const Eigen::VectorXd y = random_matrix(rng, 20, 1).col(0);
  EXPECT_FALSE(lasso(X, y, 0.01, 1e-10, 1).converged);
}

TEST(Refine, NeverIncreasesMse) {
  Stream rng(29);
  for (int t = 0; t < 200; ++t) {
    const auto X = random_matrix(rng, 25, 5);
    const Eigen::VectorXd y = random_matrix(rng, 25, 1).col(0);
    Eigen::VectorXd prior = Eigen::VectorXd::Zero(5);
    for (Eigen::Index a = 0; a < 5; ++a)
      if (rng.below(2)) prior[a] = std::ldexp(static_cast<double>(rng.below(16)) - 8, -2);
    const auto r = refine(X, y, prior);
    EXPECT_LE(r.mse, mse_loss(X, y, prior));
    for (auto a : r.support) EXPECT_NE(prior[static_cast<Eigen::Index>(a)], 0.0);
  }
}

TEST(Refine, ExactPriorIsKept) {
  const auto rel = find_relation('a');
  const auto dm = design_matrix(generate_events(100, 2, 12, 500, 0.5, 31), rel);
  Eigen::VectorXd prior = Eigen::VectorXd::Zero(dm.X.cols());
  prior[0] = 0.5;
  const auto r = refine(dm.X, dm.y, prior);
  EXPECT_LE(r.mse, mse_loss(dm.X, dm.y, prior));
  EXPECT_EQ(r.nnz(), 1u);
  EXPECT_NEAR(r.coefficients[0], 0.5, 1e-12);
  EXPECT_EQ(refine(dm.X, dm.y, std::set<std::size_t>{}).mse, dm.y.squaredNorm());
}

// Plain enumeration of every grid point.
double grid_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const DyadicGrid& grid) {
  const Eigen::Index k = X.cols();
  const long span = 2 * grid.kmax + 1;
  long total = 1;
  for (Eigen::Index a = 0; a < k; ++a) total *= span;
  double best = INFINITY;
  Eigen::VectorXd c(k);
  for (long code = 0; code < total; ++code) {
    long t = code;
    for (Eigen::Index a = 0; a < k; ++a, t /= span) c[a] = grid.step * static_cast<double>(t % span - grid.kmax);
    best = std::min(best, (y - X * c).squaredNorm());
  }
  return best;
}

TEST(GridLeastSquares, MatchesEnumeration) {
  Stream rng(31);
  const DyadicGrid grid = DyadicGrid::powers_of_two(-1, 1);  // step 1/2, |k| <= 7
  for (int t = 0; t < 40; ++t) {
    const Eigen::Index k = 1 + t % 3;
    Eigen::MatrixXd X = random_matrix(rng, 12, k);
    if (t % 4 == 3 && k > 1) X.col(k - 1) = X.col(0) * 2.0;  // exactly singular Gram
    const Eigen::VectorXd y = random_matrix(rng, 12, 1).col(0) * 3.0;
    const auto [loss, c] = grid_least_squares(X.transpose() * X, X.transpose() * y, y.squaredNorm(), grid);
    const double want = grid_oracle(X, y, grid);
    EXPECT_NEAR(loss, want, 1e-9 * (1 + want)) << "trial " << t;
    EXPECT_NEAR((y - X * c).squaredNorm(), loss, 1e-9 * (1 + loss));
    for (Eigen::Index a = 0; a < k; ++a) {
      EXPECT_LE(std::abs(c[a]), grid.step * static_cast<double>(grid.kmax));
      EXPECT_EQ(c[a] / grid.step, std::round(c[a] / grid.step));
    }
  }
}

TEST(GridLeastSquares, ExactDyadicFitIsFound) {
  Stream rng(5);
  const Eigen::MatrixXd X = random_matrix(rng, 30, 3);
  Eigen::VectorXd truth(3);
  truth << 1.0, -1.5, 0.625;
  const Eigen::VectorXd y = X * truth;
  const auto [loss, c] = grid_least_squares(X.transpose() * X, X.transpose() * y, y.squaredNorm(), DyadicGrid{});
  EXPECT_LT(loss, 1e-20);
  EXPECT_EQ(c, truth);
}

TEST(GridLeastSquares, PowersOfTwoGrid) {
  const auto g = DyadicGrid::powers_of_two(-3, 2);
  EXPECT_EQ(g.step, 0.125);
  EXPECT_EQ(g.kmax, 63);
  EXPECT_THROW(DyadicGrid::powers_of_two(2, 1), ParameterError);
}

TEST(Quantiles, Examples) {
  EXPECT_EQ(quantile_summary({1, 2, 3, 4}).median, 2.5);
  const auto q = quantile_summary({0, 1, 2, 3, 4});
  EXPECT_EQ(q.median, 2);
  EXPECT_EQ(q.q25, 1);
  EXPECT_EQ(q.q75, 3);
  const auto c = quantile_summary({7, 7, 7});
  EXPECT_EQ(c.median, 7);
  EXPECT_EQ(c.q25, 7);
  EXPECT_EQ(c.q75, 7);
  EXPECT_EQ(quantile_summary({4, 0, 3, 1, 2}).q25, 1);
  EXPECT_THROW(quantile_summary({}), ParameterError);
}
