#include <cmath>

#include <gtest/gtest.h>

#include <efpqubo/qubo.hpp>
#include <efpqubo/rng.hpp>

using namespace efpqubo;

namespace {

Eigen::MatrixXd random_matrix(Stream& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

Bits random_bits(Stream& rng, std::size_t n) {
  Bits x(n);
  for (auto& b : x) b = static_cast<std::uint8_t>(rng.below(2));
  return x;
}

QuboProblem random_qubo(Stream& rng, std::size_t n) {
  QuboProblem q(n, rng.normal());
  for (auto& c : q.coeffs) c = rng.normal();
  return q;
}

// Loss computed from decoded coefficients, with no reference to J.
double direct_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BitLayout& l, double lambda,
                   const Bits& x) {
  const auto c = decode(x, l);
  const Eigen::VectorXd cv = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  return (y - X * cv).squaredNorm() + lambda * reg_penalty(x, l);
}

}  // namespace

TEST(Qubo, EnergyExamples) {
  QuboProblem q(2, 1.5);
  q.add(0, 0, 2);
  q.add(1, 1, -1);
  q.add(0, 1, 3);
  EXPECT_EQ(q.J(0, 1), 3.0);
  EXPECT_EQ(q.J(1, 0), 3.0);
  EXPECT_EQ(energy(q, Bits{0, 0}), 1.5);
  EXPECT_EQ(energy(q, Bits{1, 0}), 3.5);
  EXPECT_EQ(energy(q, Bits{0, 1}), 0.5);
  EXPECT_EQ(energy(q, Bits{1, 1}), 5.5);
  EXPECT_THROW(energy(q, Bits{1}), ParameterError);
}

TEST(Qubo, DeltaEnergyMatchesDifference) {
  Stream rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto q = random_qubo(rng, 9);
    auto x = random_bits(rng, 9);
    for (std::size_t i = 0; i < 9; ++i) {
      const double d = delta_energy(q, x, i), before = energy(q, x);
      x[i] ^= 1u;
      EXPECT_NEAR(energy(q, x) - before, d, 1e-12);
      x[i] ^= 1u;
    }
  }
  const auto q = random_qubo(rng, 3);
  EXPECT_THROW(delta_energy(q, Bits{0, 0, 0}, 3), ParameterError);
}

TEST(Qubo, DenseCopyIsSymmetric) {
  Stream rng(13);
  const auto q = random_qubo(rng, 7);
  const DenseQubo d(q);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(d.diag[i], q.J(i, i));
    EXPECT_EQ(d.row(i)[i], 0.0);
    for (std::size_t j = 0; j < 7; ++j)
      if (i != j) EXPECT_EQ(d.row(i)[j], q.J(i, j));
  }
}

TEST(Assemble, ReproducesLossForEveryScheme) {
  Stream rng(17);
  for (auto s : {Scheme::plain, Scheme::l1_mod, Scheme::l0_single, Scheme::l0_double}) {
    for (double lambda : {0.0, 0.01, 0.7}) {
      const auto X = random_matrix(rng, 20, 3);
      const Eigen::VectorXd y = random_matrix(rng, 20, 1).col(0);
      const auto l = BitLayout::powers_of_two(s, 3, -2, 1);
      const auto q = assemble(X, y, l, lambda);
      EXPECT_EQ(q.n, l.total_bits());
      for (int t = 0; t < 200; ++t) {
        const auto x = random_bits(rng, q.n);
        const double want = direct_loss(X, y, l, lambda, x);
        EXPECT_NEAR(energy(q, x), want, 1e-10 * (1 + std::abs(want))) << to_string(s);
      }
      EXPECT_DOUBLE_EQ(energy(q, Bits(q.n, 0)), y.squaredNorm());
    }
  }
}

TEST(Assemble, NonSplitAndCustomLayouts) {
  Stream rng(19);
  const auto X = random_matrix(rng, 10, 2);
  const Eigen::VectorXd y = random_matrix(rng, 10, 1).col(0);
  for (auto s : {Scheme::plain, Scheme::l1_mod, Scheme::l0_single}) {
    const auto l = BitLayout::custom(s, 2, {-2, -1, 1, 2}, false);
    const auto q = assemble(X, y, l, 0.3);
    for (std::uint64_t st = 0; st < (std::uint64_t{1} << q.n); st += 7) {
      Bits x(q.n);
      for (std::size_t i = 0; i < q.n; ++i) x[i] = (st >> i) & 1u;
      const double want = direct_loss(X, y, l, 0.3, x);
      EXPECT_NEAR(energy(q, x), want, 1e-10 * (1 + want));
    }
  }
}

TEST(Assemble, SingleColumnDumbbellExample) {
  // y = x/2 with x = (1, 2): the encoding c = 1/2 reaches zero loss.
  Eigen::MatrixXd X(2, 1);
  X << 1, 2;
  const Eigen::VectorXd y = X.col(0) / 2;
  const auto l = BitLayout::powers_of_two(Scheme::l0_double, 1, -1, 0);
  const auto q = assemble(X, y, l, 0.01);
  const BitIndexMap map(l);
  Bits x(q.n, 0);
  x[map.index(0, Role::p, 0)] = 1;
  EXPECT_NEAR(energy(q, x), 0.01, 1e-15);
  const auto gs = brute_force(q);
  EXPECT_EQ(decode(gs.bits, l)[0], 0.5);
  EXPECT_NEAR(gs.energy, 0.01, 1e-15);
}

TEST(Assemble, RejectsBadInput) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  const auto l = BitLayout::powers_of_two(Scheme::l0_double, 2);
  EXPECT_THROW(assemble(X, y, l, -1), ParameterError);
  EXPECT_THROW(assemble(X, y, l, NAN), ParameterError);
  EXPECT_THROW(assemble(X, y, BitLayout::powers_of_two(Scheme::l0_double, 3), 0.1), ParameterError);
  EXPECT_THROW(assemble(X, Eigen::VectorXd::Ones(2), l, 0.1), ParameterError);
}

TEST(BruteForce, MatchesNaiveEnumeration) {
  Stream rng(23);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng.below(11);
    const auto q = random_qubo(rng, n);
    double best = INFINITY;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
      Bits x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = (s >> i) & 1u;
      best = std::min(best, energy(q, x));
    }
    const auto r = brute_force(q);
    EXPECT_NEAR(r.energy, best, 1e-10);
    EXPECT_EQ(r.energy, energy(q, r.bits));
    EXPECT_EQ(r.degeneracy, 1u);
  }
}

TEST(BruteForce, CountsDegenerateGroundStates) {
  QuboProblem q(4, 0);
  EXPECT_EQ(brute_force(q).degeneracy, 16u);
  q.add(0, 0, -1);
  q.add(1, 1, -1);
  q.add(0, 1, 1);
  const auto r = brute_force(q);
  EXPECT_EQ(r.energy, -1.0);
  EXPECT_EQ(r.degeneracy, 3u * 4u);
  EXPECT_THROW(brute_force(QuboProblem(25)), CapacityError);
}

TEST(QuboJson, RoundTrip) {
  Stream rng(29);
  const auto q = random_qubo(rng, 6);
  const auto back = qubo_from_json(qubo_to_json(q));
  EXPECT_EQ(back.n, q.n);
  EXPECT_EQ(back.offset, q.offset);
  EXPECT_EQ(back.coeffs, q.coeffs);
  auto bad = qubo_to_json(q);
  bad["terms"].push_back({9, 0, 1.0});
  EXPECT_THROW(qubo_from_json(bad), ParameterError);
}
