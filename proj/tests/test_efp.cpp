#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include <efpqubo/efp.hpp>

using namespace efpqubo;

namespace {

// Variable-elimination contractions, independent of the nested-sum evaluator.
struct Contractions {
  Eigen::VectorXd z;
  Eigen::MatrixXd t2, t4, t6;  // theta^2, theta^4, theta^6
  Eigen::VectorXd a;           // a_i = sum_j z_j theta_ij^2

  explicit Contractions(const JetEvent& ev) {
    const auto zt = z_theta(ev);
    z = zt.z;
    t2 = zt.theta.array().square().matrix();
    t4 = t2.array().square().matrix();
    t6 = (t4.array() * t2.array()).matrix();
    a = t2 * z;
  }
  double dumbbell() const { return z.dot(t2 * z); }
  double double_dumbbell() const { return z.dot(t4 * z); }
  double triple_dumbbell() const { return z.dot(t6 * z); }
  double wedge() const { return z.dot(a.cwiseProduct(a)); }
  double star4() const { return z.dot(a.array().cube().matrix()); }
  double lollipop() const { return z.dot((t4 * z).cwiseProduct(a)); }
  double triangle() const {
    double s = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      for (Eigen::Index j = 0; j < z.size(); ++j)
        for (Eigen::Index k = 0; k < z.size(); ++k) s += z[i] * z[j] * z[k] * t2(i, j) * t2(i, k) * t2(j, k);
    return s;
  }
  double path4() const { return (z.cwiseProduct(a)).dot(t2 * z.cwiseProduct(a)); }
  double path5() const {
    const Eigen::VectorXd b = t2 * z.cwiseProduct(a);
    return z.dot(b.cwiseProduct(b));
  }
  double by_id(const std::string& id) const {
    if (id == "dumbbell") return dumbbell();
    if (id == "double_dumbbell") return double_dumbbell();
    if (id == "triple_dumbbell") return triple_dumbbell();
    if (id == "wedge") return wedge();
    if (id == "star4") return star4();
    if (id == "lollipop") return lollipop();
    if (id == "triangle") return triangle();
    if (id == "path4") return path4();
    return path5();
  }
};

JetEvent two_equal(double dy) { return JetEvent{{{1, 0, 1}, {1, dy, 1}}}; }

double relative_residual(const DesignMatrix& dm, const Support& s) {
  Eigen::VectorXd fit = Eigen::VectorXd::Zero(dm.y.size());
  for (auto [a, c] : s) fit += c * dm.X.col(static_cast<Eigen::Index>(a));
  return (dm.y - fit).norm() / dm.y.norm();
}

}  // namespace

TEST(ZTheta, SingleParticle) {
  const auto zt = z_theta(JetEvent{{{5, 0.2, 1}}});
  EXPECT_EQ(zt.z[0], 1.0);
  EXPECT_EQ(zt.theta(0, 0), 0.0);
}

TEST(ZTheta, TwoEqualParticles) {
  const auto zt = z_theta(two_equal(1.0));
  EXPECT_DOUBLE_EQ(zt.z[0], 0.5);
  EXPECT_DOUBLE_EQ(zt.z[1], 0.5);
  EXPECT_DOUBLE_EQ(zt.theta(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(zt.theta(1, 0), 1.0);
}

TEST(ZTheta, NormalizedAndSymmetric) {
  for (const auto& ev : generate_events(30, 1, 20, 500, 0.5, 3)) {
    const auto zt = z_theta(ev);
    EXPECT_NEAR(zt.z.sum(), 1.0, 1e-14);
    EXPECT_EQ((zt.theta - zt.theta.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(zt.theta.diagonal().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(EfpValue, DumbbellOnTwoEqualParticles) { EXPECT_DOUBLE_EQ(efp_value(graph("dumbbell"), two_equal(1.0)), 0.5); }

TEST(EfpValue, SingleParticleAndEdgeless) {
  const JetEvent one{{{3, 0.1, 2}}};
  for (const auto& g : graph_catalog()) EXPECT_EQ(efp_value(g, one), 0.0) << g.id;
  for (int n = 1; n <= 4; ++n) {
    Multigraph g{"dots", n, {}};
    EXPECT_EQ(efp_value(g, one), 1.0);
    for (const auto& ev : generate_events(5, 2, 6, 10, 0.5, 8)) EXPECT_NEAR(efp_value(g, ev), 1.0, 1e-14);
  }
}

TEST(EfpValue, MatchesContractionOracle) {
  for (const auto& ev : generate_events(25, 1, 9, 500, 0.5, 17)) {
    const Contractions c(ev);
    for (const auto& g : graph_catalog()) {
      const double want = c.by_id(g.id);
      EXPECT_NEAR(efp_value(g, ev), want, 1e-12 * std::max(1.0, std::abs(want))) << g.id;
    }
  }
}

TEST(EfpValue, RejectsInvalidGraphs) {
  EXPECT_THROW(efp_value(Multigraph{"loop", 2, {{1, 1}}}, two_equal(1)), ParameterError);
  EXPECT_THROW(efp_value(Multigraph{"range", 2, {{1, 3}}}, two_equal(1)), ParameterError);
}

TEST(EfpValue, PermutationInvariance) {
  Stream rng(4);
  for (auto ev : generate_events(10, 3, 9, 500, 0.5, 23)) {
    std::vector<double> before;
    for (const auto& g : graph_catalog()) before.push_back(efp_value(g, ev));
    for (std::size_t i = ev.size(); i > 1; --i) std::swap(ev.particles[i - 1], ev.particles[rng.below(i)]);
    std::size_t k = 0;
    for (const auto& g : graph_catalog()) {
      EXPECT_NEAR(efp_value(g, ev), before[k], 1e-12 * std::max(1.0, before[k])) << g.id;
      ++k;
    }
  }
}

TEST(EfpValue, InfraredSafety) {
  const auto ev = generate_events(1, 5, 5, 100, 0.5, 31)[0];
  for (const auto& g : graph_catalog()) {
    const double base = efp_value(g, ev);
    double prev_slope = INFINITY;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      JetEvent soft = ev;
      soft.particles.push_back({eps, 0.3, 3.0});
      const double slope = std::abs(efp_value(g, soft) - base) / eps;
      EXPECT_LT(slope, 1e4) << g.id;
      if (std::isfinite(prev_slope)) EXPECT_LT(slope, 2 * prev_slope + 1e-9) << g.id;
      prev_slope = slope;
    }
  }
}

TEST(EfpTerm, ProductsAndCoefficients) {
  const auto ev = two_equal(1.0);
  EXPECT_DOUBLE_EQ(efp_term_value(term({"dumbbell"}), ev), efp_value(graph("dumbbell"), ev));
  EXPECT_EQ(efp_term_value(term({"wedge"}, 0.0), ev), 0.0);
  EXPECT_DOUBLE_EQ(efp_term_value(term({"dumbbell", "dumbbell"}, -0.75), ev), -3.0 / 16);
}

TEST(Angularity, Examples) {
  EXPECT_EQ(angularity(JetEvent{{{1, 0.3, 2}}}, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(angularity(two_equal(1.0), 2.0), 0.25);
  EXPECT_DOUBLE_EQ(angularity(two_equal(1.0), 4.0), 1.0 / 16);
  const auto ev = two_equal(1.0);
  EXPECT_DOUBLE_EQ(efp_value(graph("wedge"), ev) - 0.75 * std::pow(efp_value(graph("dumbbell"), ev), 2), 1.0 / 16);
  EXPECT_THROW(angularity(ev, 0.0), ParameterError);
}

TEST(Angularity, CentroidFormMatchesPairwiseForm) {
  for (const auto& ev : generate_events(50, 1, 15, 500, 0.5, 37)) {
    const Contractions c(ev);
    const double d = c.dumbbell();
    for (double alpha : {0.5, 1.0, 2.0, 3.0, 4.0, 6.0}) {
      // |x_i - centroid|^2 = sum_j z_j theta_ij^2 - (1/2) sum_jk z_j z_k theta_jk^2
      double want = 0;
      for (Eigen::Index i = 0; i < c.z.size(); ++i)
        want += c.z[i] * std::pow(std::max(0.0, c.a[i] - d / 2), alpha / 2);
      EXPECT_NEAR(angularity(ev, alpha), want, 1e-10 * std::max(1e-12, std::abs(want))) << alpha;
    }
  }
}

TEST(DetC, TwoParticleAndPlanarVanish) {
  for (const auto& ev : generate_events(30, 2, 2, 500, 0.5, 41)) EXPECT_NEAR(det_c(ev), 0.0, 1e-15);
  for (const auto& ev : generate_events(30, 2, 10, 500, 0.5, 43)) EXPECT_EQ(det_c(planarize(ev)), 0.0);
}

TEST(DetC, MatchesWeightedCovariance) {
  for (const auto& ev : generate_events(30, 3, 10, 500, 0.5, 47)) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(ev.size()), 2);
    Eigen::VectorXd w(static_cast<Eigen::Index>(ev.size()));
    for (std::size_t i = 0; i < ev.size(); ++i) {
      pts(static_cast<Eigen::Index>(i), 0) = ev.particles[i].y;
      pts(static_cast<Eigen::Index>(i), 1) = ev.particles[i].phi;
      w[static_cast<Eigen::Index>(i)] = ev.particles[i].pt;
    }
    w /= w.sum();
    const Eigen::RowVector2d mean = w.transpose() * pts;
    const Eigen::MatrixXd d = pts.rowwise() - mean;
    const Eigen::Matrix2d cov = d.transpose() * w.asDiagonal() * d;
    EXPECT_NEAR(det_c(ev), cov.determinant(), 1e-12);
  }
}

TEST(Catalog, FileMatchesEmbeddedCopy) {
  const auto file = load_graph_catalog(std::string(EFPQUBO_DATA_DIR) + "/graph_catalog.json");
  const auto& embedded = graph_catalog();
  ASSERT_EQ(file.size(), embedded.size());
  for (std::size_t i = 0; i < file.size(); ++i) {
    EXPECT_EQ(file[i].id, embedded[i].id);
    EXPECT_EQ(file[i], embedded[i]);
  }
}

TEST(Catalog, TwelveRelations) {
  const auto rels = relation_catalog();
  ASSERT_EQ(rels.size(), 12u);
  const std::string labels = "abcdefghijkl";
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(rels[i].label, labels[i]);
    EXPECT_FALSE(rels[i].expected_support.empty());
    for (auto [a, c] : rels[i].expected_support) {
      EXPECT_LT(a, rels[i].basis.size());
      EXPECT_TRUE(std::isfinite(c));
    }
  }
  for (char c : std::string("abcdfhjl")) EXPECT_EQ(find_relation(c).restriction.kind, Restriction::none) << c;
  EXPECT_EQ(find_relation('e').restriction.m, 2u);
  EXPECT_EQ(find_relation('g').restriction.m, 2u);
  EXPECT_EQ(find_relation('i').restriction.m, 3u);
  EXPECT_EQ(find_relation('k').restriction.kind, Restriction::planar);
  for (char c : std::string("fhjl")) EXPECT_TRUE(find_relation(c).approximate) << c;
  for (char c : std::string("abcdegik")) EXPECT_FALSE(find_relation(c).approximate) << c;
}

TEST(Catalog, RelationAIsHalfDumbbell) {
  const auto r = find_relation('a');
  EXPECT_EQ(r.target.kind, Target::angularity);
  EXPECT_EQ(r.target.alpha, 2.0);
  ASSERT_EQ(r.expected_support.size(), 1u);
  EXPECT_EQ(r.basis[r.expected_support[0].first].name(), "dumbbell");
  EXPECT_EQ(r.expected_support[0].second, 0.5);
}

TEST(Catalog, LollipopImprovedSupport) {
  const auto r = find_relation('g');
  ASSERT_TRUE(r.improved_support.has_value());
  ASSERT_EQ(r.improved_support->size(), 1u);
  EXPECT_EQ(r.basis[r.improved_support->front().first].name(), "triple_dumbbell");
  EXPECT_EQ(r.improved_support->front().second, 0.5);
  EXPECT_LE(r.basis.size(), 8u);
}

TEST(Catalog, BasisExcludesTargetAndStaysSmall) {
  for (const auto& r : relation_catalog()) {
    EXPECT_LE(r.basis.size(), 8u) << r.label;
    if (r.target.kind == Target::efp)
      for (const auto& t : r.basis) EXPECT_NE(t.name(), r.target.graph_id) << r.label;
  }
}

TEST(Identities, AngularitiesAndDetC) {
  const auto events = generate_events(100, 2, 12, 500, 0.5, 53);
  for (char c : std::string("abcd")) {
    const auto r = find_relation(c);
    const auto dm = design_matrix(events, r);
    EXPECT_LT(relative_residual(dm, r.expected_support), 1e-8) << c;
  }
}

TEST(Identities, RestrictedRelationsHoldExactly) {
  const auto raw = generate_events(100, 2, 12, 500, 0.5, 59);
  for (char c : std::string("egik")) {
    const auto r = find_relation(c);
    const auto dm = design_matrix(apply_restriction(raw, r.restriction, 3), r);
    EXPECT_LT(relative_residual(dm, r.expected_support), 1e-8) << c;
    if (r.improved_support) EXPECT_LT(relative_residual(dm, *r.improved_support), 1e-8) << c;
  }
}

TEST(Identities, ApproximateVariantsFailOnGenericEvents) {
  const auto raw = generate_events(100, 4, 12, 500, 0.5, 61);
  for (char c : std::string("fhjl")) {
    const auto r = find_relation(c);
    const auto dm = design_matrix(raw, r);
    const double res = relative_residual(dm, r.expected_support);
    EXPECT_GT(res, 1e-3) << c;
    RecordProperty(std::string("residual_") + c, std::to_string(res));
  }
}

TEST(Identities, FiveDotsHoldsAtThreeParticlesButNotFour) {
  const auto r = find_relation('j');
  const auto three = design_matrix(generate_events(100, 3, 3, 500, 0.5, 67), r);
  const auto four = design_matrix(generate_events(100, 4, 4, 500, 0.5, 71), r);
  const double r3 = relative_residual(three, r.expected_support), r4 = relative_residual(four, r.expected_support);
  RecordProperty("residual_M3", std::to_string(r3));
  RecordProperty("residual_M4", std::to_string(r4));
  EXPECT_LT(r3, 1e-8);
  EXPECT_GT(r4, 1e-4);
}

TEST(DesignMatrix, RestrictionViolationNamesEvent) {
  auto events = apply_restriction(generate_events(5, 2, 6, 100, 0.5, 73), find_relation('e').restriction, 1);
  events[3] = generate_events(1, 4, 4, 100, 0.5, 79)[0];
  try {
    design_matrix(events, find_relation('e'));
    FAIL() << "expected precondition error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("event 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(design_matrix({}, find_relation('a')), PreconditionError);
}

TEST(DesignMatrix, RelationARowsAndTripleDumbbell) {
  const auto dm = design_matrix(generate_events(10, 2, 12, 500, 0.5, 83), find_relation('a'));
  EXPECT_LT((dm.y - 0.5 * dm.X.col(0)).cwiseAbs().maxCoeff(), 1e-10);
  const auto r = find_relation('e');
  const auto de = design_matrix(apply_restriction(generate_events(20, 2, 9, 500, 0.5, 89), r.restriction, 5), r);
  const auto lolli = static_cast<Eigen::Index>(r.expected_support[0].first);
  EXPECT_EQ(de.names[static_cast<std::size_t>(lolli)], "lollipop");
  EXPECT_LT((de.y - 2 * de.X.col(lolli)).cwiseAbs().maxCoeff(), 1e-10);
}
