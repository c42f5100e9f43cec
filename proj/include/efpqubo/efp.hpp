#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "errors.hpp"
#include "events.hpp"

namespace efpqubo {

struct Multigraph {
  std::string id;
  int n_vertices = 1;
  std::vector<std::pair<int, int>> edges;  // 1-based, repeated pairs are multi-edges

  std::size_t degree() const { return edges.size(); }
  bool operator==(const Multigraph& o) const { return n_vertices == o.n_vertices && edges == o.edges; }
};

inline void validate(const Multigraph& g) {
  require(g.n_vertices >= 1, "multigraph '" + g.id + "': needs at least one vertex");
  for (auto [k, l] : g.edges) {
    require(k != l, "multigraph '" + g.id + "': self-loop");
    require(k >= 1 && l >= 1 && k <= g.n_vertices && l <= g.n_vertices,
            "multigraph '" + g.id + "': vertex index out of range");
  }
}

// Product of disconnected components times a coefficient.
struct EfpTerm {
  std::vector<Multigraph> graphs;
  double coefficient = 1.0;

  std::string name() const {
    std::string s;
    for (std::size_t i = 0; i < graphs.size(); ++i) s += (i ? "*" : "") + graphs[i].id;
    return s;
  }
  std::size_t degree() const {
    std::size_t d = 0;
    for (const auto& g : graphs) d += g.degree();
    return d;
  }
};

struct EfpConfig {
  double beta = 2.0;
};

// ---------------------------------------------------------------------------
// Graph catalog

inline constexpr const char* kGraphCatalogJson = R"json({
  "version": 1,
  "graphs": [
    {"id": "dumbbell",        "n": 2, "edges": [[1, 2]]},
    {"id": "double_dumbbell", "n": 2, "edges": [[1, 2], [1, 2]]},
    {"id": "triple_dumbbell", "n": 2, "edges": [[1, 2], [1, 2], [1, 2]]},
    {"id": "wedge",           "n": 3, "edges": [[1, 2], [1, 3]]},
    {"id": "triangle",        "n": 3, "edges": [[1, 2], [1, 3], [2, 3]]},
    {"id": "lollipop",        "n": 3, "edges": [[1, 2], [1, 2], [1, 3]]},
    {"id": "star4",           "n": 4, "edges": [[1, 2], [1, 3], [1, 4]]},
    {"id": "path4",           "n": 4, "edges": [[1, 2], [1, 3], [2, 4]]},
    {"id": "path5",           "n": 5, "edges": [[1, 2], [1, 3], [2, 4], [3, 5]]}
  ]
})json";

using GraphCatalog = std::vector<Multigraph>;

inline GraphCatalog parse_graph_catalog(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("graph catalog: ") + e.what());
  }
  const auto& arr = j.is_array() ? j : j.at("graphs");
  GraphCatalog out;
  for (const auto& o : arr) {
    Multigraph g;
    g.id = o.at("id").get<std::string>();
    g.n_vertices = o.at("n").get<int>();
    for (const auto& e : o.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    validate(g);
    out.push_back(std::move(g));
  }
  return out;
}

inline GraphCatalog load_graph_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph_catalog(ss.str());
}

inline const GraphCatalog& graph_catalog() {
  static const GraphCatalog cat = parse_graph_catalog(kGraphCatalogJson);
  return cat;
}

inline const Multigraph& graph(const std::string& id) {
  for (const auto& g : graph_catalog())
    if (g.id == id) return g;
  throw ParameterError("unknown graph id: " + id);
}

inline EfpTerm term(std::initializer_list<const char*> ids, double coefficient = 1.0) {
  EfpTerm t;
  for (const char* id : ids) t.graphs.push_back(graph(id));
  t.coefficient = coefficient;
  return t;
}

// ---------------------------------------------------------------------------
// Evaluation

struct ZTheta {
  Eigen::VectorXd z;
  Eigen::MatrixXd theta;
};

inline ZTheta z_theta(const JetEvent& ev) {
  const auto m = static_cast<Eigen::Index>(ev.size());
  require(m >= 1, "z_theta: empty event");
  ZTheta out{Eigen::VectorXd(m), Eigen::MatrixXd::Zero(m, m)};
  const double total = ev.total_pt();
  for (Eigen::Index i = 0; i < m; ++i) out.z[i] = ev.particles[i].pt / total;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < i; ++k) {
      const double dy = ev.particles[i].y - ev.particles[k].y;
      const double dphi = ev.particles[i].phi - ev.particles[k].phi;
      out.theta(i, k) = out.theta(k, i) = std::sqrt(dy * dy + dphi * dphi);
    }
  return out;
}

namespace detail {

struct EdgePlan {
  // For vertex v: edges to earlier vertices as (u, multiplicity).
  std::vector<std::vector<std::pair<int, int>>> back;
  int max_mult = 0;
};

inline EdgePlan plan_edges(const Multigraph& g) {
  EdgePlan p;
  p.back.resize(g.n_vertices);
  std::map<std::pair<int, int>, int> mult;
  for (auto [k, l] : g.edges) ++mult[{std::min(k, l) - 1, std::max(k, l) - 1}];
  for (auto [uv, c] : mult) {
    p.back[uv.second].emplace_back(uv.first, c);
    p.max_mult = std::max(p.max_mult, c);
  }
  return p;
}

inline double nested_sum(const EdgePlan& plan, const Eigen::VectorXd& z,
                         const std::vector<Eigen::MatrixXd>& tpow, std::vector<int>& idx, int v, double acc) {
  const int nv = static_cast<int>(plan.back.size());
  const auto m = z.size();
  double total = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    double w = acc * z[i];
    for (auto [u, c] : plan.back[v]) {
      w *= tpow[c](idx[u], i);
      if (w == 0) break;
    }
    if (w == 0) continue;
    if (v + 1 == nv) {
      total += w;
    } else {
      idx[v] = static_cast<int>(i);
      total += nested_sum(plan, z, tpow, idx, v + 1, w);
    }
  }
  return total;
}

inline std::vector<Eigen::MatrixXd> theta_powers(const Eigen::MatrixXd& theta, double beta, int max_mult) {
  std::vector<Eigen::MatrixXd> t(max_mult + 1);
  for (int c = 1; c <= max_mult; ++c) t[c] = theta.array().pow(beta * c).matrix();
  return t;
}

}  // namespace detail

inline double efp_value(const Multigraph& g, const ZTheta& zt, const EfpConfig& cfg = {}) {
  require(cfg.beta > 0, "efp_value: beta must be > 0");
  const auto plan = detail::plan_edges(g);
  const auto tpow = detail::theta_powers(zt.theta, cfg.beta, plan.max_mult);
  std::vector<int> idx(g.n_vertices, 0);
  return detail::nested_sum(plan, zt.z, tpow, idx, 0, 1.0);
}

inline double efp_value(const Multigraph& g, const JetEvent& ev, const EfpConfig& cfg = {}) {
  validate(g);
  return efp_value(g, z_theta(ev), cfg);
}

inline double efp_term_value(const EfpTerm& t, const JetEvent& ev, const EfpConfig& cfg = {}) {
  require(!t.graphs.empty(), "efp_term_value: empty term");
  if (t.coefficient == 0) return 0;
  const auto zt = z_theta(ev);
  double v = t.coefficient;
  for (const auto& g : t.graphs) v *= efp_value(g, zt, cfg);
  return v;
}

inline std::pair<double, double> centroid(const JetEvent& ev) {
  const double total = ev.total_pt();
  double yj = 0, pj = 0;
  for (const auto& p : ev.particles) {
    yj += p.pt / total * p.y;
    pj += p.pt / total * p.phi;
  }
  return {yj, pj};
}

inline double angularity(const JetEvent& ev, double alpha) {
  require(alpha > 0, "angularity: alpha must be > 0");
  require(ev.size() >= 1, "angularity: empty event");
  const auto [yj, pj] = centroid(ev);
  const double total = ev.total_pt();
  double s = 0;
  for (const auto& p : ev.particles) {
    const double d2 = (p.y - yj) * (p.y - yj) + (p.phi - pj) * (p.phi - pj);
    s += p.pt / total * std::pow(d2, alpha / 2);
  }
  return s;
}

inline double det_c(const JetEvent& ev) {
  require(ev.size() >= 1, "det_c: empty event");
  const auto [yj, pj] = centroid(ev);
  const double total = ev.total_pt();
  double c11 = 0, c22 = 0, c12 = 0;
  for (const auto& p : ev.particles) {
    const double z = p.pt / total, dy = p.y - yj, dp = p.phi - pj;
    c11 += z * dy * dy;
    c22 += z * dp * dp;
    c12 += z * dy * dp;
  }
  return std::max(0.0, c11 * c22 - c12 * c12);
}

// ---------------------------------------------------------------------------
// Relations

struct Restriction {
  enum Kind { none, max_particles, planar } kind = none;
  std::size_t m = 0;

  bool admits(const JetEvent& ev) const {
    switch (kind) {
      case max_particles: return ev.size() <= m;
      case planar: return is_planar(ev);
      default: return true;
    }
  }
  std::string describe() const {
    switch (kind) {
      case max_particles: return "M <= " + std::to_string(m);
      case planar: return "planar";
      default: return "none";
    }
  }
};

struct Target {
  enum Kind { angularity, det_c, efp } kind = efp;
  double alpha = 0;
  std::string graph_id;

  double evaluate(const JetEvent& ev, const EfpConfig& cfg) const {
    switch (kind) {
      case angularity: return efpqubo::angularity(ev, alpha);
      case det_c: return efpqubo::det_c(ev);
      default: return efp_value(graph(graph_id), ev, cfg);
    }
  }
};

using Support = std::vector<std::pair<std::size_t, double>>;  // (basis index, coefficient)

struct ObservableRelation {
  char label = 'a';
  std::string name;
  Restriction restriction;
  Target target;
  std::vector<EfpTerm> basis;
  Support expected_support;
  // Only (g): the single-graph relation the l0 fit rediscovers.
  std::optional<Support> improved_support;
  bool approximate = false;
};

namespace detail {

// Connected catalog graphs grouped by edge count.
inline std::vector<EfpTerm> catalog_terms_of_degree(std::size_t d) {
  std::vector<EfpTerm> out;
  for (const auto& g : graph_catalog())
    if (g.degree() == d) out.push_back(EfpTerm{{g}, 1.0});
  return out;
}

// The triangle needs three distinct particles, so it is identically zero
// when M <= 2 and would only add a dead column.
inline bool vanishes_under(const EfpTerm& t, const Restriction& r) {
  if (r.kind != Restriction::max_particles) return false;
  for (const auto& g : t.graphs)
    if (g.id == "triangle" && r.m < 3) return true;
  return false;
}

// Basis = the relation's own terms, then every connected catalog graph of the
// same degree, minus the target and anything structurally zero under the
// restriction.  Returns the basis and the index of each row term.
inline std::pair<std::vector<EfpTerm>, std::vector<std::size_t>> build_basis(const std::vector<EfpTerm>& row,
                                                                           std::size_t degree,
                                                                           const std::string& target_id,
                                                                           const Restriction& r) {
  std::vector<EfpTerm> basis;
  std::vector<std::size_t> where;
  auto index_of = [&](const EfpTerm& t) -> std::size_t {
    for (std::size_t i = 0; i < basis.size(); ++i)
      if (basis[i].name() == t.name()) return i;
    basis.push_back(EfpTerm{t.graphs, 1.0});
    return basis.size() - 1;
  };
  for (const auto& t : row) where.push_back(index_of(t));
  for (const auto& t : catalog_terms_of_degree(degree))
    if (t.name() != target_id && !vanishes_under(t, r)) index_of(t);
  return {basis, where};
}

inline ObservableRelation make_relation(char label, std::string name, Restriction r, Target target,
                                        std::size_t degree, std::vector<EfpTerm> row,
                                        std::vector<EfpTerm> improved = {}) {
  std::vector<EfpTerm> all = row;
  all.insert(all.end(), improved.begin(), improved.end());
  auto [basis, where] = build_basis(all, degree, target.graph_id, r);
  ObservableRelation rel;
  rel.label = label;
  rel.name = std::move(name);
  rel.restriction = r;
  rel.target = std::move(target);
  rel.basis = std::move(basis);
  for (std::size_t i = 0; i < row.size(); ++i) rel.expected_support.emplace_back(where[i], row[i].coefficient);
  if (!improved.empty()) {
    Support s;
    for (std::size_t i = 0; i < improved.size(); ++i) s.emplace_back(where[row.size() + i], improved[i].coefficient);
    rel.improved_support = s;
  }
  return rel;
}

}  // namespace detail

inline std::vector<ObservableRelation> relation_catalog() {
  using detail::make_relation;
  const Restriction none{};
  const Restriction m2{Restriction::max_particles, 2};
  const Restriction m3{Restriction::max_particles, 3};
  const Restriction planar{Restriction::planar, 0};
  const Target lam2{Target::angularity, 2.0, ""};
  const Target lam4{Target::angularity, 4.0, ""};
  const Target lam6{Target::angularity, 6.0, ""};
  const Target detc{Target::det_c, 0, ""};
  auto efp = [](const char* id) { return Target{Target::efp, 0, id}; };

  std::vector<ObservableRelation> out;
  out.push_back(make_relation('a', "Angularity alpha=2", none, lam2, 1, {term({"dumbbell"}, 0.5)}));
  out.push_back(make_relation('b', "Angularity alpha=4", none, lam4, 2,
                              {term({"wedge"}, 1.0), term({"dumbbell", "dumbbell"}, -0.75)}));
  out.push_back(make_relation('c', "Angularity alpha=6", none, lam6, 3,
                              {term({"star4"}, 1.0), term({"wedge", "dumbbell"}, -1.5),
                               term({"dumbbell", "dumbbell", "dumbbell"}, 0.625)}));
  out.push_back(make_relation('d', "Determinant C", none, detc, 2,
                              {term({"wedge"}, 0.25), term({"double_dumbbell"}, -0.125)}));

  auto triple = [&](char label, const char* name, Restriction r) {
    return make_relation(label, name, r, efp("triple_dumbbell"), 3, {term({"lollipop"}, 2.0)});
  };
  auto lollipop = [&](char label, const char* name, Restriction r) {
    return make_relation(label, name, r, efp("lollipop"), 3, {term({"star4"}, 1.0), term({"path4"}, 1.0)},
                         {term({"triple_dumbbell"}, 0.5)});
  };
  auto five = [&](char label, const char* name, Restriction r) {
    return make_relation(label, name, r, efp("path5"), 4,
                         {term({"path4", "dumbbell"}, 1.0), term({"double_dumbbell", "wedge"}, 0.5),
                          term({"double_dumbbell", "dumbbell", "dumbbell"}, -0.5)});
  };
  auto plane = [&](char label, const char* name, Restriction r) {
    return make_relation(label, name, r, efp("path4"), 3,
                         {term({"path5"}, 0.5), term({"double_dumbbell", "dumbbell"}, 0.5),
                          term({"triangle"}, 1.0 / 3.0), term({"triangle", "dumbbell"}, -1.0 / 6.0),
                          term({"wedge", "double_dumbbell"}, -0.25)});
  };
  out.push_back(triple('e', "Triple Dumbbell", m2));
  out.push_back(triple('f', "Triple Dumbbell (approx.)", none));
  out.push_back(lollipop('g', "Lollipop", m2));
  out.push_back(lollipop('h', "Lollipop (approx.)", none));
  out.push_back(five('i', "Five Dots", m3));
  out.push_back(five('j', "Five Dots (approx.)", none));
  out.push_back(plane('k', "Planar Event", planar));
  out.push_back(plane('l', "Planar Event (approx.)", none));
  for (char c : {'f', 'h', 'j', 'l'}) out[static_cast<std::size_t>(c - 'a')].approximate = true;
  return out;
}

inline ObservableRelation find_relation(char label) {
  for (auto& r : relation_catalog())
    if (r.label == label) return r;
  throw ParameterError(std::string("unknown relation label: ") + label);
}

// Applies the relation's restriction (planarize or truncate).
inline std::vector<JetEvent> apply_restriction(std::vector<JetEvent> events, const Restriction& r,
                                               std::uint64_t seed) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (r.kind == Restriction::planar) events[i] = planarize(std::move(events[i]));
    if (r.kind == Restriction::max_particles) events[i] = truncate_to_m(std::move(events[i]), r.m, stream_key(seed, i));
  }
  return events;
}

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

inline DesignMatrix design_matrix(const std::vector<JetEvent>& events, const ObservableRelation& rel,
                                  const EfpConfig& cfg = {}) {
  if (events.empty()) throw PreconditionError("design_matrix: no events");
  for (std::size_t s = 0; s < events.size(); ++s)
    if (!rel.restriction.admits(events[s]))
      throw PreconditionError("design_matrix: event " + std::to_string(s) + " violates restriction " +
                              rel.restriction.describe() + " of relation (" + rel.label + ")");
  const auto n = static_cast<Eigen::Index>(events.size());
  const auto k = static_cast<Eigen::Index>(rel.basis.size());
  DesignMatrix dm{Eigen::MatrixXd(n, k), Eigen::VectorXd(n), {}};
  for (const auto& t : rel.basis) dm.names.push_back(t.name());
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& ev = events[static_cast<std::size_t>(s)];
    const auto zt = z_theta(ev);
    std::map<std::string, double> cache;
    for (Eigen::Index a = 0; a < k; ++a) {
      double v = 1.0;
      for (const auto& g : rel.basis[static_cast<std::size_t>(a)].graphs) {
        auto it = cache.find(g.id);
        if (it == cache.end()) it = cache.emplace(g.id, efp_value(g, zt, cfg)).first;
        v *= it->second;
      }
      dm.X(s, a) = v;
    }
    dm.y[s] = rel.target.evaluate(ev, cfg);
  }
  return dm;
}

}  // namespace efpqubo
