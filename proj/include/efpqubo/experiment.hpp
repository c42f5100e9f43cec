#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anneal.hpp"
#include "efp.hpp"
#include "encoding.hpp"
#include "errors.hpp"
#include "events.hpp"
#include "parallel.hpp"
#include "pimc.hpp"
#include "qubo.hpp"
#include "regress.hpp"

namespace efpqubo {

using nlohmann::json;

enum class Solver { anneal, pimc, lasso, ridge, brute };

inline std::string to_string(Solver s) {
  switch (s) {
    case Solver::anneal: return "anneal";
    case Solver::pimc: return "pimc";
    case Solver::lasso: return "lasso";
    case Solver::ridge: return "ridge";
    default: return "brute";
  }
}

inline Solver solver_from_string(const std::string& s) {
  for (Solver v : {Solver::anneal, Solver::pimc, Solver::lasso, Solver::ridge, Solver::brute})
    if (to_string(v) == s) return v;
  throw ParameterError("unknown solver: " + s);
}

struct ExperimentConfig {
  char relation = 'a';
  Solver solver = Solver::anneal;
  Scheme scheme = Scheme::l0_double;
  std::vector<double> lambdas;
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  bool refine = true;
  bool standardize = false;
  unsigned threads = 0;  // 0: hardware concurrency
  bool diagnostics = false;
  bool dump_qubo = false;

  GeneratorConfig events;
  std::string events_file;  // empty: <out>/events.jsonl
  EfpConfig efp;
  int i_min = -3, i_max = 2;
  double cross_penalty = 2.0;

  Schedule schedule{10.0, 1e10, 2048};
  std::size_t r0 = 256;
  std::size_t sweeps_per_step = 1;
  std::size_t verify_interval = 256;
  PimcConfig pimc{};

  ExperimentConfig() {
    pimc.r0 = 64;
    lambdas = log_grid(1e-3, 10.0, 40);
  }

  static std::vector<double> log_grid(double lo, double hi, std::size_t points) {
    require(lo > 0 && hi > lo && points >= 2, "lambda grid: need 0 < min < max and >= 2 points");
    std::vector<double> v(points);
    for (std::size_t i = 0; i < points; ++i)
      v[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) / static_cast<double>(points - 1));
    v.front() = lo;
    v.back() = hi;
    return v;
  }

  void apply_paper_scale() {
    events.n_events = 100000;
    schedule = Schedule{10.0, 1e10, 16384};
    r0 = 1024;
    pimc.steps = 2048;
  }

  void validate() const {
    require(relation >= 'a' && relation <= 'l', "config: relation must be one of a..l");
    require(!lambdas.empty(), "config: empty lambda grid");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      require(lambdas[i] > 0 && std::isfinite(lambdas[i]), "config: lambdas must be positive");
      if (i) require(lambdas[i] > lambdas[i - 1], "config: lambda grid must be ascending");
    }
    require(runs >= 1, "config: runs must be >= 1");
    require(r0 >= 1, "config: r0 must be >= 1");
    schedule.validate();
    pimc.validate();
  }
};

namespace detail {

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ParameterError(where + ": unknown key '" + k + "'");
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using detail::check_keys;
  using detail::take;
  ExperimentConfig c;
  try {
    check_keys(j, {"relation", "solver", "scheme", "lambda", "lambdas", "runs", "seed", "refine", "standardize",
                   "threads", "diagnostics", "dump_qubo", "events", "efp", "encoding", "anneal", "pimc"},
               "config");
    if (j.contains("relation")) {
      const auto s = j.at("relation").get<std::string>();
      require(s.size() == 1, "config: relation must be a single letter");
      c.relation = s[0];
    }
    if (j.contains("solver")) c.solver = solver_from_string(j.at("solver").get<std::string>());
    if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (j.contains("lambda")) {
      const auto& g = j.at("lambda");
      check_keys(g, {"min", "max", "points"}, "config.lambda");
      c.lambdas = ExperimentConfig::log_grid(g.value("min", 1e-3), g.value("max", 10.0), g.value("points", 40));
    }
    take(j, "lambdas", c.lambdas);
    take(j, "runs", c.runs);
    take(j, "seed", c.seed);
    take(j, "refine", c.refine);
    take(j, "standardize", c.standardize);
    take(j, "threads", c.threads);
    take(j, "diagnostics", c.diagnostics);
    take(j, "dump_qubo", c.dump_qubo);
    if (j.contains("events")) {
      const auto& e = j.at("events");
      check_keys(e, {"n_events", "m_min", "m_max", "pt_total", "angular_scale", "seed", "file"}, "config.events");
      take(e, "n_events", c.events.n_events);
      take(e, "m_min", c.events.m_min);
      take(e, "m_max", c.events.m_max);
      take(e, "pt_total", c.events.pt_total);
      take(e, "angular_scale", c.events.angular_scale);
      take(e, "seed", c.events.seed);
      take(e, "file", c.events_file);
    }
    if (j.contains("efp")) {
      check_keys(j.at("efp"), {"beta"}, "config.efp");
      take(j.at("efp"), "beta", c.efp.beta);
      require(c.efp.beta > 0, "config.efp.beta must be > 0");
    }
    if (j.contains("encoding")) {
      const auto& e = j.at("encoding");
      check_keys(e, {"i_min", "i_max", "cross_penalty"}, "config.encoding");
      take(e, "i_min", c.i_min);
      take(e, "i_max", c.i_max);
      take(e, "cross_penalty", c.cross_penalty);
    }
    if (j.contains("anneal")) {
      const auto& a = j.at("anneal");
      check_keys(a, {"beta_0", "beta_l", "steps", "r0", "sweeps_per_step", "verify_interval"}, "config.anneal");
      take(a, "beta_0", c.schedule.beta_0);
      take(a, "beta_l", c.schedule.beta_l);
      take(a, "steps", c.schedule.steps);
      take(a, "r0", c.r0);
      take(a, "sweeps_per_step", c.sweeps_per_step);
      take(a, "verify_interval", c.verify_interval);
    }
    if (j.contains("pimc")) {
      const auto& p = j.at("pimc");
      check_keys(p, {"p_slices", "steps", "gamma_start", "gamma_end", "gamma_floor", "j_start", "j_end", "r0",
                     "temperature", "sweeps_per_step"},
                 "config.pimc");
      take(p, "p_slices", c.pimc.p_slices);
      take(p, "steps", c.pimc.steps);
      take(p, "gamma_start", c.pimc.gamma_start);
      take(p, "gamma_end", c.pimc.gamma_end);
      take(p, "gamma_floor", c.pimc.gamma_floor);
      take(p, "j_start", c.pimc.j_start);
      take(p, "j_end", c.pimc.j_end);
      take(p, "r0", c.pimc.r0);
      take(p, "temperature", c.pimc.temperature);
      take(p, "sweeps_per_step", c.pimc.sweeps_per_step);
    }
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  return {{"relation", std::string(1, c.relation)},
          {"solver", to_string(c.solver)},
          {"scheme", to_string(c.scheme)},
          {"lambdas", c.lambdas},
          {"runs", c.runs},
          {"seed", c.seed},
          {"refine", c.refine},
          {"standardize", c.standardize},
          {"threads", c.threads},
          {"diagnostics", c.diagnostics},
          {"dump_qubo", c.dump_qubo},
          {"events",
           {{"n_events", c.events.n_events},
            {"m_min", c.events.m_min},
            {"m_max", c.events.m_max},
            {"pt_total", c.events.pt_total},
            {"angular_scale", c.events.angular_scale},
            {"seed", c.events.seed},
            {"file", c.events_file}}},
          {"efp", {{"beta", c.efp.beta}}},
          {"encoding", {{"i_min", c.i_min}, {"i_max", c.i_max}, {"cross_penalty", c.cross_penalty}}},
          {"anneal",
           {{"beta_0", c.schedule.beta_0},
            {"beta_l", c.schedule.beta_l},
            {"steps", c.schedule.steps},
            {"r0", c.r0},
            {"sweeps_per_step", c.sweeps_per_step},
            {"verify_interval", c.verify_interval}}},
          {"pimc",
           {{"p_slices", c.pimc.p_slices},
            {"steps", c.pimc.steps},
            {"gamma_start", c.pimc.gamma_start},
            {"gamma_end", c.pimc.gamma_end},
            {"gamma_floor", c.pimc.gamma_floor},
            {"j_start", c.pimc.j_start},
            {"j_end", c.pimc.j_end},
            {"r0", c.pimc.r0},
            {"temperature", c.pimc.temperature},
            {"sweeps_per_step", c.pimc.sweeps_per_step}}}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParameterError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Data preparation

inline std::vector<JetEvent> make_events(const ExperimentConfig& c) {
  const auto rel = find_relation(c.relation);
  return apply_restriction(generate_events(c.events), rel.restriction, c.events.seed);
}

struct Problem {
  ObservableRelation relation;
  DesignMatrix dm;
  Eigen::VectorXd scale;  // column scale applied when standardizing (else ones)
};

inline Problem make_problem(const std::vector<JetEvent>& events, const ExperimentConfig& c) {
  Problem p{find_relation(c.relation), {}, {}};
  p.dm = design_matrix(events, p.relation, c.efp);
  p.scale = Eigen::VectorXd::Ones(p.dm.X.cols());
  if (c.standardize)
    for (Eigen::Index a = 0; a < p.dm.X.cols(); ++a) {
      const double nrm = p.dm.X.col(a).norm();
      if (nrm > 0) p.scale[a] = nrm;
    }
  return p;
}

// Smallest l0-regularized loss over subsets of a known relation's terms, each
// subset fitted with the best coefficients the encoding can represent.  This
// is the best case an exact QUBO solver can reach inside the relation.
inline std::size_t expected_nnz(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ObservableRelation& rel,
                                double lambda, const DyadicGrid& grid = {}) {
  std::vector<Support> candidates{rel.expected_support};
  if (rel.improved_support) candidates.push_back(*rel.improved_support);
  const double yy = y.squaredNorm();
  double best = INFINITY;
  std::size_t best_n = 0;
  for (const auto& sup : candidates)
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << sup.size()); ++mask) {
      std::vector<Eigen::Index> cols;
      for (std::size_t i = 0; i < sup.size(); ++i)
        if (mask >> i & 1u) cols.push_back(static_cast<Eigen::Index>(sup[i].first));
      const Eigen::MatrixXd Xs = X(Eigen::all, cols);
      const double mse = grid_least_squares(Xs.transpose() * Xs, Xs.transpose() * y, yy, grid).first;
      const double loss = mse + lambda * static_cast<double>(cols.size());
      if (loss < best || (loss == best && cols.size() < best_n)) {
        best = loss;
        best_n = cols.size();
      }
    }
  return best_n;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::string solver;  // "<solver>" or "<solver>+refined"
  std::size_t lambda_index = 0;
  double lambda = 0;
  std::size_t run = 0;
  long nnz = -1;  // -1 flags a failed solve
  double mse = NAN;
  double reg_loss = NAN;
  double wall_ms = 0;
  std::vector<double> coefficients;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t refine_violations = 0;  // refined mse > unrefined mse
  std::size_t failures = 0;
  std::vector<std::string> notes;
};

inline double regularizer(Solver solver, Scheme scheme, const Eigen::VectorXd& c) {
  if (solver == Solver::lasso || (solver != Solver::ridge && scheme == Scheme::l1_mod)) return c.lpNorm<1>();
  if (solver == Solver::ridge) return c.squaredNorm();
  if (scheme == Scheme::plain) return 0.0;
  return static_cast<double>(support_of(c).size());
}

inline BitLayout layout_for(const ExperimentConfig& c, std::size_t k) {
  return BitLayout::powers_of_two(c.scheme, k, c.i_min, c.i_max, c.cross_penalty);
}

struct RunOutput {
  Eigen::VectorXd coefficients;
  std::vector<AnnealStep> anneal_diag;
  std::vector<PimcStep> pimc_diag;
};

inline RunOutput solve_once(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ExperimentConfig& c,
                            double lambda, std::uint64_t seed) {
  RunOutput out;
  const auto k = static_cast<std::size_t>(X.cols());
  switch (c.solver) {
    case Solver::lasso: out.coefficients = lasso(X, y, lambda).coefficients; return out;
    case Solver::ridge: out.coefficients = ridge(X, y, lambda).coefficients; return out;
    default: break;
  }
  const BitLayout layout = layout_for(c, k);
  const QuboProblem q = assemble(X, y, layout, lambda);
  Bits bits;
  if (c.solver == Solver::brute) {
    bits = brute_force(q).bits;
  } else if (c.solver == Solver::anneal) {
    auto r = population_anneal(q, c.schedule, c.r0, c.sweeps_per_step, seed,
                               AnnealOptions{c.verify_interval, c.diagnostics, 1});
    bits = std::move(r.bits);
    out.anneal_diag = std::move(r.diagnostics);
  } else {
    auto r = pimc_anneal(q, c.pimc, seed, c.diagnostics);
    bits = std::move(r.bits);
    out.pimc_diag = std::move(r.diagnostics);
  }
  const auto v = decode(bits, layout);
  out.coefficients = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return out;
}

struct SweepHooks {
  std::function<void(std::size_t li, std::size_t run, const RunOutput&)> on_run;
};

inline SweepResult run_sweep(const Problem& p, const ExperimentConfig& c, const SweepHooks& hooks = {}) {
  c.validate();
  const Eigen::MatrixXd Xs = p.dm.X * p.scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd& X = p.dm.X;
  const Eigen::VectorXd& y = p.dm.y;
  const bool refined = c.refine && c.solver != Solver::ridge;
  const std::size_t per_task = refined ? 2 : 1;
  const std::size_t n_tasks = c.lambdas.size() * c.runs;
  std::vector<SweepRow> rows(n_tasks * per_task);
  std::vector<std::string> errors(n_tasks);

  parallel_for(n_tasks, c.threads ? c.threads : default_threads(), [&](std::size_t t) {
    const std::size_t li = t / c.runs, run = t % c.runs;
    const double lambda = c.lambdas[li];
    SweepRow base;
    base.solver = to_string(c.solver);
    base.lambda_index = li;
    base.lambda = lambda;
    base.run = run;
    SweepRow ref = base;
    ref.solver += "+refined";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      RunOutput o = solve_once(Xs, y, c, lambda, stream_key(c.seed, li, run));
      const Eigen::VectorXd coef = o.coefficients.cwiseQuotient(p.scale);
      base.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      base.nnz = static_cast<long>(support_of(coef).size());
      base.mse = mse_loss(X, y, coef);
      base.reg_loss = base.mse + lambda * regularizer(c.solver, c.scheme, coef);
      base.coefficients.assign(coef.data(), coef.data() + coef.size());
      if (refined) {
        const auto r = refine(X, y, coef);
        ref.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        ref.nnz = static_cast<long>(r.nnz());
        ref.mse = r.mse;
        ref.reg_loss = r.mse + lambda * regularizer(c.solver, c.scheme, r.coefficients);
        ref.coefficients.assign(r.coefficients.data(), r.coefficients.data() + r.coefficients.size());
      }
      if (hooks.on_run) hooks.on_run(li, run, o);
    } catch (const CapacityError&) {
      throw;
    } catch (const std::exception& e) {
      errors[t] = e.what();
    }
    rows[t * per_task] = base;
    if (refined) rows[t * per_task + 1] = ref;
  });

  SweepResult res;
  // Unrefined rows first, then refined rows, each in (lambda, run) order.
  for (std::size_t t = 0; t < n_tasks; ++t) res.rows.push_back(rows[t * per_task]);
  if (refined)
    for (std::size_t t = 0; t < n_tasks; ++t) {
      const auto& base = rows[t * per_task];
      const auto& ref = rows[t * per_task + 1];
      if (base.nnz >= 0 && !(ref.mse <= base.mse)) ++res.refine_violations;
      res.rows.push_back(ref);
    }
  for (std::size_t t = 0; t < n_tasks; ++t)
    if (!errors[t].empty()) {
      ++res.failures;
      res.notes.push_back("lambda index " + std::to_string(t / c.runs) + " run " + std::to_string(t % c.runs) +
                          ": " + errors[t]);
    }
  return res;
}

struct SummaryRow {
  std::string solver;
  double lambda;
  std::size_t runs;
  double mean_nnz, std_nnz;
  Quantiles mse;
  long expected_nnz;  // -1 for approximate relations
};

inline std::vector<SummaryRow> summarize(const SweepResult& r, const Problem& p, const DyadicGrid& grid = {}) {
  std::map<std::pair<std::string, std::size_t>, std::vector<const SweepRow*>> groups;
  std::vector<std::pair<std::string, std::size_t>> order;
  for (const auto& row : r.rows) {
    auto key = std::make_pair(row.solver, row.lambda_index);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&row);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::vector<double> nnz, mse;
    for (const auto* row : g)
      if (row->nnz >= 0) {
        nnz.push_back(static_cast<double>(row->nnz));
        mse.push_back(row->mse);
      }
    SummaryRow s{key.first, g.front()->lambda, nnz.size(), NAN, NAN, {NAN, NAN, NAN}, -1};
    if (!nnz.empty()) {
      double mean = 0;
      for (double v : nnz) mean += v;
      mean /= static_cast<double>(nnz.size());
      double var = 0;
      for (double v : nnz) var += (v - mean) * (v - mean);
      s.mean_nnz = mean;
      s.std_nnz = nnz.size() > 1 ? std::sqrt(var / static_cast<double>(nnz.size() - 1)) : 0.0;
      s.mse = quantile_summary(mse);
    }
    if (!p.relation.approximate) s.expected_nnz = static_cast<long>(expected_nnz(p.dm.X, p.dm.y, p.relation, s.lambda, grid));
    out.push_back(s);
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_results_csv(std::ostream& out, const SweepResult& r, const ExperimentConfig& c) {
  out << "relation,solver,scheme,lambda,run,nnz,mse,reg_loss,wall_ms\n";
  const std::string scheme = (c.solver == Solver::lasso || c.solver == Solver::ridge) ? "continuous" : to_string(c.scheme);
  for (const auto& row : r.rows)
    out << c.relation << ',' << row.solver << ',' << scheme << ',' << fmt(row.lambda) << ',' << row.run << ','
        << row.nnz << ',' << fmt(row.mse) << ',' << fmt(row.reg_loss) << ',' << fmt(row.wall_ms) << '\n';
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, const ExperimentConfig& c) {
  out << "relation,solver,lambda,runs,mean_nnz,std_nnz,median_mse,q25_mse,q75_mse,expected_nnz\n";
  for (const auto& s : rows)
    out << c.relation << ',' << s.solver << ',' << fmt(s.lambda) << ',' << s.runs << ',' << fmt(s.mean_nnz) << ','
        << fmt(s.std_nnz) << ',' << fmt(s.mse.median) << ',' << fmt(s.mse.q25) << ',' << fmt(s.mse.q75) << ','
        << (s.expected_nnz >= 0 ? std::to_string(s.expected_nnz) : "") << '\n';
}

// ---------------------------------------------------------------------------
// Commands

namespace fs = std::filesystem;

inline fs::path events_path(const ExperimentConfig& c, const fs::path& out_dir) {
  return c.events_file.empty() ? out_dir / "events.jsonl" : fs::path(c.events_file);
}

inline fs::path cmd_generate(const ExperimentConfig& c, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto path = events_path(c, out_dir);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_events(path.string(), make_events(c));
  return path;
}

struct SweepFiles {
  fs::path results, summary;
  SweepResult result;
};

inline SweepFiles cmd_sweep(const ExperimentConfig& c, const fs::path& out_dir) {
  const auto path = events_path(c, out_dir);
  if (!fs::exists(path)) throw ParameterError("events file not found: " + path.string() + " (run `generate` first)");
  const auto events = read_events(path.string());
  const Problem p = make_problem(events, c);
  fs::create_directories(out_dir);

  SweepHooks hooks;
  if (c.diagnostics) fs::create_directories(out_dir / "diagnostics");
  hooks.on_run = [&](std::size_t li, std::size_t run, const RunOutput& o) {
    if (!c.diagnostics) return;
    std::ofstream d(out_dir / "diagnostics" / (to_string(c.solver) + "_l" + std::to_string(li) + "_r" + std::to_string(run) + ".csv"));
    if (c.solver == Solver::anneal) write_anneal_diagnostics(d, o.anneal_diag);
    if (c.solver == Solver::pimc) write_pimc_diagnostics(d, o.pimc_diag);
  };
  if (c.dump_qubo && c.solver != Solver::lasso && c.solver != Solver::ridge) {
    fs::create_directories(out_dir / "qubo");
    const BitLayout layout = layout_for(c, static_cast<std::size_t>(p.dm.X.cols()));
    const Eigen::MatrixXd Xs = p.dm.X * p.scale.cwiseInverse().asDiagonal();
    for (std::size_t li = 0; li < c.lambdas.size(); ++li) {
      std::ofstream q(out_dir / "qubo" / ("lambda_" + std::to_string(li) + ".json"));
      q << qubo_to_json(assemble(Xs, p.dm.y, layout, c.lambdas[li])).dump() << '\n';
    }
  }

  SweepFiles files{out_dir / "results.csv", out_dir / "summary.csv", run_sweep(p, c, hooks)};
  {
    std::ofstream out(files.results);
    write_results_csv(out, files.result, c);
  }
  {
    std::ofstream out(files.summary);
    write_summary_csv(out, summarize(files.result, p, DyadicGrid::powers_of_two(c.i_min, c.i_max)), c);
  }
  std::ofstream(out_dir / "resolved_config.json") << config_to_json(c).dump(2) << '\n';
  return files;
}

struct DegeneracyRequest {
  Scheme scheme = Scheme::l0_double;
  int i_min = 0, i_max = 0;
  double cross_penalty = 2.0;
};

inline DegeneracyRequest degeneracy_request_from_json(const json& j) {
  detail::check_keys(j, {"scheme", "m_bits", "i_min", "i_max", "cross_penalty"}, "degeneracy config");
  DegeneracyRequest r;
  try {
    r.scheme = scheme_from_string(j.value("scheme", std::string("l0_double")));
    if (j.contains("m_bits")) {
      const int m = j.at("m_bits").get<int>();
      require(m >= 1, "degeneracy config: m_bits must be >= 1");
      r.i_min = 0;
      r.i_max = m - 1;
    } else {
      r.i_min = j.value("i_min", 0);
      r.i_max = j.value("i_max", 0);
    }
    r.cross_penalty = j.value("cross_penalty", 2.0);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("degeneracy config: ") + e.what());
  }
  return r;
}

inline void cmd_degeneracy(const DegeneracyRequest& r, std::ostream& out) {
  const auto layout = BitLayout::powers_of_two(r.scheme, 1, r.i_min, r.i_max, r.cross_penalty);
  out << "value,penalty,count\n";
  for (const auto& [key, n] : degeneracy_profile(layout)) out << fmt(key.first) << ',' << fmt(key.second) << ',' << n << '\n';
}

// ---------------------------------------------------------------------------
// Compare

struct ResultsTable {
  struct Row {
    std::string relation, solver, scheme, lambda;
    long nnz;
    double mse;
  };
  std::vector<Row> rows;
};

inline ResultsTable read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open results file " + path);
  ResultsTable t;
  std::string line;
  std::getline(in, line);
  if (line != "relation,solver,scheme,lambda,run,nnz,mse,reg_loss,wall_ms")
    throw ParseError(path + ": unexpected header");
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw ParseError(path + ": line " + std::to_string(no) + ": expected 9 fields");
    try {
      t.rows.push_back({f[0], f[1], f[2], f[3], std::stol(f[5]), std::stod(f[6])});
    } catch (const std::exception&) {
      throw ParseError(path + ": line " + std::to_string(no) + ": bad number");
    }
  }
  return t;
}

struct CompareRequest {
  std::string left, right;
  std::string left_solver, right_solver;  // empty: first solver in file
  std::string on = "lambda";
};

inline CompareRequest compare_request_from_json(const json& j) {
  detail::check_keys(j, {"left", "right", "left_solver", "right_solver", "on"}, "compare config");
  CompareRequest r;
  try {
    r.left = j.at("left").get<std::string>();
    r.right = j.at("right").get<std::string>();
    r.left_solver = j.value("left_solver", std::string());
    r.right_solver = j.value("right_solver", std::string());
    r.on = j.value("on", std::string("lambda"));
  } catch (const json::exception& e) {
    throw ParameterError(std::string("compare config: ") + e.what());
  }
  require(r.on == "lambda" || r.on == "nnz", "compare config: 'on' must be lambda or nnz");
  return r;
}

inline void cmd_compare(const CompareRequest& req, std::ostream& out) {
  struct Side {
    std::map<std::string, std::vector<const ResultsTable::Row*>> by_key;
    std::vector<std::string> order;
  };
  const auto lt = read_results_csv(req.left), rt = read_results_csv(req.right);
  auto collect = [&](const ResultsTable& t, std::string solver) {
    Side s;
    if (solver.empty() && !t.rows.empty()) solver = t.rows.front().solver;
    for (const auto& row : t.rows) {
      if (row.solver != solver || row.nnz < 0) continue;
      const std::string key = req.on == "lambda" ? row.lambda : std::to_string(row.nnz);
      if (!s.by_key.count(key)) s.order.push_back(key);
      s.by_key[key].push_back(&row);
    }
    return s;
  };
  const Side a = collect(lt, req.left_solver), b = collect(rt, req.right_solver);
  if (req.on == "lambda") {
    std::vector<std::string> missing;
    for (const auto& k : a.order)
      if (!b.by_key.count(k)) missing.push_back("right lacks lambda=" + k);
    for (const auto& k : b.order)
      if (!a.by_key.count(k)) missing.push_back("left lacks lambda=" + k);
    if (!missing.empty()) {
      std::string msg = "compare: lambda grids differ:";
      for (const auto& m : missing) msg += "\n  " + m;
      throw ParameterError(msg);
    }
  }
  std::vector<std::string> keys = a.order;
  for (const auto& k : b.order)
    if (!a.by_key.count(k)) keys.push_back(k);
  if (req.on == "nnz") std::sort(keys.begin(), keys.end(), [](auto& x, auto& y) { return std::stol(x) < std::stol(y); });

  auto stats = [](const Side& s, const std::string& key) -> std::string {
    auto it = s.by_key.find(key);
    if (it == s.by_key.end()) return ",,";
    std::vector<double> mse;
    double nnz = 0;
    for (const auto* r : it->second) {
      mse.push_back(r->mse);
      nnz += static_cast<double>(r->nnz);
    }
    return fmt(nnz / static_cast<double>(mse.size())) + ',' + fmt(quantile_summary(mse).median) + ',' +
           std::to_string(mse.size());
  };
  out << req.on << ",left_mean_nnz,left_median_mse,left_runs,right_mean_nnz,right_median_mse,right_runs\n";
  for (const auto& k : keys) out << k << ',' << stats(a, k) << ',' << stats(b, k) << '\n';
}

}  // namespace efpqubo
