// efpqubo: generate | sweep | degeneracy | compare
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <efpqubo/efpqubo.hpp>

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kCapacityError = 3;

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw efpqubo::ParameterError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw efpqubo::ParameterError("config " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l0-regularized EFP regression as QUBO, solved by population annealing and PIMC"};
  app.require_subcommand(1);
  std::string config, out_dir = ".";
  bool paper_scale = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config, "JSON config file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--paper-scale", paper_scale, "100k events, 2^14 steps, R0 = 1024");
  };
  auto* gen = app.add_subcommand("generate", "write synthetic events honoring the relation's restriction");
  auto* sweep = app.add_subcommand("sweep", "lambda sweep, results.csv + summary.csv");
  auto* degen = app.add_subcommand("degeneracy", "per-coefficient degeneracy profile as CSV");
  auto* comp = app.add_subcommand("compare", "join two results.csv files on lambda or nnz");
  add_common(gen, false);
  add_common(sweep, false);
  add_common(degen, false);
  add_common(comp, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  namespace fs = std::filesystem;
  using namespace efpqubo;
  try {
    auto experiment = [&] {
      ExperimentConfig c = config.empty() ? ExperimentConfig{} : config_from_json(read_json(config));
      if (paper_scale) c.apply_paper_scale();
      return c;
    };
    if (gen->parsed()) {
      const auto path = cmd_generate(experiment(), out_dir);
      std::cout << "wrote " << path.string() << '\n';
    } else if (sweep->parsed()) {
      const auto files = cmd_sweep(experiment(), out_dir);
      for (const auto& note : files.result.notes) std::cerr << "run failed: " << note << '\n';
      if (files.result.refine_violations)
        std::cerr << "refinement increased mse in " << files.result.refine_violations << " runs\n";
      std::cout << "wrote " << files.results.string() << " and " << files.summary.string() << '\n';
      if (files.result.refine_violations) return kFailure;
    } else if (degen->parsed()) {
      const auto req = degeneracy_request_from_json(config.empty() ? nlohmann::json::object() : read_json(config));
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "degeneracy.csv");
      cmd_degeneracy(req, out);
      cmd_degeneracy(req, std::cout);
    } else if (comp->parsed()) {
      const auto req = compare_request_from_json(read_json(config));
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "compare.csv");
      cmd_compare(req, out);
      cmd_compare(req, std::cout);
    }
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kCapacityError;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const PreconditionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
