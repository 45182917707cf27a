#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hetvr/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;
constexpr int kDivergenceOnly = 3;

using hetvr::ExperimentConfig;

void print_runs(const hetvr::ExperimentResult& res) {
  for (const auto& r : res.runs) {
    std::cout << r.spec.name << ": " << hetvr::to_string(r.trace.status);
    if (!r.trace.records.empty()) {
      std::cout << ", gap " << r.trace.records.back().gap << " after "
                << r.trace.records.back().passes << " passes";
    }
    std::cout << " (scale " << r.spec.scale << ")\n";
  }
  if (res.zero_budget) std::cout << "zero pass budget: traces are empty\n";
  std::cout << "wrote " << (res.directory / "metadata.json").string() << " and "
            << (res.directory / "trace.csv").string() << "\n";
}

void print_tuning(const hetvr::TuneReport& rep) {
  for (const auto& t : rep.results) {
    if (t.best) {
      std::cout << t.solver << ": best scale " << t.best->scale << "\n";
    } else if (t.all_diverged) {
      std::cout << t.solver << ": every grid point diverged\n";
    } else {
      std::cout << t.solver << ": no valid grid point\n";
    }
  }
}

// Tunes when the config asks for it, then runs and writes results.
int tune_then_run(ExperimentConfig config) {
  const auto workload = hetvr::build_workload(config.problem, config.solvers);
  if (config.grid.enabled) {
    const auto rep = hetvr::tune_experiment(config, workload, true);
    print_tuning(rep);
    if (rep.all_diverged()) return kDivergenceOnly;
    config.solvers = hetvr::apply_tuning(config.solvers, rep.results);
  }
  const auto res = hetvr::run_experiment(config, workload, true);
  print_runs(res);
  return res.divergence_only() ? kDivergenceOnly : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-reduced solvers for heterogeneous finite sums"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hetvr::version_string());

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the solvers of a config and write metadata + trace");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  auto* tune = app.add_subcommand("tune", "Rate-grid tuning for every solver of a config");
  tune->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::string preset_name;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  auto* pre = app.add_subcommand("preset", "Run a figure preset (tuning included)");
  pre->add_option("name", preset_name, "fig1 | fig2 | fig3 | fig4")->required();
  pre->add_option("--scale", scale, "Size factor in (0, 1]");
  pre->add_option("--seed", seed, "Seed");
  pre->add_option("--out", out, "Output directory");

  std::string spec_path;
  auto* gen = app.add_subcommand("generate", "Generate an adversarial lower-bound instance");
  gen->add_option("spec", spec_path, "Instance spec (JSON)")->required();

  std::vector<std::string> traces;
  std::string plot_out;
  std::string title;
  auto* plot = app.add_subcommand("plot", "SVG of log10 gap against effective passes");
  plot->add_option("traces", traces, "Trace CSV files")->required();
  plot->add_option("--out", plot_out, "SVG file")->required();
  plot->add_option("--title", title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) {
      auto config = hetvr::load_config(config_path);
      return tune_then_run(std::move(config));
    }
    if (tune->parsed()) {
      const auto config = hetvr::load_config(config_path);
      const auto rep = hetvr::tune_experiment(config);
      print_tuning(rep);
      std::cout << "wrote " << (rep.directory / "grid.csv").string() << "\n";
      return rep.all_diverged() ? kDivergenceOnly : kOk;
    }
    if (pre->parsed()) {
      auto config = hetvr::preset(preset_name, scale, seed);
      if (!out.empty()) config.output = out;
      config.source = hetvr::to_json(config);
      std::filesystem::create_directories(config.output);
      std::ofstream cfg(std::filesystem::path(config.output) / "config.json");
      cfg << config.source.dump(2) << "\n";
      return tune_then_run(std::move(config));
    }
    if (gen->parsed()) {
      std::ifstream in(spec_path);
      if (!in) throw hetvr::ConfigError(spec_path + ": cannot open spec file");
      std::stringstream buf;
      buf << in.rdbuf();
      nlohmann::json spec;
      try {
        spec = nlohmann::json::parse(buf.str());
      } catch (const nlohmann::json::parse_error& e) {
        throw hetvr::ConfigError(spec_path + ": malformed JSON at byte " + std::to_string(e.byte));
      }
      const auto info = hetvr::generate_instance(spec);
      std::cout << "instance with m = " << info["m"] << ", dimension " << info["dimension"]
                << ", optimal value " << info["optimal_value"] << "\n";
      if (info.contains("audit_passed")) {
        std::cout << "audit " << (info["audit_passed"].get<bool>() ? "passed" : "FAILED") << "\n";
      }
      std::cout << "wrote " << info["directory"].get<std::string>() << "\n";
      return kOk;
    }
    if (plot->parsed()) {
      std::vector<std::filesystem::path> files(traces.begin(), traces.end());
      const auto svg = hetvr::render_svg(hetvr::read_trace_series(files), title);
      std::ofstream o(plot_out);
      if (!o) throw hetvr::Error("cannot write '" + plot_out + "'");
      o << svg;
      std::cout << "wrote " << plot_out << "\n";
      return kOk;
    }
  } catch (const hetvr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const hetvr::InvariantError& e) {
    std::cerr << "invalid setup: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
