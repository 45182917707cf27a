#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hetvr/harness.hpp"

using namespace hetvr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hetvr_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentConfig small_glm() {
  return parse_config(R"({
    "problem": {"family": "glm", "m": 60, "n": 8, "mu": 0.05},
    "solvers": ["ssnm", "saga", "svrg", "agd"],
    "seed": 3,
    "stop": {"max_passes": 15}
  })");
}

}  // namespace

TEST_CASE("config: malformed JSON reports line and column") {
  const auto msg = error_of("{\n  \"problem\": {\n    \"family\": ,\n  }\n}");
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("config: field paths in errors") {
  CHECK(error_of(R"({"problem": {"family": "glm", "m": 10, "n": 5, "mu": -1}, "solvers": "ssnm"})")
            .find("problem.mu") != std::string::npos);
  CHECK(error_of(R"({"problem": {"family": "glm", "m": 10, "n": 5}, "solvers": ["ssnm", "nope"]})")
            .find("solvers[1]") != std::string::npos);
  CHECK(error_of(R"({"problem": {"family": "glm", "m": 10, "n": 5, "colour": 1}, "solvers": "ssnm"})")
            .find("problem.colour: unknown field") != std::string::npos);
  CHECK(error_of(R"({"problem": {"family": "glm", "m": 10, "n": 5}, "solvers": "ssnm",
                     "stop": {"max_passes": "ten"}})")
            .find("stop.max_passes") != std::string::npos);
  CHECK(error_of(R"({"solvers": "ssnm"})").find("problem") != std::string::npos);
  CHECK(error_of(R"({"problem": {"family": "composite", "m": 10, "n": 5}, "solvers": "saga"})")
            .find("does not apply") != std::string::npos);
  CHECK(error_of(R"({"problem": {"family": "multiblock", "m": 4, "n": 4, "mu": 1,
                     "rank_drop": 1}, "solvers": "ssnm"})")
            .find("problem.epsilon") != std::string::npos);
}

TEST_CASE("config: to_json round trips") {
  const auto c = small_glm();
  const auto again = parse_config(to_json(c).dump());
  CHECK(to_json(again) == to_json(c));
  CHECK(again.solvers.size() == 4);
  CHECK(again.problem.seed == 3);
}

TEST_CASE("preset sizes") {
  const auto f1 = preset("fig1", 1.0, 0);
  CHECK(f1.problem.m == 10000);
  CHECK(f1.problem.n == 100);
  CHECK(f1.problem.mu == doctest::Approx(1e-5));
  CHECK(f1.problem.loss == "squared");

  const auto small = preset("fig1", 0.1, 0);
  CHECK(small.problem.m == 1000);
  CHECK(small.problem.n == 10);

  const auto f2 = preset("fig2", 1.0, 0);
  CHECK(f2.problem.loss == "logistic");

  const auto f3 = preset("fig3", 1.0, 0);
  CHECK(f3.problem.family == "multiblock");
  CHECK(f3.problem.m == 10);
  CHECK(f3.problem.n == 10);
  CHECK(f3.problem.mu == doctest::Approx(1e-3));

  const auto f4 = preset("fig4", 1.0, 0);
  CHECK(f4.problem.family == "composite");

  CHECK_THROWS_AS(preset("fig5"), ConfigError);
  CHECK_THROWS_AS(preset("fig1", 0.0), ConfigError);
  CHECK_THROWS_AS(preset("fig1", 1.5), ConfigError);

  CHECK(scaled_size(10000, 0.1) == 1000);
  CHECK(scaled_size(100, 0.01) == 10);
  CHECK(scaled_size(80, 0.25) == 20);
}

TEST_CASE("run_experiment: records, counters and determinism") {
  const auto c = small_glm();
  const auto w = build_workload(c.problem, c.solvers);
  const auto a = run_experiment(c, w, false);
  const auto b = run_experiment(c, w, false);
  REQUIRE(a.runs.size() == 4);
  CHECK(trace_csv(a.runs) == trace_csv(b.runs));
  CHECK_FALSE(a.zero_budget);
  CHECK_FALSE(a.divergence_only());

  const auto csv = trace_csv(a.runs);
  CHECK(csv.rfind("solver,pass,grad_calls,gap,distance,infeasibility,value_calls,iteration\n", 0) == 0);
  for (const auto& run : a.runs) {
    REQUIRE_FALSE(run.trace.records.empty());
    CHECK(run.trace.records.back().grad_calls == run.counter_gradient_calls);
    CHECK(run.trace.records.front().passes == doctest::Approx(0.0));
    CHECK(run.trace.final_gap() < run.trace.records.front().gap);
  }
}

TEST_CASE("run_experiment: writes files") {
  auto c = small_glm();
  c.output = scratch("run").string();
  const auto r = run_experiment(c);
  CHECK(fs::exists(r.directory / "trace.csv"));
  CHECK(fs::exists(r.directory / "metadata.json"));
  CHECK(slurp(r.directory / "trace.csv") == trace_csv(r.runs));
  const auto meta = nlohmann::json::parse(slurp(r.directory / "metadata.json"));
  CHECK(meta.contains("version"));
}

TEST_CASE("run_experiment: zero budget is flagged") {
  auto c = small_glm();
  c.stop.max_passes = 0.0;
  const auto w = build_workload(c.problem, c.solvers);
  const auto r = run_experiment(c, w, false);
  CHECK(r.zero_budget);
  for (const auto& run : r.runs) CHECK(run.counter_gradient_calls == 0);
}

TEST_CASE("grid scales") {
  GridSpec g;
  g.k_min = -1;
  g.k_max = 1;
  const auto s = grid_scales(g);
  CHECK(s.size() == 6);
  bool has_one = false;
  for (const auto& [k, v] : s) {
    CHECK(v > 0.0);
    has_one = has_one || v == 1.0;
  }
  CHECK(has_one);
}

TEST_CASE("tune_grid: single point and selection") {
  const auto c = small_glm();
  const auto w = build_workload(c.problem, c.solvers);
  StopRule stop;
  stop.max_passes = 10;

  GridSpec one;
  one.k_min = 0;
  one.k_max = 0;
  const auto single = tune_grid(w, {"saga"}, stop, one, 1);
  REQUIRE(single.best);
  CHECK(single.grid.size() == 2);

  GridSpec g;
  g.k_min = -1;
  g.k_max = 1;
  const auto t = tune_grid(w, {"agd"}, stop, g, 1);
  REQUIRE(t.best);
  CHECK_FALSE(t.all_diverged);
  for (const auto& p : t.grid) {
    if (p.status == RunStatus::diverged || p.invalid) continue;
    CHECK(t.best->final_gap <= p.final_gap * (1 + 1e-12));
  }
  // AGD above its stability limit blows up.
  for (const auto& p : t.grid) {
    if (p.scale >= 30.0) CHECK((p.status == RunStatus::diverged || p.invalid));
  }

  const auto tuned = apply_tuning(c.solvers, {t});
  for (const auto& s : tuned) {
    if (s.name == "agd") CHECK(s.scale == t.best->scale);
  }
}

TEST_CASE("tune_grid: every point diverged") {
  const auto c = small_glm();
  const auto w = build_workload(c.problem, c.solvers);
  StopRule stop;
  stop.max_passes = 10;
  stop.divergence_factor = 10;
  GridSpec g;
  g.k_min = -3;
  g.k_max = -2;
  const auto t = tune_grid(w, {"agd"}, stop, g, 1);
  CHECK(t.all_diverged);
  CHECK_FALSE(t.best);
}

TEST_CASE("plot: one series with two points") {
  PlotSeries s{"ssnm", {0.0, 1.0}, {1.0, 1e-3}};
  const auto svg = render_svg({s}, "demo");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(count(svg, "<polyline") == 1);
  CHECK(svg.find("ssnm") != std::string::npos);
}

TEST_CASE("plot: legend keeps series order and zero gaps are floored") {
  std::vector<PlotSeries> series;
  for (const char* name : {"ssnm", "uniform_ssnm", "saga", "svrg", "katyusha"}) {
    series.push_back({name, {0.0, 1.0, 2.0}, {1.0, 1e-4, 0.0}});
  }
  const auto svg = render_svg(series);
  CHECK(count(svg, "<polyline") == 5);
  std::size_t last = 0;
  for (const auto& s : series) {
    const auto pos = svg.find(">" + s.label + "<");
    REQUIRE(pos != std::string::npos);
    CHECK(pos > last);
    last = pos;
  }
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);

  CHECK_THROWS(render_svg({}));
  CHECK_THROWS(render_svg({PlotSeries{"x", {}, {}}}));
}

TEST_CASE("plot: read_trace_series splits by solver") {
  const auto dir = scratch("plot");
  {
    std::ofstream out(dir / "trace.csv");
    out << "solver,pass,grad_calls,gap\n"
        << "b,0,0,1\nb,1,10,0.5\na,0,0,1\na,1,10,0.1\n";
  }
  const auto series = read_trace_series({dir / "trace.csv"});
  REQUIRE(series.size() == 2);
  CHECK(series[0].label == "b");
  CHECK(series[1].label == "a");
  CHECK(series[1].gaps[1] == doctest::Approx(0.1));

  {
    std::ofstream out(dir / "bad.csv");
    out << "solver,gap\nx,1\n";
  }
  CHECK_THROWS(read_trace_series({dir / "bad.csv"}));
}

TEST_CASE("generate_instance writes an audited instance") {
  const auto dir = scratch("generate");
  const nlohmann::json spec{{"family", "finite_sum"},
                            {"smoothness", {9.0}},
                            {"strong_convexity", {1.0}},
                            {"output", dir.string()},
                            {"audit", {{"solvers", {"ssnm", "agd"}}, {"passes", 5}}}};
  const auto info = generate_instance(spec);
  CHECK(info.at("q")[0].get<double>() == doctest::Approx(0.5));
  CHECK(info.at("gamma")[0].get<double>() == doctest::Approx(std::sqrt(3.0)));
  CHECK(info.at("optimality_residual").get<double>() <= 1e-8);
  CHECK(info.at("audit_passed").get<bool>());
  CHECK(fs::exists(dir / "instance.json"));
  CHECK(fs::exists(dir / "optimum.csv"));
  CHECK(fs::exists(dir / "audit.csv"));

  CHECK_THROWS_AS(generate_instance({{"family", "other"}, {"smoothness", {1.0}},
                                     {"strong_convexity", {1.0}}, {"output", dir.string()}}),
                  ConfigError);
}
