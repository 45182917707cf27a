#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hetvr/harness.hpp"

namespace hetvr {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& keys) {
  for (const auto& [k, v] : obj.items()) {
    if (!keys.contains(k)) fail(join(path, k), "unknown field");
  }
}

const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  return j;
}

double read_double(const json& obj, const std::string& path, const std::string& key,
                   double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(join(path, key), "must be finite");
  return d;
}

std::optional<double> read_optional_double(const json& obj, const std::string& path,
                                           const std::string& key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  return read_double(obj, path, key, 0.0);
}

std::uint64_t read_uint(const json& obj, const std::string& path, const std::string& key,
                        std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  fail(join(path, key), "expected a nonnegative integer");
}

int read_int(const json& obj, const std::string& path, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  return v.get<int>();
}

bool read_bool(const json& obj, const std::string& path, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) fail(join(path, key), "expected true or false");
  return v.get<bool>();
}

std::string read_string(const json& obj, const std::string& path, const std::string& key,
                        const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> read_double_list(const json& obj, const std::string& path,
                                     const std::string& key) {
  if (!obj.contains(key)) return {};
  const auto& v = obj.at(key);
  if (!v.is_array()) fail(join(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

ProblemSpec parse_problem(const json& j, std::uint64_t default_seed) {
  const std::string path = "problem";
  require_object(j, path);
  reject_unknown(j, path,
                 {"family", "m", "n", "mu", "loss", "weights", "design", "targets", "eig_lo",
                  "eig_hi", "rank_drop", "epsilon", "radius", "off_diagonal", "smoothness",
                  "strong_convexity", "d", "seed"});
  ProblemSpec p;
  if (!j.contains("family")) fail(join(path, "family"), "required");
  p.family = read_string(j, path, "family", "");
  p.m = read_uint(j, path, "m", 0);
  p.n = read_uint(j, path, "n", 0);
  p.mu = read_double(j, path, "mu", p.mu);
  p.loss = read_string(j, path, "loss", p.loss);
  p.weights = read_string(j, path, "weights", p.weights);
  p.design_csv = read_string(j, path, "design", "");
  p.targets_csv = read_string(j, path, "targets", "");
  p.eig_lo = read_double(j, path, "eig_lo", p.eig_lo);
  p.eig_hi = read_double(j, path, "eig_hi", p.eig_hi);
  p.rank_drop = read_uint(j, path, "rank_drop", 0);
  p.epsilon = read_optional_double(j, path, "epsilon");
  p.radius = read_optional_double(j, path, "radius");
  p.off_diagonal = read_double(j, path, "off_diagonal", p.off_diagonal);
  p.smoothness = read_double_list(j, path, "smoothness");
  p.strong_convexity = read_double_list(j, path, "strong_convexity");
  p.d = read_uint(j, path, "d", 0);
  p.seed = read_uint(j, path, "seed", default_seed);
  return p;
}

SolverSpec parse_solver(const json& j, const std::string& path) {
  SolverSpec s;
  if (j.is_string()) {
    s.name = j.get<std::string>();
    return s;
  }
  require_object(j, path);
  reject_unknown(j, path, {"name", "scale", "lambda_scale"});
  if (!j.contains("name")) fail(join(path, "name"), "required");
  s.name = read_string(j, path, "name", "");
  s.scale = read_double(j, path, "scale", 1.0);
  s.lambda_scale = read_double(j, path, "lambda_scale", 1.0);
  return s;
}

StopRule parse_stop(const json& j) {
  const std::string path = "stop";
  require_object(j, path);
  reject_unknown(j, path,
                 {"max_passes", "gap_tolerance", "distance_tolerance", "divergence_factor",
                  "max_iterations"});
  StopRule s;
  s.max_passes = read_double(j, path, "max_passes", s.max_passes);
  s.gap_tolerance = read_optional_double(j, path, "gap_tolerance");
  s.distance_tolerance = read_optional_double(j, path, "distance_tolerance");
  s.divergence_factor = read_double(j, path, "divergence_factor", s.divergence_factor);
  s.max_iterations = read_uint(j, path, "max_iterations", 0);
  return s;
}

GridSpec parse_grid(const json& j) {
  const std::string path = "grid";
  require_object(j, path);
  reject_unknown(j, path, {"enabled", "k_min", "k_max", "passes"});
  GridSpec g;
  g.enabled = read_bool(j, path, "enabled", true);
  g.k_min = read_int(j, path, "k_min", g.k_min);
  g.k_max = read_int(j, path, "k_max", g.k_max);
  g.passes = read_optional_double(j, path, "passes");
  return g;
}

bool contains(const std::vector<std::string>& list, const std::string& s) {
  return std::find(list.begin(), list.end(), s) != list.end();
}

// Solvers that make sense on each family.
bool solver_applies(const std::string& family, const std::string& solver) {
  if (family == "composite") {
    return solver == "katyusha" || solver == "katyusha_reduced" || solver == "agd";
  }
  return solver != "katyusha_reduced";
}

}  // namespace

const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names{"ssnm", "uniform_ssnm", "saga", "svrg",
                                              "katyusha", "katyusha_reduced", "agd"};
  return names;
}

const std::vector<std::string>& known_families() {
  static const std::vector<std::string> names{"glm",        "glm_csv",   "quadratic",
                                              "multiblock", "composite", "adversarial"};
  return names;
}

void validate(const ExperimentConfig& c) {
  const auto& p = c.problem;
  if (!contains(known_families(), p.family)) {
    fail("problem.family", "unknown family '" + p.family + "'");
  }
  const bool sized = p.family != "glm_csv" && p.family != "adversarial";
  if (sized) {
    if (p.m == 0) fail("problem.m", "must be a positive integer");
    if (p.n == 0) fail("problem.n", "must be a positive integer");
  }
  if (p.family == "glm" || p.family == "glm_csv") {
    if (p.loss != "squared" && p.loss != "logistic") {
      fail("problem.loss", "expected 'squared' or 'logistic'");
    }
    if (p.weights != "skewed" && p.weights != "uniform") {
      fail("problem.weights", "expected 'skewed' or 'uniform'");
    }
    if (!(p.mu > 0.0)) fail("problem.mu", "must be positive");
  }
  if (p.family == "glm_csv") {
    if (p.design_csv.empty()) fail("problem.design", "required for glm_csv");
    if (p.targets_csv.empty()) fail("problem.targets", "required for glm_csv");
  }
  if (p.family == "quadratic") {
    if (!(p.eig_lo >= 0.0 && p.eig_hi > 0.0 && p.eig_lo <= p.eig_hi)) {
      fail("problem.eig_lo", "need 0 <= eig_lo <= eig_hi with eig_hi > 0");
    }
  }
  if (p.family == "multiblock") {
    if (!(p.mu > 0.0)) fail("problem.mu", "must be positive");
    if (p.rank_drop >= p.n) fail("problem.rank_drop", "must be smaller than n");
    if (p.rank_drop > 0 && !p.epsilon) {
      fail("problem.epsilon", "required when rank_drop > 0 (blocks are not strongly convex)");
    }
    if (p.epsilon && !(*p.epsilon > 0.0)) fail("problem.epsilon", "must be positive");
    if (p.radius && !(*p.radius > 0.0)) fail("problem.radius", "must be positive");
  }
  if (p.family == "composite") {
    if (!(p.mu > 0.0 && p.mu <= 1.0)) fail("problem.mu", "must lie in (0, 1]");
    if (!(p.off_diagonal >= 0.0 && p.off_diagonal <= 1.0)) {
      fail("problem.off_diagonal", "must lie in [0, 1]");
    }
  }
  if (p.family == "adversarial") {
    if (p.smoothness.empty()) fail("problem.smoothness", "required, one entry per component");
    if (p.strong_convexity.size() != p.smoothness.size()) {
      fail("problem.strong_convexity", "needs as many entries as problem.smoothness");
    }
  }

  if (c.solvers.empty()) fail("solvers", "at least one solver required");
  for (std::size_t i = 0; i < c.solvers.size(); ++i) {
    const auto& s = c.solvers[i];
    const std::string path = "solvers[" + std::to_string(i) + "]";
    if (!contains(known_solvers(), s.name)) fail(path, "unknown solver '" + s.name + "'");
    if (!solver_applies(p.family, s.name)) {
      fail(path, "solver '" + s.name + "' does not apply to family '" + p.family + "'");
    }
    if (!(s.scale > 0.0)) fail(path + ".scale", "must be positive");
    if (!(s.lambda_scale > 0.0)) fail(path + ".lambda_scale", "must be positive");
    for (std::size_t j = 0; j < i; ++j) {
      if (c.solvers[j].name == s.name) fail(path, "solver '" + s.name + "' listed twice");
    }
  }
  if (!(c.stop.max_passes >= 0.0)) fail("stop.max_passes", "must be nonnegative");
  if (c.stop.gap_tolerance && !(*c.stop.gap_tolerance >= 0.0)) {
    fail("stop.gap_tolerance", "must be nonnegative");
  }
  if (c.stop.distance_tolerance && !(*c.stop.distance_tolerance >= 0.0)) {
    fail("stop.distance_tolerance", "must be nonnegative");
  }
  if (!(c.stop.divergence_factor > 1.0)) fail("stop.divergence_factor", "must exceed 1");
  if (c.grid.k_min > c.grid.k_max) fail("grid.k_min", "must not exceed grid.k_max");
  if (c.grid.k_max - c.grid.k_min > 30) fail("grid", "k range is limited to 30 steps");
  if (c.grid.passes && !(*c.grid.passes > 0.0)) fail("grid.passes", "must be positive");
  if (c.output.empty()) fail("output", "must be a nonempty path");
}

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream msg;
    msg << "line " << line << ", column " << col << ": malformed JSON";
    throw ConfigError(msg.str());
  }
  require_object(doc, "");
  reject_unknown(doc, "", {"problem", "solvers", "seed", "stop", "grid", "output"});
  ExperimentConfig c;
  c.source = doc;
  c.seed = read_uint(doc, "", "seed", 0);
  if (!doc.contains("problem")) fail("problem", "required");
  c.problem = parse_problem(doc.at("problem"), c.seed);
  if (!doc.contains("solvers")) fail("solvers", "required");
  const auto& solvers = doc.at("solvers");
  if (solvers.is_string()) {
    c.solvers.push_back(parse_solver(solvers, "solvers"));
  } else if (solvers.is_array()) {
    for (std::size_t i = 0; i < solvers.size(); ++i) {
      c.solvers.push_back(parse_solver(solvers[i], "solvers[" + std::to_string(i) + "]"));
    }
  } else {
    fail("solvers", "expected a solver name or an array of solvers");
  }
  if (doc.contains("stop")) c.stop = parse_stop(doc.at("stop"));
  if (doc.contains("grid")) c.grid = parse_grid(doc.at("grid"));
  c.output = read_string(doc, "", "output", c.output);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  const auto& p = c.problem;
  json prob{{"family", p.family}, {"seed", p.seed}};
  if (p.m > 0) prob["m"] = p.m;
  if (p.n > 0) prob["n"] = p.n;
  if (p.family == "glm" || p.family == "glm_csv") {
    prob["mu"] = p.mu;
    prob["loss"] = p.loss;
    prob["weights"] = p.weights;
  }
  if (p.family == "glm_csv") {
    prob["design"] = p.design_csv;
    prob["targets"] = p.targets_csv;
  }
  if (p.family == "quadratic") {
    prob["eig_lo"] = p.eig_lo;
    prob["eig_hi"] = p.eig_hi;
  }
  if (p.family == "multiblock") {
    prob["mu"] = p.mu;
    prob["rank_drop"] = p.rank_drop;
    if (p.epsilon) prob["epsilon"] = *p.epsilon;
    if (p.radius) prob["radius"] = *p.radius;
  }
  if (p.family == "composite") {
    prob["mu"] = p.mu;
    prob["off_diagonal"] = p.off_diagonal;
  }
  if (p.family == "adversarial") {
    prob["smoothness"] = p.smoothness;
    prob["strong_convexity"] = p.strong_convexity;
    prob["d"] = p.d;
  }
  json solvers = json::array();
  for (const auto& s : c.solvers) {
    solvers.push_back({{"name", s.name}, {"scale", s.scale}, {"lambda_scale", s.lambda_scale}});
  }
  json stop{{"max_passes", c.stop.max_passes},
            {"divergence_factor", c.stop.divergence_factor},
            {"max_iterations", c.stop.max_iterations}};
  if (c.stop.gap_tolerance) stop["gap_tolerance"] = *c.stop.gap_tolerance;
  if (c.stop.distance_tolerance) stop["distance_tolerance"] = *c.stop.distance_tolerance;
  json grid{{"enabled", c.grid.enabled}, {"k_min", c.grid.k_min}, {"k_max", c.grid.k_max}};
  if (c.grid.passes) grid["passes"] = *c.grid.passes;
  return json{{"problem", prob}, {"solvers", solvers}, {"seed", c.seed},
              {"stop", stop},    {"grid", grid},       {"output", c.output}};
}

Index scaled_size(Index size, double scale) {
  return std::max<Index>(10, static_cast<Index>(std::llround(static_cast<double>(size) * scale)));
}

ExperimentConfig preset(const std::string& name, double scale, std::uint64_t seed) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("--scale: must lie in (0, 1]");
  ExperimentConfig c;
  c.seed = seed;
  c.problem.seed = seed;
  c.output = "results/" + name;
  c.grid.enabled = true;
  if (name == "fig1" || name == "fig2") {
    c.problem.family = "glm";
    c.problem.loss = name == "fig1" ? "squared" : "logistic";
    c.problem.m = scaled_size(10000, scale);
    c.problem.n = scaled_size(100, scale);
    c.problem.mu = 1e-5;
    c.problem.weights = "skewed";
    for (const char* s : {"ssnm", "uniform_ssnm", "saga", "svrg", "katyusha"}) {
      c.solvers.push_back({s});
    }
    c.stop.max_passes = 60;
    c.stop.gap_tolerance = 1e-12;
    c.grid.passes = 20;
  } else if (name == "fig3") {
    c.problem.family = "multiblock";
    c.problem.m = scaled_size(10, scale);
    c.problem.n = scaled_size(10, scale);
    c.problem.mu = 1e-3;
    for (const char* s : {"ssnm", "uniform_ssnm", "saga", "svrg", "agd"}) c.solvers.push_back({s});
    c.stop.max_passes = 3000;
    c.stop.gap_tolerance = 1e-13;
    c.grid.passes = 300;
  } else if (name == "fig4") {
    c.problem.family = "composite";
    c.problem.m = scaled_size(80, scale);
    c.problem.n = scaled_size(80, scale);
    c.problem.mu = 1e-5;
    c.problem.off_diagonal = 1.0;
    for (const char* s : {"katyusha", "agd"}) c.solvers.push_back({s});
    c.stop.max_passes = 20000;
    c.stop.gap_tolerance = 1e-10;
    c.grid.passes = 500;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected fig1, fig2, fig3 or fig4)");
  }
  c.source = to_json(c);
  validate(c);
  return c;
}

}  // namespace hetvr
