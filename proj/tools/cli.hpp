#pragma once

// Scenario runner: JSON configs with strict schema, named experiments,
// CSV + JSON output.

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sce/mode_oracle.hpp"
#include "sce/towin.hpp"

namespace sce::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "sce 1.0.0";

enum ExitCode { kOk = 0, kInternal = 1, kValidation = 2, kHalt = 3, kIo = 4 };

struct ValidationError : std::runtime_error {
  ValidationError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what) {}
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- schema

struct ScenarioInfo {
  const char* name;
  const char* description;
};

inline const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = {
      {"minkowski-check", "static Minkowski with calibrated c1; residuals and |a - 1| along solve_sce"},
      {"vacuum-evolve", "vacuum moments, expanding jet with a''' from the energy constraint"},
      {"thermal-evolve", "massive thermal (KMS) moments with calibrated c1"},
      {"conformal", "xi = 1/6 second-order reduction, compared against the fourth-order run"},
      {"towin", "tow-in along a ramp profile with a fixed bump strength c"},
      {"shoot", "bisection in the bump strength for the energy constraint at tau_free"},
      {"oracle-compare", "mode-sum oracle against the moment system for a bump state"},
      {"bounds-audit", "propagator norm bounds along a prescribed potential, both weight regimes"},
  };
  return list;
}

inline bool known_scenario(const std::string& s) {
  for (const auto& i : scenarios())
    if (s == i.name) return true;
  return false;
}

/// Shared defaults; every accepted key appears here.
inline json base_defaults() {
  return json{
      {"scenario", "minkowski-check"},
      {"mode", "fourth-order"},
      {"physics",
       {{"m", 1.0},
        {"xi", 0.0},
        {"kappa", 1.0},
        {"c1", 0.0},
        {"calibrate_c1", true},
        {"c2", 0.0},
        {"c3", -1e-3},
        {"c4", 0.0},
        {"lambda0", 1.0}}},
      {"initial",
       {{"jet", {{"a", 1.0}, {"a1", 0.0}, {"a2", 0.0}, {"a3", 0.0}}},
        {"energy_constraint", false},
        {"moments",
         {{"source", "vacuum"},
          {"mu", 1.0},
          {"beta", 1.0},
          {"bump", {{"center", 1.5}, {"radius", 0.5}, {"amplitude", {1.0, 0.2, 0.5}}}},
          {"explicit", json::array()}}},
        {"background", {{"phi", 0.0}, {"pi", 0.0}}}}},
      {"span", {{"t0", 0.0}, {"t1", 1.0}}},
      {"tolerances", {{"tol", 1e-10}, {"samples", 101}}},
      {"N", 12},
      {"weight", {{"regime", "geometric"}, {"omega", 2.0}, {"upsilon", 4.0}}},
      {"towin",
       {{"tau_tow", 0.0},
        {"tau_init", 1.0},
        {"tau_free", 1.002},
        {"tau_stop", 1.5},
        {"H", 0.1},
        {"tau_a", 0.2},
        {"width", 0.6},
        {"c", 0.0},
        {"delta", 0.02},
        {"eps", 0.1},
        {"c_lo", -50.0},
        {"c_hi", 50.0}}},
      {"oracle", {{"V0", 1.0}, {"amplitude", 0.3}, {"nodes", 2049}}},
      {"output", {{"dir", "out"}}},
  };
}

/// Defaults of one scenario: the shared block with scenario-specific values.
inline json default_config(const std::string& scenario) {
  if (!known_scenario(scenario)) throw ValidationError("scenario", "unknown scenario '" + scenario + "'");
  json c = base_defaults();
  c["scenario"] = scenario;
  if (scenario == "vacuum-evolve" || scenario == "bounds-audit") {
    c["initial"]["jet"]["a1"] = 0.1;
    c["initial"]["jet"]["a2"] = 0.05;
    c["initial"]["energy_constraint"] = true;
    c["span"]["t1"] = 0.5;
  } else if (scenario == "thermal-evolve") {
    c["initial"]["moments"]["source"] = "thermal";
    c["span"]["t1"] = 0.5;
  } else if (scenario == "conformal") {
    c["mode"] = "conformal-second-order";
    c["physics"]["xi"] = 1.0 / 6.0;
    c["physics"]["c3"] = -1.0 / (17280.0 * pi2);
    c["physics"]["c4"] = 0.0;
    c["initial"]["jet"]["a1"] = 0.1;
    c["initial"]["background"] = {{"phi", 0.1}, {"pi", 0.05}};
    c["span"]["t1"] = 0.5;
  } else if (scenario == "oracle-compare") {
    c["initial"]["moments"]["source"] = "bump";
    c["span"]["t1"] = 0.5;
    c["tolerances"]["tol"] = 1e-12;
  }
  if (scenario == "bounds-audit") c["span"]["t1"] = 0.6;
  return c;
}

namespace detail {

inline const char* type_name(const json& v) {
  if (v.is_number()) return "number";
  return v.type_name();
}

inline bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

}  // namespace detail

/// Overlays `patch` onto `base`; keys must exist in `base` and keep their
/// kind. Arrays are replaced wholesale.
inline void merge_strict(json& base, const json& patch, const std::string& path = "") {
  if (!patch.is_object()) throw ValidationError(path, "expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string p = detail::join(path, it.key());
    if (!base.contains(it.key())) throw ValidationError(p, "unknown key");
    json& dst = base[it.key()];
    if (!detail::same_kind(dst, it.value())) {
      throw ValidationError(p, std::string("expected ") + detail::type_name(dst) + ", got " +
                                   detail::type_name(it.value()));
    }
    if (dst.is_object()) {
      merge_strict(dst, it.value(), p);
    } else {
      dst = it.value();
    }
  }
}

/// "a.b.c=value" as a patch object; the value is read as JSON when it
/// parses, as a string otherwise.
inline json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--override", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::string part = key.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
    if (part.empty()) throw ValidationError("--override", "empty path component in '" + key + "'");
    patch = json{{part, patch}};
    if (dot == std::string::npos) break;
    end = dot;
  }
  return patch;
}

/// Defaults of the selected scenario, then the file, then the overrides.
inline json resolve_config(const json& file, const std::vector<std::string>& overrides) {
  if (!file.is_object()) throw ValidationError("", "config must be a JSON object");
  std::vector<json> patches;
  for (const auto& o : overrides) patches.push_back(override_patch(o));
  std::string scenario = "minkowski-check";
  if (file.contains("scenario")) {
    if (!file["scenario"].is_string()) throw ValidationError("scenario", "expected string");
    scenario = file["scenario"].get<std::string>();
  }
  for (const auto& p : patches) {
    if (p.contains("scenario")) {
      if (!p["scenario"].is_string()) throw ValidationError("scenario", "expected string");
      scenario = p["scenario"].get<std::string>();
    }
  }
  json cfg = default_config(scenario);
  merge_strict(cfg, file);
  for (const auto& p : patches) merge_strict(cfg, p);
  return cfg;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ValidationError("", "config '" + path + "' is not valid JSON");
  return j;
}

// ---------------------------------------------------------------- typed view

struct TowInConfig {
  double tau_tow, tau_init, tau_free, tau_stop, H, tau_a, width, c, delta, eps, c_lo, c_hi;
};

struct OracleConfig {
  double V0, amplitude;
  std::size_t nodes;
};

struct ScenarioConfig {
  std::string scenario;
  SolveMode mode = SolveMode::FourthOrder;
  PhysicsParams physics;
  bool calibrate = true;
  ScaleFactorJet jet;
  bool energy_constraint = false;
  std::string source;
  double mu = 1.0, beta = 1.0;
  BumpSpec bump;
  json explicit_moments;
  BackgroundField bg;
  double t0 = 0.0, t1 = 1.0, tol = 1e-10;
  std::size_t samples = 101, N = 12;
  std::string regime;
  double omega = 2.0, upsilon = 4.0;
  TowInConfig towin{};
  OracleConfig oracle{};
  std::string out_dir;
  json raw;
};

namespace detail {

inline double num(const json& c, const std::string& path) {
  const json* v = &c;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    v = &(*v)[path.substr(start, dot - start)];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ValidationError(path, "must be finite");
  return x;
}

inline std::size_t count(const json& v, const std::string& path, std::size_t lo) {
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(lo)) {
    throw ValidationError(path, "must be an integer >= " + std::to_string(lo));
  }
  return v.get<std::size_t>();
}

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

}  // namespace detail

/// Typed, validated view of a resolved config.
inline ScenarioConfig parse_config(const json& c) {
  using detail::num;
  using detail::require;
  ScenarioConfig s;
  s.raw = c;
  s.scenario = c["scenario"].get<std::string>();
  require(known_scenario(s.scenario), "scenario", "unknown scenario '" + s.scenario + "'");
  const auto mode = c["mode"].get<std::string>();
  require(mode == "fourth-order" || mode == "conformal-second-order", "mode",
          "expected 'fourth-order' or 'conformal-second-order'");
  s.mode = mode == "fourth-order" ? SolveMode::FourthOrder : SolveMode::ConformalSecondOrder;

  auto& p = s.physics;
  p.coupling = {num(c, "physics.m"), num(c, "physics.xi")};
  p.kappa = num(c, "physics.kappa");
  p.c1 = num(c, "physics.c1");
  p.c2 = num(c, "physics.c2");
  p.c3 = num(c, "physics.c3");
  p.c4 = num(c, "physics.c4");
  p.lambda0 = num(c, "physics.lambda0");
  s.calibrate = c["physics"]["calibrate_c1"].get<bool>();
  require(p.coupling.m >= 0.0, "physics.m", "must be >= 0");
  require(p.kappa > 0.0, "physics.kappa", "must be positive");
  require(p.lambda0 > 0.0, "physics.lambda0", "must be positive");
  require(!s.calibrate || p.coupling.m > 0.0, "physics.calibrate_c1", "needs physics.m > 0");
  if (s.mode == SolveMode::ConformalSecondOrder) {
    require(conformal_reduction_applies(p), "mode",
            "conformal-second-order needs physics.xi = 1/6 and 3 c3 + c4 = " +
                std::to_string(-1.0 / (5760.0 * pi2)));
  }

  s.jet = {num(c, "initial.jet.a"), num(c, "initial.jet.a1"), num(c, "initial.jet.a2"), num(c, "initial.jet.a3"),
           std::nullopt};
  require(s.jet.a > 0.0, "initial.jet.a", "must be positive");
  s.energy_constraint = c["initial"]["energy_constraint"].get<bool>();
  const json& m = c["initial"]["moments"];
  s.source = m["source"].get<std::string>();
  require(s.source == "vacuum" || s.source == "thermal" || s.source == "bump" || s.source == "explicit",
          "initial.moments.source", "expected vacuum, thermal, bump or explicit");
  s.mu = num(c, "initial.moments.mu");
  s.beta = num(c, "initial.moments.beta");
  require(s.mu > 0.0, "initial.moments.mu", "must be positive");
  require(s.beta > 0.0, "initial.moments.beta", "must be positive");
  s.bump.center = num(c, "initial.moments.bump.center");
  s.bump.radius = num(c, "initial.moments.bump.radius");
  const json& g = m["bump"]["amplitude"];
  require(g.size() == 3 && g[0].is_number() && g[1].is_number() && g[2].is_number(), "initial.moments.bump.amplitude",
          "expected three numbers");
  s.bump.amplitude = {g[0].get<double>(), g[1].get<double>(), g[2].get<double>()};
  require(s.bump.radius > 0.0 && s.bump.center - s.bump.radius > 0.0, "initial.moments.bump",
          "support [center - radius, center + radius] must lie in k > 0");
  s.explicit_moments = m["explicit"];
  s.bg = {num(c, "initial.background.phi"), num(c, "initial.background.pi")};

  s.t0 = num(c, "span.t0");
  s.t1 = num(c, "span.t1");
  require(s.t1 >= s.t0, "span.t1", "must be >= span.t0");
  s.tol = num(c, "tolerances.tol");
  require(s.tol > 0.0 && s.tol < 1.0, "tolerances.tol", "must lie in (0, 1)");
  s.samples = detail::count(c["tolerances"]["samples"], "tolerances.samples", 2);
  s.N = detail::count(c["N"], "N", 1);
  if (s.source == "explicit") {
    const json& e = s.explicit_moments;
    require(e.size() == s.N + 1, "initial.moments.explicit", "needs N + 1 = " + std::to_string(s.N + 1) + " triples");
    for (std::size_t i = 0; i < e.size(); ++i) {
      require(e[i].is_array() && e[i].size() == 3 && e[i][0].is_number() && e[i][1].is_number() &&
                  e[i][2].is_number(),
              "initial.moments.explicit[" + std::to_string(i) + "]", "expected [ff, fp, pp]");
    }
  }

  s.regime = c["weight"]["regime"].get<std::string>();
  require(s.regime == "geometric" || s.regime == "factorial", "weight.regime", "expected geometric or factorial");
  s.omega = num(c, "weight.omega");
  s.upsilon = num(c, "weight.upsilon");
  require(s.omega > 0.0, "weight.omega", "must be positive");
  if (s.scenario == "bounds-audit") {
    require(s.omega >= 1.0, "weight.omega", "factorial regime needs omega >= 1");
    require(s.upsilon > s.omega, "weight.upsilon", "must exceed weight.omega");
  }

  auto& t = s.towin;
  t = {num(c, "towin.tau_tow"), num(c, "towin.tau_init"), num(c, "towin.tau_free"), num(c, "towin.tau_stop"),
       num(c, "towin.H"),       num(c, "towin.tau_a"),    num(c, "towin.width"),    num(c, "towin.c"),
       num(c, "towin.delta"),   num(c, "towin.eps"),      num(c, "towin.c_lo"),     num(c, "towin.c_hi")};
  if (s.scenario == "towin" || s.scenario == "shoot") {
    require(t.tau_tow <= t.tau_init, "towin.tau_init", "must be >= towin.tau_tow");
    require(t.tau_init < t.tau_free, "towin.tau_free", "must exceed towin.tau_init");
    require(t.tau_free < t.tau_stop, "towin.tau_stop", "must exceed towin.tau_free");
    require(t.width > 0.0, "towin.width", "must be positive");
    require(t.delta > 0.0, "towin.delta", "must be positive");
    require(t.tau_init - t.delta >= t.tau_tow, "towin.delta", "bump must start after towin.tau_tow");
    require(t.eps > 0.0, "towin.eps", "must be positive");
    require(t.c_lo < t.c_hi, "towin.c_hi", "must exceed towin.c_lo");
    require(s.source != "bump" && s.source != "explicit", "initial.moments.source",
            "tow-in starts from vacuum or thermal moments");
  }
  s.oracle = {num(c, "oracle.V0"), num(c, "oracle.amplitude"), 0};
  s.oracle.nodes = detail::count(c["oracle"]["nodes"], "oracle.nodes", 3);
  require(s.oracle.nodes % 2 == 1, "oracle.nodes", "must be odd (Simpson rule)");
  if (s.scenario == "oracle-compare") {
    require(retained_index(s.N, s.t0, s.t1) >= 0, "N", "too small for the span: no truncation-unaffected index");
  }
  s.out_dir = c["output"]["dir"].get<std::string>();
  require(!s.out_dir.empty(), "output.dir", "must not be empty");
  return s;
}

// ---------------------------------------------------------------- data

inline MomentVector initial_moments(const ScenarioConfig& s, std::size_t N) {
  const double m = s.physics.coupling.m;
  if (s.source == "vacuum") return vacuum_moments(m, s.mu, N);
  if (s.source == "thermal") return m > 0.0 ? massive_thermal_moments(m, s.mu, s.beta, N) : thermal_moments(s.beta, N);
  if (s.source == "bump") return bump_moments(s.bump, N, s.oracle.nodes);
  MomentVector out(N);
  for (std::size_t n = 0; n <= N && n < s.explicit_moments.size(); ++n) {
    const json& e = s.explicit_moments[n];
    out[n] = {e[0].get<double>(), e[1].get<double>(), e[2].get<double>()};
  }
  return out;
}

/// Physics with c1 calibrated to the initial state, when requested.
inline PhysicsParams effective_physics(const ScenarioConfig& s, const MomentVector& M) {
  PhysicsParams p = s.physics;
  if (s.calibrate) p.c1 = calibrate_c1(background_shifted(M[0], s.bg).pp, p.coupling.m, p.lambda0);
  return p;
}

inline SCEInit initial_data(const ScenarioConfig& s, const PhysicsParams& p, std::size_t N) {
  SCEInit in;
  in.M = initial_moments(s, N);
  in.jet = s.jet;
  in.bg = s.bg;
  if (s.mode == SolveMode::ConformalSecondOrder) {
    in.jet = conformal_consistent_jet(in, p);
    in.jet.a4.reset();
  } else if (s.energy_constraint) {
    in.jet.a3 = energy_constraint_a3(in.jet, in.M[0], in.M.at_or_zero(1), in.bg, p);
  }
  return in;
}

// ---------------------------------------------------------------- output

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> cols = {"tau",    "a",      "a1",     "a2",         "a3",
                                                "hubble", "ricci",  "M_pp_0", "M_pf_0",     "M_ff_0",
                                                "M_ff_1", "trace_residual", "energy_residual"};
  return cols;
}

inline std::string csv_text(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + fmt17(r[i]);
    out += '\n';
  }
  return out;
}

inline std::string trajectory_csv(const SCETrajectory& tr) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& j = tr.jets[i];
    const Triple M0 = tr.moments[i][0], M1 = tr.moments[i].at_or_zero(1);
    rows.push_back({tr.tau[i], j.a, j.a1, j.a2, j.a3, j.a1 / (j.a * j.a), 6.0 * j.a2 / (j.a * j.a * j.a), M0.pp, M0.fp,
                    M0.ff, M1.ff, tr.diag[i].trace_residual, tr.diag[i].energy_residual});
  }
  return csv_text(trajectory_columns(), rows);
}

/// Parsed CSV: header and numeric rows.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::out_of_range("no column " + name);
  }
};

inline Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      t.header = cells;
      first = false;
    } else {
      std::vector<double> r;
      for (const auto& c : cells) r.push_back(std::stod(c));
      t.rows.push_back(std::move(r));
    }
  }
  return t;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// CSV plus its JSON sidecar (config echo and provenance hash).
inline json emit_csv(const std::filesystem::path& csv_path, const std::string& csv, const json& config) {
  write_file(csv_path, csv);
  const std::string csv_hash = sha256_hex(csv);
  const std::string cfg_text = config.dump();
  json side = {{"config", config},
               {"provenance",
                {{"tool", kToolVersion},
                 {"config_sha256", sha256_hex(cfg_text)},
                 {"csv_sha256", csv_hash},
                 {"sha256", sha256_hex(cfg_text + "\n" + csv)}}}};
  std::filesystem::path side_path = csv_path;
  side_path.replace_extension(".json");
  write_file(side_path, side.dump(2) + "\n");
  return json{{"file", csv_path.filename().string()},
              {"sidecar", side_path.filename().string()},
              {"sha256", csv_hash}};
}

inline json emit_trajectory(const SCETrajectory& tr, const std::filesystem::path& path, const json& config) {
  return emit_csv(path, trajectory_csv(tr), config);
}

// ---------------------------------------------------------------- scenarios

struct RunOutcome {
  HaltReason halt = HaltReason::None;
  std::string message;
  json metrics = json::object();
  json bounds = json::object();
  double max_trace = 0.0, max_trace_rel = 0.0, max_energy = 0.0, max_energy_rel = 0.0;
  std::vector<std::pair<std::string, std::string>> csv;  // file name, content
};

namespace detail {

inline void absorb(RunOutcome& o, const SCETrajectory& tr) {
  for (const auto& d : tr.diag) {
    o.max_trace = std::max(o.max_trace, std::abs(d.trace_residual));
    o.max_energy = std::max(o.max_energy, std::abs(d.energy_residual));
    if (d.trace_scale > 0.0) o.max_trace_rel = std::max(o.max_trace_rel, std::abs(d.trace_residual) / d.trace_scale);
    if (d.energy_scale > 0.0)
      o.max_energy_rel = std::max(o.max_energy_rel, std::abs(d.energy_residual) / d.energy_scale);
  }
  if (!tr.ok() && o.halt == HaltReason::None) {
    o.halt = tr.halt;
    o.message = tr.message;
  }
  o.csv.emplace_back("trajectory.csv", trajectory_csv(tr));
}

inline SolveOptions solve_options(const ScenarioConfig& s) {
  SolveOptions o;
  o.tol = s.tol;
  o.samples = s.samples;
  return o;
}

inline double sup_a_gap(const SCETrajectory& x, const SCETrajectory& y) {
  double g = 0.0;
  for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) g = std::max(g, std::abs(x.jets[i].a - y.jets[i].a));
  return g;
}

inline bool uniform_grid(const SCETrajectory& tr) {
  if (tr.size() < 5) return false;
  const double h = tr.tau[1] - tr.tau[0];
  for (std::size_t i = 1; i < tr.size(); ++i)
    if (std::abs(tr.tau[i] - tr.tau[i - 1] - h) > 1e-9 * std::abs(h)) return false;
  return h != 0.0;
}

inline PotentialTrajectory prescribed_potential(const ScenarioConfig& s) {
  const double v0 = s.oracle.V0, amp = s.oracle.amplitude;
  return {[v0, amp](double t) { return v0 + amp * std::sin(t); }};
}

inline TowInSetup towin_setup(const ScenarioConfig& s, const PhysicsParams& p) {
  TowInSetup t;
  t.a_tow = minkowski_ramp(s.towin.H, s.towin.tau_a, s.towin.width);
  t.M_tow = initial_moments(s, s.N);
  t.bg_tow = s.bg;
  t.p = p;
  t.tau_tow = s.towin.tau_tow;
  t.tau_init = s.towin.tau_init;
  t.tau_free = s.towin.tau_free;
  t.tau_stop = s.towin.tau_stop;
  t.tol = std::min(s.tol, 1e-11);
  return t;
}

inline void towin_metrics(RunOutcome& o, const TowInResult& r, const PhysicsParams& p, double eps) {
  const SCETrajectory& tr = r.traj;
  absorb(o, tr);
  // before tau_free a'''' is prescribed, so residuals are reported after it
  o.max_trace = o.max_trace_rel = o.max_energy = o.max_energy_rel = 0.0;
  double trace = 0.0, energy = 0.0;
  if (r.free_index < tr.size()) {
    const auto fr = slice_from(tr, r.free_index);
    for (const auto& d : fr.diag) {
      o.max_trace = std::max(o.max_trace, std::abs(d.trace_residual));
      o.max_trace_rel = std::max(o.max_trace_rel, std::abs(d.trace_residual) / d.trace_scale);
      o.max_energy = std::max(o.max_energy, std::abs(d.energy_residual));
      o.max_energy_rel = std::max(o.max_energy_rel, std::abs(d.energy_residual) / d.energy_scale);
    }
    for (const auto& d : fr.diag) trace = std::max(trace, std::abs(d.trace_residual));
    if (uniform_grid(fr)) {
      const auto mon = constraint_monitor(fr, p);
      for (std::size_t i = 0; i < mon.size(); ++i)
        energy = std::max(energy, std::abs(mon[i].residual) / fr.diag[i].energy_scale);
    }
  }
  o.metrics["free_trace_residual"] = trace;
  o.metrics["free_energy_residual_relative"] = energy;
  o.metrics["jet_jump"] = r.jet_jump;
  o.metrics["moment_jump"] = r.moment_jump;
  o.metrics["eps"] = eps;
  o.metrics["jumps_below_eps"] = r.jet_jump < eps && r.moment_jump < eps;
}

}  // namespace detail

inline RunOutcome run_scenario(const ScenarioConfig& s) {
  RunOutcome o;
  const std::string& name = s.scenario;
  if (name == "minkowski-check" || name == "vacuum-evolve" || name == "thermal-evolve" || name == "conformal") {
    ScenarioConfig sc = s;
    if (name == "minkowski-check") sc.jet = {1.0, 0.0, 0.0, 0.0, std::nullopt};
    const MomentVector M = initial_moments(sc, sc.N);
    const PhysicsParams p = effective_physics(sc, M);
    const SCEInit in = initial_data(sc, p, sc.N);
    const auto tr = solve_sce(in, p, sc.mode, sc.t0, sc.t1, detail::solve_options(sc));
    detail::absorb(o, tr);
    o.metrics["c1"] = p.c1;
    o.metrics["initial_a3"] = in.jet.a3;
    o.metrics["t_stop"] = tr.t_stop;
    double dev = 0.0;
    for (const auto& j : tr.jets) dev = std::max(dev, std::abs(j.a - 1.0));
    o.metrics["max_abs_a_minus_1"] = dev;
    if (detail::uniform_grid(tr)) {
      const auto mon = constraint_monitor(tr, p);
      double defect = 0.0;
      for (const auto& c : mon) defect = std::max(defect, std::abs(c.defect));
      o.metrics["constraint_defect"] = defect;
    }
    if (name == "vacuum-evolve" || name == "thermal-evolve") {
      // tail sensitivity: same run with four more moment orders
      const SCEInit wide = initial_data(sc, p, sc.N + 4);
      o.metrics["tail_sensitivity_a"] = detail::sup_a_gap(tr, solve_sce(wide, p, sc.mode, sc.t0, sc.t1, detail::solve_options(sc)));
    }
    if (name == "conformal" && sc.mode == SolveMode::ConformalSecondOrder) {
      const auto other = solve_sce(in, p, SolveMode::FourthOrder, sc.t0, sc.t1, detail::solve_options(sc));
      o.metrics["fourth_order_gap_a"] = detail::sup_a_gap(tr, other);
    }
    return o;
  }
  if (name == "towin" || name == "shoot") {
    const MomentVector M = initial_moments(s, s.N);
    const PhysicsParams p = effective_physics(s, M);
    TowInSetup base = detail::towin_setup(s, p);
    o.metrics["c1"] = p.c1;
    if (name == "towin") {
      base.a_tow = shooting_profile(base.a_tow, s.towin.c, s.towin.delta, base.tau_tow, base.tau_init);
      detail::towin_metrics(o, tow_in(base), p, s.towin.eps);
      o.metrics["c"] = s.towin.c;
    } else {
      ShootOptions so;
      so.delta = s.towin.delta;
      const auto sh = shoot_energy_constraint(base, s.towin.c_lo, s.towin.c_hi, so);
      detail::towin_metrics(o, sh.run, p, s.towin.eps);
      o.metrics["c0"] = sh.c0;
      o.metrics["g"] = sh.g;
      o.metrics["g_scale"] = sh.g_scale;
      o.metrics["bisection_steps"] = sh.steps;
    }
    return o;
  }
  if (name == "oracle-compare") {
    const auto V = detail::prescribed_potential(s);
    const auto r = oracle_compare_report(s.bump, V, s.t0, s.t1, s.N, s.tol, s.oracle.nodes);
    std::vector<std::vector<double>> rows;
    for (std::size_t n = 0; n <= s.N; ++n) {
      const Triple a = r.via_modes[n], b = r.via_moments[n];
      rows.push_back({static_cast<double>(n), a.ff, a.fp, a.pp, b.ff, b.fp, b.pp, (a - b).norm(),
                      static_cast<long>(n) <= r.retained ? 1.0 : 0.0});
    }
    o.csv.emplace_back("oracle.csv", csv_text({"n", "ff_modes", "fp_modes", "pp_modes", "ff_moments", "fp_moments",
                                               "pp_moments", "gap", "retained"},
                                              rows));
    o.metrics["gap"] = r.max_abs_gap;
    o.metrics["retained"] = r.retained;
    o.metrics["gap_below_1e-6"] = r.max_abs_gap < 1e-6;
    return o;
  }
  if (name == "bounds-audit") {
    const auto V = detail::prescribed_potential(s);
    const MomentVector M = initial_moments(s, s.N);
    const auto times = linspace(s.t0, s.t1, s.samples);
    const auto traj = evolve_rk_samples(M, V, s.t0, s.t1, times, s.tol);
    const NormSpec geo(WeightSpec::geometric(s.omega));
    const NormSpec fw(WeightSpec::factorial(s.omega)), fv(WeightSpec::factorial(s.upsilon));
    const double g0 = weighted_norm(M, geo), f0 = weighted_norm(M, fw);
    std::vector<std::vector<double>> rows;
    int geo_viol = 0, fac_viol = 0, fac_valid = 0;
    double geo_margin = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const auto gb = geometric_bound(V, s.omega, s.t0, times[i]);
      const auto fb = factorial_bound(V, s.omega, s.upsilon, s.t0, times[i]);
      const double gr = g0 > 0.0 ? weighted_norm(traj[i], geo) / g0 : 0.0;
      const double fr = f0 > 0.0 ? weighted_norm(traj[i], fv) / f0 : 0.0;
      if (gr > gb.bound) ++geo_viol;
      if (fb.valid) {
        ++fac_valid;
        if (fr > fb.bound) ++fac_viol;
      }
      geo_margin = std::max(geo_margin, gr / gb.bound);
      rows.push_back({times[i], gr, gb.bound, fr, fb.valid ? fb.bound : -1.0, fb.valid ? 1.0 : 0.0});
    }
    o.csv.emplace_back("bounds.csv", csv_text({"tau", "geometric_ratio", "geometric_bound", "factorial_ratio",
                                               "factorial_bound", "factorial_valid"},
                                              rows));
    o.bounds = {{"selected", s.regime},
                {"geometric", {{"omega", s.omega}, {"violations", geo_viol}, {"max_ratio_over_bound", geo_margin}}},
                {"factorial",
                 {{"omega", s.omega}, {"upsilon", s.upsilon}, {"valid_samples", fac_valid}, {"violations", fac_viol}}}};
    o.metrics["violations"] = s.regime == "geometric" ? geo_viol : fac_viol;
    return o;
  }
  throw ValidationError("scenario", "unknown scenario '" + name + "'");
}

/// Runs one scenario and writes its CSV files, sidecars and report.json.
/// Returns the report; halts are recorded in it, not thrown.
inline json run(const ScenarioConfig& s, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir.string() + "'");
  }
  const auto t0 = std::chrono::steady_clock::now();
  RunOutcome o;
  try {
    o = run_scenario(s);
  } catch (const HaltError& e) {
    o = RunOutcome{};
    o.halt = e.reason();
    o.message = e.what();
    if (s.scenario != "oracle-compare" && s.scenario != "bounds-audit") o.csv.emplace_back("trajectory.csv", trajectory_csv({}));
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = json::array();
  for (const auto& [file, text] : o.csv) manifest.push_back(emit_csv(out_dir / file, text, s.raw));
  json report = {{"scenario", s.scenario},
                 {"wall_time_s", wall},
                 {"halt", to_string(o.halt)},
                 {"halt_message", o.message},
                 {"max_residuals",
                  {{"trace", o.max_trace},
                   {"trace_relative", o.max_trace_rel},
                   {"energy", o.max_energy},
                   {"energy_relative", o.max_energy_rel}}},
                 {"bounds", o.bounds},
                 {"metrics", o.metrics},
                 {"outputs", manifest}};
  report["outputs"].push_back({{"file", "report.json"}});
  write_file(out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace sce::cli
