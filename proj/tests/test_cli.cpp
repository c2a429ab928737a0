#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace sce;
using namespace sce::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sce_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

struct Invocation {
  int code;
  std::string out, err;
};

Invocation invoke(const std::string& args, const fs::path& dir) {
  const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = std::string(SCE_BINARY) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

ScenarioConfig config_for(const std::string& scenario, const std::vector<std::string>& overrides = {}) {
  return parse_config(resolve_config(json{{"scenario", scenario}}, overrides));
}

}  // namespace

TEST(Config, UnknownKeysAndTypesRejectedWithPath) {
  try {
    resolve_config(json::parse(R"({"scenario":"minkowski-check","physics":{"mass":1}})"), {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("physics.mass"), std::string::npos) << e.what();
  }
  try {
    resolve_config(json::parse(R"({"N":"twelve"})"), {});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("N: expected number"), std::string::npos) << e.what();
  }
  EXPECT_THROW(resolve_config(json::parse(R"({"scenario":"nope"})"), {}), ValidationError);
  EXPECT_THROW(resolve_config(json::array(), {}), ValidationError);
}

TEST(Config, NonPositiveScaleFactorRejected) {
  try {
    config_for("vacuum-evolve", {"initial.jet.a=-1"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()), "initial.jet.a: must be positive");
  }
  EXPECT_THROW(config_for("conformal", {"physics.c3=0"}), ValidationError);
  EXPECT_THROW(config_for("shoot", {"towin.tau_free=0.9"}), ValidationError);
  EXPECT_THROW(config_for("oracle-compare", {"N=4"}), ValidationError);
  EXPECT_THROW(config_for("minkowski-check", {"initial.moments.source=explicit"}), ValidationError);
}

TEST(Config, PrecedenceFlagOverFileOverDefault) {
  const json file = json::parse(R"({"scenario":"vacuum-evolve","physics":{"m":2.0},"N":8})");
  const json c = resolve_config(file, {"physics.m=3", "output.dir=elsewhere"});
  EXPECT_EQ(c["physics"]["m"], 3.0);
  EXPECT_EQ(c["N"], 8);
  EXPECT_EQ(c["output"]["dir"], "elsewhere");
  EXPECT_EQ(c["initial"]["jet"]["a1"], 0.1);  // scenario default
  EXPECT_EQ(c["physics"]["kappa"], 1.0);      // shared default
  // scenario given only as an override picks that scenario's defaults
  EXPECT_EQ(resolve_config(json::object(), {"scenario=thermal-evolve"})["initial"]["moments"]["source"], "thermal");
  EXPECT_THROW(override_patch("novalue"), ValidationError);
  EXPECT_THROW(override_patch("a..b=1"), ValidationError);
  EXPECT_EQ(override_patch("mode=conformal-second-order"), json::parse(R"({"mode":"conformal-second-order"})"));
}

TEST(Config, RoundTripIsIdempotent) {
  for (const auto& s : scenarios()) {
    const json once = resolve_config(json{{"scenario", s.name}}, {"physics.c2=0.125"});
    const json twice = resolve_config(json::parse(once.dump()), {});
    EXPECT_EQ(once.dump(), twice.dump()) << s.name;
    EXPECT_NO_THROW(parse_config(twice)) << s.name;
  }
}

TEST(Output, EmptyAndStaticTrajectories) {
  const std::string empty = trajectory_csv({});
  EXPECT_EQ(empty,
            "tau,a,a1,a2,a3,hubble,ricci,M_pp_0,M_pf_0,M_ff_0,M_ff_1,trace_residual,energy_residual\n");
  const auto cfg = config_for("minkowski-check", {"tolerances.samples=11"});
  const auto o = run_scenario(cfg);
  ASSERT_EQ(o.csv.size(), 1u);
  const Table t = parse_csv(o.csv[0].second);
  ASSERT_EQ(t.rows.size(), 11u);
  for (const auto& r : t.rows) {
    for (std::size_t c = 1; c < r.size(); ++c) {
      if (t.header[c] == "trace_residual" || t.header[c] == "energy_residual") continue;
      // a'''' at the fixed point is a cancellation, zero only to roundoff
      EXPECT_NEAR(r[c], t.rows[0][c], 1e-15 * (1.0 + std::abs(t.rows[0][c]))) << t.header[c];
    }
  }
}

TEST(Output, CsvRoundTripReproducesEnergyResidual) {
  const auto cfg = config_for("vacuum-evolve", {"tolerances.samples=21"});
  const auto o = run_scenario(cfg);
  ASSERT_EQ(o.halt, HaltReason::None) << o.message;
  const Table t = parse_csv(o.csv[0].second);
  const MomentVector M = initial_moments(cfg, cfg.N);
  const PhysicsParams p = effective_physics(cfg, M);
  for (const auto& r : t.rows) {
    const ScaleFactorJet j{r[t.column("a")], r[t.column("a1")], r[t.column("a2")], r[t.column("a3")], std::nullopt};
    const Triple M0{r[t.column("M_ff_0")], r[t.column("M_pf_0")], r[t.column("M_pp_0")]};
    const Triple M1{r[t.column("M_ff_1")], 0.0, 0.0};
    const TermSum e = energy_terms(j, M0, M1, {}, p);
    EXPECT_NEAR(e.value, r[t.column("energy_residual")], 1e-14 * e.scale);
    EXPECT_NEAR(r[t.column("hubble")], j.a1 / (j.a * j.a), 1e-15);
  }
}

TEST(Output, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Run, WritesOutputsAndReport) {
  const fs::path dir = scratch("run");
  const auto cfg = config_for("minkowski-check");
  const json report = run(cfg, dir / "out");
  EXPECT_EQ(report["halt"], "none");
  EXPECT_LT(report["max_residuals"]["trace"].get<double>(), 1e-12);
  EXPECT_LT(report["max_residuals"]["energy"].get<double>(), 1e-12);
  EXPECT_TRUE(fs::exists(dir / "out" / "trajectory.csv"));
  const json side = json::parse(slurp(dir / "out" / "trajectory.json"));
  EXPECT_EQ(side["config"], cfg.raw);
  EXPECT_EQ(side["provenance"]["csv_sha256"], sha256_hex(slurp(dir / "out" / "trajectory.csv")));
  EXPECT_EQ(json::parse(slurp(dir / "out" / "report.json")), report);
}

TEST(Binary, ListValidateAndRun) {
  const fs::path dir = scratch("binary");
  auto r = invoke("list-scenarios", dir);
  EXPECT_EQ(r.code, 0);
  for (const auto& s : scenarios()) EXPECT_NE(r.out.find(s.name), std::string::npos);

  spit(dir / "mink.json", R"({"scenario":"minkowski-check"})");
  r = invoke("validate " + (dir / "mink.json").string(), dir);
  EXPECT_EQ(r.code, 0) << r.err;

  r = invoke("run " + (dir / "mink.json").string() + " --out " + (dir / "m").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(slurp(dir / "m" / "report.json"));
  EXPECT_LT(rep["max_residuals"]["trace"].get<double>(), 1e-12);
  EXPECT_LT(rep["max_residuals"]["energy"].get<double>(), 1e-12);

  spit(dir / "oracle.json", R"({"scenario":"oracle-compare"})");
  r = invoke("run " + (dir / "oracle.json").string() + " --out " + (dir / "o").string(), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(json::parse(slurp(dir / "o" / "report.json"))["metrics"]["gap"].get<double>(), 1e-6);
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("codes");
  spit(dir / "bad.json", R"({"scenario":"vacuum-evolve","initial":{"jet":{"a":0.0}}})");
  auto r = invoke("run " + (dir / "bad.json").string() + " --out " + (dir / "x").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("initial.jet.a"), std::string::npos) << r.err;

  spit(dir / "typo.json", R"({"scenario":"vacuum-evolve","spam":1})");
  EXPECT_EQ(invoke("validate " + (dir / "typo.json").string(), dir).code, 2);
  spit(dir / "broken.json", "{not json");
  EXPECT_EQ(invoke("validate " + (dir / "broken.json").string(), dir).code, 2);
  EXPECT_EQ(invoke("frobnicate", dir).code, 2);

  spit(dir / "ok.json", R"({"scenario":"minkowski-check"})");
  EXPECT_EQ(invoke("run " + (dir / "missing.json").string(), dir).code, 4);
  spit(dir / "blocker", "a file where the output directory should go");
  EXPECT_EQ(invoke("run " + (dir / "ok.json").string() + " --out " + (dir / "blocker").string(), dir).code, 4);

  // massless conformal run contracting to a = 0
  spit(dir / "crunch.json",
       R"({"scenario":"conformal","physics":{"m":0.0,"calibrate_c1":false},
           "initial":{"jet":{"a1":-2.0},"background":{"phi":0.0,"pi":0.0}},"span":{"t1":2.0}})");
  r = invoke("run " + (dir / "crunch.json").string() + " --out " + (dir / "c").string(), dir);
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("numerical halt"), std::string::npos);
  const json rep = json::parse(slurp(dir / "c" / "report.json"));
  EXPECT_NE(rep["halt"], "none");
}

TEST(Binary, DeterministicCsv) {
  const fs::path dir = scratch("determinism");
  spit(dir / "v.json", R"({"scenario":"vacuum-evolve"})");
  ASSERT_EQ(invoke("run " + (dir / "v.json").string() + " --out " + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(invoke("run " + (dir / "v.json").string() + " --out " + (dir / "b").string() +
                       " --override tolerances.samples=101",
                   dir)
                .code,
            0);
  EXPECT_EQ(slurp(dir / "a" / "trajectory.csv"), slurp(dir / "b" / "trajectory.csv"));
  EXPECT_EQ(slurp(dir / "a" / "trajectory.json"), slurp(dir / "b" / "trajectory.json"));
}
