// sce run <config> [--out DIR] [--override key=value]...
// sce list-scenarios
// sce validate <config> [--override key=value]...

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "cli.hpp"

namespace cli = sce::cli;

namespace {

cli::ScenarioConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  return cli::parse_config(cli::resolve_config(cli::read_json_file(path), overrides));
}

int run_command(const std::string& path, const std::string& out, const std::vector<std::string>& overrides) {
  const auto cfg = load(path, overrides);
  const std::string dir = out.empty() ? cfg.out_dir : out;
  const auto report = cli::run(cfg, dir);
  std::cout << report.dump(2) << "\n";
  if (report["halt"] != "none") {
    std::cerr << "numerical halt: " << report["halt"].get<std::string>() << ": "
              << report["halt_message"].get<std::string>() << "\n";
    return cli::kHalt;
  }
  return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical Einstein equation scenario runner"};
  app.require_subcommand(1);
  std::string config, out;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "run a scenario config, writing CSV, sidecar JSON and report.json");
  run->add_option("config", config, "JSON config file")->required();
  run->add_option("--out", out, "output directory (overrides output.dir)");
  run->add_option("--override", overrides, "dotted key=value, applied after the file")->allow_extra_args(false);

  auto* list = app.add_subcommand("list-scenarios", "print the scenario names");

  auto* validate = app.add_subcommand("validate", "check a config against the schema");
  validate->add_option("config", config, "JSON config file")->required();
  validate->add_option("--override", overrides, "dotted key=value, applied after the file")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kValidation;
  }

  try {
    if (*list) {
      for (const auto& s : cli::scenarios()) std::cout << s.name << "\t" << s.description << "\n";
      return cli::kOk;
    }
    if (*validate) {
      const auto cfg = load(config, overrides);
      std::cout << cfg.raw.dump(2) << "\n";
      return cli::kOk;
    }
    return run_command(config, out, overrides);
  } catch (const cli::ValidationError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return cli::kValidation;
  } catch (const cli::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return cli::kIo;
  } catch (const sce::HaltError& e) {
    std::cerr << "numerical halt: " << to_string(e.reason()) << ": " << e.what() << "\n";
    return cli::kHalt;
  } catch (const std::invalid_argument& e) {
    // precondition failures not caught by the schema (e.g. no sign change in shoot)
    std::cerr << "invalid config: " << e.what() << "\n";
    return cli::kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return cli::kInternal;
  }
}
