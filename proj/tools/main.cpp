#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gamma_elliptic/errors.hpp"
#include "run_config.hpp"
#include "tasks.hpp"

namespace ge = gamma_elliptic;
namespace cli = gamma_elliptic::cli;

int main(int argc, char** argv) {
  CLI::App app{"Finite element solver for elliptic problems on closed surfaces"};
  std::string task;
  std::string config_path;
  std::string output;
  bool deterministic = false;
  bool override_conditions = false;
  bool print_config = false;

  app.add_option("task", task, "solve | study | check | mesh | export")
      ->required()
      ->check(CLI::IsMember({"solve", "study", "check", "mesh", "export"}));
  app.add_option("-c,--config", config_path, "YAML run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--out", output, "output directory (overrides the config)");
  app.add_flag("--deterministic", deterministic, "single thread, zeroed timings");
  app.add_flag("--override-conditions", override_conditions, "run even when a well-posedness check fails");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? cli::kExitOk : cli::kExitParse;
  }

  try {
    cli::RunConfig config = cli::load_run_config(config_path);
    config.task = cli::parse_task(task);
    if (!output.empty()) config.output = output;
    if (deterministic) config.deterministic = true;
    if (override_conditions) config.override_conditions = true;
    if (print_config) {
      std::cout << cli::emit_run_config(config);
      return cli::kExitOk;
    }
    return cli::run(config, std::cout);
  } catch (const ge::ParseError& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << " (at offset " << e.position() << ")\n";
    return cli::kExitParse;
  } catch (const ge::WellPosednessError& e) {
    std::cerr << "violated: " << e.what() << '\n';
    return cli::kExitViolated;
  } catch (const ge::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return cli::kExitFailure;
  }
}
