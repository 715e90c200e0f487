#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "gefz/commands.hpp"
#include "gefz/numeric.hpp"
#include "gefz/report.hpp"
#include "gefz/verify.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gefz: zeros of the Gaussian entire function, linear statistics and their variance"};
  app.set_version_flag("--version", std::string(gefz::version()));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = "gefz_out";
  app.add_option("--config", config_path, "JSON configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--threads", threads, "worker threads (0 = hardware concurrency)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out, "output directory");

  for (const auto& name : gefz::command_names()) app.add_subcommand(name, "run the " + name + " command");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gefz::kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  gefz::CommandOptions options;
  if (*seed_opt) options.seed = seed;
  options.threads = threads;
  options.out_dir = out;
  try {
    const nlohmann::json config =
        config_path.empty() ? nlohmann::json::object() : gefz::load_json_file(config_path);
    return gefz::run_command(command, config, options);
  } catch (const gefz::ConfigError& e) {
    std::cerr << "gefz: configuration error: " << e.what() << "\n";
    return gefz::kExitConfig;
  } catch (const gefz::ToleranceError& e) {
    std::cerr << "gefz: numerical tolerance not met: " << e.what() << "\n";
    return gefz::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "gefz: " << e.what() << "\n";
    return gefz::kExitNumerical;
  }
}
