#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace gefz {

struct CommandOptions {
  std::optional<std::uint64_t> seed;  ///< overrides the config's "seed"
  int threads = 0;
  std::filesystem::path out_dir = "gefz_out";
};

/// Subcommand names accepted by run_command.
const std::vector<std::string>& command_names();

/// Runs one subcommand on a parsed config and returns the process exit code
/// (0 pass, 3 numerical-tolerance failure, 4 statistical-acceptance failure).
/// Schema violations throw ConfigError; the caller maps them to exit code 2.
int run_command(const std::string& name, const nlohmann::json& config, const CommandOptions& options);

}  // namespace gefz
