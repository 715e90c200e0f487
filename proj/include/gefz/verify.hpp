#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gefz {

/// Exit codes shared by the CLI and the acceptance runner.
inline constexpr int kExitPass = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitStatistical = 4;

enum class CriterionKind { kNumerical, kStatistical };

struct CriterionResult {
  int id = 0;
  std::string title;
  CriterionKind kind = CriterionKind::kNumerical;
  bool passed = false;
  std::string summary;  ///< one-line human-readable evidence
  nlohmann::ordered_json details;
};

struct VerifyReport {
  std::vector<CriterionResult> criteria;
  bool all_passed() const;
  /// 0 when everything passed; 3 if a numerical criterion failed, else 4.
  int exit_code() const;
};

struct VerifyOptions {
  std::optional<std::uint64_t> seed;  ///< overrides the config's master seed
  int threads = 0;                    ///< 0 → hardware concurrency
  std::filesystem::path out_dir = "verify_out";
  std::set<int> only;                 ///< empty → all criteria
  /// Called after each criterion (progress reporting).
  std::function<void(const CriterionResult&)> on_result;
};

/// Runs the acceptance suite described by `config` (schema-validated;
/// ConfigError on unknown keys) and writes per-criterion CSV/JSON files plus
/// verdict.json into out_dir. Criterion 15 reruns 1–14 into
/// out_dir/rerun with a different thread count and compares the bodies.
VerifyReport run_verify(const nlohmann::json& config, const VerifyOptions& options);

/// File content with provenance lines ('#' CSV lines, the JSON "provenance"
/// key, the leading SVG comment) removed.
std::string output_body(const std::filesystem::path& file);

/// Lists CSV/JSON files (relative paths, sorted) whose bodies differ between
/// two output directories, including files present on one side only.
std::vector<std::string> compare_output_dirs(const std::filesystem::path& a,
                                             const std::filesystem::path& b);

}  // namespace gefz
