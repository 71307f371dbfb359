#ifndef BIFOCUS_SCENARIO_HPP
#define BIFOCUS_SCENARIO_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace bifocus {

/// Exit codes shared by the scenario runner and the CLI: 0 success,
/// 2 contract violation (bad config, broken precondition), 3 numeric failure
/// (divergence, degenerate k, exhausted search).
inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 2;
inline constexpr int kExitNumeric = 3;

/// RFC-4180 CSV row: fields joined by commas, quoted when they contain a
/// comma, quote, or newline. Doubles are printed in shortest round-trip form.
std::string csv_row(const std::vector<std::string>& fields);
std::string format_double(double v);

/// Runs the scenario described by a JSON config ("kind" discriminator;
/// unknown keys are errors; paths resolve relative to the config directory).
/// Writes results.csv plus summary.txt (and the output model for the raising
/// kinds) into the configured out_dir. Errors are reported on stderr and
/// mapped to the exit codes above. When expected_kind is nonempty the config
/// kind must match it.
int run_scenario(const std::filesystem::path& config_path,
                 const std::string& expected_kind = "");

/// Deterministic reference-model generation: `count` files model_###.json
/// under out_dir. Returns an exit code.
int run_gen_reference(std::uint64_t seed, int count, int order,
                      const std::filesystem::path& out_dir);

/// Writes the fixed order-2 model used by the renormalization studies.
int run_gen_renorm_reference(const std::filesystem::path& out_file);

} // namespace bifocus

#endif
