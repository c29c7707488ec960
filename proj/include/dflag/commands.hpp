#pragma once

// The four CLI commands.  Each returns its JSON report; run() adds config
// loading, overrides and the mapping from exceptions to exit codes.

#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string_view>

#include "dflag/config.hpp"

namespace dflag {

using Json = nlohmann::ordered_json;

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_irregular = 4 };

Json cmd_analyze(const JobConfig& cfg);
/// Writes section_<k>.csv into out_dir and a residual summary to `log`.
Json cmd_sections(const JobConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
Json cmd_metric_check(const JobConfig& cfg);
Json cmd_transport(const JobConfig& cfg);

struct Overrides {
  std::optional<double> tau_rank;
  std::optional<std::size_t> grid;
};

void apply(const Overrides& overrides, JobConfig& cfg);

/// Runs `command` (analyze | sections | metric-check | transport), prints the
/// JSON report on `out` and diagnostics on `err`; returns the exit code.
int run(std::string_view command, const std::filesystem::path& config, const Overrides& overrides,
        const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

}  // namespace dflag
