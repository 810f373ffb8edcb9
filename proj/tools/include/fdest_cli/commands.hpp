#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fdest_cli/config.hpp"

namespace fdest::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kNoSolution = 2,
    kConfigError = 3,
    kUnsupported = 4,
};

/// Flags shared by every subcommand; they override the config file.
struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<double> tol;
    std::optional<std::string> output;
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "FDEST_OUTPUT_DIR";

/// --output, then the config's "output", then $FDEST_OUTPUT_DIR, then ".".
std::filesystem::path output_directory(const GlobalOptions& g, const std::optional<std::string>& from_config);

int cmd_design(const ScenarioConfig& cfg, const GlobalOptions& g, std::ostream& out, std::ostream& err);
int cmd_check(const ScenarioConfig& cfg, const std::filesystem::path& design, const GlobalOptions& g,
              std::ostream& out, std::ostream& err);
int cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& design, const GlobalOptions& g,
                 std::ostream& out, std::ostream& err);

struct ReactorFlags {
    bool paper_literal = false;
    std::optional<double> t_end;
    std::optional<double> dt;
    bool no_disturbance = false;
    bool no_faults = false;
    std::optional<double> alpha2;
    std::optional<int> substeps;
    bool computed_steady_state = false;
    bool absolute = false;
};

int cmd_reactor(const ReactorFlags& flags, const GlobalOptions& g, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fdest::cli
