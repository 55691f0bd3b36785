#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scm::cli {

struct OutputFile {
    std::string name;
    std::string content;
};

struct CommandResult {
    std::vector<OutputFile> files; ///< written to --out only when the command succeeds
    std::string summary;           ///< printed to stdout
    int exit_code = 0;
};

CommandResult run_spectrum(const nlohmann::json& cfg, int threads);
CommandResult run_trichotomy(const nlohmann::json& cfg, int threads);
CommandResult run_manifold(const nlohmann::json& cfg, int threads);
CommandResult run_burgers(const nlohmann::json& cfg, int threads);
CommandResult run_validate(const nlohmann::json& cfg, int threads);

CommandResult run_command(const std::string& subcommand, const nlohmann::json& cfg, int threads);

/// manifest.json content for a resolved config.
std::string manifest_text(const std::string& subcommand, const nlohmann::json& cfg);

/// Full command line entry point. Exit codes: 0 ok, 1 numerical refusal,
/// 2 config error; validate returns its failure count (capped at 125).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace scm::cli
