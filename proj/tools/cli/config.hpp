#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scm/types.hpp"

namespace scm::cli {

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

/// Flat `key = value` text: numbers, booleans, quoted strings and one-line
/// arrays of those. `#` starts a comment. A document starting with `{` is read
/// as JSON instead.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

/// Subcommands that take a config.
const std::vector<std::string>& subcommands();

/// Defaults for a subcommand, every key present.
nlohmann::json default_config(const std::string& subcommand);
/// Named presets (overlays on the defaults).
nlohmann::json preset_config(const std::string& subcommand, const std::string& name);

/// defaults <- preset <- user keys <- seed override. Unknown keys, type
/// mismatches and invalid values raise ConfigError. A manifest document
/// ({"subcommand": ..., "config": {...}}) is accepted as user input.
nlohmann::json resolve_config(const std::string& subcommand, const nlohmann::json& user,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

// typed accessors on a resolved config
double get_double(const nlohmann::json& cfg, const std::string& key);
int get_int(const nlohmann::json& cfg, const std::string& key);
std::uint64_t get_seed(const nlohmann::json& cfg, const std::string& key);
bool get_bool(const nlohmann::json& cfg, const std::string& key);
std::string get_string(const nlohmann::json& cfg, const std::string& key);
std::vector<double> get_doubles(const nlohmann::json& cfg, const std::string& key);

} // namespace scm::cli
