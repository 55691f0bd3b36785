#include "config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

namespace scm::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

nlohmann::json parse_scalar(const std::string& raw, int line) {
    const std::string s = trim(raw);
    auto fail = [&](const std::string& why) {
        throw ConfigError("line " + std::to_string(line) + ": " + why + " ('" + s + "')");
    };
    if (s.empty()) fail("missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') fail("unterminated string");
        const std::string body = s.substr(1, s.size() - 2);
        if (body.find('"') != std::string::npos || body.find('\\') != std::string::npos) {
            fail("escapes are not supported in strings");
        }
        return body;
    }
    if (s == "true") return true;
    if (s == "false") return false;
    std::string digits;
    for (char c : s) {
        if (c != '_') digits.push_back(c);
    }
    const bool integral = digits.find_first_of(".eE") == std::string::npos &&
                          digits.find("inf") == std::string::npos && digits.find("nan") == std::string::npos;
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (*first == '+') ++first;
    if (integral) {
        if (*first == '-') {
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && p == last) return v;
        } else {
            std::uint64_t v = 0;
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && p == last) return v;
        }
        fail("invalid integer");
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last || !std::isfinite(v)) fail("invalid number");
    return v;
}

nlohmann::json parse_value(const std::string& raw, int line) {
    const std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated array");
        nlohmann::json arr = nlohmann::json::array();
        const std::string body = trim(s.substr(1, s.size() - 2));
        if (body.empty()) return arr;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (trim(item).empty()) continue; // trailing comma
            arr.push_back(parse_scalar(item, line));
        }
        return arr;
    }
    return parse_scalar(s, line);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

} // namespace

nlohmann::json parse_config_text(const std::string& text) {
    const std::string head = trim(text);
    if (!head.empty() && head.front() == '{') {
        try {
            nlohmann::json j = nlohmann::json::parse(text);
            if (!j.is_object()) throw ConfigError("JSON config must be an object");
            return j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("malformed JSON: ") + e.what());
        }
    }
    nlohmann::json out = nlohmann::json::object();
    std::stringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') throw ConfigError("line " + std::to_string(number) + ": tables are not supported");
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (!valid_key(key)) throw ConfigError("line " + std::to_string(number) + ": invalid key '" + key + "'");
        if (out.contains(key)) throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "'");
        out[key] = parse_value(s.substr(eq + 1), number);
    }
    return out;
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"spectrum", "trichotomy", "manifold", "burgers", "validate"};
    return names;
}

nlohmann::json default_config(const std::string& subcommand) {
    using nlohmann::json;
    if (subcommand == "spectrum") {
        return json{{"preset", "burgers"},  {"field", "burgers"},   {"n_modes", 6},
                    {"eigenvalues", json::array()},                  {"sigma", 0.0},
                    {"linearize", false},    {"dt", 1e-3},          {"horizon", 100.0},
                    {"block_len", 1.0},      {"top_k", 4},          {"burn_in_blocks", 0},
                    {"seed", 0}};
    }
    if (subcommand == "trichotomy") {
        return json{{"preset", "burgers"}, {"field", "burgers"}, {"n_modes", 4},
                    {"eigenvalues", json::array()},               {"sigma", 0.0},
                    {"dt", 1e-2},          {"alpha", 1.0},       {"beta", 2.0},
                    {"gamma", 0.5},        {"horizon", 10.0},    {"step", 0.1},
                    {"probes", 200},       {"seed", 0},          {"shift_max", 50.0},
                    {"shift_step", 1.0},   {"block_len", 1.0},   {"span", 20.0},
                    {"spectrum_horizon", 100.0}};
    }
    if (subcommand == "manifold") {
        return json{{"preset", "burgers"},
                    {"n_modes", 6},
                    {"alpha", 2.5},
                    {"beta", 2.5},
                    {"gamma", 0.1},
                    {"rho", 0.012},
                    {"eta", 0.0},
                    {"tol", 1e-13},
                    {"max_iter", 200},
                    {"scheme", "continuous"},
                    {"dt", 1e-2},
                    {"a_max", 0.006},
                    {"samples", 13},
                    {"sigma", 0.0},
                    {"seed", 0},
                    {"lip_scale", 1.0},
                    {"tangency_eps", 1e-3},
                    {"invariance_times", json::array({0.5, 1.0})},
                    {"invariance_probe_max", 0.02},
                    {"invariance_probes", 9}};
    }
    if (subcommand == "burgers") {
        return json{{"preset", "default"},
                    {"n_modes", 8},
                    {"sigma", 1e-3},
                    {"sigma_k", json::array()},
                    {"dt", 1e-3},
                    {"horizon", 20.0},
                    {"burn_in", 10.0},
                    {"a0", 0.1},
                    {"seed", 1},
                    {"n_seeds", 10},
                    {"sigma_levels", json::array({1e-3, 2e-3, 4e-3})},
                    {"scaling_a0", 0.0},
                    {"trajectory_stride", 10},
                    {"quadratic_sign", 1.0}};
    }
    if (subcommand == "validate") return json{{"preset", "default"}, {"quadratic_sign", 1.0}};
    throw ConfigError("unknown subcommand '" + subcommand + "'");
}

nlohmann::json preset_config(const std::string& subcommand, const std::string& name) {
    using nlohmann::json;
    if (subcommand == "spectrum") {
        if (name == "burgers") return json::object();
        if (name == "diagonal") {
            return json{{"field", "diagonal"}, {"n_modes", 3}, {"eigenvalues", json::array({1.0, 0.0, -2.0})},
                        {"top_k", 3},          {"horizon", 20.0}};
        }
        if (name == "example1") {
            return json{{"field", "example1"}, {"n_modes", 4}, {"sigma", 1.0}, {"dt", 1e-2}, {"horizon", 400.0}};
        }
    } else if (subcommand == "trichotomy") {
        if (name == "burgers") return json::object();
        if (name == "example1") return json{{"field", "example1"}, {"sigma", 1.0}};
    } else if (subcommand == "manifold") {
        if (name == "burgers") return json::object();
        if (name == "lip0") return json{{"lip_scale", 0.0}};
        if (name == "noncontracting") return json{{"rho", 0.05}};
        if (name == "noisy") return json{{"sigma", 1e-3}, {"seed", 1}};
        if (name == "discrete") return json{{"scheme", "discrete"}};
    } else if (subcommand == "burgers") {
        if (name == "default") return json::object();
        if (name == "deterministic") {
            return json{{"sigma", 0.0}, {"a0", 0.2}, {"n_seeds", 1}, {"sigma_levels", json::array()}};
        }
    } else if (subcommand == "validate") {
        if (name == "default") return json::object();
        if (name == "wrong_sign") return json{{"quadratic_sign", -1.0}};
    }
    throw ConfigError("unknown preset '" + name + "' for " + subcommand);
}

namespace {

bool same_kind(const nlohmann::json& def, const nlohmann::json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_number_integer()) return v.is_number_integer();
    if (def.is_number()) return v.is_number();
    if (def.is_array()) {
        if (!v.is_array()) return false;
        for (const auto& e : v) {
            if (!e.is_number()) return false;
        }
        return true;
    }
    return false;
}

const char* kind_name(const nlohmann::json& def) {
    if (def.is_boolean()) return "a boolean";
    if (def.is_string()) return "a string";
    if (def.is_number_integer()) return "an integer";
    if (def.is_number()) return "a number";
    return "an array of numbers";
}

void overlay(nlohmann::json& cfg, const nlohmann::json& src, const std::string& what) {
    for (auto it = src.begin(); it != src.end(); ++it) {
        if (!cfg.contains(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + what);
        const nlohmann::json& def = cfg[it.key()];
        if (!same_kind(def, it.value())) {
            throw ConfigError("key '" + it.key() + "' must be " + kind_name(def));
        }
        if (def.is_number_float() && it.value().is_number()) {
            cfg[it.key()] = it.value().get<double>();
        } else if (def.is_array()) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& e : it.value()) arr.push_back(e.get<double>());
            cfg[it.key()] = arr;
        } else {
            cfg[it.key()] = it.value();
        }
    }
}

} // namespace

nlohmann::json resolve_config(const std::string& subcommand, const nlohmann::json& user_in,
                              std::optional<std::uint64_t> seed_override) {
    nlohmann::json user = user_in;
    if (!user.is_object()) throw ConfigError("config must be a key/value table");
    if (user.contains("config")) {
        if (!user.contains("subcommand") || !user["subcommand"].is_string() ||
            user["subcommand"].get<std::string>() != subcommand) {
            throw ConfigError("manifest belongs to a different subcommand");
        }
        user = user["config"];
        if (!user.is_object()) throw ConfigError("manifest config must be an object");
    }
    nlohmann::json cfg = default_config(subcommand);
    std::string preset = cfg["preset"].get<std::string>();
    if (user.contains("preset")) {
        if (!user["preset"].is_string()) throw ConfigError("key 'preset' must be a string");
        preset = user["preset"].get<std::string>();
    }
    overlay(cfg, preset_config(subcommand, preset), "preset " + preset);
    overlay(cfg, user, "config");
    cfg["preset"] = preset;
    if (seed_override) {
        if (!cfg.contains("seed")) throw ConfigError("--seed is not used by " + subcommand);
        cfg["seed"] = *seed_override;
    }
    if (cfg.contains("seed") && cfg["seed"].is_number_integer() && !cfg["seed"].is_number_unsigned() &&
        cfg["seed"].get<std::int64_t>() < 0) {
        throw ConfigError("seed must be nonnegative");
    }
    return cfg;
}

double get_double(const nlohmann::json& cfg, const std::string& key) { return cfg.at(key).get<double>(); }

int get_int(const nlohmann::json& cfg, const std::string& key) {
    const auto v = cfg.at(key).get<std::int64_t>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError("key '" + key + "' is out of range");
    }
    return static_cast<int>(v);
}

std::uint64_t get_seed(const nlohmann::json& cfg, const std::string& key) {
    return cfg.at(key).get<std::uint64_t>();
}

bool get_bool(const nlohmann::json& cfg, const std::string& key) { return cfg.at(key).get<bool>(); }

std::string get_string(const nlohmann::json& cfg, const std::string& key) {
    return cfg.at(key).get<std::string>();
}

std::vector<double> get_doubles(const nlohmann::json& cfg, const std::string& key) {
    return cfg.at(key).get<std::vector<double>>();
}

} // namespace scm::cli
