#pragma once

#include <string>
#include <vector>

namespace scm::cli {

struct OracleResult {
    std::string module;
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Built-in oracle suite. `quadratic_sign` feeds every Burgers check so a
/// flipped sign shows up as failures.
std::vector<OracleResult> run_oracle_suite(double quadratic_sign = 1.0);

std::string format_oracle_table(const std::vector<OracleResult>& results);

} // namespace scm::cli
