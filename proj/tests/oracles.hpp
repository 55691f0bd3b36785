#pragma once

#include <array>

// Frozen reference values. Every number here is derived by hand from closed
// forms and never regenerated from library output.
namespace scm::oracle {

// Burgers linear part 1 - k^2
inline constexpr std::array<double, 6> burgers_exponents{0.0, -3.0, -8.0, -15.0, -24.0, -35.0};

// center-manifold expansion at sigma = 0
inline constexpr double c2 = -1.0 / 6.0;
inline constexpr double c3 = 1.0 / 32.0;
// reduced drift a' = d3 a^3
inline constexpr double d3 = -1.0 / 12.0;

// contraction constant: K = 1, Lip = 0.1, gap (1, 2, 0.5), eta = 0.75
inline constexpr double contraction_hand = 0.1 * (1.0 / 0.25 + 1.0 / 1.25 + 1.0 / 0.25);

// OU stationary variance 1 / (2 rate)
inline constexpr double ou_variance_rate1 = 0.5;
inline constexpr double ou_variance_k2 = 1.0 / 6.0;

// mollifier: sup |sigma'| on [1, 2]
inline constexpr double mollifier_slope = 2.0;

// tolerances from the acceptance criteria
inline constexpr double spectrum_tol = 0.05;
inline constexpr double c2_tol = 1e-3;
inline constexpr double c3_tol = 2e-3;
inline constexpr double lp_coeff_tol = 5e-3;
inline constexpr double drift_rel_tol = 0.02;
inline constexpr double closed_form_tol = 1e-4;
inline constexpr double ratio_slack = 0.05;
inline constexpr double tangency_tol = 1e-2;
inline constexpr double invariance_tol = 5e-3;
inline constexpr double horizon_change_tol = 0.05;
inline constexpr double tempered_slope_tol = 0.02;
inline constexpr double met_exponent_tol = 1e-8;
inline constexpr double met_angle_tol = 1e-6;
inline constexpr double rms_tol = 5e-3;
inline constexpr double slope_lo = 1.6;
inline constexpr double slope_hi = 2.4;

} // namespace scm::oracle
