#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scm/cocycle.hpp"
#include "scm/lyapunov_perron.hpp"
#include "scm/noise.hpp"

namespace scm {

/// Galerkin-truncated stochastic Burgers equation on (0, pi) with Dirichlet
/// boundaries in the basis sin(kx), k = 1..N:
///   du = (u_xx + u - s u u_x) dt + sigma sum_k sigma_k sin(kx) dW_k
/// with s = quadratic_sign (+1 for the physical equation).
struct BurgersConfig {
    int n_modes = 8;
    double sigma = 0.0;
    std::vector<double> sigma_k;  ///< per-mode scales, empty means all 1
    double dt = 1e-3;
    double horizon = 20.0;
    double burn_in = 10.0;        ///< noise history before t = 0 (OU start)
    std::uint64_t seed = 0;
    double quadratic_sign = 1.0;
    double blowup_cap = 1e3;

    void validate() const;
    Vector mode_scales() const;
};

/// 1 - k^2, k = 1..N.
Vector burgers_eigenvalues(int n_modes);

/// Sine-basis projection of u u_x:
/// [u u_x]_k = (k/4) sum_{j+l=k} u_j u_l - (k/2) sum_l u_l u_{l+k}.
Vector quadratic_term(const Vector& u);
Matrix quadratic_term_jacobian(const Vector& u);

/// -s [u u_x] as a symmetric quadratic form.
QuadraticForm burgers_quadratic_form(int n_modes, double sign = 1.0);

/// (1 - k^2) u_k - s [u u_x]_k (noise excluded).
Vector galerkin_rhs(const Vector& u, const BurgersConfig& config);

/// Field with diagonal generator, quadratic nonlinearity and additive scales sigma sigma_k.
VectorField burgers_field(const BurgersConfig& config);
/// Path with one channel per mode on [-burn_in, horizon].
NoisePath burgers_path(const BurgersConfig& config);

struct ModeTrajectory {
    std::vector<double> t;
    std::vector<Vector> u;
};

/// Exponential-Euler path of the mode amplitudes from u0 at t = 0, recorded every `stride` steps.
ModeTrajectory simulate(const BurgersConfig& config, const Vector& u0, const NoisePath& path, int stride = 1);
ModeTrajectory simulate(const BurgersConfig& config, const Vector& u0, int stride = 1);

/// CSV columns t, u_1 .. u_N.
void write_trajectory_csv(std::ostream& out, const ModeTrajectory& traj);

/// Reduced amplitude drift with phi_k the scaled white-noise values sigma_k dW_k/dt:
/// -a^3/12 + sigma phi_1 + (a/6) sigma phi_2 + a^2 sigma (phi_1/18 + phi_3/96).
double reduced_drift(double a, double sigma, double phi1, double phi2, double phi3);

/// One Euler-Maruyama step of the reduced model over grid step n of the path.
double reduced_step(double a, long n, const NoisePath& path, const BurgersConfig& config);

/// Reduced amplitudes at every grid step from t = 0 to horizon.
std::vector<double> reduced_simulate(const BurgersConfig& config, double a0, const NoisePath& path);

/// a0 / sqrt(1 + a0^2 t / 6).
double reduced_closed_form(double a0, double t);

/// y' = -rate y + x(t) integrated exactly for piecewise-linear x, started from
/// the quasi-steady value x / rate at the first sample.
GridSignal exponential_filter(const GridSignal& x, double rate);

/// Stationary convolution processes used by the expansion, all scaled by sigma_k.
struct ExpansionProcesses {
    int n_modes = 0;
    std::vector<GridSignal> linear; ///< [k] = H_k phi_k for k >= 2 (index k)
    std::vector<GridSignal> cross;  ///< [k] = coefficient of a sigma on mode k
};

ExpansionProcesses expansion_processes(const NoisePath& path, const BurgersConfig& config);

struct ExpansionSnapshot {
    Vector linear; ///< mode k-1: H_k phi_k (0 for k = 1)
    Vector cross;
};

ExpansionSnapshot snapshot(const ExpansionProcesses& p, long index);

/// Mode amplitudes of the center-manifold expansion:
///   mode 1: a + a sigma (-(1/6) H_2 phi_2)
///   mode 2: -a^2/6 + sigma H_2 phi_2 + a sigma ((1/3) H_2 phi_1 + H_2 H_3 phi_3)
///   mode 3: a^3/32 + sigma H_3 phi_3 + a sigma (3/2) H_3 (H_4 phi_4 - H_2 phi_2)
///   mode k >= 4: sigma H_k phi_k + a sigma (k/2) H_k (H_{k+1} phi_{k+1} - H_{k-1} phi_{k-1})
Vector manifold_expansion(double a, double sigma, const ExpansionSnapshot& s);

struct SlavingSample {
    double a = 0.0;
    double u2 = 0.0;
    double u3 = 0.0;
    double drift = 0.0; ///< du_1/dt on the settled state
    double t = 0.0;
};

struct ManifoldFit {
    double c2 = 0.0, c2_next = 0.0; ///< u2 ~ c2 a^2 + c2_next a^4
    double c3 = 0.0, c3_next = 0.0; ///< u3 ~ c3 a^3 + c3_next a^5
    double d3 = 0.0, d3_next = 0.0; ///< du_1/dt ~ d3 a^3 + d3_next a^5
    double residual2 = 0.0, residual3 = 0.0, residual_drift = 0.0;
    std::vector<SlavingSample> samples;
};

/// First time t >= 5/3 with max_{k=2,3} |du_k/dt - k (u_k/u_1) du_1/dt| <= drift_tol
/// along the sigma = 0 trajectory from u0 = a sin x.
SlavingSample settle(const BurgersConfig& config, double a, double max_time = 40.0, double drift_tol = 1e-6);

/// Least-squares fits over settled states at the given a levels (sigma = 0).
ManifoldFit fit_manifold_coefficients(const BurgersConfig& config, const std::vector<double>& levels,
                                      int threads = 1);

struct SeedError {
    std::uint64_t seed = 0;
    double sup = 0.0;
    double rms = 0.0;
};

struct ComparisonReport {
    double sigma = 0.0;
    double a0 = 0.0;
    double horizon = 0.0;
    std::vector<SeedError> seeds;
    double rms = 0.0; ///< sqrt of the mean squared per-seed rms
    double sup = 0.0;
};

/// Full simulation started on the expansion at t = 0 against the reduced model
/// on the same path; the error is |u_1 - (a - (1/6) a sigma H_2 phi_2)| at
/// every grid time in [0, horizon].
SeedError compare_seed(const BurgersConfig& config, double a0);
ComparisonReport compare_full_vs_reduced(const BurgersConfig& config, double a0,
                                         const std::vector<std::uint64_t>& seeds, int threads = 1);

struct SigmaScaling {
    std::vector<double> sigmas;
    std::vector<double> rms;
    double slope = 0.0;
};

SigmaScaling sigma_scaling(const BurgersConfig& config, double a0, const std::vector<double>& sigmas,
                           const std::vector<std::uint64_t>& seeds, int threads = 1);

/// Multiplicative forcing z(theta_t omega) u for the center-manifold problem.
struct MultiplicativeNoise {
    GridSignal z;
    double k_horizon = 10.0; ///< |t| range used for the tempered bounds K and Lip
    double k_step = 0.1;
};

/// Center-manifold problem for the truncation with coordinate frames and
/// cut-off radius rho. Without noise K = 1. With noise the field gains z u,
/// the nonlinearity becomes e^{-z} F(e^{z} u) = e^{z} F(u), Lip is scaled by
/// e^{max z} and K is estimated over the k_horizon window.
LPProblem burgers_lp_problem(const BurgersConfig& config, const GapParameters& gap, double rho,
                             const NoisePath& path, const std::optional<MultiplicativeNoise>& noise = std::nullopt,
                             double nonlinearity_scale = 1.0);

nlohmann::json comparison_to_json(const ComparisonReport& r);
nlohmann::json manifold_fit_to_json(const ManifoldFit& f);

} // namespace scm
