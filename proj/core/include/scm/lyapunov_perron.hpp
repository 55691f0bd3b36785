#pragma once

#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scm/cocycle.hpp"
#include "scm/noise.hpp"
#include "scm/trichotomy.hpp"

namespace scm {

/// Smooth cut-off: sigma(s) = psi(2 - s) / (psi(2 - s) + psi(s - 1)) with
/// psi(t) = exp(-1/t) for t > 0 and 0 otherwise. sigma = 1 on s <= 1,
/// sigma = 0 on s >= 2, and sup |sigma'| = 2 (attained at s = 1.5).
double mollifier(double s);
double mollifier_derivative(double s);

/// Quadratic nonlinearity F_k(x) = x^T Q_k x with symmetric Q_k.
struct QuadraticForm {
    std::vector<Matrix> forms;

    int dim() const { return static_cast<int>(forms.size()); }
    Vector operator()(const Vector& x) const;
    Matrix jacobian(const Vector& x) const;
    /// b = sqrt(sum_k ||Q_k||_2^2); |F(x) - F(y)| <= b |x + y| |x - y|.
    double bound() const;
    QuadraticForm scaled(double factor) const;
};

/// Lip G for G = sigma(|x| / rho) F with F quadratic of bound b:
/// sup_s [sigma(s) 2 b s rho + |sigma'(s)| b s^2 rho].
double quadratic_cutoff_lipschitz(double b, double rho);

/// G(t, x) = sigma(|x| / rho) F(t, x).
struct CutoffNonlinearity {
    Nonlinearity raw;
    NonlinearJacobian raw_jacobian; ///< optional
    double radius = 1.0;
    double lipschitz = 0.0;         ///< recorded bound on Lip G

    Vector operator()(double t, const Vector& x) const;
    Matrix jacobian(double t, const Vector& x) const;
};

/// Cut-off of a quadratic nonlinearity with the Lipschitz bound filled in.
CutoffNonlinearity cutoff_quadratic(const QuadraticForm& q, double radius);

/// Values on a symmetric grid t_j = base + j * step, j = -J..J.
struct WeightedTrajectory {
    double base = 0.0;
    double step = 1.0;
    int half = 0;  ///< J
    double eta = 0.0;
    std::vector<Vector> values;

    double time(int j) const { return base + j * step; }
    const Vector& at(int j) const { return values[static_cast<std::size_t>(j + half)]; }
    Vector& at(int j) { return values[static_cast<std::size_t>(j + half)]; }
    /// sup_j e^{-eta |t_j - base|} |x_j|
    double norm() const;
};

WeightedTrajectory zero_trajectory(int dim, double base, double step, int half, double eta);
double weighted_distance(const WeightedTrajectory& a, const WeightedTrajectory& b);

/// K Lip (1/(eta - gamma) + 1/(beta - eta) + 1/(alpha - eta)).
double contraction_constant(double k_bound, double lip, const GapParameters& gap, double eta);

/// sqrt(gamma min(alpha, beta)), or min(alpha, beta)/2 when gamma = 0.
double default_eta(const GapParameters& gap);
/// T with e^{-(min(alpha, beta) - eta) T} = tol / 10.
double default_window(const GapParameters& gap, double eta, double tol);

enum class LPScheme { continuous, discrete };

struct LPProblem {
    VectorField field;        ///< linear part (and multiplicative signal); nonlinearity unused
    NoisePath path;
    CutoffNonlinearity cutoff;
    FrameProvider frames;
    GapParameters gap;
    double k_bound = 1.0;
};

struct LPSettings {
    LPScheme scheme = LPScheme::continuous;
    double eta = 0.0;     ///< 0 selects default_eta
    double tol = 1e-10;   ///< weighted-norm update tolerance
    int max_iter = 200;
    double step = 0.0;    ///< continuous quadrature step, 0 selects path dt
    double window = 0.0;  ///< T, 0 selects default_window
};

/// Grid and linear data of one base point, reused across iterations.
class LPOperator {
public:
    LPOperator(const LPProblem& problem, const LPSettings& settings, double base);

    /// J^c or Y^c applied to `traj` for the center vector v (full coordinates, in range P^c).
    WeightedTrajectory apply(const WeightedTrajectory& traj, const Vector& v) const;
    WeightedTrajectory zero() const;

    double eta() const { return eta_; }
    double window() const { return step_ * half_; }
    double rho_prime() const { return rho_prime_; }
    /// e^{-(min(alpha, beta) - eta) T} ||traj|| K Lip
    double tail_bound(const WeightedTrajectory& traj) const;
    const TrichotomyFrame& frame_at_base() const { return frame0_; }
    /// G at grid index j (discrete scheme: time-1 remainder of the cut-off flow).
    Vector forcing(int j, const Vector& x) const;

    double time(int j) const { return base_ + j * step_; }

private:
    double time_lo() const { return time(-half_); }
    double time_hi() const { return time(half_); }

    const LPProblem* problem_;
    LPScheme scheme_;
    double base_, step_, eta_, rho_prime_;
    int half_;
    int dim_;
    TrichotomyFrame frame0_;
    std::vector<Matrix> eu_, ec_, es_, lu_, lc_, ls_; // per grid point
    std::vector<Matrix> cu_, cc_, cs_;                // per step j -> j+1
    std::vector<Matrix> cu_inv_, cc_inv_;
    std::vector<Matrix> step_matrix_;                 // M_j
    VectorField cut_field_;
};

struct LPSolution {
    Vector v;
    Vector h;                         ///< P^s x(0) + P^u x(0)
    WeightedTrajectory trajectory;
    int iterations = 0;
    double final_update = 0.0;
    std::vector<double> updates;      ///< weighted norm of x^{k+1} - x^k
    std::vector<double> ratios;       ///< updates[k] / updates[k-1]
    double rho_prime = 0.0;
    double tail_bound = 0.0;
};

/// Fixed-point iteration from the zero trajectory. Refuses with
/// NumericalRefusal("NonContraction") when rho' >= 1 and
/// NumericalRefusal("MaxIterations") when the tolerance is not met.
LPSolution solve_center_graph(const LPOperator& op, const Vector& v, int max_iter, double tol);
LPSolution solve_center_graph(const LPProblem& problem, const LPSettings& settings, const Vector& v,
                              double base = 0.0);

struct GraphSample {
    Vector v;
    Vector h;
    int iterations = 0;
    double final_update = 0.0;
    double max_ratio = 0.0; ///< largest observed update ratio
};

struct CenterGraph {
    double eta = 0.0;
    double rho_prime = 0.0;
    double base = 0.0;
    TrichotomyFrame frame;
    std::vector<GraphSample> samples;
    std::vector<WeightedTrajectory> trajectories;
};

/// Graph samples at the given center vectors, computed on `threads` workers;
/// the sample order follows `vs`.
CenterGraph sample_center_graph(const LPProblem& problem, const LPSettings& settings,
                                const std::vector<Vector>& vs, double base = 0.0, int threads = 1,
                                bool keep_trajectories = false);

/// CSV rows: v_1..v_N, h_1..h_N, iterations, final_update, rho_prime.
void write_graph_csv(std::ostream& out, const CenterGraph& graph);

/// Central differences of h^c at +-eps along each center frame column.
Matrix graph_derivative_at_zero(const LPProblem& problem, const LPSettings& settings, double eps,
                                double base = 0.0);

struct InvarianceReport {
    double residual = 0.0;
    int evaluated = 0;
    int skipped = 0;
};

/// max over probes v of dist(phi(s, v + h^c(v, omega)), graph at theta_s omega),
/// measured as |y - (w + h^c(w, theta_s omega))| with w = P^c(theta_s omega) y.
/// The flow uses the cut-off nonlinearity unless `raw_flow` is set, in which
/// case probes with |x0| > 2 rho are skipped.
InvarianceReport invariance_residual(const LPProblem& problem, const LPSettings& settings, double s,
                                     const std::vector<Vector>& probes, bool raw_flow = false);

nlohmann::json lp_solution_to_json(const LPSolution& s);

} // namespace scm
