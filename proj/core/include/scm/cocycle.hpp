#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "scm/noise.hpp"
#include "scm/types.hpp"

namespace scm {

/// Nonlinear part B(theta_t omega) u of a vector field; `t` is measured from
/// the path origin so that fields driven by grid signals see theta_t omega.
using Nonlinearity = std::function<Vector(double t, const Vector& u)>;
using NonlinearJacobian = std::function<Matrix(double t, const Vector& u)>;

/// du/dt = A u + z(theta_t omega) u + B(theta_t omega, u) + sum_k s_k dW_k/dt e_k
/// on an N-mode truncation.
struct VectorField {
    Matrix generator;                       ///< A; diagonal for Galerkin bases
    std::optional<GridSignal> multiplicative; ///< z(theta_t omega), sampled on the path grid
    Nonlinearity nonlinearity;              ///< empty means B = 0
    NonlinearJacobian jacobian;             ///< empty means central differences of B
    double lipschitz_bound = 0.0;           ///< Lip B (1/time); 0 when unknown/linear
    Vector additive_scales;                 ///< s_k; empty means no additive noise
    double blowup_cap = 1e100;

    int dim() const { return static_cast<int>(generator.rows()); }
    bool has_nonlinearity() const { return static_cast<bool>(nonlinearity); }
    bool is_diagonal() const;

    Vector eval_nonlinearity(double t, const Vector& u) const;
    Matrix eval_jacobian(double t, const Vector& u) const;
};

/// Diagonal field with the given eigenvalues and no nonlinearity.
VectorField diagonal_field(const Vector& eigenvalues);
/// Constant-coefficient linear field du/dt = A u.
VectorField linear_field(const Matrix& generator);

/// ModeBasis invariant: strictly decreasing eigenvalues.
void check_mode_eigenvalues(const Vector& eigenvalues);

/// U(t1 - t0, theta_{t0} omega) in the mode basis.
struct Propagator {
    double t0 = 0.0;
    double t1 = 0.0;
    Matrix matrix;
};

/// Row-major CSV with a one-line header "t0,t1,N".
void write_propagator_csv(std::ostream& out, const Propagator& p);
Propagator read_propagator_csv(std::istream& in);

/// phi(t1 - t0, x0, theta_{t0} omega) by exponential Euler on the path grid:
/// u <- e^{Z_n} (e^{A h} u + h phi1(A h) B(t_n, u)) + noise_n with Z_n the
/// trapezoid integral of z over the step. Additive noise on a diagonal A uses
/// the exact OU innovation factor so that linear modes match ou_sample.
/// Throws NumericalRefusal("BlowUp") with the first bad step.
Vector evolve(const VectorField& field, const Vector& x0, double t0, double t1,
              const NoisePath& path);

/// Same as evolve but also returns every intermediate state (t0 included).
std::vector<Vector> evolve_trajectory(const VectorField& field, const Vector& x0, double t0,
                                      double t1, const NoisePath& path, int stride = 1);

/// |phi(t+s, x0, omega) - phi(s, phi(t, x0, omega), theta_t omega)|.
double cocycle_residual(const VectorField& field, const Vector& x0, double t, double s,
                        const NoisePath& path);

/// Linear cocycle of the field's linear part: e^{A (t1 - t0)} exp(int z dt) with
/// the integral taken by trapezoid on the grid. Nonlinearity is ignored, which
/// is its linearization at 0 when DB(0) = 0.
Propagator linear_propagator(const VectorField& field, double t0, double t1, const NoisePath& path);

/// Derivative of the discrete evolve map with respect to x0 along the
/// trajectory phi(., x0, omega) (the discretized variational equation).
Propagator linearize_along(const VectorField& field, const Vector& x0, double t0, double t1,
                           const NoisePath& path);

/// Random-coefficient form of du = (A u + F(u)) dt + u o dW: adds z as the
/// multiplicative scalar and replaces F by G(t, u) = e^{-z(t)} F(e^{z(t)} u).
VectorField conjugate(const VectorField& field, const GridSignal& z);

/// Strong convergence fit |error| ~ C dt^p from successive differences over a
/// ladder of paths coarsened by 2, 4, ... (same Brownian path).
struct OrderFit {
    double constant = 0.0;
    double order = 0.0;
    std::vector<double> steps;
    std::vector<double> errors;
};

OrderFit fit_convergence_order(const std::function<VectorField(const NoisePath&)>& field_on,
                               const Vector& x0, double t0, double t1, const NoisePath& finest,
                               int levels);

/// Callable linear cocycle: (t0, t1) -> U(t1 - t0, theta_{t0} omega).
using PropagatorSource = std::function<Matrix(double t0, double t1)>;

/// Propagator source backed by linear_propagator on a fixed field and path.
PropagatorSource propagator_source(VectorField field, NoisePath path);
/// Constant cocycle e^{A t}.
PropagatorSource constant_cocycle(const Matrix& generator);

} // namespace scm
