#include "scm/cocycle.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "scm/format.hpp"

namespace scm {

bool VectorField::is_diagonal() const {
    const Matrix off = generator - Matrix(generator.diagonal().asDiagonal());
    return off.cwiseAbs().maxCoeff() == 0.0;
}

Vector VectorField::eval_nonlinearity(double t, const Vector& u) const {
    if (!nonlinearity) return Vector::Zero(u.size());
    return nonlinearity(t, u);
}

Matrix VectorField::eval_jacobian(double t, const Vector& u) const {
    const auto n = u.size();
    if (!nonlinearity) return Matrix::Zero(n, n);
    if (jacobian) return jacobian(t, u);
    Matrix jac(n, n);
    const double eps = 1e-6 * std::max(1.0, u.norm());
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector up = u;
        Vector dn = u;
        up(j) += eps;
        dn(j) -= eps;
        jac.col(j) = (nonlinearity(t, up) - nonlinearity(t, dn)) / (2.0 * eps);
    }
    return jac;
}

VectorField diagonal_field(const Vector& eigenvalues) {
    VectorField f;
    f.generator = eigenvalues.asDiagonal();
    return f;
}

VectorField linear_field(const Matrix& generator) {
    if (generator.rows() != generator.cols()) throw InvalidArgument("generator must be square");
    VectorField f;
    f.generator = generator;
    return f;
}

void check_mode_eigenvalues(const Vector& eigenvalues) {
    for (Eigen::Index i = 1; i < eigenvalues.size(); ++i) {
        if (!(eigenvalues(i) < eigenvalues(i - 1))) {
            throw InvalidArgument("mode eigenvalues must be strictly decreasing");
        }
    }
}

namespace {

// Exponential-Euler coefficients for one grid step of size h.
struct StepCoefficients {
    bool diagonal = true;
    Vector exp_diag;      // e^{mu h}
    Vector phi_diag;      // h phi1(mu h) = (e^{mu h} - 1) / mu
    Vector noise_diag;    // exact OU innovation factor per mode
    Matrix exp_dense;
    Matrix phi_dense;

    StepCoefficients(const VectorField& field, double h) : diagonal(field.is_diagonal()) {
        const auto n = field.dim();
        if (diagonal) {
            exp_diag.resize(n);
            phi_diag.resize(n);
            noise_diag.resize(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                const double mu = field.generator(k, k);
                exp_diag(k) = std::exp(mu * h);
                phi_diag(k) = mu == 0.0 ? h : std::expm1(mu * h) / mu;
                noise_diag(k) = ou_innovation_factor(-mu, h);
            }
        } else {
            // top-right block of exp([[A h, h I], [0, 0]]) is h phi1(A h)
            Matrix aug = Matrix::Zero(2 * n, 2 * n);
            aug.topLeftCorner(n, n) = field.generator * h;
            aug.topRightCorner(n, n) = Matrix::Identity(n, n) * h;
            const Matrix e = aug.exp();
            exp_dense = e.topLeftCorner(n, n);
            phi_dense = e.topRightCorner(n, n);
        }
    }

    Vector linear(const Vector& u) const {
        return diagonal ? Vector(exp_diag.cwiseProduct(u)) : Vector(exp_dense * u);
    }
    Matrix linear(const Matrix& m) const {
        return diagonal ? Matrix(exp_diag.asDiagonal() * m) : Matrix(exp_dense * m);
    }
    Vector forcing(const Vector& b) const {
        return diagonal ? Vector(phi_diag.cwiseProduct(b)) : Vector(phi_dense * b);
    }
    Matrix forcing(const Matrix& m) const {
        return diagonal ? Matrix(phi_diag.asDiagonal() * m) : Matrix(phi_dense * m);
    }
};

struct GridRange {
    long first = 0;
    long last = 0;
};

GridRange grid_range(const NoisePath& path, double t0, double t1) {
    GridRange r{path.index_of(t0), path.index_of(t1)};
    if (r.last < r.first) throw InvalidArgument("interval must satisfy t0 <= t1");
    return r;
}

void check_signal_grid(const VectorField& field, const NoisePath& path) {
    if (field.multiplicative && std::abs(field.multiplicative->dt - path.dt()) > 1e-12 * path.dt()) {
        throw InvalidArgument("multiplicative signal and path use different grids");
    }
    if (field.additive_scales.size() > 0) {
        if (field.additive_scales.size() != field.dim()) {
            throw InvalidArgument("additive_scales must have one entry per mode");
        }
        if (path.channels() < field.dim()) {
            throw InvalidArgument("path has fewer channels than the field has modes");
        }
    }
}

// Trapezoid integral of z over [t_n, t_{n+1}].
double step_integral(const VectorField& field, long n, double h) {
    if (!field.multiplicative) return 0.0;
    return 0.5 * h * (field.multiplicative->at_index(n) + field.multiplicative->at_index(n + 1));
}

void add_noise(const VectorField& field, const StepCoefficients& c, const NoisePath& path, long n,
               Vector& u) {
    if (field.additive_scales.size() == 0) return;
    const auto dim = field.dim();
    Vector kick(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        kick(k) = field.additive_scales(k) * path.increment(static_cast<int>(k), n);
    }
    if (c.diagonal) {
        u += c.noise_diag.cwiseProduct(kick);
    } else {
        u += c.exp_dense * kick;
    }
}

void check_state(const Vector& u, double cap, long n, double t) {
    const double norm = u.norm();
    if (!std::isfinite(norm) || norm > cap) {
        throw NumericalRefusal("BlowUp", "state norm overflow at step " + std::to_string(n) +
                                             " (t = " + format_double(t) + ")");
    }
}

Vector step(const VectorField& field, const StepCoefficients& c, const NoisePath& path, long n,
            double h, const Vector& u) {
    const double t = static_cast<double>(n) * h;
    Vector next = c.linear(u);
    if (field.has_nonlinearity()) next += c.forcing(field.nonlinearity(t, u));
    const double z = step_integral(field, n, h);
    if (z != 0.0) next *= std::exp(z);
    add_noise(field, c, path, n, next);
    check_state(next, field.blowup_cap, n, t + h);
    return next;
}

} // namespace

Vector evolve(const VectorField& field, const Vector& x0, double t0, double t1, const NoisePath& path) {
    if (x0.size() != field.dim()) throw InvalidArgument("state dimension mismatch");
    check_signal_grid(field, path);
    const GridRange r = grid_range(path, t0, t1);
    const double h = path.dt();
    const StepCoefficients c(field, h);
    Vector u = x0;
    for (long n = r.first; n < r.last; ++n) u = step(field, c, path, n, h, u);
    return u;
}

std::vector<Vector> evolve_trajectory(const VectorField& field, const Vector& x0, double t0,
                                      double t1, const NoisePath& path, int stride) {
    if (x0.size() != field.dim()) throw InvalidArgument("state dimension mismatch");
    if (stride < 1) throw InvalidArgument("stride must be positive");
    check_signal_grid(field, path);
    const GridRange r = grid_range(path, t0, t1);
    const double h = path.dt();
    const StepCoefficients c(field, h);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>((r.last - r.first) / stride + 2));
    Vector u = x0;
    out.push_back(u);
    for (long n = r.first; n < r.last; ++n) {
        u = step(field, c, path, n, h, u);
        if ((n + 1 - r.first) % stride == 0) out.push_back(u);
    }
    return out;
}

double cocycle_residual(const VectorField& field, const Vector& x0, double t, double s,
                        const NoisePath& path) {
    if (t < 0.0 || s < 0.0) throw InvalidArgument("cocycle residual needs t, s >= 0");
    const Vector direct = evolve(field, x0, 0.0, t + s, path);
    const Vector mid = evolve(field, x0, 0.0, t, path);
    const Vector composed = evolve(field, mid, t, t + s, path);
    return (direct - composed).norm();
}

Propagator linear_propagator(const VectorField& field, double t0, double t1, const NoisePath& path) {
    check_signal_grid(field, path);
    const GridRange r = grid_range(path, t0, t1);
    const double h = path.dt();
    const double span = static_cast<double>(r.last - r.first) * h;
    Propagator p{t0, t1, Matrix()};
    if (field.is_diagonal()) {
        p.matrix = (field.generator.diagonal() * span).array().exp().matrix().asDiagonal();
    } else {
        p.matrix = (field.generator * span).exp();
    }
    double z = 0.0;
    for (long n = r.first; n < r.last; ++n) z += step_integral(field, n, h);
    if (z != 0.0) p.matrix *= std::exp(z);
    if (!p.matrix.allFinite()) {
        throw NumericalRefusal("BlowUp", "propagator over [" + format_double(t0) + ", " +
                                             format_double(t1) + "] is not finite");
    }
    return p;
}

Propagator linearize_along(const VectorField& field, const Vector& x0, double t0, double t1,
                           const NoisePath& path) {
    if (x0.size() != field.dim()) throw InvalidArgument("state dimension mismatch");
    check_signal_grid(field, path);
    const GridRange r = grid_range(path, t0, t1);
    const double h = path.dt();
    const StepCoefficients c(field, h);
    const auto dim = field.dim();
    Matrix v = Matrix::Identity(dim, dim);
    Vector u = x0;
    for (long n = r.first; n < r.last; ++n) {
        const double t = static_cast<double>(n) * h;
        Matrix next = c.linear(v);
        if (field.has_nonlinearity()) next += c.forcing(Matrix(field.eval_jacobian(t, u) * v));
        const double z = step_integral(field, n, h);
        if (z != 0.0) next *= std::exp(z);
        v = std::move(next);
        u = step(field, c, path, n, h, u);
    }
    return Propagator{t0, t1, v};
}

VectorField conjugate(const VectorField& field, const GridSignal& z) {
    if (field.multiplicative) throw InvalidArgument("field already carries a multiplicative scalar");
    VectorField g = field;
    g.multiplicative = z;
    if (field.nonlinearity) {
        auto raw = field.nonlinearity;
        g.nonlinearity = [raw, z](double t, const Vector& u) -> Vector {
            const double zt = z.at(t);
            return std::exp(-zt) * raw(t, std::exp(zt) * u);
        };
        // D_u [e^{-z} F(e^{z} u)] = DF(e^{z} u)
        auto raw_field = field;
        g.jacobian = [raw_field, z](double t, const Vector& u) -> Matrix {
            return raw_field.eval_jacobian(t, std::exp(z.at(t)) * u);
        };
    }
    return g;
}

OrderFit fit_convergence_order(const std::function<VectorField(const NoisePath&)>& field_on,
                               const Vector& x0, double t0, double t1, const NoisePath& finest,
                               int levels) {
    if (levels < 2) throw InvalidArgument("order fit needs at least two coarse levels");
    // successive differences |x_l - x_{l-1}| scale like dt_l^p without the
    // bias a fixed finest reference introduces on short level ladders
    Vector previous = evolve(field_on(finest), x0, t0, t1, finest);
    OrderFit fit;
    for (int l = 1; l <= levels; ++l) {
        const NoisePath coarse = finest.coarsened(1 << l);
        const Vector x = evolve(field_on(coarse), x0, t0, t1, coarse);
        fit.steps.push_back(coarse.dt());
        fit.errors.push_back((x - previous).norm());
        previous = x;
    }
    // least squares of log e = log C + p log dt
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(fit.steps.size());
    for (std::size_t i = 0; i < fit.steps.size(); ++i) {
        const double x = std::log(fit.steps[i]);
        const double y = std::log(std::max(fit.errors[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.order = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    fit.constant = std::exp((sy - fit.order * sx) / m);
    return fit;
}

PropagatorSource propagator_source(VectorField field, NoisePath path) {
    return [field = std::move(field), path = std::move(path)](double t0, double t1) {
        return linear_propagator(field, t0, t1, path).matrix;
    };
}

PropagatorSource constant_cocycle(const Matrix& generator) {
    return [generator](double t0, double t1) -> Matrix { return (generator * (t1 - t0)).exp(); };
}

void write_propagator_csv(std::ostream& out, const Propagator& p) {
    out << "t0=" << format_double(p.t0) << ",t1=" << format_double(p.t1)
        << ",N=" << p.matrix.rows() << '\n';
    for (Eigen::Index i = 0; i < p.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.matrix.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_double(p.matrix(i, j));
        }
        out << '\n';
    }
}

Propagator read_propagator_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw InvalidArgument("empty propagator CSV");
    Propagator p;
    long n = 0;
    if (std::sscanf(header.c_str(), "t0=%lf,t1=%lf,N=%ld", &p.t0, &p.t1, &n) != 3 || n < 0) {
        throw InvalidArgument("malformed propagator CSV header: " + header);
    }
    p.matrix.resize(n, n);
    std::string line;
    for (long i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw InvalidArgument("truncated propagator CSV");
        std::stringstream row(line);
        std::string cell;
        for (long j = 0; j < n; ++j) {
            if (!std::getline(row, cell, ',')) throw InvalidArgument("short propagator CSV row");
            p.matrix(i, j) = std::stod(cell);
        }
    }
    return p;
}

} // namespace scm
