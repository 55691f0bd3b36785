#include "scm/burgers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "scm/format.hpp"
#include "scm/parallel.hpp"

namespace scm {

void BurgersConfig::validate() const {
    if (n_modes < 1) throw InvalidArgument("n_modes must be at least 1");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be finite and >= 0");
    if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    if (!(burn_in >= 0.0)) throw InvalidArgument("burn_in must be >= 0");
    if (!sigma_k.empty() && static_cast<int>(sigma_k.size()) != n_modes) {
        throw InvalidArgument("sigma_k needs one entry per mode");
    }
    for (double s : sigma_k) {
        if (!(s >= 0.0)) throw InvalidArgument("sigma_k entries must be >= 0");
    }
    if (!std::isfinite(quadratic_sign)) throw InvalidArgument("quadratic_sign must be finite");
    if (!(blowup_cap > 0.0)) throw InvalidArgument("blowup_cap must be positive");
}

Vector BurgersConfig::mode_scales() const {
    if (sigma_k.empty()) return Vector::Ones(n_modes);
    return Eigen::Map<const Vector>(sigma_k.data(), static_cast<Eigen::Index>(sigma_k.size()));
}

Vector burgers_eigenvalues(int n_modes) {
    Vector e(n_modes);
    for (int k = 1; k <= n_modes; ++k) e(k - 1) = 1.0 - static_cast<double>(k) * k;
    return e;
}

Vector quadratic_term(const Vector& u) {
    const auto n = static_cast<int>(u.size());
    Vector out = Vector::Zero(n);
    for (int k = 1; k <= n; ++k) {
        double conv = 0.0;
        for (int j = 1; j < k; ++j) conv += u(j - 1) * u(k - j - 1);
        double corr = 0.0;
        for (int l = 1; l + k <= n; ++l) corr += u(l - 1) * u(l + k - 1);
        out(k - 1) = 0.25 * k * conv - 0.5 * k * corr;
    }
    return out;
}

Matrix quadratic_term_jacobian(const Vector& u) {
    const auto n = static_cast<int>(u.size());
    Matrix j = Matrix::Zero(n, n);
    for (int k = 1; k <= n; ++k) {
        for (int m = 1; m <= n; ++m) {
            double d = 0.0;
            if (k - m >= 1) d += 0.5 * k * u(k - m - 1);
            if (m + k <= n) d -= 0.5 * k * u(m + k - 1);
            if (m - k >= 1) d -= 0.5 * k * u(m - k - 1);
            j(k - 1, m - 1) = d;
        }
    }
    return j;
}

QuadraticForm burgers_quadratic_form(int n_modes, double sign) {
    QuadraticForm q;
    for (int k = 1; k <= n_modes; ++k) {
        Matrix m = Matrix::Zero(n_modes, n_modes);
        for (int j = 1; j < k; ++j) m(j - 1, k - j - 1) -= sign * 0.25 * k;
        for (int l = 1; l + k <= n_modes; ++l) {
            m(l - 1, l + k - 1) += sign * 0.25 * k;
            m(l + k - 1, l - 1) += sign * 0.25 * k;
        }
        q.forms.push_back(std::move(m));
    }
    return q;
}

Vector galerkin_rhs(const Vector& u, const BurgersConfig& config) {
    if (u.size() != config.n_modes) throw InvalidArgument("state size does not match n_modes");
    return burgers_eigenvalues(config.n_modes).cwiseProduct(u) - config.quadratic_sign * quadratic_term(u);
}

VectorField burgers_field(const BurgersConfig& config) {
    config.validate();
    VectorField f;
    f.generator = burgers_eigenvalues(config.n_modes).asDiagonal();
    const double sign = config.quadratic_sign;
    f.nonlinearity = [sign](double, const Vector& u) -> Vector { return -sign * quadratic_term(u); };
    f.jacobian = [sign](double, const Vector& u) -> Matrix { return -sign * quadratic_term_jacobian(u); };
    f.additive_scales = config.sigma * config.mode_scales();
    f.blowup_cap = config.blowup_cap;
    return f;
}

NoisePath burgers_path(const BurgersConfig& config) {
    config.validate();
    return make_path(config.seed, config.dt, -config.burn_in, config.horizon, config.n_modes);
}

ModeTrajectory simulate(const BurgersConfig& config, const Vector& u0, const NoisePath& path, int stride) {
    if (u0.size() != config.n_modes) throw InvalidArgument("initial state size does not match n_modes");
    const VectorField field = burgers_field(config);
    ModeTrajectory out;
    out.u = evolve_trajectory(field, u0, 0.0, config.horizon, path, stride);
    for (std::size_t i = 0; i < out.u.size(); ++i) out.t.push_back(static_cast<double>(i) * stride * path.dt());
    return out;
}

ModeTrajectory simulate(const BurgersConfig& config, const Vector& u0, int stride) {
    return simulate(config, u0, burgers_path(config), stride);
}

void write_trajectory_csv(std::ostream& out, const ModeTrajectory& traj) {
    const auto n = traj.u.empty() ? 0 : traj.u.front().size();
    out << 't';
    for (Eigen::Index k = 1; k <= n; ++k) out << ",u_" << k;
    out << '\n';
    for (std::size_t i = 0; i < traj.u.size(); ++i) {
        out << format_double(traj.t[i]);
        for (Eigen::Index k = 0; k < n; ++k) out << ',' << format_double(traj.u[i](k));
        out << '\n';
    }
}

double reduced_drift(double a, double sigma, double phi1, double phi2, double phi3) {
    return -a * a * a / 12.0 + sigma * phi1 + a * sigma * phi2 / 6.0 +
           a * a * sigma * (phi1 / 18.0 + phi3 / 96.0);
}

double reduced_step(double a, long n, const NoisePath& path, const BurgersConfig& config) {
    const double h = path.dt();
    const Vector s = config.mode_scales();
    auto phi = [&](int k) {
        if (k > config.n_modes || config.sigma == 0.0) return 0.0;
        return s(k - 1) * path.increment(k - 1, n) / h;
    };
    return a + h * reduced_drift(a, config.sigma, phi(1), phi(2), phi(3));
}

std::vector<double> reduced_simulate(const BurgersConfig& config, double a0, const NoisePath& path) {
    const long steps = std::lround(config.horizon / path.dt());
    std::vector<double> a(static_cast<std::size_t>(steps + 1));
    a[0] = a0;
    for (long n = 0; n < steps; ++n) {
        a[static_cast<std::size_t>(n + 1)] = reduced_step(a[static_cast<std::size_t>(n)], n, path, config);
        if (!std::isfinite(a[static_cast<std::size_t>(n + 1)])) {
            throw NumericalRefusal("BlowUp", "reduced amplitude diverged at step " + std::to_string(n));
        }
    }
    return a;
}

double reduced_closed_form(double a0, double t) { return a0 / std::sqrt(1.0 + a0 * a0 * t / 6.0); }

GridSignal exponential_filter(const GridSignal& x, double rate) {
    if (!(rate > 0.0)) throw InvalidArgument("filter rate must be positive");
    if (x.values.empty()) throw InvalidArgument("empty signal");
    const double h = x.dt;
    const double e = std::exp(-rate * h);
    const double i0 = -std::expm1(-rate * h) / rate;
    const double i1 = 1.0 / rate + std::expm1(-rate * h) / (rate * rate * h);
    const double w1 = i1;
    const double w0 = i0 - i1;
    GridSignal y;
    y.first_index = x.first_index;
    y.dt = h;
    y.values.resize(x.values.size());
    y.values[0] = x.values[0] / rate;
    for (std::size_t i = 0; i + 1 < x.values.size(); ++i) {
        y.values[i + 1] = e * y.values[i] + w0 * x.values[i] + w1 * x.values[i + 1];
    }
    return y;
}

namespace {

GridSignal combine(const GridSignal& a, double ca, const GridSignal& b, double cb) {
    GridSignal out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = ca * a.values[i] + cb * b.values[i];
    return out;
}

GridSignal zero_like(const GridSignal& a) {
    GridSignal out = a;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
}

} // namespace

ExpansionProcesses expansion_processes(const NoisePath& path, const BurgersConfig& config) {
    const int n = config.n_modes;
    if (n < 3) throw InvalidArgument("the expansion needs n_modes >= 3");
    if (path.channels() < n) {
        throw InvalidArgument("path has " + std::to_string(path.channels()) + " channels, expansion needs " +
                              std::to_string(n));
    }
    const Vector s = config.mode_scales();
    ExpansionProcesses p;
    p.n_modes = n;
    p.linear.resize(static_cast<std::size_t>(n + 2));
    p.cross.resize(static_cast<std::size_t>(n + 1));
    for (int k = 2; k <= n; ++k) {
        p.linear[static_cast<std::size_t>(k)] = ou_convolution(path, k - 1, k).samples.scaled(s(k - 1));
    }
    const GridSignal zero = zero_like(p.linear[2]);
    p.linear[0] = zero;
    p.linear[1] = zero;
    p.linear[static_cast<std::size_t>(n + 1)] = zero;
    p.cross[0] = zero;

    p.cross[1] = p.linear[2].scaled(-1.0 / 6.0);
    const GridSignal h2_phi1 = ou_sample(path, 0, 3.0).samples.scaled(s(0));
    p.cross[2] = combine(h2_phi1, 1.0 / 3.0, exponential_filter(p.linear[3], 3.0), 1.0);
    for (int k = 3; k <= n; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const GridSignal diff = combine(p.linear[ku + 1], 1.0, p.linear[ku - 1], -1.0);
        p.cross[ku] = exponential_filter(diff, static_cast<double>(k * k - 1)).scaled(0.5 * k);
    }
    return p;
}

ExpansionSnapshot snapshot(const ExpansionProcesses& p, long index) {
    ExpansionSnapshot s;
    s.linear = Vector::Zero(p.n_modes);
    s.cross = Vector::Zero(p.n_modes);
    for (int k = 1; k <= p.n_modes; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        s.linear(k - 1) = k >= 2 ? p.linear[ku].at_index(index) : 0.0;
        s.cross(k - 1) = p.cross[ku].at_index(index);
    }
    return s;
}

Vector manifold_expansion(double a, double sigma, const ExpansionSnapshot& s) {
    const auto n = s.linear.size();
    if (n < 3 || s.cross.size() != n) throw InvalidArgument("expansion snapshot needs at least 3 modes");
    Vector u = sigma * s.linear + a * sigma * s.cross;
    u(0) += a;
    u(1) += -a * a / 6.0;
    u(2) += a * a * a / 32.0;
    return u;
}

SlavingSample settle(const BurgersConfig& config, double a, double max_time, double drift_tol) {
    BurgersConfig det = config;
    det.sigma = 0.0;
    det.validate();
    if (det.n_modes < 3) throw InvalidArgument("slaving needs n_modes >= 3");
    const VectorField field = burgers_field(det);
    const NoisePath path = NoisePath::silent(det.dt, 0.0, max_time, det.n_modes);
    const double t_settle = 5.0 / 3.0;
    Vector u = Vector::Zero(det.n_modes);
    u(0) = a;
    const long steps = std::lround(max_time / det.dt);
    const long chunk = std::max(1L, std::lround(1.0 / det.dt));
    for (long n0 = 0; n0 < steps; n0 += chunk) {
        const long n1 = std::min(steps, n0 + chunk);
        const auto states = evolve_trajectory(field, u, n0 * det.dt, n1 * det.dt, path);
        for (std::size_t i = 1; i < states.size(); ++i) {
            const double t = (n0 + static_cast<long>(i)) * det.dt;
            if (t < t_settle) continue;
            const Vector& x = states[i];
            const Vector du = galerkin_rhs(x, det);
            double worst = 0.0;
            if (x(0) != 0.0) {
                for (int k = 2; k <= 3; ++k) {
                    worst = std::max(worst, std::abs(du(k - 1) - k * (x(k - 1) / x(0)) * du(0)));
                }
            } else {
                worst = std::max(std::abs(du(1)), std::abs(du(2)));
            }
            if (worst <= drift_tol) return SlavingSample{x(0), x(1), x(2), du(0), t};
        }
        u = states.back();
    }
    throw NumericalRefusal("NotSettled", "slaved modes still drifting at t = " + format_double(max_time) +
                                             " for a = " + format_double(a));
}

namespace {

// Least squares y ~ c1 x^p + c2 x^(p+2); returns {c1, c2, rms residual}.
std::array<double, 3> power_fit(const std::vector<double>& x, const std::vector<double>& y, int p) {
    const auto m = static_cast<Eigen::Index>(x.size());
    Matrix a(m, 2);
    Vector b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        a(i, 0) = std::pow(x[iu], p);
        a(i, 1) = std::pow(x[iu], p + 2);
        b(i) = y[iu];
    }
    const Vector c = a.colPivHouseholderQr().solve(b);
    const double res = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(m));
    return {c(0), c(1), res};
}

} // namespace

ManifoldFit fit_manifold_coefficients(const BurgersConfig& config, const std::vector<double>& levels,
                                      int threads) {
    std::vector<double> distinct;
    for (double a : levels) {
        if (a != 0.0 && std::find(distinct.begin(), distinct.end(), std::abs(a)) == distinct.end()) {
            distinct.push_back(std::abs(a));
        }
    }
    if (distinct.size() < 2) throw InvalidArgument("degenerate design: need two distinct nonzero a levels");
    ManifoldFit fit;
    fit.samples.resize(levels.size());
    parallel_for(levels.size(), threads, [&](std::size_t i) { fit.samples[i] = settle(config, levels[i]); });

    std::vector<double> a, u2, u3, drift;
    for (const SlavingSample& s : fit.samples) {
        if (s.a == 0.0) continue;
        a.push_back(s.a);
        u2.push_back(s.u2);
        u3.push_back(s.u3);
        drift.push_back(s.drift);
    }
    const auto f2 = power_fit(a, u2, 2);
    const auto f3 = power_fit(a, u3, 3);
    const auto fd = power_fit(a, drift, 3);
    fit.c2 = f2[0];
    fit.c2_next = f2[1];
    fit.residual2 = f2[2];
    fit.c3 = f3[0];
    fit.c3_next = f3[1];
    fit.residual3 = f3[2];
    fit.d3 = fd[0];
    fit.d3_next = fd[1];
    fit.residual_drift = fd[2];
    return fit;
}

SeedError compare_seed(const BurgersConfig& config, double a0) {
    const NoisePath path = burgers_path(config);
    const ExpansionProcesses procs = expansion_processes(path, config);
    const Vector u0 = manifold_expansion(a0, config.sigma, snapshot(procs, 0));
    const auto full = evolve_trajectory(burgers_field(config), u0, 0.0, config.horizon, path);
    const auto reduced = reduced_simulate(config, a0, path);
    if (full.size() != reduced.size()) throw InvalidArgument("full and reduced grids differ");
    SeedError e;
    e.seed = config.seed;
    double ss = 0.0;
    for (std::size_t n = 0; n < full.size(); ++n) {
        const double a = reduced[n];
        const double predicted = a + a * config.sigma * procs.cross[1].at_index(static_cast<long>(n));
        const double err = std::abs(full[n](0) - predicted);
        e.sup = std::max(e.sup, err);
        ss += err * err;
    }
    e.rms = std::sqrt(ss / static_cast<double>(full.size()));
    return e;
}

ComparisonReport compare_full_vs_reduced(const BurgersConfig& config, double a0,
                                         const std::vector<std::uint64_t>& seeds, int threads) {
    if (seeds.empty()) throw InvalidArgument("comparison needs at least one seed");
    ComparisonReport r;
    r.sigma = config.sigma;
    r.a0 = a0;
    r.horizon = config.horizon;
    r.seeds.resize(seeds.size());
    parallel_for(seeds.size(), threads, [&](std::size_t i) {
        BurgersConfig c = config;
        c.seed = seeds[i];
        r.seeds[i] = compare_seed(c, a0);
    });
    double ms = 0.0;
    for (const SeedError& e : r.seeds) {
        ms += e.rms * e.rms;
        r.sup = std::max(r.sup, e.sup);
    }
    r.rms = std::sqrt(ms / static_cast<double>(r.seeds.size()));
    return r;
}

SigmaScaling sigma_scaling(const BurgersConfig& config, double a0, const std::vector<double>& sigmas,
                           const std::vector<std::uint64_t>& seeds, int threads) {
    if (sigmas.size() < 2) throw InvalidArgument("sigma scaling needs at least two sigma levels");
    SigmaScaling out;
    std::vector<double> lx, ly;
    for (double s : sigmas) {
        if (!(s > 0.0)) throw InvalidArgument("sigma levels must be positive");
        BurgersConfig c = config;
        c.sigma = s;
        const double rms = compare_full_vs_reduced(c, a0, seeds, threads).rms;
        out.sigmas.push_back(s);
        out.rms.push_back(rms);
        lx.push_back(std::log(s));
        ly.push_back(std::log(rms));
    }
    const double m = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    return out;
}

LPProblem burgers_lp_problem(const BurgersConfig& config, const GapParameters& gap, double rho,
                             const NoisePath& path, const std::optional<MultiplicativeNoise>& noise,
                             double nonlinearity_scale) {
    config.validate();
    const int n = config.n_modes;
    const Vector eig = burgers_eigenvalues(n);
    const Partition part = classify(std::vector<double>(eig.data(), eig.data() + n), gap);
    const Matrix id = Matrix::Identity(n, n);
    auto columns = [&](const std::vector<int>& idx) {
        Matrix m(n, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = id.col(idx[i]);
        return m;
    };
    TrichotomyFrame frame = frame_from_bases(columns(part.unstable), columns(part.center), columns(part.stable), gap);
    frame.bounds = TrichotomyBounds{1.0, 1.0, 1.0};

    const QuadraticForm q = burgers_quadratic_form(n, config.quadratic_sign).scaled(nonlinearity_scale);
    LPProblem p{burgers_field(config), path, cutoff_quadratic(q, rho), constant_frames(frame), gap, 1.0};
    p.field.additive_scales.resize(0);
    p.field.nonlinearity = nullptr;
    p.field.jacobian = nullptr;
    if (!noise) return p;

    const GridSignal z = noise->z;
    p.field.multiplicative = z;
    p.cutoff.raw = [q, z](double t, const Vector& x) -> Vector { return std::exp(z.at(t)) * q(x); };
    p.cutoff.raw_jacobian = [q, z](double t, const Vector& x) -> Matrix { return std::exp(z.at(t)) * q.jacobian(x); };
    double z_max = -std::numeric_limits<double>::infinity();
    const long lo = std::lround(-noise->k_horizon / z.dt);
    const long hi = std::lround(noise->k_horizon / z.dt);
    for (long i = lo; i <= hi; ++i) z_max = std::max(z_max, z.at_index(i));
    p.cutoff.lipschitz *= std::exp(z_max);

    const PropagatorSource cocycle = propagator_source(p.field, path);
    const BoundReport r = estimate_bounds(constant_frames(frame), cocycle, noise->k_horizon, noise->k_step, 0.0,
                                          0.0, false);
    frame.bounds = r.bounds;
    p.frames = constant_frames(frame);
    p.k_bound = r.bounds.max();
    return p;
}

nlohmann::json comparison_to_json(const ComparisonReport& r) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const SeedError& e : r.seeds) seeds.push_back({{"seed", e.seed}, {"sup", e.sup}, {"rms", e.rms}});
    return nlohmann::json{{"sigma", r.sigma}, {"a0", r.a0},   {"horizon", r.horizon},
                          {"rms", r.rms},     {"sup", r.sup}, {"seeds", seeds}};
}

nlohmann::json manifold_fit_to_json(const ManifoldFit& f) {
    nlohmann::json samples = nlohmann::json::array();
    for (const SlavingSample& s : f.samples) {
        samples.push_back({{"a", s.a}, {"u2", s.u2}, {"u3", s.u3}, {"drift", s.drift}, {"t", s.t}});
    }
    return nlohmann::json{{"c2", f.c2},
                          {"c2_next", f.c2_next},
                          {"c3", f.c3},
                          {"c3_next", f.c3_next},
                          {"drift_cubic", f.d3},
                          {"drift_quintic", f.d3_next},
                          {"residual2", f.residual2},
                          {"residual3", f.residual3},
                          {"residual_drift", f.residual_drift},
                          {"samples", samples}};
}

} // namespace scm
