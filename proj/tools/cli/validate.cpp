#include "validate.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "scm/burgers.hpp"
#include "scm/format.hpp"
#include "scm/met.hpp"
#include "scm/trichotomy.hpp"

namespace scm::cli {

namespace {

struct Check {
    std::string module;
    std::string name;
    std::function<std::pair<bool, std::string>()> run;
};

std::pair<bool, std::string> within(double got, double want, double tol) {
    const bool ok = std::abs(got - want) <= tol;
    return {ok, "got " + format_double(got) + ", want " + format_double(want) + " +- " + format_double(tol)};
}

template <class Fn>
std::pair<bool, std::string> expect_error(Fn&& fn, const std::string& kind) {
    try {
        fn();
    } catch (const Error& e) {
        return {e.kind() == kind, e.what()};
    }
    return {false, "no error raised (expected " + kind + ")"};
}

std::vector<Check> build_checks(double sign) {
    std::vector<Check> c;

    // noise
    c.push_back({"noise", "same seed gives the same increments", [] {
                     const NoisePath a = make_path(7, 1e-2, -1, 1, 2);
                     const NoisePath b = make_path(7, 1e-2, -1, 1, 2);
                     double diff = 0.0;
                     for (long n = a.first_index(); n < a.end_index(); ++n) {
                         diff = std::max(diff, std::abs(a.increment(1, n) - b.increment(1, n)));
                     }
                     return std::pair{diff == 0.0, "max difference " + format_double(diff)};
                 }});
    c.push_back({"noise", "shift composes additively", [] {
                     const NoisePath p = make_path(3, 1e-2, -5, 5, 1);
                     const NoisePath ab = shift(shift(p, 0.5), 1.0);
                     const NoisePath direct = shift(p, 1.5);
                     double diff = 0.0;
                     for (long n = 0; n < 100; ++n) {
                         diff = std::max(diff, std::abs(ab.increment(0, n) - direct.increment(0, n)));
                     }
                     return std::pair{diff == 0.0, "max difference " + format_double(diff)};
                 }});
    c.push_back({"noise", "OU stationary variance 1/(2 rate)", [] {
                     const NoisePath p = make_path(11, 1e-2, 0, 4000, 1);
                     const OUProcess ou = ou_sample(p, 0, 1.0);
                     double s = 0.0, ss = 0.0;
                     for (double v : ou.samples.values) {
                         s += v;
                         ss += v * v;
                     }
                     const double n = static_cast<double>(ou.samples.values.size());
                     const double var = ss / n - (s / n) * (s / n);
                     return within(var, 0.5, 0.05);
                 }});

    // cocycle
    c.push_back({"cocycle", "diagonal propagator equals exp(mu t)", [] {
                     Vector mu(2);
                     mu << 1.0, -2.0;
                     const NoisePath p = NoisePath::silent(1e-2, 0, 2, 2);
                     const Matrix u = linear_propagator(diagonal_field(mu), 0.0, 1.5, p).matrix;
                     const double err = std::max(std::abs(u(0, 0) - std::exp(1.5)), std::abs(u(1, 1) - std::exp(-3.0)));
                     return std::pair{err <= 1e-12, "error " + format_double(err)};
                 }});
    c.push_back({"cocycle", "cocycle property on the grid", [sign] {
                     BurgersConfig b;
                     b.n_modes = 4;
                     b.sigma = 0.1;
                     b.quadratic_sign = sign;
                     const NoisePath p = make_path(5, 1e-2, 0, 3, 4);
                     Vector x0(4);
                     x0 << 0.3, -0.1, 0.05, 0.0;
                     const double r = cocycle_residual(burgers_field(b), x0, 1.0, 1.5, p);
                     return std::pair{r <= 1e-12, "residual " + format_double(r)};
                 }});
    c.push_back({"cocycle", "linear modes equal the OU convolution", [] {
                     BurgersConfig b;
                     b.n_modes = 3;
                     b.sigma = 1.0;
                     b.quadratic_sign = 0.0;
                     b.burn_in = 0.0;
                     b.horizon = 2.0;
                     b.dt = 1e-2;
                     const NoisePath p = burgers_path(b);
                     const OUProcess ou = ou_sample(p, 2, 8.0, 0.0);
                     const auto traj = evolve_trajectory(burgers_field(b), Vector::Zero(3), 0.0, 2.0, p);
                     double err = 0.0;
                     for (std::size_t n = 0; n < traj.size(); ++n) {
                         err = std::max(err, std::abs(traj[n](2) - ou.samples.at_index(static_cast<long>(n))));
                     }
                     return std::pair{err <= 1e-12, "max difference " + format_double(err)};
                 }});

    // met
    c.push_back({"met", "constant diagonal exponents", [] {
                     Matrix a = Matrix::Zero(3, 3);
                     a.diagonal() << 1.0, 0.0, -2.0;
                     const LyapunovSpectrum s = lyapunov_spectrum(constant_cocycle(a), 3, 1.0, 20, 3);
                     double err = 0.0;
                     const std::vector<double> want{1.0, 0.0, -2.0};
                     for (std::size_t i = 0; i < 3; ++i) err = std::max(err, std::abs(s.exponents.at(i) - want[i]));
                     return std::pair{err <= 1e-8, "max error " + format_double(err)};
                 }});
    c.push_back({"met", "triangular cocycle splitting matches eigenvectors", [] {
                     Matrix a(2, 2);
                     a << 1.0, 1.0, 0.0, -1.0;
                     const auto cocycle = constant_cocycle(a);
                     const LyapunovSpectrum s = lyapunov_spectrum(cocycle, 2, 1.0, 30, 2);
                     SplittingOptions o;
                     o.block_len = 1.0;
                     const OseledetsSplitting w = oseledets_splitting(cocycle, s, 20.0, o);
                     Vector e1(2), e2(2);
                     e1 << 1.0, 0.0;
                     e2 << -0.5, 1.0;
                     const double ang = std::max(principal_angle(w.subspaces[0], e1), principal_angle(w.subspaces[1], e2));
                     return std::pair{ang <= 1e-6, "largest angle " + format_double(ang)};
                 }});

    // trichotomy
    c.push_back({"trichotomy", "Burgers spectrum classification", [] {
                     const Partition p = classify(std::vector<double>{0.0, -3.0, -8.0, -15.0}, GapParameters{1.0, 2.0, 0.5});
                     const bool ok = p.unstable.empty() && p.center == std::vector<int>{0} &&
                                     p.stable == std::vector<int>{1, 2, 3};
                     return std::pair{ok, "center " + std::to_string(p.center.size()) + ", stable " +
                                              std::to_string(p.stable.size())};
                 }});
    c.push_back({"trichotomy", "exponent in a forbidden band is refused", [] {
                     return expect_error([] { classify(std::vector<double>{0.4}, GapParameters{1.0, 1.0, 0.3}); },
                                         "UnclassifiableExponent");
                 }});
    c.push_back({"trichotomy", "K^s = 1 for lambda = -3, alpha = 2", [] {
                     Matrix a = Matrix::Zero(2, 2);
                     a.diagonal() << 0.0, -3.0;
                     const GapParameters gap{2.0, 2.0, 0.5};
                     const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), Matrix::Identity(2, 1),
                                                                Matrix::Identity(2, 2).rightCols(1), gap);
                     const BoundReport r = estimate_bounds(constant_frames(f), constant_cocycle(a), 5.0, 0.1);
                     return within(r.bounds.k_s, 1.0, 1e-12);
                 }});
    c.push_back({"trichotomy", "alpha beyond the decay rate explodes", [] {
                     Matrix a = Matrix::Zero(2, 2);
                     a.diagonal() << 0.0, -3.0;
                     const GapParameters gap{3.5, 2.0, 0.5};
                     const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), Matrix::Identity(2, 1),
                                                                Matrix::Identity(2, 2).rightCols(1), gap);
                     return expect_error([&] { estimate_bounds(constant_frames(f), constant_cocycle(a), 5.0, 0.1); },
                                         "ExplodingBound");
                 }});
    c.push_back({"trichotomy", "unstable lower bound H = 1", [] {
                     Matrix a = Matrix::Zero(2, 2);
                     a.diagonal() << 3.0, 2.0;
                     const GapParameters gap{1.0, 1.0, 0.5};
                     const TrichotomyFrame f = frame_from_bases(Matrix::Identity(2, 2), Matrix(2, 0), Matrix(2, 0), gap);
                     return within(unstable_lower_bound(constant_frames(f), constant_cocycle(a), 2.0, 5.0, 0.1), 1.0, 1e-10);
                 }});

    // lyapunov_perron
    c.push_back({"lyapunov_perron", "contraction constant hand value", [] {
                     return within(contraction_constant(1.0, 0.1, GapParameters{1.0, 2.0, 0.5}, 0.75), 0.88, 1e-12);
                 }});
    c.push_back({"lyapunov_perron", "mollifier slope bound is 2", [] {
                     double worst = 0.0;
                     for (int i = 0; i <= 100000; ++i) worst = std::max(worst, std::abs(mollifier_derivative(1.0 + i * 1e-5)));
                     return std::pair{worst <= 2.0 + 1e-9 && worst >= 2.0 - 1e-6, "max slope " + format_double(worst)};
                 }});
    c.push_back({"lyapunov_perron", "graph vanishes at v = 0", [sign] {
                     BurgersConfig b;
                     b.n_modes = 4;
                     b.quadratic_sign = sign;
                     const NoisePath p = NoisePath::silent(1e-2, -20, 20, 4);
                     const LPProblem prob = burgers_lp_problem(b, GapParameters{2.5, 2.5, 0.1}, 0.012, p);
                     LPSettings s;
                     s.tol = 1e-12;
                     const LPSolution sol = solve_center_graph(prob, s, Vector::Zero(4));
                     return std::pair{sol.h.norm() == 0.0 && sol.iterations <= 1,
                                      "|h| = " + format_double(sol.h.norm()) + " after " +
                                          std::to_string(sol.iterations) + " iterations"};
                 }});
    c.push_back({"lyapunov_perron", "graph slaving coefficient -1/6", [sign] {
                     BurgersConfig b;
                     b.n_modes = 4;
                     b.quadratic_sign = sign;
                     const NoisePath p = NoisePath::silent(1e-2, -20, 20, 4);
                     const LPProblem prob = burgers_lp_problem(b, GapParameters{2.5, 2.5, 0.1}, 0.012, p);
                     LPSettings s;
                     s.tol = 1e-13;
                     Vector v = Vector::Zero(4);
                     v(0) = 0.004;
                     const LPSolution sol = solve_center_graph(prob, s, v);
                     return within(sol.h(1) / (0.004 * 0.004), -1.0 / 6.0, 5e-3);
                 }});

    // burgers
    c.push_back({"burgers", "a sin x feeds a^2/2 into mode 2", [sign] {
                     BurgersConfig b;
                     b.n_modes = 4;
                     b.quadratic_sign = sign;
                     Vector u = Vector::Zero(4);
                     u(0) = 0.3;
                     const Vector r = galerkin_rhs(u, b);
                     const double other = std::max(std::abs(r(2)), std::abs(r(3)));
                     auto w = within(r(1), -0.045, 1e-15);
                     return std::pair{w.first && other == 0.0, w.second};
                 }});
    c.push_back({"burgers", "mode-1 forcing of (a, b) is ab/2", [sign] {
                     BurgersConfig b;
                     b.n_modes = 4;
                     b.quadratic_sign = sign;
                     Vector u = Vector::Zero(4);
                     u(0) = 0.3;
                     u(1) = -0.2;
                     return within(galerkin_rhs(u, b)(0), 0.5 * 0.3 * -0.2, 1e-15);
                 }});
    c.push_back({"burgers", "quadratic term conserves energy", [] {
                     Vector u(8);
                     u << 0.3, -0.2, 0.1, 0.05, -0.04, 0.02, 0.01, -0.01;
                     const double e = u.dot(quadratic_term(u));
                     return std::pair{std::abs(e) <= 1e-12, "<u, u u_x> = " + format_double(e)};
                 }});
    c.push_back({"burgers", "mode 2 slaves to -a^2/6", [sign] {
                     BurgersConfig b;
                     b.n_modes = 8;
                     b.quadratic_sign = sign;
                     try {
                         const SlavingSample s = settle(b, 0.1);
                         const double want = -s.a * s.a / 6.0;
                         return std::pair{std::abs(s.u2 - want) <= 0.01 * std::abs(want),
                                          "u2 = " + format_double(s.u2) + ", -a^2/6 = " + format_double(want)};
                     } catch (const Error& e) {
                         return std::pair{false, std::string(e.what())};
                     }
                 }});
    c.push_back({"burgers", "reduced drift at a = 0.2", [] {
                     return within(reduced_drift(0.2, 0.0, 0.0, 0.0, 0.0), -0.008 / 12.0, 1e-15);
                 }});
    c.push_back({"burgers", "reduced model follows the closed form", [] {
                     BurgersConfig b;
                     b.n_modes = 3;
                     b.horizon = 20.0;
                     b.burn_in = 0.0;
                     const NoisePath p = NoisePath::silent(b.dt, 0.0, b.horizon, 3);
                     const auto a = reduced_simulate(b, 0.3, p);
                     double err = 0.0;
                     for (std::size_t n = 0; n < a.size(); ++n) {
                         err = std::max(err, std::abs(a[n] - reduced_closed_form(0.3, static_cast<double>(n) * b.dt)));
                     }
                     return std::pair{err <= 1e-4, "sup error " + format_double(err)};
                 }});
    c.push_back({"burgers", "expansion at sigma = 0", [] {
                     ExpansionSnapshot s{Vector::Zero(5), Vector::Zero(5)};
                     const Vector u = manifold_expansion(0.2, 0.0, s);
                     Vector want = Vector::Zero(5);
                     want << 0.2, -0.04 / 6.0, 0.008 / 32.0, 0.0, 0.0;
                     const double err = (u - want).cwiseAbs().maxCoeff();
                     return std::pair{err <= 1e-15, "max difference " + format_double(err)};
                 }});
    return c;
}

} // namespace

std::vector<OracleResult> run_oracle_suite(double quadratic_sign) {
    std::vector<OracleResult> out;
    for (const Check& check : build_checks(quadratic_sign)) {
        OracleResult r{check.module, check.name, false, ""};
        try {
            auto [ok, detail] = check.run();
            r.pass = ok;
            r.detail = detail;
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("raised ") + e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_oracle_table(const std::vector<OracleResult>& results) {
    std::ostringstream os;
    int failures = 0;
    for (const OracleResult& r : results) {
        os << (r.pass ? "PASS" : "FAIL") << "  " << r.module << ": " << r.name << "  (" << r.detail << ")\n";
        if (!r.pass) ++failures;
    }
    os << results.size() - static_cast<std::size_t>(failures) << "/" << results.size() << " oracle checks passed\n";
    return os.str();
}

} // namespace scm::cli
