#include "scm/lyapunov_perron.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "scm/format.hpp"
#include "scm/parallel.hpp"

namespace scm {

namespace {

double psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
double psi_prime(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

} // namespace

double mollifier(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    const double a = psi(2.0 - s);
    const double b = psi(s - 1.0);
    return a / (a + b);
}

double mollifier_derivative(double s) {
    if (s <= 1.0 || s >= 2.0) return 0.0;
    const double a = psi(2.0 - s);
    const double b = psi(s - 1.0);
    const double da = -psi_prime(2.0 - s);
    const double db = psi_prime(s - 1.0);
    return (da * b - a * db) / ((a + b) * (a + b));
}

Vector QuadraticForm::operator()(const Vector& x) const {
    Vector out(dim());
    for (int k = 0; k < dim(); ++k) out(k) = x.dot(forms[static_cast<std::size_t>(k)] * x);
    return out;
}

Matrix QuadraticForm::jacobian(const Vector& x) const {
    Matrix j(dim(), x.size());
    for (int k = 0; k < dim(); ++k) j.row(k) = 2.0 * (forms[static_cast<std::size_t>(k)] * x).transpose();
    return j;
}

double QuadraticForm::bound() const {
    double sum = 0.0;
    for (const Matrix& q : forms) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
        const double n = es.eigenvalues().cwiseAbs().maxCoeff();
        sum += n * n;
    }
    return std::sqrt(sum);
}

QuadraticForm QuadraticForm::scaled(double factor) const {
    QuadraticForm out = *this;
    for (Matrix& q : out.forms) q *= factor;
    return out;
}

double quadratic_cutoff_lipschitz(double b, double rho) {
    if (!(rho > 0.0)) throw InvalidArgument("cut-off radius must be positive");
    constexpr int samples = 20000;
    double best = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double s = 2.0 * i / samples;
        const double v = 2.0 * s * mollifier(s) + s * s * std::abs(mollifier_derivative(s));
        best = std::max(best, v);
    }
    return b * rho * best;
}

Vector CutoffNonlinearity::operator()(double t, const Vector& x) const {
    const double s = x.norm() / radius;
    if (s >= 2.0) return Vector::Zero(x.size());
    return mollifier(s) * raw(t, x);
}

Matrix CutoffNonlinearity::jacobian(double t, const Vector& x) const {
    const auto n = x.size();
    const double r = x.norm();
    const double s = r / radius;
    if (s >= 2.0) return Matrix::Zero(n, n);
    Matrix df;
    if (raw_jacobian) {
        df = raw_jacobian(t, x);
    } else {
        df.resize(n, n);
        const double h = 1e-7 * std::max(1.0, r);
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            df.col(i) = (raw(t, xp) - raw(t, xm)) / (2.0 * h);
        }
    }
    Matrix j = mollifier(s) * df;
    if (s > 1.0) j += raw(t, x) * (mollifier_derivative(s) / (radius * r)) * x.transpose();
    return j;
}

CutoffNonlinearity cutoff_quadratic(const QuadraticForm& q, double radius) {
    CutoffNonlinearity c;
    c.raw = [q](double, const Vector& x) { return q(x); };
    c.raw_jacobian = [q](double, const Vector& x) { return q.jacobian(x); };
    c.radius = radius;
    c.lipschitz = quadratic_cutoff_lipschitz(q.bound(), radius);
    return c;
}

double WeightedTrajectory::norm() const {
    double best = 0.0;
    for (int j = -half; j <= half; ++j) {
        best = std::max(best, std::exp(-eta * std::abs(j * step)) * at(j).norm());
    }
    return best;
}

WeightedTrajectory zero_trajectory(int dim, double base, double step, int half, double eta) {
    WeightedTrajectory w;
    w.base = base;
    w.step = step;
    w.half = half;
    w.eta = eta;
    w.values.assign(static_cast<std::size_t>(2 * half + 1), Vector::Zero(dim));
    return w;
}

double weighted_distance(const WeightedTrajectory& a, const WeightedTrajectory& b) {
    if (a.half != b.half || a.step != b.step) throw InvalidArgument("trajectories live on different grids");
    double best = 0.0;
    for (int j = -a.half; j <= a.half; ++j) {
        best = std::max(best, std::exp(-a.eta * std::abs(j * a.step)) * (a.at(j) - b.at(j)).norm());
    }
    return best;
}

double contraction_constant(double k_bound, double lip, const GapParameters& gap, double eta) {
    const double m = std::min(gap.alpha, gap.beta);
    if (!(eta > gap.gamma) || !(eta < m)) {
        throw InvalidArgument("eta = " + format_double(eta) + " must lie strictly between gamma and min(alpha, beta)");
    }
    return k_bound * lip * (1.0 / (eta - gap.gamma) + 1.0 / (gap.beta - eta) + 1.0 / (gap.alpha - eta));
}

double default_eta(const GapParameters& gap) {
    const double m = std::min(gap.alpha, gap.beta);
    return gap.gamma > 0.0 ? std::sqrt(gap.gamma * m) : 0.5 * m;
}

double default_window(const GapParameters& gap, double eta, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    return std::log(10.0 / tol) / (std::min(gap.alpha, gap.beta) - eta);
}

LPOperator::LPOperator(const LPProblem& problem, const LPSettings& settings, double base)
    : problem_(&problem), scheme_(settings.scheme), base_(base) {
    problem.gap.validate();
    if (problem.field.additive_scales.size() > 0 && problem.field.additive_scales.cwiseAbs().maxCoeff() > 0.0) {
        throw InvalidArgument("the center-manifold solver needs F(0) = 0; use multiplicative noise");
    }
    if (!problem.cutoff.raw) throw InvalidArgument("cut-off nonlinearity has no raw part");
    eta_ = settings.eta > 0.0 ? settings.eta : default_eta(problem.gap);
    rho_prime_ = contraction_constant(problem.k_bound, problem.cutoff.lipschitz, problem.gap, eta_);
    if (settings.max_iter < 1) throw InvalidArgument("max_iter must be positive");
    const double window = settings.window > 0.0 ? settings.window : default_window(problem.gap, eta_, settings.tol);
    if (scheme_ == LPScheme::continuous) {
        step_ = settings.step > 0.0 ? settings.step : problem.path.dt();
    } else {
        step_ = 1.0;
    }
    half_ = static_cast<int>(std::ceil(window / step_ - 1e-9));
    dim_ = problem.field.dim();
    if (time_lo() < problem.path.t_min() - 1e-9 || time_hi() > problem.path.t_max() + 1e-9) {
        throw InvalidArgument("noise path [" + format_double(problem.path.t_min()) + ", " +
                              format_double(problem.path.t_max()) + "] does not cover the window [" +
                              format_double(time_lo()) + ", " + format_double(time_hi()) + "]");
    }

    const auto points = static_cast<std::size_t>(2 * half_ + 1);
    eu_.resize(points);
    ec_.resize(points);
    es_.resize(points);
    lu_.resize(points);
    lc_.resize(points);
    ls_.resize(points);
    for (int j = -half_; j <= half_; ++j) {
        const auto i = static_cast<std::size_t>(j + half_);
        const TrichotomyFrame f = problem.frames(time(j));
        if (f.dim() != dim_) throw InvalidArgument("frame dimension does not match the field");
        if (j == 0) frame0_ = f;
        eu_[i] = f.e_u;
        ec_[i] = f.e_c;
        es_[i] = f.e_s;
        lu_[i] = f.l_u;
        lc_[i] = f.l_c;
        ls_[i] = f.l_s;
    }
    const auto steps = static_cast<std::size_t>(2 * half_);
    step_matrix_.resize(steps);
    cu_.resize(steps);
    cc_.resize(steps);
    cs_.resize(steps);
    cu_inv_.resize(steps);
    cc_inv_.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const int j = static_cast<int>(i) - half_;
        step_matrix_[i] = linear_propagator(problem.field, time(j), time(j + 1), problem.path).matrix;
        cu_[i] = lu_[i + 1] * step_matrix_[i] * eu_[i];
        cc_[i] = lc_[i + 1] * step_matrix_[i] * ec_[i];
        cs_[i] = ls_[i + 1] * step_matrix_[i] * es_[i];
        if (cu_[i].size() > 0) cu_inv_[i] = cu_[i].inverse();
        if (cc_[i].size() > 0) cc_inv_[i] = cc_[i].inverse();
    }

    cut_field_ = problem.field;
    cut_field_.additive_scales.resize(0);
    const CutoffNonlinearity cut = problem.cutoff;
    cut_field_.nonlinearity = [cut](double t, const Vector& x) { return cut(t, x); };
    cut_field_.jacobian = [cut](double t, const Vector& x) { return cut.jacobian(t, x); };
    cut_field_.lipschitz_bound = cut.lipschitz;
}

WeightedTrajectory LPOperator::zero() const { return zero_trajectory(dim_, base_, step_, half_, eta_); }

Vector LPOperator::forcing(int j, const Vector& x) const {
    if (scheme_ == LPScheme::continuous) return problem_->cutoff(time(j), x);
    const auto i = static_cast<std::size_t>(j + half_);
    return evolve(cut_field_, x, time(j), time(j + 1), problem_->path) - step_matrix_[i] * x;
}

double LPOperator::tail_bound(const WeightedTrajectory& traj) const {
    const double m = std::min(problem_->gap.alpha, problem_->gap.beta);
    return std::exp(-(m - eta_) * window()) * traj.norm() * problem_->k_bound * problem_->cutoff.lipschitz;
}

WeightedTrajectory LPOperator::apply(const WeightedTrajectory& traj, const Vector& v) const {
    if (traj.half != half_ || traj.values.empty() || traj.at(0).size() != dim_) {
        throw InvalidArgument("trajectory does not live on the operator grid");
    }
    const bool continuous = scheme_ == LPScheme::continuous;
    const int last = continuous ? half_ : half_ - 1;
    std::vector<Vector> g(static_cast<std::size_t>(2 * half_ + 1));
    for (int j = -half_; j <= last; ++j) g[static_cast<std::size_t>(j + half_)] = forcing(j, traj.at(j));

    const auto steps = static_cast<std::size_t>(2 * half_);
    const double hh = 0.5 * step_;
    // per-step block increments
    auto increment = [&](const std::vector<Matrix>& c, const std::vector<Matrix>& l, std::size_t i) -> Vector {
        if (continuous) return hh * (c[i] * (l[i] * g[i]) + l[i + 1] * g[i + 1]);
        return l[i + 1] * g[i];
    };

    const auto points = steps + 1;
    std::vector<Vector> su(points), sc(points), ss(points);
    const auto du = eu_[0].cols(), dc = ec_[0].cols(), ds = es_[0].cols();

    ss[0] = Vector::Zero(ds);
    for (std::size_t i = 0; i < steps; ++i) ss[i + 1] = cs_[i] * ss[i] + increment(cs_, ls_, i);

    su[steps] = Vector::Zero(du);
    for (std::size_t i = steps; i-- > 0;) {
        su[i] = du > 0 ? Vector(cu_inv_[i] * (su[i + 1] - increment(cu_, lu_, i))) : Vector::Zero(0);
    }

    const auto origin = static_cast<std::size_t>(half_);
    sc[origin] = lc_[origin] * v;
    for (std::size_t i = origin; i < steps; ++i) sc[i + 1] = cc_[i] * sc[i] + increment(cc_, lc_, i);
    for (std::size_t i = origin; i-- > 0;) {
        sc[i] = dc > 0 ? Vector(cc_inv_[i] * (sc[i + 1] - increment(cc_, lc_, i))) : Vector::Zero(0);
    }

    WeightedTrajectory out = zero();
    for (std::size_t i = 0; i < points; ++i) {
        Vector x = Vector::Zero(dim_);
        if (du > 0) x += eu_[i] * su[i];
        if (dc > 0) x += ec_[i] * sc[i];
        if (ds > 0) x += es_[i] * ss[i];
        out.values[i] = std::move(x);
    }
    const double n = out.norm();
    if (!std::isfinite(n) || n > 1e100) {
        throw NumericalRefusal("WeightedNormOverflow", "iterate left the weighted trajectory space");
    }
    return out;
}

LPSolution solve_center_graph(const LPOperator& op, const Vector& v, int max_iter, double tol) {
    if (!(op.rho_prime() < 1.0)) {
        throw NumericalRefusal("NonContraction", "rho' = " + format_double(op.rho_prime()) + " >= 1");
    }
    LPSolution sol;
    sol.v = v;
    sol.rho_prime = op.rho_prime();
    WeightedTrajectory x = op.zero();
    bool converged = false;
    for (int k = 1; k <= max_iter; ++k) {
        WeightedTrajectory y = op.apply(x, v);
        const double d = weighted_distance(y, x);
        if (!sol.updates.empty()) {
            const double prev = sol.updates.back();
            const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, y.norm());
            if (prev > 0.0 && d > floor) sol.ratios.push_back(d / prev);
        }
        sol.updates.push_back(d);
        x = std::move(y);
        sol.iterations = k;
        if (d <= tol) {
            converged = true;
            break;
        }
    }
    sol.final_update = sol.updates.back();
    if (!converged) {
        const double last = sol.ratios.empty() ? 0.0 : sol.ratios.back();
        throw NumericalRefusal("MaxIterations", "no convergence after " + std::to_string(max_iter) +
                                                    " iterations (last ratio " + format_double(last) + ")");
    }
    const TrichotomyFrame& f = op.frame_at_base();
    sol.h = f.p_s * x.at(0) + f.p_u * x.at(0);
    sol.tail_bound = op.tail_bound(x);
    sol.trajectory = std::move(x);
    return sol;
}

LPSolution solve_center_graph(const LPProblem& problem, const LPSettings& settings, const Vector& v,
                              double base) {
    const LPOperator op(problem, settings, base);
    return solve_center_graph(op, v, settings.max_iter, settings.tol);
}

CenterGraph sample_center_graph(const LPProblem& problem, const LPSettings& settings,
                                const std::vector<Vector>& vs, double base, int threads,
                                bool keep_trajectories) {
    const LPOperator op(problem, settings, base);
    if (!(op.rho_prime() < 1.0)) {
        throw NumericalRefusal("NonContraction", "rho' = " + format_double(op.rho_prime()) + " >= 1");
    }
    CenterGraph graph;
    graph.eta = op.eta();
    graph.rho_prime = op.rho_prime();
    graph.base = base;
    graph.frame = op.frame_at_base();
    graph.samples.resize(vs.size());
    if (keep_trajectories) graph.trajectories.resize(vs.size());

    parallel_for(vs.size(), threads, [&](std::size_t i) {
        LPSolution s = solve_center_graph(op, vs[i], settings.max_iter, settings.tol);
        const double worst = s.ratios.empty() ? 0.0 : *std::max_element(s.ratios.begin(), s.ratios.end());
        graph.samples[i] = GraphSample{vs[i], s.h, s.iterations, s.final_update, worst};
        if (keep_trajectories) graph.trajectories[i] = std::move(s.trajectory);
    });
    return graph;
}

void write_graph_csv(std::ostream& out, const CenterGraph& graph) {
    const int n = graph.frame.dim();
    for (int k = 1; k <= n; ++k) out << "v_" << k << ',';
    for (int k = 1; k <= n; ++k) out << "h_" << k << ',';
    out << "iterations,final_update,rho_prime\n";
    for (const GraphSample& s : graph.samples) {
        for (int k = 0; k < n; ++k) out << format_double(s.v(k)) << ',';
        for (int k = 0; k < n; ++k) out << format_double(s.h(k)) << ',';
        out << s.iterations << ',' << format_double(s.final_update) << ',' << format_double(graph.rho_prime)
            << '\n';
    }
}

Matrix graph_derivative_at_zero(const LPProblem& problem, const LPSettings& settings, double eps,
                                double base) {
    if (!(eps > 0.0)) throw InvalidArgument("difference step must be positive");
    const LPOperator op(problem, settings, base);
    const Matrix& ec = op.frame_at_base().e_c;
    if (ec.cols() == 0) throw InvalidArgument("graph derivative needs a nonempty center block");
    Matrix d(ec.rows(), ec.cols());
    for (Eigen::Index i = 0; i < ec.cols(); ++i) {
        const Vector e = ec.col(i);
        const Vector hp = solve_center_graph(op, eps * e, settings.max_iter, settings.tol).h;
        const Vector hm = solve_center_graph(op, -eps * e, settings.max_iter, settings.tol).h;
        d.col(i) = (hp - hm) / (2.0 * eps);
    }
    return d;
}

InvarianceReport invariance_residual(const LPProblem& problem, const LPSettings& settings, double s,
                                     const std::vector<Vector>& probes, bool raw_flow) {
    if (!(s >= 0.0)) throw InvalidArgument("invariance time must be nonnegative");
    InvarianceReport report;
    if (s == 0.0) {
        report.evaluated = static_cast<int>(probes.size());
        return report;
    }
    const LPOperator here(problem, settings, 0.0);
    const LPOperator there(problem, settings, s);
    VectorField flow = problem.field;
    flow.additive_scales.resize(0);
    if (raw_flow) {
        flow.nonlinearity = problem.cutoff.raw;
        flow.jacobian = problem.cutoff.raw_jacobian;
    } else {
        const CutoffNonlinearity cut = problem.cutoff;
        flow.nonlinearity = [cut](double t, const Vector& x) { return cut(t, x); };
        flow.jacobian = [cut](double t, const Vector& x) { return cut.jacobian(t, x); };
    }
    for (const Vector& v : probes) {
        const Vector x0 = v + solve_center_graph(here, v, settings.max_iter, settings.tol).h;
        if (raw_flow && x0.norm() > 2.0 * problem.cutoff.radius) {
            ++report.skipped;
            continue;
        }
        const Vector y = evolve(flow, x0, 0.0, s, problem.path);
        const Vector w = there.frame_at_base().p_c * y;
        const Vector hw = solve_center_graph(there, w, settings.max_iter, settings.tol).h;
        report.residual = std::max(report.residual, (y - w - hw).norm());
        ++report.evaluated;
    }
    return report;
}

nlohmann::json lp_solution_to_json(const LPSolution& s) {
    return nlohmann::json{{"v", std::vector<double>(s.v.data(), s.v.data() + s.v.size())},
                          {"h", std::vector<double>(s.h.data(), s.h.data() + s.h.size())},
                          {"iterations", s.iterations},
                          {"final_update", s.final_update},
                          {"ratios", s.ratios},
                          {"rho_prime", s.rho_prime},
                          {"tail_bound", s.tail_bound}};
}

} // namespace scm
