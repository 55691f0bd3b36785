#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "validate.hpp"
#include "scm/burgers.hpp"
#include "scm/format.hpp"
#include "scm/lyapunov_perron.hpp"
#include "scm/met.hpp"
#include "scm/trichotomy.hpp"

namespace scm::cli {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + format_double(xs[i]);
    return s;
}

struct CocycleSetup {
    PropagatorSource cocycle;
    int dim = 0;
};

// Linear cocycle selected by the `field` key, valid on [t_min, t_max].
CocycleSetup cocycle_from_config(const json& cfg, double t_min, double t_max) {
    const std::string field = get_string(cfg, "field");
    const double dt = get_double(cfg, "dt");
    const std::uint64_t seed = get_seed(cfg, "seed");
    const int n = get_int(cfg, "n_modes");
    if (field == "diagonal") {
        const std::vector<double> eig = get_doubles(cfg, "eigenvalues");
        if (eig.empty()) throw ConfigError("field 'diagonal' needs a non-empty eigenvalues list");
        Matrix a = Matrix::Zero(static_cast<Eigen::Index>(eig.size()), static_cast<Eigen::Index>(eig.size()));
        for (std::size_t i = 0; i < eig.size(); ++i) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = eig[i];
        return {constant_cocycle(a), static_cast<int>(eig.size())};
    }
    if (n < 1) throw ConfigError("n_modes must be at least 1");
    if (field == "burgers") {
        BurgersConfig b;
        b.n_modes = n;
        b.sigma = get_double(cfg, "sigma");
        b.dt = dt;
        b.seed = seed;
        b.validate();
        const VectorField f = burgers_field(b);
        const NoisePath path = make_path(seed, dt, t_min, t_max, n);
        if (cfg.value("linearize", false)) {
            auto traj = std::make_shared<std::vector<Vector>>(evolve_trajectory(f, Vector::Zero(n), 0.0, t_max, path));
            return {[f, path, traj, dt](double t0, double t1) {
                        const long i = std::lround(t0 / dt);
                        if (i < 0 || i >= static_cast<long>(traj->size())) {
                            throw InvalidArgument("linearization requested outside the stored trajectory");
                        }
                        return linearize_along(f, (*traj)[static_cast<std::size_t>(i)], t0, t1, path).matrix;
                    },
                    n};
        }
        return {propagator_source(f, path), n};
    }
    if (field == "example1") {
        VectorField f = linear_field(burgers_eigenvalues(n).asDiagonal().toDenseMatrix());
        const NoisePath path = make_path(seed, dt, t_min, t_max, 1);
        f.multiplicative = ou_sample(path, 0, 1.0).samples.scaled(get_double(cfg, "sigma"));
        return {propagator_source(f, path), n};
    }
    throw ConfigError("unknown field '" + field + "' (expected burgers, diagonal or example1)");
}

GapParameters gap_from_config(const json& cfg) {
    GapParameters g{get_double(cfg, "alpha"), get_double(cfg, "beta"), get_double(cfg, "gamma")};
    try {
        g.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return g;
}

double relative_change(double a, double b) { return std::abs(b - a) / std::max(std::abs(a), 1e-300); }

} // namespace

CommandResult run_spectrum(const json& cfg, int /*threads*/) {
    const double horizon = get_double(cfg, "horizon");
    const double block_len = get_double(cfg, "block_len");
    if (!(horizon > 0.0) || !(block_len > 0.0)) throw ConfigError("horizon and block_len must be positive");
    const int blocks = static_cast<int>(std::lround(horizon / block_len));
    if (blocks < 1) throw ConfigError("horizon must cover at least one block");

    const CocycleSetup setup = cocycle_from_config(cfg, -1.0, horizon + block_len);
    const int top_k = std::min(get_int(cfg, "top_k"), setup.dim);
    if (top_k < 1) throw ConfigError("top_k must be at least 1");

    std::ostringstream csv;
    csv << "block,t";
    for (int i = 1; i <= top_k; ++i) csv << ",lambda_" << i;
    csv << "\n";
    SpectrumOptions opt;
    opt.burn_in = get_int(cfg, "burn_in_blocks");
    opt.on_block = [&](int block, const std::vector<double>& est) {
        csv << block << "," << format_double((block + 1) * block_len);
        for (double x : est) csv << "," << format_double(x);
        csv << "\n";
    };
    LyapunovSpectrum s = lyapunov_spectrum(setup.cocycle, setup.dim, block_len, blocks, top_k, opt);
    s.seed = get_seed(cfg, "seed");

    json out = spectrum_to_json(s);
    out["field"] = get_string(cfg, "field");
    CommandResult r;
    r.files = {{"spectrum.json", dump(out)}, {"convergence.csv", csv.str()}};
    r.summary = "exponents: " + join(s.exponents) + "\n";
    return r;
}

CommandResult run_trichotomy(const json& cfg, int /*threads*/) {
    const GapParameters gap = gap_from_config(cfg);
    const double horizon = get_double(cfg, "horizon");
    const double step = get_double(cfg, "step");
    const double shift_max = get_double(cfg, "shift_max");
    const double shift_step = get_double(cfg, "shift_step");
    const double block_len = get_double(cfg, "block_len");
    const double span = get_double(cfg, "span");
    const double spectrum_horizon = get_double(cfg, "spectrum_horizon");
    if (!(horizon > 0.0) || !(step > 0.0) || !(shift_step > 0.0) || !(block_len > 0.0) || !(span > 0.0) ||
        !(spectrum_horizon > 0.0) || !(shift_max >= 0.0)) {
        throw ConfigError("horizon, step, shift_step, block_len, span and spectrum_horizon must be positive");
    }
    const int probes = get_int(cfg, "probes");
    if (probes < 0) throw ConfigError("probes must be >= 0");

    const double reach = shift_max + 2.0 * horizon + 1.0;
    const CocycleSetup setup =
        cocycle_from_config(cfg, -(reach + span + block_len), std::max(reach, spectrum_horizon) + block_len);

    const int blocks = static_cast<int>(std::lround(spectrum_horizon / block_len));
    const LyapunovSpectrum spectrum = lyapunov_spectrum(setup.cocycle, setup.dim, block_len, blocks, setup.dim);
    const Partition partition = classify(spectrum, gap);
    SplittingOptions so;
    so.block_len = block_len;
    const OseledetsSplitting splitting = oseledets_splitting(setup.cocycle, spectrum, span, so);
    TrichotomyFrame frame = build_frame(splitting, partition, gap);

    // Frames of these cocycles do not depend on the base point.
    double axis_angle = 0.0;
    for (const Matrix& w : splitting.subspaces) {
        Matrix axes = Matrix::Zero(w.rows(), w.cols());
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            Eigen::Index row = 0;
            w.col(c).cwiseAbs().maxCoeff(&row);
            axes(row, c) = 1.0;
        }
        axis_angle = std::max(axis_angle, principal_angle(w, axes));
    }
    const FrameProvider frames = constant_frames(frame);

    double largest_stable = 0.0;
    if (!partition.stable.empty()) largest_stable = spectrum.exponents[static_cast<std::size_t>(partition.stable.front())];
    // explosion is judged by horizon doubling
    const BoundReport r1 = estimate_bounds(frames, setup.cocycle, horizon, step, 0.0, largest_stable, false);
    const BoundReport r2 = estimate_bounds(frames, setup.cocycle, 2.0 * horizon, step, 0.0, largest_stable, false);
    const std::pair<const char*, std::pair<double, double>> ks[] = {{"stable", {r1.bounds.k_s, r2.bounds.k_s}},
                                                                    {"center", {r1.bounds.k_c, r2.bounds.k_c}},
                                                                    {"unstable", {r1.bounds.k_u, r2.bounds.k_u}}};
    for (const auto& [name, k] : ks) {
        if (k.second > 2.0 * k.first) {
            throw NumericalRefusal("ExplodingBound", std::string("the ") + name + " bound grows from " +
                                                         format_double(k.first) + " to " +
                                                         format_double(k.second) + " on doubling the horizon");
        }
    }
    frame.bounds = r2.bounds;

    const int violations =
        count_bound_violations(frame, r2.bounds, setup.cocycle, horizon, step, probes, get_seed(cfg, "seed"));
    const InvarianceDefect defect = invariance_defect(frames, setup.cocycle, 1.0);

    std::vector<double> shifts;
    const long n_shift = std::lround(shift_max / shift_step);
    for (long i = -n_shift; i <= n_shift; ++i) shifts.push_back(static_cast<double>(i) * shift_step);
    const TemperednessSlopes slopes = temperedness_diagnostic(frames, setup.cocycle, shifts, horizon, step);

    json report = frame_to_json(frame, slopes);
    report["exponents"] = spectrum.exponents;
    report["multiplicities"] = spectrum.multiplicities;
    report["partition"] = {{"unstable", partition.unstable}, {"center", partition.center}, {"stable", partition.stable}};
    report["epsilon"] = r1.epsilon;
    report["horizon"] = horizon;
    report["bounds_at_horizon"] = {{"K_s", r1.bounds.k_s}, {"K_c", r1.bounds.k_c}, {"K_u", r1.bounds.k_u}};
    report["horizon_change"] = {{"K_s", relative_change(r1.bounds.k_s, r2.bounds.k_s)},
                                {"K_c", relative_change(r1.bounds.k_c, r2.bounds.k_c)},
                                {"K_u", relative_change(r1.bounds.k_u, r2.bounds.k_u)}};
    report["probes"] = probes;
    report["probe_violations"] = violations;
    report["invariance_defect"] = {{"s", defect.stable}, {"c", defect.center}, {"u", defect.unstable}};
    report["condition_number"] = frame.condition_number;
    report["max_axis_angle"] = axis_angle;
    if (!partition.unstable.empty()) {
        const double rate = spectrum.exponents[static_cast<std::size_t>(partition.unstable.back())];
        report["unstable_lower_bound"] = unstable_lower_bound(frames, setup.cocycle, rate, horizon, step);
    }

    std::ostringstream csv;
    csv << "t,stable,center,unstable\n";
    for (const BoundSample& b : r2.samples) {
        csv << format_double(b.t) << "," << format_double(b.stable) << "," << format_double(b.center) << ","
            << format_double(b.unstable) << "\n";
    }

    CommandResult r;
    r.files = {{"frame.json", dump(report)}, {"bounds.csv", csv.str()}};
    r.summary = "K_s = " + format_double(r2.bounds.k_s) + ", K_c = " + format_double(r2.bounds.k_c) +
                ", K_u = " + format_double(r2.bounds.k_u) + "; probe violations " + std::to_string(violations) +
                "/" + std::to_string(probes) + "; temperedness slopes " + format_double(slopes.stable) + ", " +
                format_double(slopes.center) + ", " + format_double(slopes.unstable) + "\n";
    return r;
}

CommandResult run_manifold(const json& cfg, int threads) {
    const GapParameters gap = gap_from_config(cfg);
    const int n = get_int(cfg, "n_modes");
    if (n < 2) throw ConfigError("n_modes must be at least 2");
    const double rho = get_double(cfg, "rho");
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
    const double dt = get_double(cfg, "dt");
    const double sigma = get_double(cfg, "sigma");
    const double a_max = get_double(cfg, "a_max");
    const int samples = get_int(cfg, "samples");
    if (samples < 1) throw ConfigError("samples must be at least 1");

    LPSettings settings;
    const std::string scheme = get_string(cfg, "scheme");
    if (scheme == "continuous") {
        settings.scheme = LPScheme::continuous;
    } else if (scheme == "discrete") {
        settings.scheme = LPScheme::discrete;
    } else {
        throw ConfigError("unknown scheme '" + scheme + "' (expected continuous or discrete)");
    }
    settings.tol = get_double(cfg, "tol");
    settings.max_iter = get_int(cfg, "max_iter");
    settings.eta = get_double(cfg, "eta");
    if (!(settings.tol > 0.0) || settings.max_iter < 1) throw ConfigError("tol and max_iter must be positive");
    const double eta = settings.eta > 0.0 ? settings.eta : default_eta(gap);
    settings.window = default_window(gap, eta, settings.tol);
    settings.window = std::ceil(settings.window / dt) * dt;

    const std::vector<double> times = get_doubles(cfg, "invariance_times");
    double s_max = 0.0;
    for (double s : times) s_max = std::max(s_max, s);
    MultiplicativeNoise noise;
    const double reach = std::max(settings.window + s_max, noise.k_horizon) + 2.0;

    BurgersConfig b;
    b.n_modes = n;
    b.dt = dt;
    b.seed = get_seed(cfg, "seed");
    std::optional<MultiplicativeNoise> mult;
    NoisePath path = NoisePath::silent(dt, -reach, reach, n);
    if (sigma > 0.0) {
        path = make_path(b.seed, dt, -reach, reach, n);
        noise.z = ou_sample(path, 0, 1.0).samples.scaled(sigma);
        mult = noise;
    } else if (sigma < 0.0) {
        throw ConfigError("sigma must be >= 0");
    }
    const LPProblem problem = burgers_lp_problem(b, gap, rho, path, mult, get_double(cfg, "lip_scale"));

    std::vector<Vector> vs;
    std::vector<double> as;
    for (int i = 0; i < samples; ++i) {
        const double a = samples == 1 ? a_max : -a_max + 2.0 * a_max * i / (samples - 1);
        Vector v = Vector::Zero(n);
        v(0) = a;
        vs.push_back(v);
        as.push_back(a);
    }
    const CenterGraph graph = sample_center_graph(problem, settings, vs, 0.0, threads);

    // h_2 ~ c2 a^2 + c a^4 and h_3 ~ c3 a^3 + c a^5 over the nonzero samples
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < as.size(); ++i) {
        if (as[i] != 0.0) rows.push_back(static_cast<Eigen::Index>(i));
    }
    json fit = json::object();
    if (rows.size() >= 2) {
        const auto m = static_cast<Eigen::Index>(rows.size());
        Matrix x2(m, 2), x3(m, 2);
        Vector y2(m), y3(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            const std::size_t i = static_cast<std::size_t>(rows[static_cast<std::size_t>(r)]);
            const double a = as[i];
            x2.row(r) << a * a, std::pow(a, 4);
            x3.row(r) << std::pow(a, 3), std::pow(a, 5);
            y2(r) = graph.samples[i].h(1);
            y3(r) = n >= 3 ? graph.samples[i].h(2) : 0.0;
        }
        const Vector c2 = x2.colPivHouseholderQr().solve(y2);
        const Vector c3 = x3.colPivHouseholderQr().solve(y3);
        fit = {{"c2", c2(0)}, {"c2_next", c2(1)}, {"c3", c3(0)}, {"c3_next", c3(1)}};
    }

    double max_ratio = 0.0, max_update = 0.0;
    int max_iterations = 0;
    for (const GraphSample& g : graph.samples) {
        max_ratio = std::max(max_ratio, g.max_ratio);
        max_update = std::max(max_update, g.final_update);
        max_iterations = std::max(max_iterations, g.iterations);
    }

    const Matrix dh = graph_derivative_at_zero(problem, settings, get_double(cfg, "tangency_eps"));

    const int n_probes = get_int(cfg, "invariance_probes");
    const double probe_max = get_double(cfg, "invariance_probe_max");
    std::vector<Vector> probes;
    for (int i = 0; i < n_probes; ++i) {
        Vector v = Vector::Zero(n);
        v(0) = n_probes == 1 ? probe_max : -probe_max + 2.0 * probe_max * i / (n_probes - 1);
        probes.push_back(v);
    }
    json invariance = json::array();
    for (double s : times) {
        const InvarianceReport ir = invariance_residual(problem, settings, s, probes);
        invariance.push_back({{"s", s}, {"residual", ir.residual}, {"evaluated", ir.evaluated}});
    }

    LPOperator op(problem, settings, 0.0);
    json report{{"rho_prime", graph.rho_prime},
                {"eta", graph.eta},
                {"window", op.window()},
                {"k_bound", problem.k_bound},
                {"lipschitz", problem.cutoff.lipschitz},
                {"radius", problem.cutoff.radius},
                {"scheme", scheme},
                {"max_ratio", max_ratio},
                {"max_final_update", max_update},
                {"max_iterations", max_iterations},
                {"fit", fit},
                {"tangency", dh.norm()},
                {"invariance", invariance}};

    std::ostringstream csv;
    write_graph_csv(csv, graph);
    CommandResult r;
    r.files = {{"graph.csv", csv.str()}, {"report.json", dump(report)}};
    r.summary = "rho' = " + format_double(graph.rho_prime) + ", eta = " + format_double(graph.eta);
    if (fit.contains("c2")) {
        r.summary += ", c2 = " + format_double(fit["c2"].get<double>()) + ", c3 = " + format_double(fit["c3"].get<double>());
    }
    r.summary += ", |Dh(0)| = " + format_double(dh.norm()) + "\n";
    return r;
}

CommandResult run_burgers(const json& cfg, int threads) {
    BurgersConfig b;
    b.n_modes = get_int(cfg, "n_modes");
    b.sigma = get_double(cfg, "sigma");
    b.sigma_k = get_doubles(cfg, "sigma_k");
    b.dt = get_double(cfg, "dt");
    b.horizon = get_double(cfg, "horizon");
    b.burn_in = get_double(cfg, "burn_in");
    b.seed = get_seed(cfg, "seed");
    b.quadratic_sign = get_double(cfg, "quadratic_sign");
    try {
        b.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (b.n_modes < 3) throw ConfigError("n_modes must be at least 3");
    const int n_seeds = get_int(cfg, "n_seeds");
    const int stride = get_int(cfg, "trajectory_stride");
    if (n_seeds < 1 || stride < 1) throw ConfigError("n_seeds and trajectory_stride must be at least 1");
    const double a0 = get_double(cfg, "a0");

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < n_seeds; ++i) seeds.push_back(b.seed + static_cast<std::uint64_t>(i));

    const ComparisonReport cmp = compare_full_vs_reduced(b, a0, seeds, threads);
    json out{{"comparison", comparison_to_json(cmp)}};

    const std::vector<double> levels = get_doubles(cfg, "sigma_levels");
    std::string scaling_note;
    if (!levels.empty()) {
        const SigmaScaling sc = sigma_scaling(b, get_double(cfg, "scaling_a0"), levels, seeds, threads);
        out["scaling"] = {{"a0", get_double(cfg, "scaling_a0")}, {"sigmas", sc.sigmas}, {"rms", sc.rms}, {"slope", sc.slope}};
        scaling_note = ", sigma slope " + format_double(sc.slope);
    }

    const NoisePath path = burgers_path(b);
    const ExpansionProcesses proc = expansion_processes(path, b);
    const Vector u0 = manifold_expansion(a0, b.sigma, snapshot(proc, path.index_of(0.0)));
    std::ostringstream csv;
    write_trajectory_csv(csv, simulate(b, u0, path, stride));

    CommandResult r;
    r.files = {{"trajectory.csv", csv.str()}, {"comparison.json", dump(out)}};
    r.summary = "rms error " + format_double(cmp.rms) + ", sup error " + format_double(cmp.sup) + " over " +
                std::to_string(n_seeds) + " seeds" + scaling_note + "\n";
    return r;
}

CommandResult run_validate(const json& cfg, int /*threads*/) {
    const std::vector<OracleResult> results = run_oracle_suite(get_double(cfg, "quadratic_sign"));
    int failures = 0;
    std::ostringstream csv;
    csv << "module,check,pass,detail\n";
    for (const OracleResult& o : results) {
        if (!o.pass) ++failures;
        std::string detail = o.detail;
        std::replace(detail.begin(), detail.end(), '"', '\'');
        csv << o.module << ",\"" << o.name << "\"," << (o.pass ? 1 : 0) << ",\"" << detail << "\"\n";
    }
    CommandResult r;
    r.files = {{"validate.csv", csv.str()}};
    r.summary = format_oracle_table(results);
    r.exit_code = std::min(failures, 125);
    return r;
}

CommandResult run_command(const std::string& sub, const json& cfg, int threads) {
    if (sub == "spectrum") return run_spectrum(cfg, threads);
    if (sub == "trichotomy") return run_trichotomy(cfg, threads);
    if (sub == "manifold") return run_manifold(cfg, threads);
    if (sub == "burgers") return run_burgers(cfg, threads);
    if (sub == "validate") return run_validate(cfg, threads);
    throw ConfigError("unknown subcommand '" + sub + "'");
}

std::string manifest_text(const std::string& sub, const json& cfg) {
    return dump(json{{"subcommand", sub}, {"config", cfg}});
}

namespace {

void write_outputs(const std::filesystem::path& dir, const std::vector<OutputFile>& files) {
    std::filesystem::create_directories(dir);
    for (const OutputFile& f : files) {
        std::ofstream os(dir / f.name, std::ios::binary);
        os << f.content;
        if (!os) throw Error("IOError", "cannot write " + (dir / f.name).string());
    }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Random dynamical systems toolkit: spectra, trichotomies, center manifolds, Burgers reduction"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    const std::map<std::string, std::string> about{
        {"spectrum", "Lyapunov spectrum of a linear cocycle (QR estimator)"},
        {"trichotomy", "trichotomy frame, bound constants and temperedness diagnostics"},
        {"manifold", "center-manifold graph by fixed-point iteration"},
        {"burgers", "full Galerkin simulation against the reduced amplitude model"},
        {"validate", "oracle checks across all modules"},
    };
    for (const std::string& name : subcommands()) {
        CLI::App* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config_path, "config file (key = value, or JSON / manifest)");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string sub = app.get_subcommands().front()->get_name();

    try {
        const json user = config_path.empty() ? json::object() : load_config_file(config_path);
        const json cfg = resolve_config(sub, user, seed);
        CommandResult result = run_command(sub, cfg, threads);
        result.files.push_back({"manifest.json", manifest_text(sub, cfg)});
        write_outputs(out_dir, result.files);
        out << result.summary;
        return result.exit_code;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace scm::cli
