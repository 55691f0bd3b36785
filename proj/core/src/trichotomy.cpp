#include "scm/trichotomy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>

#include <nlohmann/json.hpp>

#include "scm/format.hpp"

namespace scm {

void GapParameters::validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma >= 0.0)) {
        throw InvalidArgument("gap parameters need alpha > 0, beta > 0, gamma >= 0");
    }
    if (!(alpha > gamma) || !(beta > gamma)) {
        throw InvalidArgument("gap parameters need alpha > gamma and beta > gamma");
    }
}

Partition classify(const std::vector<double>& exponents, const GapParameters& gap) {
    gap.validate();
    constexpr double edge = 1e-12;
    Partition p;
    for (std::size_t i = 0; i < exponents.size(); ++i) {
        const double l = exponents[i];
        for (double b : {gap.alpha, -gap.beta, gap.gamma, -gap.gamma}) {
            if (std::abs(l - b) <= edge) {
                throw NumericalRefusal("UnclassifiableExponent",
                                       "exponent " + format_double(l) + " sits on a gap edge");
            }
        }
        const int idx = static_cast<int>(i);
        if (l >= gap.alpha) {
            p.unstable.push_back(idx);
        } else if (std::abs(l) <= gap.gamma) {
            p.center.push_back(idx);
        } else if (l <= -gap.beta) {
            p.stable.push_back(idx);
        } else {
            throw NumericalRefusal("UnclassifiableExponent",
                                   "exponent " + format_double(l) + " lies in a forbidden band");
        }
    }
    return p;
}

Partition classify(const LyapunovSpectrum& spectrum, const GapParameters& gap) {
    return classify(spectrum.exponents, gap);
}

const Matrix& TrichotomyFrame::projection(Block b) const {
    switch (b) {
    case Block::stable: return p_s;
    case Block::center: return p_c;
    default: return p_u;
    }
}

const Matrix& TrichotomyFrame::frame(Block b) const {
    switch (b) {
    case Block::stable: return e_s;
    case Block::center: return e_c;
    default: return e_u;
    }
}

const Matrix& TrichotomyFrame::dual(Block b) const {
    switch (b) {
    case Block::stable: return l_s;
    case Block::center: return l_c;
    default: return l_u;
    }
}

TrichotomyFrame frame_from_bases(const Matrix& e_u, const Matrix& e_c, const Matrix& e_s,
                                 const GapParameters& gap, double max_condition) {
    const auto n = std::max({e_u.rows(), e_c.rows(), e_s.rows()});
    const auto du = e_u.cols(), dc = e_c.cols(), ds = e_s.cols();
    if (du + dc + ds != n) throw InvalidArgument("block frames do not span the space");
    Matrix e(n, n);
    if (du > 0) e.leftCols(du) = e_u;
    if (dc > 0) e.middleCols(du, dc) = e_c;
    if (ds > 0) e.rightCols(ds) = e_s;
    Eigen::JacobiSVD<Matrix> svd(e);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(n - 1);
    if (!(cond <= max_condition)) {
        throw NumericalRefusal("IllConditionedFrame",
                               "condition number " + format_double(cond) + " of the block frames");
    }
    const Matrix inv = e.partialPivLu().inverse();
    TrichotomyFrame f;
    f.gap = gap;
    f.condition_number = cond;
    f.center_dim = static_cast<int>(dc);
    f.e_u = e.leftCols(du);
    f.e_c = e.middleCols(du, dc);
    f.e_s = e.rightCols(ds);
    f.l_u = inv.topRows(du);
    f.l_c = inv.middleRows(du, dc);
    f.l_s = inv.bottomRows(ds);
    f.p_u = f.e_u * f.l_u;
    f.p_c = f.e_c * f.l_c;
    f.p_s = f.e_s * f.l_s;
    return f;
}

TrichotomyFrame build_frame(const OseledetsSplitting& splitting, const Partition& partition,
                            const GapParameters& gap, double max_condition) {
    const auto n = splitting.dimension();
    auto stack = [&](const std::vector<int>& groups) {
        Eigen::Index cols = 0;
        for (int g : groups) cols += splitting.subspaces.at(static_cast<std::size_t>(g)).cols();
        Matrix m(n, cols);
        Eigen::Index at = 0;
        for (int g : groups) {
            const Matrix& w = splitting.subspaces[static_cast<std::size_t>(g)];
            m.middleCols(at, w.cols()) = w;
            at += w.cols();
        }
        return m;
    };
    return frame_from_bases(stack(partition.unstable), stack(partition.center), stack(partition.stable),
                            gap, max_condition);
}

FrameProvider constant_frames(TrichotomyFrame frame) {
    return [frame = std::move(frame)](double) { return frame; };
}

FrameProvider shifted_frames(PropagatorSource cocycle, LyapunovSpectrum spectrum, Partition partition,
                             GapParameters gap, double t_span, double block_len) {
    struct Cache {
        std::mutex lock;
        std::map<long long, TrichotomyFrame> frames;
    };
    auto cache = std::make_shared<Cache>();
    return [=](double t) {
        const auto key = static_cast<long long>(std::llround(t * 1e6));
        {
            std::lock_guard<std::mutex> g(cache->lock);
            auto it = cache->frames.find(key);
            if (it != cache->frames.end()) return it->second;
        }
        SplittingOptions opt;
        opt.block_len = block_len;
        opt.base = t;
        const OseledetsSplitting s = oseledets_splitting(cocycle, spectrum, t_span, opt);
        TrichotomyFrame f = build_frame(s, partition, gap);
        std::lock_guard<std::mutex> g(cache->lock);
        cache->frames.emplace(key, f);
        return f;
    };
}

namespace {

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

// U(t_j, omega) E_a(omega) for t_j = base + j * step, j = 0..steps (sign gives direction).
// Backward steps solve against the forward block and re-project onto the block.
std::vector<Matrix> block_orbit(const FrameProvider& frames, const PropagatorSource& cocycle, Block b,
                                double base, double step, int steps, int direction) {
    const TrichotomyFrame f0 = frames(base);
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(steps + 1));
    Matrix x = f0.frame(b);
    out.push_back(x);
    if (x.cols() == 0) {
        out.resize(static_cast<std::size_t>(steps + 1), x);
        return out;
    }
    for (int j = 1; j <= steps; ++j) {
        if (direction > 0) {
            const double t0 = base + (j - 1) * step;
            x = cocycle(t0, t0 + step) * x;
        } else {
            const double t1 = base - (j - 1) * step;
            const double t0 = t1 - step;
            x = cocycle(t0, t1).partialPivLu().solve(x);
            x = frames(t0).projection(b) * x;
        }
        out.push_back(x);
    }
    return out;
}

const char* block_name(Block b) {
    switch (b) {
    case Block::stable: return "stable";
    case Block::center: return "center";
    default: return "unstable";
    }
}

} // namespace

BoundReport estimate_bounds(const FrameProvider& frames, const PropagatorSource& cocycle, double horizon,
                            double step, double base, double largest_stable_exponent,
                            bool detect_explosion) {
    if (!(step > 0.0) || !(horizon >= step)) throw InvalidArgument("bound grid needs 0 < step <= horizon");
    const TrichotomyFrame f0 = frames(base);
    const GapParameters& gap = f0.gap;
    const int steps = static_cast<int>(std::lround(horizon / step));
    const int half = steps / 2;

    BoundReport report;
    report.epsilon = -gap.alpha - largest_stable_exponent;
    report.samples.resize(static_cast<std::size_t>(2 * steps + 1));
    for (int j = -steps; j <= steps; ++j) report.samples[static_cast<std::size_t>(j + steps)].t = j * step;

    struct Maxima {
        double full = 0.0;
        double inner = 0.0;
    };
    auto record = [&](Block b, int direction, double (BoundSample::*slot), auto weight) {
        const Matrix& l = f0.dual(b);
        const auto orbit = block_orbit(frames, cocycle, b, base, step, steps, direction);
        Maxima m;
        for (int j = 0; j <= steps; ++j) {
            const double t = direction * j * step;
            const double ratio =
                l.rows() == 0 ? 0.0 : spectral_norm(orbit[static_cast<std::size_t>(j)] * l) * weight(t);
            report.samples[static_cast<std::size_t>(direction * j + steps)].*slot = ratio;
            m.full = std::max(m.full, ratio);
            if (j <= half) m.inner = std::max(m.inner, ratio);
        }
        if (detect_explosion && m.full > 2.0 * m.inner) {
            throw NumericalRefusal("ExplodingBound", std::string("the ") + block_name(b) +
                                                         " bound keeps growing with the horizon");
        }
        return m;
    };

    const auto stable = record(Block::stable, +1, &BoundSample::stable,
                               [&](double t) { return std::exp(gap.alpha * t); });
    const auto center_fwd = record(Block::center, +1, &BoundSample::center,
                                   [&](double t) { return std::exp(-gap.gamma * std::abs(t)); });
    const auto center_bwd = record(Block::center, -1, &BoundSample::center,
                                   [&](double t) { return std::exp(-gap.gamma * std::abs(t)); });
    const auto unstable = record(Block::unstable, -1, &BoundSample::unstable,
                                 [&](double t) { return std::exp(-gap.beta * t); });
    report.bounds.k_s = stable.full;
    report.bounds.k_c = std::max(center_fwd.full, center_bwd.full);
    report.bounds.k_u = unstable.full;
    return report;
}

int count_bound_violations(const TrichotomyFrame& frame, const TrichotomyBounds& bounds,
                           const PropagatorSource& cocycle, double horizon, double step, int probes,
                           std::uint64_t seed, double base) {
    std::mt19937_64 rng(seed);
    const int steps = static_cast<int>(std::lround(horizon / step));
    std::uniform_int_distribution<int> pick_t(0, steps);
    std::normal_distribution<double> gauss;
    const auto n = frame.dim();
    const GapParameters& gap = frame.gap;
    int violations = 0;
    for (int i = 0; i < probes; ++i) {
        Vector x(n);
        for (Eigen::Index k = 0; k < n; ++k) x(k) = gauss(rng);
        x.normalize();
        const double t = pick_t(rng) * step;
        const Matrix fwd = cocycle(base, base + t);
        const Matrix bwd = cocycle(base - t, base);
        constexpr double slack = 1.0 + 1e-9;
        // stable, forward time
        if ((fwd * frame.p_s * x).norm() > slack * bounds.k_s * std::exp(-gap.alpha * t)) ++violations;
        // center, both directions
        if ((fwd * frame.p_c * x).norm() > slack * bounds.k_c * std::exp(gap.gamma * t)) ++violations;
        if (frame.center_dim > 0) {
            const Vector back = frame.p_c * bwd.partialPivLu().solve(frame.p_c * x);
            if (back.norm() > slack * bounds.k_c * std::exp(gap.gamma * t)) ++violations;
        }
        // unstable, backward time
        if (frame.e_u.cols() > 0) {
            const Vector back = frame.p_u * bwd.partialPivLu().solve(frame.p_u * x);
            if (back.norm() > slack * bounds.k_u * std::exp(-gap.beta * t)) ++violations;
        }
    }
    return violations;
}

InvarianceDefect invariance_defect(const FrameProvider& frames, const PropagatorSource& cocycle, double t,
                                   double base) {
    const TrichotomyFrame here = frames(base);
    const TrichotomyFrame there = frames(base + t);
    const Matrix u = cocycle(base, base + t);
    const auto n = here.dim();
    const Matrix id = Matrix::Identity(n, n);
    InvarianceDefect d;
    d.stable = spectral_norm((id - there.p_s) * u * here.p_s);
    d.center = spectral_norm((id - there.p_c) * u * here.p_c);
    d.unstable = spectral_norm((id - there.p_u) * u * here.p_u);
    return d;
}

TemperednessSlopes temperedness_diagnostic(const FrameProvider& frames, const PropagatorSource& cocycle,
                                           const std::vector<double>& shifts, double horizon, double step) {
    if (shifts.size() < 2) throw InvalidArgument("temperedness needs at least two shifts");
    std::vector<double> x, ys, yc, yu;
    for (double s : shifts) {
        const BoundReport r = estimate_bounds(frames, cocycle, horizon, step, s, 0.0, false);
        auto log_plus = [](double k) { return k > 1.0 ? std::log(k) : 0.0; };
        x.push_back(std::abs(s));
        ys.push_back(log_plus(r.bounds.k_s));
        yc.push_back(log_plus(r.bounds.k_c));
        yu.push_back(log_plus(r.bounds.k_u));
    }
    auto slope = [&](const std::vector<double>& y) {
        const double m = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        const double den = m * sxx - sx * sx;
        return den == 0.0 ? 0.0 : (m * sxy - sx * sy) / den;
    };
    return TemperednessSlopes{slope(ys), slope(yc), slope(yu)};
}

double unstable_lower_bound(const FrameProvider& frames, const PropagatorSource& cocycle, double rate,
                            double horizon, double step, double base) {
    const TrichotomyFrame f0 = frames(base);
    if (f0.e_u.cols() == 0) throw InvalidArgument("unstable lower bound needs a nonempty unstable block");
    const int steps = static_cast<int>(std::lround(horizon / step));
    const auto orbit = block_orbit(frames, cocycle, Block::unstable, base, step, steps, -1);
    double h = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= steps; ++j) {
        const double t = -j * step;
        h = std::min(h, spectral_norm(orbit[static_cast<std::size_t>(j)] * f0.l_u) * std::exp(-rate * t));
    }
    if (!(h > 1e-12)) {
        throw NumericalRefusal("LowerBoundViolated", "unstable lower bound is indistinguishable from 0");
    }
    return h;
}

nlohmann::json frame_to_json(const TrichotomyFrame& frame, const TemperednessSlopes& slopes) {
    return nlohmann::json{
        {"alpha", frame.gap.alpha},
        {"beta", frame.gap.beta},
        {"gamma", frame.gap.gamma},
        {"center_dim", frame.center_dim},
        {"K_s", frame.bounds.k_s},
        {"K_c", frame.bounds.k_c},
        {"K_u", frame.bounds.k_u},
        {"temperedness_slopes", {{"s", slopes.stable}, {"c", slopes.center}, {"u", slopes.unstable}}}};
}

} // namespace scm
