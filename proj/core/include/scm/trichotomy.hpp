#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scm/cocycle.hpp"
#include "scm/met.hpp"

namespace scm {

/// Rates of the exponential trichotomy: decay alpha on E^s (forward time),
/// growth beta on E^u (backward time), slack gamma on E^c.
/// Ordering used here: alpha > gamma, beta > gamma, gamma >= 0.
struct GapParameters {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.0;

    void validate() const;
};

/// Indices of spectrum groups in each block.
struct Partition {
    std::vector<int> unstable;
    std::vector<int> center;
    std::vector<int> stable;
};

/// unstable: lambda >= alpha; center: |lambda| <= gamma; stable: lambda <= -beta.
/// An exponent in a forbidden band (or on a band edge) is an error.
Partition classify(const std::vector<double>& exponents, const GapParameters& gap);
Partition classify(const LyapunovSpectrum& spectrum, const GapParameters& gap);

enum class Block { stable, center, unstable };

struct TrichotomyBounds {
    double k_s = 0.0;
    double k_c = 0.0;
    double k_u = 0.0;
    double max() const { return std::max(k_s, std::max(k_c, k_u)); }
};

struct TrichotomyFrame {
    Matrix p_s, p_c, p_u;       ///< oblique projections, N x N
    Matrix e_s, e_c, e_u;       ///< column frames of each block
    Matrix l_s, l_c, l_u;       ///< matching rows of [E_u E_c E_s]^{-1}, so P^a = E_a L_a
    GapParameters gap;
    TrichotomyBounds bounds;
    int center_dim = 0;
    double condition_number = 1.0;

    int dim() const { return static_cast<int>(p_s.rows()); }
    const Matrix& projection(Block b) const;
    const Matrix& frame(Block b) const;
    const Matrix& dual(Block b) const;
};

/// Projections along the complementary Oseledets frames. Throws
/// NumericalRefusal("IllConditionedFrame") when cond([E_u E_c E_s]) > max_condition.
TrichotomyFrame build_frame(const OseledetsSplitting& splitting, const Partition& partition,
                            const GapParameters& gap, double max_condition = 1e8);

/// Frame from explicit block bases (used for fixtures with known eigenvectors).
TrichotomyFrame frame_from_bases(const Matrix& e_u, const Matrix& e_c, const Matrix& e_s,
                                 const GapParameters& gap, double max_condition = 1e8);

/// Frame at theta_t omega. Diagonal benchmark cocycles use constant_frames.
using FrameProvider = std::function<TrichotomyFrame(double t)>;
FrameProvider constant_frames(TrichotomyFrame frame);

/// Frames recomputed from shifted Oseledets splittings, cached per grid time.
FrameProvider shifted_frames(PropagatorSource cocycle, LyapunovSpectrum spectrum, Partition partition,
                             GapParameters gap, double t_span, double block_len);

/// Ratio ||U(t, omega) P^a(omega)|| e^{rate |t|} for one grid time.
struct BoundSample {
    double t = 0.0;
    double stable = 0.0;
    double center = 0.0;
    double unstable = 0.0;
};

struct BoundReport {
    TrichotomyBounds bounds;
    double epsilon = 0.0; ///< alpha = -(lambda_- + epsilon)
    std::vector<BoundSample> samples;
};

/// K^s = max_{t >= 0} ||U(t) P^s|| e^{alpha t}; K^u = max_{t <= 0} ||U(t) P^u|| e^{-beta t};
/// K^c = max over both signs of ||U(t) P^c|| e^{-gamma |t|}. Norms are spectral.
/// Times run over a uniform grid of spacing `step` on [-horizon, horizon]; negative
/// times are reached through the inverse cocycle with re-projection onto the
/// block at every step. Throws NumericalRefusal("ExplodingBound") when the
/// maximum over the full grid exceeds twice the maximum over its inner half.
BoundReport estimate_bounds(const FrameProvider& frames, const PropagatorSource& cocycle,
                            double horizon, double step, double base = 0.0,
                            double largest_stable_exponent = 0.0, bool detect_explosion = true);

/// Check ||U(t) P^s x|| <= K^s e^{-alpha t} |x| (and the centre/unstable analogues)
/// at random probes; returns the number of violations.
int count_bound_violations(const TrichotomyFrame& frame, const TrichotomyBounds& bounds,
                           const PropagatorSource& cocycle, double horizon, double step, int probes,
                           std::uint64_t seed, double base = 0.0);

/// ||(I - P^a(theta_t omega)) U(t, omega) P^a(omega)|| for each block.
struct InvarianceDefect {
    double stable = 0.0;
    double center = 0.0;
    double unstable = 0.0;
};
InvarianceDefect invariance_defect(const FrameProvider& frames, const PropagatorSource& cocycle,
                                   double t, double base = 0.0);

struct TemperednessSlopes {
    double stable = 0.0;
    double center = 0.0;
    double unstable = 0.0;
};

/// Least-squares slope of log+ K^a(theta_t omega) against |t| over the shifts.
TemperednessSlopes temperedness_diagnostic(const FrameProvider& frames, const PropagatorSource& cocycle,
                                           const std::vector<double>& shifts, double horizon, double step);

/// H = min_{t <= 0} ||U(t) P^u|| e^{-a t} for the slowest unstable rate a.
double unstable_lower_bound(const FrameProvider& frames, const PropagatorSource& cocycle, double rate,
                            double horizon, double step, double base = 0.0);

nlohmann::json frame_to_json(const TrichotomyFrame& frame, const TemperednessSlopes& slopes);

} // namespace scm
