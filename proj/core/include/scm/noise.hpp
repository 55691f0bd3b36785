#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scm/types.hpp"

namespace scm {

/// Parameters that fully determine a noise path. This is also the
/// serialization format: a JSON object with keys seed, dt, horizon,
/// channels and scales.
struct PathSpec {
    std::uint64_t seed = 0;
    double dt = 1e-2;
    double t_min = -10.0;
    double t_max = 10.0;
    int channels = 1;
    std::vector<double> scales; ///< empty means 1 for every channel
};

void to_json(nlohmann::json& j, const PathSpec& spec);
PathSpec path_spec_from_json(const nlohmann::json& j);

/// Discretized two-sided Wiener path on a fixed time grid.
///
/// Increments are never stored: each one is a pure function of
/// (seed, channel, absolute grid index), so the shift theta_t only moves the
/// origin and the group law holds exactly. Negative and non-negative indices
/// are drawn from two independent streams spliced at t = 0.
///
/// Grid index n refers to the increment W(t_{n+1}) - W(t_n) with t_n = n*dt
/// measured from this path's origin.
class NoisePath {
public:
    static NoisePath make(const PathSpec& spec);
    /// Same grid, every increment exactly zero.
    static NoisePath silent(double dt, double t_min, double t_max, int channels);

    double dt() const { return dt_; }
    int channels() const { return spec_.channels; }
    const PathSpec& spec() const { return spec_; }
    double scale(int channel) const;
    bool is_silent() const { return silent_; }

    /// First valid increment index (relative to the current origin).
    long first_index() const;
    /// One past the last valid increment index.
    long end_index() const;
    double t_min() const { return static_cast<double>(first_index()) * dt_; }
    double t_max() const { return static_cast<double>(end_index()) * dt_; }

    /// Converts a time to a grid index; throws when t is not a grid time.
    long index_of(double t) const;
    bool on_grid(double t) const;

    /// Unscaled increment Delta W_channel over [t_n, t_{n+1}], ~ N(0, dt).
    double increment(int channel, long n) const;

    /// theta_t: W_s -> W_{t+s} - W_t. Requires t on the grid and inside the
    /// stored horizon.
    NoisePath shifted(double t) const;

    /// Path on a grid `factor` times coarser whose increments are sums of the
    /// fine ones (the same Brownian path observed less often).
    NoisePath coarsened(int factor) const;

    friend bool operator==(const NoisePath& a, const NoisePath& b);

private:
    NoisePath() = default;
    double raw_increment(int channel, long absolute_fine_index) const;

    PathSpec spec_;
    double fine_dt_ = 0.0;
    double dt_ = 0.0;
    long fine_first_ = 0; ///< absolute fine index range [fine_first_, fine_end_)
    long fine_end_ = 0;
    long offset_ = 0; ///< absolute fine index of this path's origin
    int factor_ = 1;
    bool silent_ = false;
};

NoisePath make_path(std::uint64_t seed, double dt, double t_min, double t_max, int channels,
                    std::vector<double> scales = {});
NoisePath shift(const NoisePath& path, double t);

/// Samples of a scalar process on a path grid: value i sits at time
/// (first_index + i) * dt relative to the path origin.
struct GridSignal {
    long first_index = 0;
    double dt = 0.0;
    std::vector<double> values;

    double at_index(long n) const;
    double at(double t) const;
    double t_min() const { return static_cast<double>(first_index) * dt; }
    double t_max() const {
        return static_cast<double>(first_index + static_cast<long>(values.size()) - 1) * dt;
    }
    bool covers(double t) const;
    GridSignal scaled(double factor) const;
};

/// Stationary Ornstein-Uhlenbeck process dz = -rate z dt + dW sampled with the
/// exact one-step update driven by the path increments.
struct OUProcess {
    double rate = 1.0;
    int channel = 0;
    GridSignal samples;
};

/// Exact OU recursion factor: the Gaussian innovation of one step equals
/// dW * ou_innovation_factor(rate, dt), with variance (1 - e^{-2 rate dt}) / (2 rate).
double ou_innovation_factor(double rate, double dt);

/// OU process on `channel` of `path`, started at t_min from the stationary law
/// N(0, 1/(2 rate)) unless `initial` is given.
OUProcess ou_sample(const NoisePath& path, int channel, double rate,
                    std::optional<double> initial = std::nullopt);

/// Fast-mode convolution of white noise with e^{-(k^2-1)t}: an OU process with
/// rate k^2 - 1. Requires k >= 2.
OUProcess ou_convolution(const NoisePath& path, int channel, int k);

} // namespace scm
