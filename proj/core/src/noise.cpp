#include "scm/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

namespace scm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based standard normal keyed by (seed, channel, stream, counter).
double keyed_normal(std::uint64_t seed, int channel, std::uint64_t stream, std::uint64_t counter) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(channel) * 0xd6e8feb86659fd93ULL));
    h = splitmix64(h ^ (stream * 0xa0761d6478bd642fULL));
    h = splitmix64(h ^ counter);
    const std::uint64_t a = splitmix64(h ^ 0x1ULL);
    const std::uint64_t b = splitmix64(h ^ 0x2ULL);
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;         // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

constexpr std::uint64_t kForwardStream = 0;
constexpr std::uint64_t kBackwardStream = 1;
constexpr std::uint64_t kInitialStream = 2;

long floor_div(long a, long b) {
    long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

long ceil_div(long a, long b) { return -floor_div(-a, b); }

long grid_round(double t, double dt) {
    const double x = t / dt;
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-6) {
        throw InvalidArgument("time " + std::to_string(t) + " is not a multiple of dt = " +
                              std::to_string(dt));
    }
    return static_cast<long>(r);
}

} // namespace

void to_json(nlohmann::json& j, const PathSpec& spec) {
    j = nlohmann::json{{"seed", spec.seed},
                       {"dt", spec.dt},
                       {"horizon", {spec.t_min, spec.t_max}},
                       {"channels", spec.channels},
                       {"scales", spec.scales}};
}

PathSpec path_spec_from_json(const nlohmann::json& j) {
    PathSpec spec;
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.dt = j.at("dt").get<double>();
    const auto& horizon = j.at("horizon");
    spec.t_min = horizon.at(0).get<double>();
    spec.t_max = horizon.at(1).get<double>();
    spec.channels = j.at("channels").get<int>();
    if (j.contains("scales")) spec.scales = j.at("scales").get<std::vector<double>>();
    return spec;
}

NoisePath NoisePath::make(const PathSpec& spec) {
    if (!(spec.dt > 0.0) || !std::isfinite(spec.dt)) {
        throw InvalidArgument("noise path needs dt > 0");
    }
    if (!(spec.t_min <= 0.0 && 0.0 <= spec.t_max)) {
        throw InvalidArgument("noise path horizon must contain t = 0");
    }
    if (spec.channels < 1) throw InvalidArgument("noise path needs at least one channel");
    if (!spec.scales.empty() && static_cast<int>(spec.scales.size()) != spec.channels) {
        throw InvalidArgument("scales must list one amplitude per channel");
    }
    for (double s : spec.scales) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw InvalidArgument("channel scales must be finite and nonnegative");
        }
    }
    NoisePath p;
    p.spec_ = spec;
    p.fine_dt_ = spec.dt;
    p.dt_ = spec.dt;
    p.fine_first_ = static_cast<long>(std::floor(spec.t_min / spec.dt + 1e-9));
    p.fine_end_ = static_cast<long>(std::ceil(spec.t_max / spec.dt - 1e-9));
    return p;
}

NoisePath NoisePath::silent(double dt, double t_min, double t_max, int channels) {
    PathSpec spec;
    spec.dt = dt;
    spec.t_min = t_min;
    spec.t_max = t_max;
    spec.channels = channels;
    NoisePath p = make(spec);
    p.silent_ = true;
    return p;
}

double NoisePath::scale(int channel) const {
    if (channel < 0 || channel >= spec_.channels) throw InvalidArgument("channel out of range");
    return spec_.scales.empty() ? 1.0 : spec_.scales[static_cast<std::size_t>(channel)];
}

long NoisePath::first_index() const { return ceil_div(fine_first_ - offset_, factor_); }

long NoisePath::end_index() const { return floor_div(fine_end_ - offset_, factor_); }

long NoisePath::index_of(double t) const { return grid_round(t, dt_); }

bool NoisePath::on_grid(double t) const {
    const double x = t / dt_;
    return std::abs(x - std::round(x)) <= 1e-6;
}

double NoisePath::raw_increment(int channel, long absolute) const {
    const std::uint64_t stream = absolute >= 0 ? kForwardStream : kBackwardStream;
    const std::uint64_t counter =
        absolute >= 0 ? static_cast<std::uint64_t>(absolute) : static_cast<std::uint64_t>(-absolute - 1);
    return std::sqrt(fine_dt_) * keyed_normal(spec_.seed, channel, stream, counter);
}

double NoisePath::increment(int channel, long n) const {
    if (channel < 0 || channel >= spec_.channels) throw InvalidArgument("channel out of range");
    if (n < first_index() || n >= end_index()) {
        throw InvalidArgument("noise path horizon exhausted at index " + std::to_string(n));
    }
    if (silent_) return 0.0;
    const long base = offset_ + n * factor_;
    double sum = 0.0;
    for (int j = 0; j < factor_; ++j) sum += raw_increment(channel, base + j);
    return sum;
}

NoisePath NoisePath::shifted(double t) const {
    const long m = index_of(t);
    if (m < first_index() || m > end_index()) {
        throw InvalidArgument("shift by " + std::to_string(t) + " leaves the stored horizon");
    }
    NoisePath p = *this;
    p.offset_ += m * factor_;
    return p;
}

NoisePath NoisePath::coarsened(int factor) const {
    if (factor < 1) throw InvalidArgument("coarsening factor must be >= 1");
    NoisePath p = *this;
    p.factor_ *= factor;
    p.dt_ *= factor;
    return p;
}

bool operator==(const NoisePath& a, const NoisePath& b) {
    return a.spec_.seed == b.spec_.seed && a.spec_.dt == b.spec_.dt &&
           a.spec_.channels == b.spec_.channels && a.spec_.scales == b.spec_.scales &&
           a.fine_first_ == b.fine_first_ && a.fine_end_ == b.fine_end_ && a.offset_ == b.offset_ &&
           a.factor_ == b.factor_ && a.silent_ == b.silent_;
}

NoisePath make_path(std::uint64_t seed, double dt, double t_min, double t_max, int channels,
                    std::vector<double> scales) {
    return NoisePath::make(PathSpec{seed, dt, t_min, t_max, channels, std::move(scales)});
}

NoisePath shift(const NoisePath& path, double t) { return path.shifted(t); }

double GridSignal::at_index(long n) const {
    const long i = n - first_index;
    if (i < 0 || i >= static_cast<long>(values.size())) {
        throw InvalidArgument("signal queried outside its grid at index " + std::to_string(n));
    }
    return values[static_cast<std::size_t>(i)];
}

double GridSignal::at(double t) const { return at_index(grid_round(t, dt)); }

bool GridSignal::covers(double t) const {
    const double x = t / dt;
    const long n = static_cast<long>(std::round(x));
    return std::abs(x - static_cast<double>(n)) <= 1e-6 && n >= first_index &&
           n - first_index < static_cast<long>(values.size());
}

GridSignal GridSignal::scaled(double factor) const {
    GridSignal s = *this;
    for (double& v : s.values) v *= factor;
    return s;
}

double ou_innovation_factor(double rate, double dt) {
    const double x = 2.0 * rate * dt;
    if (std::abs(x) < 1e-12) return 1.0;
    // sqrt((1 - e^{-x}) / x), written with expm1 for accuracy at small x
    return std::sqrt(-std::expm1(-x) / x);
}

OUProcess ou_sample(const NoisePath& path, int channel, double rate, std::optional<double> initial) {
    if (!(rate > 0.0)) throw InvalidArgument("OU rate must be positive");
    if (channel < 0 || channel >= path.channels()) throw InvalidArgument("channel out of range");
    OUProcess ou;
    ou.rate = rate;
    ou.channel = channel;
    const long first = path.first_index();
    const long end = path.end_index();
    ou.samples.first_index = first;
    ou.samples.dt = path.dt();
    ou.samples.values.resize(static_cast<std::size_t>(end - first + 1));

    double z = 0.0;
    if (initial) {
        z = *initial;
    } else {
        const auto counter = static_cast<std::uint64_t>(first - std::numeric_limits<long>::min());
        z = keyed_normal(path.spec().seed, channel, kInitialStream, counter) / std::sqrt(2.0 * rate);
    }
    const double decay = std::exp(-rate * path.dt());
    const double innovation = ou_innovation_factor(rate, path.dt());
    ou.samples.values[0] = z;
    for (long n = first; n < end; ++n) {
        z = decay * z + innovation * path.increment(channel, n);
        ou.samples.values[static_cast<std::size_t>(n - first + 1)] = z;
    }
    return ou;
}

OUProcess ou_convolution(const NoisePath& path, int channel, int k) {
    if (k <= 1) throw InvalidArgument("fast-mode convolution needs k >= 2");
    return ou_sample(path, channel, static_cast<double>(k * k - 1));
}

} // namespace scm
