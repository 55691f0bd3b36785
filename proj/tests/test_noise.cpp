#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scm/noise.hpp"

using namespace scm;

namespace {

double sample_variance(const std::vector<double>& v) {
    double s = 0.0, ss = 0.0;
    for (double x : v) {
        s += x;
        ss += x * x;
    }
    const double n = static_cast<double>(v.size());
    return ss / n - (s / n) * (s / n);
}

double autocorrelation(const std::vector<double>& v, std::size_t lag) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        den += (v[i] - mean) * (v[i] - mean);
        if (i + lag < v.size()) num += (v[i] - mean) * (v[i + lag] - mean);
    }
    return num / den;
}

} // namespace

TEST(NoisePath, SameSeedSameIncrements) {
    const NoisePath a = make_path(42, 0.01, -2, 2, 3);
    const NoisePath b = make_path(42, 0.01, -2, 2, 3);
    for (int c = 0; c < 3; ++c) {
        for (long n = a.first_index(); n < a.end_index(); ++n) EXPECT_EQ(a.increment(c, n), b.increment(c, n));
    }
}

TEST(NoisePath, DifferentSeedsDiffer) {
    const NoisePath a = make_path(1, 0.01, 0, 1, 1);
    const NoisePath b = make_path(2, 0.01, 0, 1, 1);
    int equal = 0;
    for (long n = 0; n < 100; ++n) equal += a.increment(0, n) == b.increment(0, n);
    EXPECT_EQ(equal, 0);
}

TEST(NoisePath, IncrementVarianceIsDt) {
    const NoisePath p = make_path(3, 0.01, 0, 1000, 1);
    std::vector<double> inc;
    for (long n = 0; n < p.end_index(); ++n) inc.push_back(p.increment(0, n));
    EXPECT_NEAR(sample_variance(inc) / 0.01, 1.0, 0.03);
}

TEST(NoisePath, ShiftGroupLawRandomPairs) {
    const NoisePath p = make_path(9, 0.01, -20, 20, 2);
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> pick(-500, 500);
    for (int trial = 0; trial < 50; ++trial) {
        const double t1 = pick(gen) * 0.01;
        const double t2 = pick(gen) * 0.01;
        const NoisePath ab = shift(shift(p, t1), t2);
        const NoisePath direct = shift(p, t1 + t2);
        EXPECT_TRUE(ab == direct);
        for (long n = -10; n < 10; ++n) EXPECT_EQ(ab.increment(1, n), direct.increment(1, n));
    }
}

TEST(NoisePath, ShiftMovesOrigin) {
    const NoisePath p = make_path(4, 0.1, -5, 5, 1);
    const NoisePath q = shift(p, 1.0);
    for (long n = -20; n < 20; ++n) EXPECT_EQ(q.increment(0, n), p.increment(0, n + 10));
    EXPECT_DOUBLE_EQ(q.t_min(), p.t_min() - 1.0);
}

TEST(NoisePath, TwoSidedStreamsIndependent) {
    const NoisePath p = make_path(6, 0.01, -1, 1, 1);
    EXPECT_NE(p.increment(0, -1), p.increment(0, 0));
}

TEST(NoisePath, CoarsenedSumsFineIncrements) {
    const NoisePath p = make_path(8, 0.01, -1, 1, 1);
    const NoisePath c = p.coarsened(4);
    EXPECT_DOUBLE_EQ(c.dt(), 0.04);
    for (long n = c.first_index(); n < c.end_index(); ++n) {
        double sum = 0.0;
        for (int j = 0; j < 4; ++j) sum += p.increment(0, 4 * n + j);
        EXPECT_NEAR(c.increment(0, n), sum, 1e-15);
    }
}

TEST(NoisePath, SilentIsZero) {
    const NoisePath p = NoisePath::silent(0.1, -1, 1, 2);
    for (long n = p.first_index(); n < p.end_index(); ++n) EXPECT_EQ(p.increment(1, n), 0.0);
}

TEST(NoisePath, RejectsBadSpecs) {
    EXPECT_THROW(make_path(0, 0.0, -1, 1, 1), InvalidArgument);
    EXPECT_THROW(make_path(0, 0.1, 1, 2, 1), InvalidArgument);
    EXPECT_THROW(make_path(0, 0.1, -1, 1, 0), InvalidArgument);
    EXPECT_THROW(make_path(0, 0.1, -1, 1, 2, {1.0}), InvalidArgument);
    const NoisePath p = make_path(0, 0.1, -1, 1, 1);
    EXPECT_THROW(p.increment(0, 10), InvalidArgument);
    EXPECT_THROW(p.increment(1, 0), InvalidArgument);
    EXPECT_THROW(p.shifted(0.05), InvalidArgument);
    EXPECT_THROW(p.shifted(5.0), InvalidArgument);
}

TEST(NoisePath, SpecJsonRoundTrip) {
    const PathSpec spec{17, 0.005, -3, 4, 2, {1.0, 0.5}};
    nlohmann::json j = spec;
    const PathSpec back = path_spec_from_json(j);
    EXPECT_TRUE(NoisePath::make(spec) == NoisePath::make(back));
    EXPECT_EQ(j.at("seed").get<int>(), 17);
}

TEST(OU, NoiselessDecay) {
    const NoisePath p = NoisePath::silent(0.01, 0, 5, 1);
    const OUProcess ou = ou_sample(p, 0, 1.0, 1.0);
    for (long n = 0; n <= p.end_index(); n += 50) {
        EXPECT_NEAR(ou.samples.at_index(n), std::exp(-n * 0.01), 1e-12);
    }
}

TEST(OU, StationaryVariance) {
    const NoisePath p = make_path(21, 0.05, 0, 20000, 1);
    const OUProcess ou = ou_sample(p, 0, 1.0);
    EXPECT_NEAR(sample_variance(ou.samples.values), oracle::ou_variance_rate1, 0.05 * oracle::ou_variance_rate1);
}

TEST(OU, AutocorrelationMatchesExponential) {
    const NoisePath p = make_path(22, 0.05, 0, 20000, 1);
    const OUProcess ou = ou_sample(p, 0, 1.0);
    for (double tau : {0.5, 1.0, 2.0}) {
        const auto lag = static_cast<std::size_t>(std::lround(tau / 0.05));
        EXPECT_NEAR(autocorrelation(ou.samples.values, lag), std::exp(-tau), 0.05) << "tau " << tau;
    }
}

TEST(OU, KolmogorovSmirnovAgainstStationaryLaw) {
    // samples 3 time units apart are nearly independent (correlation e^{-3})
    const NoisePath p = make_path(23, 0.5, 0, 36000, 1);
    const OUProcess ou = ou_sample(p, 0, 1.0);
    std::vector<double> xs;
    for (std::size_t i = 0; i < ou.samples.values.size(); i += 6) xs.push_back(ou.samples.values[i]);
    ASSERT_GE(xs.size(), 10000u);
    std::sort(xs.begin(), xs.end());
    const double sd = std::sqrt(0.5);
    double d = 0.0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = 0.5 * std::erfc(-xs[i] / (sd * std::sqrt(2.0)));
        d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(OU, InnovationFactorLimits) {
    EXPECT_DOUBLE_EQ(ou_innovation_factor(1.0, 0.0), 1.0);
    const double f = ou_innovation_factor(3.0, 0.1);
    EXPECT_NEAR(f * f * 0.1, (1.0 - std::exp(-0.6)) / 6.0, 1e-15);
}

TEST(OU, RejectsNonPositiveRate) {
    const NoisePath p = make_path(1, 0.1, 0, 1, 1);
    EXPECT_THROW(ou_sample(p, 0, 0.0), InvalidArgument);
    EXPECT_THROW(ou_sample(p, 0, -1.0), InvalidArgument);
}

TEST(OUConvolution, EqualsOUWithRateKSquaredMinusOne) {
    const NoisePath p = make_path(31, 0.01, -5, 5, 3);
    const OUProcess h = ou_convolution(p, 1, 2);
    const OUProcess z = ou_sample(p, 1, 3.0);
    ASSERT_EQ(h.samples.values.size(), z.samples.values.size());
    for (std::size_t i = 0; i < h.samples.values.size(); ++i) EXPECT_EQ(h.samples.values[i], z.samples.values[i]);
}

TEST(OUConvolution, ZeroDrivingStaysZero) {
    const NoisePath p = NoisePath::silent(0.01, 0, 5, 3);
    OUProcess h = ou_convolution(p, 2, 3);
    const OUProcess z = ou_sample(p, 2, 8.0, 0.0);
    for (double v : z.samples.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(h.rate, 8.0);
}

TEST(OUConvolution, StationaryVarianceK2) {
    const NoisePath p = make_path(32, 0.02, 0, 20000, 1);
    const OUProcess h = ou_convolution(p, 0, 2);
    EXPECT_NEAR(sample_variance(h.samples.values), oracle::ou_variance_k2, 0.05 * oracle::ou_variance_k2);
}

TEST(OUConvolution, RejectsLowModes) {
    const NoisePath p = make_path(1, 0.1, 0, 1, 1);
    EXPECT_THROW(ou_convolution(p, 0, 1), InvalidArgument);
}

TEST(GridSignal, LookupAndCoverage) {
    GridSignal s{-2, 0.5, {1, 2, 3, 4}};
    EXPECT_EQ(s.at(-1.0), 1.0);
    EXPECT_EQ(s.at(0.5), 4.0);
    EXPECT_TRUE(s.covers(0.0));
    EXPECT_FALSE(s.covers(1.0));
    EXPECT_FALSE(s.covers(0.25));
    EXPECT_THROW(s.at(1.0), InvalidArgument);
    EXPECT_EQ(s.scaled(2.0).at(0.0), 6.0);
}
