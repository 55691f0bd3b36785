#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scm/burgers.hpp"
#include "scm/met.hpp"

using namespace scm;

namespace {

Matrix diag(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v.asDiagonal();
}

PropagatorSource burgers_cocycle(int n, double sigma = 0.0) {
    BurgersConfig b;
    b.n_modes = n;
    b.sigma = sigma;
    b.dt = 1e-3;
    return propagator_source(burgers_field(b), make_path(1, 1e-3, -40, 110, n));
}

Matrix rotation(double angle) {
    Matrix r(2, 2);
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

} // namespace

TEST(Spectrum, ConstantDiagonalExact) {
    const LyapunovSpectrum s = lyapunov_spectrum(constant_cocycle(diag({2.0, -1.0})), 2, 1.0, 10, 2);
    ASSERT_EQ(s.exponents.size(), 2u);
    EXPECT_NEAR(s.exponents[0], 2.0, 1e-12);
    EXPECT_NEAR(s.exponents[1], -1.0, 1e-12);
    EXPECT_EQ(s.dimension(), 2);
}

TEST(Spectrum, LinearizedBurgers) {
    const LyapunovSpectrum s = lyapunov_spectrum(burgers_cocycle(6), 6, 1.0, 60, 4);
    ASSERT_EQ(s.exponents.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(s.exponents[i], oracle::burgers_exponents[i], oracle::spectrum_tol);
}

TEST(Spectrum, ScalarRandomCocycleMatchesTimeAverage) {
    const NoisePath p = make_path(3, 1e-2, 0, 201, 1);
    VectorField f = diagonal_field((Vector(2) << 0.0, -1.0).finished());
    f.multiplicative = ou_sample(p, 0, 1.0).samples;
    const LyapunovSpectrum s = lyapunov_spectrum(propagator_source(f, p), 2, 1.0, 200, 2);
    double avg = 0.0;
    for (long n = 0; n < 20000; ++n) avg += 0.5 * 1e-2 * (f.multiplicative->at_index(n) + f.multiplicative->at_index(n + 1));
    avg /= 200.0;
    ASSERT_EQ(s.exponents.size(), 2u);
    EXPECT_NEAR(s.exponents[0], avg, 1e-9 + 3.0 * s.spread[0]);
    EXPECT_NEAR(s.exponents[1], avg - 1.0, 1e-9 + 3.0 * s.spread[1]);
}

TEST(Spectrum, GroupsEqualExponents) {
    const LyapunovSpectrum s = lyapunov_spectrum(constant_cocycle(diag({1.0, 1.0, -2.0})), 3, 1.0, 10, 3);
    ASSERT_EQ(s.exponents.size(), 2u);
    EXPECT_EQ(s.multiplicities[0], 2);
    EXPECT_EQ(s.expanded().size(), 3u);
}

TEST(Spectrum, InvariantUnderOrthogonalChangeOfBasis) {
    Matrix a(2, 2);
    a << 0.5, 1.0, 0.0, -1.5;
    const Matrix q = rotation(0.7);
    SpectrumOptions o;
    o.burn_in = 15;
    const LyapunovSpectrum s1 = lyapunov_spectrum(constant_cocycle(a), 2, 1.0, 40, 2, o);
    const LyapunovSpectrum s2 = lyapunov_spectrum(constant_cocycle(q * a * q.transpose()), 2, 1.0, 40, 2, o);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s1.exponents[i], s2.exponents[i], 1e-8);
}

TEST(Spectrum, OnBlockCallbackAndJson) {
    int calls = 0;
    SpectrumOptions o;
    o.on_block = [&](int, const std::vector<double>& est) {
        ++calls;
        EXPECT_EQ(est.size(), 2u);
    };
    const LyapunovSpectrum s = lyapunov_spectrum(constant_cocycle(diag({0.0, -1.0})), 2, 0.5, 8, 2, o);
    EXPECT_EQ(calls, 8);
    const nlohmann::json j = spectrum_to_json(s);
    for (const char* key : {"exponents", "multiplicities", "spread", "block_len", "blocks", "seed"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
}

TEST(Spectrum, RejectsBadArguments) {
    const auto c = constant_cocycle(diag({0.0, -1.0}));
    EXPECT_THROW(lyapunov_spectrum(c, 2, 0.0, 5, 2), InvalidArgument);
    EXPECT_THROW(lyapunov_spectrum(c, 2, 1.0, 0, 2), InvalidArgument);
    EXPECT_THROW(lyapunov_spectrum(c, 2, 1.0, 5, 3), InvalidArgument);
}

TEST(Spectrum, RankCollapseIsRefused) {
    const PropagatorSource singular = [](double, double) { return Matrix(diag({1.0, 0.0})); };
    try {
        lyapunov_spectrum(singular, 2, 1.0, 3, 2);
        FAIL();
    } catch (const NumericalRefusal& e) {
        EXPECT_EQ(e.kind(), "RankCollapse");
    }
}

TEST(SingularLimit, OrthogonalGivesIdentity) {
    const PropagatorSource rot = [](double t0, double t1) { return rotation(t1 - t0); };
    EXPECT_TRUE(singular_limit(rot, 3.0).isIdentity(1e-12));
}

TEST(SingularLimit, ConstantDiagonal) {
    for (double t : {0.5, 2.0, 7.0}) {
        const Matrix m = singular_limit(constant_cocycle(diag({2.0, -1.0})), t);
        EXPECT_NEAR(m(0, 0), std::exp(2.0), 1e-10);
        EXPECT_NEAR(m(1, 1), std::exp(-1.0), 1e-12);
    }
}

TEST(SingularLimit, BurgersApproachesSpectrum) {
    const auto c = burgers_cocycle(4);
    double previous = 1e300;
    for (double t : {10.0, 20.0, 40.0}) {
        const Eigen::SelfAdjointEigenSolver<Matrix> es(singular_limit(c, t));
        Vector logs = es.eigenvalues().array().log();
        std::sort(logs.data(), logs.data() + logs.size(), std::greater<>());
        double err = 0.0;
        for (int i = 0; i < 4; ++i) err = std::max(err, std::abs(logs(i) - oracle::burgers_exponents[static_cast<std::size_t>(i)]));
        EXPECT_LE(err, previous + 1e-12);
        previous = err;
    }
    EXPECT_LT(previous, 1e-6);
}

TEST(Splitting, ConstantDiagonalGivesAxes) {
    const auto c = constant_cocycle(diag({1.0, 0.0, -2.0}));
    const LyapunovSpectrum s = lyapunov_spectrum(c, 3, 1.0, 20, 3);
    const OseledetsSplitting w = oseledets_splitting(c, s, 20.0);
    for (int i = 0; i < 3; ++i) {
        Matrix axis = Matrix::Zero(3, 1);
        axis(i, 0) = 1.0;
        EXPECT_LT(principal_angle(w.subspaces[static_cast<std::size_t>(i)], axis), oracle::met_angle_tol);
    }
}

TEST(Splitting, TriangularEigendirections) {
    Matrix a(2, 2);
    a << 1.0, 1.0, 0.0, -1.0;
    const auto c = constant_cocycle(a);
    const LyapunovSpectrum s = lyapunov_spectrum(c, 2, 1.0, 30, 2);
    const OseledetsSplitting w = oseledets_splitting(c, s, 20.0);
    Matrix e1(2, 1), e2(2, 1);
    e1 << 1.0, 0.0;
    e2 << -0.5, 1.0;
    EXPECT_LT(principal_angle(w.subspaces[0], e1), oracle::met_angle_tol);
    EXPECT_LT(principal_angle(w.subspaces[1], e2), oracle::met_angle_tol);
}

TEST(Splitting, BurgersAlignedWithSineAxes) {
    const auto c = burgers_cocycle(4);
    const LyapunovSpectrum s = lyapunov_spectrum(c, 4, 1.0, 50, 4);
    const OseledetsSplitting w = oseledets_splitting(c, s, 20.0);
    for (int i = 0; i < 4; ++i) {
        Matrix axis = Matrix::Zero(4, 1);
        axis(i, 0) = 1.0;
        EXPECT_LT(principal_angle(w.subspaces[static_cast<std::size_t>(i)], axis), 1e-3);
    }
}

TEST(Splitting, EquivarianceUnderTheCocycle) {
    const NoisePath p = make_path(17, 1e-2, -40, 80, 1);
    Matrix a(3, 3);
    a << 0.0, 1.0, 0.0, 0.0, -2.0, 0.5, 0.0, 0.0, -5.0;
    VectorField f = linear_field(a);
    f.multiplicative = ou_sample(p, 0, 1.0).samples.scaled(0.5);
    const auto c = propagator_source(f, p);
    const LyapunovSpectrum s = lyapunov_spectrum(c, 3, 1.0, 60, 3);
    SplittingOptions o;
    const OseledetsSplitting here = oseledets_splitting(c, s, 20.0, o);
    o.base = 1.0;
    const OseledetsSplitting next = oseledets_splitting(c, s, 20.0, o);
    EXPECT_LE(equivariance_residual(c, here, next), 1e-3);
}

TEST(Splitting, GrowthLawOnSubspaces) {
    Matrix a(2, 2);
    a << 0.5, 2.0, 0.0, -1.0;
    const auto c = constant_cocycle(a);
    const LyapunovSpectrum s = lyapunov_spectrum(c, 2, 1.0, 30, 2);
    const OseledetsSplitting w = oseledets_splitting(c, s, 20.0);
    for (std::size_t i = 0; i < 2; ++i) {
        const Vector v = w.subspaces[i].col(0);
        for (double t : {5.0, 10.0, 20.0}) {
            const double fwd = std::log((c(0.0, t) * v).norm()) / t;
            const double bwd = std::log((c(0.0, t).partialPivLu().solve(v)).norm()) / (-t);
            EXPECT_NEAR(fwd, s.exponents[i], s.spread[i] + 2.0 / t * std::log(10.0));
            EXPECT_NEAR(bwd, s.exponents[i], s.spread[i] + 2.0 / t * std::log(10.0));
        }
    }
}

TEST(Splitting, RefusesUnseparatedGroups) {
    LyapunovSpectrum s;
    s.exponents = {0.0, -0.05};
    s.multiplicities = {1, 1};
    s.spread = {0.1, 0.1};
    EXPECT_THROW(oseledets_splitting(constant_cocycle(diag({0.0, -0.05})), s, 10.0), NumericalRefusal);
}

TEST(Splitting, RequiresFullSpectrum) {
    const auto c = constant_cocycle(diag({0.0, -1.0, -3.0}));
    const LyapunovSpectrum s = lyapunov_spectrum(c, 3, 1.0, 10, 2);
    EXPECT_THROW(oseledets_splitting(c, s, 10.0), InvalidArgument);
}

TEST(Subspaces, IntersectionAndAngles) {
    Matrix a(3, 2), b(3, 2);
    a << 1, 0, 0, 1, 0, 0;
    b << 1, 0, 0, 0, 0, 1;
    auto [basis, cosine] = subspace_intersection(a, b, 1);
    EXPECT_NEAR(std::abs(basis(0, 0)), 1.0, 1e-12);
    EXPECT_NEAR(cosine, 1.0, 1e-12);
    Matrix x(2, 1), y(2, 1);
    x << 1, 0;
    y << 1, 1;
    EXPECT_NEAR(principal_angle(x, y), std::acos(1.0 / std::sqrt(2.0)), 1e-12);
    const Matrix q = orthonormal_basis(b);
    EXPECT_TRUE((q.transpose() * q).isIdentity(1e-12));
}
