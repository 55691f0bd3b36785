#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scm/burgers.hpp"

using namespace scm;

namespace {

BurgersConfig config(int n, double sigma = 0.0) {
    BurgersConfig b;
    b.n_modes = n;
    b.sigma = sigma;
    return b;
}

Vector first_mode(int n, double a) {
    Vector u = Vector::Zero(n);
    u(0) = a;
    return u;
}

} // namespace

TEST(Galerkin, Eigenvalues) {
    const Vector e = burgers_eigenvalues(6);
    for (int k = 0; k < 6; ++k) EXPECT_EQ(e(k), oracle::burgers_exponents[static_cast<std::size_t>(k)]);
}

TEST(Galerkin, SingleModeFeedsSecondHarmonic) {
    const Vector r = galerkin_rhs(first_mode(4, 0.3), config(4));
    EXPECT_NEAR(r(0), 0.0, 1e-15);
    EXPECT_NEAR(r(1), -0.045, 1e-15);
    EXPECT_EQ(r(2), 0.0);
    EXPECT_EQ(r(3), 0.0);
}

TEST(Galerkin, TwoModeInteraction) {
    Vector u = Vector::Zero(4);
    u << 0.3, -0.2, 0.0, 0.0;
    const Vector r = galerkin_rhs(u, config(4));
    EXPECT_NEAR(r(0), 0.5 * 0.3 * -0.2, 1e-15);
    EXPECT_NEAR(r(1), -3.0 * -0.2 - 0.045, 1e-15);
    // [u u_x]_3 = (3/4) 2 u_1 u_2
    EXPECT_NEAR(r(2), -1.5 * 0.3 * -0.2, 1e-15);
}

TEST(Galerkin, SignFlipsTheQuadraticTerm) {
    BurgersConfig b = config(4);
    b.quadratic_sign = -1.0;
    EXPECT_NEAR(galerkin_rhs(first_mode(4, 0.3), b)(1), 0.045, 1e-15);
}

TEST(Galerkin, EnergyConservation) {
    for (int n : {8, 12, 16}) {
        Vector u(n);
        for (int k = 0; k < n; ++k) u(k) = std::sin(1.3 * k + 0.4) / (k + 1.0);
        EXPECT_LE(std::abs(u.dot(quadratic_term(u))), 1e-15) << "N " << n;
    }
}

TEST(Galerkin, JacobianMatchesDifferences) {
    Vector u(5);
    u << 0.2, -0.1, 0.05, 0.03, -0.01;
    const Matrix j = quadratic_term_jacobian(u);
    for (int c = 0; c < 5; ++c) {
        Vector e = Vector::Zero(5);
        e(c) = 1e-6;
        EXPECT_LE((j.col(c) - (quadratic_term(u + e) - quadratic_term(u - e)) / 2e-6).norm(), 1e-10);
    }
}

TEST(Galerkin, RejectsBadConfig) {
    BurgersConfig b = config(0);
    EXPECT_THROW(b.validate(), InvalidArgument);
    b = config(4);
    b.sigma_k = {1.0};
    EXPECT_THROW(b.validate(), InvalidArgument);
    b = config(4);
    b.dt = 0.0;
    EXPECT_THROW(b.validate(), InvalidArgument);
    EXPECT_THROW(galerkin_rhs(Vector::Zero(3), config(4)), InvalidArgument);
}

TEST(Simulate, ZeroStaysZero) {
    BurgersConfig b = config(6);
    b.horizon = 2.0;
    const ModeTrajectory t = simulate(b, Vector::Zero(6), 100);
    for (const Vector& u : t.u) EXPECT_EQ(u.norm(), 0.0);
}

TEST(Simulate, StrideAndCsv) {
    BurgersConfig b = config(3);
    b.horizon = 1.0;
    const ModeTrajectory t = simulate(b, first_mode(3, 0.1), 100);
    EXPECT_EQ(t.t.size(), 11u);
    EXPECT_NEAR(t.t.back(), 1.0, 1e-12);
    std::ostringstream os;
    write_trajectory_csv(os, t);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,u_1,u_2,u_3");
}

TEST(Simulate, SeedDeterminism) {
    BurgersConfig b = config(4, 0.01);
    b.horizon = 2.0;
    b.seed = 9;
    const ModeTrajectory x = simulate(b, first_mode(4, 0.1), 10);
    const ModeTrajectory y = simulate(b, first_mode(4, 0.1), 10);
    for (std::size_t i = 0; i < x.u.size(); ++i) EXPECT_EQ((x.u[i] - y.u[i]).norm(), 0.0);
}

TEST(Slaving, SettledModesFollowTheExpansion) {
    const SlavingSample s = settle(config(8), 0.1);
    EXPECT_GE(s.t, 5.0 / 3.0);
    const double want2 = oracle::c2 * s.a * s.a;
    const double want3 = oracle::c3 * s.a * s.a * s.a;
    EXPECT_NEAR(s.u2, want2, 0.01 * std::abs(want2));
    EXPECT_NEAR(s.u3, want3, 0.05 * std::abs(want3));
}

TEST(Slaving, CoefficientFit) {
    const ManifoldFit f = fit_manifold_coefficients(config(8), {0.05, 0.1, 0.15, 0.2});
    EXPECT_NEAR(f.c2, oracle::c2, oracle::c2_tol);
    EXPECT_NEAR(f.c3, oracle::c3, oracle::c3_tol);
    EXPECT_NEAR(f.d3, oracle::d3, oracle::drift_rel_tol * std::abs(oracle::d3));
    EXPECT_EQ(f.samples.size(), 4u);
    const nlohmann::json j = manifold_fit_to_json(f);
    EXPECT_TRUE(j.contains("c2"));
}

TEST(Slaving, FitIsRobustInTruncation) {
    const ManifoldFit six = fit_manifold_coefficients(config(6), {0.05, 0.1, 0.15, 0.2});
    const ManifoldFit twelve = fit_manifold_coefficients(config(12), {0.05, 0.1, 0.15, 0.2});
    EXPECT_NEAR(six.c2, twelve.c2, 1e-3);
    EXPECT_NEAR(six.c3, twelve.c3, 1e-3);
}

TEST(Slaving, DegenerateDesignRefused) {
    EXPECT_THROW(fit_manifold_coefficients(config(6), {0.1, 0.1}), InvalidArgument);
    EXPECT_THROW(fit_manifold_coefficients(config(6), {0.0, 0.1}), InvalidArgument);
}

TEST(Reduced, DriftFormula) {
    EXPECT_NEAR(reduced_drift(0.2, 0.0, 0.0, 0.0, 0.0), oracle::d3 * 0.008, 1e-16);
    const double a = 0.3, s = 0.1, p1 = 0.7, p2 = -0.4, p3 = 1.1;
    const double want = -a * a * a / 12.0 + s * p1 + a / 6.0 * s * p2 + a * a * s * (p1 / 18.0 + p3 / 96.0);
    EXPECT_NEAR(reduced_drift(a, s, p1, p2, p3), want, 1e-16);
}

TEST(Reduced, ClosedFormAtSigmaZero) {
    BurgersConfig b = config(3);
    b.horizon = 20.0;
    b.burn_in = 0.0;
    const NoisePath p = NoisePath::silent(b.dt, 0.0, b.horizon, 3);
    for (double a0 : {0.1, 0.3}) {
        const std::vector<double> a = reduced_simulate(b, a0, p);
        double err = 0.0;
        for (std::size_t n = 0; n < a.size(); ++n) {
            err = std::max(err, std::abs(a[n] - reduced_closed_form(a0, static_cast<double>(n) * b.dt)));
        }
        EXPECT_LE(err, oracle::closed_form_tol);
    }
}

TEST(Expansion, DeterministicPart) {
    const ExpansionSnapshot z{Vector::Zero(5), Vector::Zero(5)};
    const Vector u = manifold_expansion(0.2, 0.0, z);
    EXPECT_EQ(u(0), 0.2);
    EXPECT_NEAR(u(1), oracle::c2 * 0.04, 1e-17);
    EXPECT_NEAR(u(2), oracle::c3 * 0.008, 1e-17);
    EXPECT_EQ(u(3), 0.0);
}

TEST(Expansion, ZeroAmplitudeIsPureNoise) {
    Vector lin(4), cross(4);
    lin << 0.0, 0.3, -0.2, 0.1;
    cross << 0.5, 0.4, 0.3, 0.2;
    const Vector u = manifold_expansion(0.0, 0.01, ExpansionSnapshot{lin, cross});
    EXPECT_LE((u - 0.01 * lin).norm(), 1e-18);
}

TEST(Expansion, NestedConvolutionMatchesQuadrature) {
    BurgersConfig b = config(4, 1.0);
    b.dt = 1e-3;
    const NoisePath path = make_path(12, b.dt, -10.0, 2.0, 4);
    const ExpansionProcesses p = expansion_processes(path, b);
    const GridSignal h2_phi1 = ou_sample(path, 0, 3.0).samples;
    // H_2 H_3 phi_3 = int (e^{-3 tau} - e^{-8 tau}) / 5 dW_3
    for (long n : {0L, 700L, 2000L}) {
        double oracle_value = 0.0;
        for (long m = path.first_index(); m < n; ++m) {
            const double tau = (n - m - 0.5) * b.dt;
            oracle_value += (std::exp(-3.0 * tau) - std::exp(-8.0 * tau)) / 5.0 * path.increment(2, m);
        }
        const double nested = p.cross[2].at_index(n) - h2_phi1.at_index(n) / 3.0;
        EXPECT_NEAR(nested, oracle_value, 2e-3) << "index " << n;
    }
}

TEST(Expansion, FirstModeCorrection) {
    BurgersConfig b = config(4, 1.0);
    const NoisePath path = make_path(13, b.dt, -10.0, 1.0, 4);
    const ExpansionProcesses p = expansion_processes(path, b);
    const ExpansionSnapshot s = snapshot(p, 500);
    EXPECT_DOUBLE_EQ(s.cross(0), -s.linear(1) / 6.0);
    EXPECT_EQ(s.linear(0), 0.0);
    EXPECT_THROW(expansion_processes(make_path(13, b.dt, -1.0, 1.0, 2), b), InvalidArgument);
}

TEST(Comparison, DeterministicAgreement) {
    BurgersConfig b = config(8);
    b.horizon = 20.0;
    EXPECT_LE(compare_seed(b, 0.2).sup, 2e-4);
    EXPECT_EQ(compare_seed(b, 0.0).sup, 0.0);
}

TEST(Comparison, ThreadCountDoesNotChangeResults) {
    BurgersConfig b = config(6, 1e-3);
    b.horizon = 5.0;
    const ComparisonReport one = compare_full_vs_reduced(b, 0.1, {1, 2, 3}, 1);
    const ComparisonReport two = compare_full_vs_reduced(b, 0.1, {1, 2, 3}, 2);
    EXPECT_EQ(one.rms, two.rms);
    EXPECT_EQ(one.sup, two.sup);
    EXPECT_EQ(comparison_to_json(one).dump(), comparison_to_json(two).dump());
    EXPECT_THROW(compare_full_vs_reduced(b, 0.1, {}, 1), InvalidArgument);
}

TEST(Comparison, SigmaScalingSlope) {
    BurgersConfig b = config(6, 1e-3);
    b.horizon = 10.0;
    const SigmaScaling s = sigma_scaling(b, 0.0, {1e-3, 2e-3, 4e-3}, {1, 2}, 1);
    EXPECT_GE(s.slope, oracle::slope_lo);
    EXPECT_LE(s.slope, oracle::slope_hi);
}
