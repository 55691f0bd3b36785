#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "scm/burgers.hpp"
#include "scm/trichotomy.hpp"

using namespace scm;

namespace {

Matrix diag(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v.asDiagonal();
}

Matrix axis_cols(int n, std::initializer_list<int> idx) {
    Matrix m = Matrix::Zero(n, static_cast<Eigen::Index>(idx.size()));
    Eigen::Index c = 0;
    for (int i : idx) m(i, c++) = 1.0;
    return m;
}

void expect_projection_invariants(const TrichotomyFrame& f, double tol) {
    const auto n = f.dim();
    const Matrix id = Matrix::Identity(n, n);
    EXPECT_LE((f.p_s + f.p_c + f.p_u - id).norm(), tol);
    for (const Matrix* p : {&f.p_s, &f.p_c, &f.p_u}) EXPECT_LE((*p * *p - *p).norm(), tol);
    EXPECT_LE((f.p_s * f.p_c).norm(), tol);
    EXPECT_LE((f.p_c * f.p_u).norm(), tol);
    EXPECT_LE((f.p_s * f.p_u).norm(), tol);
}

TrichotomyFrame burgers_frame(const GapParameters& gap) {
    BurgersConfig b;
    b.n_modes = 4;
    b.dt = 1e-2;
    const auto c = propagator_source(burgers_field(b), make_path(0, 1e-2, -60, 120, 4));
    const LyapunovSpectrum s = lyapunov_spectrum(c, 4, 1.0, 100, 4);
    const OseledetsSplitting w = oseledets_splitting(c, s, 20.0);
    return build_frame(w, classify(s, gap), gap);
}

PropagatorSource example1_cocycle(std::uint64_t seed, double t_min, double t_max) {
    VectorField f = linear_field(burgers_eigenvalues(4).asDiagonal().toDenseMatrix());
    const NoisePath p = make_path(seed, 1e-2, t_min, t_max, 1);
    f.multiplicative = ou_sample(p, 0, 1.0).samples;
    return propagator_source(f, p);
}

} // namespace

TEST(Gap, Validation) {
    EXPECT_NO_THROW((GapParameters{1.0, 2.0, 0.5}.validate()));
    EXPECT_THROW((GapParameters{0.5, 2.0, 0.5}.validate()), InvalidArgument);
    EXPECT_THROW((GapParameters{1.0, 0.0, 0.0}.validate()), InvalidArgument);
    EXPECT_THROW((GapParameters{1.0, 1.0, -0.1}.validate()), InvalidArgument);
}

TEST(Classify, BurgersSpectrum) {
    const Partition p = classify(std::vector<double>{0.0, -3.0, -8.0, -15.0}, GapParameters{1.0, 2.0, 0.5});
    EXPECT_TRUE(p.unstable.empty());
    EXPECT_EQ(p.center, std::vector<int>{0});
    EXPECT_EQ(p.stable, (std::vector<int>{1, 2, 3}));
}

TEST(Classify, ThreeBlocks) {
    const Partition p = classify(std::vector<double>{2.0, 0.0, -1.0}, GapParameters{1.5, 0.5, 0.25});
    EXPECT_EQ(p.unstable, std::vector<int>{0});
    EXPECT_EQ(p.center, std::vector<int>{1});
    EXPECT_EQ(p.stable, std::vector<int>{2});
}

TEST(Classify, BoundaryLogic) {
    const Partition p = classify(std::vector<double>{0.4}, GapParameters{1.0, 1.0, 0.5});
    EXPECT_EQ(p.center, std::vector<int>{0});
    try {
        classify(std::vector<double>{0.4}, GapParameters{1.0, 1.0, 0.3});
        FAIL();
    } catch (const NumericalRefusal& e) {
        EXPECT_EQ(e.kind(), "UnclassifiableExponent");
    }
    EXPECT_THROW(classify(std::vector<double>{-1.0}, GapParameters{1.0, 1.0, 0.3}), NumericalRefusal);
}

TEST(Frame, DiagonalIsCoordinateProjection) {
    const TrichotomyFrame f = burgers_frame(GapParameters{1.0, 2.0, 0.5});
    expect_projection_invariants(f, 1e-10);
    Matrix pc = Matrix::Zero(4, 4);
    pc(0, 0) = 1.0;
    EXPECT_LE((f.p_c - pc).norm(), 1e-10);
    EXPECT_EQ(f.center_dim, 1);
    EXPECT_EQ(f.e_u.cols(), 0);
}

TEST(Frame, TriangularUnstableProjection) {
    Matrix a(2, 2);
    a << 2.0, 1.0, 0.0, -1.0;
    const auto c = constant_cocycle(a);
    const LyapunovSpectrum s = lyapunov_spectrum(c, 2, 1.0, 30, 2);
    const GapParameters gap{1.0, 0.5, 0.25};
    const TrichotomyFrame f = build_frame(oseledets_splitting(c, s, 20.0), classify(s, gap), gap);
    // eigenvectors (1, 0) for 2 and (1, -3) for -1; P^u = e_1 [1, 1/3]
    Matrix pu(2, 2);
    pu << 1.0, 1.0 / 3.0, 0.0, 0.0;
    EXPECT_LE((f.p_u - pu).norm(), 1e-8);
    EXPECT_LE((f.p_u * f.p_u - f.p_u).norm(), 1e-12);
    expect_projection_invariants(f, 1e-10);
}

TEST(Frame, IllConditionedIsRefused) {
    Matrix a(2, 1), b(2, 1);
    a << 1.0, 0.0;
    b << 1.0, 1e-10;
    try {
        frame_from_bases(a, b, Matrix(2, 0), GapParameters{1.0, 1.0, 0.5});
        FAIL();
    } catch (const NumericalRefusal& e) {
        EXPECT_EQ(e.kind(), "IllConditionedFrame");
    }
    EXPECT_THROW(frame_from_bases(a, Matrix(2, 0), Matrix(2, 0), GapParameters{1.0, 1.0, 0.5}), InvalidArgument);
}

TEST(Bounds, StableBoundIsOne) {
    const GapParameters gap{2.0, 2.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), axis_cols(2, {0}), axis_cols(2, {1}), gap);
    const BoundReport r = estimate_bounds(constant_frames(f), constant_cocycle(diag({0.0, -3.0})), 5.0, 0.1, 0.0, -3.0);
    EXPECT_NEAR(r.bounds.k_s, 1.0, 1e-12);
    EXPECT_NEAR(r.bounds.k_c, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.epsilon, 1.0);
    EXPECT_EQ(r.samples.size(), 101u);
}

TEST(Bounds, AlphaBeyondDecayExplodes) {
    const GapParameters gap{3.5, 2.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), axis_cols(2, {0}), axis_cols(2, {1}), gap);
    try {
        estimate_bounds(constant_frames(f), constant_cocycle(diag({0.0, -3.0})), 5.0, 0.1);
        FAIL();
    } catch (const NumericalRefusal& e) {
        EXPECT_EQ(e.kind(), "ExplodingBound");
    }
}

TEST(Bounds, UnstableUsesBackwardTime) {
    const GapParameters gap{1.0, 1.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(axis_cols(2, {0}), axis_cols(2, {1}), Matrix(2, 0), gap);
    const BoundReport r = estimate_bounds(constant_frames(f), constant_cocycle(diag({2.0, 0.0})), 5.0, 0.1);
    EXPECT_NEAR(r.bounds.k_u, 1.0, 1e-12);
}

TEST(Bounds, BurgersHorizonStableAndProbesPass) {
    const GapParameters gap{1.0, 2.0, 0.5};
    BurgersConfig b;
    b.n_modes = 4;
    b.dt = 1e-2;
    const auto c = propagator_source(burgers_field(b), make_path(0, 1e-2, -30, 30, 4));
    const TrichotomyFrame f = burgers_frame(gap);
    const BoundReport r1 = estimate_bounds(constant_frames(f), c, 10.0, 0.1);
    const BoundReport r2 = estimate_bounds(constant_frames(f), c, 20.0, 0.1);
    EXPECT_LE(std::abs(r2.bounds.k_s - r1.bounds.k_s) / r1.bounds.k_s, oracle::horizon_change_tol);
    EXPECT_LE(std::abs(r2.bounds.k_c - r1.bounds.k_c) / r1.bounds.k_c, oracle::horizon_change_tol);
    EXPECT_EQ(count_bound_violations(f, r2.bounds, c, 10.0, 0.1, 200, 7), 0);
}

TEST(Bounds, ProbesDetectUnderestimatedConstants) {
    const GapParameters gap{1.0, 2.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), axis_cols(2, {0}), axis_cols(2, {1}), gap);
    const auto c = constant_cocycle(diag({0.3, -3.0}));
    TrichotomyBounds tiny{1.0, 0.1, 0.0};
    EXPECT_GT(count_bound_violations(f, tiny, c, 5.0, 0.1, 50, 1), 0);
}

TEST(Invariance, DiagonalDefectVanishes) {
    const TrichotomyFrame f = burgers_frame(GapParameters{1.0, 2.0, 0.5});
    BurgersConfig b;
    b.n_modes = 4;
    b.dt = 1e-2;
    const auto c = propagator_source(burgers_field(b), make_path(0, 1e-2, -5, 5, 4));
    const InvarianceDefect d = invariance_defect(constant_frames(f), c, 1.0);
    EXPECT_LE(d.stable, 1e-10);
    EXPECT_LE(d.center, 1e-10);
    EXPECT_EQ(d.unstable, 0.0);
}

TEST(Frames, ShiftedFramesMatchConstantForDiagonal) {
    const GapParameters gap{1.0, 2.0, 0.5};
    const auto c = constant_cocycle(diag({0.0, -3.0, -8.0}));
    const LyapunovSpectrum s = lyapunov_spectrum(c, 3, 1.0, 20, 3);
    const FrameProvider shifted = shifted_frames(c, s, classify(s, gap), gap, 20.0, 1.0);
    const TrichotomyFrame a = shifted(0.0);
    const TrichotomyFrame b = shifted(2.0);
    EXPECT_LE((a.p_c - b.p_c).norm(), 1e-10);
    EXPECT_LE((shifted(2.0).p_s - b.p_s).norm(), 0.0);
}

TEST(Temperedness, ConstantCocycleSlopeZero) {
    const GapParameters gap{1.0, 2.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(2, 0), axis_cols(2, {0}), axis_cols(2, {1}), gap);
    const TemperednessSlopes s = temperedness_diagnostic(constant_frames(f), constant_cocycle(diag({0.0, -3.0})),
                                                         {-5.0, -2.0, 0.0, 3.0, 6.0}, 5.0, 0.1);
    EXPECT_EQ(s.stable, 0.0);
    EXPECT_EQ(s.center, 0.0);
    EXPECT_EQ(s.unstable, 0.0);
}

TEST(Temperedness, Example1SlopeSmall) {
    const GapParameters gap{1.0, 2.0, 0.5};
    const Matrix axes = Matrix::Identity(4, 4);
    const TrichotomyFrame f = frame_from_bases(Matrix(4, 0), axes.leftCols(1), axes.rightCols(3), gap);
    const auto c = example1_cocycle(0, -62, 62);
    std::vector<double> shifts;
    for (int s = -50; s <= 50; ++s) shifts.push_back(s);
    const TemperednessSlopes sl = temperedness_diagnostic(constant_frames(f), c, shifts, 10.0, 0.1);
    EXPECT_LE(std::abs(sl.stable), oracle::tempered_slope_tol);
    EXPECT_LE(std::abs(sl.center), oracle::tempered_slope_tol);
}

TEST(Temperedness, LinearDriftDetected) {
    const GapParameters gap{1.0, 1.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(1, 0), Matrix::Identity(1, 1), Matrix(1, 0), gap);
    // z(t) = t
    const PropagatorSource drift = [](double t0, double t1) {
        return Matrix::Constant(1, 1, std::exp(0.5 * (t1 * t1 - t0 * t0)));
    };
    std::vector<double> shifts;
    for (int s = -20; s <= 20; s += 2) shifts.push_back(s);
    const TemperednessSlopes sl = temperedness_diagnostic(constant_frames(f), drift, shifts, 5.0, 0.1);
    EXPECT_GT(sl.center, 1.0);
}

TEST(LowerBound, DiagonalUnstableBlock) {
    const GapParameters gap{1.0, 1.0, 0.5};
    const TrichotomyFrame one = frame_from_bases(Matrix::Identity(1, 1), Matrix(1, 0), Matrix(1, 0), gap);
    EXPECT_NEAR(unstable_lower_bound(constant_frames(one), constant_cocycle(diag({2.0})), 2.0, 5.0, 0.1), 1.0, 1e-12);
    const TrichotomyFrame two = frame_from_bases(Matrix::Identity(2, 2), Matrix(2, 0), Matrix(2, 0), gap);
    EXPECT_NEAR(unstable_lower_bound(constant_frames(two), constant_cocycle(diag({3.0, 2.0})), 2.0, 5.0, 0.1), 1.0,
                1e-10);
}

TEST(LowerBound, EmptyUnstableBlockIsAnError) {
    const GapParameters gap{1.0, 1.0, 0.5};
    const TrichotomyFrame f = frame_from_bases(Matrix(1, 0), Matrix::Identity(1, 1), Matrix(1, 0), gap);
    EXPECT_THROW(unstable_lower_bound(constant_frames(f), constant_cocycle(diag({0.0})), 1.0, 5.0, 0.1),
                 InvalidArgument);
}

TEST(Frame, JsonExport) {
    const TrichotomyFrame f = burgers_frame(GapParameters{1.0, 2.0, 0.5});
    const nlohmann::json j = frame_to_json(f, TemperednessSlopes{});
    EXPECT_EQ(j.at("center_dim").get<int>(), 1);
    EXPECT_TRUE(j.contains("temperedness_slopes"));
}
