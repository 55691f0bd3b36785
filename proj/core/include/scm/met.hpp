#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scm/cocycle.hpp"
#include "scm/types.hpp"

namespace scm {

/// Lyapunov exponents grouped by multiplicity.
struct LyapunovSpectrum {
    std::vector<double> exponents;      ///< distinct group values, strictly decreasing
    std::vector<int> multiplicities;    ///< d_i per group
    std::vector<double> spread;         ///< per group: batch-means standard error
    std::vector<double> per_direction;  ///< ungrouped estimates, one per frame column
    std::vector<double> direction_spread;
    double grouping_tolerance = 0.0;
    double block_len = 0.0;
    int blocks = 0;
    int burn_in = 0;
    std::uint64_t seed = 0;

    int dimension() const;
    /// Exponent of frame column i expanded by multiplicity.
    std::vector<double> expanded() const;
};

nlohmann::json spectrum_to_json(const LyapunovSpectrum& s);

struct SpectrumOptions {
    int burn_in = 0;    ///< leading blocks discarded before averaging
    int batches = 5;    ///< batch means used for the spread estimate
    double base = 0.0;  ///< evaluate at theta_base omega
    double min_group_tolerance = 0.02;
    /// Optional per-block callback (block index, running estimates) for
    /// convergence output.
    std::function<void(int, const std::vector<double>&)> on_block;
};

/// QR-reorthonormalized block estimator: lambda_i = (1/(M Delta)) sum_m log R_m[i,i]
/// over repeated thin QR of U(Delta, theta_{m Delta} omega) * frame. The frame
/// starts at the leading top_k coordinate axes. Exponents within
/// max(0.02, 3 x spread) are merged into one group.
LyapunovSpectrum lyapunov_spectrum(const PropagatorSource& cocycle, int dim, double block_len,
                                   int blocks, int top_k, const SpectrumOptions& options = {});

/// [U(t, omega)^T U(t, omega)]^{1/(2t)} computed from the SVD of U.
Matrix singular_limit(const PropagatorSource& cocycle, double t, double base = 0.0);

/// Oseledets splitting at theta_base omega.
struct OseledetsSplitting {
    std::vector<double> exponents;
    std::vector<int> multiplicities;
    /// slow[i]: vectors with forward growth <= lambda_i (dimension N - c_i).
    std::vector<Matrix> slow;
    /// fast[i]: vectors whose backward-time decay is at least lambda_i (dimension c_i + d_i).
    std::vector<Matrix> fast;
    /// subspaces[i] = slow[i] intersect fast[i], orthonormal columns, dimension d_i.
    std::vector<Matrix> subspaces;
    /// Smallest cosine among the principal angles that define each intersection.
    std::vector<double> intersection_cosines;
    double base = 0.0;

    int dimension() const;
};

struct SplittingOptions {
    double block_len = 1.0;
    double base = 0.0;
    double gap_factor = 4.0; ///< groups must be separated by > gap_factor x spread
};

/// Forward-time QR on the transposed product gives the slow filtration;
/// the inverse cocycle over [base - t_span, base] (linear solves against the
/// forward blocks) gives the fast filtration; W_i is their intersection by
/// principal angles. The spectrum must cover the full dimension.
OseledetsSplitting oseledets_splitting(const PropagatorSource& cocycle, const LyapunovSpectrum& spectrum,
                                       double t_span, const SplittingOptions& options = {});

/// max_i max_{w in W_i(omega)} |U w - proj_{W_i(theta omega)} U w| / |U w| with
/// `next` computed at base + block_len.
double equivariance_residual(const PropagatorSource& cocycle, const OseledetsSplitting& here,
                             const OseledetsSplitting& next);

/// Orthonormal basis of the intersection of two column spans (top `dim`
/// principal vectors) together with the smallest of the corresponding cosines.
std::pair<Matrix, double> subspace_intersection(const Matrix& a, const Matrix& b, int dim);

/// Largest principal angle (radians) between two column spans of equal dimension.
double principal_angle(const Matrix& a, const Matrix& b);

/// Orthonormal basis of the column span (thin QR).
Matrix orthonormal_basis(const Matrix& a);

} // namespace scm
