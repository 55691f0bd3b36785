#include "scm/met.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

namespace scm {

int LyapunovSpectrum::dimension() const {
    return std::accumulate(multiplicities.begin(), multiplicities.end(), 0);
}

std::vector<double> LyapunovSpectrum::expanded() const {
    std::vector<double> out;
    for (std::size_t g = 0; g < exponents.size(); ++g) {
        out.insert(out.end(), static_cast<std::size_t>(multiplicities[g]), exponents[g]);
    }
    return out;
}

nlohmann::json spectrum_to_json(const LyapunovSpectrum& s) {
    return nlohmann::json{{"exponents", s.exponents},   {"multiplicities", s.multiplicities},
                          {"spread", s.spread},         {"block_len", s.block_len},
                          {"blocks", s.blocks},         {"burn_in", s.burn_in},
                          {"seed", s.seed},             {"grouping_tolerance", s.grouping_tolerance},
                          {"per_direction", s.per_direction}};
}

Matrix orthonormal_basis(const Matrix& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

namespace {

// Fixed orthogonal start with no special alignment to the coordinate axes.
Matrix generic_frame(Eigen::Index n) {
    std::mt19937_64 gen(0x5eed);
    std::normal_distribution<double> normal;
    Matrix a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = normal(gen);
    }
    return orthonormal_basis(a);
}

// Thin QR with a nonnegative diagonal in R.
void positive_qr(const Matrix& y, Matrix& q, Matrix& r) {
    Eigen::HouseholderQR<Matrix> qr(y);
    const auto k = y.cols();
    q = qr.householderQ() * Matrix::Identity(y.rows(), k);
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < k; ++i) {
        if (r(i, i) < 0.0) {
            r.row(i) *= -1.0;
            q.col(i) *= -1.0;
        }
    }
}

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

} // namespace

LyapunovSpectrum lyapunov_spectrum(const PropagatorSource& cocycle, int dim, double block_len,
                                   int blocks, int top_k, const SpectrumOptions& options) {
    if (!(block_len > 0.0)) throw InvalidArgument("block length must be positive");
    if (blocks < 1) throw InvalidArgument("need at least one block");
    if (top_k < 1 || top_k > dim) throw InvalidArgument("top_k must lie in [1, N]");
    if (options.burn_in < 0 || options.burn_in >= blocks) {
        throw InvalidArgument("burn-in must leave at least one block");
    }

    Matrix q = Matrix::Identity(dim, top_k);
    Matrix r;
    const auto k = static_cast<std::size_t>(top_k);
    std::vector<std::vector<double>> logs;
    logs.reserve(static_cast<std::size_t>(blocks));
    std::vector<double> running(k, 0.0);

    for (int m = 0; m < blocks; ++m) {
        const double t0 = options.base + m * block_len;
        const Matrix u = cocycle(t0, t0 + block_len);
        if (u.rows() != dim || u.cols() != dim) throw InvalidArgument("cocycle dimension mismatch");
        positive_qr(u * q, q, r);
        std::vector<double> row(k);
        for (std::size_t i = 0; i < k; ++i) {
            const double d = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
            if (!(d > 1e-300) || !std::isfinite(d)) {
                throw NumericalRefusal("RankCollapse", "frame lost rank in block " + std::to_string(m) +
                                                           " (column " + std::to_string(i) + ")");
            }
            row[i] = std::log(d);
            running[i] += row[i];
        }
        logs.push_back(std::move(row));
        if (options.on_block) {
            std::vector<double> est(k);
            for (std::size_t i = 0; i < k; ++i) est[i] = running[i] / ((m + 1) * block_len);
            options.on_block(m, est);
        }
    }

    const int used = blocks - options.burn_in;
    const double horizon = used * block_len;
    std::vector<double> estimate(k, 0.0);
    for (int m = options.burn_in; m < blocks; ++m) {
        for (std::size_t i = 0; i < k; ++i) estimate[i] += logs[static_cast<std::size_t>(m)][i];
    }
    for (double& e : estimate) e /= horizon;

    // batch means
    const int batches = std::max(1, std::min(options.batches, used));
    const int per_batch = used / batches;
    std::vector<double> spread(k, 0.0);
    if (batches >= 2 && per_batch >= 1) {
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> means;
            for (int b = 0; b < batches; ++b) {
                const int start = options.burn_in + b * per_batch;
                const int stop = (b == batches - 1) ? blocks : start + per_batch;
                double s = 0.0;
                for (int m = start; m < stop; ++m) s += logs[static_cast<std::size_t>(m)][i];
                means.push_back(s / ((stop - start) * block_len));
            }
            spread[i] = sample_stddev(means) / std::sqrt(static_cast<double>(batches));
        }
    }

    // sort descending (QR usually already orders them)
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return estimate[a] > estimate[b]; });

    LyapunovSpectrum out;
    out.block_len = block_len;
    out.blocks = blocks;
    out.burn_in = options.burn_in;
    for (std::size_t idx : order) {
        out.per_direction.push_back(estimate[idx]);
        out.direction_spread.push_back(spread[idx]);
    }
    const double max_spread = *std::max_element(spread.begin(), spread.end());
    out.grouping_tolerance = std::max(options.min_group_tolerance, 3.0 * max_spread);

    std::size_t i = 0;
    while (i < k) {
        std::size_t j = i + 1;
        while (j < k) {
            const double tol = std::max(options.min_group_tolerance,
                                        3.0 * std::max(out.direction_spread[j - 1], out.direction_spread[j]));
            if (out.per_direction[j - 1] - out.per_direction[j] > tol) break;
            ++j;
        }
        double sum = 0.0;
        double sp = 0.0;
        for (std::size_t m = i; m < j; ++m) {
            sum += out.per_direction[m];
            sp = std::max(sp, out.direction_spread[m]);
        }
        out.exponents.push_back(sum / static_cast<double>(j - i));
        out.multiplicities.push_back(static_cast<int>(j - i));
        out.spread.push_back(sp);
        i = j;
    }
    return out;
}

Matrix singular_limit(const PropagatorSource& cocycle, double t, double base) {
    if (!(t > 0.0)) throw InvalidArgument("singular limit needs t > 0");
    const Matrix u = cocycle(base, base + t);
    if (!u.allFinite()) throw NumericalRefusal("SvdFailure", "propagator has non-finite entries");
    Eigen::JacobiSVD<Matrix> svd(u, Eigen::ComputeFullV);
    const Vector powered = svd.singularValues().array().pow(1.0 / t).matrix();
    const Matrix& v = svd.matrixV();
    return v * powered.asDiagonal() * v.transpose();
}

int OseledetsSplitting::dimension() const {
    return std::accumulate(multiplicities.begin(), multiplicities.end(), 0);
}

std::pair<Matrix, double> subspace_intersection(const Matrix& a, const Matrix& b, int dim) {
    const Matrix qa = orthonormal_basis(a);
    const Matrix qb = orthonormal_basis(b);
    if (dim < 1 || dim > std::min(qa.cols(), qb.cols())) {
        throw InvalidArgument("intersection dimension exceeds the subspace dimensions");
    }
    Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix basis = orthonormal_basis(qa * svd.matrixU().leftCols(dim));
    return {basis, svd.singularValues()(dim - 1)};
}

double principal_angle(const Matrix& a, const Matrix& b) {
    const Matrix qa = orthonormal_basis(a);
    const Matrix qb = orthonormal_basis(b);
    const Matrix residual = qb - qa * (qa.transpose() * qb);
    Eigen::JacobiSVD<Matrix> svd(residual);
    const double s = std::min(1.0, svd.singularValues()(0));
    return std::asin(s);
}

OseledetsSplitting oseledets_splitting(const PropagatorSource& cocycle, const LyapunovSpectrum& spectrum,
                                       double t_span, const SplittingOptions& options) {
    const double dlt = options.block_len;
    if (!(dlt > 0.0) || !(t_span >= dlt)) throw InvalidArgument("t_span must cover at least one block");
    const Matrix probe = cocycle(options.base, options.base + dlt);
    const auto n = probe.rows();
    if (spectrum.dimension() != n) {
        throw InvalidArgument("splitting needs the full spectrum (sum of multiplicities = N)");
    }
    for (std::size_t g = 0; g + 1 < spectrum.exponents.size(); ++g) {
        const double gap = spectrum.exponents[g] - spectrum.exponents[g + 1];
        const double noise = std::max(spectrum.spread[g], spectrum.spread[g + 1]);
        if (!(gap > options.gap_factor * noise)) {
            throw NumericalRefusal("GapTooSmall", "exponent groups " + std::to_string(g) + " and " +
                                                      std::to_string(g + 1) + " are not separated");
        }
    }

    const int blocks = static_cast<int>(std::lround(t_span / dlt));

    // slow filtration: QR chain on U(t, omega)^T = M_0^T ... M_{K-1}^T
    std::vector<Matrix> forward(static_cast<std::size_t>(blocks));
    for (int m = 0; m < blocks; ++m) {
        const double t0 = options.base + m * dlt;
        forward[static_cast<std::size_t>(m)] = cocycle(t0, t0 + dlt);
    }
    const Matrix start = generic_frame(n);
    Matrix q = start;
    for (int m = blocks - 1; m >= 0; --m) {
        q = orthonormal_basis(forward[static_cast<std::size_t>(m)].transpose() * q);
    }
    const Matrix slow_q = q;

    // fast filtration: QR chain on U(-t, omega)^T = B_0^{-T} ... B_{K-1}^{-T}
    q = start;
    for (int m = blocks - 1; m >= 0; --m) {
        const double t1 = options.base - m * dlt;
        const Matrix block = cocycle(t1 - dlt, t1);
        q = orthonormal_basis(block.transpose().partialPivLu().solve(q));
    }
    const Matrix fast_q = q;

    OseledetsSplitting out;
    out.exponents = spectrum.exponents;
    out.multiplicities = spectrum.multiplicities;
    out.base = options.base;
    int leading = 0; // c_i = d_1 + ... + d_{i-1}
    for (std::size_t g = 0; g < spectrum.exponents.size(); ++g) {
        const int d = spectrum.multiplicities[g];
        const Matrix slow = slow_q.rightCols(n - leading);
        const Matrix fast = fast_q.rightCols(leading + d);
        auto [basis, cosine] = subspace_intersection(slow, fast, d);
        out.slow.push_back(slow);
        out.fast.push_back(fast);
        out.subspaces.push_back(std::move(basis));
        out.intersection_cosines.push_back(cosine);
        leading += d;
    }
    return out;
}

double equivariance_residual(const PropagatorSource& cocycle, const OseledetsSplitting& here,
                             const OseledetsSplitting& next) {
    if (here.subspaces.size() != next.subspaces.size()) {
        throw InvalidArgument("splittings have different group counts");
    }
    const Matrix u = cocycle(here.base, next.base);
    double worst = 0.0;
    for (std::size_t g = 0; g < here.subspaces.size(); ++g) {
        const Matrix& w_next = next.subspaces[g];
        for (Eigen::Index c = 0; c < here.subspaces[g].cols(); ++c) {
            const Vector y = u * here.subspaces[g].col(c);
            const Vector r = y - w_next * (w_next.transpose() * y);
            worst = std::max(worst, r.norm() / y.norm());
        }
    }
    return worst;
}

} // namespace scm
