#pragma once

#include <hsnr/cube.hpp>
#include <hsnr/parallel.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hsnr {

// Windowed MMSE denoising. Around every pixel, the k*k neighborhood is a
// k^2 x N sample matrix Z whose centered rows Z' estimate the local signal
// subspace; the estimator shrinks each retained singular value d of Z' to
// d - (k^2-1) sigma^2 / d and rebuilds the window around the sample mean.
// Three algebraically equivalent routes are provided:
//   mmse_window_direct  works in the N-dimensional band space,
//   mmse_window_dual    works in the k^2-dimensional window space,
//   mmse_window_fast    applies the shrinkage through an eigendecomposition
//                       of the k^2 x k^2 Gram matrix (production path).
// A component is retained when its Gram eigenvalue is at least rcond times
// the largest one, the same relative cutoff pseudo_inverse applies, so all
// routes drop the same directions.

// ============================================================
// Configuration and weights
// ============================================================

inline double default_noise_sigma() { return std::sqrt(0.9); }

enum class WeightKind { gaussian, identity };

struct MmseConfig {
    int k = 3;
    double sigma = default_noise_sigma();
    double weight_std = 1.0;
    double rcond = 1e-10;
    bool clamp_negative = false;
    WeightKind kernel = WeightKind::gaussian;
};

// Spatial weight applied to the denoised window rows; entry i corresponds
// to window offset (dx, dy) in row-major order.
struct WeightKernel {
    int k = 0;
    Eigen::RowVectorXd omega;

    int center_index() const { return (k * k - 1) / 2; }
};

inline WeightKernel gaussian_weight_kernel(int k, double weight_std) {
    if (k < 3 || k % 2 == 0)
        throw std::invalid_argument("gaussian_weight_kernel: k must be odd and >= 3");
    if (!(weight_std > 0.0))
        throw std::invalid_argument("gaussian_weight_kernel: weight_std must be > 0");
    WeightKernel kern;
    kern.k = k;
    kern.omega.resize(k * k);
    const int r = (k - 1) / 2;
    const double inv = 1.0 / (2.0 * weight_std * weight_std);
    for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
            kern.omega[(dx + r) * k + (dy + r)] = std::exp(-(dx * dx + dy * dy) * inv);
    kern.omega /= kern.omega.sum();
    return kern;
}

// One-hot kernel selecting the center row; with sigma = 0 this makes the
// denoiser the identity.
inline WeightKernel identity_weight_kernel(int k) {
    if (k < 3 || k % 2 == 0)
        throw std::invalid_argument("identity_weight_kernel: k must be odd and >= 3");
    WeightKernel kern;
    kern.k = k;
    kern.omega = Eigen::RowVectorXd::Zero(k * k);
    kern.omega[kern.center_index()] = 1.0;
    return kern;
}

// ============================================================
// Window statistics
// ============================================================

inline Spectrum sample_mean(const WindowSample& w) {
    if (w.matrix.rows() < 1) throw std::invalid_argument("sample_mean: empty window");
    return w.matrix.colwise().mean();
}

inline Eigen::MatrixXd sample_cov(const WindowSample& w) {
    if (w.matrix.rows() < 2) throw std::invalid_argument("sample_cov: need at least 2 rows");
    const Eigen::RowVectorXd mean = w.matrix.colwise().mean();
    const Eigen::MatrixXd zc = w.matrix.rowwise() - mean;
    return (zc.transpose() * zc) / static_cast<double>(w.matrix.rows() - 1);
}

inline Eigen::MatrixXd dual_cov(const WindowSample& w) {
    if (w.matrix.rows() < 2) throw std::invalid_argument("dual_cov: need at least 2 rows");
    const Eigen::RowVectorXd mean = w.matrix.colwise().mean();
    const Eigen::MatrixXd zc = w.matrix.rowwise() - mean;
    return (zc * zc.transpose()) / static_cast<double>(w.matrix.rows() - 1);
}

struct WindowStats {
    Spectrum mean;
    Eigen::MatrixXd centered;  // k^2 x N
    Eigen::MatrixXd cov;       // N x N
    Eigen::MatrixXd dual_cov;  // k^2 x k^2
};

inline WindowStats window_stats(const WindowSample& w) {
    if (w.matrix.rows() < 2) throw std::invalid_argument("window_stats: need at least 2 rows");
    WindowStats s;
    s.mean = w.matrix.colwise().mean();
    s.centered = w.matrix.rowwise() - s.mean;
    const double denom = static_cast<double>(w.matrix.rows() - 1);
    s.cov = (s.centered.transpose() * s.centered) / denom;
    s.dual_cov = (s.centered * s.centered.transpose()) / denom;
    return s;
}

// ============================================================
// Pseudo-inverse and SVD factors
// ============================================================

// Moore-Penrose pseudo-inverse of a symmetric matrix. Singular values below
// rcond times the largest are treated as zero.
inline Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rcond) {
    if (m.rows() != m.cols())
        throw std::invalid_argument("pseudo_inverse: matrix must be square");
    if (!(rcond > 0.0 && rcond < 1.0))
        throw std::invalid_argument("pseudo_inverse: rcond must be in (0, 1)");
    const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    if (m.size()) {
        const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-8 * std::max(scale, 1.0))
            throw std::invalid_argument("pseudo_inverse: matrix is not symmetric");
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = rcond * (sv.size() ? sv(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 0.0 && sv(i) >= cutoff) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct SvdFactors {
    Eigen::MatrixXd u;               // k^2 x k^2
    Eigen::VectorXd singular_values; // length k^2, nonincreasing
    Eigen::MatrixXd vt;              // k^2 x N
};

inline SvdFactors svd_factors(const Eigen::MatrixXd& centered) {
    if (centered.rows() > centered.cols())
        throw std::invalid_argument("svd_factors: expected a wide matrix (k^2 <= N)");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullU | Eigen::ComputeThinV);
    SvdFactors f;
    f.u = svd.matrixU();
    f.singular_values = svd.singularValues();
    f.vt = svd.matrixV().transpose();
    return f;
}

// ============================================================
// Window estimators
// ============================================================

namespace detail {

// Multiplier applied to each Gram eigendirection: lambda = d^2 maps the
// shrinkage d -> d - (m-1) sigma^2 / d onto a gain of 1 - (m-1) sigma^2 /
// lambda. Directions below the relative cutoff get gain 0.
template <class EvalVec, class GainVec>
void shrink_gains(const EvalVec& evals, double m_minus_1, double sigma, double rcond, bool clamp_negative,
                  GainVec& gains) {
    const double lmax = evals.maxCoeff();
    const double cutoff = rcond * lmax;
    const double c = m_minus_1 * sigma * sigma;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        const double lambda = evals(i);
        if (lambda > 0.0 && lambda >= cutoff) {
            double g = 1.0 - c / lambda;
            if (clamp_negative && g < 0.0) g = 0.0;
            gains(i) = g;
        } else {
            gains(i) = 0.0;
        }
    }
}

inline void check_window_args(const WindowSample& w, double sigma, double rcond) {
    if (w.matrix.rows() < 2) throw std::invalid_argument("mmse window: need at least 2 rows");
    if (sigma < 0.0) throw std::invalid_argument("mmse window: sigma must be >= 0");
    if (!(rcond > 0.0 && rcond < 1.0)) throw std::invalid_argument("mmse window: rcond must be in (0, 1)");
}

}  // namespace detail

// N-space form: S = Zbar + Z' cov# (cov - sigma^2 I).
inline Eigen::MatrixXd mmse_window_direct(const WindowSample& w, double sigma, double rcond) {
    detail::check_window_args(w, sigma, rcond);
    const Eigen::RowVectorXd mean = w.matrix.colwise().mean();
    const Eigen::MatrixXd zc = w.matrix.rowwise() - mean;
    const Eigen::MatrixXd cov = (zc.transpose() * zc) / static_cast<double>(w.matrix.rows() - 1);
    Eigen::MatrixXd shifted = cov;
    shifted.diagonal().array() -= sigma * sigma;
    return ((zc * pseudo_inverse(cov, rcond)) * shifted).rowwise() + mean;
}

// Window-space form: S = Zbar + (dual - sigma^2 I) dual# Z'. Never touches
// an N x N matrix.
inline Eigen::MatrixXd mmse_window_dual(const WindowSample& w, double sigma, double rcond) {
    detail::check_window_args(w, sigma, rcond);
    const Eigen::RowVectorXd mean = w.matrix.colwise().mean();
    const Eigen::MatrixXd zc = w.matrix.rowwise() - mean;
    const Eigen::MatrixXd dual = (zc * zc.transpose()) / static_cast<double>(w.matrix.rows() - 1);
    Eigen::MatrixXd shifted = dual;
    shifted.diagonal().array() -= sigma * sigma;
    return ((shifted * pseudo_inverse(dual, rcond)) * zc).rowwise() + mean;
}

// Singular-value shrinkage via the Gram matrix Z'Z'^T, whose eigenvalues are
// the squared singular values of Z'. Production path of denoise_mmse.
inline Eigen::MatrixXd mmse_window_fast(const WindowSample& w, double sigma, double rcond,
                                        bool clamp_negative = false) {
    detail::check_window_args(w, sigma, rcond);
    const Eigen::Index m = w.matrix.rows();
    const Eigen::RowVectorXd mean = w.matrix.colwise().mean();
    const Eigen::MatrixXd zc = w.matrix.rowwise() - mean;
    const Eigen::MatrixXd gram = zc * zc.transpose();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::VectorXd gains(m);
    detail::shrink_gains(es.eigenvalues(), static_cast<double>(m - 1), sigma, rcond, clamp_negative, gains);

    const Eigen::MatrixXd b = es.eigenvectors() * gains.asDiagonal() * es.eigenvectors().transpose();
    return (b * zc).rowwise() + mean;
}

// ============================================================
// Full-cube denoiser
// ============================================================

namespace detail {

// Per-row worker shared by the generic and the k = 3 specialization; M is
// k^2 as a compile-time constant when available so the small matrices live
// on the stack.
template <int M>
void denoise_mmse_rows(const HyperCube& cube, const MmseConfig& cfg, const WeightKernel& kern, HyperCube& out,
                       int threads) {
    const int h = cube.height(), wd = cube.width(), nb = cube.bands();
    const int k = cfg.k, r = (k - 1) / 2, m = k * k;
    const double c = static_cast<double>(m - 1) * cfg.sigma * cfg.sigma;

    parallel_for(h, threads, [&](int x) {
        Eigen::Matrix<double, M, Eigen::Dynamic> z(m, nb), zc(m, nb);
        Eigen::Matrix<double, M, M> gram(m, m), shifted(m, m);
        Eigen::Matrix<double, M, 1> gains(m), v(m);
        Eigen::Matrix<double, 1, M> omega(1, m), wu(1, m), coeff(1, m);
        omega = kern.omega;
        Eigen::RowVectorXd mean(nb);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, M, M>> es;
        Eigen::LLT<Eigen::Matrix<double, M, M>> llt;
        std::vector<int> sx(k), sy(k);

        for (int y = 0; y < wd; ++y) {
            for (int d = -r; d <= r; ++d) {
                sx[d + r] = mirror_index(x + d, h);
                sy[d + r] = mirror_index(y + d, wd);
            }
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    z.row(i * k + j) = cube.spectrum(sx[i], sy[j]);

            mean = z.colwise().mean();
            zc = z.rowwise() - mean;
            gram.setZero();
            gram.template selfadjointView<Eigen::Lower>().rankUpdate(zc);
            const double tr = gram.trace();
            const double beta = tr / static_cast<double>(m * m);

            // Fast path. When every eigenvalue on the mean-centered subspace
            // is at least 1.5 c with c = (m-1) sigma^2, all m-1 directions
            // keep a positive gain and U diag(1 - c/lambda) U^T collapses to
            // P - c gram^+, P the centering projector. gram^+ omega^T then
            // comes from one SPD solve: adding beta 11^T makes the Gram
            // invertible without disturbing it on the complement of 1. A
            // Cholesky factorization of gram - 1.5 c P + beta 11^T certifies
            // the eigenvalue bound, and rcond * tr <= 1.5 c keeps the
            // relative cutoff inert (rcond lambda_max <= 1.5 c <= lambda_min).
            // Windows that fail the certificate (rank-deficient mirrored
            // borders, near-constant data, sigma = 0) take the
            // eigendecomposition route below.
            bool closed = c > 0.0 && tr > 0.0 && cfg.rcond * tr <= 1.5 * c;
            if (closed) {
                shifted = gram;
                shifted.array() += 1.5 * c / m + beta;
                shifted.diagonal().array() -= 1.5 * c;
                llt.compute(shifted);
                closed = llt.info() == Eigen::Success;
            }
            if (closed) {
                shifted = gram;
                shifted.array() += beta;
                llt.compute(shifted);
                if (llt.info() == Eigen::Success) {
                    v = llt.solve(omega.transpose());
                    v.array() -= 1.0 / (static_cast<double>(m * m) * beta);
                    // s = omega Z - c (gram^+ omega^T)^T Z', folded into one
                    // row of coefficients against the raw window rows.
                    coeff = omega - c * v.transpose();
                    coeff.array() += c * v.sum() / m;
                    out.spectrum(x, y).noalias() = coeff * z;
                    continue;
                }
            }

            es.compute(gram);
            shrink_gains(es.eigenvalues(), static_cast<double>(m - 1), cfg.sigma, cfg.rcond,
                         cfg.clamp_negative, gains);

            // Fused update s = mean + omega U diag(g) U^T Z', evaluated left
            // to right so nothing larger than 1 x m materializes.
            wu.noalias() = omega * es.eigenvectors();
            wu = wu.cwiseProduct(gains.transpose());
            coeff.noalias() = wu * es.eigenvectors().transpose();
            out.spectrum(x, y).noalias() = mean + coeff * zc;
        }
    });
}

}  // namespace detail

inline void validate_mmse_config(const MmseConfig& cfg, const HyperCube& cube) {
    if (cfg.k < 3 || cfg.k % 2 == 0)
        throw std::invalid_argument("denoise_mmse: k must be odd and >= 3");
    if (cfg.k * cfg.k >= cube.bands())
        throw std::invalid_argument("denoise_mmse: k^2 must be smaller than the band count");
    if (cfg.sigma < 0.0) throw std::invalid_argument("denoise_mmse: sigma must be >= 0");
    if (!(cfg.rcond > 0.0 && cfg.rcond < 1.0))
        throw std::invalid_argument("denoise_mmse: rcond must be in (0, 1)");
    if (cfg.kernel == WeightKind::gaussian && !(cfg.weight_std > 0.0))
        throw std::invalid_argument("denoise_mmse: weight_std must be > 0");
}

inline HyperCube denoise_mmse(const HyperCube& cube, const MmseConfig& cfg, int threads = 1) {
    validate_mmse_config(cfg, cube);
    const WeightKernel kern = cfg.kernel == WeightKind::identity
                                  ? identity_weight_kernel(cfg.k)
                                  : gaussian_weight_kernel(cfg.k, cfg.weight_std);
    HyperCube out(cube.height(), cube.width(), cube.axis());
    if (cfg.k == 3)
        detail::denoise_mmse_rows<9>(cube, cfg, kern, out, threads);
    else
        detail::denoise_mmse_rows<Eigen::Dynamic>(cube, cfg, kern, out, threads);
    return out;
}

// ============================================================
// Noise estimation
// ============================================================

// Robust sigma estimate from first differences along the band axis: for
// i.i.d. noise the differences have std sigma*sqrt(2), and the median
// absolute deviation ignores the smooth signal's contribution.
inline double estimate_sigma(const HyperCube& cube) {
    if (cube.bands() < 2) throw std::invalid_argument("estimate_sigma: need at least 2 bands");
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(cube.height()) * cube.width() * (cube.bands() - 1));
    for (int x = 0; x < cube.height(); ++x)
        for (int y = 0; y < cube.width(); ++y)
            for (int n = 0; n + 1 < cube.bands(); ++n)
                diffs.push_back(cube.at(x, y, n + 1) - cube.at(x, y, n));

    auto median_of = [](std::vector<double>& v) {
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        double hi = v[mid];
        if (v.size() % 2 == 0) {
            std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
            return 0.5 * (v[mid - 1] + hi);
        }
        return hi;
    };

    const double med = median_of(diffs);
    for (double& d : diffs) d = std::abs(d - med);
    const double mad = median_of(diffs);
    return mad / (0.6745 * std::sqrt(2.0));
}

}  // namespace hsnr
