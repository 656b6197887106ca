#pragma once

#include <hsnr/cube.hpp>
#include <hsnr/mmse.hpp>
#include <hsnr/parallel.hpp>

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace hsnr {

// Comparison denoisers: per-band spatial Gaussian filtering and global MNF
// (noise-whitened eigen-truncation).

// ============================================================
// Gaussian filter
// ============================================================

struct GaussianFilterConfig {
    int k = 3;
    // Customary sigma for an unspecified k x k Gaussian kernel,
    // 0.3 ((k-1)/2 - 1) + 0.8, evaluated at the default k = 3.
    double spatial_std = 0.8;
};

// Convolve every band with the normalized k x k Gaussian kernel, mirror
// padding at the borders. The band axis is untouched, so the inner loop
// runs over whole spectra.
inline HyperCube denoise_gaussian(const HyperCube& cube, const GaussianFilterConfig& cfg, int threads = 1) {
    const WeightKernel kern = gaussian_weight_kernel(cfg.k, cfg.spatial_std);
    const int h = cube.height(), w = cube.width(), k = cfg.k, r = (k - 1) / 2;
    HyperCube out(h, w, cube.axis());

    parallel_for(h, threads, [&](int x) {
        Spectrum acc(cube.bands());
        std::vector<int> sx(k), sy(k);
        for (int d = -r; d <= r; ++d) sx[d + r] = mirror_index(x + d, h);
        for (int y = 0; y < w; ++y) {
            for (int d = -r; d <= r; ++d) sy[d + r] = mirror_index(y + d, w);
            acc.setZero();
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    acc += kern.omega[i * k + j] * cube.spectrum(sx[i], sy[j]);
            out.spectrum(x, y) = acc;
        }
    });
    return out;
}

// ============================================================
// MNF
// ============================================================

struct MnfConfig {
    int k = 3;                    // enters only the FLOP cost model
    std::optional<int> retained;  // explicit component count; empty = auto
    double snr_min = 2.0;         // auto threshold on the whitened eigenvalue
};

namespace detail {

// X^T X accumulated over fixed 1024-row blocks in index order. The block
// boundaries do not depend on the caller's thread count, so the sum is
// reproducible bit for bit.
inline Eigen::MatrixXd blocked_gram(const Eigen::MatrixXd& x) {
    constexpr Eigen::Index kBlock = 1024;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
        const Eigen::Index len = std::min(kBlock, x.rows() - r0);
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x.middleRows(r0, len).transpose());
    }
    return acc.selfadjointView<Eigen::Lower>();
}

}  // namespace detail

// Noise covariance from horizontal shift differences: for i.i.d. noise on a
// smooth scene, z(x,y) - z(x,y+1) is almost pure noise with twice its
// covariance.
inline Eigen::MatrixXd estimate_noise_cov(const HyperCube& cube) {
    if (cube.width() < 2)
        throw std::invalid_argument("estimate_noise_cov: need width >= 2");
    const int h = cube.height(), w = cube.width(), nb = cube.bands();
    const Eigen::Index rows = static_cast<Eigen::Index>(h) * (w - 1);
    if (rows < 2)
        throw std::invalid_argument("estimate_noise_cov: need at least 2 horizontal pairs");

    Eigen::MatrixXd d(rows, nb);
    Eigen::Index idx = 0;
    for (int x = 0; x < h; ++x)
        for (int y = 0; y + 1 < w; ++y)
            d.row(idx++) = cube.spectrum(x, y) - cube.spectrum(x, y + 1);

    const Eigen::RowVectorXd mean = d.colwise().mean();
    d.rowwise() -= mean;
    return detail::blocked_gram(d) / (2.0 * static_cast<double>(rows - 1));
}

// Global MNF denoising: solve data_cov e = lambda noise_cov e, keep the
// high-SNR components, back-project. Eigenvectors are noise_cov-orthonormal
// (E^T noise_cov E = I), which makes the back-projection E_kept^T noise_cov.
inline HyperCube denoise_mnf(const HyperCube& cube, const MnfConfig& cfg, int threads = 1) {
    const int h = cube.height(), w = cube.width(), nb = cube.bands();
    if (nb < 2) throw std::invalid_argument("denoise_mnf: need at least 2 bands");
    if (cfg.retained && (*cfg.retained < 1 || *cfg.retained > nb))
        throw std::invalid_argument("denoise_mnf: retained out of range [1, N]");
    if (!cfg.retained && !(cfg.snr_min > 0.0))
        throw std::invalid_argument("denoise_mnf: snr_min must be > 0");
    const Eigen::Index pixels = static_cast<Eigen::Index>(h) * w;
    if (pixels < 2) throw std::invalid_argument("denoise_mnf: need at least 2 pixels");

    Eigen::MatrixXd noise_cov = estimate_noise_cov(cube);
    if (!noise_cov.allFinite())
        throw std::runtime_error("denoise_mnf: non-finite noise covariance");
    const double ridge = 1e-8 * noise_cov.trace() / nb;
    if (!(ridge > 0.0))
        throw std::runtime_error("denoise_mnf: noise covariance is singular (no noise to whiten)");
    noise_cov.diagonal().array() += ridge;

    Eigen::MatrixXd c(pixels, nb);
    for (int x = 0; x < h; ++x)
        for (int y = 0; y < w; ++y)
            c.row(static_cast<Eigen::Index>(x) * w + y) = cube.spectrum(x, y);
    const Eigen::RowVectorXd mu = c.colwise().mean();
    c.rowwise() -= mu;
    const Eigen::MatrixXd data_cov = detail::blocked_gram(c) / static_cast<double>(pixels - 1);
    if (!data_cov.allFinite())
        throw std::runtime_error("denoise_mnf: non-finite data covariance");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(data_cov, noise_cov);
    if (ges.info() != Eigen::Success)
        throw std::runtime_error("denoise_mnf: generalized eigensolver failed");

    // Eigenvalues come out ascending; the retained components are the last
    // `keep` columns.
    int keep;
    if (cfg.retained) {
        keep = *cfg.retained;
    } else {
        keep = 0;
        for (Eigen::Index i = 0; i < nb; ++i)
            if (ges.eigenvalues()(i) > cfg.snr_min) ++keep;
        keep = std::max(keep, 1);
    }

    const Eigen::MatrixXd e_kept = ges.eigenvectors().rightCols(keep);
    const Eigen::MatrixXd scores = c * e_kept;                       // pixels x keep
    const Eigen::MatrixXd back = e_kept.transpose() * noise_cov;     // keep x N
    const Eigen::MatrixXd recon = scores * back;                     // pixels x N

    HyperCube out(h, w, cube.axis());
    parallel_for(h, threads, [&](int x) {
        for (int y = 0; y < w; ++y)
            out.spectrum(x, y) = mu + recon.row(static_cast<Eigen::Index>(x) * w + y);
    });
    return out;
}

}  // namespace hsnr
