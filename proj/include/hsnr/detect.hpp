#pragma once

#include <hsnr/baselines.hpp>
#include <hsnr/cube.hpp>
#include <hsnr/cube_io.hpp>
#include <hsnr/parallel.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsnr {

// ============================================================
// Background statistics
// ============================================================

struct BackgroundStats {
    Spectrum mean;
    Eigen::MatrixXd cov;
    double ridge = 0.0;  // regularization actually applied to cov
};

inline BackgroundStats background_stats(const HyperCube& cube, const PixelMask* exclude = nullptr) {
    const int h = cube.height(), w = cube.width(), nb = cube.bands();
    if (exclude && (exclude->height != h || exclude->width != w))
        throw std::invalid_argument("background_stats: exclude mask shape mismatch");

    Eigen::Index count = 0;
    for (int x = 0; x < h; ++x)
        for (int y = 0; y < w; ++y)
            if (!exclude || !exclude->at(x, y)) ++count;
    if (count < nb + 1)
        throw std::invalid_argument("background_stats: need at least N+1 included pixels");

    Eigen::MatrixXd rows(count, nb);
    Eigen::Index idx = 0;
    for (int x = 0; x < h; ++x)
        for (int y = 0; y < w; ++y)
            if (!exclude || !exclude->at(x, y)) rows.row(idx++) = cube.spectrum(x, y);

    BackgroundStats bg;
    bg.mean = rows.colwise().mean();
    rows.rowwise() -= bg.mean;
    bg.cov = detail::blocked_gram(rows) / static_cast<double>(count - 1);
    bg.ridge = 1e-6 * bg.cov.trace() / nb;
    // A constant background has zero covariance; fall back to an absolute
    // floor so cov + ridge*I stays positive definite.
    if (!(bg.ridge > 0.0)) bg.ridge = 1e-12;
    return bg;
}

// ============================================================
// ASD scoring
// ============================================================

// Squared cosine between the centered pixel and the target in the
// whitened space defined by C = cov + ridge*I. Bounded in [0, 1] by
// Cauchy-Schwarz and invariant to rescaling of either vector.
class AsdDetector {
public:
    AsdDetector(BackgroundStats bg, const Spectrum& target) : bg_(std::move(bg)) {
        if (target.size() != bg_.mean.size())
            throw std::invalid_argument("asd: target length does not match background stats");
        if (!(target.norm() > 0.0))
            throw std::invalid_argument("asd: target must be nonzero");
        Eigen::MatrixXd c = bg_.cov;
        c.diagonal().array() += bg_.ridge;
        llt_.compute(c);
        if (llt_.info() != Eigen::Success)
            throw std::runtime_error("asd: background covariance is not positive definite");
        whitened_target_ = llt_.matrixL().solve(target.transpose());
        target_energy_ = whitened_target_.squaredNorm();
    }

    double score(const Spectrum& z) const {
        const Eigen::VectorXd wz = llt_.matrixL().solve((z - bg_.mean).transpose());
        const double den = wz.squaredNorm() * target_energy_;
        if (!(den > 0.0)) return 0.0;
        const double dot = whitened_target_.dot(wz);
        return dot * dot / den;
    }

    const BackgroundStats& stats() const { return bg_; }

private:
    BackgroundStats bg_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd whitened_target_;
    double target_energy_ = 0.0;
};

inline double asd_score(const Spectrum& z, const BackgroundStats& bg, const Spectrum& target) {
    return AsdDetector(bg, target).score(z);
}

// ============================================================
// Detection maps
// ============================================================

struct DetectionMap {
    int height = 0;
    int width = 0;
    std::vector<double> scores;  // row-major (x, y)

    DetectionMap() = default;
    DetectionMap(int h, int w) : height(h), width(w) {
        if (h < 1 || w < 1) throw std::invalid_argument("DetectionMap: dimensions must be >= 1");
        scores.assign(static_cast<std::size_t>(h) * w, 0.0);
    }

    double at(int x, int y) const { return scores[static_cast<std::size_t>(x) * width + y]; }
};

inline DetectionMap detect_asd(const HyperCube& cube, const Spectrum& target,
                               const PixelMask* exclude_for_stats = nullptr, int threads = 1,
                               BackgroundStats* stats_out = nullptr) {
    const AsdDetector det(background_stats(cube, exclude_for_stats), target);
    DetectionMap map(cube.height(), cube.width());
    parallel_for(cube.height(), threads, [&](int x) {
        for (int y = 0; y < cube.width(); ++y)
            map.scores[static_cast<std::size_t>(x) * cube.width() + y] = det.score(cube.spectrum(x, y));
    });
    if (stats_out) *stats_out = det.stats();
    return map;
}

// ============================================================
// ROC
// ============================================================

struct RocCurve {
    // Parallel arrays, one entry per curve point. The initial (0, 0) point
    // carries threshold +inf; every other threshold is a distinct score.
    std::vector<double> thresholds;
    std::vector<double> pfa;
    std::vector<double> pd;
    double auc = 0.0;
};

// Threshold sweep over the distinct scores in descending order. Tied scores
// collapse into one point, which makes the curve independent of pixel order.
inline RocCurve roc(const DetectionMap& map, const PixelMask& truth) {
    if (truth.height != map.height || truth.width != map.width)
        throw std::invalid_argument("roc: truth mask shape mismatch");
    const std::size_t total = map.scores.size();
    const std::size_t pos = truth.count_true();
    const std::size_t neg = total - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("roc: truth mask needs at least one positive and one negative");

    std::vector<std::pair<double, bool>> samples(total);
    for (std::size_t i = 0; i < total; ++i)
        samples[i] = {map.scores[i], truth.flags[i] != 0};
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.pfa.push_back(0.0);
    curve.pd.push_back(0.0);

    std::size_t tp = 0, fp = 0, i = 0;
    while (i < total) {
        const double s = samples[i].first;
        while (i < total && samples[i].first == s) {
            if (samples[i].second) ++tp;
            else ++fp;
            ++i;
        }
        curve.thresholds.push_back(s);
        curve.pfa.push_back(static_cast<double>(fp) / static_cast<double>(neg));
        curve.pd.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    }

    for (std::size_t p = 1; p < curve.pfa.size(); ++p)
        curve.auc += 0.5 * (curve.pd[p] + curve.pd[p - 1]) * (curve.pfa[p] - curve.pfa[p - 1]);
    return curve;
}

// ============================================================
// Score-map and ROC file formats
// ============================================================

namespace detail {

inline std::string scores_sidecar_path(const std::string& path) {
    if (ends_with(path, ".f32")) return path.substr(0, path.size() - 4) + ".json";
    return path + ".json";
}

}  // namespace detail

// Raw H*W little-endian float32 scores plus a JSON sidecar with the shape
// and the ridge used by the detector.
inline void save_scores_f32(const DetectionMap& map, const std::string& path, double ridge = 0.0) {
    std::string payload;
    payload.reserve(map.scores.size() * 4);
    for (double s : map.scores) detail::put_f32le(payload, static_cast<float>(s));
    detail::write_file_bytes(path, payload, "save_scores_f32");

    nlohmann::json sidecar = {
        {"magic", "HSC1"},
        {"height", map.height},
        {"width", map.width},
        {"dtype", "f32le"},
        {"order", "x,y"},
        {"ridge", ridge},
    };
    detail::write_file_bytes(detail::scores_sidecar_path(path), sidecar.dump() + "\n", "save_scores_f32");
}

inline DetectionMap load_scores_f32(const std::string& path) {
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(detail::read_file_bytes(detail::scores_sidecar_path(path), "load_scores_f32"));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("load_scores_f32: malformed sidecar: ") + e.what());
    }
    const int h = sidecar.value("height", 0);
    const int w = sidecar.value("width", 0);
    if (h < 1 || w < 1) throw std::runtime_error("load_scores_f32: bad sidecar dimensions");

    const std::string payload = detail::read_file_bytes(path, "load_scores_f32");
    if (payload.size() != static_cast<std::size_t>(h) * w * 4)
        throw std::runtime_error("load_scores_f32: payload size mismatch");

    DetectionMap map(h, w);
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t i = 0; i < map.scores.size(); ++i)
        map.scores[i] = static_cast<double>(detail::get_f32le(bytes + 4 * i));
    return map;
}

// CSV columns threshold,pfa,pd plus a trailing `# auc=` comment line.
inline void save_roc_csv(const RocCurve& curve, const std::string& path) {
    std::string out = "threshold,pfa,pd\n";
    for (std::size_t i = 0; i < curve.pfa.size(); ++i)
        out += detail::fmt_double(curve.thresholds[i]) + "," + detail::fmt_double(curve.pfa[i]) + "," +
               detail::fmt_double(curve.pd[i]) + "\n";
    out += "# auc=" + detail::fmt_double(curve.auc) + "\n";
    detail::write_file_bytes(path, out, "save_roc_csv");
}

}  // namespace hsnr
