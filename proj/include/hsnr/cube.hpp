#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace hsnr {

// A spectrum is a row vector of band values, matching the row-per-pixel
// layout used by the window and covariance machinery.
using Spectrum = Eigen::RowVectorXd;

// ============================================================
// Spectral axis
// ============================================================

// Uniformly spaced wavenumber grid: value(n) = start + n * step.
struct WavenumberAxis {
    double start = 0.0;
    double step = 1.0;
    int count = 0;

    double value(int n) const { return start + static_cast<double>(n) * step; }
    bool valid() const { return step > 0.0 && count >= 1; }

    bool operator==(const WavenumberAxis&) const = default;
};

// Index of the band closest to `target`. Ties resolve to the lower index;
// targets outside the grid clamp to the first or last band.
inline int band_index_nearest(const WavenumberAxis& axis, double target) {
    if (!axis.valid())
        throw std::invalid_argument("band_index_nearest: axis must have positive step and count >= 1");
    const double t = (target - axis.start) / axis.step;
    const int lo = std::clamp(static_cast<int>(std::floor(t)), 0, axis.count - 1);
    const int hi = std::min(lo + 1, axis.count - 1);
    const double dlo = std::abs(axis.value(lo) - target);
    const double dhi = std::abs(axis.value(hi) - target);
    return dhi < dlo ? hi : lo;
}

// ============================================================
// Cube and mask containers
// ============================================================

// Dense H x W x N cube of double-precision samples. Storage is row-major
// over (x, y, n) with the band index fastest, so each pixel's spectrum is
// contiguous.
class HyperCube {
public:
    HyperCube() = default;

    HyperCube(int height, int width, const WavenumberAxis& axis)
        : height_(height), width_(width), axis_(axis) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("HyperCube: height and width must be >= 1");
        if (!axis.valid())
            throw std::invalid_argument("HyperCube: axis must have positive step and count >= 1");
        data_.assign(static_cast<std::size_t>(height) * width * axis.count, 0.0);
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int bands() const { return axis_.count; }
    const WavenumberAxis& axis() const { return axis_; }

    std::size_t size() const { return data_.size(); }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& at(int x, int y, int n) { return data_[offset(x, y, n)]; }
    double at(int x, int y, int n) const { return data_[offset(x, y, n)]; }

    // Contiguous view of one pixel's spectrum.
    Eigen::Map<Spectrum> spectrum(int x, int y) {
        return Eigen::Map<Spectrum>(data_.data() + offset(x, y, 0), axis_.count);
    }
    Eigen::Map<const Spectrum> spectrum(int x, int y) const {
        return Eigen::Map<const Spectrum>(data_.data() + offset(x, y, 0), axis_.count);
    }

    bool same_shape(const HyperCube& other) const {
        return height_ == other.height_ && width_ == other.width_ && axis_ == other.axis_;
    }

private:
    std::size_t offset(int x, int y, int n) const {
        return (static_cast<std::size_t>(x) * width_ + y) * axis_.count + n;
    }

    int height_ = 0;
    int width_ = 0;
    WavenumberAxis axis_;
    std::vector<double> data_;
};

// Boolean pixel mask with the same row-major (x, y) layout as HyperCube.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> flags;

    PixelMask() = default;
    PixelMask(int h, int w) : height(h), width(w) {
        if (h < 1 || w < 1)
            throw std::invalid_argument("PixelMask: height and width must be >= 1");
        flags.assign(static_cast<std::size_t>(h) * w, 0);
    }

    bool at(int x, int y) const { return flags[static_cast<std::size_t>(x) * width + y] != 0; }
    void set(int x, int y, bool v) { flags[static_cast<std::size_t>(x) * width + y] = v ? 255 : 0; }

    std::size_t count_true() const {
        std::size_t c = 0;
        for (std::uint8_t f : flags) c += f != 0;
        return c;
    }
};

// ============================================================
// Window extraction
// ============================================================

// Reflect an out-of-range index into [0, n) without repeating the edge
// sample: -1 -> 1, n -> n - 2. A single-element axis collapses to 0.
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i < n ? i : period - i;
}

// k x k spatial neighborhood around one pixel, flattened to a k^2 x N matrix.
// Rows run in row-major window order, so the center pixel is row (k^2 - 1) / 2.
struct WindowSample {
    int x = 0;
    int y = 0;
    int k = 0;
    Eigen::MatrixXd matrix;

    int center_row() const { return (k * k - 1) / 2; }
};

inline WindowSample extract_window(const HyperCube& cube, int x, int y, int k) {
    if (k < 3 || k % 2 == 0)
        throw std::invalid_argument("extract_window: k must be odd and >= 3");
    if (k * k >= cube.bands())
        throw std::invalid_argument("extract_window: window size k^2 must be smaller than the band count");
    if (x < 0 || x >= cube.height() || y < 0 || y >= cube.width())
        throw std::invalid_argument("extract_window: pixel out of range");

    WindowSample w;
    w.x = x;
    w.y = y;
    w.k = k;
    w.matrix.resize(k * k, cube.bands());
    const int r = (k - 1) / 2;
    for (int dx = -r; dx <= r; ++dx) {
        const int sx = mirror_index(x + dx, cube.height());
        for (int dy = -r; dy <= r; ++dy) {
            const int sy = mirror_index(y + dy, cube.width());
            w.matrix.row((dx + r) * k + (dy + r)) = cube.spectrum(sx, sy);
        }
    }
    return w;
}

// Mean squared error between two cubes of identical shape.
inline double mse(const HyperCube& a, const HyperCube& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mse: cubes must have identical shape");
    double acc = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = pa[i] - pb[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace hsnr
