#pragma once

#include <hsnr/cube.hpp>
#include <hsnr/rng.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hsnr {

// ============================================================
// Scene description
// ============================================================

struct SceneSpec {
    int height = 128;
    int width = 128;
    int bands = 128;
    WavenumberAxis axis{900.0, 360.0 / 127.0, 128};

    // Smooth background radiance: per-pixel polynomial in the normalized
    // band coordinate, coefficients bilinearly interpolated from a coarse
    // random grid so they vary smoothly across the image.
    int background_order = 3;
    double background_scale = 1.0;

    // Gas plume: disk with cosine radial falloff, spectrally a Gaussian
    // peak. Negative amplitude models absorption.
    double plume_center_x = 63.5;
    double plume_center_y = 63.5;
    double plume_radius = 18.0;
    double peak_center = 950.0;
    double peak_fwhm = 25.0;
    double peak_amplitude = 1.2;

    double noise_sigma = 0.9486832980505138;  // sqrt(0.9)
    std::uint64_t seed = 42;
};

// Spec with the default parameters rescaled to an arbitrary cube shape.
inline SceneSpec default_scene_spec(int height, int width, int bands) {
    if (height < 1 || width < 1 || bands < 2)
        throw std::invalid_argument("default_scene_spec: need height, width >= 1 and bands >= 2");
    SceneSpec spec;
    spec.height = height;
    spec.width = width;
    spec.bands = bands;
    spec.axis = WavenumberAxis{900.0, 360.0 / (bands - 1), bands};
    spec.plume_center_x = (height - 1) / 2.0;
    spec.plume_center_y = (width - 1) / 2.0;
    spec.plume_radius = std::max(2.0, 0.14 * std::min(height, width));
    return spec;
}

struct SceneBundle {
    HyperCube clean;
    HyperCube noisy;
    PixelMask mask;
    Spectrum target;
};

// ============================================================
// Generation
// ============================================================

namespace detail {

// Tags separating the generator's top-level substreams.
inline constexpr std::uint64_t kBackgroundStream = 0xB6;
inline constexpr std::uint64_t kNoiseStream = 0x11;

inline void validate_scene_spec(const SceneSpec& spec) {
    if (spec.height < 1 || spec.width < 1 || spec.bands < 1)
        throw std::invalid_argument("generate_scene: dimensions must be >= 1");
    if (spec.bands != spec.axis.count)
        throw std::invalid_argument("generate_scene: bands must equal axis.count");
    if (!spec.axis.valid())
        throw std::invalid_argument("generate_scene: invalid axis");
    if (spec.background_order < 0)
        throw std::invalid_argument("generate_scene: background_order must be >= 0");
    if (spec.plume_radius < 1.0)
        throw std::invalid_argument("generate_scene: plume_radius must be >= 1");
    if (!(spec.peak_fwhm > 0.0))
        throw std::invalid_argument("generate_scene: peak_fwhm must be > 0");
    if (spec.noise_sigma < 0.0)
        throw std::invalid_argument("generate_scene: noise_sigma must be >= 0");

    const double nx = std::clamp(spec.plume_center_x, 0.0, spec.height - 1.0);
    const double ny = std::clamp(spec.plume_center_y, 0.0, spec.width - 1.0);
    const double dist = std::hypot(spec.plume_center_x - nx, spec.plume_center_y - ny);
    if (dist >= spec.plume_radius)
        throw std::invalid_argument("generate_scene: plume disk entirely outside image");
}

// Unit-integral-free Gaussian peak shape over the axis (peak value 1).
inline Spectrum peak_shape(const WavenumberAxis& axis, double center, double fwhm) {
    const double s = fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
    Spectrum g(axis.count);
    for (int n = 0; n < axis.count; ++n) {
        const double d = axis.value(n) - center;
        g[n] = std::exp(-d * d / (2.0 * s * s));
    }
    return g;
}

// Cosine falloff over the plume disk: 1 at the center, 0.5 at the rim,
// identically 0 outside. The mask is exactly the falloff > 0.5 region, so
// pixels outside it never see the peak parameters.
inline double plume_falloff(double r, double radius) {
    if (r >= radius) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * r / (2.0 * radius)));
}

}  // namespace detail

// Elementwise i.i.d. Gaussian noise, one RNG substream per pixel.
inline HyperCube add_noise(const HyperCube& cube, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be >= 0");
    HyperCube out = cube;
    if (sigma == 0.0) return out;
    const int w = cube.width();
    for (int x = 0; x < cube.height(); ++x) {
        for (int y = 0; y < w; ++y) {
            GaussianStream g(substream_seed(seed, static_cast<std::uint64_t>(x) * w + y));
            auto s = out.spectrum(x, y);
            for (int n = 0; n < cube.bands(); ++n) s[n] += sigma * g.next();
        }
    }
    return out;
}

inline SceneBundle generate_scene(const SceneSpec& spec) {
    detail::validate_scene_spec(spec);
    const int h = spec.height, w = spec.width, nb = spec.bands;

    SceneBundle bundle{HyperCube(h, w, spec.axis), HyperCube(h, w, spec.axis), PixelMask(h, w), Spectrum()};

    // Coarse grid of polynomial coefficients, one layer per degree. Higher
    // degrees get smaller coefficients so the background stays gentle.
    constexpr int kGrid = 5;
    const int layers = spec.background_order + 1;
    std::vector<double> grid(static_cast<std::size_t>(layers) * kGrid * kGrid);
    {
        GaussianStream g(substream_seed(spec.seed, detail::kBackgroundStream));
        for (int j = 0; j < layers; ++j) {
            const double scale = 1.0 / ((1.0 + j) * (1.0 + j));
            for (int c = 0; c < kGrid * kGrid; ++c)
                grid[static_cast<std::size_t>(j) * kGrid * kGrid + c] = scale * g.next();
        }
    }

    const Spectrum peak = detail::peak_shape(spec.axis, spec.peak_center, spec.peak_fwhm);
    bundle.target = peak / peak.norm();

    std::vector<double> cheb(layers);
    std::vector<double> coeff(layers);
    for (int x = 0; x < h; ++x) {
        const double fx = h > 1 ? static_cast<double>(x) / (h - 1) * (kGrid - 1) : 0.0;
        const int ix = std::min(static_cast<int>(fx), kGrid - 2);
        const double tx = fx - ix;
        for (int y = 0; y < w; ++y) {
            const double fy = w > 1 ? static_cast<double>(y) / (w - 1) * (kGrid - 1) : 0.0;
            const int iy = std::min(static_cast<int>(fy), kGrid - 2);
            const double ty = fy - iy;

            for (int j = 0; j < layers; ++j) {
                const double* layer = grid.data() + static_cast<std::size_t>(j) * kGrid * kGrid;
                const double g00 = layer[ix * kGrid + iy];
                const double g01 = layer[ix * kGrid + iy + 1];
                const double g10 = layer[(ix + 1) * kGrid + iy];
                const double g11 = layer[(ix + 1) * kGrid + iy + 1];
                coeff[j] = (1 - tx) * ((1 - ty) * g00 + ty * g01) + tx * ((1 - ty) * g10 + ty * g11);
            }

            const double r = std::hypot(x - spec.plume_center_x, y - spec.plume_center_y);
            const double falloff = detail::plume_falloff(r, spec.plume_radius);
            const bool masked = falloff > 0.5;
            bundle.mask.set(x, y, masked);

            auto clean = bundle.clean.spectrum(x, y);
            for (int n = 0; n < nb; ++n) {
                const double u = nb > 1 ? 2.0 * n / (nb - 1) - 1.0 : 0.0;
                cheb[0] = 1.0;
                if (layers > 1) cheb[1] = u;
                for (int j = 2; j < layers; ++j) cheb[j] = 2.0 * u * cheb[j - 1] - cheb[j - 2];
                double v = 0.0;
                for (int j = 0; j < layers; ++j) v += coeff[j] * cheb[j];
                v *= spec.background_scale;
                if (masked) v += spec.peak_amplitude * falloff * peak[n];
                // Quantize through the storage precision so that saved and
                // in-memory cubes agree exactly.
                clean[n] = static_cast<double>(static_cast<float>(v));
            }
        }
    }

    bundle.noisy = bundle.clean;
    if (spec.noise_sigma > 0.0) {
        const std::uint64_t noise_seed = substream_seed(spec.seed, detail::kNoiseStream);
        for (int x = 0; x < h; ++x) {
            for (int y = 0; y < w; ++y) {
                GaussianStream g(substream_seed(noise_seed, static_cast<std::uint64_t>(x) * w + y));
                auto s = bundle.noisy.spectrum(x, y);
                for (int n = 0; n < nb; ++n)
                    s[n] = static_cast<double>(static_cast<float>(s[n] + spec.noise_sigma * g.next()));
            }
        }
    }
    return bundle;
}

// ============================================================
// JSON round-trip for scene specs
// ============================================================

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
    j = nlohmann::json{
        {"height", s.height},
        {"width", s.width},
        {"bands", s.bands},
        {"axis", {{"start", s.axis.start}, {"step", s.axis.step}, {"count", s.axis.count}}},
        {"background_order", s.background_order},
        {"background_scale", s.background_scale},
        {"plume_center_x", s.plume_center_x},
        {"plume_center_y", s.plume_center_y},
        {"plume_radius", s.plume_radius},
        {"peak_center", s.peak_center},
        {"peak_fwhm", s.peak_fwhm},
        {"peak_amplitude", s.peak_amplitude},
        {"noise_sigma", s.noise_sigma},
        {"seed", s.seed},
    };
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.bands = j.value("bands", s.bands);
    if (j.contains("axis")) {
        const auto& a = j.at("axis");
        s.axis.start = a.value("start", s.axis.start);
        s.axis.step = a.value("step", s.axis.step);
        s.axis.count = a.value("count", s.bands);
    } else {
        s.axis.count = s.bands;
    }
    s.background_order = j.value("background_order", s.background_order);
    s.background_scale = j.value("background_scale", s.background_scale);
    s.plume_center_x = j.value("plume_center_x", s.plume_center_x);
    s.plume_center_y = j.value("plume_center_y", s.plume_center_y);
    s.plume_radius = j.value("plume_radius", s.plume_radius);
    s.peak_center = j.value("peak_center", s.peak_center);
    s.peak_fwhm = j.value("peak_fwhm", s.peak_fwhm);
    s.peak_amplitude = j.value("peak_amplitude", s.peak_amplitude);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.seed = j.value("seed", s.seed);
}

}  // namespace hsnr
