#pragma once

#include <hsnr/baselines.hpp>
#include <hsnr/cost.hpp>
#include <hsnr/cube.hpp>
#include <hsnr/cube_io.hpp>
#include <hsnr/detect.hpp>
#include <hsnr/mmse.hpp>
#include <hsnr/synth.hpp>

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsnr {

// Error carrying the pipeline stage that failed, so the CLI can report
// which step to look at.
struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string stage_name, const std::string& msg) : std::runtime_error(msg), stage(std::move(stage_name)) {}
};

struct PipelineConfig {
    SceneSpec scene;
    MmseConfig mmse;
    GaussianFilterConfig gaussian;
    MnfConfig mnf;
    int bench_reps = 5;
    int threads = 1;

    // Clamped shrinkage is the recommended setting for actual denoising;
    // the unclamped default on MmseConfig exists for the estimator
    // identities.
    PipelineConfig() { mmse.clamp_negative = true; }
};

namespace detail {

template <class Fn>
auto pipeline_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Full experiment: synthesize a scene, denoise it three ways, run ASD
// detection and ROC scoring on raw and denoised cubes, benchmark the
// denoisers, and leave every artifact plus a summary JSON in out_dir.
// Timing values live only under summary["timings"] and in bench.csv;
// everything else is a pure function of the configuration.
inline nlohmann::json run_pipeline(const PipelineConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;

    detail::pipeline_stage("setup", [&] {
        fs::create_directories(out_dir);
        return 0;
    });
    const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

    nlohmann::json summary;
    nlohmann::json timings;

    // --- synth ---
    auto t0 = std::chrono::steady_clock::now();
    const SceneBundle scene = detail::pipeline_stage("synth", [&] {
        SceneBundle bundle = generate_scene(cfg.scene);
        save_cube(bundle.clean, path("clean.hcb"));
        save_cube(bundle.noisy, path("noisy.hcb"));
        save_mask_pgm(bundle.mask, path("mask.pgm"));
        save_spectrum_csv(cfg.scene.axis, bundle.target, path("target.csv"));
        detail::write_file_bytes(path("scene.json"), nlohmann::json(cfg.scene).dump(2) + "\n", "run_pipeline");
        return bundle;
    });
    timings["synth_s"] = detail::seconds_since(t0);

    // --- denoise ---
    struct Variant {
        std::string name;
        const HyperCube* cube;
    };
    HyperCube den_mmse, den_gaussian, den_mnf;
    t0 = std::chrono::steady_clock::now();
    detail::pipeline_stage("denoise", [&] {
        den_mmse = denoise_mmse(scene.noisy, cfg.mmse, cfg.threads);
        save_cube(den_mmse, path("denoised_mmse.hcb"));
        den_gaussian = denoise_gaussian(scene.noisy, cfg.gaussian, cfg.threads);
        save_cube(den_gaussian, path("denoised_gaussian.hcb"));
        den_mnf = denoise_mnf(scene.noisy, cfg.mnf, cfg.threads);
        save_cube(den_mnf, path("denoised_mnf.hcb"));
        return 0;
    });
    timings["denoise_s"] = detail::seconds_since(t0);

    summary["sigma_estimate"] = detail::pipeline_stage("denoise", [&] { return estimate_sigma(scene.noisy); });
    summary["mse_noisy"] = mse(scene.noisy, scene.clean);
    summary["mse_mmse"] = mse(den_mmse, scene.clean);
    summary["mse_gaussian"] = mse(den_gaussian, scene.clean);
    summary["mse_mnf"] = mse(den_mnf, scene.clean);

    // --- detect + roc ---
    const std::vector<Variant> variants = {
        {"raw", &scene.noisy}, {"mmse", &den_mmse}, {"gaussian", &den_gaussian}, {"mnf", &den_mnf}};
    t0 = std::chrono::steady_clock::now();
    for (const Variant& v : variants) {
        DetectionMap map = detail::pipeline_stage("detect", [&] {
            BackgroundStats stats;
            DetectionMap m = detect_asd(*v.cube, scene.target, nullptr, cfg.threads, &stats);
            // Quantize through the storage precision so the saved scores
            // and the ROC computed from them agree with a later
            // `roc` run on the files.
            for (double& s : m.scores) s = static_cast<double>(static_cast<float>(s));
            save_scores_f32(m, path("scores_" + v.name + ".f32"), stats.ridge);
            return m;
        });
        detail::pipeline_stage("roc", [&] {
            const RocCurve curve = roc(map, scene.mask);
            save_roc_csv(curve, path("roc_" + v.name + ".csv"));
            summary["auc_" + v.name] = curve.auc;
            return 0;
        });
    }
    timings["detect_roc_s"] = detail::seconds_since(t0);

    // --- bench ---
    t0 = std::chrono::steady_clock::now();
    detail::pipeline_stage("bench", [&] {
        const std::vector<BenchRecord> records = {
            run_benchmark(scene.noisy, cfg.gaussian, cfg.bench_reps, cfg.threads),
            run_benchmark(scene.noisy, cfg.mmse, cfg.bench_reps, cfg.threads),
            run_benchmark(scene.noisy, cfg.mnf, cfg.bench_reps, cfg.threads),
        };
        detail::write_file_bytes(path("bench.csv"), bench_report(records), "run_pipeline");
        for (const BenchRecord& r : records) timings["bench_" + r.algorithm + "_s"] = r.wall_time;
        return 0;
    });
    timings["bench_total_s"] = detail::seconds_since(t0);

    // --- summary ---
    detail::pipeline_stage("summary", [&] {
        summary["scene"] = cfg.scene;
        summary["params"] = {
            {"k", cfg.mmse.k},
            {"sigma", cfg.mmse.sigma},
            {"weight_std", cfg.mmse.weight_std},
            {"rcond", cfg.mmse.rcond},
            {"clamp_negative", cfg.mmse.clamp_negative},
            {"kernel", cfg.mmse.kernel == WeightKind::identity ? "identity" : "gaussian"},
            {"gaussian_k", cfg.gaussian.k},
            {"spatial_std", cfg.gaussian.spatial_std},
            {"mnf_snr_min", cfg.mnf.snr_min},
            {"mnf_retained", cfg.mnf.retained ? nlohmann::json(*cfg.mnf.retained) : nlohmann::json(nullptr)},
            {"bench_reps", cfg.bench_reps},
            {"threads", cfg.threads},
        };
        summary["timings"] = timings;
        detail::write_file_bytes(path("summary.json"), summary.dump(2) + "\n", "run_pipeline");
        return 0;
    });
    return summary;
}

// Long-form CSV of selected pixels' spectra across several cubes, for
// overlaying raw and denoised spectra in a plot.
inline void write_spectra_csv(const std::vector<std::string>& cube_paths,
                              const std::vector<std::pair<int, int>>& pixels, const std::string& out_path) {
    if (cube_paths.empty()) throw std::invalid_argument("spectra: need at least one cube");
    if (pixels.empty()) throw std::invalid_argument("spectra: need at least one pixel");

    std::vector<HyperCube> cubes;
    std::vector<std::string> stems;
    cubes.reserve(cube_paths.size());
    for (const std::string& p : cube_paths) {
        cubes.push_back(load_cube(p));
        stems.push_back(std::filesystem::path(p).stem().string());
    }
    for (const auto& [x, y] : pixels)
        for (const HyperCube& c : cubes)
            if (x < 0 || x >= c.height() || y < 0 || y >= c.width())
                throw std::invalid_argument("spectra: pixel (" + std::to_string(x) + "," + std::to_string(y) +
                                            ") out of range");

    std::string out = "source,x,y,wavenumber,value\n";
    for (std::size_t ci = 0; ci < cubes.size(); ++ci) {
        const HyperCube& c = cubes[ci];
        for (const auto& [x, y] : pixels) {
            const auto s = c.spectrum(x, y);
            for (int n = 0; n < c.bands(); ++n)
                out += stems[ci] + "," + std::to_string(x) + "," + std::to_string(y) + "," +
                       detail::fmt_double(c.axis().value(n)) + "," + detail::fmt_double(s[n]) + "\n";
        }
    }
    detail::write_file_bytes(out_path, out, "write_spectra_csv");
}

}  // namespace hsnr
