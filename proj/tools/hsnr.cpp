// Command-line frontend: synth, denoise, detect, roc, bench, flops,
// spectra, and the end-to-end pipeline. Exit codes: 0 success, 2 usage
// error, 1 runtime error; errors go to stderr as single-line JSON with a
// "stage" field.

#include <hsnr/baselines.hpp>
#include <hsnr/cost.hpp>
#include <hsnr/cube.hpp>
#include <hsnr/cube_io.hpp>
#include <hsnr/detect.hpp>
#include <hsnr/mmse.hpp>
#include <hsnr/pipeline.hpp>
#include <hsnr/synth.hpp>
#include <hsnr/version.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

namespace fs = std::filesystem;

void print_error(const std::string& stage, const std::string& msg) {
    const nlohmann::json j = {{"stage", stage}, {"error", msg}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

// Scene parameters shared by `synth` and `pipeline`.
struct SceneFlags {
    hsnr::SceneSpec scene;
    std::string spec_path;
    CLI::Option* o_bands = nullptr;
    CLI::Option* o_axis_start = nullptr;
    CLI::Option* o_axis_step = nullptr;

    void attach(CLI::App* cmd) {
        cmd->add_option("--spec", spec_path, "scene spec JSON file (flags override its fields)");
        cmd->add_option("--height", scene.height, "scene height")->capture_default_str();
        cmd->add_option("--width", scene.width, "scene width")->capture_default_str();
        o_bands = cmd->add_option("--bands", scene.bands, "band count")->capture_default_str();
        o_axis_start = cmd->add_option("--axis-start", scene.axis.start, "first band wavenumber (cm^-1)")
                           ->capture_default_str();
        o_axis_step = cmd->add_option("--axis-step", scene.axis.step, "wavenumber increment (cm^-1)")
                          ->capture_default_str();
        cmd->add_option("--seed", scene.seed, "RNG seed")->capture_default_str();
        cmd->add_option("--noise-sigma", scene.noise_sigma, "noise standard deviation")->capture_default_str();
        cmd->add_option("--background-order", scene.background_order, "background polynomial degree")
            ->capture_default_str();
        cmd->add_option("--background-scale", scene.background_scale, "background amplitude scale")
            ->capture_default_str();
        cmd->add_option("--plume-center-x", scene.plume_center_x, "plume center row")->capture_default_str();
        cmd->add_option("--plume-center-y", scene.plume_center_y, "plume center column")->capture_default_str();
        cmd->add_option("--plume-radius", scene.plume_radius, "plume disk radius (pixels)")->capture_default_str();
        cmd->add_option("--peak-center", scene.peak_center, "gas peak center (cm^-1)")->capture_default_str();
        cmd->add_option("--peak-fwhm", scene.peak_fwhm, "gas peak FWHM (cm^-1)")->capture_default_str();
        cmd->add_option("--peak-amplitude", scene.peak_amplitude, "gas peak amplitude")->capture_default_str();
    }

    // Rebuild the derived axis fields after parsing. An explicitly given
    // band count without an explicit step keeps the default 900-1260
    // spectral range.
    void finalize() {
        if (!o_axis_step->count() && scene.bands >= 2 && scene.bands != scene.axis.count)
            scene.axis.step = 360.0 / (scene.bands - 1);
        scene.axis.count = scene.bands;
    }
};

// Apply --spec files before CLI11 writes flag values over the defaults, so
// explicit flags win over the file contents.
void preload_scene_spec(int argc, char** argv, hsnr::SceneSpec& scene) {
    for (int i = 0; i < argc; ++i) {
        const std::string arg = argv[i];
        std::string value;
        if (arg == "--spec" && i + 1 < argc) value = argv[i + 1];
        else if (arg.rfind("--spec=", 0) == 0) value = arg.substr(7);
        else continue;
        const nlohmann::json j = nlohmann::json::parse(hsnr::detail::read_file_bytes(value, "synth"));
        hsnr::from_json(j, scene);
        return;
    }
}

void write_scene_files(const hsnr::SceneSpec& spec, const hsnr::SceneBundle& bundle, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto path = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
    hsnr::save_cube(bundle.clean, path("clean.hcb"));
    hsnr::save_cube(bundle.noisy, path("noisy.hcb"));
    hsnr::save_mask_pgm(bundle.mask, path("mask.pgm"));
    hsnr::save_spectrum_csv(spec.axis, bundle.target, path("target.csv"));
    hsnr::detail::write_file_bytes(path("scene.json"), nlohmann::json(spec).dump(2) + "\n", "synth");
}

std::pair<int, int> parse_pixel(const std::string& s) {
    int x = 0, y = 0;
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d,%d%c", &x, &y, &tail) != 2)
        throw std::invalid_argument("bad pixel '" + s + "' (expected x,y)");
    return {x, y};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperspectral denoising and gas-plume detection toolkit"};
    app.set_version_flag("--version", hsnr::kVersion);
    // Long-form help only; a short -h would collide with the flops --h flag.
    app.set_help_flag("--help", "print help and exit");
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker threads for per-pixel stages")->capture_default_str();

    std::string active_stage = "usage";

    const auto make_sub = [&](const char* name, const char* desc) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->set_help_flag("--help", "print help and exit");
        sub->fallthrough();
        return sub;
    };

    // ---- synth ----
    auto* synth = make_sub("synth", "generate a synthetic scene");
    SceneFlags synth_flags;
    synth_flags.attach(synth);
    std::string synth_out_dir;
    synth->add_option("--out-dir", synth_out_dir, "output directory")->required();
    synth->callback([&] {
        active_stage = "synth";
        synth_flags.finalize();
        write_scene_files(synth_flags.scene, hsnr::generate_scene(synth_flags.scene), synth_out_dir);
    });

    // ---- denoise ----
    auto* denoise = make_sub("denoise", "denoise a cube");
    std::string dn_algo, dn_in, dn_out, dn_kernel = "gaussian";
    double dn_sigma = hsnr::default_noise_sigma(), dn_weight_std = 1.0, dn_rcond = 1e-10;
    double dn_spatial_std = hsnr::GaussianFilterConfig{}.spatial_std;
    double dn_snr_min = 2.0;
    int dn_k = 3, dn_retained = 0;
    bool dn_clamp = false;
    denoise->add_option("--algo", dn_algo, "mmse, gaussian, or mnf")
        ->required()
        ->check(CLI::IsMember({"mmse", "gaussian", "mnf"}));
    denoise->add_option("--k", dn_k, "window / kernel edge length")->capture_default_str();
    auto* o_sigma = denoise->add_option("--sigma", dn_sigma, "noise std (omit to estimate from the cube)");
    denoise->add_option("--weight-std", dn_weight_std, "spatial weight std (mmse)")->capture_default_str();
    denoise->add_option("--rcond", dn_rcond, "pseudo-inverse relative cutoff (mmse)")->capture_default_str();
    denoise->add_flag("--clamp", dn_clamp, "clamp negative shrunk singular values (mmse)");
    denoise->add_option("--kernel", dn_kernel, "spatial weight kind (mmse)")
        ->check(CLI::IsMember({"gaussian", "identity"}))
        ->capture_default_str();
    denoise->add_option("--spatial-std", dn_spatial_std, "kernel std (gaussian)")->capture_default_str();
    auto* o_retained = denoise->add_option("--retained", dn_retained, "retained component count (mnf)");
    denoise->add_option("--snr-min", dn_snr_min, "auto retention threshold (mnf)")->capture_default_str();
    denoise->add_option("input", dn_in, "input cube")->required();
    denoise->add_option("output", dn_out, "output cube")->required();
    denoise->callback([&] {
        active_stage = "denoise";
        const hsnr::HyperCube in = hsnr::load_cube(dn_in);
        hsnr::HyperCube out;
        if (dn_algo == "mmse") {
            hsnr::MmseConfig cfg;
            cfg.k = dn_k;
            cfg.weight_std = dn_weight_std;
            cfg.rcond = dn_rcond;
            cfg.clamp_negative = dn_clamp;
            cfg.kernel = dn_kernel == "identity" ? hsnr::WeightKind::identity : hsnr::WeightKind::gaussian;
            if (o_sigma->count()) {
                cfg.sigma = dn_sigma;
            } else {
                cfg.sigma = hsnr::estimate_sigma(in);
                std::printf("estimated sigma: %.6g\n", cfg.sigma);
            }
            out = hsnr::denoise_mmse(in, cfg, threads);
        } else if (dn_algo == "gaussian") {
            out = hsnr::denoise_gaussian(in, {dn_k, dn_spatial_std}, threads);
        } else {
            hsnr::MnfConfig cfg;
            cfg.k = dn_k;
            cfg.snr_min = dn_snr_min;
            if (o_retained->count()) cfg.retained = dn_retained;
            out = hsnr::denoise_mnf(in, cfg, threads);
        }
        hsnr::save_cube(out, dn_out);
    });

    // ---- detect ----
    auto* detect = make_sub("detect", "ASD detection scores for a target spectrum");
    std::string det_cube, det_target, det_exclude, det_out;
    detect->add_option("--cube", det_cube, "input cube")->required();
    detect->add_option("--target", det_target, "target spectrum CSV")->required();
    detect->add_option("--exclude", det_exclude, "PGM mask of pixels excluded from background stats");
    detect->add_option("--out", det_out, "output score file (.f32 + JSON sidecar)")->required();
    detect->callback([&] {
        active_stage = "detect";
        const hsnr::HyperCube cube = hsnr::load_cube(det_cube);
        const hsnr::SpectrumCsv target = hsnr::load_spectrum_csv(det_target);
        if (target.values.size() != cube.bands())
            throw std::invalid_argument("detect: target length does not match cube bands");
        std::optional<hsnr::PixelMask> exclude;
        if (!det_exclude.empty()) exclude = hsnr::load_mask_pgm(det_exclude);
        hsnr::BackgroundStats stats;
        const hsnr::DetectionMap map =
            hsnr::detect_asd(cube, target.values, exclude ? &*exclude : nullptr, threads, &stats);
        hsnr::save_scores_f32(map, det_out, stats.ridge);
    });

    // ---- roc ----
    auto* roc_cmd = make_sub("roc", "ROC curve and AUC from a score map");
    std::string roc_scores, roc_truth, roc_out;
    roc_cmd->add_option("--scores", roc_scores, "score file from detect")->required();
    roc_cmd->add_option("--truth", roc_truth, "ground-truth PGM mask")->required();
    roc_cmd->add_option("--out", roc_out, "output ROC CSV")->required();
    roc_cmd->callback([&] {
        active_stage = "roc";
        const hsnr::DetectionMap map = hsnr::load_scores_f32(roc_scores);
        const hsnr::PixelMask truth = hsnr::load_mask_pgm(roc_truth);
        const hsnr::RocCurve curve = hsnr::roc(map, truth);
        hsnr::save_roc_csv(curve, roc_out);
        std::printf("auc=%s\n", hsnr::detail::fmt_double(curve.auc).c_str());
    });

    // ---- bench ----
    auto* bench = make_sub("bench", "wall-time benchmark of the denoisers");
    std::string bench_cube_path, bench_algos = "mmse,gaussian,mnf", bench_out;
    int bench_reps = 5, bench_k = 3, bench_retained = 0;
    double bench_sigma = hsnr::default_noise_sigma(), bench_weight_std = 1.0, bench_rcond = 1e-10;
    double bench_spatial_std = hsnr::GaussianFilterConfig{}.spatial_std, bench_snr_min = 2.0;
    bench->add_option("--cube", bench_cube_path, "input cube")->required();
    bench->add_option("--algos", bench_algos, "comma-separated algorithm list")->capture_default_str();
    bench->add_option("--k", bench_k, "window / kernel edge length")->capture_default_str();
    bench->add_option("--sigma", bench_sigma, "noise std (mmse)")->capture_default_str();
    bench->add_option("--weight-std", bench_weight_std, "spatial weight std (mmse)")->capture_default_str();
    bench->add_option("--rcond", bench_rcond, "pseudo-inverse cutoff (mmse)")->capture_default_str();
    bench->add_option("--spatial-std", bench_spatial_std, "kernel std (gaussian)")->capture_default_str();
    auto* o_bench_retained = bench->add_option("--retained", bench_retained, "retained components (mnf)");
    bench->add_option("--snr-min", bench_snr_min, "auto retention threshold (mnf)")->capture_default_str();
    bench->add_option("--reps", bench_reps, "repetitions (median reported)")->capture_default_str();
    bench->add_option("--out", bench_out, "output CSV path (also printed)");
    bench->callback([&] {
        active_stage = "bench";
        const hsnr::HyperCube cube = hsnr::load_cube(bench_cube_path);
        std::vector<hsnr::BenchRecord> records;
        std::stringstream names(bench_algos);
        std::string name;
        while (std::getline(names, name, ',')) {
            if (name.empty()) continue;
            switch (hsnr::algo_from_name(name)) {
                case hsnr::DenoiseAlgo::mmse: {
                    hsnr::MmseConfig cfg;
                    cfg.k = bench_k;
                    cfg.sigma = bench_sigma;
                    cfg.weight_std = bench_weight_std;
                    cfg.rcond = bench_rcond;
                    cfg.clamp_negative = true;
                    records.push_back(hsnr::run_benchmark(cube, cfg, bench_reps, threads));
                    break;
                }
                case hsnr::DenoiseAlgo::gaussian:
                    records.push_back(
                        hsnr::run_benchmark(cube, hsnr::GaussianFilterConfig{bench_k, bench_spatial_std},
                                            bench_reps, threads));
                    break;
                case hsnr::DenoiseAlgo::mnf: {
                    hsnr::MnfConfig cfg;
                    cfg.k = bench_k;
                    cfg.snr_min = bench_snr_min;
                    if (o_bench_retained->count()) cfg.retained = bench_retained;
                    records.push_back(hsnr::run_benchmark(cube, cfg, bench_reps, threads));
                    break;
                }
            }
        }
        const std::string report = hsnr::bench_report(records);
        std::fputs(report.c_str(), stdout);
        if (!bench_out.empty()) hsnr::detail::write_file_bytes(bench_out, report, "bench");
    });

    // ---- flops ----
    auto* flops = make_sub("flops", "FLOP cost model values");
    std::uint64_t f_h = 128, f_w = 128, f_n = 128, f_k = 3;
    flops->add_option("--h", f_h, "image height")->capture_default_str();
    flops->add_option("--w", f_w, "image width")->capture_default_str();
    flops->add_option("--n", f_n, "band count")->capture_default_str();
    flops->add_option("--k", f_k, "window edge length")->capture_default_str();
    flops->callback([&] {
        active_stage = "flops";
        std::printf("algorithm,model_flops\n");
        for (const auto algo : {hsnr::DenoiseAlgo::gaussian, hsnr::DenoiseAlgo::mmse, hsnr::DenoiseAlgo::mnf})
            std::printf("%s,%llu\n", hsnr::algo_name(algo),
                        static_cast<unsigned long long>(hsnr::model_flops({algo, f_h, f_w, f_n, f_k})));
    });

    // ---- spectra ----
    auto* spectra = make_sub("spectra", "export pixel spectra from one or more cubes as CSV");
    std::vector<std::string> sp_cubes, sp_pixels;
    std::string sp_out;
    spectra->add_option("--cube", sp_cubes, "cube file (repeatable)")->required();
    spectra->add_option("--pixel", sp_pixels, "pixel as x,y (repeatable)")->required();
    spectra->add_option("--out", sp_out, "output CSV")->required();
    spectra->callback([&] {
        active_stage = "spectra";
        std::vector<std::pair<int, int>> pixels;
        for (const std::string& p : sp_pixels) pixels.push_back(parse_pixel(p));
        hsnr::write_spectra_csv(sp_cubes, pixels, sp_out);
    });

    // ---- pipeline ----
    auto* pipeline = make_sub("pipeline", "synth + denoise + detect + roc + bench end to end");
    SceneFlags pipe_flags;
    pipe_flags.attach(pipeline);
    std::string pipe_out_dir, pipe_kernel = "gaussian";
    int pipe_k = 3, pipe_reps = 5, pipe_retained = 0;
    double pipe_sigma = 0.0, pipe_weight_std = 1.0, pipe_rcond = 1e-10, pipe_snr_min = 2.0;
    double pipe_spatial_std = hsnr::GaussianFilterConfig{}.spatial_std;
    bool pipe_clamp = true;
    pipeline->add_option("--out-dir", pipe_out_dir, "output directory")->required();
    pipeline->add_option("--k", pipe_k, "window / kernel edge length")->capture_default_str();
    auto* o_pipe_sigma = pipeline->add_option("--sigma", pipe_sigma, "denoiser sigma (default: scene noise sigma)");
    pipeline->add_option("--weight-std", pipe_weight_std, "spatial weight std (mmse)")->capture_default_str();
    pipeline->add_option("--rcond", pipe_rcond, "pseudo-inverse cutoff (mmse)")->capture_default_str();
    pipeline->add_flag("--clamp,!--no-clamp", pipe_clamp, "clamp negative shrunk singular values (default on)");
    pipeline->add_option("--kernel", pipe_kernel, "spatial weight kind (mmse)")
        ->check(CLI::IsMember({"gaussian", "identity"}))
        ->capture_default_str();
    pipeline->add_option("--spatial-std", pipe_spatial_std, "kernel std (gaussian)")->capture_default_str();
    auto* o_pipe_retained = pipeline->add_option("--retained", pipe_retained, "retained components (mnf)");
    pipeline->add_option("--snr-min", pipe_snr_min, "auto retention threshold (mnf)")->capture_default_str();
    pipeline->add_option("--reps", pipe_reps, "benchmark repetitions")->capture_default_str();
    pipeline->callback([&] {
        active_stage = "pipeline";
        pipe_flags.finalize();
        hsnr::PipelineConfig cfg;
        cfg.scene = pipe_flags.scene;
        cfg.mmse.k = pipe_k;
        cfg.mmse.sigma = o_pipe_sigma->count() ? pipe_sigma : cfg.scene.noise_sigma;
        cfg.mmse.weight_std = pipe_weight_std;
        cfg.mmse.rcond = pipe_rcond;
        cfg.mmse.clamp_negative = pipe_clamp;
        cfg.mmse.kernel = pipe_kernel == "identity" ? hsnr::WeightKind::identity : hsnr::WeightKind::gaussian;
        cfg.gaussian.k = pipe_k;
        cfg.gaussian.spatial_std = pipe_spatial_std;
        cfg.mnf.k = pipe_k;
        cfg.mnf.snr_min = pipe_snr_min;
        if (o_pipe_retained->count()) cfg.mnf.retained = pipe_retained;
        cfg.bench_reps = pipe_reps;
        cfg.threads = threads;
        const nlohmann::json summary = hsnr::run_pipeline(cfg, pipe_out_dir);
        std::printf("%s\n", summary.dump().c_str());
    });

    try {
        if (argc > 1) {
            const std::string sub = argv[1];
            if (sub == "synth" || sub == "pipeline") {
                active_stage = sub;
                preload_scene_spec(argc, argv, sub == "synth" ? synth_flags.scene : pipe_flags.scene);
                active_stage = "usage";
            }
        }
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    } catch (const hsnr::StageError& e) {
        print_error(e.stage, e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        print_error(active_stage, e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error(active_stage, e.what());
        return 1;
    }
    return 0;
}
