#include <catch2/catch_amalgamated.hpp>

#include <hsnr/cube_io.hpp>
#include <hsnr/detect.hpp>

#include <json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path temp_dir() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "hsnr_test_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in.good()) return {};
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out = temp_dir() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err = temp_dir() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;

    const std::string cmd =
        std::string("\"") + HSNR_CLI_PATH + "\" " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());

    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// Errors must be a single JSON line on stderr with stage and error fields.
nlohmann::json parse_error_line(const RunResult& r) {
    REQUIRE(!r.err.empty());
    REQUIRE(r.err.back() == '\n');
    REQUIRE(r.err.find('\n') == r.err.size() - 1);
    return nlohmann::json::parse(r.err);
}

const std::string kSceneArgs =
    "--height 16 --width 16 --bands 32 "
    "--plume-center-x 7.5 --plume-center-y 7.5 --plume-radius 4 --seed 777";

// Shared scene directory generated once and reused by the later tests.
fs::path scene_dir() {
    static const fs::path dir = [] {
        const fs::path p = temp_dir() / "scene1";
        const RunResult r = run_cli("synth --out-dir " + p.string() + " " + kSceneArgs);
        REQUIRE(r.exit_code == 0);
        return p;
    }();
    return dir;
}

}  // namespace

// ============================================================
// Global surface
// ============================================================

TEST_CASE("cli reports its version") {
    const RunResult r = run_cli("--version");
    CHECK(r.exit_code == 0);
    CHECK(r.out == "1.0.0\n");
}

TEST_CASE("cli help lists the subcommands") {
    const RunResult r = run_cli("--help");
    CHECK(r.exit_code == 0);
    for (const char* sub : {"synth", "denoise", "detect", "roc", "bench", "flops", "spectra", "pipeline"})
        CHECK(r.out.find(sub) != std::string::npos);
}

TEST_CASE("usage errors exit 2 with a json line on stderr") {
    const RunResult none = run_cli("");
    CHECK(none.exit_code == 2);
    CHECK(parse_error_line(none).at("stage") == "usage");

    const RunResult bogus = run_cli("flops --bogus 3");
    CHECK(bogus.exit_code == 2);
    const nlohmann::json e = parse_error_line(bogus);
    CHECK(e.at("stage") == "usage");
    CHECK(!e.at("error").get<std::string>().empty());

    const RunResult algo = run_cli("denoise --algo median in.hcb out.hcb");
    CHECK(algo.exit_code == 2);
    CHECK(parse_error_line(algo).at("stage") == "usage");
}

// ============================================================
// flops
// ============================================================

TEST_CASE("flops prints the model table for the default shape") {
    const RunResult r = run_cli("flops");
    CHECK(r.exit_code == 0);
    CHECK(r.out ==
          "algorithm,model_flops\n"
          "gaussian,37748736\n"
          "mmse,751140864\n"
          "mnf,882524160\n");
}

TEST_CASE("flops rejects an even window") {
    const RunResult r = run_cli("flops --k 4");
    CHECK(r.exit_code == 2);
    CHECK(parse_error_line(r).at("stage") == "flops");
}

// ============================================================
// synth
// ============================================================

TEST_CASE("synth writes a complete scene and is reproducible") {
    const fs::path dir1 = scene_dir();
    for (const char* name : {"clean.hcb", "noisy.hcb", "mask.pgm", "target.csv", "scene.json"})
        CHECK(fs::exists(dir1 / name));

    const nlohmann::json scene = nlohmann::json::parse(slurp(dir1 / "scene.json"));
    CHECK(scene.at("height") == 16);
    CHECK(scene.at("bands") == 32);
    CHECK(scene.at("seed") == 777);

    const fs::path dir2 = temp_dir() / "scene2";
    const RunResult r2 = run_cli("synth --out-dir " + dir2.string() + " " + kSceneArgs);
    REQUIRE(r2.exit_code == 0);
    for (const char* name : {"clean.hcb", "noisy.hcb", "mask.pgm", "target.csv", "scene.json"})
        CHECK(slurp(dir1 / name) == slurp(dir2 / name));
}

TEST_CASE("synth accepts a spec file and lets flags override it") {
    const fs::path dir1 = scene_dir();
    const fs::path spec = dir1 / "scene.json";

    const fs::path dir3 = temp_dir() / "scene3";
    const RunResult same = run_cli("synth --out-dir " + dir3.string() + " --spec " + spec.string());
    REQUIRE(same.exit_code == 0);
    CHECK(slurp(dir1 / "noisy.hcb") == slurp(dir3 / "noisy.hcb"));

    const fs::path dir4 = temp_dir() / "scene4";
    const RunResult reseeded =
        run_cli("synth --out-dir " + dir4.string() + " --spec " + spec.string() + " --seed 888");
    REQUIRE(reseeded.exit_code == 0);
    CHECK(slurp(dir1 / "noisy.hcb") != slurp(dir4 / "noisy.hcb"));
    CHECK(nlohmann::json::parse(slurp(dir4 / "scene.json")).at("seed") == 888);
}

TEST_CASE("synth with a missing spec file fails in the synth stage") {
    const RunResult r = run_cli("synth --out-dir " + (temp_dir() / "nope").string() + " --spec " +
                                (temp_dir() / "missing_spec.json").string());
    CHECK(r.exit_code == 1);
    CHECK(parse_error_line(r).at("stage") == "synth");
}

// ============================================================
// denoise
// ============================================================

TEST_CASE("denoise mmse lowers the error against the clean cube") {
    const fs::path dir = scene_dir();
    const fs::path out = temp_dir() / "denoised.hcb";
    const RunResult r = run_cli("denoise --algo mmse --sigma 0.9486832980505138 --clamp " +
                                (dir / "noisy.hcb").string() + " " + out.string());
    REQUIRE(r.exit_code == 0);

    const hsnr::HyperCube clean = hsnr::load_cube((dir / "clean.hcb").string());
    const hsnr::HyperCube noisy = hsnr::load_cube((dir / "noisy.hcb").string());
    const hsnr::HyperCube denoised = hsnr::load_cube(out.string());
    CHECK(hsnr::mse(denoised, clean) < hsnr::mse(noisy, clean));
}

TEST_CASE("denoise estimates sigma when the flag is omitted") {
    const fs::path dir = scene_dir();
    const fs::path out = temp_dir() / "denoised_est.hcb";
    const RunResult r =
        run_cli("denoise --algo mmse --clamp " + (dir / "noisy.hcb").string() + " " + out.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.rfind("estimated sigma: ", 0) == 0);

    double est = 0.0;
    REQUIRE(std::sscanf(r.out.c_str(), "estimated sigma: %lf", &est) == 1);
    CHECK(est > 0.5);
    CHECK(est < 1.5);
}

TEST_CASE("denoise with a missing input fails in the denoise stage") {
    const RunResult r = run_cli("denoise --algo gaussian " + (temp_dir() / "absent.hcb").string() + " " +
                                (temp_dir() / "never.hcb").string());
    CHECK(r.exit_code == 1);
    CHECK(parse_error_line(r).at("stage") == "denoise");
}

// ============================================================
// detect + roc
// ============================================================

TEST_CASE("detect and roc chain produces scores and a curve") {
    const fs::path dir = scene_dir();
    const fs::path scores = temp_dir() / "scores.f32";
    const RunResult det = run_cli("detect --cube " + (dir / "noisy.hcb").string() + " --target " +
                                  (dir / "target.csv").string() + " --out " + scores.string());
    REQUIRE(det.exit_code == 0);
    REQUIRE(fs::exists(scores));
    REQUIRE(fs::exists(temp_dir() / "scores.json"));

    const hsnr::DetectionMap map = hsnr::load_scores_f32(scores.string());
    CHECK(map.height == 16);
    CHECK(map.width == 16);

    const fs::path roc_csv = temp_dir() / "roc.csv";
    const RunResult roc = run_cli("roc --scores " + scores.string() + " --truth " +
                                  (dir / "mask.pgm").string() + " --out " + roc_csv.string());
    REQUIRE(roc.exit_code == 0);
    REQUIRE(roc.out.rfind("auc=", 0) == 0);

    const std::string csv = slurp(roc_csv);
    CHECK(csv.rfind("threshold,pfa,pd\n", 0) == 0);
    // The trailer repeats the printed auc value.
    const std::string auc_value = roc.out.substr(4, roc.out.size() - 5);
    CHECK(csv.find("# auc=" + auc_value + "\n") != std::string::npos);
}

// ============================================================
// bench
// ============================================================

TEST_CASE("bench reports the three algorithms in model-cost order") {
    const fs::path dir = scene_dir();
    const fs::path out = temp_dir() / "bench.csv";
    const RunResult r = run_cli("bench --cube " + (dir / "noisy.hcb").string() + " --reps 3 --out " +
                                out.string());
    REQUIRE(r.exit_code == 0);

    REQUIRE(r.out.rfind("algorithm,time_s,model_gflop\n", 0) == 0);
    const std::size_t g = r.out.find("\ngaussian,");
    const std::size_t m = r.out.find("\nmmse,");
    const std::size_t f = r.out.find("\nmnf,");
    REQUIRE(g != std::string::npos);
    REQUIRE(m != std::string::npos);
    REQUIRE(f != std::string::npos);
    CHECK(g < m);
    CHECK(m < f);
    CHECK(slurp(out) == r.out);
}

// ============================================================
// spectra
// ============================================================

TEST_CASE("spectra exports long-form csv rows per cube and pixel") {
    const fs::path dir = scene_dir();
    const fs::path out = temp_dir() / "spectra.csv";
    const RunResult r = run_cli("spectra --cube " + (dir / "clean.hcb").string() + " --cube " +
                                (dir / "noisy.hcb").string() + " --pixel 7,7 --pixel 0,0 --out " +
                                out.string());
    REQUIRE(r.exit_code == 0);

    const std::string csv = slurp(out);
    REQUIRE(csv.rfind("source,x,y,wavenumber,value\n", 0) == 0);
    CHECK(csv.find("\nclean,7,7,900,") != std::string::npos);
    CHECK(csv.find("\nnoisy,0,0,900,") != std::string::npos);
    // header + 2 cubes * 2 pixels * 32 bands
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2 * 32);
}

TEST_CASE("spectra rejects malformed and out-of-range pixels") {
    const fs::path dir = scene_dir();
    const std::string base = "spectra --cube " + (dir / "clean.hcb").string() + " --out " +
                             (temp_dir() / "sp_err.csv").string();

    const RunResult bad = run_cli(base + " --pixel 7x7");
    CHECK(bad.exit_code == 2);
    CHECK(parse_error_line(bad).at("stage") == "spectra");

    const RunResult oob = run_cli(base + " --pixel 20,20");
    CHECK(oob.exit_code == 2);
    CHECK(parse_error_line(oob).at("stage") == "spectra");
}

// ============================================================
// pipeline
// ============================================================

TEST_CASE("pipeline runs end to end and writes every artifact") {
    const fs::path dir = temp_dir() / "pipe";
    const RunResult r =
        run_cli("pipeline --out-dir " + dir.string() + " " + kSceneArgs + " --reps 3 --threads 2");
    REQUIRE(r.exit_code == 0);

    for (const char* name :
         {"clean.hcb", "noisy.hcb", "mask.pgm", "target.csv", "scene.json", "denoised_mmse.hcb",
          "denoised_gaussian.hcb", "denoised_mnf.hcb", "scores_raw.f32", "scores_mmse.f32",
          "scores_gaussian.f32", "scores_mnf.f32", "roc_raw.csv", "roc_mmse.csv", "roc_gaussian.csv",
          "roc_mnf.csv", "bench.csv", "summary.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(dir / name));
    }

    const nlohmann::json printed = nlohmann::json::parse(r.out);
    const nlohmann::json saved = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(printed == saved);
    for (const char* key : {"auc_raw", "auc_mmse", "auc_gaussian", "auc_mnf", "mse_noisy", "mse_mmse",
                            "sigma_estimate", "scene", "params", "timings"}) {
        CAPTURE(key);
        CHECK(saved.contains(key));
    }
    CHECK(saved.at("mse_mmse").get<double>() < saved.at("mse_noisy").get<double>());
}
