#include <catch2/catch_amalgamated.hpp>

#include <hsnr/cost.hpp>
#include <hsnr/rng.hpp>
#include <hsnr/synth.hpp>

#include <string>
#include <vector>

using namespace hsnr;

namespace {

HyperCube constant_cube(int h, int w, int nb, double value) {
    HyperCube cube(h, w, WavenumberAxis{900.0, 2.0, nb});
    for (std::size_t i = 0; i < cube.size(); ++i) cube.data()[i] = value;
    return cube;
}

}  // namespace

// ============================================================
// FLOP model
// ============================================================

TEST_CASE("model flop counts at the reference cube size") {
    CHECK(model_flops({DenoiseAlgo::gaussian, 128, 128, 128, 3}) == 37'748'736ULL);
    CHECK(model_flops({DenoiseAlgo::mmse, 128, 128, 128, 3}) == 751'140'864ULL);
    CHECK(model_flops({DenoiseAlgo::mnf, 128, 128, 128, 3}) == 882'524'160ULL);

    // Gigaflop truncation used in the reporting path.
    CHECK(model_flops({DenoiseAlgo::gaussian, 128, 128, 128, 3}) / 10'000'000 == 3);
}

TEST_CASE("model flop counts on a small hand-expanded case") {
    // h=2 w=3 n=10 k=3: k2=9 k4=81 k6=729, hw=6
    CHECK(model_flops({DenoiseAlgo::gaussian, 2, 3, 10, 3}) == 1080ULL);   // 6 * 2*9*10
    CHECK(model_flops({DenoiseAlgo::mmse, 2, 3, 10, 3}) == 45'684ULL);     // 6 * (4*81*10 + 6*729)
    CHECK(model_flops({DenoiseAlgo::mnf, 2, 3, 10, 3}) == 93'798ULL);      // 6 * (4*81*10 + 17*729)
}

TEST_CASE("model flop count validation") {
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 0, 3, 10, 3}), std::invalid_argument);
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 2, 0, 10, 3}), std::invalid_argument);
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 2, 3, 0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 2, 3, 10, 4}), std::invalid_argument);
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 2, 3, 10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(model_flops({DenoiseAlgo::mmse, 2, 3, 9, 3}), std::invalid_argument);  // k^2 == n
}

TEST_CASE("model costs keep the gaussian < mmse < mnf ordering") {
    SplitMix64 rng(5150);
    for (int trial = 0; trial < 100; ++trial) {
        const std::uint64_t h = 1 + rng.next() % 200;
        const std::uint64_t w = 1 + rng.next() % 200;
        const std::uint64_t k = 3 + 2 * (rng.next() % 3);       // 3, 5, 7
        const std::uint64_t n = k * k + 1 + rng.next() % 256;   // keeps k^2 < n
        const std::uint64_t g = model_flops({DenoiseAlgo::gaussian, h, w, n, k});
        const std::uint64_t m = model_flops({DenoiseAlgo::mmse, h, w, n, k});
        const std::uint64_t f = model_flops({DenoiseAlgo::mnf, h, w, n, k});
        CAPTURE(h, w, n, k);
        REQUIRE(g < m);
        REQUIRE(m < f);
    }
}

TEST_CASE("model cost grows with every dimension") {
    const FlopModel base{DenoiseAlgo::mmse, 32, 32, 64, 3};
    const std::uint64_t ref = model_flops(base);
    CHECK(model_flops({DenoiseAlgo::mmse, 64, 32, 64, 3}) > ref);
    CHECK(model_flops({DenoiseAlgo::mmse, 32, 64, 64, 3}) > ref);
    CHECK(model_flops({DenoiseAlgo::mmse, 32, 32, 128, 3}) > ref);
    CHECK(model_flops({DenoiseAlgo::mmse, 32, 32, 64, 5}) > ref);
}

TEST_CASE("algorithm names map both ways") {
    CHECK(std::string(algo_name(DenoiseAlgo::gaussian)) == "gaussian");
    CHECK(std::string(algo_name(DenoiseAlgo::mmse)) == "mmse");
    CHECK(std::string(algo_name(DenoiseAlgo::mnf)) == "mnf");
    CHECK(algo_from_name("mmse") == DenoiseAlgo::mmse);
    CHECK_THROWS_AS(algo_from_name("median"), std::invalid_argument);
}

// ============================================================
// Benchmark harness
// ============================================================

TEST_CASE("run_benchmark reports a positive median and the model cost") {
    const HyperCube cube = constant_cube(16, 16, 32, 1.0);

    MmseConfig mmse;
    mmse.sigma = 0.5;
    mmse.clamp_negative = true;
    const BenchRecord rec = run_benchmark(cube, mmse, 3);
    CHECK(rec.algorithm == "mmse");
    CHECK(rec.wall_time > 0.0);
    CHECK(rec.model_flops == model_flops({DenoiseAlgo::mmse, 16, 16, 32, 3}));
    CHECK(rec.repetitions == 3);
    CHECK(rec.height == 16);
    CHECK(rec.bands == 32);

    const BenchRecord gauss = run_benchmark(cube, GaussianFilterConfig{}, 3);
    CHECK(gauss.algorithm == "gaussian");
    CHECK(gauss.wall_time > 0.0);

    // MNF needs actual noise to whiten, so give it a noisy cube.
    SceneSpec spec = default_scene_spec(16, 16, 32);
    spec.seed = 99;
    const HyperCube noisy = generate_scene(spec).noisy;
    const BenchRecord mnf = run_benchmark(noisy, MnfConfig{}, 3);
    CHECK(mnf.algorithm == "mnf");
    CHECK(mnf.model_flops == model_flops({DenoiseAlgo::mnf, 16, 16, 32, 3}));

    CHECK_THROWS_AS(run_benchmark(cube, mmse, 2), std::invalid_argument);
}

TEST_CASE("bench_report formats and orders rows by model cost") {
    BenchRecord a;
    a.algorithm = "mnf";
    a.wall_time = 1.25;
    a.model_flops = 882'524'160ULL;
    BenchRecord b;
    b.algorithm = "gaussian";
    b.wall_time = 0.5;
    b.model_flops = 37'748'736ULL;
    BenchRecord c;
    c.algorithm = "mmse";
    c.wall_time = 0.75;
    c.model_flops = 751'140'864ULL;

    CHECK(bench_report({a, b, c}) ==
          "algorithm,time_s,model_gflop\n"
          "gaussian,0.500000,0.038\n"
          "mmse,0.750000,0.751\n"
          "mnf,1.250000,0.883\n");

    CHECK_THROWS_AS(bench_report({}), std::invalid_argument);
}
