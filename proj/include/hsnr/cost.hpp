#pragma once

#include <hsnr/baselines.hpp>
#include <hsnr/cube.hpp>
#include <hsnr/mmse.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace hsnr {

// ============================================================
// FLOP cost model
// ============================================================

enum class DenoiseAlgo { gaussian, mmse, mnf };

inline const char* algo_name(DenoiseAlgo a) {
    switch (a) {
        case DenoiseAlgo::gaussian: return "gaussian";
        case DenoiseAlgo::mmse: return "mmse";
        case DenoiseAlgo::mnf: return "mnf";
    }
    throw std::invalid_argument("algo_name: unknown algorithm");
}

inline DenoiseAlgo algo_from_name(const std::string& name) {
    if (name == "gaussian") return DenoiseAlgo::gaussian;
    if (name == "mmse") return DenoiseAlgo::mmse;
    if (name == "mnf") return DenoiseAlgo::mnf;
    throw std::invalid_argument("unknown algorithm '" + name + "' (expected mmse, gaussian, or mnf)");
}

struct FlopModel {
    DenoiseAlgo algorithm = DenoiseAlgo::mmse;
    std::uint64_t h = 1, w = 1, n = 1, k = 3;
};

// Closed-form per-image FLOP counts; leading-order terms only, so measured
// counts on a real implementation come out somewhat higher.
//   gaussian: H*W * 2 k^2 N
//   mmse:     H*W * (4 k^4 N + 6 k^6)
//   mnf:      H*W * (4 k^4 N + 17 k^6)
inline std::uint64_t model_flops(const FlopModel& m) {
    if (m.h < 1 || m.w < 1 || m.n < 1)
        throw std::invalid_argument("model_flops: dimensions must be >= 1");
    if (m.k < 1 || m.k % 2 == 0)
        throw std::invalid_argument("model_flops: k must be odd and >= 1");
    if (m.k * m.k >= m.n)
        throw std::invalid_argument("model_flops: k^2 must be smaller than n");

    const std::uint64_t k2 = m.k * m.k;
    const std::uint64_t k4 = k2 * k2;
    const std::uint64_t k6 = k4 * k2;
    const std::uint64_t hw = m.h * m.w;
    switch (m.algorithm) {
        case DenoiseAlgo::gaussian: return hw * (2 * k2 * m.n);
        case DenoiseAlgo::mmse: return hw * (4 * k4 * m.n + 6 * k6);
        case DenoiseAlgo::mnf: return hw * (4 * k4 * m.n + 17 * k6);
    }
    throw std::invalid_argument("model_flops: unknown algorithm");
}

// ============================================================
// Wall-time benchmark
// ============================================================

struct BenchRecord {
    std::string algorithm;
    double wall_time = 0.0;  // median seconds over all repetitions
    std::uint64_t model_flops = 0;
    int height = 0, width = 0, bands = 0, k = 0;
    int repetitions = 0;
    int threads = 1;
};

namespace detail {

template <class Fn>
BenchRecord bench_core(DenoiseAlgo algo, const HyperCube& cube, int k, int repetitions, int threads, Fn&& run) {
    if (repetitions < 3)
        throw std::invalid_argument("run_benchmark: repetitions must be >= 3");

    std::vector<double> times;
    times.reserve(repetitions);
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        HyperCube out = run();
        const auto t1 = std::chrono::steady_clock::now();
        (void)out;
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t mid = times.size() / 2;
    const double median =
        times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);

    BenchRecord rec;
    rec.algorithm = algo_name(algo);
    rec.wall_time = median;
    rec.model_flops = model_flops({algo, static_cast<std::uint64_t>(cube.height()),
                                   static_cast<std::uint64_t>(cube.width()),
                                   static_cast<std::uint64_t>(cube.bands()), static_cast<std::uint64_t>(k)});
    rec.height = cube.height();
    rec.width = cube.width();
    rec.bands = cube.bands();
    rec.k = k;
    rec.repetitions = repetitions;
    rec.threads = threads;
    return rec;
}

}  // namespace detail

inline BenchRecord run_benchmark(const HyperCube& cube, const MmseConfig& cfg, int repetitions, int threads = 1) {
    return detail::bench_core(DenoiseAlgo::mmse, cube, cfg.k, repetitions, threads,
                              [&] { return denoise_mmse(cube, cfg, threads); });
}

inline BenchRecord run_benchmark(const HyperCube& cube, const GaussianFilterConfig& cfg, int repetitions,
                                 int threads = 1) {
    return detail::bench_core(DenoiseAlgo::gaussian, cube, cfg.k, repetitions, threads,
                              [&] { return denoise_gaussian(cube, cfg, threads); });
}

inline BenchRecord run_benchmark(const HyperCube& cube, const MnfConfig& cfg, int repetitions, int threads = 1) {
    return detail::bench_core(DenoiseAlgo::mnf, cube, cfg.k, repetitions, threads,
                              [&] { return denoise_mnf(cube, cfg, threads); });
}

// CSV table in ascending model-FLOP order: algorithm,time_s,model_gflop.
inline std::string bench_report(const std::vector<BenchRecord>& records) {
    if (records.empty()) throw std::invalid_argument("bench_report: no records");
    std::vector<BenchRecord> sorted = records;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const BenchRecord& a, const BenchRecord& b) { return a.model_flops < b.model_flops; });

    std::string out = "algorithm,time_s,model_gflop\n";
    char buf[160];
    for (const BenchRecord& r : sorted) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.3f\n", r.algorithm.c_str(), r.wall_time,
                      static_cast<double>(r.model_flops) / 1e9);
        out += buf;
    }
    return out;
}

}  // namespace hsnr
