#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hsnr {

// All synthetic randomness in the toolkit flows through this generator.
// std::mt19937 plus the standard distributions would be simpler, but the
// distribution algorithms are implementation-defined; splitmix64 with an
// explicit Box-Muller transform produces the same stream on every platform.

// ============================================================
// splitmix64
// ============================================================

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform double in the open interval (0, 1).
    double next_unit() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// Derive an independent substream seed. Substreams are keyed by index so a
// per-pixel stream (index = x*W + y) yields the same draws no matter which
// worker, or how many workers, generate that pixel.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
    g.next();
    return g.next();
}

// ============================================================
// Gaussian draws (Box-Muller)
// ============================================================

class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    // Standard normal draw, mean 0, variance 1.
    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = rng_.next_unit();
        const double u2 = rng_.next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace hsnr
