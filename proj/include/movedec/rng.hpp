#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace movedec {

// Deterministic random source. All distribution mappings are written out
// explicitly (std::uniform_real_distribution and friends are not guaranteed
// to produce the same stream on every standard library), so a seed pins the
// exact byte stream everywhere the toolkit runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive on both ends
    long uniform_int(long lo, long hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long>(gen_() % span);
    }

    // Box-Muller; draws two uniforms per sample so the stream layout stays
    // independent of how many gaussians a caller consumes.
    double gaussian() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

    // splitmix64 mix of (seed, stream): the documented seed-splitting scheme.
    // Every module seed in a pipeline run is derived from the top-level seed
    // through chains of this function.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace movedec
