#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fhn {

// splitmix64, used to derive independent streams from (seed, stream id).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x6a09e667f3bcc909ULL));
}

// Deterministic uniform/exponential/gaussian draws on top of mt19937_64.
// Distributions are hand-rolled from raw 64-bit words so that output does
// not depend on the standard library's distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on (0,1): never returns 0 or 1
    double uniform() {
        const std::uint64_t bits = eng_() >> 11; // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    double exponential() { return -std::log(uniform()); }

    // Box-Muller; caches the second variate
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(2.0 * exponential());
        const double phi = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(phi);
        have_spare_ = true;
        return r * std::cos(phi);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace fhn
