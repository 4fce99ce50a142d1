#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hofd {

/// SplitMix64 finalizer; used to derive independent per-replication seeds
/// from a master seed without shared generator state.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 1));
}

/// Deterministic random stream: mt19937_64 core (bit-exact across platforms)
/// with explicit uniform and Box-Muller normal transforms, since the standard
/// library distributions are implementation-defined.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    /// Uniform draw in (0,1].
    double uniform01() {
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace hofd
