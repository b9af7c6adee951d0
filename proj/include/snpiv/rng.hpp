#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace snpiv {

/// Seeded generator with platform-independent uniform and normal draws.
/// The standard distributions are implementation-defined, so they are not used.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal by the polar-free Box-Muller transform; caches the spare draw.
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Order-dependent combination of seed components.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

/// Bit pattern of a double, for mixing real-valued parameters into seeds.
std::uint64_t seed_bits(double value);

}  // namespace snpiv
