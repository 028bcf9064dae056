#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers. Every stream is a pure function of
// (key, counter): output_i = mix64(key + i*gamma). That makes substreams
// cheap to derive and generation order-independent -- slices of a pass can
// be produced in any order (or in parallel) and still yield byte-identical
// results, which the simulator's determinism contract relies on.
//
// The mixer is the splitmix64 finalizer (Steele, Lea, Flood 2014), which is
// well distributed for exactly this keyed-counter use.
namespace splink::rng {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

// Hierarchical stream identifier. child(salt) walks one level down; the
// resulting keys are decorrelated by the mixer.
struct Key {
    std::uint64_t value = 0;

    [[nodiscard]] Key child(std::uint64_t salt) const {
        return Key{mix64(value ^ (salt * golden_gamma + 0xD6E8FEB86659FD93ULL))};
    }
};

class Stream {
public:
    Stream() = default;
    explicit Stream(Key key) : key_(key.value) {}
    explicit Stream(std::uint64_t seed) : key_(mix64(seed)) {}

    std::uint64_t next_u64() {
        counter_ += 1;
        return mix64(key_ + counter_ * golden_gamma);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1], safe as a log() argument.
    double next_double_open() { return 1.0 - next_double(); }

    // Exponential inter-arrival gap for a Poisson process of the given rate.
    double next_exponential(double rate) { return -std::log(next_double_open()) / rate; }

    // Standard normal via Box-Muller (one value per call; no cached state so
    // the draw count stays an explicit function of the event count).
    double next_gaussian() {
        const double u1 = next_double_open();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace splink::rng
