#ifndef AESTH_RNG_HPP_
#define AESTH_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace aesth {

/// Counter-based deterministic random source (splitmix64 core).
///
/// The integer stream is a pure function of the seed, so identical seeds give
/// identical streams on every platform. Substreams derived with derive() are
/// independent for distinct stream ids, which lets data generators draw
/// per-sample streams without any ordering constraints.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    /// Independent substream for (seed, stream). Used for per-epoch and
    /// per-sample randomness.
    static SeededRng derive(std::uint64_t seed, std::uint64_t stream) {
        SeededRng r(seed);
        r.state_ = mix(r.state_ + stream * 0x9e3779b97f4a7c15ULL);
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is < 2^-40 for every n used here (n far below 2^24).
        return next_u64() % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace aesth

#endif  // AESTH_RNG_HPP_
