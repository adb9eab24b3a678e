#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace canet {

/// Counter-based random number generator.
///
/// Each draw mixes (seed, counter) through the SplitMix64 finalizer, so the
/// value stream is a pure function of the seed and the number of draws made.
/// Identical seeds give identical streams on every platform, streams can be
/// forked by name without coordinating counters, and no hidden global state
/// is involved.
class rng {
public:
    explicit rng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0,n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller. Consumes two uniform draws per value;
    /// the sine component of each pair is discarded so that every call sees
    /// the same counter arithmetic regardless of call history.
    double normal() {
        double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
    }

    /// Fork a derived stream. The child seed mixes this stream's seed with a
    /// FNV-1a hash of `name`, so parameter initialisation is independent of
    /// the order in which other parameters are created.
    rng fork(std::string_view name) const {
        std::uint64_t h = 1469598103934665603ull;
        for (char c : name) {
            h ^= std::uint64_t(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        return rng(seed_ ^ (h | 1ull));
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

inline std::vector<double> rng_normal(rng& r, std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = r.normal();
    return out;
}

template <typename T>
void shuffle(rng& r, std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = std::size_t(r.uniform_index(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace canet
