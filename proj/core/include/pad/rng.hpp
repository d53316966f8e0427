#pragma once

#include <cstdint>
#include <string>

namespace pad {

/// Deterministic random stream (xoshiro256** seeded via splitmix64).
/// Normal variates use an explicit Box-Muller transform so that sequences
/// depend only on the seed, not on the standard library implementation.
///
/// Subsystems derive independent streams with split(label); the derived
/// stream depends on this stream's seed and the label only, never on how
/// many values have already been drawn.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);

    /// Standard normal.
    double normal();
    double normal(double mean, double stddev);

    /// Independent substream keyed by (seed, label).
    Rng split(const std::string& label) const;

    std::uint64_t seed() const { return seed_; }

    /// Serializable stream state (exact round trip, including the cached
    /// Box-Muller value).
    std::string state() const;
    static Rng from_state(const std::string& state);

private:
    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {0, 0, 0, 0};
    bool has_cached_gauss_ = false;
    double cached_gauss_ = 0.0;
};

/// FNV-1a over a byte string; used for stable content-addressed ids and
/// stream-splitting labels.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& s);

} // namespace pad
