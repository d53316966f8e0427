#include "pad/rng.hpp"

#include "pad/errors.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

namespace pad {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) {
        word = splitmix64(x);
    }
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    // 53 mantissa bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) {
        throw Error("Rng::uniform_int: empty range");
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

double Rng::normal() {
    if (has_cached_gauss_) {
        has_cached_gauss_ = false;
        return cached_gauss_;
    }
    // Box-Muller; u1 kept strictly positive.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_gauss_ = r * std::sin(theta);
    has_cached_gauss_ = true;
    return r * std::cos(theta);
}

double Rng::normal(double mean, double stddev) {
    return mean + stddev * normal();
}

Rng Rng::split(const std::string& label) const {
    std::uint64_t h = fnv1a64(label);
    return Rng(seed_ ^ (h + 0x9e3779b97f4a7c15ULL + (seed_ << 6) + (seed_ >> 2)));
}

std::string Rng::state() const {
    std::uint64_t gauss_bits = 0;
    static_assert(sizeof(gauss_bits) == sizeof(cached_gauss_));
    std::memcpy(&gauss_bits, &cached_gauss_, sizeof(gauss_bits));
    std::ostringstream out;
    out << std::hex << seed_ << ' ' << s_[0] << ' ' << s_[1] << ' ' << s_[2] << ' ' << s_[3]
        << ' ' << (has_cached_gauss_ ? 1 : 0) << ' ' << gauss_bits;
    return out.str();
}

Rng Rng::from_state(const std::string& state) {
    std::istringstream in(state);
    std::uint64_t seed = 0, s0 = 0, s1 = 0, s2 = 0, s3 = 0, gauss_bits = 0;
    int has_gauss = 0;
    in >> std::hex >> seed >> s0 >> s1 >> s2 >> s3 >> has_gauss >> gauss_bits;
    if (!in) {
        throw DataError("Rng::from_state: malformed state string");
    }
    Rng rng(seed);
    rng.s_[0] = s0;
    rng.s_[1] = s1;
    rng.s_[2] = s2;
    rng.s_[3] = s3;
    rng.has_cached_gauss_ = has_gauss != 0;
    std::memcpy(&rng.cached_gauss_, &gauss_bits, sizeof(gauss_bits));
    return rng;
}

} // namespace pad
