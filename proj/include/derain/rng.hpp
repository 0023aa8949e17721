#ifndef DERAIN_RNG_HPP
#define DERAIN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace derain {

/// Stateless 64-bit mix, used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// PCG32: small, fast, fully deterministic across platforms, and the whole
/// state is two u64 words so it serializes trivially into checkpoints.
class Pcg32 {
  public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL) {}
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0xda3e39cb94b95bdbULL) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        return (static_cast<std::uint64_t>(next_u32()) << 32) | next_u32();
    }

    /// Uniform in [0,1) with 32 bits of resolution.
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo,hi] inclusive.
    int uniform_int(int lo, int hi) {
        // Modulo bias is irrelevant at the ranges used here (tens to thousands).
        return lo + static_cast<int>(next_u32() % static_cast<std::uint32_t>(hi - lo + 1));
    }

    /// Standard normal via Box-Muller; no cached second value so the
    /// stream position is a pure function of the number of calls.
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-12);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Independent generator for a named sub-stream of this seed.
    Pcg32 fork(std::uint64_t tag) const {
        return Pcg32(splitmix64(state_ ^ tag), splitmix64(inc_ ^ (tag * 0x9e3779b97f4a7c15ULL)));
    }

    std::vector<std::uint8_t> serialize() const {
        std::vector<std::uint8_t> out(16);
        std::memcpy(out.data(), &state_, 8);
        std::memcpy(out.data() + 8, &inc_, 8);
        return out;
    }

    static Pcg32 deserialize(const std::vector<std::uint8_t>& bytes) {
        Pcg32 r;
        if (bytes.size() == 16) {
            std::memcpy(&r.state_, bytes.data(), 8);
            std::memcpy(&r.inc_, bytes.data() + 8, 8);
        }
        return r;
    }

  private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
};

/// Tag helper so sub-streams can be derived from readable names.
inline std::uint64_t stream_tag(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : name) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace derain

#endif
