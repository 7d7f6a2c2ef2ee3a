#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace damt {

// xoshiro256** with splitmix64 seeding. Self-contained so that streams are
// bit-reproducible across standard libraries (std::uniform_real_distribution
// is implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    static Rng from_state(const std::array<uint64_t, 4>& st) {
        Rng r(0);
        r.s_ = st;
        return r;
    }

    const std::array<uint64_t, 4>& state() const { return s_; }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_f(float lo, float hi) { return float(uniform(lo, hi)); }

    // [0, n)
    int64_t randint(int64_t n) { return int64_t(uniform() * double(n)); }

    // Box-Muller; one draw per call, deterministic draw order.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(randint(int64_t(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derived independent stream; forking does not advance this stream.
    Rng fork(uint64_t tag) const {
        uint64_t x = s_[0] ^ rotl(s_[2], 13) ^ (tag * 0x9e3779b97f4a7c15ULL);
        Rng r(0);
        for (auto& si : r.s_) si = splitmix64(x);
        return r;
    }

    Rng fork(std::string_view tag) const { return fork(fnv1a(tag)); }

    static uint64_t fnv1a(std::string_view s) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= uint64_t(uint8_t(c));
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::array<uint64_t, 4> s_{};
};

}  // namespace damt
