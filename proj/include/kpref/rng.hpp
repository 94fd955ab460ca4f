#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace kpref {

// Deterministic randomness. mt19937_64 raw output is pinned by the C++
// standard; the stdlib *distributions* are not, so bounded draws and
// shuffles are hand-rolled here. Frozen test goldens depend on this.

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    return mix64(seed ^ mix64(salt));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next() { return eng_(); }

    // Unbiased draw in [0, n). n == 0 is a caller bug; returns 0.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    double unit() { // [0,1)
        return double(eng_() >> 11) * 0x1.0p-53;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // First n positions of a Fisher-Yates pass, in draw order.
    std::vector<size_t> sample_indices(size_t pool, size_t n) {
        std::vector<size_t> idx(pool);
        for (size_t i = 0; i < pool; ++i) idx[i] = i;
        if (n > pool) n = pool;
        for (size_t i = 0; i < n; ++i) {
            size_t j = i + size_t(below(pool - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(n);
        return idx;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace kpref
