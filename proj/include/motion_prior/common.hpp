#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mp {

// Deterministic RNG used everywhere seeds matter. std::mt19937_64 is
// bit-stable across platforms; the distributions below are hand-rolled so
// that streams do not depend on libstdc++ internals.
class RandomStream {
   public:
    explicit RandomStream(uint64_t seed = 0) : state_(split_mix(seed)), have_spare_(false) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller, one spare cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // integer in [0, n)
    uint64_t index(uint64_t n) {
        if (n == 0) throw std::invalid_argument("RandomStream::index: n must be positive");
        return next() % n;
    }

    RandomStream fork() { return RandomStream(next()); }

   private:
    static uint64_t split_mix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    // xoshiro-style splitmix chain; period is plenty for desk-scale runs
    uint64_t next() {
        state_ = split_mix(state_);
        return state_;
    }

    uint64_t state_;
    double spare_;
    bool have_spare_;
};

inline int64_t product(const std::vector<int>& dims) {
    int64_t p = 1;
    for (int d : dims) p *= d;
    return p;
}

inline std::string shape_string(const std::vector<int>& dims) {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

template <class S>
inline bool finite(S v) {
    return std::isfinite(static_cast<double>(v));
}

}  // namespace mp
