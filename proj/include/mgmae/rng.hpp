#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mgmae {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
} // namespace detail

// Deterministic RNG wrapper. std::mt19937_64 has a standard-specified output
// sequence and all floating-point draws below avoid the (implementation
// defined) std distributions, so every stream is reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the spare is cached, consumption order stays deterministic.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * M_PI * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Index in [0, n). Lemire multiply-shift; unbiased enough at these scales.
    size_t index(size_t n) {
        if (n == 0) return 0;
        return static_cast<size_t>(
            (static_cast<unsigned __int128>(engine_()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derive an independent child stream; fork(i) != fork(j) for i != j.
    Rng fork(uint64_t stream) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream + 1)));
    }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mgmae
