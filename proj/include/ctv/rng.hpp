#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace ctv {

// Counter-based random stream: every draw is a pure function of
// (key, counter), so streams can be derived per work unit and sampling is
// reproducible regardless of scheduling. The mixer is the splitmix64
// finalizer over key + counter * golden-ratio increments.

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(mix64(seed + kRngGamma)) {}

    /// New independent stream keyed by this stream plus `stream_id`.
    CounterRng derive(std::uint64_t stream_id) const {
        CounterRng r(0);
        r.key_ = mix64(key_ ^ mix64(stream_id + kRngGamma));
        r.counter_ = 0;
        return r;
    }
    CounterRng derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }
    CounterRng derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return derive(a).derive(b).derive(c);
    }

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kRngGamma); }

    /// Uniform double in [0, 1), 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), bound > 0. Rejection sampling keeps it
    /// unbiased.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    bool bernoulli(double p) { return next_unit() < p; }

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n) {
        std::vector<int> p(static_cast<size_t>(n));
        std::iota(p.begin(), p.end(), 0);
        shuffle(p);
        return p;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Index sample from unnormalized nonnegative weights.
    int discrete(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_unit() * total;
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// k distinct indices from 0..n-1 (partial Fisher-Yates), returned sorted.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(static_cast<size_t>(n));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
        }
        pool.resize(static_cast<size_t>(k));
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace ctv
