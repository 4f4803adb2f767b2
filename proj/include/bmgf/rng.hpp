#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace bmgf {

// Seeded RNG passed explicitly wherever randomness is consumed (init,
// dropout, shuffling). There is no global generator; two runs with the
// same seed draw the same sequence.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(eng_);
    }

    double normal(double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }

    bool bernoulli(double p) {
        std::bernoulli_distribution d(p);
        return d(eng_);
    }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(eng_);
    }

    uint64_t next_u64() { return eng_(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace bmgf
