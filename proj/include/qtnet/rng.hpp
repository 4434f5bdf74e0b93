#pragma once

#include <cstdint>

namespace qtnet {

// Counter-based generator: the k-th output of a stream is a pure function of
// (seed, k), so streams can be split and consumed in any parallel schedule
// without changing the values. Finalizer is the splitmix64 mix function.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t counter_value(std::uint64_t seed, std::uint64_t counter) {
    return mix64(seed + (counter + 1) * 0x9E3779B97F4A7C15ull);
}

// Derive an independent child seed (per structure, per trial, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(counter_value(master, index) ^ 0xD1B54A32D192ED03ull);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return counter_value(seed_, counter_++); }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    CounterRng split(std::uint64_t stream) const {
        return CounterRng(derive_seed(seed_, stream));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace qtnet
