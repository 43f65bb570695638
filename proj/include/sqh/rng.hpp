#pragma once

#include <cstdint>

namespace sqh::rng {

std::uint64_t splitmix64(std::uint64_t x);

// Counter-based draws: the value depends only on (seed, stream, counter), so a
// trajectory's noise is independent of evaluation order and thread count.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t bits(std::uint64_t counter) const;
    double uniform(std::uint64_t counter) const;  // in (0, 1)
    double normal(std::uint64_t counter) const;   // standard normal, Box-Muller

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
};

// Seed for a derived job (trial k of a run seeded with `seed`).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k);

}  // namespace sqh::rng
