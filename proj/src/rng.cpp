#include "sqh/rng.hpp"

#include <cmath>
#include <numbers>

namespace sqh::rng {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const
{
    return splitmix64(seed_ ^ splitmix64(stream_ ^ splitmix64(counter)));
}

double CounterRng::uniform(std::uint64_t counter) const
{
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const
{
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k)
{
    return splitmix64(splitmix64(seed) + 0x632be59bd9b4e019ULL * (k + 1));
}

}  // namespace sqh::rng
