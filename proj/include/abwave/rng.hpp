#pragma once

#include <cstdint>
#include <random>

namespace abwave {

// Deterministic generator for randomized suites. The raw 64-bit engine is
// specified by the standard; the mapping to doubles is done here so results do
// not depend on the library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform(double lo = 0.0, double hi = 1.0) {
        double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
    int integer(int lo, int hi) { return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1)); }

private:
    std::mt19937_64 eng_;
};

}  // namespace abwave
