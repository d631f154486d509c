#pragma once

// Shared helpers for the unit tests: a seeded generator and common domains.

#include "abwave/geometry.hpp"
#include "abwave/rng.hpp"

namespace abwave::testing {

using abwave::Rng;

inline DomainSpec unit_square(int n) {
    DomainSpec s;
    s.resolution = n;
    return s;
}

inline DomainSpec square_with_disk(int n, Vec2 c = {0.5, 0.5}, double r = 0.15) {
    DomainSpec s = unit_square(n);
    s.obstacles.push_back(ObstacleShape::disk(c, r));
    return s;
}

}  // namespace abwave::testing
