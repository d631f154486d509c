#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "abwave/experiments.hpp"

namespace abwave {

struct VerifyOptions {
    std::uint64_t seed = 7;
    int jobs = 1;
};

// Randomized property suite. Every property draws from its own generator
// derived from the seed, so each report depends only on (seed, property).
std::vector<ExperimentReport> verify_suite(const VerifyOptions& opt);

// Loop integrals of v and v - grad a over random (a, loop) pairs at several resolutions.
ExperimentReport verify_loop_gauge(std::uint64_t seed, int pairs = 100, std::vector<int> resolutions = {129, 257, 513});
// Wu-Yang comparator is reflexive, symmetric and transitive on fluxes differing by 2 pi multiples.
ExperimentReport verify_wu_yang(std::uint64_t seed, int trials = 60);
// Eiconal and transversal residuals on random slow-medium charts.
ExperimentReport verify_eiconal(std::uint64_t seed, int charts = 4);
// Q(u, u) > 0 for random u on random hyperbolic charts.
ExperimentReport verify_positivity(std::uint64_t seed, int charts = 3, int samples = 50);

// {"seed", "pass", "reports": [...]} without timing fields.
nlohmann::json verify_json(const std::vector<ExperimentReport>& reports, std::uint64_t seed);

}  // namespace abwave
