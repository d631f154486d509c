#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abwave/dnmap.hpp"
#include "abwave/experiments.hpp"
#include "abwave/fields.hpp"
#include "abwave/geometry.hpp"
#include "abwave/goursat.hpp"
#include "abwave/media.hpp"
#include "abwave/wavesolver.hpp"

namespace abwave {

struct MediumConfig {
    ScalarFn refr = ScalarFn::constant(1.0);
    std::optional<VectorFn> v;     // flow coefficient given directly
    std::optional<VectorFn> flow;  // physical flow, v derived with c
    double c = 1.0;
    double guard = MediumSpec::kDefaultGuard;

    MediumSpec build(const GridPtr& grid) const;
    VectorFn coefficient() const;  // v, or zero when neither field is given
};

struct SolverConfig {
    std::vector<int> resolutions{64};
    double t_final = 1.0;
    double dt = 0.0;
    double cfl_safety = 0.5;
    int snapshot_stride = 10;
};

struct DiffeoConfig {
    SpaceTimeMap map;
    std::string metric = "slow";  // "slow", "gordon" or "minimal_coupling", built from the medium
};

struct RaysConfig {
    Vec2 source{0.0, 2.0};
    Vec2 receiver{4.0, 2.0};
    std::vector<double> k{20.0, 40.0};
    double launch_angle = 0.785;
    double cell = 0.01;
    double t_max = 50.0;
    double dt = 1e-3;
};

struct ExperimentConfig {
    std::string name;
    double tolerance_factor = 3.0;
    double separation = 10.0;
    double min_order = 1.5;
    nlohmann::json params = nlohmann::json::object();  // experiment-specific keys, validated on use
};

struct RunConfig {
    DomainSpec domain;
    MediumConfig medium;
    Equation equation = Equation::MinimalCoupling;
    std::optional<ScalarFn> gauge;
    std::optional<VectorFn> compare_v;  // second flow for gauge-check
    DiffeoConfig diffeo;
    SolverConfig solver;
    DNBasis basis;
    RaysConfig rays;
    ChartOptions chart;
    ExperimentConfig experiment;
    std::string out_dir;
    int jobs = 1;
    std::uint64_t seed = 0;
};

// Every key is checked; violations raise ConfigError naming the JSON path.
RunConfig parse_config(const nlohmann::json& j);
// ConfigError when the file is missing or not valid JSON.
RunConfig load_config(const std::string& path);

SpatialMap map_from_json(const nlohmann::json& j, const std::string& path);
MetricFn diffeo_metric(const RunConfig& cfg);

// Experiment inputs assembled from a configuration.
ExperimentSetup experiment_setup(const RunConfig& cfg);
GaugeInvarianceParams gauge_params(const RunConfig& cfg);
SignAmbiguityParams sign_params(const RunConfig& cfg);
FluxDetectParams flux_detect_params(const RunConfig& cfg);
DiffeoParams diffeo_params(const RunConfig& cfg);
FluxBoundaryParams flux_boundary_params(const RunConfig& cfg);

// Runs the experiment named in cfg.experiment.name (or `name` when given).
ExperimentReport run_experiment(const RunConfig& cfg, const std::string& name = "");
const std::vector<std::string>& experiment_names();

}  // namespace abwave
