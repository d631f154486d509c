#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abwave/dnmap.hpp"
#include "abwave/fields.hpp"
#include "abwave/geometry.hpp"
#include "abwave/wavesolver.hpp"

namespace abwave {

// One pass/fail condition: measured[value] <op> thresholds[threshold].
struct ReportCheck {
    std::string name;
    std::string value;
    std::string op;  // "<=" or ">="
    std::string threshold;
};

struct ConvergenceRow {
    int resolution = 0;
    std::map<std::string, double> values;  // NaN where a column does not apply
};

struct ExperimentReport {
    std::string name;
    std::vector<std::string> fingerprints;
    std::map<std::string, double> measured;
    std::map<std::string, double> thresholds;
    std::vector<ReportCheck> checks;
    std::vector<ConvergenceRow> table;
    std::map<std::string, std::string> notes;
    bool pass = false;
    double wall_seconds = 0.0;
    std::vector<double> row_seconds;  // assembly time per table row

    // Evaluates every check against the recorded numbers.
    bool evaluate() const;
    // Pass flag recomputed from the checks; call after filling measured and thresholds.
    void finish() { pass = evaluate(); }

    // Timing fields are left out when `timing` is false so reports compare byte for byte.
    nlohmann::json to_json(bool timing = true) const;
    std::string to_text(bool timing = true) const;
    // Convergence table with header "resolution,<columns>".
    std::string table_csv() const;
};

// Shared run parameters. The resolution in `domain` is ignored.
struct ExperimentSetup {
    DomainSpec domain;
    std::vector<int> resolutions{32, 64, 128};
    DNBasis basis;
    int jobs = 1;
    double tolerance_factor = 3.0;  // equality threshold in units of self-convergence error
    double separation = 10.0;       // distinguishability factor
    double min_order = 1.5;
};

ExperimentSetup default_setup();

struct GaugeInvarianceParams {
    ScalarFn refr = ScalarFn::constant(1.0);
    VectorFn v;
    ScalarFn a;
    Equation equation = Equation::MinimalCoupling;
};

// DN of (n, v) against DN of (n, v - grad a) at every resolution.
// PreconditionError if a is nonzero on the outer boundary or the equation is not MinimalCoupling.
ExperimentReport exp_gauge_invariance(const ExperimentSetup& setup, const GaugeInvarianceParams& p);

struct SignAmbiguityParams {
    ScalarFn refr = ScalarFn::constant(1.0);
    ScalarFn b;                      // v = grad b
    std::optional<VectorFn> control;  // non-gradient flow for the negative control
    Equation equation = Equation::SlowMedium;
};

// DN(v) against DN(-v) and DN(0). DegenerateError if b vanishes identically.
ExperimentReport exp_sign_ambiguity(const ExperimentSetup& setup, const SignAmbiguityParams& p);

struct FluxDetectParams {
    ScalarFn refr = ScalarFn::constant(1.0);
    double alpha1 = 0.0;
    double alpha2 = 0.5;
    ScalarFn profile;  // gauge giving the second in-class flow v1 - grad profile
    double r_cut = 1e-9;
    double guard = 0.5;  // admitted |v|^2 / n^2; flux 0.5 next to a 0.15 disk exceeds the default
    // Optical contrast alpha1 against alpha1 + 2 pi at refraction wrap_n; skipped when wrap_resolution is 0.
    int wrap_resolution = 64;
    double wrap_n = 10.0;
};

// Vortices around the first obstacle. PreconditionError without exactly one obstacle.
ExperimentReport exp_flux_detect(const ExperimentSetup& setup, const FluxDetectParams& p);

struct DiffeoParams {
    MetricFn metric;
    nlohmann::json metric_spec;
    SpaceTimeMap map;
};

// DN of the metric against DN of the transformed metric. PreconditionError if the map moves the outer boundary.
ExperimentReport exp_diffeo_invariance(const ExperimentSetup& setup, const DiffeoParams& p);

struct FluxBoundaryParams {
    VectorFn v;
    int segments = 4096;        // quadrature segments per loop
    double quadrature_tol = 1e-6;  // on |difference| / max(1, |flux|)
    double curl_tol = 1e-6;        // largest admitted |curl v| on the annulus samples
    int curl_samples = 2000;
};

// Circulation of v around the outer boundary against a circle around the obstacle.
ExperimentReport exp_flux_boundary(const DomainSpec& domain, const FluxBoundaryParams& p);

// Observed order between the last two rows of a decreasing sequence.
double observed_order(const std::vector<int>& resolutions, const std::vector<double>& values);

}  // namespace abwave
