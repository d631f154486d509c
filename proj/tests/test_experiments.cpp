#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "abwave/errors.hpp"
#include "abwave/experiments.hpp"
#include "support.hpp"

using namespace abwave;

namespace {

constexpr double kPi = std::numbers::pi;
const Vec2 kCenter{0.65, 0.6};

// Coarse setup: two small grids and a handful of pulses.
ExperimentSetup fast_setup() {
    ExperimentSetup s = default_setup();
    s.resolutions = {16, 24};
    s.basis.n_centers = 4;
    s.basis.n_onsets = 1;
    s.basis.t_final = 1.2;
    return s;
}

ScalarFn interior_bump() { return ScalarFn::bump(0.0, 0.02, {0.3, 0.3}, 0.2); }

ExperimentReport report_with(double value, const std::string& op, double threshold) {
    ExperimentReport r;
    r.name = "probe";
    r.measured["x"] = value;
    r.thresholds["t"] = threshold;
    r.checks.push_back({"probe_check", "x", op, "t"});
    r.finish();
    return r;
}

}  // namespace

TEST_CASE("report pass flag follows its checks") {
    CHECK(report_with(1.0, "<=", 2.0).pass);
    CHECK_FALSE(report_with(3.0, "<=", 2.0).pass);
    CHECK(report_with(3.0, ">=", 2.0).pass);
    CHECK(report_with(2.0, ">=", 2.0).pass);
    CHECK_FALSE(report_with(std::numeric_limits<double>::quiet_NaN(), "<=", 2.0).pass);
    CHECK_FALSE(report_with(1.0, "<", 2.0).pass);

    ExperimentReport empty;
    CHECK_FALSE(empty.evaluate());

    ExperimentReport missing = report_with(1.0, "<=", 2.0);
    missing.checks.push_back({"dangling", "nothing", "<=", "t"});
    CHECK_FALSE(missing.evaluate());

    // Evaluation does not modify the report.
    ExperimentReport r = report_with(1.0, "<=", 2.0);
    auto before = r.to_json(false).dump();
    CHECK(r.evaluate() == r.evaluate());
    CHECK(r.to_json(false).dump() == before);
}

TEST_CASE("report serialization") {
    ExperimentReport r = report_with(1.0, "<=", 2.0);
    r.fingerprints = {"abc"};
    r.table.push_back({16, {{"distance", 0.5}, {"order", std::numeric_limits<double>::quiet_NaN()}}});
    r.table.push_back({32, {{"distance", 0.125}, {"order", 2.0}}});
    r.notes["why"] = "because";
    r.wall_seconds = 1.5;
    r.row_seconds = {0.5, 1.0};

    auto j = r.to_json();
    CHECK(j.at("name") == "probe");
    CHECK(j.at("pass") == true);
    CHECK(j.at("measured").at("x") == 1.0);
    CHECK(j.at("thresholds").at("t") == 2.0);
    CHECK(j.at("checks")[0].at("op") == "<=");
    CHECK(j.at("convergence").size() == 2);
    CHECK(j.at("convergence")[0].at("resolution") == 16);
    CHECK(j.at("convergence")[0].at("order").is_null());
    CHECK(j.at("notes").at("why") == "because");
    CHECK(j.contains("wall_seconds"));

    auto quiet = r.to_json(false);
    CHECK_FALSE(quiet.contains("wall_seconds"));
    CHECK_FALSE(quiet.contains("row_seconds"));
    CHECK(r.to_text(false).find("seconds") == std::string::npos);
    CHECK(r.to_text().find("PASS") != std::string::npos);

    std::string csv = r.table_csv();
    CHECK(csv.rfind("resolution,distance,order\n", 0) == 0);
    CHECK(csv.find("\n32,") != std::string::npos);
}

TEST_CASE("observed order") {
    CHECK(observed_order({32, 64}, {4e-2, 1e-2}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(observed_order({32, 64, 128}, {1.0, 4e-2, 1e-2}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(observed_order({16, 24}, {9.0, 4.0}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::isnan(observed_order({32}, {1.0})));
}

TEST_CASE("gauge invariance: zero gauge gives zero distance") {
    GaugeInvarianceParams p;
    p.v = VectorFn::vortex(0.05, kCenter);
    p.a = ScalarFn::constant(0.0);
    ExperimentReport r = exp_gauge_invariance(fast_setup(), p);
    CHECK(r.measured.at("distance@24") == 0.0);
    CHECK(r.pass);
    CHECK(r.table.size() == 2);
}

TEST_CASE("gauge invariance: a small bump stays within tolerance") {
    GaugeInvarianceParams p;
    p.v = VectorFn::vortex(0.05, kCenter);
    p.a = interior_bump();
    ExperimentReport r = exp_gauge_invariance(fast_setup(), p);
    CHECK(r.measured.at("distance@24") > 0.0);
    CHECK(r.measured.at("distance@24") <= r.thresholds.at("tolerance@24"));
}

TEST_CASE("gauge invariance preconditions") {
    GaugeInvarianceParams p;
    p.v = VectorFn::vortex(0.05, kCenter);
    p.a = ScalarFn::constant(0.01);
    CHECK_THROWS_AS(exp_gauge_invariance(fast_setup(), p), PreconditionError);

    p.a = interior_bump();
    p.equation = Equation::SlowMedium;
    CHECK_THROWS_AS(exp_gauge_invariance(fast_setup(), p), PreconditionError);

    p.equation = Equation::MinimalCoupling;
    ExperimentSetup one = fast_setup();
    one.resolutions = {24};
    CHECK_THROWS_AS(exp_gauge_invariance(one, p), PreconditionError);
    one.resolutions = {24, 16};
    CHECK_THROWS_AS(exp_gauge_invariance(one, p), PreconditionError);
}

TEST_CASE("sign ambiguity preconditions") {
    SignAmbiguityParams p;
    p.b = ScalarFn::constant(0.0);
    CHECK_THROWS_AS(exp_sign_ambiguity(fast_setup(), p), DegenerateError);
    p.b = ScalarFn::bump(0.0, 0.05, {0.3, 0.3}, 0.2);
    p.equation = Equation::MinimalCoupling;
    CHECK_THROWS_AS(exp_sign_ambiguity(fast_setup(), p), PreconditionError);
}

TEST_CASE("diffeomorphism invariance: identity map gives zero distance") {
    DiffeoParams p;
    p.metric = slow_metric_fn(ScalarFn::constant(1.0), VectorFn::vortex(0.05, kCenter));
    p.map = SpaceTimeMap{};
    ExperimentReport r = exp_diffeo_invariance(fast_setup(), p);
    CHECK(r.measured.at("distance@24") == 0.0);
    CHECK(r.pass);
}

TEST_CASE("diffeomorphism invariance rejects maps that move the boundary") {
    DiffeoParams p;
    p.metric = slow_metric_fn(ScalarFn::constant(1.0), VectorFn::constant({}));
    p.map.phi = SpatialMap::twist({0.5, 0.5}, 0.2, 0.9, 0.3);
    CHECK_THROWS_AS(exp_diffeo_invariance(fast_setup(), p), PreconditionError);

    p.map = SpaceTimeMap{};
    p.map.a = ScalarFn::constant(0.1);
    CHECK_THROWS_AS(exp_diffeo_invariance(fast_setup(), p), PreconditionError);

    p.map = SpaceTimeMap{};
    p.metric = nullptr;
    CHECK_THROWS_AS(exp_diffeo_invariance(fast_setup(), p), PreconditionError);
}

TEST_CASE("flux detection needs one obstacle") {
    ExperimentSetup s = fast_setup();
    s.domain.obstacles.clear();
    CHECK_THROWS_AS(exp_flux_detect(s, FluxDetectParams{}), PreconditionError);
}

TEST_CASE("flux recovered from the outer boundary") {
    DomainSpec d = default_setup().domain;
    FluxBoundaryParams p;

    p.v = VectorFn::vortex(1.0, kCenter);
    ExperimentReport unit = exp_flux_boundary(d, p);
    CHECK(unit.pass);
    CHECK(unit.measured.at("alpha_outer") == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(unit.measured.at("alpha_obstacle") == doctest::Approx(1.0).epsilon(1e-6));

    // Flux times winding survives any in-class gauge term.
    p.v = VectorFn::vortex(-2.5, kCenter) - VectorFn::gradient(interior_bump());
    ExperimentReport shifted = exp_flux_boundary(d, p);
    CHECK(shifted.pass);
    CHECK(shifted.measured.at("alpha_outer") == doctest::Approx(-2.5).epsilon(1e-6));

    p.v = VectorFn::gradient(ScalarFn::gaussian(0.0, 0.3, {0.3, 0.3}, 0.2));
    ExperimentReport grad = exp_flux_boundary(d, p);
    CHECK(grad.pass);
    CHECK(std::abs(grad.measured.at("alpha_outer")) <= 1e-6);

    p.v = VectorFn::rotation(0.2, kCenter);
    ExperimentReport rot = exp_flux_boundary(d, p);
    CHECK_FALSE(rot.pass);
    CHECK(rot.measured.at("max_curl") == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(rot.measured.at("alpha_outer") == doctest::Approx(0.4).epsilon(1e-6));

    DomainSpec none = d;
    none.obstacles.clear();
    CHECK_THROWS_AS(exp_flux_boundary(none, p), PreconditionError);
}

TEST_CASE("flux winding identity around the separating circle") {
    DomainSpec d = default_setup().domain;
    abwave::testing::Rng rng(5);
    FluxBoundaryParams p;
    for (int trial = 0; trial < 20; ++trial) {
        double alpha = rng.uniform(-2 * kPi, 2 * kPi);
        p.v = VectorFn::vortex(alpha, kCenter);
        ExperimentReport r = exp_flux_boundary(d, p);
        CHECK(r.pass);
        CHECK(std::abs(r.measured.at("alpha_obstacle") - alpha) <= 1e-6 * std::max(1.0, std::abs(alpha)));
    }
}
