#include "abwave/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "abwave/gauge.hpp"
#include "abwave/goursat.hpp"
#include "abwave/rng.hpp"

namespace abwave {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Independent stream per property.
std::uint64_t stream(std::uint64_t seed, std::uint64_t property) {
    return seed * 0x9E3779B97F4A7C15ULL + property;
}

ScalarFn random_gauge(Rng& rng) {
    return ScalarFn::bump(0.0, rng.uniform(-0.05, 0.05), {rng.uniform(0.3, 0.4), rng.uniform(0.25, 0.35)},
                          rng.uniform(0.12, 0.2)) +
           ScalarFn::box_polynomial(rng.uniform(-0.5, 0.5), {0, 0}, {1, 1});
}

MetricFn random_slow_metric(Rng& rng) {
    ScalarFn n = ScalarFn::gaussian(1.0, rng.uniform(0.1, 0.3), {rng.uniform(0.3, 0.7), rng.uniform(0.0, 0.3)},
                                    rng.uniform(0.2, 0.35));
    VectorFn v = VectorFn::rotation(rng.uniform(-0.15, 0.15), {rng.uniform(0.3, 0.7), rng.uniform(0.4, 0.6)});
    return slow_metric_fn(n, v);
}

DomainSpec unit_square(int n) {
    DomainSpec s;
    s.resolution = n;
    return s;
}

}  // namespace

ExperimentReport verify_loop_gauge(std::uint64_t seed, int pairs, std::vector<int> resolutions) {
    auto t0 = Clock::now();
    const Vec2 c{0.6, 0.6};
    std::vector<GridPtr> grids;
    for (int n : resolutions) {
        DomainSpec s = unit_square(n);
        s.obstacles.push_back(ObstacleShape::disk(c, 0.12));
        grids.push_back(build_domain(s));
    }
    std::vector<double> worst(resolutions.size(), 0.0);
    Rng rng(stream(seed, 1));
    for (int trial = 0; trial < pairs; ++trial) {
        VectorFn vf = VectorFn::vortex(rng.uniform(-1, 1), c) +
                      VectorFn::constant({rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)});
        ScalarFn a = random_gauge(rng);
        int turns = rng.integer(0, 2);
        LoopPath loop = turns == 0 ? LoopPath::ellipse({rng.uniform(0.2, 0.3), rng.uniform(0.25, 0.35)},
                                                       rng.uniform(0.06, 0.12), rng.uniform(0.06, 0.12),
                                                       rng.uniform(0, kPi), 2000)
                                   : LoopPath::circle(c, rng.uniform(0.2, 0.3), 2000, turns);
        for (std::size_t r = 0; r < grids.size(); ++r) {
            VectorField2D v = sample(vf, grids[r]);
            VectorField2D vhat = apply_gauge(v, GaugeFunction::from_fn(a, grids[r]));
            double diff = std::abs(line_integral(vhat, loop) - line_integral(v, loop));
            worst[r] = std::max(worst[r], diff / loop.length());
        }
    }
    // Least-squares slope of log(worst) against log(h).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(resolutions.size());
    ExperimentReport rep;
    rep.name = "loop-gauge";
    double cmax = 0.0;
    for (std::size_t r = 0; r < grids.size(); ++r) {
        double h = grids[r]->dx;
        double x = std::log(h), y = std::log(worst[r]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        double cst = worst[r] / (h * h);
        cmax = std::max(cmax, cst);
        rep.table.push_back({resolutions[r], {{"worst_per_length", worst[r]}, {"constant", cst}}});
    }
    double order = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    rep.measured["order"] = order;
    rep.measured["constant"] = cmax;
    rep.measured["pairs"] = pairs;
    rep.thresholds["min_order"] = 1.9;
    rep.thresholds["max_constant"] = 20.0;
    rep.checks.push_back({"second_order", "order", ">=", "min_order"});
    rep.checks.push_back({"bounded_constant", "constant", "<=", "max_constant"});
    rep.finish();
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport verify_wu_yang(std::uint64_t seed, int trials) {
    auto t0 = Clock::now();
    Rng rng(stream(seed, 2));
    const Vec2 c{0.5, 0.5};
    std::vector<LoopPath> loops{LoopPath::circle(c, 0.3, 4096), LoopPath::circle(c, 0.2, 4096, 2)};
    int violations = 0, distinct = 0;
    for (int t = 0; t < trials; ++t) {
        double base = rng.uniform(-3, 3);
        VectorFn A = VectorFn::vortex(base, c);
        VectorFn B = VectorFn::vortex(base + 2.0 * kPi * rng.integer(-2, 2), c);
        VectorFn C = VectorFn::vortex(base + 2.0 * kPi * rng.integer(-2, 2), c);
        VectorFn D = VectorFn::vortex(base + rng.uniform(0.1, 2.0 * kPi - 0.1), c);
        if (!wu_yang_equal(A, A, loops)) ++violations;
        if (wu_yang_equal(A, B, loops) != wu_yang_equal(B, A, loops)) ++violations;
        if (!(wu_yang_equal(A, B, loops) && wu_yang_equal(B, C, loops) && wu_yang_equal(A, C, loops))) ++violations;
        if (wu_yang_equal(A, D, loops)) ++distinct;
    }
    ExperimentReport rep;
    rep.name = "wu-yang-equivalence";
    rep.measured["violations"] = violations;
    rep.measured["false_matches"] = distinct;
    rep.measured["trials"] = trials;
    rep.thresholds["allowed"] = 0.0;
    rep.checks.push_back({"equivalence_relation", "violations", "<=", "allowed"});
    rep.checks.push_back({"separates_other_fluxes", "false_matches", "<=", "allowed"});
    rep.finish();
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport verify_eiconal(std::uint64_t seed, int charts) {
    auto t0 = Clock::now();
    Rng rng(stream(seed, 3));
    auto grid = build_domain(unit_square(33));
    double res = 0.0, tr = 0.0, drift = 0.0;
    for (int k = 0; k < charts; ++k) {
        ChartOptions opt;
        opt.side = k % 4;
        GoursatChart ch = build_chart(random_slow_metric(rng), *grid, opt);
        res = std::max(res, ch.eiconal.residual);
        tr = std::max(tr, ch.transversal.residual);
        drift = std::max(drift, ch.eiconal.ray_drift);
    }
    ExperimentReport rep;
    rep.name = "eiconal-residual";
    rep.measured["eiconal_residual"] = res;
    rep.measured["transversal_residual"] = tr;
    rep.measured["ray_drift"] = drift;
    rep.thresholds["residual_tol"] = 1e-6;
    rep.thresholds["drift_tol"] = 1e-9;
    rep.checks.push_back({"eiconal", "eiconal_residual", "<=", "residual_tol"});
    rep.checks.push_back({"transversal", "transversal_residual", "<=", "residual_tol"});
    rep.checks.push_back({"ray_hamiltonian", "ray_drift", "<=", "drift_tol"});
    rep.finish();
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport verify_positivity(std::uint64_t seed, int charts, int samples) {
    auto t0 = Clock::now();
    Rng rng(stream(seed, 4));
    auto grid = build_domain(unit_square(33));
    double min_q = std::numeric_limits<double>::infinity();
    int hyperbolic = 0;
    for (int k = 0; k < charts; ++k) {
        ChartOptions opt;
        opt.side = k % 4;
        GoursatChart ch = build_chart(random_slow_metric(rng), *grid, opt);
        bool ok = true;
        for (std::size_t q = 0; q < ch.coeffs.g11.size(); ++q) {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> e(reduced_form(ch.coeffs.g11[q], ch.coeffs.g01[q]));
            ok = ok && e.eigenvalues().maxCoeff() < 0.0;
        }
        if (!ok) continue;
        ++hyperbolic;
        GreenSetup st{L1Coefficients::from(ch.coeffs), 0.1 * grid->diameter(), ch.coeffs.y1_lo,
                      ch.coeffs.y1(ch.coeffs.n1 - 1), 40};
        const double W = st.y1_hi - st.y1_lo;
        for (int t = 0; t < samples; ++t) {
            double coef[3][3];
            for (auto& row : coef)
                for (double& x : row) x = rng.uniform(-1, 1);
            GoursatFn u = [&, coef](double y0, double y1, double yn) {
                double s = y0 - yn, acc = 0.0;
                for (int m = 0; m < 3; ++m)
                    for (int l = 0; l < 3; ++l)
                        acc += coef[m][l] * std::sin((m + 1) * kPi * s / st.T) *
                               std::sin((l + 1) * kPi * (y1 - st.y1_lo) / W);
                return std::complex<double>(acc);
            };
            min_q = std::min(min_q, q_form(st, u, u).real());
        }
    }
    ExperimentReport rep;
    rep.name = "quadratic-form-positivity";
    rep.measured["min_q"] = hyperbolic > 0 ? min_q : std::numeric_limits<double>::quiet_NaN();
    rep.measured["hyperbolic_charts"] = hyperbolic;
    rep.measured["samples"] = samples;
    rep.thresholds["positive"] = std::numeric_limits<double>::min();
    rep.checks.push_back({"q_positive", "min_q", ">=", "positive"});
    rep.finish();
    rep.wall_seconds = seconds_since(t0);
    return rep;
}

std::vector<ExperimentReport> verify_suite(const VerifyOptions& opt) {
    return {verify_loop_gauge(opt.seed), verify_wu_yang(opt.seed), verify_eiconal(opt.seed),
            verify_positivity(opt.seed)};
}

nlohmann::json verify_json(const std::vector<ExperimentReport>& reports, std::uint64_t seed) {
    nlohmann::json rs = nlohmann::json::array();
    bool pass = !reports.empty();
    for (const auto& r : reports) {
        rs.push_back(r.to_json(false));
        pass = pass && r.pass;
    }
    return {{"seed", seed}, {"pass", pass}, {"reports", rs}};
}

}  // namespace abwave
