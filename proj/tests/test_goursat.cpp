#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

#include "abwave/errors.hpp"
#include "abwave/goursat.hpp"
#include "support.hpp"

using namespace abwave;
using abwave::testing::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

GridPtr unit_grid() { return build_domain(abwave::testing::unit_square(33)); }

MetricFn constant_n(double n) { return slow_metric_fn(ScalarFn::constant(n), VectorFn::constant({})); }

MetricFn smooth_slow(Rng& rng) {
    ScalarFn n = ScalarFn::gaussian(1.0, rng.uniform(0.1, 0.3), {rng.uniform(0.3, 0.7), rng.uniform(0.0, 0.3)},
                                    rng.uniform(0.2, 0.35));
    VectorFn v = VectorFn::rotation(rng.uniform(-0.15, 0.15), {rng.uniform(0.3, 0.7), rng.uniform(0.4, 0.6)});
    return slow_metric_fn(n, v);
}

double order(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace

TEST_CASE("Minkowski chart has flat closed forms") {
    auto grid = unit_grid();
    for (int side = 0; side < 4; ++side) {
        ChartOptions opt;
        opt.side = side;
        GoursatChart c = build_chart(minkowski_fn(), *grid, opt);
        const auto& lat = c.eiconal.lattice;
        double err = 0.0, err1 = 0.0;
        for (int k = 0; k < lat.nn; ++k)
            for (int i = 0; i < lat.nt; ++i) {
                Vec2 x = lat.node(i, k);
                err = std::max({err, std::abs(c.eiconal.phi_plus(i, k) + x.y), std::abs(c.eiconal.phi_minus(i, k) + x.y)});
                err1 = std::max(err1, std::abs(c.transversal.phi_1(i, k) - x.x));
            }
        CHECK(err <= 1e-8);
        CHECK(err1 <= 1e-8);
        CHECK(c.eiconal.dplus_n(lat.nt / 2, 0) == doctest::Approx(-1.0).epsilon(1e-14));
        const auto& co = c.coeffs;
        for (std::size_t q = 0; q < co.g11.size(); ++q) {
            CHECK(co.g11[q] == doctest::Approx(-1.0).epsilon(1e-12));
            CHECK(std::abs(co.g01[q]) <= 1e-12);
            CHECK(co.gnn[q] == doctest::Approx(-1.0).epsilon(1e-12));
            CHECK(co.A[q] == doctest::Approx(std::log(1.0 / std::sqrt(2.0))).epsilon(1e-12));
            CHECK(std::abs(co.V1[q]) <= 1e-9);
        }
    }
}

TEST_CASE("constant index gives phi = -n x_n") {
    auto grid = unit_grid();
    GoursatChart c = build_chart(constant_n(2.0), *grid);
    const auto& lat = c.eiconal.lattice;
    double err = 0.0;
    for (int k = 0; k < lat.nn; ++k)
        for (int i = 0; i < lat.nt; ++i) {
            double xn = lat.node(i, k).y;
            err = std::max({err, std::abs(c.eiconal.phi_plus(i, k) + 2 * xn), std::abs(c.eiconal.phi_minus(i, k) + 2 * xn)});
        }
    CHECK(err <= 1e-8);
    CHECK(c.eiconal.residual <= 1e-10);
    // Determinant identity with exponent +2 and the log-amplitude identity.
    for (std::size_t q = 0; q < c.coeffs.A.size(); ++q) {
        double pm = c.coeffs.hat_pm[q], c11 = c.coeffs.hat_11[q];
        CHECK(pm == doctest::Approx(4.0).epsilon(1e-10));
        CHECK(std::abs(c.coeffs.det_up[q]) == doctest::Approx(4 * pm * pm * std::abs(c11)).epsilon(1e-10));
        double g1 = 1.0 / std::abs(c11);
        CHECK(std::abs(c.coeffs.A[q] - std::log(std::pow(g1, 0.25) / std::sqrt(2.0))) <= 1e-10);
    }
}

TEST_CASE("transversal coordinate under constant tangential drift") {
    auto grid = unit_grid();
    const double c0 = 0.3;
    MetricFn g = slow_metric_fn(ScalarFn::constant(1.0), VectorFn::constant({c0, 0.0}));
    GoursatChart c = build_chart(g, *grid);
    const auto& lat = c.eiconal.lattice;
    double err = 0.0;
    for (int k = 0; k < lat.nn; ++k)
        for (int i = 0; i < lat.nt; ++i) {
            Vec2 x = lat.node(i, k);
            err = std::max(err, std::abs(c.transversal.phi_1(i, k) - (x.x + c0 * x.y)));
        }
    CHECK(err <= 1e-10);
    CHECK(c.transversal.residual <= 1e-10);
}

TEST_CASE("generic charts satisfy the eiconal and transversal equations") {
    auto grid = unit_grid();
    Rng rng(11);
    for (int trial = 0; trial < 4; ++trial) {
        MetricFn g = smooth_slow(rng);
        ChartOptions opt;
        opt.side = trial;
        GoursatChart c = build_chart(g, *grid, opt);
        CHECK(c.eiconal.residual <= 1e-6);
        CHECK(c.transversal.residual <= 1e-6);
        CHECK(c.eiconal.ray_drift <= 1e-9);
        for (std::size_t q = 0; q < c.coeffs.gnn.size(); ++q) CHECK(std::abs(c.coeffs.gnn[q] + 1.0) <= 1e-6);
    }
}

TEST_CASE("characteristic integration converges at fourth order") {
    auto grid = unit_grid();
    ScalarFn n = ScalarFn::gaussian(1.0, 0.6, {0.5, 0.1}, 0.12);
    MetricFn g = slow_metric_fn(n, VectorFn::rotation(0.2, {0.5, 0.5}));
    Patch patch = Patch::side(*grid, 0);
    ChartLattice lat;
    lat.t_lo = patch.t_lo, lat.t_hi = patch.t_hi, lat.delta = 0.14, lat.nt = 21, lat.nn = 8;
    std::vector<double> drift, err1;
    TransversalSolution ref = solve_transversal(solve_eiconal(g, patch, lat, 32), g);
    for (int steps : {1, 2}) {
        EiconalSolution e = solve_eiconal(g, patch, lat, steps);
        TransversalSolution t = solve_transversal(e, g);
        drift.push_back(e.ray_drift);
        double m = 0.0;
        for (std::size_t q = 0; q < t.phi_1.v.size(); ++q) m = std::max(m, std::abs(t.phi_1.v[q] - ref.phi_1.v[q]));
        err1.push_back(m);
    }
    MESSAGE("drift " << drift[0] << " " << drift[1] << " transversal " << err1[0] << " " << err1[1]);
    CHECK(order(drift[0], drift[1]) >= 3.0);
    CHECK(order(err1[0], err1[1]) >= 3.0);
}

TEST_CASE("characteristic map is the identity on the boundary and inverts") {
    auto grid = unit_grid();
    GoursatChart flat = build_chart(minkowski_fn(), *grid);
    Rng rng(5);
    for (int q = 0; q < 50; ++q) {
        Vec2 x{rng.uniform(flat.patch.t_lo, flat.patch.t_hi), rng.uniform(0.0, 0.1)};
        double x0 = rng.uniform(0.0, 0.3);
        CharPoint y = to_characteristic(flat, {x0, x});
        CHECK(y.yn == doctest::Approx(x.y).epsilon(1e-12));
        CHECK(y.y0 == doctest::Approx(x0).epsilon(1e-12));
    }
    GoursatChart c = build_chart(smooth_slow(rng), *grid);
    const auto& lat = c.eiconal.lattice;
    for (int i = 0; i < lat.nt; ++i) {
        Vec2 x = lat.node(i, 0);
        CharPoint y = to_characteristic(c, {0.37, x});
        CHECK(y.y0 == 0.37);
        CHECK(y.y1 == x.x);
        CHECK(y.yn == 0.0);
    }
    double worst = 0.0;
    for (int q = 0; q < 1000; ++q) {
        Vec2 x{rng.uniform(c.coeffs.y1_lo, c.coeffs.y1(c.coeffs.n1 - 1)), rng.uniform(0.0, 0.8 * lat.delta)};
        SpacetimePoint p{rng.uniform(0.0, c.T), x};
        SpacetimePoint back = from_goursat(c, to_goursat(c, p));
        worst = std::max({worst, std::abs(back.x0 - p.x0), (back.local - p.local).norm()});
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("determinant identity on structured transformed metrics") {
    Rng rng(21);
    for (int q = 0; q < 200; ++q) {
        double pm = rng.uniform(0.2, 3.0), p1 = rng.uniform(-1, 1), c11 = rng.uniform(-3, -0.2);
        Mat3 hat;
        hat << 0.0, -2 * pm, 2 * p1, -2 * pm, 0.0, 0.0, 2 * p1, 0.0, c11;
        double lhs = std::abs(hat.determinant());
        CHECK(lhs == doctest::Approx(4 * pm * pm * std::abs(c11)).epsilon(1e-10));
        double A = std::log(std::sqrt(pm) * std::pow(1.0 / lhs, 0.25));
        CHECK(std::abs(A - std::log(std::pow(1.0 / std::abs(c11), 0.25) / std::sqrt(2.0))) <= 1e-10);
    }
}

TEST_CASE("V1 lattice evaluation matches hand derivatives of polynomials") {
    Rng rng(3);
    const int n1 = 13, nn = 11;
    const double h1 = 0.05, hn = 0.04, y1_lo = 0.2;
    for (int trial = 0; trial < 20; ++trial) {
        double a[10], b[6], c[6];
        for (double& x : a) x = rng.uniform(-1, 1);
        for (double& x : b) x = rng.uniform(-1, 1);
        for (double& x : c) x = rng.uniform(-1, 1);
        // A: full cubic; g11, g01: full quadratics in (y, n).
        auto A = [&](double y, double n) {
            return a[0] + a[1] * y + a[2] * n + a[3] * y * y + a[4] * y * n + a[5] * n * n + a[6] * y * y * y +
                   a[7] * y * y * n + a[8] * y * n * n + a[9] * n * n * n;
        };
        auto Ay = [&](double y, double n) {
            return a[1] + 2 * a[3] * y + a[4] * n + 3 * a[6] * y * y + 2 * a[7] * y * n + a[8] * n * n;
        };
        auto An = [&](double y, double n) {
            return a[2] + a[4] * y + 2 * a[5] * n + a[7] * y * y + 2 * a[8] * y * n + 3 * a[9] * n * n;
        };
        auto Ayy = [&](double y, double n) { return 2 * a[3] + 6 * a[6] * y + 2 * a[7] * n; };
        auto Ann = [&](double y, double n) { return 2 * a[5] + 2 * a[8] * y + 6 * a[9] * n; };
        auto Ayn = [&](double y, double n) { return a[4] + 2 * a[7] * y + 2 * a[8] * n; };
        auto quad = [](const double* k, double y, double n) {
            return k[0] + k[1] * y + k[2] * n + k[3] * y * y + k[4] * y * n + k[5] * n * n;
        };
        auto quad_y = [](const double* k, double y, double n) { return k[1] + 2 * k[3] * y + k[4] * n; };
        auto quad_n = [](const double* k, double y, double n) { return k[2] + k[4] * y + 2 * k[5] * n; };

        std::vector<double> Av, gv, fv;
        for (int k = 0; k < nn; ++k)
            for (int i = 0; i < n1; ++i) {
                double y = y1_lo + i * h1, n = k * hn;
                Av.push_back(A(y, n));
                gv.push_back(quad(b, y, n));
                fv.push_back(quad(c, y, n));
            }
        auto V = v1_lattice(n1, nn, h1, hn, Av, gv, fv);
        double worst = 0.0;
        for (int k = 0; k < nn; ++k)
            for (int i = 0; i < n1; ++i) {
                double y = y1_lo + i * h1, n = k * hn;
                double g = quad(b, y, n), f = quad(c, y, n);
                double exact = Ann(y, n) + An(y, n) * An(y, n) - (quad_y(b, y, n) * Ay(y, n) + g * Ayy(y, n)) -
                               g * Ay(y, n) * Ay(y, n) + (quad_n(c, y, n) * Ay(y, n) + f * Ayn(y, n)) +
                               (quad_y(c, y, n) * An(y, n) + f * Ayn(y, n)) + 2 * f * Ay(y, n) * An(y, n);
                worst = std::max(worst, std::abs(V[static_cast<std::size_t>(k) * n1 + i] - exact));
            }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("discrete L1 is symmetric") {
    auto grid = unit_grid();
    Rng rng(8);
    GoursatChart c = build_chart(smooth_slow(rng), *grid);
    auto L = assemble_l1(c.coeffs, 9, 0.02);
    Eigen::SparseMatrix<double> Lt = L.transpose();
    Eigen::SparseMatrix<double> D = L - Lt;
    double worst = 0.0;
    for (int k = 0; k < D.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    CHECK(L.nonZeros() > 0);
    CHECK(worst <= 1e-10);
}

TEST_CASE("flow map closed forms and inverse") {
    FlowMap zero{[](double, double) { return 0.0; }, -1.0, 2.0};
    CHECK(zero.beta(0.3, 0.4) == 0.4);
    const double c0 = 0.17;
    FlowMap lin{[c0](double, double) { return c0; }, -1.0, 2.0};
    CHECK(lin.beta(0.25, 0.4) == doctest::Approx(0.4 + 2 * c0 * 0.25).epsilon(1e-13));
    FlowMap wild{[](double y, double n) { return 0.3 * std::sin(3 * y) * (1 + n); }, -1.0, 2.0};
    Rng rng(4);
    double worst = 0.0;
    for (int q = 0; q < 100; ++q) {
        double a = rng.uniform(0.0, 1.0), yn = rng.uniform(0.0, 0.3);
        worst = std::max(worst, std::abs(wild.alpha(yn, wild.beta(yn, a)) - a));
    }
    CHECK(worst <= 1e-9);
    FlowMap escape{[](double, double) { return 5.0; }, 0.0, 1.0};
    CHECK_THROWS_AS(escape.beta(0.5, 0.5), EscapeError);
}

TEST_CASE("geometric-optics amplitude transport") {
    auto chi1 = [](double s) { return std::exp(-40 * (s - 0.1) * (s - 0.1)); };
    auto chi2 = [](double y) { return std::exp(-20 * (y - 0.5) * (y - 0.5)); };
    const double T = 0.28;
    FlowMap zero{[](double, double) { return 0.0; }, -1.0, 2.0};
    CHECK(go_amplitude(zero, T, chi1, chi2, {0.05, 0.1, 0.45}) == doctest::Approx(chi1(0.05) * chi2(0.45)).epsilon(1e-14));

    auto grid = unit_grid();
    Rng rng(13);
    GoursatChart c = build_chart(smooth_slow(rng), *grid);
    L1Coefficients l1 = L1Coefficients::from(c.coeffs);
    FlowMap flow{l1.g01, c.coeffs.y1_lo, c.coeffs.y1(c.coeffs.n1 - 1), 1e-3};
    double worst = 0.0;
    for (int q = 0; q < 50; ++q) {
        double s = rng.uniform(0.0, T), y1 = rng.uniform(0.4, 0.6);
        // Boundary y_n = 0 means s + tau = T.
        CHECK(go_amplitude(flow, T, chi1, chi2, {s, T - s, y1}) == doctest::Approx(chi1(s) * chi2(y1)).epsilon(1e-12));
        double tau = rng.uniform(0.0, T - s);
        worst = std::max(worst, std::abs(transport_residual(flow, T, chi1, chi2, {s, tau, y1}, 1e-4)));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("Green formula residual converges for a manufactured pair") {
    const double T = 0.3;
    auto F = [](double x) { return x > 0 ? std::pow(x, 5) : 0.0; };
    auto H = [](double x) { return x > 0 ? std::pow(x, 4) * std::exp(std::complex<double>(0, 3 * x)) : 0.0; };
    GoursatFn u = [&](double y0, double, double yn) { return std::complex<double>(F(y0 - yn)); };
    GoursatFn v = [&](double y0, double, double yn) { return std::complex<double>(H(y0 - yn)); };
    std::vector<double> res, eres;
    for (int n : {32, 64, 128}) {
        GreenSetup st{L1Coefficients::constant(-1.3, 0.2), T, 0.0, 0.5, n};
        GreenResult r = green_residual(st, u, v);
        res.push_back(r.residual / std::abs(r.plane));
        eres.push_back(r.energy_residual / std::abs(r.q));
    }
    MESSAGE("Green residuals " << res[0] << " " << res[1] << " " << res[2]);
    CHECK(order(res[1], res[2]) >= 1.9);
    CHECK(order(eres[1], eres[2]) >= 1.9);
    GreenSetup st{L1Coefficients::constant(-1.3, 0.2), T, 0.0, 0.5, 64};
    CHECK(green_residual(st, u, u).residual <= 1e-14);
    GreenSetup missing = st;
    missing.coeffs.v1 = nullptr;
    CHECK_THROWS_AS(green_residual(missing, u, v), ChartError);
}

TEST_CASE("quadratic form closed values and positivity") {
    GreenSetup flat{L1Coefficients::constant(-1.0, 0.0), 0.2, 0.0, 0.5, 40};
    GoursatFn zero = [](double, double, double) { return std::complex<double>(0.0); };
    CHECK(std::abs(q_form(flat, zero, zero)) == 0.0);
    GoursatFn lin = [](double y0, double, double yn) { return std::complex<double>(y0 - yn); };
    CHECK(q_form(flat, lin, lin).real() == doctest::Approx(2 * 0.2 * 0.5).epsilon(1e-12));

    Rng rng(31);
    for (int q = 0; q < 500; ++q) {
        double g11 = rng.uniform(-3, 0.5), g01 = rng.uniform(-2, 2);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> qe(q_node_matrix(g11, g01)), re(reduced_form(g11, g01));
        CHECK((qe.eigenvalues().minCoeff() > 0) == (re.eigenvalues().maxCoeff() < 0));
    }

    auto grid = unit_grid();
    for (int chart = 0; chart < 3; ++chart) {
        ChartOptions opt;
        opt.side = chart;
        GoursatChart c = build_chart(smooth_slow(rng), *grid, opt);
        GreenSetup st{L1Coefficients::from(c.coeffs), 0.1 * grid->diameter(), c.coeffs.y1_lo,
                      c.coeffs.y1(c.coeffs.n1 - 1), 40};
        const double W = st.y1_hi - st.y1_lo;
        for (int trial = 0; trial < 50; ++trial) {
            double coef[3][3];
            for (auto& row : coef)
                for (double& x : row) x = rng.uniform(-1, 1);
            GoursatFn u = [&, coef](double y0, double y1, double yn) {
                double s = y0 - yn, acc = 0.0;
                for (int m = 0; m < 3; ++m)
                    for (int l = 0; l < 3; ++l)
                        acc += coef[m][l] * std::sin((m + 1) * kPi * s / st.T) * std::sin((l + 1) * kPi * (y1 - st.y1_lo) / W);
                return std::complex<double>(acc);
            };
            CHECK(q_form(st, u, u).real() > 0.0);
        }
    }
}

TEST_CASE("rays in homogeneous media") {
    RayState s = null_state(minkowski_fn(), {0.1, 0.2}, {3, 4});
    RayPath p = trace_ray(minkowski_fn(), s, 0.5);
    Vec2 end = p.states.back().x;
    CHECK(end.x == doctest::Approx(0.1 + 0.3).epsilon(1e-12));
    CHECK(end.y == doctest::Approx(0.2 + 0.4).epsilon(1e-12));
    CHECK(p.states.back().phase == doctest::Approx(0.5).epsilon(1e-12));

    RayPath q = trace_ray(constant_n(2.0), null_state(constant_n(2.0), {0, 0}, {1, 0}), 1.0);
    CHECK(q.states.back().x.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(q.states.back().x.y) <= 1e-14);

    RayOptions opt;
    opt.obstacles.push_back(ObstacleShape::disk({0.5, 0.0}, 0.1));
    CHECK_THROWS_AS(trace_ray(minkowski_fn(), null_state(minkowski_fn(), {0, 0}, {1, 0}), 1.0, opt), ObstacleHit);
}

TEST_CASE("shear flow drags rays along the flow") {
    const double n = 1.5, beta = 0.1;
    VectorFn shear;
    shear.value = [beta](Vec2 p) { return Vec2{0.0, beta * p.x}; };
    shear.jac = [beta](Vec2) { return Mat2{0, 0, beta, 0}; };
    MetricFn g = slow_metric_fn(ScalarFn::constant(n), shear);
    RayPath p = trace_ray(g, null_state(g, {0, 0}, {1, 0}), 2.0);
    RayOptions fine;
    fine.dt = 2.5e-4;
    RayPath f = trace_ray(g, null_state(g, {0, 0}, {1, 0}), 2.0, fine);
    double t = 2.0;
    Vec2 end = p.states.back().x;
    CHECK(end.y > 0.0);
    CHECK(end.x == doctest::Approx(t / n).epsilon(1e-8));
    CHECK(std::abs(end.y - beta * t * t / (2 * n * n * n)) <= 1e-8);
    CHECK((end - f.states.back().x).norm() <= 1e-10);
    CHECK(p.max_drift <= 1e-8);
}

TEST_CASE("Aharonov-Bohm phase from two refocused rays") {
    const double L = 4.0;
    MetricFn lens_only = slow_metric_fn(ScalarFn::sech_lens(2.5, 2.0, kPi / L), VectorFn::constant({}));
    MetricFn g = slow_metric_fn(ScalarFn::sech_lens(2.5, 2.0, kPi / L), VectorFn::vortex(0.3, {2, 2}, 0.5));
    AbPhaseSetup st;
    st.source = {0.0, 2.0};
    st.receiver = {L, 2.0};
    st.cell = L / 127;
    st.rays.obstacles.push_back(ObstacleShape::disk({2, 2}, 0.5));

    AbPhaseResult none = ab_phase(lens_only, st, 40.0);
    CHECK(std::abs(none.phase) <= 1e-8);

    AbPhaseResult r20 = ab_phase(g, st, 20.0);
    AbPhaseResult r40 = ab_phase(g, st, 40.0);
    MESSAGE("phase k=40 " << r40.phase << " loop " << r40.loop_phase << " max |v|/n " << r40.max_flow_ratio);
    CHECK(r40.max_flow_ratio <= 0.05);
    CHECK(r40.loop_integral == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(std::abs(r20.phase - r20.loop_phase) <= 0.05 * std::abs(r20.loop_phase));
    CHECK(std::abs(r40.phase - r40.loop_phase) <= 0.05 * std::abs(r40.loop_phase));
    CHECK(std::abs(r40.phase - 40 * 0.3) <= 0.05 * 12.0);
    CHECK(std::abs(r40.phase / r20.phase - 2.0) <= 0.02);
    CHECK(std::abs(r40.miss_left) <= st.cell);
    CHECK(r40.left.max_drift <= 1e-8);
    CHECK(r40.right.max_drift <= 1e-8);
}
