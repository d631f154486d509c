#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "abwave/errors.hpp"
#include "abwave/fields.hpp"
#include "abwave/gauge.hpp"
#include "abwave/geometry.hpp"
#include "support.hpp"

using namespace abwave;
using abwave::testing::Rng;

namespace {

// Signed crossing count of a horizontal ray from c: an independent winding oracle.
int crossing_winding(const LoopPath& p, Vec2 c) {
    int w = 0;
    for (std::size_t k = 0; k + 1 < p.vertices.size(); ++k) {
        Vec2 a = p.vertices[k], b = p.vertices[k + 1];
        double side = (b - a).cross(c - a);
        if (a.y <= c.y && b.y > c.y && side > 0) ++w;
        if (a.y > c.y && b.y <= c.y && side < 0) --w;
    }
    return w;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 40) {
    std::function<double(double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
            double m = 0.5 * (lo + hi), lm = 0.5 * (lo + m), rm = 0.5 * (m + hi);
            double flm = f(lm), frm = f(rm);
            double left = (m - lo) / 6 * (flo + 4 * flm + fmid), right = (hi - m) / 6 * (fmid + 4 * frm + fhi);
            if (d <= 0 || std::abs(left + right - whole) < 15 * tol) return left + right + (left + right - whole) / 15;
            return rec(lo, m, flo, flm, fmid, left, d - 1) + rec(m, hi, fmid, frm, fhi, right, d - 1);
        };
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), depth);
}

LoopPath random_loop(Rng& rng, Vec2 c, double rmin, double rmax) {
    double rx = rng.uniform(rmin, rmax), ry = rng.uniform(rmin, rmax);
    return LoopPath::ellipse(c, rx, ry, rng.uniform(0, std::numbers::pi), 64 + rng.integer(0, 200));
}

}  // namespace

TEST_CASE("unit square without obstacles") {
    auto g = build_domain(abwave::testing::unit_square(64));
    CHECK(g->obstacle_node_count() == 0);
    CHECK(g->outer_boundary.size() == 252);
    CHECK(g->dx == doctest::Approx(1.0 / 63));
}

TEST_CASE("outer boundary runs counterclockwise with increasing arclength") {
    auto g = build_domain(abwave::testing::square_with_disk(40));
    const auto& ob = g->outer_boundary;
    double signed_area = 0.0;
    for (std::size_t k = 0; k < ob.size(); ++k) {
        if (k > 0) CHECK(ob[k].s > ob[k - 1].s);
        Vec2 a = g->node(ob[k].i, ob[k].j), b = g->node(ob[(k + 1) % ob.size()].i, ob[(k + 1) % ob.size()].j);
        signed_area += 0.5 * a.cross(b);
        // Outward normal points away from the center, tangent is its CCW rotation.
        CHECK((a - Vec2{0.5, 0.5}).dot(ob[k].normal) > 0);
        CHECK(std::abs(ob[k].normal.cross(ob[k].tangent) - 1.0) < 1e-12);
    }
    CHECK(signed_area == doctest::Approx(1.0));
    CHECK(ob.back().s < g->perimeter);
    // Every node on the outer rectangle appears exactly once.
    std::vector<int> count(g->size(), 0);
    for (const auto& b : ob) ++count[g->idx(b.i, b.j)];
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) CHECK(count[g->idx(i, j)] == (g->on_outer(i, j) ? 1 : 0));
}

TEST_CASE("disk obstacle area matches the analytic value") {
    auto g = build_domain(abwave::testing::square_with_disk(128));
    const double expected = std::numbers::pi * 0.15 * 0.15 / (g->dx * g->dy);
    CHECK(std::abs(static_cast<double>(g->obstacle_node_count()) - expected) <= 0.03 * expected);
    CHECK(g->obstacle_boundaries.size() == 1);
    for (int n : g->obstacle_boundaries[0]) {
        int i = n % g->nx, j = n / g->nx;
        CHECK(g->in_obstacle(i, j));
        CHECK_FALSE(g->obstacle_interior(i, j));
    }
}

TEST_CASE("rectangular obstacle is rasterized") {
    DomainSpec s = abwave::testing::unit_square(65);
    s.obstacles.push_back(ObstacleShape::rect({0.5, 0.5}, {0.1, 0.2}));
    auto g = build_domain(s);
    // Nodes k/64 with |x-0.5| <= 0.1 and |y-0.5| <= 0.2: k = 26..38 by k = 20..44.
    CHECK(g->obstacle_node_count() == 13 * 25);
}

TEST_CASE("domain construction errors") {
    DomainSpec s = abwave::testing::unit_square(64);
    s.obstacles.push_back(ObstacleShape::disk({0.3, 0.5}, 0.1));
    s.obstacles.push_back(ObstacleShape::disk({0.5, 0.5}, 0.1));
    CHECK_THROWS_AS(build_domain(s), OverlapError);

    DomainSpec wall = abwave::testing::unit_square(64);
    wall.obstacles.push_back(ObstacleShape::disk({0.12, 0.5}, 0.1));
    CHECK_THROWS_AS(build_domain(wall), OverlapError);

    DomainSpec tiny = abwave::testing::unit_square(64);
    tiny.obstacles.push_back(ObstacleShape::disk({0.5, 0.5}, 0.02));
    CHECK_THROWS_AS(build_domain(tiny), ResolutionError);

    DomainSpec close = abwave::testing::unit_square(64);
    close.obstacles.push_back(ObstacleShape::disk({0.3, 0.5}, 0.1));
    close.obstacles.push_back(ObstacleShape::rect({0.53, 0.5}, {0.1, 0.1}));
    CHECK_THROWS_AS(build_domain(close), OverlapError);
}

TEST_CASE("checked field reads reject obstacle interiors") {
    auto g = build_domain(abwave::testing::square_with_disk(64));
    ScalarField f(g, 1.0);
    CHECK_THROWS_AS(f.at(32, 32), MaskError);
    CHECK(f.at(2, 2) == 1.0);
    CHECK_THROWS_AS(interpolate(f, Vec2{0.5, 0.5}), InterpolationError);
    CHECK_THROWS_AS(interpolate(f, Vec2{1.5, 0.5}), InterpolationError);
}

TEST_CASE("winding numbers") {
    DomainSpec s;
    s.lo = {-2, -2};
    s.hi = {2, 2};
    s.resolution = 81;
    s.obstacles.push_back(ObstacleShape::disk({0, 0}, 0.3));
    auto g = build_domain(s);

    CHECK(winding_number(LoopPath::circle({0, 0}, 1.0, 200), *g, 0) == 1);
    CHECK(winding_number(LoopPath::circle({1.2, 1.2}, 0.5, 200), *g, 0) == 0);
    LoopPath twice = LoopPath::circle({0, 0}, 1.0, 200, 2);
    CHECK(winding_number(twice, *g, 0) == 2);
    CHECK(crossing_winding(twice, {0, 0}) == 2);
    CHECK(winding_number(LoopPath::circle({0, 0}, 1.0, 200, -1), *g, 0) == -1);
    CHECK_THROWS_AS(winding_number(LoopPath::segment({1, 0}, {0, 1}), *g, 0), OpenPathError);
    CHECK(LoopPath::circle({0, 0}, 1.0, 50).windings(*g) == std::vector<int>{1});
}

TEST_CASE("property: winding invariant under rotation, flips under reversal") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        Vec2 c{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        int turns = rng.integer(-2, 2);
        if (turns == 0) turns = 1;
        LoopPath p = LoopPath::circle(c, rng.uniform(0.8, 1.2), 37 + rng.integer(0, 50), turns);
        int w = winding_about(p, {0, 0});
        CHECK(w == crossing_winding(p, {0, 0}));
        CHECK(winding_about(p.rotated(rng.integer(0, 30)), {0, 0}) == w);
        CHECK(winding_about(p.reversed(), {0, 0}) == -w);
    }
}

TEST_CASE("line integrals: exact cases") {
    auto g = build_domain(abwave::testing::square_with_disk(33));
    // Quadratic a: the sampled gradient is linear, so interpolation and trapezoid are exact.
    ScalarField a = sample(ScalarFn::box_polynomial(0.0, {0, 0}, {1, 1}), g);
    for (int j = 0; j < g->ny; ++j)
        for (int i = 0; i < g->nx; ++i) {
            Vec2 p = g->node(i, j);
            a(i, j) = p.x * p.x + 0.7 * p.x * p.y - 0.4 * p.y * p.y + 0.3 * p.x;
        }
    VectorField2D grad = grid_gradient(a);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        LoopPath loop = random_loop(rng, {0.5, 0.5}, 0.22, 0.4);
        CHECK(std::abs(line_integral(grad, loop)) <= 1e-8 * loop.length());
    }
    VectorField2D one(g, Vec2{1.0, 0.0});
    CHECK(line_integral(one, LoopPath::segment({0, 0}, {1, 0})) == 1.0);
}

TEST_CASE("vortex circulation around the unit circle") {
    VectorFn v = VectorFn::vortex(1.0, {0, 0});
    // Independent oracle: adaptive quadrature on the exact circle.
    double oracle = adaptive_simpson(
        [&](double t) {
            Vec2 p{std::cos(t), std::sin(t)};
            return v(p).dot(Vec2{-std::sin(t), std::cos(t)});
        },
        0.0, 2 * std::numbers::pi, 1e-13);
    CHECK(std::abs(oracle - 1.0) < 1e-10);
    CHECK(std::abs(line_integral(v, LoopPath::circle({0, 0}, 1.0, 8192)) - 1.0) <= 1e-6);

    // Same through a sampled grid field.
    DomainSpec s;
    s.lo = {-1.5, -1.5};
    s.hi = {1.5, 1.5};
    s.resolution = 1025;
    s.obstacles.push_back(ObstacleShape::disk({0, 0}, 0.3));
    auto g = build_domain(s);
    double grid_val = line_integral(sample(v, g), LoopPath::circle({0, 0}, 1.0, 8192));
    CHECK(std::abs(grid_val - 1.0) <= 1e-5);
}

TEST_CASE("property: vortex line integral equals flux times winding") {
    Rng rng(5);
    for (int w = -2; w <= 2; ++w) {
        if (w == 0) continue;
        double alpha = rng.uniform(-2, 2);
        VectorFn v = VectorFn::vortex(alpha, {0.1, -0.2});
        LoopPath p = LoopPath::circle({0.1 + rng.uniform(-0.2, 0.2), -0.2 + rng.uniform(-0.2, 0.2)}, 0.8, 8192, w);
        CHECK(std::abs(line_integral(v, p) - alpha * winding_about(p, {0.1, -0.2})) <= 1e-6 * std::abs(alpha) * 2);
    }
    LoopPath off = LoopPath::circle({3, 3}, 0.5, 4096);
    CHECK(std::abs(line_integral(VectorFn::vortex(1.0, {0, 0}), off)) < 1e-9);
}

TEST_CASE("property: closed loop integral of a sampled gradient is second order") {
    Rng rng(21);
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Vec2 c{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
        ScalarFn a = ScalarFn::gaussian(0.0, rng.uniform(-1, 1), c, rng.uniform(0.1, 0.3)) +
                     ScalarFn::plane_wave(rng.uniform(-0.5, 0.5), {rng.uniform(-6, 6), rng.uniform(-6, 6)}, rng.uniform(0, 6));
        LoopPath loop = random_loop(rng, {0.5, 0.5}, 0.15, 0.4);
        double errs[2];
        int res[2] = {33, 65};
        for (int q = 0; q < 2; ++q) {
            auto g = build_domain(abwave::testing::unit_square(res[q]));
            errs[q] = std::abs(line_integral(grid_gradient(sample(a, g)), loop));
        }
        double h = 1.0 / 64;
        worst_ratio = std::max(worst_ratio, errs[1] / (h * h * loop.length()));
    }
    // Pinned constant for C in |loop grad a . dx| <= C h^2 L over this family.
    CHECK(worst_ratio <= 50.0);
}
