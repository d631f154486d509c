#pragma once

// Closed-form scalar and vector field families. Media, gauges and flows are
// described by these and sampled onto a grid on demand.

#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "abwave/geometry.hpp"

namespace abwave {

struct Mat2 {
    double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
};

class ScalarFn {
public:
    std::function<double(Vec2)> value;
    std::function<Vec2(Vec2)> grad;
    nlohmann::json spec;  // description used for fingerprints and reports

    double operator()(Vec2 p) const { return value(p); }

    static ScalarFn constant(double c);
    // base + amp * exp(-|x-c|^2 / (2 w^2))
    static ScalarFn gaussian(double base, double amp, Vec2 c, double width);
    // base + amp * exp(1 - 1/(1 - r^2/R^2)) for r < R, base outside; smooth and compactly supported.
    static ScalarFn bump(double base, double amp, Vec2 c, double radius);
    // amp * (x-x0)(x1-x)(y-y0)(y1-y), vanishing on the box boundary.
    static ScalarFn box_polynomial(double amp, Vec2 lo, Vec2 hi);
    // amp * sin(kx x + ky y + phase)
    static ScalarFn plane_wave(double amp, Vec2 k, double phase);
    // n0 / cosh(a (y - axis_y)): graded-index lens refocusing rays from an axis point after pi / a.
    static ScalarFn sech_lens(double n0, double axis_y, double a);

    ScalarFn operator+(const ScalarFn& o) const;
    ScalarFn scaled(double s) const;
};

class VectorFn {
public:
    std::function<Vec2(Vec2)> value;
    // Jacobian d v_i / d x_j, needed by curl checks and ray tracing.
    std::function<Mat2(Vec2)> jac;
    nlohmann::json spec;

    Vec2 operator()(Vec2 p) const { return value(p); }

    static VectorFn constant(Vec2 c);
    // (flux / 2 pi) (-(y-cy), x-cx) / r^2, set to zero within r_cut of the center.
    static VectorFn vortex(double flux, Vec2 c, double r_cut = 1e-9);
    static VectorFn gradient(const ScalarFn& f);
    // omega * (-(y-cy), x-cx): rigid rotation, curl 2 omega.
    static VectorFn rotation(double omega, Vec2 c);

    VectorFn operator+(const VectorFn& o) const;
    VectorFn operator-(const VectorFn& o) const;
    VectorFn scaled(double s) const;
};

// Centered-difference Jacobian used when no analytic form is at hand.
Mat2 numeric_jacobian(const std::function<Vec2(Vec2)>& f, Vec2 p, double eps = 1e-6);

ScalarField sample(const ScalarFn& f, const GridPtr& grid);
VectorField2D sample(const VectorFn& f, const GridPtr& grid);

// Field-spec JSON: {"type": "constant"|"gaussian"|"bump"|"polynomial", ...}
// and for vectors {"type": "constant"|"vortex"|"gradient"|"rotation"|"sum", ...}.
ScalarFn scalar_from_json(const nlohmann::json& j, const std::string& path);
VectorFn vector_from_json(const nlohmann::json& j, const std::string& path);

// Trapezoid quadrature of an analytic field along a polyline.
double line_integral(const VectorFn& field, const LoopPath& path);

}  // namespace abwave
