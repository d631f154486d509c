#include "abwave/fields.hpp"

#include <numbers>

#include "abwave/errors.hpp"
#include "abwave/jsonutil.hpp"

namespace abwave {

using nlohmann::json;

namespace {
json vec_json(Vec2 p) { return json::array({p.x, p.y}); }
}  // namespace

ScalarFn ScalarFn::constant(double c) {
    ScalarFn f;
    f.value = [c](Vec2) { return c; };
    f.grad = [](Vec2) { return Vec2{}; };
    f.spec = {{"type", "constant"}, {"value", c}};
    return f;
}

ScalarFn ScalarFn::gaussian(double base, double amp, Vec2 c, double width) {
    ScalarFn f;
    const double s2 = width * width;
    f.value = [=](Vec2 p) { return base + amp * std::exp(-(p - c).dot(p - c) / (2 * s2)); };
    f.grad = [=](Vec2 p) {
        Vec2 d = p - c;
        return d * (-amp * std::exp(-d.dot(d) / (2 * s2)) / s2);
    };
    f.spec = {{"type", "gaussian"}, {"base", base}, {"amplitude", amp}, {"center", vec_json(c)}, {"width", width}};
    return f;
}

ScalarFn ScalarFn::bump(double base, double amp, Vec2 c, double radius) {
    ScalarFn f;
    const double R2 = radius * radius;
    f.value = [=](Vec2 p) {
        double q = 1.0 - (p - c).dot(p - c) / R2;
        return q <= 0.0 ? base : base + amp * std::exp(1.0 - 1.0 / q);
    };
    f.grad = [=](Vec2 p) {
        Vec2 d = p - c;
        double q = 1.0 - d.dot(d) / R2;
        if (q <= 0.0) return Vec2{};
        double val = amp * std::exp(1.0 - 1.0 / q);
        return d * (-2.0 * val / (R2 * q * q));
    };
    f.spec = {{"type", "bump"}, {"base", base}, {"amplitude", amp}, {"center", vec_json(c)}, {"radius", radius}};
    return f;
}

ScalarFn ScalarFn::box_polynomial(double amp, Vec2 lo, Vec2 hi) {
    ScalarFn f;
    f.value = [=](Vec2 p) { return amp * (p.x - lo.x) * (hi.x - p.x) * (p.y - lo.y) * (hi.y - p.y); };
    f.grad = [=](Vec2 p) {
        double X = (p.x - lo.x) * (hi.x - p.x), Y = (p.y - lo.y) * (hi.y - p.y);
        return Vec2{amp * (hi.x + lo.x - 2 * p.x) * Y, amp * X * (hi.y + lo.y - 2 * p.y)};
    };
    f.spec = {{"type", "polynomial"}, {"amplitude", amp}, {"lo", vec_json(lo)}, {"hi", vec_json(hi)}};
    return f;
}

ScalarFn ScalarFn::plane_wave(double amp, Vec2 k, double phase) {
    ScalarFn f;
    f.value = [=](Vec2 p) { return amp * std::sin(k.dot(p) + phase); };
    f.grad = [=](Vec2 p) { return k * (amp * std::cos(k.dot(p) + phase)); };
    f.spec = {{"type", "plane_wave"}, {"amplitude", amp}, {"k", vec_json(k)}, {"phase", phase}};
    return f;
}

ScalarFn ScalarFn::sech_lens(double n0, double axis_y, double a) {
    ScalarFn f;
    f.value = [=](Vec2 p) { return n0 / std::cosh(a * (p.y - axis_y)); };
    f.grad = [=](Vec2 p) {
        double z = a * (p.y - axis_y);
        return Vec2{0.0, -n0 * a * std::tanh(z) / std::cosh(z)};
    };
    f.spec = {{"type", "lens"}, {"n0", n0}, {"axis_y", axis_y}, {"a", a}};
    return f;
}

ScalarFn ScalarFn::operator+(const ScalarFn& o) const {
    ScalarFn f;
    auto a = *this;
    f.value = [a, o](Vec2 p) { return a.value(p) + o.value(p); };
    f.grad = [a, o](Vec2 p) { return a.grad(p) + o.grad(p); };
    f.spec = {{"type", "sum"}, {"terms", json::array({spec, o.spec})}};
    return f;
}

ScalarFn ScalarFn::scaled(double s) const {
    ScalarFn f;
    auto a = *this;
    f.value = [a, s](Vec2 p) { return s * a.value(p); };
    f.grad = [a, s](Vec2 p) { return a.grad(p) * s; };
    f.spec = {{"type", "scaled"}, {"factor", s}, {"of", spec}};
    return f;
}

Mat2 numeric_jacobian(const std::function<Vec2(Vec2)>& f, Vec2 p, double eps) {
    Vec2 ex = (f({p.x + eps, p.y}) - f({p.x - eps, p.y})) * (0.5 / eps);
    Vec2 ey = (f({p.x, p.y + eps}) - f({p.x, p.y - eps})) * (0.5 / eps);
    return {ex.x, ey.x, ex.y, ey.y};
}

VectorFn VectorFn::constant(Vec2 c) {
    VectorFn f;
    f.value = [c](Vec2) { return c; };
    f.jac = [](Vec2) { return Mat2{}; };
    f.spec = {{"type", "constant"}, {"value", vec_json(c)}};
    return f;
}

VectorFn VectorFn::vortex(double flux, Vec2 c, double r_cut) {
    VectorFn f;
    const double k = flux / (2.0 * std::numbers::pi);
    f.value = [=](Vec2 p) {
        Vec2 d = p - c;
        double r2 = d.dot(d);
        if (r2 <= r_cut * r_cut) return Vec2{};
        return Vec2{-d.y, d.x} * (k / r2);
    };
    f.jac = [=](Vec2 p) {
        Vec2 d = p - c;
        double r2 = d.dot(d);
        if (r2 <= r_cut * r_cut) return Mat2{};
        double r4 = r2 * r2;
        return Mat2{k * 2 * d.x * d.y / r4, k * (d.y * d.y - d.x * d.x) / r4, k * (d.y * d.y - d.x * d.x) / r4,
                    -k * 2 * d.x * d.y / r4};
    };
    f.spec = {{"type", "vortex"}, {"flux", flux}, {"center", vec_json(c)}, {"r_cut", r_cut}};
    return f;
}

VectorFn VectorFn::gradient(const ScalarFn& s) {
    VectorFn f;
    auto g = s.grad;
    f.value = g;
    f.jac = [g](Vec2 p) { return numeric_jacobian(g, p); };
    f.spec = {{"type", "gradient"}, {"of", s.spec}};
    return f;
}

VectorFn VectorFn::rotation(double omega, Vec2 c) {
    VectorFn f;
    f.value = [=](Vec2 p) { return Vec2{-(p.y - c.y), p.x - c.x} * omega; };
    f.jac = [=](Vec2) { return Mat2{0.0, -omega, omega, 0.0}; };
    f.spec = {{"type", "rotation"}, {"omega", omega}, {"center", vec_json(c)}};
    return f;
}

VectorFn VectorFn::operator+(const VectorFn& o) const {
    VectorFn f;
    auto a = *this;
    f.value = [a, o](Vec2 p) { return a.value(p) + o.value(p); };
    f.jac = [a, o](Vec2 p) {
        Mat2 x = a.jac(p), y = o.jac(p);
        return Mat2{x.xx + y.xx, x.xy + y.xy, x.yx + y.yx, x.yy + y.yy};
    };
    f.spec = {{"type", "sum"}, {"terms", json::array({spec, o.spec})}};
    return f;
}

VectorFn VectorFn::operator-(const VectorFn& o) const { return *this + o.scaled(-1.0); }

VectorFn VectorFn::scaled(double s) const {
    VectorFn f;
    auto a = *this;
    f.value = [a, s](Vec2 p) { return a.value(p) * s; };
    f.jac = [a, s](Vec2 p) {
        Mat2 m = a.jac(p);
        return Mat2{s * m.xx, s * m.xy, s * m.yx, s * m.yy};
    };
    f.spec = {{"type", "scaled"}, {"factor", s}, {"of", spec}};
    return f;
}

ScalarField sample(const ScalarFn& f, const GridPtr& grid) {
    ScalarField out(grid);
    for (int j = 0; j < grid->ny; ++j)
        for (int i = 0; i < grid->nx; ++i) out(i, j) = f(grid->node(i, j));
    return out;
}

VectorField2D sample(const VectorFn& f, const GridPtr& grid) {
    VectorField2D out(grid);
    for (int j = 0; j < grid->ny; ++j)
        for (int i = 0; i < grid->nx; ++i) out(i, j) = f(grid->node(i, j));
    return out;
}

ScalarFn scalar_from_json(const json& j, const std::string& path) {
    if (j.is_number()) return ScalarFn::constant(j.get<double>());
    std::string type = cfg::text(j, path, "type");
    if (type == "constant") {
        cfg::check_keys(j, path, {"type", "value"}, {"value"});
        return ScalarFn::constant(cfg::number(j, path, "value"));
    }
    if (type == "gaussian") {
        cfg::check_keys(j, path, {"type", "base", "amplitude", "center", "width"}, {"amplitude", "center", "width"});
        return ScalarFn::gaussian(cfg::number_or(j, path, "base", 0.0), cfg::number(j, path, "amplitude"),
                                  cfg::point(j, path, "center"), cfg::number(j, path, "width"));
    }
    if (type == "bump") {
        cfg::check_keys(j, path, {"type", "base", "amplitude", "center", "radius"}, {"amplitude", "center", "radius"});
        return ScalarFn::bump(cfg::number_or(j, path, "base", 0.0), cfg::number(j, path, "amplitude"),
                              cfg::point(j, path, "center"), cfg::number(j, path, "radius"));
    }
    if (type == "polynomial") {
        cfg::check_keys(j, path, {"type", "amplitude", "lo", "hi"}, {"amplitude"});
        Vec2 lo = j.contains("lo") ? cfg::point(j, path, "lo") : Vec2{0, 0};
        Vec2 hi = j.contains("hi") ? cfg::point(j, path, "hi") : Vec2{1, 1};
        return ScalarFn::box_polynomial(cfg::number(j, path, "amplitude"), lo, hi);
    }
    if (type == "lens") {
        cfg::check_keys(j, path, {"type", "n0", "axis_y", "a"}, {"n0", "axis_y", "a"});
        return ScalarFn::sech_lens(cfg::number(j, path, "n0"), cfg::number(j, path, "axis_y"), cfg::number(j, path, "a"));
    }
    if (type == "sum") {
        cfg::check_keys(j, path, {"type", "terms"}, {"terms"});
        if (!j["terms"].is_array() || j["terms"].empty()) throw ConfigError(path + "/terms: expected a non-empty array");
        ScalarFn acc = scalar_from_json(j["terms"][0], path + "/terms/0");
        for (std::size_t k = 1; k < j["terms"].size(); ++k)
            acc = acc + scalar_from_json(j["terms"][k], path + "/terms/" + std::to_string(k));
        return acc;
    }
    throw ConfigError(path + "/type: unknown scalar field type '" + type + "'");
}

VectorFn vector_from_json(const json& j, const std::string& path) {
    std::string type = cfg::text(j, path, "type");
    if (type == "constant") {
        cfg::check_keys(j, path, {"type", "value"}, {"value"});
        return VectorFn::constant(cfg::point(j, path, "value"));
    }
    if (type == "vortex") {
        cfg::check_keys(j, path, {"type", "flux", "center", "r_cut"}, {"flux", "center"});
        return VectorFn::vortex(cfg::number(j, path, "flux"), cfg::point(j, path, "center"),
                                cfg::number_or(j, path, "r_cut", 1e-9));
    }
    if (type == "gradient") {
        cfg::check_keys(j, path, {"type", "of"}, {"of"});
        return VectorFn::gradient(scalar_from_json(j["of"], path + "/of"));
    }
    if (type == "rotation") {
        cfg::check_keys(j, path, {"type", "omega", "center"}, {"omega", "center"});
        return VectorFn::rotation(cfg::number(j, path, "omega"), cfg::point(j, path, "center"));
    }
    if (type == "sum") {
        cfg::check_keys(j, path, {"type", "terms"}, {"terms"});
        if (!j["terms"].is_array() || j["terms"].empty()) throw ConfigError(path + "/terms: expected a non-empty array");
        VectorFn acc = vector_from_json(j["terms"][0], path + "/terms/0");
        for (std::size_t k = 1; k < j["terms"].size(); ++k)
            acc = acc + vector_from_json(j["terms"][k], path + "/terms/" + std::to_string(k));
        return acc;
    }
    throw ConfigError(path + "/type: unknown vector field type '" + type + "'");
}

double line_integral(const VectorFn& field, const LoopPath& path) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < path.vertices.size(); ++k) {
        Vec2 a = path.vertices[k], b = path.vertices[k + 1];
        sum += 0.5 * (field(a) + field(b)).dot(b - a);
    }
    return sum;
}

}  // namespace abwave
