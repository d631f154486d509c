#include "abwave/wavesolver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "abwave/errors.hpp"

namespace abwave {

std::string to_string(Equation e) {
    switch (e) {
        case Equation::SlowMedium: return "slow_medium";
        case Equation::MinimalCoupling: return "minimal_coupling";
        case Equation::General: return "general";
    }
    return "unknown";
}

Equation equation_from_string(const std::string& s) {
    if (s == "slow_medium") return Equation::SlowMedium;
    if (s == "minimal_coupling") return Equation::MinimalCoupling;
    if (s == "general") return Equation::General;
    throw ConfigError("unknown equation '" + s + "' (expected slow_medium, minimal_coupling or general)");
}

MetricFn minimal_coupling_metric_fn(const ScalarFn& refr, const VectorFn& v) {
    return [n = refr, v](Vec2 p) {
        double nn = n(p);
        Vec2 vv = v(p);
        Mat3 g;
        g << nn * nn - vv.dot(vv), vv.x, vv.y, vv.x, -1.0, 0.0, vv.y, 0.0, -1.0;
        return g;
    };
}

MetricFn equation_metric_fn(Equation e, const MediumSpec& medium) {
    if (e == Equation::MinimalCoupling) return minimal_coupling_metric_fn(medium.refr_fn(), medium.v_fn());
    return slow_metric_fn(medium.refr_fn(), medium.v_fn());
}

namespace {

void resize(Coefficients& c, std::size_t n) {
    c.m.resize(n);
    c.bx.resize(n);
    c.by.resize(n);
    c.axx.resize(n);
    c.axy.resize(n);
    c.ayy.resize(n);
    c.g.resize(n);
}

}  // namespace

Coefficients build_coefficients(Equation e, const MediumSpec& medium) {
    if (e == Equation::General) {
        Coefficients c = build_coefficients(MetricTensor::sample(equation_metric_fn(e, medium), medium.grid()));
        c.v = medium.v().v;
        return c;
    }
    Coefficients c;
    c.grid = medium.grid();
    c.equation = e;
    const std::size_t N = c.grid->size();
    resize(c, N);
    c.v = medium.v().v;
    MetricFn gfn = equation_metric_fn(e, medium);
    for (std::size_t k = 0; k < N; ++k) {
        double n = medium.refr().v[k];
        Vec2 v = medium.v().v[k];
        // SlowMedium keeps the full n^2 time coefficient and the weight of its own
        // determinant n^2 + |v|^2; MinimalCoupling drops |v|^2 from g^00, which
        // leaves det = n^2.
        double w, g00;
        if (e == Equation::SlowMedium) {
            g00 = n * n;
            w = 1.0 / std::sqrt(n * n + v.dot(v));
        } else {
            g00 = n * n - v.dot(v);
            w = 1.0 / n;
        }
        c.m[k] = w * g00;
        c.bx[k] = w * v.x;
        c.by[k] = w * v.y;
        c.axx[k] = w;
        c.ayy[k] = w;
        c.axy[k] = 0.0;
        c.g[k] << g00, v.x, v.y, v.x, -1.0, 0.0, v.y, 0.0, -1.0;
        if (v.x != 0.0 || v.y != 0.0) c.has_flow = true;
    }
    return c;
}

Coefficients build_coefficients(const MetricTensor& metric) {
    Coefficients c;
    c.grid = metric.grid;
    c.equation = Equation::General;
    const std::size_t N = c.grid->size();
    resize(c, N);
    c.v.assign(N, Vec2{});
    for (std::size_t k = 0; k < N; ++k) {
        const Mat3& g = metric.g_up[k];
        double w = 1.0 / std::sqrt(std::abs(g.determinant()));
        c.g[k] = g;
        c.m[k] = w * g(0, 0);
        c.bx[k] = w * g(0, 1);
        c.by[k] = w * g(0, 2);
        c.axx[k] = -w * g(1, 1);
        c.axy[k] = -w * g(1, 2);
        c.ayy[k] = -w * g(2, 2);
        c.v[k] = {g(0, 1), g(0, 2)};
        if (g(0, 1) != 0.0 || g(0, 2) != 0.0) c.has_flow = true;
    }
    return c;
}

double characteristic_speed(const Mat3& g) {
    // Roots of g00 w^2 + 2 w (g0 . k) + k^T G k = 0 over unit k.
    double best = 0.0;
    const int samples = 720;
    for (int q = 0; q < samples; ++q) {
        double th = 2.0 * std::numbers::pi * q / samples;
        double kx = std::cos(th), ky = std::sin(th);
        double a = g(0, 0);
        double b = 2.0 * (g(0, 1) * kx + g(0, 2) * ky);
        double c = g(1, 1) * kx * kx + 2.0 * g(1, 2) * kx * ky + g(2, 2) * ky * ky;
        double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
        best = std::max({best, std::abs((-b + disc) / (2 * a)), std::abs((-b - disc) / (2 * a))});
    }
    return best;
}

double cfl_dt(const Coefficients& c, double safety) {
    const Grid2D& g = *c.grid;
    double vmax = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!g.in_obstacle(i, j)) vmax = std::max(vmax, characteristic_speed(c.g[g.idx(i, j)]));
    return safety * std::min(g.dx, g.dy) / vmax;
}

double cfl_dt(const MediumSpec& medium, Equation e, double safety) {
    return cfl_dt(build_coefficients(e, medium), safety);
}

namespace {

// Stencil application on one node; the node must not lie on the outer boundary.
struct Stencil {
    const Coefficients& c;
    int nx;
    double idx2, idy2, i2dx, i2dy, i4dxdy;
    bool cross;

    explicit Stencil(const Coefficients& co)
        : c(co), nx(co.grid->nx), idx2(1.0 / (co.grid->dx * co.grid->dx)), idy2(1.0 / (co.grid->dy * co.grid->dy)),
          i2dx(0.5 / co.grid->dx), i2dy(0.5 / co.grid->dy), i4dxdy(0.25 / (co.grid->dx * co.grid->dy)) {
        cross = std::any_of(co.axy.begin(), co.axy.end(), [](double a) { return a != 0.0; });
    }

    double A(const double* u, int n) const {
        const auto& ax = c.axx;
        const auto& ay = c.ayy;
        double e = 0.5 * (ax[n] + ax[n + 1]), w = 0.5 * (ax[n] + ax[n - 1]);
        double no = 0.5 * (ay[n] + ay[n + nx]), so = 0.5 * (ay[n] + ay[n - nx]);
        double r = -((e * (u[n + 1] - u[n]) - w * (u[n] - u[n - 1])) * idx2 +
                     (no * (u[n + nx] - u[n]) - so * (u[n] - u[n - nx])) * idy2);
        if (cross) {
            const auto& a = c.axy;
            r -= (a[n + 1] * (u[n + 1 + nx] - u[n + 1 - nx]) - a[n - 1] * (u[n - 1 + nx] - u[n - 1 - nx]) +
                  a[n + nx] * (u[n + nx + 1] - u[n + nx - 1]) - a[n - nx] * (u[n - nx + 1] - u[n - nx - 1])) *
                 i4dxdy;
        }
        return r;
    }

    double B(const double* f, int n) const {
        const auto& bx = c.bx;
        const auto& by = c.by;
        return ((bx[n] + bx[n + 1]) * f[n + 1] - (bx[n] + bx[n - 1]) * f[n - 1]) * i2dx +
               ((by[n] + by[n + nx]) * f[n + nx] - (by[n] + by[n - nx]) * f[n - nx]) * i2dy;
    }
};

struct Layers {
    std::vector<int> self, in1, in2;
};

Layers boundary_layers(const Grid2D& g) {
    Layers L;
    for (const auto& b : g.outer_boundary) {
        bool corner = (b.i == 0 || b.i == g.nx - 1) && (b.j == 0 || b.j == g.ny - 1);
        int di = 0, dj = 0;
        if (!corner) {
            if (b.side == 0) dj = 1;
            if (b.side == 1) di = -1;
            if (b.side == 2) dj = -1;
            if (b.side == 3) di = 1;
        }
        L.self.push_back(g.idx(b.i, b.j));
        L.in1.push_back(g.idx(b.i + di, b.j + dj));
        L.in2.push_back(g.idx(b.i + 2 * di, b.j + 2 * dj));
    }
    return L;
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
    const Coefficients& c = cfg.coeffs;
    if (!c.grid) throw MaskError("simulation without a grid");
    const Grid2D& g = *c.grid;
    if (g.nx < 4 || g.ny < 4) throw MaskError("grid too small for the boundary stencil");
    const std::size_t N = g.size();
    if (c.m.size() != N) throw MaskError("coefficients do not match the grid");

    SimResult res;
    double dt = cfg.dt;
    int steps;
    if (dt <= 0.0) {
        double limit = cfl_dt(c, cfg.cfl_safety);
        steps = std::max(1, static_cast<int>(std::ceil(cfg.t_final / limit - 1e-9)));
        dt = cfg.t_final / steps;
    } else {
        steps = std::max(1, static_cast<int>(std::lround(cfg.t_final / dt)));
    }
    res.dt = dt;
    res.steps = steps;

    std::vector<int> unknowns;
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i)
            if (!g.in_obstacle(i, j)) unknowns.push_back(g.idx(i, j));

    Stencil st(c);
    Layers layers = boundary_layers(g);
    const std::size_t nb = layers.self.size();
    std::vector<double> um(N, 0.0), u(N, 0.0), up(N, 0.0), rhs(N, 0.0), iter(N, 0.0), mass_scale(N, 0.0);
    const double idt2 = 1.0 / (dt * dt), i2dt = 0.5 / dt;
    for (int n : unknowns) mass_scale[n] = dt * dt / c.m[n];
    const bool coupled = c.has_flow;
    const double cell = g.dx * g.dy;
    const int stride = std::max(1, cfg.trace_stride);
    res.boundary.dt = dt;

    for (int step = 0; step < steps; ++step) {
        const double t_next = (step + 1) * dt;
        for (std::size_t k = 0; k < nb; ++k) {
            double f = cfg.drive ? cfg.drive(t_next, g.outer_boundary[k]) : 0.0;
            up[layers.self[k]] = f;
            res.max_abs_f = std::max(res.max_abs_f, std::abs(f));
        }

        for (int n : unknowns) {
            double r = c.m[n] * (2.0 * u[n] - um[n]) * idt2 - st.A(u.data(), n);
            if (coupled) r += st.B(um.data(), n) * i2dt;
            rhs[n] = r;
            up[n] = 2.0 * u[n] - um[n];
        }
        if (!coupled) {
            for (int n : unknowns) up[n] = rhs[n] * mass_scale[n];
        } else {
            // The centered flow term couples neighbours at the new level; solve by
            // Jacobi sweeps, which contract with factor ~ dt |b| / (m h).
            int it = 0;
            for (; it < cfg.jacobi_max_iter; ++it) {
                double change = 0.0, scale = 1e-300;
                for (int n : unknowns) iter[n] = (rhs[n] - st.B(up.data(), n) * i2dt) * mass_scale[n];
                for (int n : unknowns) {
                    change = std::max(change, std::abs(iter[n] - up[n]));
                    scale = std::max(scale, std::abs(iter[n]));
                    up[n] = iter[n];
                }
                if (change <= cfg.jacobi_tol * scale) break;
            }
            res.max_jacobi_iter = std::max(res.max_jacobi_iter, it + 1);
        }

        double umax = 0.0;
        for (int n : unknowns) umax = std::max(umax, std::abs(up[n]));
        res.max_abs_u = std::max(res.max_abs_u, umax);
        if (!std::isfinite(umax) || umax > 1e3 * std::max(res.max_abs_f, 1e-300))
            if (umax > 0.0) throw CFLViolation("solution grew beyond 1e3 max|f| at step " + std::to_string(step + 1));

        if (step % stride == 0) {
            auto& B = res.boundary;
            B.t.push_back(step * dt);
            std::vector<double> l0(nb), l1(nb), l2(nb), pv(nb), nxt(nb);
            for (std::size_t k = 0; k < nb; ++k) {
                l0[k] = u[layers.self[k]];
                l1[k] = u[layers.in1[k]];
                l2[k] = u[layers.in2[k]];
                pv[k] = um[layers.self[k]];
                nxt[k] = up[layers.self[k]];
            }
            B.layer0.push_back(std::move(l0));
            B.layer1.push_back(std::move(l1));
            B.layer2.push_back(std::move(l2));
            B.prev.push_back(std::move(pv));
            B.next.push_back(std::move(nxt));
        }
        bool snap = cfg.record == RecordMode::FullHistory ||
                    (cfg.record == RecordMode::Snapshots && step % std::max(1, cfg.snapshot_stride) == 0);
        if (snap) {
            Snapshot s{step, step * dt, ScalarField(c.grid)};
            s.u.v = u;
            res.snapshots.push_back(std::move(s));
        }
        if (cfg.track_energy) {
            double kin = 0.0, pot = 0.0;
            for (int n : unknowns) {
                double d = (up[n] - u[n]) / dt;
                kin += c.m[n] * d * d;
                pot += st.A(up.data(), n) * u[n];
            }
            res.energy.push_back(0.5 * (kin + pot) * cell);
        }
        std::swap(um, u);
        std::swap(u, up);
    }
    res.final_u = ScalarField(c.grid);
    res.final_u.v = u;
    res.final_u_prev = ScalarField(c.grid);
    res.final_u_prev.v = um;
    return res;
}

ScalarField operator_residual(const Coefficients& c, const ScalarField& um, const ScalarField& u, const ScalarField& up,
                              double dt) {
    const Grid2D& g = *c.grid;
    Stencil st(c);
    ScalarField r(c.grid);
    std::vector<double> diff(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) diff[k] = up.v[k] - um.v[k];
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (g.in_obstacle(i, j)) continue;
            int n = g.idx(i, j);
            r.v[n] = c.m[n] * (up.v[n] - 2 * u.v[n] + um.v[n]) / (dt * dt) + st.B(diff.data(), n) / (2 * dt) +
                     st.A(u.v.data(), n);
        }
    return r;
}

SpatialMap SpatialMap::identity() {
    SpatialMap m;
    m.forward = [](Vec2 p) { return p; };
    m.inverse = [](Vec2 p) { return p; };
    m.jacobian = [](Vec2) { return Mat2{1.0, 0.0, 0.0, 1.0}; };
    m.spec = {{"type", "identity"}};
    return m;
}

namespace {

// Smooth step: 1 for t >= 1, 0 for t <= 0.
double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double smooth_step_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double a = std::exp(-1.0 / t), b = std::exp(-1.0 / (1.0 - t));
    double da = a / (t * t), db = -b / ((1.0 - t) * (1.0 - t));
    return (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

}  // namespace

SpatialMap SpatialMap::twist(Vec2 c, double r1, double r2, double angle) {
    SpatialMap m;
    auto theta = [=](double r) { return angle * smooth_step((r2 - r) / (r2 - r1)); };
    auto dtheta = [=](double r) { return -angle * smooth_step_deriv((r2 - r) / (r2 - r1)) / (r2 - r1); };
    auto rotate = [](Vec2 d, double th) {
        double cs = std::cos(th), sn = std::sin(th);
        return Vec2{cs * d.x - sn * d.y, sn * d.x + cs * d.y};
    };
    m.forward = [=](Vec2 p) {
        Vec2 d = p - c;
        return c + rotate(d, theta(d.norm()));
    };
    m.inverse = [=](Vec2 p) {
        Vec2 d = p - c;
        return c + rotate(d, -theta(d.norm()));
    };
    m.jacobian = [=](Vec2 p) {
        Vec2 d = p - c;
        double r = d.norm(), th = theta(r);
        double cs = std::cos(th), sn = std::sin(th);
        Mat2 J{cs, -sn, sn, cs};
        if (r > 0.0) {
            Vec2 rp = rotate(Vec2{-d.y, d.x}, th) * (dtheta(r) / r);
            J.xx += rp.x * d.x;
            J.xy += rp.x * d.y;
            J.yx += rp.y * d.x;
            J.yy += rp.y * d.y;
        }
        return J;
    };
    m.spec = {{"type", "twist"}, {"center", {c.x, c.y}}, {"r_inner", r1}, {"r_outer", r2}, {"angle", angle}};
    return m;
}

Mat3 spacetime_jacobian(const SpaceTimeMap& map, Vec2 x) {
    Mat3 J = Mat3::Zero();
    J(0, 0) = 1.0;
    if (map.a) {
        Vec2 ga = map.a->grad(x);
        J(0, 1) = ga.x;
        J(0, 2) = ga.y;
    }
    Mat2 D = map.phi.jacobian(x);
    J(1, 1) = D.xx;
    J(1, 2) = D.xy;
    J(2, 1) = D.yx;
    J(2, 2) = D.yy;
    return J;
}

MetricFn transform_metric_fn(const MetricFn& g, const SpaceTimeMap& map) {
    return [g, map](Vec2 xhat) {
        Vec2 x = map.phi.inverse(xhat);
        Mat3 J = spacetime_jacobian(map, x);
        return Mat3(J * g(x) * J.transpose());
    };
}

MetricTensor transform_operator(const MetricTensor& metric, const SpaceTimeMap& map) {
    const GridPtr& gp = metric.grid;
    const Grid2D& g = *gp;
    for (const auto& b : g.outer_boundary) {
        Vec2 p = g.node(b.i, b.j);
        if ((map.phi.forward(p) - p).norm() > 1e-12) throw BoundaryError("spatial map moves the outer boundary");
        if (map.a && std::abs(map.a->value(p)) > 1e-12) throw BoundaryError("time shift is nonzero on the outer boundary");
    }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Mat2 D = map.phi.jacobian(g.node(i, j));
            if (D.xx * D.yy - D.xy * D.yx <= 0.0) throw JacobianError("map Jacobian determinant is not positive");
        }
    if (!map.a && map.phi.spec.value("type", "") == "identity") return metric;

    MetricFn src = metric.source;
    if (!src) {
        // Bilinear interpolation of the sampled components.
        auto samples = std::make_shared<const std::vector<Mat3>>(metric.g_up);
        src = [samples, gp](Vec2 p) {
            const Grid2D& gg = *gp;
            double x = (p.x - gg.origin.x) / gg.dx, y = (p.y - gg.origin.y) / gg.dy;
            int i = std::clamp(static_cast<int>(std::floor(x)), 0, gg.nx - 2);
            int j = std::clamp(static_cast<int>(std::floor(y)), 0, gg.ny - 2);
            double fx = x - i, fy = y - j;
            const auto& s = *samples;
            return Mat3((1 - fx) * (1 - fy) * s[gg.idx(i, j)] + fx * (1 - fy) * s[gg.idx(i + 1, j)] +
                        (1 - fx) * fy * s[gg.idx(i, j + 1)] + fx * fy * s[gg.idx(i + 1, j + 1)]);
        };
    }
    MetricTensor out = MetricTensor::sample(transform_metric_fn(src, map), gp);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!g.in_obstacle(i, j) && !minkowski_signature(out.up(i, j)))
                throw JacobianError("transformed metric lost Minkowski signature");
    return out;
}

}  // namespace abwave
