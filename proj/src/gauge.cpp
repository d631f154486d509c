#include "abwave/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "abwave/errors.hpp"

namespace abwave {

namespace {

bool zero_on_outer(const ScalarField& a, double tol) {
    for (const auto& b : a.grid->outer_boundary)
        if (std::abs(a(b.i, b.j)) > tol) return false;
    return true;
}

}  // namespace

GaugeFunction::GaugeFunction(ScalarField a) : a_(std::move(a)) {
    for (double x : a_.v)
        if (!std::isfinite(x)) throw BoundaryError("gauge function has non-finite values");
    if (!zero_on_outer(a_, 1e-12 * std::max(1.0, max_abs())))
        throw BoundaryError("gauge function must vanish on the outer boundary");
    grad_ = grid_gradient(a_);
}

GaugeFunction GaugeFunction::from_fn(const ScalarFn& fn, const GridPtr& grid) {
    GaugeFunction g(sample(fn, grid));
    g.fn_ = fn;
    return g;
}

GaugeFunction GaugeFunction::negated() const {
    ScalarField m = a_;
    for (auto& x : m.v) x = -x;
    GaugeFunction g(std::move(m));
    if (fn_) g.fn_ = fn_->scaled(-1.0);
    return g;
}

double GaugeFunction::max_abs() const {
    double m = 0.0;
    for (double x : a_.v) m = std::max(m, std::abs(x));
    return m;
}

VectorField2D grid_gradient(const ScalarField& a) {
    const Grid2D& g = *a.grid;
    VectorField2D d(a.grid);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double gx, gy;
            if (i == 0)
                gx = (-3 * a(0, j) + 4 * a(1, j) - a(2, j)) / (2 * g.dx);
            else if (i == g.nx - 1)
                gx = (3 * a(i, j) - 4 * a(i - 1, j) + a(i - 2, j)) / (2 * g.dx);
            else
                gx = (a(i + 1, j) - a(i - 1, j)) / (2 * g.dx);
            if (j == 0)
                gy = (-3 * a(i, 0) + 4 * a(i, 1) - a(i, 2)) / (2 * g.dy);
            else if (j == g.ny - 1)
                gy = (3 * a(i, j) - 4 * a(i, j - 1) + a(i, j - 2)) / (2 * g.dy);
            else
                gy = (a(i, j + 1) - a(i, j - 1)) / (2 * g.dy);
            d(i, j) = {gx, gy};
        }
    return d;
}

ScalarField grid_curl(const VectorField2D& v) {
    const Grid2D& g = *v.grid;
    ScalarField c(v.grid);
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (g.in_obstacle(i, j) || g.in_obstacle(i + 1, j) || g.in_obstacle(i - 1, j) || g.in_obstacle(i, j + 1) ||
                g.in_obstacle(i, j - 1))
                continue;
            c(i, j) = (v(i + 1, j).y - v(i - 1, j).y) / (2 * g.dx) - (v(i, j + 1).x - v(i, j - 1).x) / (2 * g.dy);
        }
    return c;
}

VectorField2D apply_gauge(const VectorField2D& v, const GaugeFunction& a, const ScalarField* refr) {
    if (v.grid != a.a().grid) throw HyperbolicityError("flow and gauge live on different grids");
    VectorField2D out(v.grid);
    for (std::size_t n = 0; n < v.v.size(); ++n) out.v[n] = v.v[n] - a.grad_a().v[n];
    if (refr) {
        const Grid2D& g = *v.grid;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                if (g.in_obstacle(i, j)) continue;
                double n = (*refr)(i, j);
                if (out(i, j).dot(out(i, j)) >= n * n) throw HyperbolicityError("|v - grad a| >= n at a fluid node");
            }
    }
    return out;
}

VectorFn apply_gauge(const VectorFn& v, const ScalarFn& a) {
    VectorFn out = v - VectorFn::gradient(a);
    out.spec = {{"type", "gauged"}, {"v", v.spec}, {"a", a.spec}};
    return out;
}

MediumSpec apply_gauge(const MediumSpec& medium, const ScalarFn& a) {
    const Grid2D& g = *medium.grid();
    for (const auto& b : g.outer_boundary)
        if (std::abs(a(g.node(b.i, b.j))) > 1e-12) throw BoundaryError("gauge function must vanish on the outer boundary");
    try {
        return MediumSpec::from_coefficient(medium.grid(), medium.refr_fn(), apply_gauge(medium.v_fn(), a), medium.c(),
                                            medium.guard());
    } catch (const SignatureError& e) {
        throw HyperbolicityError(std::string("gauged flow violates the guard: ") + e.what());
    }
}

LoopPath obstacle_loop(const Grid2D& g, int k) {
    int ilo = g.nx, ihi = -1, jlo = g.ny, jhi = -1;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (g.cell_kind[g.idx(i, j)] == k + 1) {
                ilo = std::min(ilo, i);
                ihi = std::max(ihi, i);
                jlo = std::min(jlo, j);
                jhi = std::max(jhi, j);
            }
    ilo = std::max(ilo - 1, 0);
    jlo = std::max(jlo - 1, 0);
    ihi = std::min(ihi + 1, g.nx - 1);
    jhi = std::min(jhi + 1, g.ny - 1);
    std::vector<Vec2> pts;
    for (int i = ilo; i < ihi; ++i) pts.push_back(g.node(i, jlo));
    for (int j = jlo; j < jhi; ++j) pts.push_back(g.node(ihi, j));
    for (int i = ihi; i > ilo; --i) pts.push_back(g.node(i, jhi));
    for (int j = jhi; j > jlo; --j) pts.push_back(g.node(ilo, j));
    return LoopPath::close(std::move(pts));
}

WitnessResult try_same_class_witness(const VectorField2D& v, const VectorField2D& vhat, WitnessOptions opt) {
    if (v.grid != vhat.grid) throw CurlError("fields live on different grids");
    const GridPtr& gp = v.grid;
    const Grid2D& g = *gp;
    WitnessResult res;

    VectorField2D d(gp);
    double maxd = 0.0;
    for (std::size_t n = 0; n < d.v.size(); ++n) {
        d.v[n] = v.v[n] - vhat.v[n];
        if (g.cell_kind[n] <= 0) maxd = std::max(maxd, d.v[n].norm());
    }

    for (int k = 0; k < g.obstacle_count(); ++k) {
        LoopPath loop = obstacle_loop(g, k);
        double hol = line_integral(d, loop);
        res.holonomy.push_back(hol);
        if (std::abs(hol) > opt.loop_rel * maxd * loop.length()) {
            res.failure = "HolonomyError";
            return res;
        }
    }

    ScalarField curl = grid_curl(d);
    for (int j = 2; j < g.ny - 2; ++j)
        for (int i = 2; i < g.nx - 2; ++i) res.worst_curl = std::max(res.worst_curl, std::abs(curl(i, j)));
    if (res.worst_curl > opt.curl_rel * maxd) {
        res.failure = "CurlError";
        return res;
    }

    // Breadth-first integration from the lower-left corner along grid edges.
    // Path mismatches of a curl-free field are O(h^2); a mismatch on the scale
    // of the field itself means the potential is multi-valued.
    const double tol = opt.loop_rel * maxd * g.diameter();
    const double multi_tol = 0.1 * maxd * g.diameter();
    ScalarField a(gp);
    std::vector<char> seen(g.size(), 0);
    std::deque<std::pair<int, int>> todo{{0, 0}};
    seen[0] = 1;
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    auto increment = [&](int i, int j, int q) {
        int a2 = i + di[q], b2 = j + dj[q];
        Vec2 m = (d(i, j) + d(a2, b2)) * 0.5;
        return m.x * di[q] * g.dx + m.y * dj[q] * g.dy;
    };
    while (!todo.empty()) {
        auto [i, j] = todo.front();
        todo.pop_front();
        for (int q = 0; q < 4; ++q) {
            int a2 = i + di[q], b2 = j + dj[q];
            if (a2 < 0 || b2 < 0 || a2 >= g.nx || b2 >= g.ny || g.in_obstacle(a2, b2)) continue;
            double val = a(i, j) + increment(i, j, q);
            int n2 = g.idx(a2, b2);
            if (!seen[n2]) {
                seen[n2] = 1;
                a.v[n2] = val;
                todo.emplace_back(a2, b2);
            } else if (std::abs(a.v[n2] - val) > multi_tol) {
                res.failure = "HolonomyError";
                return res;
            }
        }
    }

    double lo = 1e300, hi = -1e300, mean = 0.0;
    for (const auto& b : g.outer_boundary) {
        lo = std::min(lo, a(b.i, b.j));
        hi = std::max(hi, a(b.i, b.j));
        mean += a(b.i, b.j);
    }
    mean /= static_cast<double>(g.outer_boundary.size());
    if (hi - lo > tol) {
        res.failure = "BoundaryError";
        return res;
    }
    for (std::size_t n = 0; n < a.v.size(); ++n)
        if (seen[n]) a.v[n] -= mean;
    for (const auto& b : g.outer_boundary) a(b.i, b.j) = 0.0;

    // Fill obstacle nodes by linear extrapolation from the fluid, layer by layer.
    bool progress = true;
    while (progress) {
        progress = false;
        std::vector<std::pair<int, double>> fill;
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                if (seen[g.idx(i, j)]) continue;
                for (int q = 0; q < 4; ++q) {
                    int a1 = i + di[q], b1 = j + dj[q], a2 = i + 2 * di[q], b2 = j + 2 * dj[q];
                    if (a2 < 0 || b2 < 0 || a2 >= g.nx || b2 >= g.ny) continue;
                    if (seen[g.idx(a1, b1)] && seen[g.idx(a2, b2)]) {
                        fill.emplace_back(g.idx(i, j), 2 * a(a1, b1) - a(a2, b2));
                        break;
                    }
                }
            }
        for (auto& [n, val] : fill) {
            a.v[n] = val;
            seen[n] = 1;
            progress = true;
        }
    }
    res.a.emplace(std::move(a));
    return res;
}

GaugeFunction same_class_witness(const VectorField2D& v, const VectorField2D& vhat, WitnessOptions opt) {
    WitnessResult r = try_same_class_witness(v, vhat, opt);
    if (r.failure == "HolonomyError") throw HolonomyError("nonzero loop integral of v - vhat: different classes");
    if (r.failure == "CurlError") throw CurlError("v - vhat is not curl free");
    if (r.failure == "BoundaryError") throw BoundaryError("potential of v - vhat is not constant on the outer boundary");
    return *r.a;
}

namespace {

bool phases_match(double diff, double tol) { return std::abs(std::remainder(diff, 2.0 * std::numbers::pi)) < tol; }

}  // namespace

bool wu_yang_equal(const VectorField2D& A, const VectorField2D& Aprime, const std::vector<LoopPath>& loops, double tol) {
    for (const auto& l : loops)
        if (!phases_match(line_integral(A, l) - line_integral(Aprime, l), tol)) return false;
    return true;
}

bool wu_yang_equal(const VectorFn& A, const VectorFn& Aprime, const std::vector<LoopPath>& loops, double tol) {
    for (const auto& l : loops)
        if (!phases_match(line_integral(A, l) - line_integral(Aprime, l), tol)) return false;
    return true;
}

}  // namespace abwave
