#include "abwave/goursat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include "abwave/errors.hpp"

namespace abwave {

namespace {

// Weights of the 4-point Lagrange interpolant at offset r from node 0.
std::array<double, 4> lagrange4(double r) {
    std::array<double, 4> w{};
    for (int m = 0; m < 4; ++m) {
        double p = 1.0;
        for (int l = 0; l < 4; ++l)
            if (l != m) p *= (r - l) / static_cast<double>(m - l);
        w[m] = p;
    }
    return w;
}

// Base index and offset on a uniform axis of n nodes; exact nodes snap.
std::pair<int, double> locate(double u, int n) {
    double near = std::round(u);
    if (std::abs(u - near) < 1e-12) u = near;
    int b = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, n - 4);
    return {b, u - b};
}

// Interpolates y(X) at x from sorted nodes X with 4-point Lagrange.
double interp_sorted(const std::vector<double>& X, const std::vector<double>& Y, double x) {
    const int n = static_cast<int>(X.size());
    int j = static_cast<int>(std::upper_bound(X.begin(), X.end(), x) - X.begin());
    int b = std::clamp(j - 2, 0, n - 4);
    double sum = 0.0;
    for (int m = 0; m < 4; ++m) {
        double p = 1.0;
        for (int l = 0; l < 4; ++l)
            if (l != m) p *= (x - X[b + l]) / (X[b + m] - X[b + l]);
        sum += p * Y[b + m];
    }
    return sum;
}

Mat3 metric_derivative(const std::function<Mat3(Vec2)>& g, Vec2 p, Vec2 dir, double h) {
    return (g(p - dir * (2 * h)) - 8.0 * g(p - dir * h) + 8.0 * g(p + dir * h) - g(p + dir * (2 * h))) / (12.0 * h);
}

Eigen::Vector2d ev(Vec2 p) { return {p.x, p.y}; }

// Hamiltonian of one eiconal family in local components.
double family_h(const Mat3& g, int sigma, Eigen::Vector2d p) {
    Eigen::Vector2d g0(g(0, 1), g(0, 2));
    return g(0, 0) + 2.0 * sigma * g0.dot(p) + p.dot(g.block<2, 2>(1, 1) * p);
}

constexpr double kMetricStep = 1e-4;

struct LocalMetric {
    const MetricFn& g;
    const Patch& patch;
    Mat3 at(Vec2 l) const { return local_metric(g, patch, l); }
    Mat3 d(Vec2 l, int axis) const {
        auto f = [this](Vec2 q) { return at(q); };
        return metric_derivative(f, l, axis == 0 ? Vec2{1, 0} : Vec2{0, 1}, kMetricStep);
    }
};

// Ray state (x', p', p_n, phi) advanced in x_n.
using RayVec = std::array<double, 4>;

RayVec ray_rhs(const LocalMetric& m, int sigma, double xn, const RayVec& y) {
    Vec2 x{y[0], xn};
    Mat3 g = m.at(x);
    Eigen::Vector2d p(y[1], y[2]);
    Eigen::Vector2d g0(g(0, 1), g(0, 2));
    Eigen::Vector2d F = 2.0 * (sigma * g0 + g.block<2, 2>(1, 1) * p);
    if (F.y() <= 1e-12 * F.norm()) throw CausticError("characteristic turned tangent to the boundary");
    double H[2];
    for (int a = 0; a < 2; ++a) {
        Mat3 dg = m.d(x, a);
        Eigen::Vector2d dg0(dg(0, 1), dg(0, 2));
        H[a] = dg(0, 0) + 2.0 * sigma * dg0.dot(p) + p.dot(dg.block<2, 2>(1, 1) * p);
    }
    return {F.x() / F.y(), -H[0] / F.y(), -H[1] / F.y(), p.dot(F) / F.y()};
}

double initial_pn(const LocalMetric& m, int sigma, double a0) {
    Mat3 g = m.at({a0, 0.0});
    double disc = g(0, 2) * g(0, 2) - g(0, 0) * g(2, 2);
    if (disc <= 0.0) throw ChartError("boundary patch is not transversal to the characteristic cone");
    return (-sigma * g(0, 2) + std::sqrt(disc)) / g(2, 2);
}

// Values carried by one ray family on each lattice row.
struct FamilyRows {
    std::vector<std::vector<double>> X, phi, pt, pn, d1t, d1n;
    std::vector<double> a0;
    double drift = 0.0;
};

FamilyRows march_family(const LocalMetric& m, int sigma, const ChartLattice& lat, int steps_per_row, double margin,
                        bool variation) {
    const double ht = (lat.t_hi - lat.t_lo) / (lat.nt - 1);
    const double da = 0.5 * ht;
    const double hn = lat.delta / (lat.nn - 1);
    const double dxn = hn / steps_per_row;
    const int nrays = static_cast<int>(std::ceil((lat.t_hi - lat.t_lo + 2 * margin) / da)) + 1;
    const double start = 0.5 * (lat.t_lo + lat.t_hi) - 0.5 * (nrays - 1) * da;

    FamilyRows out;
    auto alloc = [&](std::vector<std::vector<double>>& v) { v.assign(lat.nn, std::vector<double>(nrays)); };
    alloc(out.X), alloc(out.phi), alloc(out.pt), alloc(out.pn);
    if (variation) alloc(out.d1t), alloc(out.d1n);
    out.a0.resize(nrays);

    using Full = std::array<double, 7>;  // ray state then (dx', dp', dp_n) / d a0
    auto rhs = [&](double xn, const Full& s) {
        RayVec y{s[0], s[1], s[2], s[3]};
        RayVec f = ray_rhs(m, sigma, xn, y);
        Full out{f[0], f[1], f[2], f[3], 0, 0, 0};
        if (variation) {
            double jn = std::max({std::abs(s[4]), std::abs(s[5]), std::abs(s[6]), 1.0});
            double eps = 1e-5 / jn;
            RayVec yp = y, ym = y;
            for (int q = 0; q < 3; ++q) yp[q] += eps * s[4 + q], ym[q] -= eps * s[4 + q];
            RayVec fp = ray_rhs(m, sigma, xn, yp), fm = ray_rhs(m, sigma, xn, ym);
            for (int q = 0; q < 3; ++q) out[4 + q] = (fp[q] - fm[q]) / (2 * eps);
        }
        return out;
    };
    auto record = [&](int k, int r, double xn, const Full& s) {
        out.X[k][r] = s[0];
        out.phi[k][r] = s[3];
        out.pt[k][r] = s[1];
        out.pn[k][r] = s[2];
        if (variation) {
            RayVec f = ray_rhs(m, sigma, xn, {s[0], s[1], s[2], s[3]});
            out.d1t[k][r] = 1.0 / s[4];
            out.d1n[k][r] = -f[0] / s[4];
        }
        Mat3 g = m.at({s[0], xn});
        out.drift = std::max(out.drift, std::abs(family_h(g, sigma, {s[1], s[2]})));
    };

    for (int r = 0; r < nrays; ++r) {
        const double a0 = start + r * da;
        out.a0[r] = a0;
        Full s{a0, 0.0, initial_pn(m, sigma, a0), 0.0, 1.0, 0.0, 0.0};
        if (variation) {
            const double e = 1e-5;
            s[6] = (initial_pn(m, sigma, a0 + e) - initial_pn(m, sigma, a0 - e)) / (2 * e);
        }
        record(0, r, 0.0, s);
        double xn = 0.0;
        for (int k = 1; k < lat.nn; ++k) {
            for (int q = 0; q < steps_per_row; ++q) {
                auto add = [](const Full& a, const Full& b, double c) {
                    Full o;
                    for (int z = 0; z < 7; ++z) o[z] = a[z] + c * b[z];
                    return o;
                };
                Full k1 = rhs(xn, s);
                Full k2 = rhs(xn + 0.5 * dxn, add(s, k1, 0.5 * dxn));
                Full k3 = rhs(xn + 0.5 * dxn, add(s, k2, 0.5 * dxn));
                Full k4 = rhs(xn + dxn, add(s, k3, dxn));
                for (int z = 0; z < 7; ++z) s[z] += dxn / 6.0 * (k1[z] + 2 * k2[z] + 2 * k3[z] + k4[z]);
                xn = (k - 1) * hn + (q + 1) * dxn;
            }
            xn = k * hn;
            record(k, r, xn, s);
        }
    }
    for (int k = 0; k < lat.nn; ++k)
        for (int r = 0; r + 1 < nrays; ++r)
            if (!(out.X[k][r + 1] > out.X[k][r])) throw CausticError("neighbouring characteristics cross in the collar");
    return out;
}

bool covers(const FamilyRows& f, const ChartLattice& lat) {
    for (const auto& row : f.X) {
        if (row.size() < 6) return false;
        if (row[1] > lat.t_lo || row[row.size() - 2] < lat.t_hi) return false;
    }
    return true;
}

FamilyRows march_covering(const LocalMetric& m, int sigma, const ChartLattice& lat, int steps, bool variation) {
    const double ht = (lat.t_hi - lat.t_lo) / (lat.nt - 1);
    double margin = 0.25 * lat.delta + 2 * ht;
    for (int attempt = 0; attempt < 4; ++attempt, margin *= 2) {
        FamilyRows f = march_family(m, sigma, lat, steps, margin, variation);
        if (covers(f, lat)) return f;
    }
    throw ChartError("characteristics do not cover the collar");
}

ChartField rows_to_lattice(const FamilyRows& f, const std::vector<std::vector<double>>& vals,
                           const ChartLattice& lat) {
    ChartField out = lat.field();
    for (int k = 0; k < lat.nn; ++k)
        for (int i = 0; i < lat.nt; ++i) out(i, k) = interp_sorted(f.X[k], vals[k], lat.node(i, k).x);
    return out;
}

// Fourth-order lattice gradient of a chart field.
Vec2 lattice_grad(const ChartField& f, int i, int k) {
    double dt = fd1([&](int q) { return f(q, k); }, i, f.nt, f.ht);
    double dn = fd1([&](int q) { return f(i, q); }, k, f.nn, f.hn);
    return {dt, dn};
}

Vec2 solve2(double a, double b, double c, double d, Vec2 r) {
    double det = a * d - b * c;
    if (std::abs(det) < 1e-12) throw NonInvertibleError("degenerate Jacobian of the characteristic map");
    return {(d * r.x - b * r.y) / det, (a * r.y - c * r.x) / det};
}

// Spatial point with phi_1 = y1 and -(phi+ + phi-) / 2 = yn.
Vec2 invert_spatial(const EiconalSolution& e, const TransversalSolution& t, double y1, double yn) {
    Vec2 base{y1, 0.0};
    double rate = -0.5 * (e.dplus_n.at(base) + e.dminus_n.at(base));
    Vec2 x{y1, rate > 0 ? yn / rate : yn};
    for (int it = 0; it < 60; ++it) {
        Vec2 F{t.phi_1.at(x) - y1, -0.5 * (e.phi_plus.at(x) + e.phi_minus.at(x)) - yn};
        if (std::max(std::abs(F.x), std::abs(F.y)) < 1e-14) return x;
        double a = t.d1_t.at(x), b = t.d1_n.at(x);
        double c = -0.5 * (e.dplus_t.at(x) + e.dminus_t.at(x)), d = -0.5 * (e.dplus_n.at(x) + e.dminus_n.at(x));
        Vec2 step = solve2(a, b, c, d, F);
        x = x - step;
        if (std::max(std::abs(step.x), std::abs(step.y)) < 1e-15) return x;
    }
    Vec2 F{t.phi_1.at(x) - y1, -0.5 * (e.phi_plus.at(x) + e.phi_minus.at(x)) - yn};
    if (std::max(std::abs(F.x), std::abs(F.y)) < 1e-11) return x;
    throw NonInvertibleError("Newton inversion of the characteristic map did not converge");
}

}  // namespace

Patch Patch::side(const Grid2D& grid, int side, double lo, double hi) {
    Vec2 a = grid.origin, b = grid.upper();
    Patch p;
    double len = 0.0;
    switch (side) {
        case 0: p.origin = a, p.tangent = {1, 0}, len = b.x - a.x; break;
        case 1: p.origin = {b.x, a.y}, p.tangent = {0, 1}, len = b.y - a.y; break;
        case 2: p.origin = b, p.tangent = {-1, 0}, len = b.x - a.x; break;
        case 3: p.origin = {a.x, b.y}, p.tangent = {0, -1}, len = b.y - a.y; break;
        default: throw ChartError("side index must be 0..3");
    }
    if (!(lo >= 0.0 && hi <= 1.0 && lo < hi)) throw ChartError("patch fractions must satisfy 0 <= lo < hi <= 1");
    p.inward = {-p.tangent.y, p.tangent.x};
    p.t_lo = lo * len;
    p.t_hi = hi * len;
    return p;
}

Mat3 local_metric(const MetricFn& g, const Patch& patch, Vec2 local) {
    Mat3 R = Mat3::Zero();
    R(0, 0) = 1.0;
    R(1, 1) = patch.tangent.x, R(1, 2) = patch.tangent.y;
    R(2, 1) = patch.inward.x, R(2, 2) = patch.inward.y;
    return R * g(patch.to_global(local)) * R.transpose();
}

double ChartField::at(Vec2 local) const {
    auto [bi, ri] = locate((local.x - t0) / ht, nt);
    auto [bk, rk] = locate(local.y / hn, nn);
    auto wi = lagrange4(ri), wk = lagrange4(rk);
    double sum = 0.0;
    for (int b = 0; b < 4; ++b) {
        double row = 0.0;
        for (int a = 0; a < 4; ++a) row += wi[a] * (*this)(bi + a, bk + b);
        sum += wk[b] * row;
    }
    return sum;
}

ChartField ChartLattice::field() const {
    ChartField f;
    f.nt = nt, f.nn = nn, f.t0 = t_lo;
    f.ht = (t_hi - t_lo) / (nt - 1);
    f.hn = delta / (nn - 1);
    f.v.assign(static_cast<std::size_t>(nt) * nn, 0.0);
    return f;
}

Vec2 ChartLattice::node(int i, int k) const {
    return {t_lo + i * (t_hi - t_lo) / (nt - 1), k * delta / (nn - 1)};
}

double fd1(const std::function<double(int)>& f, int i, int n, double h) {
    if (n < 6) throw ChartError("fourth-order differences need at least 6 nodes");
    if (i >= 2 && i <= n - 3) return (f(i - 2) - 8 * f(i - 1) + 8 * f(i + 1) - f(i + 2)) / (12 * h);
    double s = 1.0;
    std::function<double(int)> g = f;
    if (i > n - 3) {
        s = -1.0;
        i = n - 1 - i;
        g = [&f, n](int q) { return f(n - 1 - q); };
    }
    if (i == 0) return s * (-25 * g(0) + 48 * g(1) - 36 * g(2) + 16 * g(3) - 3 * g(4)) / (12 * h);
    return s * (-3 * g(0) - 10 * g(1) + 18 * g(2) - 6 * g(3) + g(4)) / (12 * h);
}

double fd2(const std::function<double(int)>& f, int i, int n, double h) {
    if (n < 6) throw ChartError("fourth-order differences need at least 6 nodes");
    if (i >= 2 && i <= n - 3) return (-f(i - 2) + 16 * f(i - 1) - 30 * f(i) + 16 * f(i + 1) - f(i + 2)) / (12 * h * h);
    std::function<double(int)> g = f;
    if (i > n - 3) {
        i = n - 1 - i;
        g = [&f, n](int q) { return f(n - 1 - q); };
    }
    if (i == 0) return (45 * g(0) - 154 * g(1) + 214 * g(2) - 156 * g(3) + 61 * g(4) - 10 * g(5)) / (12 * h * h);
    return (10 * g(0) - 15 * g(1) - 4 * g(2) + 14 * g(3) - 6 * g(4) + g(5)) / (12 * h * h);
}

EiconalSolution solve_eiconal(const MetricFn& g, const Patch& patch, const ChartLattice& lattice, int steps_per_row) {
    if (lattice.nt < 6 || lattice.nn < 6) throw ChartError("chart lattice needs at least 6 nodes per direction");
    if (steps_per_row < 1 || !(lattice.delta > 0.0)) throw ChartError("collar depth and ODE steps must be positive");
    LocalMetric m{g, patch};
    EiconalSolution e;
    e.patch = patch;
    e.lattice = lattice;
    e.steps_per_row = steps_per_row;
    FamilyRows plus = march_covering(m, +1, lattice, steps_per_row, false);
    FamilyRows minus = march_covering(m, -1, lattice, steps_per_row, false);
    e.phi_plus = rows_to_lattice(plus, plus.phi, lattice);
    e.phi_minus = rows_to_lattice(minus, minus.phi, lattice);
    e.dplus_t = rows_to_lattice(plus, plus.pt, lattice);
    e.dplus_n = rows_to_lattice(plus, plus.pn, lattice);
    e.dminus_t = rows_to_lattice(minus, minus.pt, lattice);
    e.dminus_n = rows_to_lattice(minus, minus.pn, lattice);
    for (int i = 0; i < lattice.nt; ++i) e.phi_plus(i, 0) = e.phi_minus(i, 0) = 0.0;
    e.ray_drift = std::max(plus.drift, minus.drift);
    for (int k = 0; k < lattice.nn; ++k)
        for (int i = 0; i < lattice.nt; ++i) {
            Mat3 gl = m.at(lattice.node(i, k));
            e.residual = std::max(e.residual, std::abs(family_h(gl, +1, ev(lattice_grad(e.phi_plus, i, k)))));
            e.residual = std::max(e.residual, std::abs(family_h(gl, -1, ev(lattice_grad(e.phi_minus, i, k)))));
        }
    return e;
}

TransversalSolution solve_transversal(const EiconalSolution& eic, const MetricFn& g) {
    LocalMetric m{g, eic.patch};
    const ChartLattice& lat = eic.lattice;
    FamilyRows minus = march_covering(m, -1, lat, eic.steps_per_row, true);
    std::vector<std::vector<double>> start(lat.nn, minus.a0);
    TransversalSolution t;
    t.phi_1 = rows_to_lattice(minus, start, lat);
    t.d1_t = rows_to_lattice(minus, minus.d1t, lat);
    t.d1_n = rows_to_lattice(minus, minus.d1n, lat);
    for (int i = 0; i < lat.nt; ++i) t.phi_1(i, 0) = lat.node(i, 0).x;
    for (int k = 0; k < lat.nn; ++k)
        for (int i = 0; i < lat.nt; ++i) {
            Mat3 gl = m.at(lat.node(i, k));
            Eigen::Vector2d dm = ev(lattice_grad(eic.phi_minus, i, k));
            Eigen::Vector2d d1 = ev(lattice_grad(t.phi_1, i, k));
            Eigen::Vector2d X = gl.block<2, 2>(1, 1) * dm - Eigen::Vector2d(gl(0, 1), gl(0, 2));
            t.residual = std::max(t.residual, std::abs(d1.dot(X)));
        }
    return t;
}

std::vector<double> v1_lattice(int n1, int nn, double h1, double hn, const std::vector<double>& A,
                               const std::vector<double>& g11, const std::vector<double>& g01) {
    const std::size_t N = static_cast<std::size_t>(n1) * nn;
    auto at = [n1](int i, int k) { return static_cast<std::size_t>(k) * n1 + i; };
    auto d1 = [&](const std::vector<double>& f, int i, int k) {
        return fd1([&](int q) { return f[at(q, k)]; }, i, n1, h1);
    };
    auto dn = [&](const std::vector<double>& f, int i, int k) {
        return fd1([&](int q) { return f[at(i, q)]; }, k, nn, hn);
    };
    std::vector<double> A1(N), An(N), P(N), Q(N), R(N), V(N);
    for (int k = 0; k < nn; ++k)
        for (int i = 0; i < n1; ++i) {
            std::size_t q = at(i, k);
            A1[q] = d1(A, i, k);
            An[q] = dn(A, i, k);
            P[q] = g11[q] * A1[q];
            Q[q] = g01[q] * A1[q];
            R[q] = g01[q] * An[q];
        }
    for (int k = 0; k < nn; ++k)
        for (int i = 0; i < n1; ++i) {
            std::size_t q = at(i, k);
            double Ann = fd2([&](int z) { return A[at(i, z)]; }, k, nn, hn);
            V[q] = Ann + An[q] * An[q] - d1(P, i, k) - g11[q] * A1[q] * A1[q] + dn(Q, i, k) + d1(R, i, k) +
                   2.0 * g01[q] * A1[q] * An[q];
        }
    return V;
}

GoursatCoefficients transformed_coeffs(const EiconalSolution& eic, const TransversalSolution& tr, const MetricFn& g,
                                       int n1, int nn) {
    const ChartLattice& lat = eic.lattice;
    GoursatCoefficients c;
    c.n1 = n1 > 0 ? n1 : lat.nt;
    c.nn = nn > 0 ? nn : lat.nn;
    if (c.n1 < 6 || c.nn < 6) throw ChartError("coefficient lattice needs at least 6 nodes per direction");
    const double W = lat.t_hi - lat.t_lo;
    c.y1_lo = lat.t_lo + 0.15 * W;
    c.h1 = 0.7 * W / (c.n1 - 1);
    double top = std::numeric_limits<double>::infinity();
    for (int i = 0; i < lat.nt; ++i)
        top = std::min(top, -0.5 * (eic.phi_plus(i, lat.nn - 1) + eic.phi_minus(i, lat.nn - 1)));
    if (!(top > 0.0)) throw ChartError("characteristic coordinate y_n does not grow into the collar");
    c.hn = 0.9 * top / (c.nn - 1);

    const std::size_t N = static_cast<std::size_t>(c.n1) * c.nn;
    for (auto* v : {&c.g11, &c.g01, &c.gnn, &c.A, &c.hat_pm, &c.hat_p1, &c.hat_11, &c.det_up, &c.hat_ss, &c.hat_tt,
                    &c.hat_t1})
        v->assign(N, 0.0);
    c.x_local.assign(N, Vec2{});
    for (int k = 0; k < c.nn; ++k)
        for (int i = 0; i < c.n1; ++i) {
            std::size_t q = c.idx(i, k);
            Vec2 x = invert_spatial(eic, tr, c.y1(i), c.yn(k));
            c.x_local[q] = x;
            Mat3 J;
            J << 1.0, eic.dplus_t.at(x), eic.dplus_n.at(x), -1.0, eic.dminus_t.at(x), eic.dminus_n.at(x), 0.0,
                tr.d1_t.at(x), tr.d1_n.at(x);
            Mat3 hat = J * local_metric(g, eic.patch, x) * J.transpose();
            double pm = -0.5 * hat(0, 1);
            if (!(pm > 0.0)) throw ChartError("transformed cross coefficient is not positive");
            c.hat_pm[q] = pm;
            c.hat_p1[q] = 0.5 * hat(0, 2);
            c.hat_11[q] = hat(2, 2);
            c.hat_ss[q] = hat(0, 0);
            c.hat_tt[q] = hat(1, 1);
            c.hat_t1[q] = hat(1, 2);
            c.det_up[q] = hat.determinant();
            c.g11[q] = hat(2, 2) / pm;
            c.g01[q] = c.hat_p1[q] / pm;
            c.gnn[q] = -1.0 + (hat(0, 0) + hat(1, 1)) / (4.0 * pm);
            double abs_g = 1.0 / std::abs(c.det_up[q]);
            c.A[q] = std::log(std::sqrt(pm) * std::pow(abs_g, 0.25));
        }
    c.V1 = v1_lattice(c.n1, c.nn, c.h1, c.hn, c.A, c.g11, c.g01);
    return c;
}

GoursatChart build_chart(const MetricFn& g, const Grid2D& grid, const ChartOptions& opt) {
    GoursatChart chart;
    chart.metric = g;
    chart.patch = Patch::side(grid, opt.side, opt.patch_lo, opt.patch_hi);
    ChartLattice lat;
    lat.t_lo = chart.patch.t_lo;
    lat.t_hi = chart.patch.t_hi;
    lat.delta = opt.delta > 0.0 ? opt.delta : 0.1 * grid.diameter();
    lat.nt = opt.nt;
    lat.nn = opt.nn;
    for (int attempt = 0;; ++attempt) {
        try {
            for (int k = 0; k < lat.nn; ++k)
                for (int i = 0; i < lat.nt; ++i)
                    if (grid.point_in_obstacle(chart.patch.to_global(lat.node(i, k))))
                        throw ChartError("collar intersects an obstacle");
            chart.eiconal = solve_eiconal(g, chart.patch, lat, opt.steps_per_row);
            chart.transversal = solve_transversal(chart.eiconal, g);
            break;
        } catch (const CausticError&) {
            if (attempt > 0) throw;
            lat.delta *= 0.5;
        }
    }
    chart.T = opt.T > 0.0 ? opt.T : 2.0 * lat.delta;
    chart.coeffs = transformed_coeffs(chart.eiconal, chart.transversal, g);
    return chart;
}

GoursatPoint to_goursat(const GoursatChart& chart, SpacetimePoint p) {
    return {p.x0 + chart.eiconal.phi_plus.at(p.local), chart.T - p.x0 + chart.eiconal.phi_minus.at(p.local),
            chart.transversal.phi_1.at(p.local)};
}

CharPoint to_characteristic(const GoursatChart& chart, SpacetimePoint p) {
    double fp = chart.eiconal.phi_plus.at(p.local), fm = chart.eiconal.phi_minus.at(p.local);
    return {p.x0 + 0.5 * (fp - fm), chart.transversal.phi_1.at(p.local), -0.5 * (fp + fm)};
}

CharPoint to_characteristic(const GoursatChart& chart, GoursatPoint p) {
    return {0.5 * (p.s - p.tau + chart.T), p.y1, 0.5 * (chart.T - p.s - p.tau)};
}

SpacetimePoint from_characteristic(const GoursatChart& chart, CharPoint p) {
    Vec2 x = invert_spatial(chart.eiconal, chart.transversal, p.y1, p.yn);
    double fp = chart.eiconal.phi_plus.at(x), fm = chart.eiconal.phi_minus.at(x);
    return {p.y0 - 0.5 * (fp - fm), x};
}

SpacetimePoint from_goursat(const GoursatChart& chart, GoursatPoint p) {
    return from_characteristic(chart, to_characteristic(chart, p));
}

Eigen::SparseMatrix<double> assemble_l1(const GoursatCoefficients& c, int n0, double h0) {
    if (n0 < 3 || c.n1 < 3 || c.nn < 3) throw ChartError("L1 lattice needs at least 3 nodes per direction");
    const int m0 = n0 - 2, m1 = c.n1 - 2, mn = c.nn - 2;
    const int N = m0 * m1 * mn;
    auto id = [&](int p, int i, int k) { return (p - 1) + m0 * ((i - 1) + m1 * (k - 1)); };
    auto inside = [&](int p, int i, int k) {
        return p >= 1 && p <= n0 - 2 && i >= 1 && i <= c.n1 - 2 && k >= 1 && k <= c.nn - 2;
    };
    using Trip = Eigen::Triplet<double>;
    using SpMat = Eigen::SparseMatrix<double>;
    auto build = [&](auto&& emit) {
        std::vector<Trip> t;
        for (int k = 1; k <= c.nn - 2; ++k)
            for (int i = 1; i <= c.n1 - 2; ++i)
                for (int p = 1; p <= n0 - 2; ++p)
                    emit(p, i, k, [&](int pp, int ii, int kk, double w) {
                        if (inside(pp, ii, kk)) t.emplace_back(id(p, i, k), id(pp, ii, kk), w);
                    });
        SpMat M(N, N);
        M.setFromTriplets(t.begin(), t.end());
        return M;
    };
    SpMat D0 = build([&](int p, int i, int k, auto add) {
        add(p + 1, i, k, 0.5 / h0), add(p - 1, i, k, -0.5 / h0);
    });
    SpMat D1 = build([&](int p, int i, int k, auto add) {
        add(p, i + 1, k, 0.5 / c.h1), add(p, i - 1, k, -0.5 / c.h1);
    });
    SpMat Dn = build([&](int p, int i, int k, auto add) {
        add(p, i, k + 1, 0.5 / c.hn), add(p, i, k - 1, -0.5 / c.hn);
    });
    SpMat G = build([&](int p, int i, int k, auto add) { add(p, i, k, c.g01[c.idx(i, k)]); });
    SpMat second = build([&](int p, int i, int k, auto add) {
        add(p + 1, i, k, 1.0 / (h0 * h0)), add(p - 1, i, k, 1.0 / (h0 * h0));
        add(p, i, k + 1, -1.0 / (c.hn * c.hn)), add(p, i, k - 1, -1.0 / (c.hn * c.hn));
        double gp = 0.5 * (c.g11[c.idx(i, k)] + c.g11[c.idx(i + 1, k)]) / (c.h1 * c.h1);
        double gm = 0.5 * (c.g11[c.idx(i, k)] + c.g11[c.idx(i - 1, k)]) / (c.h1 * c.h1);
        add(p, i + 1, k, gp), add(p, i - 1, k, gm);
        double diag = -2.0 / (h0 * h0) + 2.0 / (c.hn * c.hn) - gp - gm + c.V1[c.idx(i, k)];
        add(p, i, k, diag);
    });
    SpMat Dc = D0 - Dn;
    SpMat L = second + SpMat(Dc * G * D1) + SpMat(D1 * G * Dc);
    return L;
}

double FlowMap::beta(double yn, double alpha) const {
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(yn) / step)));
    const double h = yn / n;
    double b = alpha;
    auto f = [&](double y, double bb) {
        if (bb < y1_lo || bb > y1_hi) throw EscapeError("flow trajectory left the chart");
        return 2.0 * g01(bb, y);
    };
    for (int q = 0; q < n; ++q) {
        double y = q * h;
        double k1 = f(y, b);
        double k2 = f(y + 0.5 * h, b + 0.5 * h * k1);
        double k3 = f(y + 0.5 * h, b + 0.5 * h * k2);
        double k4 = f(y + h, b + h * k3);
        b += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    if (b < y1_lo || b > y1_hi) throw EscapeError("flow trajectory left the chart");
    return b;
}

double FlowMap::alpha(double yn, double y1) const {
    double a = y1;
    for (int it = 0; it < 50; ++it) {
        double r = beta(yn, a) - y1;
        if (std::abs(r) < 1e-14) return a;
        const double e = 1e-7;
        double slope = (beta(yn, a + e) - beta(yn, a - e)) / (2 * e);
        if (std::abs(slope) < 1e-12) throw NonInvertibleError("flow map is not invertible");
        a -= r / slope;
    }
    if (std::abs(beta(yn, a) - y1) < 1e-12) return a;
    throw NonInvertibleError("flow map inversion did not converge");
}

double go_amplitude(const FlowMap& flow, double T, const std::function<double(double)>& chi1,
                    const std::function<double(double)>& chi2, GoursatPoint p) {
    return chi1(p.s) * chi2(flow.alpha(0.5 * (T - p.s - p.tau), p.y1));
}

double transport_residual(const FlowMap& flow, double T, const std::function<double(double)>& chi1,
                          const std::function<double(double)>& chi2, GoursatPoint p, double h) {
    auto a = [&](double s, double tau, double y1) { return go_amplitude(flow, T, chi1, chi2, {s, tau, y1}); };
    double a_tau = (a(p.s, p.tau + h, p.y1) - a(p.s, p.tau - h, p.y1)) / (2 * h);
    double a_1 = (a(p.s, p.tau, p.y1 + h) - a(p.s, p.tau, p.y1 - h)) / (2 * h);
    return 4.0 * a_tau - 4.0 * flow.g01(p.y1, 0.5 * (T - p.s - p.tau)) * a_1;
}

L1Coefficients L1Coefficients::constant(double g11, double g01, double v1) {
    return {[g11](double, double) { return g11; }, [g01](double, double) { return g01; },
            [v1](double, double) { return v1; }};
}

L1Coefficients L1Coefficients::from(const GoursatCoefficients& c) {
    auto field = [&c](const std::vector<double>& v) {
        auto f = std::make_shared<ChartField>();
        f->nt = c.n1, f->nn = c.nn, f->t0 = c.y1_lo, f->ht = c.h1, f->hn = c.hn, f->v = v;
        return CoeffFn([f](double y1, double yn) { return f->at({y1, yn}); });
    };
    return {field(c.g11), field(c.g01), field(c.V1)};
}

namespace {

void require(const L1Coefficients& c) {
    if (!c.g11 || !c.g01 || !c.v1) throw ChartError("chart lacks L1 coefficient fields");
}

double trap_weight(int q, int n) { return (q == 0 || q == n) ? 0.5 : 1.0; }

}  // namespace

std::complex<double> q_form(const GreenSetup& st, const GoursatFn& u, const GoursatFn& v) {
    require(st.coeffs);
    const int n = st.n;
    const double hs = st.T / n, h1 = (st.y1_hi - st.y1_lo) / n;
    auto on_plane = [&](const GoursatFn& f, double s, double y1) { return f(0.5 * (st.T + s), y1, 0.5 * (st.T - s)); };
    std::complex<double> sum = 0.0;
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b) {
            double s = a * hs, y1 = st.y1_lo + b * h1, yn = 0.5 * (st.T - s);
            auto us = (on_plane(u, s + hs, y1) - on_plane(u, s - hs, y1)) / (2 * hs);
            auto vs = (on_plane(v, s + hs, y1) - on_plane(v, s - hs, y1)) / (2 * hs);
            auto u1 = (on_plane(u, s, y1 + h1) - on_plane(u, s, y1 - h1)) / (2 * h1);
            auto v1 = (on_plane(v, s, y1 + h1) - on_plane(v, s, y1 - h1)) / (2 * h1);
            double g11 = st.coeffs.g11(y1, yn), g01 = st.coeffs.g01(y1, yn), V = st.coeffs.v1(y1, yn);
            auto val = 4.0 * us * std::conj(vs) - g11 * u1 * std::conj(v1) -
                       2.0 * g01 * (us * std::conj(v1) + u1 * std::conj(vs)) +
                       V * on_plane(u, s, y1) * std::conj(on_plane(v, s, y1));
            sum += 0.5 * val * trap_weight(a, n) * trap_weight(b, n);
        }
    return sum * hs * h1;
}

GreenResult green_residual(const GreenSetup& st, const GoursatFn& u, const GoursatFn& v) {
    require(st.coeffs);
    const int n = st.n;
    const double hs = st.T / n, h1 = (st.y1_hi - st.y1_lo) / n;
    auto on_plane = [&](const GoursatFn& f, double s, double y1) { return f(0.5 * (st.T + s), y1, 0.5 * (st.T - s)); };
    GreenResult r;
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b) {
            double s = a * hs, y1 = st.y1_lo + b * h1;
            auto us = (on_plane(u, s + hs, y1) - on_plane(u, s - hs, y1)) / (2 * hs);
            auto vs = (on_plane(v, s + hs, y1) - on_plane(v, s - hs, y1)) / (2 * hs);
            r.plane += (us * std::conj(on_plane(v, s, y1)) - on_plane(u, s, y1) * std::conj(vs)) *
                       trap_weight(a, n) * trap_weight(b, n);
        }
    r.plane *= hs * h1;

    auto dn_map = [&](const GoursatFn& f, double y0, double y1) {
        auto dn = (-3.0 * f(y0, y1, 0.0) + 4.0 * f(y0, y1, hs) - f(y0, y1, 2 * hs)) / (2 * hs);
        auto d1 = (f(y0, y1 + h1, 0.0) - f(y0, y1 - h1, 0.0)) / (2 * h1);
        return dn - st.coeffs.g01(y1, 0.0) * d1;
    };
    std::complex<double> strip = 0.0, lam0 = 0.0;
    for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b) {
            double y0 = a * hs, y1 = st.y1_lo + b * h1;
            double w = trap_weight(a, n) * trap_weight(b, n);
            auto f = u(y0, y1, 0.0), g = v(y0, y1, 0.0);
            auto Lf = dn_map(u, y0, y1), Lg = dn_map(v, y0, y1);
            auto f0 = (u(y0 + hs, y1, 0.0) - u(y0 - hs, y1, 0.0)) / (2 * hs);
            auto g0 = (v(y0 + hs, y1, 0.0) - v(y0 - hs, y1, 0.0)) / (2 * hs);
            strip += (Lf * std::conj(g) - f * std::conj(Lg)) * w;
            lam0 += (Lf * std::conj(g0) + f0 * std::conj(Lg)) * w;
        }
    r.boundary = -strip * hs * h1;
    r.lambda0 = lam0 * hs * h1;
    r.q = q_form(st, u, v);
    r.residual = std::abs(r.plane - r.boundary);
    r.energy_residual = std::abs(r.q + r.lambda0);
    return r;
}

Eigen::Matrix2d q_node_matrix(double g11, double g01) {
    Eigen::Matrix2d m;
    m << 2.0, -g01, -g01, -0.5 * g11;
    return m;
}

Eigen::Matrix2d reduced_form(double g11, double g01) {
    Eigen::Matrix2d m;
    m << g11, -g01, -g01, -1.0;
    return m;
}

// ---- rays ----

namespace {

struct RayDeriv {
    Vec2 dx;
    Vec2 dxi;
    double dphase;
};

double hamiltonian(const Mat3& g, Vec2 xi) {
    Eigen::Vector2d p = ev(xi), g0(g(0, 1), g(0, 2));
    return g(0, 0) - 2.0 * g0.dot(p) + p.dot(g.block<2, 2>(1, 1) * p);
}

RayDeriv ray_deriv(const MetricFn& g, Vec2 x, Vec2 xi, double h) {
    Mat3 m = g(x);
    Eigen::Vector2d p = ev(xi), g0(m(0, 1), m(0, 2));
    double D = -m(0, 0) + g0.dot(p);
    Eigen::Vector2d vel = (m.block<2, 2>(1, 1) * p - g0) / D;
    double dH[2];
    for (int a = 0; a < 2; ++a) {
        Mat3 dg = metric_derivative(g, x, a == 0 ? Vec2{1, 0} : Vec2{0, 1}, h);
        dH[a] = hamiltonian(dg, xi);
    }
    Vec2 dx{vel.x(), vel.y()};
    return {dx, Vec2{-dH[0] / (2 * D), -dH[1] / (2 * D)}, xi.dot(dx)};
}

RayState ray_step(const MetricFn& g, const RayState& s, double dt, double h) {
    auto at = [&](const RayState& b, const RayDeriv& d, double c) {
        return RayState{b.x + d.dx * c, b.xi + d.dxi * c, b.t + c, b.phase + d.dphase * c};
    };
    RayDeriv k1 = ray_deriv(g, s.x, s.xi, h);
    RayState s2 = at(s, k1, 0.5 * dt);
    RayDeriv k2 = ray_deriv(g, s2.x, s2.xi, h);
    RayState s3 = at(s, k2, 0.5 * dt);
    RayDeriv k3 = ray_deriv(g, s3.x, s3.xi, h);
    RayState s4 = at(s, k3, dt);
    RayDeriv k4 = ray_deriv(g, s4.x, s4.xi, h);
    RayState o = s;
    o.x = s.x + (k1.dx + k2.dx * 2.0 + k3.dx * 2.0 + k4.dx) * (dt / 6.0);
    o.xi = s.xi + (k1.dxi + k2.dxi * 2.0 + k3.dxi * 2.0 + k4.dxi) * (dt / 6.0);
    o.phase = s.phase + (k1.dphase + 2 * k2.dphase + 2 * k3.dphase + k4.dphase) * (dt / 6.0);
    o.t = s.t + dt;
    return o;
}

Vec2 rotate(Vec2 v, double a) { return {std::cos(a) * v.x - std::sin(a) * v.y, std::sin(a) * v.x + std::cos(a) * v.y}; }

}  // namespace

RayState null_state(const MetricFn& g, Vec2 x, Vec2 d) {
    d = d * (1.0 / d.norm());
    Mat3 m = g(x);
    Eigen::Matrix2d Gi = m.block<2, 2>(1, 1).inverse();
    Eigen::Vector2d g0(m(0, 1), m(0, 2)), dd = ev(d);
    double num = m(0, 0) - g0.dot(Gi * g0), den = -dd.dot(Gi * dd);
    if (!(num > 0.0 && den > 0.0)) throw ChartError("metric admits no null ray at the start point");
    for (double mu : {-std::sqrt(num / den), std::sqrt(num / den)}) {
        Eigen::Vector2d xi = Gi * (mu * dd + g0);
        double D = -m(0, 0) + g0.dot(xi);
        if (mu / D > 0.0) return {x, Vec2{xi.x(), xi.y()}, 0.0, 0.0};
    }
    throw ChartError("no forward null covector");
}

double ray_hamiltonian(const MetricFn& g, const RayState& s) { return hamiltonian(g(s.x), s.xi); }

RayPath trace_ray(const MetricFn& g, RayState start, double t_span, const RayOptions& opt) {
    RayPath path;
    path.states.push_back(start);
    const double t_end = start.t + t_span;
    RayState s = start;
    while (s.t < t_end - 1e-14) {
        double dt = std::min(opt.dt, t_end - s.t);
        s = ray_step(g, s, dt, opt.fd_step);
        for (const auto& ob : opt.obstacles)
            if (ob.contains(s.x)) throw ObstacleHit("ray entered an obstacle");
        Mat3 m = g(s.x);
        path.max_drift = std::max(path.max_drift, std::abs(hamiltonian(m, s.xi)) / m(0, 0));
        path.states.push_back(s);
        if (opt.stop && opt.stop(s)) break;
    }
    return path;
}

namespace {

// Ray from the source at angle theta off the source -> receiver line, ending
// exactly on the receiver's transverse line.
RayPath shoot(const MetricFn& g, const AbPhaseSetup& st, double theta, double& miss) {
    Vec2 e = (st.receiver - st.source) * (1.0 / (st.receiver - st.source).norm());
    Vec2 perp{-e.y, e.x};
    RayOptions opt = st.rays;
    opt.stop = [&](const RayState& r) { return (r.x - st.receiver).dot(e) >= 0.0; };
    RayPath path = trace_ray(g, null_state(g, st.source, rotate(e, theta)), st.t_max, opt);
    if (path.states.size() < 2 || (path.states.back().x - st.receiver).dot(e) < 0.0)
        throw RayMismatchError("ray did not reach the receiver line");
    path.states.pop_back();
    const RayState base = path.states.back();
    double h = 0.0;
    RayState end = base;
    for (int it = 0; it < 20; ++it) {
        end = ray_step(g, base, h, opt.fd_step);
        double f = (end.x - st.receiver).dot(e);
        if (std::abs(f) < 1e-15) break;
        h -= f / ray_deriv(g, end.x, end.xi, opt.fd_step).dx.dot(e);
    }
    path.states.push_back(end);
    miss = (end.x - st.receiver).dot(perp);
    return path;
}

RayPath shoot_side(const MetricFn& g, const AbPhaseSetup& st, double theta0, double& miss) {
    double ta = theta0, tb = theta0 * 1.02;
    double ma = 0.0, mb = 0.0;
    RayPath pa = shoot(g, st, ta, ma);
    RayPath pb = shoot(g, st, tb, mb);
    const double tol = 1e-10 * (st.receiver - st.source).norm();
    if (std::abs(ma) < std::abs(mb)) std::swap(ta, tb), std::swap(ma, mb), std::swap(pa, pb);
    for (int it = 0; it < 60 && std::abs(mb) > tol; ++it) {
        if (mb == ma) break;
        // Near-focusing media make the miss flat in the angle; keep steps
        // bounded and on the launch side.
        double step = std::clamp(-mb * (tb - ta) / (mb - ma), -0.1, 0.1);
        double tc = std::clamp(tb + step, 0.02, 1.55);
        if (theta0 < 0) tc = std::clamp(tb + step, -1.55, -0.02);
        ta = tb, ma = mb, pa = std::move(pb);
        tb = tc;
        pb = shoot(g, st, tb, mb);
    }
    miss = mb;
    if (std::abs(mb) > st.cell) throw RayMismatchError("ray endpoints differ by more than one cell");
    return pb;
}

double loop_part(const MetricFn& g, const RayPath& p, double& ratio) {
    double sum = 0.0;
    for (std::size_t q = 0; q + 1 < p.states.size(); ++q) {
        Mat3 a = g(p.states[q].x), b = g(p.states[q + 1].x);
        Vec2 va{a(0, 1), a(0, 2)}, vb{b(0, 1), b(0, 2)};
        sum += 0.5 * (va + vb).dot(p.states[q + 1].x - p.states[q].x);
        ratio = std::max(ratio, va.norm() / std::sqrt(a(0, 0)));
    }
    return sum;
}

}  // namespace

AbPhaseResult ab_phase(const MetricFn& g, const AbPhaseSetup& setup, double k) {
    AbPhaseResult r;
    r.k = k;
    r.left = shoot_side(g, setup, std::abs(setup.launch_angle), r.miss_left);
    r.right = shoot_side(g, setup, -std::abs(setup.launch_angle), r.miss_right);
    double ratio = 0.0;
    r.loop_integral = loop_part(g, r.right, ratio) - loop_part(g, r.left, ratio);
    r.max_flow_ratio = ratio;
    r.phase = k * (r.left.states.back().phase - r.right.states.back().phase);
    r.loop_phase = k * r.loop_integral;
    return r;
}

}  // namespace abwave
