#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Sparse>

#include "abwave/geometry.hpp"
#include "abwave/media.hpp"

namespace abwave {

// Straight piece of the outer boundary with local coordinates (x', x_n):
// x' runs along the counterclockwise tangent, x_n is the inward distance.
struct Patch {
    Vec2 origin;   // x' = 0, x_n = 0
    Vec2 tangent;  // unit
    Vec2 inward;   // unit, tangent rotated by +90 degrees
    double t_lo = 0.0;
    double t_hi = 1.0;

    // Side 0 bottom, 1 right, 2 top, 3 left of the grid box; [lo, hi] are
    // fractions of the side length.
    static Patch side(const Grid2D& grid, int side, double lo = 0.25, double hi = 0.75);
    Vec2 to_global(Vec2 local) const { return origin + tangent * local.x + inward * local.y; }
    Vec2 to_local(Vec2 p) const { return {(p - origin).dot(tangent), (p - origin).dot(inward)}; }
};

// Metric in local (x0, x', x_n) components at a local point.
Mat3 local_metric(const MetricFn& g, const Patch& patch, Vec2 local);

// Uniform (x', x_n) lattice with piecewise cubic Lagrange evaluation.
struct ChartField {
    int nt = 0;
    int nn = 0;
    double t0 = 0.0;
    double ht = 0.0;
    double hn = 0.0;
    std::vector<double> v;  // v[k * nt + i] at (t0 + i ht, k hn)

    double& operator()(int i, int k) { return v[static_cast<std::size_t>(k) * nt + i]; }
    double operator()(int i, int k) const { return v[static_cast<std::size_t>(k) * nt + i]; }
    double at(Vec2 local) const;
};

struct ChartLattice {
    double t_lo = 0.0;
    double t_hi = 1.0;
    double delta = 0.1;
    int nt = 41;
    int nn = 21;

    ChartField field() const;
    Vec2 node(int i, int k) const;
};

struct EiconalSolution {
    Patch patch;
    ChartLattice lattice;
    int steps_per_row = 8;
    ChartField phi_plus, phi_minus;
    ChartField dplus_t, dplus_n, dminus_t, dminus_n;  // gradients carried by the rays
    double ray_drift = 0.0;                          // max |H| along all rays
    double residual = 0.0;                           // max |H(x, lattice gradient)|
};

struct TransversalSolution {
    ChartField phi_1;
    ChartField d1_t, d1_n;
    double residual = 0.0;  // max |grad phi_1 . (G grad phi^- - g0)| on the lattice
};

// Marches both eiconal families inward along characteristics (RK4 in x_n).
// Throws CausticError when neighbouring rays cross and ChartError when the
// boundary is not timelike-transversal or the collar is not covered.
EiconalSolution solve_eiconal(const MetricFn& g, const Patch& patch, const ChartLattice& lattice,
                              int steps_per_row = 8);
// Transversal coordinate transported along the minus family.
TransversalSolution solve_transversal(const EiconalSolution& eic, const MetricFn& g);

// Transformed coefficients on a uniform (y1, y_n) lattice.
struct GoursatCoefficients {
    int n1 = 0;
    int nn = 0;
    double y1_lo = 0.0;
    double h1 = 0.0;
    double hn = 0.0;
    std::vector<double> g11, g01, gnn, A, V1;
    std::vector<double> hat_pm, hat_p1, hat_11, det_up;
    std::vector<double> hat_ss, hat_tt, hat_t1;  // vanish for an exact chart
    std::vector<Vec2> x_local;

    std::size_t idx(int i, int k) const { return static_cast<std::size_t>(k) * n1 + i; }
    double y1(int i) const { return y1_lo + i * h1; }
    double yn(int k) const { return k * hn; }
};

struct GoursatChart {
    MetricFn metric;
    Patch patch;
    double T = 0.0;
    EiconalSolution eiconal;
    TransversalSolution transversal;
    GoursatCoefficients coeffs;
};

struct ChartOptions {
    int side = 0;
    double patch_lo = 0.25;
    double patch_hi = 0.75;
    double delta = 0.0;  // 0: a tenth of the domain diameter
    double T = 0.0;      // 0: twice delta
    int nt = 61;
    int nn = 21;
    int steps_per_row = 8;
};

// Full chart. On CausticError delta is halved once before giving up.
GoursatChart build_chart(const MetricFn& g, const Grid2D& grid, const ChartOptions& opt = {});

struct GoursatPoint {
    double s = 0.0, tau = 0.0, y1 = 0.0;
};
struct CharPoint {
    double y0 = 0.0, y1 = 0.0, yn = 0.0;
};
struct SpacetimePoint {
    double x0 = 0.0;
    Vec2 local;
};

GoursatPoint to_goursat(const GoursatChart& chart, SpacetimePoint p);
CharPoint to_characteristic(const GoursatChart& chart, SpacetimePoint p);
CharPoint to_characteristic(const GoursatChart& chart, GoursatPoint p);
// Newton inversion; NonInvertibleError on a degenerate Jacobian or no convergence.
SpacetimePoint from_characteristic(const GoursatChart& chart, CharPoint p);
SpacetimePoint from_goursat(const GoursatChart& chart, GoursatPoint p);

// Chain-rule coefficients at the nodes of a (y1, y_n) lattice. n1, nn = 0
// reuse the chart lattice sizes.
GoursatCoefficients transformed_coeffs(const EiconalSolution& eic, const TransversalSolution& tr,
                                       const MetricFn& g, int n1 = 0, int nn = 0);

// V1 from A, g11, g01 sampled on a (y1, y_n) lattice (row-major, y1 fastest),
// fourth-order differences with one-sided stencils at the edges.
std::vector<double> v1_lattice(int n1, int nn, double h1, double hn, const std::vector<double>& A,
                               const std::vector<double>& g11, const std::vector<double>& g01);

// Fourth-order first and second differences of row or column data.
double fd1(const std::function<double(int)>& f, int i, int n, double h);
double fd2(const std::function<double(int)>& f, int i, int n, double h);

// L1 on a (y0, y1, y_n) lattice with zero Dirichlet data on the lattice faces.
Eigen::SparseMatrix<double> assemble_l1(const GoursatCoefficients& c, int n0, double h0);

using CoeffFn = std::function<double(double y1, double yn)>;

// Forward flow d beta / d y_n = 2 g01(beta, y_n) and its inverse alpha.
struct FlowMap {
    CoeffFn g01;
    double y1_lo = 0.0;
    double y1_hi = 1.0;
    double step = 1e-3;  // RK4 step in y_n

    // EscapeError if the trajectory leaves [y1_lo, y1_hi].
    double beta(double yn, double alpha) const;
    double alpha(double yn, double y1) const;
};

// Leading geometric-optics amplitude chi1(s) chi2(alpha((T - s - tau) / 2, y1)).
double go_amplitude(const FlowMap& flow, double T, const std::function<double(double)>& chi1,
                    const std::function<double(double)>& chi2, GoursatPoint p);
// 4 da/dtau - 4 g01 da/dy1 by centered differences with step h.
double transport_residual(const FlowMap& flow, double T, const std::function<double(double)>& chi1,
                          const std::function<double(double)>& chi2, GoursatPoint p, double h);

// Coefficients of L1 as functions of (y1, y_n).
struct L1Coefficients {
    CoeffFn g11;
    CoeffFn g01;
    CoeffFn v1;

    static L1Coefficients constant(double g11, double g01, double v1 = 0.0);
    static L1Coefficients from(const GoursatCoefficients& c);
};

using GoursatFn = std::function<std::complex<double>(double y0, double y1, double yn)>;

// Quadrature setup on the plane tau = 0 and on the boundary strip y_n = 0.
struct GreenSetup {
    L1Coefficients coeffs;
    double T = 0.2;
    double y1_lo = 0.0;
    double y1_hi = 1.0;
    int n = 64;  // intervals per direction; difference step is the cell size
};

// Form Q(u, v) integrated over the plane tau = 0.
std::complex<double> q_form(const GreenSetup& setup, const GoursatFn& u, const GoursatFn& v);

struct GreenResult {
    std::complex<double> plane;     // integral of u_s conj(v) - u conj(v_s)
    std::complex<double> boundary;  // minus integral of Lf conj(g) - f conj(Lg)
    std::complex<double> q;
    std::complex<double> lambda0;
    double residual = 0.0;         // |plane - boundary|
    double energy_residual = 0.0;  // |q + lambda0|
};

// ChartError when a coefficient function is missing.
GreenResult green_residual(const GreenSetup& setup, const GoursatFn& u, const GoursatFn& v);

// Node matrix of the Q integrand in (u_s, u_y1) and the reduced form in (xi_1, xi_n).
Eigen::Matrix2d q_node_matrix(double g11, double g01);
Eigen::Matrix2d reduced_form(double g11, double g01);

struct RayState {
    Vec2 x;
    Vec2 xi;  // spatial covector; the time component is fixed at -1
    double t = 0.0;
    double phase = 0.0;  // accumulated xi . dx
};

struct RayPath {
    std::vector<RayState> states;
    double max_drift = 0.0;  // max |H| / g00 along the path
};

struct RayOptions {
    double dt = 1e-3;
    double fd_step = 1e-4;
    std::vector<ObstacleShape> obstacles;
    // Stops the ray once the predicate turns true.
    std::function<bool(const RayState&)> stop;
};

// Null covector at x whose ray leaves in direction d.
RayState null_state(const MetricFn& g, Vec2 x, Vec2 d);
double ray_hamiltonian(const MetricFn& g, const RayState& s);
// Bicharacteristics parametrized by time; ObstacleHit on entering an obstacle.
RayPath trace_ray(const MetricFn& g, RayState start, double t_span, const RayOptions& opt = {});

struct AbPhaseSetup {
    Vec2 source;
    Vec2 receiver;
    double launch_angle = 0.785;  // initial guess, measured from source -> receiver
    double cell = 0.01;           // endpoint tolerance
    double t_max = 50.0;
    RayOptions rays;
};

struct AbPhaseResult {
    double k = 0.0;
    double phase = 0.0;       // k (S_left - S_right)
    double loop_phase = 0.0;  // k times the loop integral of g^{0j}, right ray then left ray reversed
    double loop_integral = 0.0;
    double max_flow_ratio = 0.0;  // max |g^{0j}| / sqrt(g^00) along both rays
    double miss_left = 0.0;
    double miss_right = 0.0;
    RayPath left;
    RayPath right;
};

// Shoots one ray on each side of the source -> receiver line.
AbPhaseResult ab_phase(const MetricFn& g, const AbPhaseSetup& setup, double k);

}  // namespace abwave
