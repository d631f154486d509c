#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abwave/gauge.hpp"
#include "abwave/geometry.hpp"
#include "abwave/media.hpp"

namespace abwave {

// Which wave operator to integrate.
//   SlowMedium:      divergence form with the slow-medium metric (g^00 = n^2, g^0j = v_j, g^jk = -delta).
//   MinimalCoupling: n^2 u_tt - w^-1 (d_j - v_j d_t) w (d_j - v_j d_t) u = 0, i.e. g^00 = n^2 - |v|^2.
//   General:         divergence form with an arbitrary time-independent metric.
enum class Equation { SlowMedium, MinimalCoupling, General };

std::string to_string(Equation e);
Equation equation_from_string(const std::string& s);

// Per-node coefficients of  m u_tt + B u_t + A u = 0  with
//   m = w g^00,  B f = sum_j [ b_j D_j f + D_j (b_j f) ],  A u = -sum_jk D_j (a_jk D_k u),
// b_j = w g^0j, a_jk = -w g^jk and w = |det g^{..}|^{-1/2} (w = 1/n for MinimalCoupling).
struct Coefficients {
    GridPtr grid;
    Equation equation = Equation::SlowMedium;
    std::vector<double> m, bx, by, axx, axy, ayy;
    std::vector<Mat3> g;  // the equation's own contravariant metric, used by the DN trace
    std::vector<Vec2> v;  // flow coefficient (SlowMedium, MinimalCoupling)
    bool has_flow = false;
};

// g^00 = n^2 - |v|^2, g^0j = v_j, g^jk = -delta_jk.
MetricFn minimal_coupling_metric_fn(const ScalarFn& refr, const VectorFn& v);
// The contravariant metric each equation is written in.
MetricFn equation_metric_fn(Equation e, const MediumSpec& medium);
Coefficients build_coefficients(Equation e, const MediumSpec& medium);
Coefficients build_coefficients(const MetricTensor& metric);

// Largest characteristic speed of the frozen-coefficient symbol g^00 w^2 + 2 w g^0j k_j + g^jk k_j k_k.
double characteristic_speed(const Mat3& g);
// dt = safety * min(dx, dy) / max speed over fluid nodes.
double cfl_dt(const Coefficients& c, double safety = 0.5);
double cfl_dt(const MediumSpec& medium, Equation e, double safety = 0.5);

// Dirichlet data on the outer boundary: f(t, node).
using BoundaryDrive = std::function<double(double, const BoundaryNode&)>;

enum class RecordMode { BoundaryOnly, FullHistory, Snapshots };

struct SimConfig {
    Coefficients coeffs;
    double t_final = 1.0;
    double dt = 0.0;            // 0 = automatic from cfl_dt
    double cfl_safety = 0.5;
    BoundaryDrive drive;
    RecordMode record = RecordMode::BoundaryOnly;
    int snapshot_stride = 10;
    int trace_stride = 1;       // boundary layers are recorded every trace_stride steps
    bool track_energy = false;
    double jacobi_tol = 1e-14;  // relative stopping tolerance of the implicit flow coupling
    int jacobi_max_iter = 200;
};

struct Snapshot {
    int step = 0;
    double t = 0.0;
    ScalarField u;
};

// Boundary-adjacent values needed by the DN trace, one row per recorded time.
// For outer node k with inward neighbours p1, p2 along the normal (corners:
// unused), layer0 = u(node), layer1 = u(p1), layer2 = u(p2); prev/next hold
// layer0 one step before and after.
struct BoundaryRecord {
    std::vector<double> t;
    std::vector<std::vector<double>> layer0, layer1, layer2, prev, next;
    double dt = 0.0;  // solver step used for centered time differences
};

struct SimResult {
    double dt = 0.0;
    int steps = 0;
    BoundaryRecord boundary;
    std::vector<Snapshot> snapshots;
    ScalarField final_u;         // state at t = steps * dt
    ScalarField final_u_prev;    // state one step earlier
    std::vector<double> energy;  // per step after the first, when tracked
    double max_abs_u = 0.0;
    double max_abs_f = 0.0;
    int max_jacobi_iter = 0;
};

// Leapfrog integration with zero initial state; throws CFLViolation when the
// solution exceeds 1e3 max|f|.
SimResult simulate(const SimConfig& cfg);

// m (up - 2u + um)/dt^2 + B (up - um)/(2 dt) + A u at unknown nodes (0 elsewhere).
ScalarField operator_residual(const Coefficients& c, const ScalarField& um, const ScalarField& u,
                              const ScalarField& up, double dt);

// Smooth invertible map of the plane fixing the outer boundary.
struct SpatialMap {
    std::function<Vec2(Vec2)> forward;
    std::function<Vec2(Vec2)> inverse;
    std::function<Mat2(Vec2)> jacobian;  // d forward_i / d x_j
    nlohmann::json spec;

    static SpatialMap identity();
    // Rotation about c by angle * chi(r), chi = 1 for r <= r_inner, 0 for r >= r_outer, smooth between.
    // Area preserving; maps every disk centred at c onto itself.
    static SpatialMap twist(Vec2 c, double r_inner, double r_outer, double angle);
};

struct SpaceTimeMap {
    std::optional<ScalarFn> a;  // time shift x0 -> x0 + a(x)
    SpatialMap phi = SpatialMap::identity();
};

// 3x3 Jacobi matrix of (x0, x) -> (x0 + a(x), phi(x)) at x.
Mat3 spacetime_jacobian(const SpaceTimeMap& map, Vec2 x);
// g_hat(x_hat) = J(x) g(x) J(x)^T with x = phi^-1(x_hat).
MetricFn transform_metric_fn(const MetricFn& g, const SpaceTimeMap& map);
// Sampled transform; JacobianError if det <= 0, BoundaryError if the map moves the outer boundary.
MetricTensor transform_operator(const MetricTensor& metric, const SpaceTimeMap& map);

}  // namespace abwave
