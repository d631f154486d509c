#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "abwave/fields.hpp"
#include "abwave/geometry.hpp"

namespace abwave {

using Mat3 = Eigen::Matrix3d;
// Contravariant metric g^{jk}(x), indices 0 (time), 1 (x), 2 (y).
using MetricFn = std::function<Mat3(Vec2)>;

// Refraction index n(x), flow w(x), wave speed c and the derived flow
// coefficient v = (n^2 - 1) w / c. Fields are kept both as closed forms and
// sampled on the grid.
class MediumSpec {
public:
    // Largest admitted |v|^2 / n^2; stricter than plain hyperbolicity.
    static constexpr double kDefaultGuard = 0.25;

    MediumSpec(GridPtr grid, ScalarFn refr, VectorFn flow, double c = 1.0, double guard = kDefaultGuard);
    // Builds a medium from v directly. The flow w is recovered where n != 1;
    // where n == 1 and v != 0 no physical flow exists and flow_known() is false.
    static MediumSpec from_coefficient(GridPtr grid, ScalarFn refr, VectorFn v, double c = 1.0,
                                       double guard = kDefaultGuard);

    const GridPtr& grid() const { return grid_; }
    double c() const { return c_; }
    double guard() const { return guard_; }
    bool flow_known() const { return flow_known_; }

    const ScalarFn& refr_fn() const { return refr_fn_; }
    const VectorFn& flow_fn() const { return flow_fn_; }
    const VectorFn& v_fn() const { return v_fn_; }
    const ScalarField& refr() const { return refr_; }
    const VectorField2D& flow() const { return flow_; }
    const VectorField2D& v() const { return v_; }
    double n_min() const { return n_min_; }

    void set_refr(ScalarFn refr);
    void set_flow(VectorFn flow);
    void set_coefficient(VectorFn v);
    // Same closed forms on another grid.
    MediumSpec on_grid(GridPtr grid) const;

    nlohmann::json describe() const;

private:
    void rebuild();

    GridPtr grid_;
    ScalarFn refr_fn_;
    VectorFn flow_fn_;
    VectorFn v_fn_;
    double c_;
    double guard_;
    bool flow_known_ = true;
    bool coefficient_given_ = false;
    ScalarField refr_;
    VectorField2D flow_;
    VectorField2D v_;
    double n_min_ = 0.0;
};

struct MetricTensor {
    GridPtr grid;
    std::vector<Mat3> g_up;
    std::vector<Mat3> g_dn;
    std::vector<double> det_g;  // (det g^{jk})^{-1}
    MetricFn source;            // closed form, when available

    static MetricTensor sample(const MetricFn& fn, const GridPtr& grid);
    const Mat3& up(int i, int j) const { return g_up[grid->idx(i, j)]; }
};

MetricFn minkowski_fn();
MetricFn slow_metric_fn(const ScalarFn& refr, const VectorFn& v);
MetricFn gordon_metric_fn(const ScalarFn& refr, const VectorFn& flow, double c);

// Throws SuperluminalError if |w| >= c at a fluid node.
MetricTensor gordon_metric(const MediumSpec& medium);
// Throws SignatureError if the hyperbolicity guard fails.
MetricTensor slow_metric(const MediumSpec& medium);

struct HyperbolicityReport {
    bool timelike_ok = false;
    bool elliptic_ok = false;
    double worst_margin = 0.0;  // smallest eigenvalue of -[g^{jk}]_{j,k>=1} over fluid nodes
};

HyperbolicityReport check_hyperbolicity(const MetricTensor& metric);
HyperbolicityReport check_hyperbolicity(const Mat3& g);

// True when g has one positive and two negative eigenvalues.
bool minkowski_signature(const Mat3& g);

}  // namespace abwave
