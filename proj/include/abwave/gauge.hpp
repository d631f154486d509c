#pragma once

#include <optional>
#include <string>
#include <vector>

#include "abwave/fields.hpp"
#include "abwave/geometry.hpp"
#include "abwave/media.hpp"

namespace abwave {

// Time-shift gauge a(x) (also used for the potential b of a gradient flow).
// Vanishes on the outer boundary; its gradient uses centered differences.
class GaugeFunction {
public:
    // Throws BoundaryError if a is not zero on the outer boundary.
    explicit GaugeFunction(ScalarField a);
    static GaugeFunction from_fn(const ScalarFn& fn, const GridPtr& grid);

    const ScalarField& a() const { return a_; }
    const VectorField2D& grad_a() const { return grad_; }
    const std::optional<ScalarFn>& fn() const { return fn_; }
    GaugeFunction negated() const;
    double max_abs() const;

private:
    ScalarField a_;
    VectorField2D grad_;
    std::optional<ScalarFn> fn_;
};

// Second-order gradient: centered inside, one-sided on the outer edges.
VectorField2D grid_gradient(const ScalarField& a);
// Centered discrete curl d(v_y)/dx - d(v_x)/dy; zero where the stencil is incomplete.
ScalarField grid_curl(const VectorField2D& v);

// v - grad a. With `refr`, throws HyperbolicityError if |v - grad a|^2 >= n^2 at a fluid node.
VectorField2D apply_gauge(const VectorField2D& v, const GaugeFunction& a, const ScalarField* refr = nullptr);
// Closed-form variant: v - grad a with the analytic gradient.
VectorFn apply_gauge(const VectorFn& v, const ScalarFn& a);
// Medium with v replaced by v - grad a; HyperbolicityError if the guard fails.
MediumSpec apply_gauge(const MediumSpec& medium, const ScalarFn& a);

struct WitnessOptions {
    double curl_rel = 1e-6;  // curl tolerance relative to max |v - vhat|
    double loop_rel = 1e-3;  // loop and boundary tolerance relative to max |v - vhat| times a length
};

struct WitnessResult {
    std::optional<GaugeFunction> a;
    std::string failure;  // "", "CurlError", "HolonomyError" or "BoundaryError"
    double worst_curl = 0.0;
    std::vector<double> holonomy;  // one loop integral of v - vhat per obstacle
};

// Reconstructs a with grad a = v - vhat, or reports why none exists.
WitnessResult try_same_class_witness(const VectorField2D& v, const VectorField2D& vhat, WitnessOptions opt = {});
// Throwing form: CurlError, HolonomyError or BoundaryError.
GaugeFunction same_class_witness(const VectorField2D& v, const VectorField2D& vhat, WitnessOptions opt = {});

// Grid-aligned loop around obstacle k, one node outside its bounding box.
LoopPath obstacle_loop(const Grid2D& grid, int k);

// exp(i loop A) == exp(i loop A') on every loop, within tol (radians).
bool wu_yang_equal(const VectorField2D& A, const VectorField2D& Aprime, const std::vector<LoopPath>& loops,
                   double tol = 1e-3);
bool wu_yang_equal(const VectorFn& A, const VectorFn& Aprime, const std::vector<LoopPath>& loops,
                   double tol = 1e-3);

}  // namespace abwave
