#include "abwave/media.hpp"

#include <algorithm>
#include <limits>

#include "abwave/errors.hpp"

namespace abwave {

MediumSpec::MediumSpec(GridPtr grid, ScalarFn refr, VectorFn flow, double c, double guard)
    : grid_(std::move(grid)), refr_fn_(std::move(refr)), flow_fn_(std::move(flow)), c_(c), guard_(guard) {
    rebuild();
}

MediumSpec MediumSpec::from_coefficient(GridPtr grid, ScalarFn refr, VectorFn v, double c, double guard) {
    MediumSpec m(std::move(grid), std::move(refr), VectorFn::constant({}), c, guard);
    m.set_coefficient(std::move(v));
    return m;
}

void MediumSpec::set_refr(ScalarFn refr) {
    refr_fn_ = std::move(refr);
    rebuild();
}

void MediumSpec::set_flow(VectorFn flow) {
    flow_fn_ = std::move(flow);
    coefficient_given_ = false;
    rebuild();
}

void MediumSpec::set_coefficient(VectorFn v) {
    v_fn_ = std::move(v);
    coefficient_given_ = true;
    rebuild();
}

MediumSpec MediumSpec::on_grid(GridPtr grid) const {
    MediumSpec m = *this;
    m.grid_ = std::move(grid);
    m.rebuild();
    return m;
}

void MediumSpec::rebuild() {
    if (!(c_ > 0.0)) throw SignatureError("wave speed c must be positive");
    auto n = refr_fn_;
    const double c = c_;
    if (coefficient_given_) {
        // v is the primary datum; w follows where n^2 != 1.
        auto v = v_fn_;
        flow_fn_.value = [n, v, c](Vec2 p) {
            double f = n(p) * n(p) - 1.0;
            return std::abs(f) > 1e-12 ? v(p) * (c / f) : Vec2{};
        };
        flow_fn_.jac = [f = flow_fn_.value](Vec2 p) { return numeric_jacobian(f, p); };
        flow_fn_.spec = {{"type", "derived_from_coefficient"}};
    } else {
        auto w = flow_fn_;
        v_fn_.value = [n, w, c](Vec2 p) { return w(p) * ((n(p) * n(p) - 1.0) / c); };
        v_fn_.jac = [f = v_fn_.value](Vec2 p) { return numeric_jacobian(f, p); };
        v_fn_.spec = {{"type", "derived_from_flow"}};
    }
    refr_ = sample(refr_fn_, grid_);
    flow_ = sample(flow_fn_, grid_);
    v_ = sample(v_fn_, grid_);

    n_min_ = std::numeric_limits<double>::infinity();
    flow_known_ = true;
    for (int j = 0; j < grid_->ny; ++j)
        for (int i = 0; i < grid_->nx; ++i) {
            if (grid_->in_obstacle(i, j)) continue;
            double nn = refr_(i, j);
            Vec2 vv = v_(i, j);
            if (!std::isfinite(nn) || !std::isfinite(vv.x) || !std::isfinite(vv.y))
                throw SignatureError("non-finite medium value at a fluid node");
            n_min_ = std::min(n_min_, nn);
            if (vv.dot(vv) > guard_ * nn * nn)
                throw SignatureError("hyperbolicity guard |v|^2 <= " + std::to_string(guard_) +
                                     " n^2 fails at a fluid node");
            if (coefficient_given_ && std::abs(nn * nn - 1.0) <= 1e-12 && vv.norm() > 0.0) flow_known_ = false;
        }
    if (!(n_min_ > 0.0)) throw SignatureError("refraction index must be positive");
}

nlohmann::json MediumSpec::describe() const {
    nlohmann::json j = {{"refr", refr_fn_.spec}, {"c", c_}};
    if (coefficient_given_)
        j["v"] = v_fn_.spec;
    else
        j["flow"] = flow_fn_.spec;
    return j;
}

MetricTensor MetricTensor::sample(const MetricFn& fn, const GridPtr& grid) {
    MetricTensor m;
    m.grid = grid;
    m.source = fn;
    m.g_up.resize(grid->size());
    m.g_dn.resize(grid->size());
    m.det_g.resize(grid->size());
    for (int j = 0; j < grid->ny; ++j)
        for (int i = 0; i < grid->nx; ++i) {
            int n = grid->idx(i, j);
            m.g_up[n] = fn(grid->node(i, j));
            m.g_dn[n] = m.g_up[n].inverse();
            m.det_g[n] = 1.0 / m.g_up[n].determinant();
        }
    return m;
}

MetricFn minkowski_fn() {
    return [](Vec2) {
        Mat3 g = Mat3::Zero();
        g(0, 0) = 1.0;
        g(1, 1) = g(2, 2) = -1.0;
        return g;
    };
}

MetricFn slow_metric_fn(const ScalarFn& refr, const VectorFn& v) {
    return [refr, v](Vec2 p) {
        double n = refr(p);
        Vec2 vv = v(p);
        Mat3 g;
        g << n * n, vv.x, vv.y, vv.x, -1.0, 0.0, vv.y, 0.0, -1.0;
        return g;
    };
}

MetricFn gordon_metric_fn(const ScalarFn& refr, const VectorFn& flow, double c) {
    return [refr, flow, c](Vec2 p) {
        double n = refr(p);
        Vec2 w = flow(p) * (1.0 / c);
        double gamma = 1.0 / std::sqrt(1.0 - w.dot(w));
        Eigen::Vector3d u(gamma, gamma * w.x, gamma * w.y);
        Mat3 eta = Mat3::Zero();
        eta(0, 0) = 1.0;
        eta(1, 1) = eta(2, 2) = -1.0;
        return Mat3(eta + (n * n - 1.0) * u * u.transpose());
    };
}

MetricTensor gordon_metric(const MediumSpec& medium) {
    if (!medium.flow_known()) throw SuperluminalError("medium has no physical flow (n == 1 with v != 0)");
    const auto& g = *medium.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (g.in_obstacle(i, j)) continue;
            if (medium.flow()(i, j).norm() >= medium.c()) throw SuperluminalError("|w| >= c at a fluid node");
        }
    MetricTensor m = MetricTensor::sample(gordon_metric_fn(medium.refr_fn(), medium.flow_fn(), medium.c()), medium.grid());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!g.in_obstacle(i, j) && !minkowski_signature(m.up(i, j)))
                throw SignatureError("Gordon metric lost Minkowski signature");
    return m;
}

MetricTensor slow_metric(const MediumSpec& medium) {
    const auto& g = *medium.grid();
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (g.in_obstacle(i, j)) continue;
            double n = medium.refr()(i, j);
            Vec2 v = medium.v()(i, j);
            if (v.dot(v) > medium.guard() * n * n) throw SignatureError("hyperbolicity guard fails");
        }
    return MetricTensor::sample(slow_metric_fn(medium.refr_fn(), medium.v_fn()), medium.grid());
}

bool minkowski_signature(const Mat3& g) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(g, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();  // ascending
    return ev(0) < 0.0 && ev(1) < 0.0 && ev(2) > 0.0;
}

HyperbolicityReport check_hyperbolicity(const Mat3& g) {
    HyperbolicityReport r;
    r.timelike_ok = g(0, 0) > 0.0;
    Eigen::Matrix2d s = -g.block<2, 2>(1, 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s, Eigen::EigenvaluesOnly);
    r.worst_margin = es.eigenvalues()(0);
    r.elliptic_ok = r.worst_margin > 0.0;
    return r;
}

HyperbolicityReport check_hyperbolicity(const MetricTensor& metric) {
    HyperbolicityReport r{true, true, std::numeric_limits<double>::infinity()};
    const auto& g = *metric.grid;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (g.in_obstacle(i, j)) continue;
            auto node = check_hyperbolicity(metric.up(i, j));
            r.timelike_ok = r.timelike_ok && node.timelike_ok;
            r.elliptic_ok = r.elliptic_ok && node.elliptic_ok;
            r.worst_margin = std::min(r.worst_margin, node.worst_margin);
        }
    return r;
}

}  // namespace abwave
