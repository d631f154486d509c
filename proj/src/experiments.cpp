#include "abwave/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "abwave/errors.hpp"
#include "abwave/gauge.hpp"

namespace abwave {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json number_json(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "-";
    std::ostringstream os;
    os.precision(6);
    os << std::scientific << x;
    return os.str();
}

std::string key_at(const std::string& name, int n) { return name + "@" + std::to_string(n); }

GridPtr grid_at(const DomainSpec& d, int n) {
    DomainSpec s = d;
    s.resolution = n;
    return build_domain(s);
}

void check_setup(const ExperimentSetup& s) {
    if (s.resolutions.size() < 2) throw PreconditionError("at least two resolutions are needed");
    for (std::size_t i = 1; i < s.resolutions.size(); ++i)
        if (s.resolutions[i] <= s.resolutions[i - 1]) throw PreconditionError("resolutions must increase");
}

// Assembles every configuration with one shared solver step.
std::vector<DNMatrix> assemble_group(const std::vector<Coefficients>& cs, const DNBasis& basis, int jobs) {
    std::vector<const Coefficients*> ptrs;
    for (const auto& c : cs) ptrs.push_back(&c);
    AssembleOptions o;
    o.jobs = jobs;
    o.dt = common_step(ptrs, basis);
    std::vector<DNMatrix> out;
    for (const auto& c : cs) out.push_back(assemble_dn(c, basis, o));
    return out;
}

double max_outer(const Grid2D& g, const std::function<double(Vec2)>& f) {
    double m = 0.0;
    for (const auto& b : g.outer_boundary) m = std::max(m, std::abs(f(g.node(b.i, b.j))));
    return m;
}

double max_fluid(const Grid2D& g, const std::function<double(Vec2)>& f) {
    double m = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            if (!g.in_obstacle(i, j)) m = std::max(m, std::abs(f(g.node(i, j))));
    return m;
}

void require_zero_on_outer(const Grid2D& g, const ScalarFn& f, const char* what) {
    if (max_outer(g, f.value) > 1e-12) throw PreconditionError(std::string(what) + " is nonzero on the outer boundary");
}

// Distance and self-convergence columns with the per-resolution equality checks.
// `base[i]` is the reference map at resolutions[i], `dist[i]` the compared distance.
void equality_rows(ExperimentReport& r, const ExperimentSetup& s, const std::vector<DNMatrix>& base,
                   const std::vector<double>& dist, const std::string& column) {
    for (std::size_t i = 0; i < s.resolutions.size(); ++i) {
        int n = s.resolutions[i];
        double sc = i > 0 ? self_convergence(base[i - 1], base[i]) : kNaN;
        double tol = s.tolerance_factor * sc;
        r.table[i].values[column] = dist[i];
        r.table[i].values["self_convergence"] = sc;
        r.table[i].values["tolerance"] = tol;
        r.measured[key_at(column, n)] = dist[i];
        if (i == 0) continue;
        r.measured[key_at("self_convergence", n)] = sc;
        r.thresholds[key_at("tolerance", n)] = tol;
        r.checks.push_back({key_at(column + "_within_tolerance", n), key_at(column, n), "<=", key_at("tolerance", n)});
    }
}

void order_check(ExperimentReport& r, const ExperimentSetup& s, const std::vector<double>& dist) {
    r.thresholds["min_order"] = s.min_order;
    if (dist.back() == 0.0 && dist[dist.size() - 2] == 0.0) {
        r.notes["order"] = "not applicable, distances vanish";
        return;
    }
    r.measured["order"] = observed_order(s.resolutions, dist);
    r.checks.push_back({"distance_order", "order", ">=", "min_order"});
}

std::vector<ConvergenceRow> empty_table(const ExperimentSetup& s) {
    std::vector<ConvergenceRow> t;
    for (int n : s.resolutions) t.push_back({n, {}});
    return t;
}

void add_fingerprints(ExperimentReport& r, const std::vector<DNMatrix>& maps) {
    for (const auto& m : maps) r.fingerprints.push_back(m.fingerprint);
}

DNBasis time_scaled(DNBasis b, double f) {
    b.sigma_t *= f;
    b.first_onset *= f;
    b.onset_spacing *= f;
    b.t_final *= f;
    b.record_dt *= f;
    return b;
}

std::vector<Vec2> shape_outline(const ObstacleShape& o, int n) {
    std::vector<Vec2> pts;
    for (int k = 0; k < n; ++k) {
        double t = 2.0 * std::numbers::pi * k / n;
        if (o.kind == ObstacleShape::Kind::Disk) {
            pts.push_back(o.center + Vec2{std::cos(t), std::sin(t)} * o.radius);
        } else {
            Vec2 d{std::cos(t), std::sin(t)};
            double s = std::min(o.half.x / std::max(std::abs(d.x), 1e-300), o.half.y / std::max(std::abs(d.y), 1e-300));
            pts.push_back(o.center + d * s);
        }
    }
    return pts;
}

// Radius of a circle about the obstacle centre halfway between the obstacle and the outer boundary.
double separating_radius(const DomainSpec& d, const ObstacleShape& o) {
    Vec2 lo = o.box_lo(), hi = o.box_hi();
    double r_in = std::max({(lo - o.center).norm(), (hi - o.center).norm(), (Vec2{lo.x, hi.y} - o.center).norm(),
                            (Vec2{hi.x, lo.y} - o.center).norm()});
    double r_out = std::min({o.center.x - d.lo.x, d.hi.x - o.center.x, o.center.y - d.lo.y, d.hi.y - o.center.y});
    if (r_in >= r_out) throw PreconditionError("no circle separates the obstacle from the outer boundary");
    return 0.5 * (r_in + r_out);
}

}  // namespace

bool ExperimentReport::evaluate() const {
    if (checks.empty()) return false;
    for (const auto& c : checks) {
        auto m = measured.find(c.value);
        auto t = thresholds.find(c.threshold);
        if (m == measured.end() || t == thresholds.end()) return false;
        double a = m->second, b = t->second;
        if (std::isnan(a) || std::isnan(b)) return false;
        bool ok = c.op == "<=" ? a <= b : c.op == ">=" ? a >= b : false;
        if (!ok) return false;
    }
    return true;
}

nlohmann::json ExperimentReport::to_json(bool timing) const {
    nlohmann::json j;
    j["name"] = name;
    j["fingerprints"] = fingerprints;
    nlohmann::json m = nlohmann::json::object(), t = nlohmann::json::object();
    for (const auto& [k, v] : measured) m[k] = number_json(v);
    for (const auto& [k, v] : thresholds) t[k] = number_json(v);
    j["measured"] = m;
    j["thresholds"] = t;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : checks) cs.push_back({{"name", c.name}, {"value", c.value}, {"op", c.op}, {"threshold", c.threshold}});
    j["checks"] = cs;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table) {
        nlohmann::json r = {{"resolution", row.resolution}};
        for (const auto& [k, v] : row.values) r[k] = number_json(v);
        rows.push_back(r);
    }
    j["convergence"] = rows;
    j["notes"] = notes;
    j["pass"] = pass;
    if (timing) {
        j["wall_seconds"] = wall_seconds;
        j["row_seconds"] = row_seconds;
    }
    return j;
}

std::string ExperimentReport::to_text(bool timing) const {
    std::ostringstream os;
    os << "experiment " << name << ": " << (pass ? "PASS" : "FAIL") << "\n";
    for (const auto& c : checks) {
        double a = measured.count(c.value) ? measured.at(c.value) : kNaN;
        double b = thresholds.count(c.threshold) ? thresholds.at(c.threshold) : kNaN;
        bool ok = c.op == "<=" ? a <= b : a >= b;
        os << "  " << (ok ? "ok  " : "FAIL") << " " << c.name << ": " << format_number(a) << " " << c.op << " "
           << format_number(b) << "\n";
    }
    if (!table.empty()) {
        os << "  convergence:\n";
        for (const auto& row : table) {
            os << "    N=" << row.resolution;
            for (const auto& [k, v] : row.values) os << " " << k << "=" << format_number(v);
            os << "\n";
        }
    }
    for (const auto& [k, v] : notes) os << "  note " << k << ": " << v << "\n";
    if (timing) os << "  wall-clock " << wall_seconds << " s\n";
    return os.str();
}

std::string ExperimentReport::table_csv() const {
    std::vector<std::string> cols;
    for (const auto& row : table)
        for (const auto& kv : row.values)
            if (std::find(cols.begin(), cols.end(), kv.first) == cols.end()) cols.push_back(kv.first);
    std::sort(cols.begin(), cols.end());
    std::ostringstream os;
    os << "resolution";
    for (const auto& c : cols) os << "," << c;
    os << "\n";
    os.precision(17);
    for (const auto& row : table) {
        os << row.resolution;
        for (const auto& c : cols) {
            auto it = row.values.find(c);
            os << ",";
            if (it != row.values.end() && std::isfinite(it->second)) os << it->second;
        }
        os << "\n";
    }
    return os.str();
}

double observed_order(const std::vector<int>& resolutions, const std::vector<double>& values) {
    std::size_t k = values.size();
    if (k < 2 || resolutions.size() < k) return kNaN;
    return std::log(values[k - 2] / values[k - 1]) /
           std::log(static_cast<double>(resolutions[k - 1]) / resolutions[k - 2]);
}

ExperimentSetup default_setup() {
    ExperimentSetup s;
    s.domain.obstacles.push_back(ObstacleShape::disk({0.65, 0.6}, 0.15));
    s.basis.t_final = 2.8;
    return s;
}

ExperimentReport exp_gauge_invariance(const ExperimentSetup& s, const GaugeInvarianceParams& p) {
    auto t0 = Clock::now();
    check_setup(s);
    if (p.equation != Equation::MinimalCoupling)
        throw PreconditionError("gauge invariance is stated for the minimal coupling equation");
    require_zero_on_outer(*grid_at(s.domain, s.resolutions.back()), p.a, "gauge a");

    ExperimentReport r;
    r.name = "gauge-invariance";
    r.table = empty_table(s);
    VectorFn vhat = apply_gauge(p.v, p.a);
    std::vector<DNMatrix> base;
    std::vector<double> dist;
    for (int n : s.resolutions) {
        auto tr = Clock::now();
        auto g = grid_at(s.domain, n);
        auto m1 = MediumSpec::from_coefficient(g, p.refr, p.v);
        auto m2 = MediumSpec::from_coefficient(g, p.refr, vhat);
        auto maps = assemble_group({build_coefficients(p.equation, m1), build_coefficients(p.equation, m2)}, s.basis,
                                   s.jobs);
        dist.push_back(dn_distance(maps[0], maps[1]).rel);
        add_fingerprints(r, maps);
        base.push_back(std::move(maps[0]));
        r.row_seconds.push_back(seconds_since(tr));
    }
    equality_rows(r, s, base, dist, "distance");
    order_check(r, s, dist);
    r.notes["equation"] = to_string(p.equation);
    r.finish();
    r.wall_seconds = seconds_since(t0);
    return r;
}

ExperimentReport exp_sign_ambiguity(const ExperimentSetup& s, const SignAmbiguityParams& p) {
    auto t0 = Clock::now();
    check_setup(s);
    if (p.equation != Equation::SlowMedium)
        throw PreconditionError("sign ambiguity is stated for the slow-medium equation");
    auto finest = grid_at(s.domain, s.resolutions.back());
    if (max_fluid(*finest, p.b.value) == 0.0) throw DegenerateError("potential b vanishes identically");
    require_zero_on_outer(*finest, p.b, "potential b");

    ExperimentReport r;
    r.name = "sign-ambiguity";
    r.table = empty_table(s);
    VectorFn v = VectorFn::gradient(p.b);
    VectorFn minus = v.scaled(-1.0);
    VectorFn zero = VectorFn::constant({0.0, 0.0});
    std::vector<DNMatrix> base;
    std::vector<double> dpm, d0, dctl;
    for (int n : s.resolutions) {
        auto tr = Clock::now();
        auto g = grid_at(s.domain, n);
        std::vector<Coefficients> cs;
        for (const VectorFn* f : {&v, &minus, &zero})
            cs.push_back(build_coefficients(p.equation, MediumSpec::from_coefficient(g, p.refr, *f)));
        if (p.control) {
            cs.push_back(build_coefficients(p.equation, MediumSpec::from_coefficient(g, p.refr, *p.control)));
            cs.push_back(
                build_coefficients(p.equation, MediumSpec::from_coefficient(g, p.refr, p.control->scaled(-1.0))));
        }
        auto maps = assemble_group(cs, s.basis, s.jobs);
        dpm.push_back(dn_distance(maps[0], maps[1]).rel);
        d0.push_back(dn_distance(maps[0], maps[2]).rel);
        if (p.control) dctl.push_back(dn_distance(maps[3], maps[4]).rel);
        add_fingerprints(r, maps);
        base.push_back(std::move(maps[0]));
        r.row_seconds.push_back(seconds_since(tr));
    }
    equality_rows(r, s, base, dpm, "d_pm");
    int nf = s.resolutions.back();
    for (std::size_t i = 0; i < s.resolutions.size(); ++i) {
        r.table[i].values["d_zero"] = d0[i];
        r.measured[key_at("d_zero", s.resolutions[i])] = d0[i];
        if (p.control) {
            r.table[i].values["d_pm_control"] = dctl[i];
            r.measured[key_at("d_pm_control", s.resolutions[i])] = dctl[i];
        }
    }
    r.thresholds["d_zero_min"] = s.separation * dpm.back();
    r.checks.push_back({"zero_flow_separated", key_at("d_zero", nf), ">=", "d_zero_min"});
    if (p.control) {
        r.thresholds["control_min"] = s.separation * dpm.back();
        r.checks.push_back({"control_symmetry_broken", key_at("d_pm_control", nf), ">=", "control_min"});
    } else {
        r.notes["control"] = "no negative control configured";
    }
    r.thresholds["separation"] = s.separation;
    r.finish();
    r.wall_seconds = seconds_since(t0);
    return r;
}

ExperimentReport exp_flux_detect(const ExperimentSetup& s, const FluxDetectParams& p) {
    auto t0 = Clock::now();
    check_setup(s);
    if (s.domain.obstacles.size() != 1) throw PreconditionError("flux detection needs exactly one obstacle");
    require_zero_on_outer(*grid_at(s.domain, s.resolutions.back()), p.profile, "profile gauge");
    Vec2 c = s.domain.obstacles[0].center;

    ExperimentReport r;
    r.name = "flux-detect";
    r.table = empty_table(s);
    VectorFn v1 = VectorFn::vortex(p.alpha1, c, p.r_cut);
    VectorFn v2 = VectorFn::vortex(p.alpha2, c, p.r_cut);
    VectorFn v1b = apply_gauge(v1, p.profile);
    std::vector<DNMatrix> base;
    std::vector<double> same, cross;
    for (int n : s.resolutions) {
        auto tr = Clock::now();
        auto g = grid_at(s.domain, n);
        std::vector<Coefficients> cs;
        for (const VectorFn* f : {&v1, &v2, &v1b})
            cs.push_back(build_coefficients(Equation::MinimalCoupling,
                                            MediumSpec::from_coefficient(g, p.refr, *f, 1.0, p.guard)));
        auto maps = assemble_group(cs, s.basis, s.jobs);
        cross.push_back(dn_distance(maps[0], maps[1]).rel);
        same.push_back(dn_distance(maps[0], maps[2]).rel);
        add_fingerprints(r, maps);
        base.push_back(std::move(maps[0]));
        r.row_seconds.push_back(seconds_since(tr));
    }
    equality_rows(r, s, base, same, "same_class");
    int nf = s.resolutions.back();
    for (std::size_t i = 0; i < s.resolutions.size(); ++i) {
        r.table[i].values["cross_flux"] = cross[i];
        r.measured[key_at("cross_flux", s.resolutions[i])] = cross[i];
    }
    r.thresholds["cross_flux_min"] = s.separation * same.back();
    r.checks.push_back({"fluxes_distinguished", key_at("cross_flux", nf), ">=", "cross_flux_min"});
    r.measured["alpha1"] = p.alpha1;
    r.measured["alpha2"] = p.alpha2;
    r.thresholds["separation"] = s.separation;

    if (p.wrap_resolution > 0) {
        auto tr = Clock::now();
        auto g = grid_at(s.domain, p.wrap_resolution);
        ScalarFn nw = ScalarFn::constant(p.wrap_n);
        VectorFn w2 = VectorFn::vortex(p.alpha1 + 2.0 * std::numbers::pi, c, p.r_cut);
        std::vector<Coefficients> cs;
        for (const VectorFn* f : {&v1, &w2, &v1b})
            cs.push_back(build_coefficients(Equation::MinimalCoupling,
                                            MediumSpec::from_coefficient(g, nw, *f, 1.0, p.guard)));
        auto maps = assemble_group(cs, time_scaled(s.basis, p.wrap_n), s.jobs);
        double wcross = dn_distance(maps[0], maps[1]).rel;
        double wsame = dn_distance(maps[0], maps[2]).rel;
        add_fingerprints(r, maps);
        std::vector<LoopPath> loops{LoopPath::circle(c, separating_radius(s.domain, s.domain.obstacles[0]), 4096)};
        bool wy = wu_yang_equal(v1, w2, loops);
        r.measured["wrap_cross_flux"] = wcross;
        r.measured["wrap_same_class"] = wsame;
        r.measured["wrap_wu_yang_equal"] = wy ? 1.0 : 0.0;
        r.measured["wrap_resolution"] = p.wrap_resolution;
        r.measured["wrap_n"] = p.wrap_n;
        r.thresholds["wrap_cross_flux_min"] = s.separation * wsame;
        r.thresholds["wu_yang_expected"] = 1.0;
        r.checks.push_back({"wrapped_flux_distinguished", "wrap_cross_flux", ">=", "wrap_cross_flux_min"});
        r.checks.push_back({"quantum_analogue_equal", "wrap_wu_yang_equal", ">=", "wu_yang_expected"});
        r.row_seconds.push_back(seconds_since(tr));
    }
    r.finish();
    r.wall_seconds = seconds_since(t0);
    return r;
}

ExperimentReport exp_diffeo_invariance(const ExperimentSetup& s, const DiffeoParams& p) {
    auto t0 = Clock::now();
    check_setup(s);
    if (!p.metric) throw PreconditionError("no metric given");
    auto finest = grid_at(s.domain, s.resolutions.back());
    double moved = max_outer(*finest, [&](Vec2 x) { return (p.map.phi.forward(x) - x).norm(); });
    if (moved > 1e-12) throw PreconditionError("map moves the outer boundary");
    if (p.map.a) require_zero_on_outer(*finest, *p.map.a, "time shift");
    for (const auto& o : s.domain.obstacles)
        for (Vec2 q : shape_outline(o, 256))
            if (o.distance(p.map.phi.forward(q)) > 1e-9 || o.distance(p.map.phi.inverse(q)) > 1e-9)
                throw PreconditionError("map does not carry the obstacles onto themselves");

    ExperimentReport r;
    r.name = "diffeo-invariance";
    r.table = empty_table(s);
    std::vector<DNMatrix> base;
    std::vector<double> dist;
    for (int n : s.resolutions) {
        auto tr = Clock::now();
        auto g = grid_at(s.domain, n);
        auto metric = MetricTensor::sample(p.metric, g);
        auto maps = assemble_group({build_coefficients(metric), build_coefficients(transform_operator(metric, p.map))},
                                   s.basis, s.jobs);
        dist.push_back(dn_distance(maps[0], maps[1]).rel);
        add_fingerprints(r, maps);
        base.push_back(std::move(maps[0]));
        r.row_seconds.push_back(seconds_since(tr));
    }
    equality_rows(r, s, base, dist, "distance");
    if (!p.metric_spec.is_null()) r.notes["metric"] = p.metric_spec.dump();
    r.notes["map"] = p.map.phi.spec.dump();
    if (p.map.a) r.notes["time_shift"] = p.map.a->spec.dump();
    r.finish();
    r.wall_seconds = seconds_since(t0);
    return r;
}

ExperimentReport exp_flux_boundary(const DomainSpec& d, const FluxBoundaryParams& p) {
    auto t0 = Clock::now();
    if (d.obstacles.size() != 1) throw PreconditionError("flux recovery needs exactly one obstacle");
    const ObstacleShape& o = d.obstacles[0];
    double radius = separating_radius(d, o);

    int per_side = std::max(1, p.segments / 4);
    std::vector<Vec2> corners{d.lo, {d.hi.x, d.lo.y}, d.hi, {d.lo.x, d.hi.y}};
    std::vector<Vec2> pts;
    for (int k = 0; k < 4; ++k) {
        Vec2 a = corners[k], b = corners[(k + 1) % 4];
        for (int i = 0; i < per_side; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / per_side));
    }
    LoopPath outer = LoopPath::close(pts);
    LoopPath inner = LoopPath::circle(o.center, radius, p.segments);
    double a_outer = line_integral(p.v, outer);
    double a_inner = line_integral(p.v, inner);

    // Curl on a lattice of the region between the circle and the outer boundary.
    int m = std::max(2, static_cast<int>(std::sqrt(static_cast<double>(p.curl_samples))));
    double max_curl = 0.0;
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i) {
            Vec2 x{d.lo.x + (d.hi.x - d.lo.x) * i / m, d.lo.y + (d.hi.y - d.lo.y) * j / m};
            if ((x - o.center).norm() < radius) continue;
            Mat2 J = p.v.jac(x);
            max_curl = std::max(max_curl, std::abs(J.yx - J.xy));
        }

    ExperimentReport r;
    r.name = "flux-boundary";
    r.fingerprints.push_back(p.v.spec.dump());
    r.measured["alpha_outer"] = a_outer;
    r.measured["alpha_obstacle"] = a_inner;
    r.measured["difference"] = std::abs(a_outer - a_inner);
    r.measured["relative_difference"] = std::abs(a_outer - a_inner) / std::max(1.0, std::abs(a_inner));
    r.measured["max_curl"] = max_curl;
    r.measured["loop_radius"] = radius;
    r.thresholds["quadrature_tol"] = p.quadrature_tol;
    r.thresholds["curl_tol"] = p.curl_tol;
    r.checks.push_back({"circulations_agree", "relative_difference", "<=", "quadrature_tol"});
    r.checks.push_back({"irrotational", "max_curl", "<=", "curl_tol"});
    r.notes["irrotational"] = max_curl <= p.curl_tol ? "yes" : "no, flow has vorticity between the loops";
    r.finish();
    r.wall_seconds = seconds_since(t0);
    return r;
}

}  // namespace abwave
