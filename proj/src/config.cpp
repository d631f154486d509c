#include "abwave/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "abwave/errors.hpp"
#include "abwave/jsonutil.hpp"

namespace abwave {

using nlohmann::json;

namespace {

std::vector<int> int_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of integers");
    std::vector<int> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number_integer()) throw ConfigError(path + "/" + std::to_string(k) + ": expected an integer");
        out.push_back(j[k].get<int>());
    }
    return out;
}

std::vector<double> number_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw ConfigError(path + "/" + std::to_string(k) + ": expected a number");
        out.push_back(j[k].get<double>());
    }
    return out;
}

ObstacleShape obstacle_from_json(const json& j, const std::string& path) {
    std::string type = cfg::text(j, path, "type");
    if (type == "disk") {
        cfg::check_keys(j, path, {"type", "center", "radius"}, {"center", "radius"});
        return ObstacleShape::disk(cfg::point(j, path, "center"), cfg::number(j, path, "radius"));
    }
    if (type == "rect") {
        cfg::check_keys(j, path, {"type", "center", "half"}, {"center", "half"});
        return ObstacleShape::rect(cfg::point(j, path, "center"), cfg::point(j, path, "half"));
    }
    throw ConfigError(path + "/type: unknown obstacle type '" + type + "'");
}

DomainSpec domain_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"outer", "obstacles", "resolution"}, {});
    DomainSpec d;
    if (j.contains("outer")) {
        const json& o = j["outer"];
        std::string op = path + "/outer";
        std::string type = cfg::text(o, op, "type");
        if (type != "rect") throw ConfigError(op + "/type: outer domain must be an axis-aligned rectangle");
        cfg::check_keys(o, op, {"type", "lo", "hi"}, {"lo", "hi"});
        d.lo = cfg::point(o, op, "lo");
        d.hi = cfg::point(o, op, "hi");
        if (d.hi.x <= d.lo.x || d.hi.y <= d.lo.y) throw ConfigError(op + ": hi must exceed lo");
    }
    if (j.contains("obstacles")) {
        const json& a = j["obstacles"];
        if (!a.is_array()) throw ConfigError(path + "/obstacles: expected an array");
        for (std::size_t k = 0; k < a.size(); ++k)
            d.obstacles.push_back(obstacle_from_json(a[k], path + "/obstacles/" + std::to_string(k)));
    }
    if (j.contains("resolution")) d.resolution = cfg::integer(j, path, "resolution");
    return d;
}

MediumConfig medium_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"refr", "v", "flow", "c", "guard"}, {});
    MediumConfig m;
    if (j.contains("refr")) m.refr = scalar_from_json(j["refr"], path + "/refr");
    if (j.contains("v") && j.contains("flow")) throw ConfigError(path + ": give either v or flow, not both");
    if (j.contains("v")) m.v = vector_from_json(j["v"], path + "/v");
    if (j.contains("flow")) m.flow = vector_from_json(j["flow"], path + "/flow");
    m.c = cfg::number_or(j, path, "c", 1.0);
    m.guard = cfg::number_or(j, path, "guard", MediumSpec::kDefaultGuard);
    return m;
}

SolverConfig solver_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"resolutions", "t_final", "dt", "cfl_safety", "snapshot_stride"}, {});
    SolverConfig s;
    if (j.contains("resolutions")) s.resolutions = int_list(j["resolutions"], path + "/resolutions");
    s.t_final = cfg::number_or(j, path, "t_final", s.t_final);
    s.dt = cfg::number_or(j, path, "dt", s.dt);
    s.cfl_safety = cfg::number_or(j, path, "cfl_safety", s.cfl_safety);
    if (j.contains("snapshot_stride")) s.snapshot_stride = cfg::integer(j, path, "snapshot_stride");
    if (s.t_final <= 0.0) throw ConfigError(path + "/t_final: must be positive");
    return s;
}

DiffeoConfig diffeo_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"map", "time_shift", "metric"}, {});
    DiffeoConfig d;
    if (j.contains("map")) d.map.phi = map_from_json(j["map"], path + "/map");
    if (j.contains("time_shift")) d.map.a = scalar_from_json(j["time_shift"], path + "/time_shift");
    if (j.contains("metric")) {
        d.metric = cfg::text(j, path, "metric");
        if (d.metric != "slow" && d.metric != "gordon" && d.metric != "minimal_coupling")
            throw ConfigError(path + "/metric: expected slow, gordon or minimal_coupling");
    }
    return d;
}

RaysConfig rays_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"source", "receiver", "k", "launch_angle", "cell", "t_max", "dt"}, {});
    RaysConfig r;
    if (j.contains("source")) r.source = cfg::point(j, path, "source");
    if (j.contains("receiver")) r.receiver = cfg::point(j, path, "receiver");
    if (j.contains("k")) r.k = number_list(j["k"], path + "/k");
    r.launch_angle = cfg::number_or(j, path, "launch_angle", r.launch_angle);
    r.cell = cfg::number_or(j, path, "cell", r.cell);
    r.t_max = cfg::number_or(j, path, "t_max", r.t_max);
    r.dt = cfg::number_or(j, path, "dt", r.dt);
    return r;
}

ChartOptions chart_from_json(const json& j, const std::string& path) {
    cfg::check_keys(j, path, {"side", "patch_lo", "patch_hi", "delta", "T", "nt", "nn", "steps_per_row"}, {});
    ChartOptions c;
    if (j.contains("side")) c.side = cfg::integer(j, path, "side");
    if (c.side < 0 || c.side > 3) throw ConfigError(path + "/side: expected 0, 1, 2 or 3");
    c.patch_lo = cfg::number_or(j, path, "patch_lo", c.patch_lo);
    c.patch_hi = cfg::number_or(j, path, "patch_hi", c.patch_hi);
    c.delta = cfg::number_or(j, path, "delta", c.delta);
    c.T = cfg::number_or(j, path, "T", c.T);
    if (j.contains("nt")) c.nt = cfg::integer(j, path, "nt");
    if (j.contains("nn")) c.nn = cfg::integer(j, path, "nn");
    if (j.contains("steps_per_row")) c.steps_per_row = cfg::integer(j, path, "steps_per_row");
    return c;
}

// Experiment-specific keys accepted in the experiment block.
const std::vector<std::string>* experiment_keys(const std::string& name) {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"gauge-invariance", {}},
        {"sign-ambiguity", {"b", "control"}},
        {"flux-detect", {"alpha1", "alpha2", "profile", "r_cut", "guard", "wrap_resolution", "wrap_n"}},
        {"diffeo-invariance", {}},
        {"flux-boundary", {"segments", "quadrature_tol", "curl_tol", "curl_samples"}},
    };
    auto it = keys.find(name);
    return it == keys.end() ? nullptr : &it->second;
}

void check_params(const std::string& name, const json& params) {
    const auto* allowed = experiment_keys(name);
    if (!allowed) throw ConfigError("/experiment/name: unknown experiment '" + name + "'");
    for (auto it = params.begin(); it != params.end(); ++it)
        if (std::find(allowed->begin(), allowed->end(), it.key()) == allowed->end())
            throw ConfigError("/experiment/" + it.key() + ": unknown key for experiment '" + name + "'");
}

ExperimentConfig experiment_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    ExperimentConfig e;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "name")
            e.name = cfg::text(j, path, "name");
        else if (k == "tolerance_factor")
            e.tolerance_factor = cfg::number(j, path, "tolerance_factor");
        else if (k == "separation")
            e.separation = cfg::number(j, path, "separation");
        else if (k == "min_order")
            e.min_order = cfg::number(j, path, "min_order");
        else
            e.params[k] = it.value();
    }
    if (!e.name.empty()) check_params(e.name, e.params);
    return e;
}

const json& params_checked(const RunConfig& cfg, const std::string& name) {
    check_params(name, cfg.experiment.params);
    return cfg.experiment.params;
}

Vec2 obstacle_center(const RunConfig& cfg) {
    if (cfg.domain.obstacles.empty()) throw ConfigError("/domain/obstacles: the experiment needs an obstacle");
    return cfg.domain.obstacles[0].center;
}

}  // namespace

MediumSpec MediumConfig::build(const GridPtr& grid) const {
    if (flow) return MediumSpec(grid, refr, *flow, c, guard);
    return MediumSpec::from_coefficient(grid, refr, coefficient(), c, guard);
}

VectorFn MediumConfig::coefficient() const { return v ? *v : VectorFn::constant({0.0, 0.0}); }

SpatialMap map_from_json(const json& j, const std::string& path) {
    std::string type = cfg::text(j, path, "type");
    if (type == "identity") {
        cfg::check_keys(j, path, {"type"}, {});
        return SpatialMap::identity();
    }
    if (type == "twist") {
        cfg::check_keys(j, path, {"type", "center", "r_inner", "r_outer", "angle"},
                        {"center", "r_inner", "r_outer", "angle"});
        double r1 = cfg::number(j, path, "r_inner"), r2 = cfg::number(j, path, "r_outer");
        if (!(r1 >= 0.0 && r2 > r1)) throw ConfigError(path + ": need 0 <= r_inner < r_outer");
        return SpatialMap::twist(cfg::point(j, path, "center"), r1, r2, cfg::number(j, path, "angle"));
    }
    throw ConfigError(path + "/type: unknown map type '" + type + "'");
}

RunConfig parse_config(const json& j) {
    cfg::check_keys(j, "", {"domain", "medium", "equation", "gauge", "compare_v", "diffeo", "solver", "basis", "rays",
                            "chart", "experiment", "output", "jobs", "seed"},
                    {});
    RunConfig c;
    if (j.contains("domain")) c.domain = domain_from_json(j["domain"], "/domain");
    if (j.contains("medium")) c.medium = medium_from_json(j["medium"], "/medium");
    if (j.contains("equation")) {
        std::string e = cfg::text(j, "", "equation");
        try {
            c.equation = equation_from_string(e);
        } catch (const ConfigError&) {
            throw ConfigError("/equation: unknown equation '" + e + "'");
        }
    }
    if (j.contains("gauge")) c.gauge = scalar_from_json(j["gauge"], "/gauge");
    if (j.contains("compare_v")) c.compare_v = vector_from_json(j["compare_v"], "/compare_v");
    if (j.contains("diffeo")) c.diffeo = diffeo_from_json(j["diffeo"], "/diffeo");
    if (j.contains("solver")) c.solver = solver_from_json(j["solver"], "/solver");
    if (j.contains("basis")) c.basis = DNBasis::from_json(j["basis"], "/basis");
    if (j.contains("rays")) c.rays = rays_from_json(j["rays"], "/rays");
    if (j.contains("chart")) c.chart = chart_from_json(j["chart"], "/chart");
    if (j.contains("experiment")) c.experiment = experiment_from_json(j["experiment"], "/experiment");
    if (j.contains("output")) c.out_dir = cfg::text(j, "", "output");
    if (j.contains("jobs")) c.jobs = cfg::integer(j, "", "jobs");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("/seed: expected a non-negative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (c.jobs < 1) throw ConfigError("/jobs: must be at least 1");
    for (int n : c.solver.resolutions)
        if (n < 8) throw ConfigError("/solver/resolutions: each resolution must be at least 8");
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_config(j);
}

MetricFn diffeo_metric(const RunConfig& cfg) {
    const auto& m = cfg.medium;
    if (cfg.diffeo.metric == "gordon") {
        if (!m.flow) throw ConfigError("/medium/flow: the gordon metric needs a physical flow");
        return gordon_metric_fn(m.refr, *m.flow, m.c);
    }
    if (cfg.diffeo.metric == "minimal_coupling") return minimal_coupling_metric_fn(m.refr, m.coefficient());
    return slow_metric_fn(m.refr, m.coefficient());
}

ExperimentSetup experiment_setup(const RunConfig& cfg) {
    ExperimentSetup s;
    s.domain = cfg.domain;
    s.resolutions = cfg.solver.resolutions;
    s.basis = cfg.basis;
    s.jobs = cfg.jobs;
    s.tolerance_factor = cfg.experiment.tolerance_factor;
    s.separation = cfg.experiment.separation;
    s.min_order = cfg.experiment.min_order;
    return s;
}

GaugeInvarianceParams gauge_params(const RunConfig& cfg) {
    params_checked(cfg, "gauge-invariance");
    if (!cfg.gauge) throw ConfigError("/gauge: gauge-invariance needs a gauge function");
    GaugeInvarianceParams p;
    p.refr = cfg.medium.refr;
    p.v = cfg.medium.coefficient();
    p.a = *cfg.gauge;
    p.equation = cfg.equation;
    return p;
}

SignAmbiguityParams sign_params(const RunConfig& cfg) {
    const json& j = params_checked(cfg, "sign-ambiguity");
    SignAmbiguityParams p;
    p.refr = cfg.medium.refr;
    p.equation = cfg.equation;
    if (!j.contains("b")) throw ConfigError("/experiment/b: sign-ambiguity needs a potential b");
    p.b = scalar_from_json(j["b"], "/experiment/b");
    if (j.contains("control")) p.control = vector_from_json(j["control"], "/experiment/control");
    return p;
}

FluxDetectParams flux_detect_params(const RunConfig& cfg) {
    const json& j = params_checked(cfg, "flux-detect");
    obstacle_center(cfg);
    FluxDetectParams p;
    p.refr = cfg.medium.refr;
    p.alpha1 = cfg::number_or(j, "/experiment", "alpha1", p.alpha1);
    p.alpha2 = cfg::number_or(j, "/experiment", "alpha2", p.alpha2);
    if (j.contains("profile"))
        p.profile = scalar_from_json(j["profile"], "/experiment/profile");
    else if (cfg.gauge)
        p.profile = *cfg.gauge;
    else
        throw ConfigError("/experiment/profile: flux-detect needs an in-class profile gauge");
    p.r_cut = cfg::number_or(j, "/experiment", "r_cut", p.r_cut);
    p.guard = cfg::number_or(j, "/experiment", "guard", p.guard);
    if (j.contains("wrap_resolution")) p.wrap_resolution = cfg::integer(j, "/experiment", "wrap_resolution");
    p.wrap_n = cfg::number_or(j, "/experiment", "wrap_n", p.wrap_n);
    return p;
}

DiffeoParams diffeo_params(const RunConfig& cfg) {
    params_checked(cfg, "diffeo-invariance");
    DiffeoParams p;
    p.metric = diffeo_metric(cfg);
    p.metric_spec = {{"metric", cfg.diffeo.metric}, {"medium", cfg.medium.v ? cfg.medium.v->spec : json()},
                     {"refr", cfg.medium.refr.spec}};
    p.map = cfg.diffeo.map;
    return p;
}

FluxBoundaryParams flux_boundary_params(const RunConfig& cfg) {
    const json& j = params_checked(cfg, "flux-boundary");
    FluxBoundaryParams p;
    p.v = cfg.medium.coefficient();
    if (j.contains("segments")) p.segments = cfg::integer(j, "/experiment", "segments");
    p.quadrature_tol = cfg::number_or(j, "/experiment", "quadrature_tol", p.quadrature_tol);
    p.curl_tol = cfg::number_or(j, "/experiment", "curl_tol", p.curl_tol);
    if (j.contains("curl_samples")) p.curl_samples = cfg::integer(j, "/experiment", "curl_samples");
    return p;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"gauge-invariance", "sign-ambiguity", "flux-detect",
                                                "diffeo-invariance", "flux-boundary"};
    return names;
}

ExperimentReport run_experiment(const RunConfig& cfg, const std::string& name) {
    std::string n = name.empty() ? cfg.experiment.name : name;
    if (n == "gauge-invariance") return exp_gauge_invariance(experiment_setup(cfg), gauge_params(cfg));
    if (n == "sign-ambiguity") return exp_sign_ambiguity(experiment_setup(cfg), sign_params(cfg));
    if (n == "flux-detect") return exp_flux_detect(experiment_setup(cfg), flux_detect_params(cfg));
    if (n == "diffeo-invariance") return exp_diffeo_invariance(experiment_setup(cfg), diffeo_params(cfg));
    if (n == "flux-boundary") return exp_flux_boundary(cfg.domain, flux_boundary_params(cfg));
    throw ConfigError("/experiment/name: unknown experiment '" + n + "'");
}

}  // namespace abwave
