// Command-line entry point: forward runs, DN maps, gauge checks, rays, charts,
// experiments and the randomized property suite.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "abwave/config.hpp"
#include "abwave/errors.hpp"
#include "abwave/gauge.hpp"
#include "abwave/goursat.hpp"
#include "abwave/io.hpp"
#include "abwave/verify.hpp"

namespace fs = std::filesystem;
using namespace abwave;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct Flags {
    std::string config;
    std::string out;
    int jobs = 0;
    long long seed = -1;
    int resolution = 0;
    std::string experiment;
};

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

RunConfig load(const Flags& f, bool required) {
    RunConfig cfg;
    if (!f.config.empty())
        cfg = load_config(f.config);
    else if (required)
        throw ConfigError("--config: a configuration file is required");
    if (f.jobs > 0) cfg.jobs = f.jobs;
    if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
    if (f.resolution > 0) {
        if (f.resolution < 32) throw ConfigError("--resolution: must be at least 32");
        cfg.domain.resolution = f.resolution;
        cfg.solver.resolutions = {f.resolution / 4, f.resolution / 2, f.resolution};
    }
    if (!f.out.empty())
        cfg.out_dir = f.out;
    else if (const char* env = std::getenv("ABWAVE_OUT"); env && *env)
        cfg.out_dir = env;
    else if (cfg.out_dir.empty())
        cfg.out_dir = "abwave_out";
    ensure_dir(cfg.out_dir);
    return cfg;
}

// Resolution of single-grid commands: the flag, else the finest configured one.
int single_resolution(const Flags& f, const RunConfig& cfg) {
    if (f.resolution > 0) return f.resolution;
    return cfg.solver.resolutions.back();
}

GridPtr single_grid(const Flags& f, const RunConfig& cfg) {
    DomainSpec d = cfg.domain;
    d.resolution = single_resolution(f, cfg);
    return build_domain(d);
}

int cmd_simulate(const Flags& f) {
    RunConfig cfg = load(f, true);
    auto grid = single_grid(f, cfg);
    MediumSpec medium = cfg.medium.build(grid);
    SimConfig sc;
    sc.coeffs = build_coefficients(cfg.equation, medium);
    sc.t_final = cfg.solver.t_final;
    sc.dt = cfg.solver.dt;
    sc.cfl_safety = cfg.solver.cfl_safety;
    sc.record = RecordMode::Snapshots;
    sc.snapshot_stride = cfg.solver.snapshot_stride;
    sc.track_energy = true;
    PulseSpec pulse = cfg.basis.pulses(grid->perimeter).front();
    const double perimeter = grid->perimeter;
    sc.drive = [pulse, perimeter](double t, const BoundaryNode& b) { return pulse.value(t, b.s, perimeter); };
    SimResult r = simulate(sc);

    std::string snap_dir = path_in(cfg.out_dir, "snapshots");
    ensure_dir(snap_dir);
    for (const auto& s : r.snapshots) write_snapshot(s.u, s.t, s.step, path_in(snap_dir, "u_" + std::to_string(s.step)));
    write_text(path_in(cfg.out_dir, "trace.csv"), trace_csv(dn_trace(r.boundary, sc.coeffs)));
    json summary = {{"resolution", grid->nx},         {"dt", r.dt},
                    {"steps", r.steps},               {"snapshots", r.snapshots.size()},
                    {"max_abs_u", r.max_abs_u},       {"equation", to_string(cfg.equation)},
                    {"medium", medium.describe()},    {"pulse", pulse.to_json()}};
    write_text(path_in(cfg.out_dir, "simulate.json"), summary.dump(2) + "\n");
    std::cout << "simulate: " << r.steps << " steps, " << r.snapshots.size() << " snapshots in " << snap_dir << "\n";
    return kExitPass;
}

int cmd_dnmap(const Flags& f) {
    RunConfig cfg = load(f, true);
    auto grid = single_grid(f, cfg);
    Coefficients c = build_coefficients(cfg.equation, cfg.medium.build(grid));
    AssembleOptions opt;
    opt.jobs = cfg.jobs;
    opt.dt = cfg.solver.dt;
    opt.cfl_safety = cfg.solver.cfl_safety;
    DNMatrix d = assemble_dn(c, cfg.basis, opt);
    std::string dir = path_in(cfg.out_dir, "dnmap");
    write_dn_matrix(d, dir);
    write_text(path_in(cfg.out_dir, "dn_response_0.csv"), trace_csv(d.responses.front()));
    std::cout << "dnmap: " << d.responses.size() << " responses, norm " << dn_norm(d) << ", fingerprint "
              << d.fingerprint << " in " << dir << "\n";
    return kExitPass;
}

int cmd_gauge_check(const Flags& f) {
    RunConfig cfg = load(f, true);
    auto grid = single_grid(f, cfg);
    VectorField2D v = sample(cfg.medium.coefficient(), grid);
    VectorField2D vhat;
    if (cfg.compare_v)
        vhat = sample(*cfg.compare_v, grid);
    else if (cfg.gauge)
        vhat = apply_gauge(v, GaugeFunction::from_fn(*cfg.gauge, grid));
    else
        throw ConfigError("/compare_v: gauge-check needs compare_v or gauge");
    WitnessResult w = try_same_class_witness(v, vhat);
    std::vector<LoopPath> loops;
    for (int k = 0; k < grid->obstacle_count(); ++k) loops.push_back(obstacle_loop(*grid, k));
    bool wy = wu_yang_equal(v, vhat, loops);
    json out = {{"same_class", w.a.has_value()},
                {"failure", w.failure},
                {"worst_curl", w.worst_curl},
                {"holonomy", w.holonomy},
                {"wu_yang_equal", wy},
                {"resolution", grid->nx}};
    if (w.a) out["max_abs_a"] = w.a->max_abs();
    write_text(path_in(cfg.out_dir, "gauge_check.json"), out.dump(2) + "\n");
    std::cout << "gauge-check: " << (w.a ? "same class" : "different classes (" + w.failure + ")")
              << ", wu_yang_equal " << (wy ? "true" : "false") << "\n";
    return kExitPass;
}

int cmd_rays(const Flags& f) {
    RunConfig cfg = load(f, true);
    auto grid = single_grid(f, cfg);
    MediumSpec medium = cfg.medium.build(grid);
    MetricFn g = equation_metric_fn(cfg.equation, medium);
    AbPhaseSetup setup;
    setup.source = cfg.rays.source;
    setup.receiver = cfg.rays.receiver;
    setup.launch_angle = cfg.rays.launch_angle;
    setup.cell = cfg.rays.cell;
    setup.t_max = cfg.rays.t_max;
    setup.rays.dt = cfg.rays.dt;
    setup.rays.obstacles = cfg.domain.obstacles;
    std::string dir = path_in(cfg.out_dir, "rays");
    ensure_dir(dir);
    json results = json::array();
    for (double k : cfg.rays.k) {
        AbPhaseResult r = ab_phase(g, setup, k);
        std::string tag = "k" + std::to_string(static_cast<long long>(std::llround(k)));
        write_text(path_in(dir, "left_" + tag + ".csv"), ray_csv(r.left));
        write_text(path_in(dir, "right_" + tag + ".csv"), ray_csv(r.right));
        results.push_back({{"k", k},
                           {"phase", r.phase},
                           {"loop_phase", r.loop_phase},
                           {"loop_integral", r.loop_integral},
                           {"max_flow_ratio", r.max_flow_ratio},
                           {"miss_left", r.miss_left},
                           {"miss_right", r.miss_right}});
        std::cout << "rays: k=" << k << " phase " << r.phase << " loop " << r.loop_phase << "\n";
    }
    write_text(path_in(cfg.out_dir, "rays.json"), json{{"results", results}}.dump(2) + "\n");
    return kExitPass;
}

int cmd_chart(const Flags& f) {
    RunConfig cfg = load(f, true);
    auto grid = single_grid(f, cfg);
    MetricFn g = equation_metric_fn(cfg.equation, cfg.medium.build(grid));
    GoursatChart chart = build_chart(g, *grid, cfg.chart);
    write_text(path_in(cfg.out_dir, "chart.csv"), chart_csv(chart));
    json out = {{"side", cfg.chart.side},
                {"T", chart.T},
                {"delta", chart.eiconal.lattice.delta},
                {"eiconal_residual", chart.eiconal.residual},
                {"transversal_residual", chart.transversal.residual},
                {"ray_drift", chart.eiconal.ray_drift}};
    write_text(path_in(cfg.out_dir, "chart.json"), out.dump(2) + "\n");
    std::cout << "chart: eiconal residual " << chart.eiconal.residual << ", transversal residual "
              << chart.transversal.residual << "\n";
    return kExitPass;
}

int cmd_experiment(const Flags& f) {
    RunConfig cfg = load(f, true);
    ExperimentReport r = run_experiment(cfg, f.experiment);
    write_report(r, cfg.out_dir);
    std::cout << r.to_text();
    return r.pass ? kExitPass : kExitFail;
}

int cmd_verify(const Flags& f) {
    RunConfig cfg = load(f, false);
    VerifyOptions opt;
    opt.seed = f.seed >= 0 ? static_cast<std::uint64_t>(f.seed) : (f.config.empty() ? 7 : cfg.seed);
    opt.jobs = cfg.jobs;
    auto reports = verify_suite(opt);
    json out = verify_json(reports, opt.seed);
    write_text(path_in(cfg.out_dir, "verify.json"), out.dump(2) + "\n");
    std::string text;
    for (const auto& r : reports) text += r.to_text(false);
    write_text(path_in(cfg.out_dir, "verify.txt"), text);
    std::cout << text;
    return out["pass"].get<bool>() ? kExitPass : kExitFail;
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--out", f.out, "output directory (default $ABWAVE_OUT)");
    sub->add_option("--jobs", f.jobs, "maximum concurrent simulations")->check(CLI::PositiveNumber);
    sub->add_option("--seed", f.seed, "seed for randomized suites")->check(CLI::NonNegativeNumber);
    sub->add_option("--resolution", f.resolution, "grid nodes per side (override)")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wave propagation in moving media: DN maps, gauge classes and characteristic charts"};
    app.require_subcommand(1);
    Flags f;
    auto* simulate_cmd = app.add_subcommand("simulate", "one forward run with snapshots");
    auto* dnmap_cmd = app.add_subcommand("dnmap", "assemble and store a DN map");
    auto* gauge_cmd = app.add_subcommand("gauge-check", "same-class witness and Wu-Yang comparison");
    auto* rays_cmd = app.add_subcommand("rays", "geometric-optics phase around the obstacle");
    auto* chart_cmd = app.add_subcommand("chart", "characteristic chart coefficient fields");
    auto* exp_cmd = app.add_subcommand("experiment", "run a named experiment pipeline");
    auto* verify_cmd = app.add_subcommand("verify", "randomized property suite");
    for (auto* s : {simulate_cmd, dnmap_cmd, gauge_cmd, rays_cmd, chart_cmd, exp_cmd, verify_cmd}) add_common(s, f);
    exp_cmd->add_option("name", f.experiment, "experiment name")
        ->required()
        ->check(CLI::IsMember(experiment_names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }

    try {
        if (*simulate_cmd) return cmd_simulate(f);
        if (*dnmap_cmd) return cmd_dnmap(f);
        if (*gauge_cmd) return cmd_gauge_check(f);
        if (*rays_cmd) return cmd_rays(f);
        if (*chart_cmd) return cmd_chart(f);
        if (*exp_cmd) return cmd_experiment(f);
        if (*verify_cmd) return cmd_verify(f);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error in " << e.module() << ": " << e.what() << "\n";
        return kExitFail;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFail;
    }
    return kExitFail;
}
