#include "abwave/dnmap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "abwave/errors.hpp"
#include "abwave/jsonutil.hpp"

namespace abwave {

double truncated_gaussian(double x, double sigma) {
    double rho = x / sigma;
    if (std::abs(rho) >= 4.0) return 0.0;
    double taper = 1.0 - rho * rho / 16.0;
    return std::exp(-0.5 * rho * rho) * taper * taper * taper;
}

double PulseSpec::value(double t, double s, double perimeter) const {
    double ds = std::remainder(s - s_center, perimeter);
    return amplitude * truncated_gaussian(ds, sigma_s) * truncated_gaussian(t - t_center, sigma_t);
}

nlohmann::json PulseSpec::to_json() const {
    return {{"s_center", s_center}, {"t_center", t_center}, {"sigma_s", sigma_s}, {"sigma_t", sigma_t},
            {"amplitude", amplitude}};
}

PulseSpec PulseSpec::from_json(const nlohmann::json& j) {
    PulseSpec p;
    p.s_center = j.at("s_center").get<double>();
    p.t_center = j.at("t_center").get<double>();
    p.sigma_s = j.at("sigma_s").get<double>();
    p.sigma_t = j.at("sigma_t").get<double>();
    p.amplitude = j.value("amplitude", 1.0);
    return p;
}

std::vector<PulseSpec> DNBasis::pulses(double perimeter) const {
    std::vector<PulseSpec> out;
    double start = first_onset > 0.0 ? first_onset : 0.1 * t_final;
    for (int j = 0; j < n_onsets; ++j)
        for (int i = 0; i < n_centers; ++i) {
            PulseSpec p;
            p.s_center = (i + 0.5) * perimeter / n_centers;
            p.t_center = start + 4.0 * sigma_t + j * onset_spacing;
            p.sigma_s = sigma_s;
            p.sigma_t = sigma_t;
            p.amplitude = amplitude;
            out.push_back(p);
        }
    return out;
}

int DNBasis::samples() const { return static_cast<int>(std::lround(t_final / record_dt)); }

nlohmann::json DNBasis::to_json() const {
    return {{"n_centers", n_centers},         {"n_onsets", n_onsets}, {"sigma_s", sigma_s},
            {"sigma_t", sigma_t},             {"first_onset", first_onset},
            {"onset_spacing", onset_spacing}, {"t_final", t_final},   {"record_dt", record_dt}, {"amplitude", amplitude}};
}

DNBasis DNBasis::from_json(const nlohmann::json& j, const std::string& path) {
    cfg::check_keys(j, path,
                    {"n_centers", "n_onsets", "sigma_s", "sigma_t", "first_onset", "onset_spacing", "t_final",
                     "record_dt", "amplitude"},
                    {});
    DNBasis b;
    b.n_centers = static_cast<int>(cfg::number_or(j, path, "n_centers", b.n_centers));
    b.n_onsets = static_cast<int>(cfg::number_or(j, path, "n_onsets", b.n_onsets));
    b.sigma_s = cfg::number_or(j, path, "sigma_s", b.sigma_s);
    b.sigma_t = cfg::number_or(j, path, "sigma_t", b.sigma_t);
    b.first_onset = cfg::number_or(j, path, "first_onset", b.first_onset);
    b.onset_spacing = cfg::number_or(j, path, "onset_spacing", b.onset_spacing);
    b.t_final = cfg::number_or(j, path, "t_final", b.t_final);
    b.record_dt = cfg::number_or(j, path, "record_dt", b.record_dt);
    b.amplitude = cfg::number_or(j, path, "amplitude", b.amplitude);
    if (b.n_centers < 1 || b.n_onsets < 1) throw ConfigError(path + ": basis needs at least one pulse");
    if (b.sigma_s <= 0 || b.sigma_t <= 0 || b.t_final <= 0 || b.record_dt <= 0)
        throw ConfigError(path + ": basis widths and times must be positive");
    return b;
}

BoundarySignal dn_trace(const BoundaryRecord& rec, const Coefficients& c) {
    const Grid2D& g = *c.grid;
    const std::size_t nb = g.outer_boundary.size();
    const std::size_t nt = rec.t.size();
    if (nt == 0) throw MissingLayersError("no boundary samples were recorded");
    auto complete = [&](const std::vector<std::vector<double>>& L) {
        return L.size() == nt && std::all_of(L.begin(), L.end(), [&](const auto& r) { return r.size() == nb; });
    };
    if (!complete(rec.layer0) || !complete(rec.layer1) || !complete(rec.layer2) || !complete(rec.prev) ||
        !complete(rec.next))
        throw MissingLayersError("boundary layers do not cover every sample and node");
    if (rec.dt <= 0.0) throw MissingLayersError("record lacks the solver step");

    BoundarySignal out;
    out.t = rec.t;
    out.dt = nt > 1 ? rec.t[1] - rec.t[0] : rec.dt;
    out.perimeter = g.perimeter;
    for (const auto& b : g.outer_boundary) {
        out.s.push_back(b.s);
        out.side.push_back(b.side);
    }
    out.values.assign(nt * nb, 0.0);

    const bool flow_form = c.equation != Equation::General;
    for (std::size_t k = 0; k < nb; ++k) {
        const BoundaryNode& b = g.outer_boundary[k];
        const bool corner = (b.i == 0 || b.i == g.nx - 1) && (b.j == 0 || b.j == g.ny - 1);
        const std::size_t kp = (k + 1) % nb, kpp = (k + 2) % nb, km = (k + nb - 1) % nb, kmm = (k + nb - 2) % nb;
        const Vec2 p = g.node(b.i, b.j);
        const bool horizontal = b.side == 0 || b.side == 2;
        const double hn = horizontal ? g.dy : g.dx, ht = horizontal ? g.dx : g.dy;
        Vec2 e1, e2;
        double h1 = 0, h2 = 0;
        if (corner) {
            Vec2 q1 = g.node(g.outer_boundary[kp].i, g.outer_boundary[kp].j);
            Vec2 q2 = g.node(g.outer_boundary[km].i, g.outer_boundary[km].j);
            h1 = (q1 - p).norm();
            h2 = (q2 - p).norm();
            e1 = (q1 - p) * (1.0 / h1);
            e2 = (q2 - p) * (1.0 / h2);
        }
        const Mat3& gm = c.g[g.idx(b.i, b.j)];
        const Vec2 nu = b.normal;
        for (std::size_t r = 0; r < nt; ++r) {
            const auto& l0 = rec.layer0[r];
            Vec2 grad;
            double dnu;
            if (corner) {
                double d1 = (-3 * l0[k] + 4 * l0[kp] - l0[kpp]) / (2 * h1);
                double d2 = (-3 * l0[k] + 4 * l0[km] - l0[kmm]) / (2 * h2);
                grad = e1 * d1 + e2 * d2;
                dnu = grad.dot(nu);
            } else {
                dnu = (3 * l0[k] - 4 * rec.layer1[r][k] + rec.layer2[r][k]) / (2 * hn);
                double dtan = (l0[kp] - l0[km]) / (2 * ht);
                grad = nu * dnu + b.tangent * dtan;
            }
            double ut = (rec.next[r][k] - rec.prev[r][k]) / (2 * rec.dt);
            double value;
            if (flow_form) {
                value = dnu - (gm(0, 1) * nu.x + gm(0, 2) * nu.y) * ut;
            } else {
                double cx = gm(1, 0) * ut + gm(1, 1) * grad.x + gm(1, 2) * grad.y;
                double cy = gm(2, 0) * ut + gm(2, 1) * grad.x + gm(2, 2) * grad.y;
                double q = gm(1, 1) * nu.x * nu.x + 2 * gm(1, 2) * nu.x * nu.y + gm(2, 2) * nu.y * nu.y;
                value = -(nu.x * cx + nu.y * cy) / std::sqrt(std::abs(q));
            }
            out.at(r, k) = value;
        }
    }
    return out;
}

double common_step(const std::vector<const Coefficients*>& configs, const DNBasis& basis, double safety) {
    double limit = 1e300;
    for (const Coefficients* c : configs) limit = std::min(limit, cfl_dt(*c, safety));
    int stride = std::max(1, static_cast<int>(std::ceil(basis.record_dt / limit - 1e-9)));
    return basis.record_dt / stride;
}

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
}

template <class T>
void hash_vec(std::uint64_t& h, const std::vector<T>& v) {
    hash_bytes(h, v.data(), v.size() * sizeof(T));
}

}  // namespace

std::string fingerprint(const Coefficients& c, const DNBasis& basis) {
    std::uint64_t h = 1469598103934665603ULL;
    std::string eq = to_string(c.equation);
    hash_bytes(h, eq.data(), eq.size());
    int dims[2] = {c.grid->nx, c.grid->ny};
    hash_bytes(h, dims, sizeof dims);
    for (const auto* v : {&c.m, &c.bx, &c.by, &c.axx, &c.axy, &c.ayy}) hash_vec(h, *v);
    std::string b = basis.to_json().dump();
    hash_bytes(h, b.data(), b.size());
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

DNMatrix assemble_dn(const Coefficients& c, const DNBasis& basis, const AssembleOptions& opt) {
    const Grid2D& g = *c.grid;
    DNMatrix d;
    d.equation = to_string(c.equation);
    d.fingerprint = fingerprint(c, basis);
    d.basis = basis;
    d.inputs = basis.pulses(g.perimeter);
    d.resolution = g.nx;
    d.solver_dt = opt.dt > 0.0 ? opt.dt : common_step({&c}, basis, opt.cfl_safety);
    const int stride = static_cast<int>(std::lround(basis.record_dt / d.solver_dt));
    if (std::abs(stride * d.solver_dt - basis.record_dt) > 1e-9 * basis.record_dt)
        throw CFLViolation("solver step does not divide the record spacing");
    if (d.solver_dt > cfl_dt(c, 1.0)) throw CFLViolation("solver step exceeds the CFL limit");
    d.responses.resize(d.inputs.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= d.inputs.size()) return;
            try {
                SimConfig cfg;
                cfg.coeffs = c;
                cfg.t_final = basis.samples() * basis.record_dt;
                cfg.dt = d.solver_dt;
                cfg.trace_stride = stride;
                const PulseSpec pulse = d.inputs[i];
                const double perimeter = g.perimeter;
                cfg.drive = [pulse, perimeter](double t, const BoundaryNode& b) { return pulse.value(t, b.s, perimeter); };
                SimResult r = simulate(cfg);
                d.responses[i] = dn_trace(r.boundary, c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = d.inputs.size();
            }
        }
    };
    int jobs = std::clamp(opt.jobs, 1, static_cast<int>(d.inputs.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return d;
}

namespace {

void require_same_shape(const DNMatrix& a, const DNMatrix& b) {
    if (a.responses.size() != b.responses.size()) throw ShapeMismatch("different number of inputs");
    for (std::size_t i = 0; i < a.responses.size(); ++i) {
        const auto& x = a.responses[i];
        const auto& y = b.responses[i];
        if (x.nt() != y.nt() || x.nb() != y.nb()) throw ShapeMismatch("responses differ in samples or nodes");
        if (std::abs(x.dt - y.dt) > 1e-12 * std::max(x.dt, 1.0)) throw ShapeMismatch("responses differ in dt");
    }
}

double weight(const BoundarySignal& s) { return s.dt * s.perimeter / static_cast<double>(s.nb()); }

}  // namespace

double dn_norm(const DNMatrix& d) {
    double sum = 0.0;
    for (const auto& r : d.responses) {
        double part = 0.0;
        for (double v : r.values) part += v * v;
        sum += part * weight(r);
    }
    return std::sqrt(sum);
}

DNDistance dn_distance(const DNMatrix& a, const DNMatrix& b) {
    require_same_shape(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.responses.size(); ++i) {
        const auto& x = a.responses[i].values;
        const auto& y = b.responses[i].values;
        double part = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) part += (x[k] - y[k]) * (x[k] - y[k]);
        sum += part * weight(a.responses[i]);
    }
    DNDistance out;
    out.abs = std::sqrt(sum);
    double n = dn_norm(a);
    out.rel = n > 0.0 ? out.abs / n : (out.abs > 0.0 ? INFINITY : 0.0);
    return out;
}

namespace {

// Four-point Lagrange interpolation on a sorted abscissa, clamped stencil.
double cubic_at(const std::vector<double>& x, const std::vector<double>& y, double q) {
    const int n = static_cast<int>(x.size());
    if (n == 1) return y[0];
    int i = static_cast<int>(std::upper_bound(x.begin(), x.end(), q) - x.begin()) - 1;
    i = std::clamp(i, 0, n - 2);
    int lo = std::clamp(i - 1, 0, std::max(0, n - 4));
    int m = std::min(4, n);
    double sum = 0.0;
    for (int a = lo; a < lo + m; ++a) {
        double w = 1.0;
        for (int b = lo; b < lo + m; ++b)
            if (b != a) w *= (q - x[b]) / (x[a] - x[b]);
        sum += w * y[a];
    }
    return sum;
}

}  // namespace

DNMatrix resample_dn(const DNMatrix& fine, const DNMatrix& like) {
    if (fine.responses.size() != like.responses.size()) throw ShapeMismatch("different number of inputs");
    DNMatrix out = like;
    for (std::size_t i = 0; i < fine.responses.size(); ++i) {
        const BoundarySignal& f = fine.responses[i];
        BoundarySignal& o = out.responses[i];
        if (std::abs(f.perimeter - o.perimeter) > 1e-12 * o.perimeter) throw ShapeMismatch("different boundaries");
        // Per side: fine node arclengths plus the closing corner of the side.
        const int sides = 1 + *std::max_element(f.side.begin(), f.side.end());
        std::vector<std::vector<std::size_t>> members(sides);
        std::vector<std::vector<double>> coords(sides);
        for (std::size_t b = 0; b < f.nb(); ++b) {
            members[f.side[b]].push_back(b);
            coords[f.side[b]].push_back(f.s[b]);
        }
        for (int sd = 0; sd < sides; ++sd) {
            std::size_t closing = (members[sd].back() + 1) % f.nb();
            members[sd].push_back(closing);
            coords[sd].push_back(closing == 0 ? f.perimeter : f.s[closing]);
        }
        // Spatial pass on the fine time lattice.
        std::vector<double> space(f.nt() * o.nb());
        std::vector<double> ys;
        for (std::size_t k = 0; k < f.nt(); ++k)
            for (std::size_t b = 0; b < o.nb(); ++b) {
                int sd = o.side[b];
                ys.resize(members[sd].size());
                for (std::size_t q = 0; q < ys.size(); ++q) ys[q] = f.at(k, members[sd][q]);
                space[k * o.nb() + b] = cubic_at(coords[sd], ys, o.s[b]);
            }
        // Temporal pass.
        bool same_times = f.nt() == o.nt() && std::abs(f.dt - o.dt) <= 1e-12 * o.dt;
        if (same_times) {
            o.values = std::move(space);
            continue;
        }
        std::vector<double> col(f.nt());
        for (std::size_t b = 0; b < o.nb(); ++b) {
            for (std::size_t k = 0; k < f.nt(); ++k) col[k] = space[k * o.nb() + b];
            for (std::size_t k = 0; k < o.nt(); ++k) o.at(k, b) = cubic_at(f.t, col, o.t[k]);
        }
    }
    return out;
}

double self_convergence(const DNMatrix& coarse, const DNMatrix& fine) {
    return dn_distance(coarse, resample_dn(fine, coarse)).rel;
}

FrequencyDN frequency_dn(const DNMatrix& d, std::complex<double> k, bool strict) {
    FrequencyDN out;
    out.k = k;
    if (d.responses.empty()) return out;
    const std::size_t nb = d.responses[0].nb();
    out.response = Eigen::MatrixXcd::Zero(d.responses.size(), nb);
    out.input = Eigen::MatrixXcd::Zero(d.responses.size(), nb);
    const std::complex<double> I(0.0, 1.0);
    double tail = 0.0, total = 0.0;
    for (std::size_t i = 0; i < d.responses.size(); ++i) {
        const BoundarySignal& r = d.responses[i];
        if (r.nb() != nb) throw ShapeMismatch("responses differ in node count");
        const std::size_t nt = r.nt();
        const std::size_t tail_start = nt - nt / 10;
        for (std::size_t q = 0; q < nt; ++q) {
            double w = (q == 0 || q + 1 == nt) ? 0.5 * r.dt : r.dt;
            std::complex<double> kern = w * std::exp(-I * k * r.t[q]);
            double damp = std::exp(2.0 * k.imag() * r.t[q]);
            for (std::size_t b = 0; b < nb; ++b) {
                double v = r.at(q, b);
                out.response(i, b) += kern * v;
                out.input(i, b) += kern * d.inputs[i].value(r.t[q], r.s[b], r.perimeter);
                double e = v * v * damp;
                total += e;
                if (q >= tail_start) tail += e;
            }
        }
    }
    out.leakage = total > 0.0 ? tail / total : 0.0;
    out.leaking = out.leakage > 1e-6;
    if (strict && out.leaking)
        throw LeakageWarning("damped energy share " + std::to_string(out.leakage) + " in the last 10% of the window");
    return out;
}

}  // namespace abwave
