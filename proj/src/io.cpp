#include "abwave/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "abwave/errors.hpp"

namespace abwave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t x) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(x);
    return x;
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw IOError(path + ": " + e.what());
    }
}

std::string response_path(const std::string& dir, std::size_t k) {
    return (fs::path(dir) / ("response_" + std::to_string(k) + ".f64")).string();
}

}  // namespace

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IOError(dir + ": " + ec.message());
}

void write_f64(const std::string& path, const std::vector<double>& v) {
    std::vector<std::uint64_t> raw(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) raw[k] = to_little(std::bit_cast<std::uint64_t>(v[k]));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError(path + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 8));
    if (!out) throw IOError(path + ": write failed");
}

std::vector<double> read_f64(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError(path + ": cannot open for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % 8 != 0) throw IOError(path + ": size is not a multiple of 8 bytes");
    std::vector<double> v(bytes.size() / 8);
    for (std::size_t k = 0; k < v.size(); ++k) {
        std::uint64_t raw;
        std::memcpy(&raw, bytes.data() + 8 * k, 8);
        v[k] = std::bit_cast<double>(to_little(raw));
    }
    return v;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError(path + ": cannot open for writing");
    out << text;
    if (!out) throw IOError(path + ": write failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError(path + ": cannot open for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_snapshot(const ScalarField& f, double t, int step, const std::string& stem) {
    const Grid2D& g = *f.grid;
    write_f64(stem + ".f64", f.v);
    json side = {{"format", "float64-le"}, {"layout", "row-major, x fastest"},
                 {"nx", g.nx}, {"ny", g.ny}, {"origin", {g.origin.x, g.origin.y}},
                 {"dx", g.dx}, {"dy", g.dy}, {"t", t}, {"step", step}};
    write_text(stem + ".json", side.dump(2) + "\n");
}

SnapshotFile read_snapshot(const std::string& stem) {
    json j = read_json(stem + ".json");
    SnapshotFile s;
    try {
        s.nx = j.at("nx").get<int>();
        s.ny = j.at("ny").get<int>();
        s.origin = {j.at("origin")[0].get<double>(), j.at("origin")[1].get<double>()};
        s.dx = j.at("dx").get<double>();
        s.dy = j.at("dy").get<double>();
        s.t = j.at("t").get<double>();
        s.step = j.at("step").get<int>();
    } catch (const json::exception& e) {
        throw IOError(stem + ".json: " + e.what());
    }
    s.values = read_f64(stem + ".f64");
    if (s.values.size() != static_cast<std::size_t>(s.nx) * s.ny)
        throw IOError(stem + ".f64: value count does not match the sidecar");
    return s;
}

std::string trace_csv(const BoundarySignal& sig) {
    std::ostringstream os;
    os.precision(17);
    os << "t,s,value\n";
    for (std::size_t k = 0; k < sig.nt(); ++k)
        for (std::size_t b = 0; b < sig.nb(); ++b) os << sig.t[k] << "," << sig.s[b] << "," << sig.at(k, b) << "\n";
    return os.str();
}

void write_dn_matrix(const DNMatrix& d, const std::string& dir) {
    ensure_dir(dir);
    json inputs = json::array();
    for (const auto& p : d.inputs) inputs.push_back(p.to_json());
    json meta = {{"equation", d.equation}, {"fingerprint", d.fingerprint}, {"basis", d.basis.to_json()},
                 {"inputs", inputs}, {"resolution", d.resolution}, {"solver_dt", d.solver_dt},
                 {"responses", d.responses.size()}};
    if (!d.responses.empty()) {
        const auto& r = d.responses[0];
        meta["nt"] = r.nt();
        meta["nb"] = r.nb();
        meta["dt"] = r.dt;
        meta["perimeter"] = r.perimeter;
        meta["side"] = r.side;
        write_f64((fs::path(dir) / "times.f64").string(), r.t);
        write_f64((fs::path(dir) / "arclength.f64").string(), r.s);
    }
    write_text((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");
    for (std::size_t k = 0; k < d.responses.size(); ++k) write_f64(response_path(dir, k), d.responses[k].values);
}

DNMatrix read_dn_matrix(const std::string& dir) {
    json meta = read_json((fs::path(dir) / "meta.json").string());
    DNMatrix d;
    try {
        d.equation = meta.at("equation").get<std::string>();
        d.fingerprint = meta.at("fingerprint").get<std::string>();
        d.basis = DNBasis::from_json(meta.at("basis"), "/basis");
        for (const auto& p : meta.at("inputs")) d.inputs.push_back(PulseSpec::from_json(p));
        d.resolution = meta.at("resolution").get<int>();
        d.solver_dt = meta.at("solver_dt").get<double>();
        std::size_t n = meta.at("responses").get<std::size_t>();
        if (n == 0) return d;
        BoundarySignal proto;
        proto.t = read_f64((fs::path(dir) / "times.f64").string());
        proto.s = read_f64((fs::path(dir) / "arclength.f64").string());
        proto.side = meta.at("side").get<std::vector<int>>();
        proto.dt = meta.at("dt").get<double>();
        proto.perimeter = meta.at("perimeter").get<double>();
        for (std::size_t k = 0; k < n; ++k) {
            BoundarySignal r = proto;
            r.values = read_f64(response_path(dir, k));
            if (r.values.size() != r.nt() * r.nb()) throw IOError(response_path(dir, k) + ": wrong value count");
            d.responses.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw IOError(dir + "/meta.json: " + e.what());
    }
    return d;
}

std::string chart_csv(const GoursatChart& chart) {
    const auto& c = chart.coeffs;
    std::ostringstream os;
    os.precision(17);
    os << "y1,yn,x,y,g11,g01,gnn,A,V1\n";
    for (int k = 0; k < c.nn; ++k)
        for (int i = 0; i < c.n1; ++i) {
            std::size_t q = c.idx(i, k);
            Vec2 x = chart.patch.to_global(c.x_local[q]);
            os << c.y1(i) << "," << c.yn(k) << "," << x.x << "," << x.y << "," << c.g11[q] << "," << c.g01[q] << ","
               << c.gnn[q] << "," << c.A[q] << "," << c.V1[q] << "\n";
        }
    return os.str();
}

std::string ray_csv(const RayPath& path) {
    std::ostringstream os;
    os.precision(17);
    os << "t,x,y,xi_x,xi_y,phase\n";
    for (const auto& s : path.states)
        os << s.t << "," << s.x.x << "," << s.x.y << "," << s.xi.x << "," << s.xi.y << "," << s.phase << "\n";
    return os.str();
}

void write_report(const ExperimentReport& r, const std::string& dir, bool timing) {
    ensure_dir(dir);
    fs::path base(dir);
    write_text((base / (r.name + ".json")).string(), r.to_json(timing).dump(2) + "\n");
    write_text((base / (r.name + ".txt")).string(), r.to_text(timing));
    write_text((base / (r.name + "_convergence.csv")).string(), r.table_csv());
}

}  // namespace abwave
