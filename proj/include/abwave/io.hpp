#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "abwave/dnmap.hpp"
#include "abwave/experiments.hpp"
#include "abwave/geometry.hpp"
#include "abwave/goursat.hpp"

namespace abwave {

// Raw little-endian float64 grid values (row-major, x fastest) plus a JSON sidecar.
struct SnapshotFile {
    int nx = 0;
    int ny = 0;
    Vec2 origin;
    double dx = 0.0;
    double dy = 0.0;
    double t = 0.0;
    int step = 0;
    std::vector<double> values;
};

// Writes stem.f64 and stem.json; IOError on failure.
void write_snapshot(const ScalarField& f, double t, int step, const std::string& stem);
SnapshotFile read_snapshot(const std::string& stem);

void write_f64(const std::string& path, const std::vector<double>& v);
std::vector<double> read_f64(const std::string& path);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
void ensure_dir(const std::string& dir);

// CSV with header t,s,value, one row per sample and boundary node.
std::string trace_csv(const BoundarySignal& sig);

// Directory with meta.json and one response_<k>.f64 per input.
void write_dn_matrix(const DNMatrix& d, const std::string& dir);
DNMatrix read_dn_matrix(const std::string& dir);

// Coefficient fields of a chart on its (y1, y_n) lattice.
std::string chart_csv(const GoursatChart& chart);
// Ray states: t,x,y,xi_x,xi_y,phase.
std::string ray_csv(const RayPath& path);

// <dir>/<name>.json, <name>.txt and <name>_convergence.csv.
void write_report(const ExperimentReport& r, const std::string& dir, bool timing = true);

}  // namespace abwave
