#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "abwave/wavesolver.hpp"

namespace abwave {

// Values over (time sample, outer boundary node), row-major nt x nb.
struct BoundarySignal {
    std::vector<double> t;
    std::vector<double> s;   // arclength of each boundary node
    std::vector<int> side;   // side of each boundary node
    std::vector<double> values;
    double dt = 0.0;         // sample spacing
    double perimeter = 0.0;

    std::size_t nt() const { return t.size(); }
    std::size_t nb() const { return s.size(); }
    double& at(std::size_t k, std::size_t b) { return values[k * s.size() + b]; }
    double at(std::size_t k, std::size_t b) const { return values[k * s.size() + b]; }
};

// Gaussian pulse in (t, s), truncated at 4 sigma with a (1 - rho^2/16)^3 taper.
struct PulseSpec {
    double s_center = 0.0;
    double t_center = 0.0;
    double sigma_s = 0.06;
    double sigma_t = 0.1;
    double amplitude = 1.0;

    double value(double t, double s, double perimeter) const;
    nlohmann::json to_json() const;
    static PulseSpec from_json(const nlohmann::json& j);
};

double truncated_gaussian(double x, double sigma);

// Basis of n_centers spatial centres spread evenly along the boundary times
// n_onsets pulse times starting at first_onset + 4 sigma_t.
struct DNBasis {
    int n_centers = 8;
    int n_onsets = 3;
    double sigma_s = 0.06;
    double sigma_t = 0.1;
    double first_onset = 0.0;  // start of the earliest pulse support; 0 = 0.1 t_final
    double onset_spacing = 0.15;
    double t_final = 3.0;
    double record_dt = 0.02;
    double amplitude = 1.0;

    std::vector<PulseSpec> pulses(double perimeter) const;
    int samples() const;  // recorded samples, t_final / record_dt rounded
    nlohmann::json to_json() const;
    static DNBasis from_json(const nlohmann::json& j, const std::string& path);
};

struct DNMatrix {
    std::string equation;
    std::string fingerprint;
    DNBasis basis;
    std::vector<PulseSpec> inputs;
    std::vector<BoundarySignal> responses;
    int resolution = 0;
    double solver_dt = 0.0;
};

// Neumann-type trace of a recorded run: d_nu u - (v.nu) u_t for the flow
// equations, the normalized conormal derivative for a general metric.
BoundarySignal dn_trace(const BoundaryRecord& rec, const Coefficients& c);

struct AssembleOptions {
    int jobs = 1;
    double dt = 0.0;  // solver step; 0 = largest record_dt / k below the CFL limit
    double cfl_safety = 0.5;
};

// Solver step that divides the record spacing and satisfies the CFL limit of every config.
double common_step(const std::vector<const Coefficients*>& configs, const DNBasis& basis, double safety = 0.5);

std::string fingerprint(const Coefficients& c, const DNBasis& basis);

DNMatrix assemble_dn(const Coefficients& c, const DNBasis& basis, const AssembleOptions& opt = {});

struct DNDistance {
    double abs = 0.0;
    double rel = 0.0;
};

double dn_norm(const DNMatrix& d);
// Weighted L2 over inputs, samples and nodes (weights dt and boundary spacing).
DNDistance dn_distance(const DNMatrix& a, const DNMatrix& b);

// Fine responses resampled onto the sample times and boundary nodes of `like`
// by cubic interpolation, per side in s and in t.
DNMatrix resample_dn(const DNMatrix& fine, const DNMatrix& like);
// Relative distance between a coarse map and a finer one resampled onto it.
double self_convergence(const DNMatrix& coarse, const DNMatrix& fine);

struct FrequencyDN {
    std::complex<double> k;
    Eigen::MatrixXcd response;  // n_inputs x nb
    Eigen::MatrixXcd input;     // transformed Dirichlet data, n_inputs x nb
    double leakage = 0.0;       // damped energy share of the last 10% of the window
    bool leaking = false;
};

// Trapezoid approximation of integral r(t) e^{-i k t} dt for every response and input.
// Im k < 0 damps the window; leakage above 1e-6 sets `leaking`, or throws LeakageWarning if strict.
FrequencyDN frequency_dn(const DNMatrix& d, std::complex<double> k, bool strict = false);

}  // namespace abwave
