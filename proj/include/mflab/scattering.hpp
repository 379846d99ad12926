#pragma once

#include <vector>

#include "mflab/errors.hpp"

namespace mflab {

// Radial potential V(r) sampled on the uniform mesh r_i = i * dr,
// dr = r_max / (samples.size() - 1). Samples must vanish beyond
// support_radius; the asymptote fit needs the outer 20% of the mesh free of
// potential, so support_radius <= 0.8 r_max is required at solve time.
struct RadialPotential {
    double r_max = 0.0;
    std::vector<double> samples;
    double support_radius = 0.0;

    double mesh_size() const { return r_max / (samples.size() - 1); }
    void validate() const;
};

RadialPotential square_well(double v0, double radius, double r_max, int n_points);
RadialPotential scaled_potential(const RadialPotential& v, double lambda);

struct ScatteringResult {
    std::vector<double> f_profile;
    double a0_asymptote = 0.0;
    double a0_integral = 0.0;
    double mesh_size = 0.0;
    double discrepancy = 0.0;        // |a0_asymptote - a0_integral| / max(|a0|, eps)
    bool ill_conditioned = false;    // outer slope of u nearly vanished
};

// Integrates u'' = (1/2) V u outward (u = r f, u(0) = 0), normalizes by the
// outer linear fit so f -> 1, and fills both scattering-length estimators:
// the asymptote fit f ~ 1 - a0/r and the integral identity 8 pi a0 = int V f.
ScatteringResult solve_zero_energy(const RadialPotential& v);

// a0 from the asymptote estimator; throws inconsistency_error when the two
// estimators disagree beyond 1e-3 relative (mesh too coarse).
double scattering_length(const ScatteringResult& res);

// Scattering length of N^2 V(N .), solved on the proportionally refined mesh;
// equals a0 / N up to mesh tolerance.
double scaled_length(const RadialPotential& v, int n);

// Born approximation (1/8 pi) int V dx = (1/2) int V(r) r^2 dr.
double born_length(const RadialPotential& v);

}  // namespace mflab
