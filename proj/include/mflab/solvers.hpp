#pragma once

#include <optional>
#include <vector>

#include "mflab/grid.hpp"

namespace mflab {

// One-particle effective model: i d/dt phi = kinetic phi + V_ext phi + NL(phi) phi
// with NL = coupling * (kernel * |phi|^2) for convolution models and
// NL = coupling * |phi|^2 for the cubic contact model. For the
// semi-relativistic model the attraction sign is folded into the stored
// coupling (kappa > 0 attraction -> coupling = -kappa).
struct EffectiveModel {
    Multiplier kinetic;
    std::vector<double> external;   // empty means zero
    std::optional<Kernel> kernel;
    bool cubic_contact = false;
    double coupling = 0.0;
    double alpha = 0.0;             // regularization of the gravitational kernel

    void validate(const Grid& g) const;
};

EffectiveModel hartree_model(const Grid& g, Kernel kernel, double kappa,
                             std::vector<double> external = {});
EffectiveModel gp_model(const Grid& g, double a0);
// kappa > 0 is attraction; kernel is 1/(dist + alpha) with alpha > 0.
EffectiveModel semirelativistic_model(const Grid& g, double kappa, double alpha);

enum class Scheme { strang_split, fourth_order_split, explicit_rk4 };

struct SolverConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    Scheme scheme = Scheme::fourth_order_split;
    int record_every = 1;
    double blowup_threshold = 0.0;   // 0 disables monitoring
    bool store_snapshots = true;

    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<WaveFunction> snapshots;       // empty when store_snapshots=false
    std::vector<double> mass_series;           // L2 norm squared
    std::vector<double> energy_series;
    std::vector<double> h_half_series;
    std::optional<double> blowup_time;

    const WaveFunction& final_state() const;
};

double energy(const WaveFunction& phi, const EffectiveModel& model);

Trajectory evolve_hartree(const WaveFunction& phi0, const EffectiveModel& model,
                          const SolverConfig& cfg);
Trajectory evolve_gp(const WaveFunction& phi0, double a0, const SolverConfig& cfg);
Trajectory evolve_semirel(const WaveFunction& phi0, const EffectiveModel& model,
                          const SolverConfig& cfg);

// First recorded time with H^{1/2} norm above the threshold.
std::optional<double> detect_blowup(const Trajectory& tr, double threshold);

}  // namespace mflab
