#pragma once

#include <optional>

#include "mflab/manybody.hpp"

namespace mflab {

// Reduced densities gamma^(1)..gamma^(K). Slot j of a k-slot multi-index is
// the digit of weight M^j, so the partial trace over the last particle
// contracts the most significant digit.
struct HierarchyState {
    int depth = 0;
    std::vector<Mat> gammas;                 // gammas[k-1] is M^k x M^k
    std::optional<int> particle_number;      // nullopt = infinite hierarchy

    void validate(int modes) const;
};

enum class ClosureRule { truncate_zero, factorize_top };

// Factorized initial data gamma^(k) = (|c><c|)^{tensor k} for unit c.
HierarchyState factorized_state(const Vec& c, int depth, std::optional<int> particle_number);

// Contraction of the last slot: tr_{k+1} gamma^(k+1).
Mat partial_trace_last(const Mat& gamma, int modes);

// i d/dt gamma^(k): kinetic commutator, (1/N)-weighted intra-group
// commutator, and the (1 - k/N)-weighted partial-trace collision term; the
// infinite hierarchy drops the intra term and takes the collision weight 1.
// At k = depth the collision term uses the closure rule.
Mat bbgky_rhs(const HierarchyState& state, int k, const DiscreteModel& model,
              ClosureRule rule = ClosureRule::truncate_zero);

struct HierarchyTrajectory {
    std::vector<double> times;
    std::vector<HierarchyState> states;
    std::vector<double> max_trace_deviation;   // per snapshot, over k
    std::vector<double> max_hermiticity;       // per snapshot, over k
    bool invariant_flag = false;               // some deviation exceeded 1e-6
};

HierarchyTrajectory evolve_hierarchy(const HierarchyState& init, ClosureRule rule,
                                     const DiscreteModel& model, const SolverConfig& cfg);

// Max Frobenius residual of the infinite hierarchy on the factorized
// trajectory, per order k = 1..k_max. The time derivative is the 5-point
// fourth-order stencil on the recorded snapshots.
std::vector<double> infinite_hierarchy_residual(const Trajectory& phi_traj, int k_max,
                                                const EffectiveModel& model,
                                                int max_samples = 48);

}  // namespace mflab
