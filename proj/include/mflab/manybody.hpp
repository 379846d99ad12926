#pragma once

#include <memory>
#include <optional>

#include "mflab/basis.hpp"
#include "mflab/kernels.hpp"
#include "mflab/solvers.hpp"

namespace mflab {

// One-body matrix and two-body interaction table in the orthonormal mode
// coordinates used by the many-body, hierarchy and Fock modules. The lattice
// wave function phi and the mode vector c are related by c = sqrt(h) * phi;
// with that weight the discrete Hartree flow of the EffectiveModel and the
// mean-field limit of the second-quantized Hamiltonian coincide.
struct DiscreteModel {
    Mat one_body;        // M x M Hermitian
    Eigen::MatrixXd interaction;   // M x M real symmetric, w(x,y) = kernel(x-y)
    double coupling = 0.0;

    int modes() const { return static_cast<int>(one_body.rows()); }
    void validate() const;
};

DiscreteModel to_discrete_model(const Grid& g, const EffectiveModel& model);

// Dense one-body matrix of a real mode symbol in site coordinates.
Mat multiplier_matrix(const Grid& g, const Multiplier& m);

Vec to_mode_vector(const WaveFunction& phi);
WaveFunction from_mode_vector(const Grid& g, const Vec& c);

struct ManyBodyState {
    std::shared_ptr<const BosonBasis> basis;
    Vec coefficients;
};

struct ManyBodyOperator {
    std::shared_ptr<const BosonBasis> basis;
    Csr matrix;
};

struct ReducedDensity {
    int order = 0;
    Mat matrix;   // M^order x M^order, Hermitian, trace one

    double trace_deviation() const;
    double hermiticity_residual() const;
    double min_eigenvalue() const;
};

std::shared_ptr<const BosonBasis> build_basis(int modes, int particles,
                                              std::int64_t cap = BosonBasis::kDefaultCap);

// Second-quantized mean-field Hamiltonian on the N-particle sector:
//   sum_{pq} h_{pq} a+_p a_q + (kappa / 2 N_weight) sum_{xy} w(x,y) a+_x a+_y a_y a_x.
// N_weight defaults to the basis particle number (the 1/N mean-field weight);
// the Fock module passes a fixed N for every sector.
ManyBodyOperator build_mean_field_hamiltonian(const Mat& one_body,
                                              const Eigen::MatrixXd& interaction,
                                              double kappa,
                                              std::shared_ptr<const BosonBasis> basis,
                                              std::optional<int> n_weight = std::nullopt);

ManyBodyOperator build_mean_field_hamiltonian(const DiscreteModel& model,
                                              std::shared_ptr<const BosonBasis> basis,
                                              std::optional<int> n_weight = std::nullopt);

// Product state c^{(x) N} with multinomial sector weights; |c| = 1 gives a
// unit vector.
ManyBodyState product_state(std::shared_ptr<const BosonBasis> basis, const Vec& c);

struct PropagateOptions {
    int dense_threshold = 400;
    ExpiOptions expi;
};

// exp(-i H t) psi; dense eigendecomposition below the threshold, Lanczos above.
ManyBodyState propagate(const ManyBodyState& psi, const ManyBodyOperator& h, double t,
                        const PropagateOptions& opt = {});

// a_p: basis(M, n) -> basis(M, n-1). Gather form, one output row per target
// state; matvec-style parallel with a serial reference for the tests.
Vec annihilate_mode(const BosonBasis& target, const BosonBasis& source, int mode, const Vec& in);
Vec annihilate_mode_serial(const BosonBasis& target, const BosonBasis& source, int mode,
                           const Vec& in);

// k-particle reduced density via ladder correlators, trace normalized to one.
ReducedDensity reduced_density(const ManyBodyState& psi, int k, std::int64_t mk_cap = 4096);

// Trace distance sum |eig(rho - sigma)|; 2 for orthogonal pure states.
double trace_distance(const ReducedDensity& rho, const ReducedDensity& sigma);

struct SweepRow {
    int particles = 0;
    std::int64_t dimension = 0;
    double distance = 0.0;
    double wall_seconds = 0.0;
};

// For each N: evolve the product state under the mean-field Hamiltonian,
// extract gamma^(1), and compare in trace norm against the Hartree projector
// of the same discrete model. Cells run concurrently; rows return in the
// order of Ns.
std::vector<SweepRow> convergence_sweep(const WaveFunction& phi0, const EffectiveModel& model,
                                        const std::vector<int>& Ns, double t,
                                        const SolverConfig& hartree_cfg,
                                        const PropagateOptions& opt = {});

}  // namespace mflab
