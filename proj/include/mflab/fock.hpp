#pragma once

#include <memory>

#include "mflab/manybody.hpp"

namespace mflab {

// Total-particle-number truncated bosonic Fock space over M modes.
struct TruncatedFock {
    int modes = 0;
    int n_max = 0;
    std::vector<std::shared_ptr<const BosonBasis>> sectors;   // n = 0..n_max
    std::vector<std::int64_t> offsets;                        // size n_max+2
    std::int64_t total_dim = 0;

    TruncatedFock() = default;
    TruncatedFock(int m, int nmax, std::int64_t cap = 200000);

    std::int64_t sector_dim(int n) const { return sectors[n]->dimension(); }
};

using FockSpacePtr = std::shared_ptr<const TruncatedFock>;

FockSpacePtr make_fock_space(int modes, int n_max, std::int64_t cap = 200000);

struct FockVector {
    FockSpacePtr space;
    Vec coefficients;
};

FockVector vacuum(FockSpacePtr space);

// Smallest cutoff the coherent-state policy accepts for |phi|^2 = nbar:
// n_max >= nbar + 6 sqrt(nbar) + 10 keeps the Poisson tail below ~1e-9.
int cutoff_policy(double nbar);

// Poisson tail mass beyond the cutoff for mean nbar.
double poisson_tail(double nbar, int n_max);

enum class LadderKind { create, annihilate };

// a(f) = sum_p conj(f_p) a_p and its adjoint. Creation out of the top sector
// is truncated; the norm of the lost piece is written to *lost when given.
FockVector apply_ladder(LadderKind kind, const Vec& f, const FockVector& psi,
                        double* lost = nullptr);

// Per-mode annihilation a_p across all sectors (gather form).
Vec annihilate_mode_fock(const TruncatedFock& space, int mode, const Vec& in);

double number_expectation(const FockVector& psi);
double parity_expectation(const FockVector& psi);
double sector_weight(const FockVector& psi, int n);
// Mass fraction in the top sectors (n >= n_max - 2); the truncation-leakage
// diagnostic tracked along fluctuation trajectories.
double boundary_mass(const FockVector& psi);

// W(phi) = exp(a+(phi) - a(phi)) applied through the Krylov exponential of
// the Hermitian generator i(a+(phi) - a(phi)); unitary on the truncated
// space to round-off.
FockVector apply_weyl(const Vec& orbital, const FockVector& psi, const ExpiOptions& opt = {});

// W(phi) Omega with the cutoff-policy check; rejects with a suggested n_max.
FockVector coherent_state(const Vec& orbital, FockSpacePtr space, const ExpiOptions& opt = {});

struct WeylShiftResiduals {
    double annihilate = 0.0;   // max |W* a(f) W psi - a(f) psi - <f,phi> psi|
    double create = 0.0;       // max |W* a+(f) W psi - a+(f) psi - <phi,f> psi|
};

WeylShiftResiduals weyl_conjugate_check(const Vec& phi, const Vec& f, FockSpacePtr space,
                                        int n_test_states = 4, std::uint64_t seed = 20250814);

struct FockOperator {
    FockSpacePtr space;
    Csr matrix;
};

// Block-diagonal Fock Hamiltonian: sector n carries the mean-field matrix
// with n particles and the fixed 1/N weight.
FockOperator fock_hamiltonian(const DiscreteModel& model, int n_weight, FockSpacePtr space);

// exp(-i H t) exploiting the sector block structure (sectors propagate
// independently, in parallel).
FockVector evolve_fock(const FockVector& psi, const DiscreteModel& model, int n_weight, double t,
                       const PropagateOptions& opt = {});

struct SectorProjection {
    FockVector projected;   // unnormalized
    double norm = 0.0;
};

SectorProjection sector_projection(const FockVector& psi, int n);

// d_n = e^{n/2} n^{-n/2} sqrt(n!), the coherent-to-product normalization.
double sector_constant(int n);

// Embedding of the product state phi^{(x) n} into sector n.
FockVector embed_product(FockSpacePtr space, const Vec& orbital, int n);

// Gamma^(1)[p][q] = <a+_q a_p> / <N>; exact rank one on coherent states.
ReducedDensity gamma1_fock(const FockVector& psi);

enum class FluctuationVariant { full, limit };
enum class FluctuationPath { conjugation, generator };

// Dense-in-time Hartree flow in mode coordinates with cubic Hermite access.
class ModeFlow {
  public:
    ModeFlow(const Vec& c0, const DiscreteModel& model, double t_end, double dt);
    Vec at(double t) const;
    const DiscreteModel& model() const { return *model_; }

  private:
    std::shared_ptr<const DiscreteModel> model_;
    double dt_ = 0.0;
    double t_end_ = 0.0;
    std::vector<Vec> nodes_;
    std::vector<Vec> derivs_;
};

// Fluctuation generator L(t) as a sparse Hermitian matrix. The sparsity
// pattern depends only on (h, w) structure, so generators at different times
// combine linearly.
Csr fluctuation_generator(const TruncatedFock& space, const DiscreteModel& model, int n_weight,
                          const Vec& c, FluctuationVariant variant);

struct FluctuationTrajectory {
    std::vector<double> times;
    std::vector<double> number_series;
    std::vector<double> parity_series;
    std::vector<double> leakage_series;
    FockVector final_state;
};

// U(t;0) Omega. The conjugation path displaces, propagates with the Fock
// Hamiltonian and displaces back (series recorded at the endpoints only);
// the generator path integrates L(t) with a fourth-order commutator-free
// Magnus scheme and records along the way. Both include the scalar phase of
// L(t), so the two paths agree as vectors.
FluctuationTrajectory evolve_fluctuation(const Vec& c0, const DiscreteModel& model, int n_weight,
                                         FluctuationVariant variant, FluctuationPath path,
                                         FockSpacePtr space, const SolverConfig& cfg);

struct FockRateRow {
    int particles = 0;
    int n_max = 0;
    std::int64_t dimension = 0;
    double leakage = 0.0;
    double distance = 0.0;
    double wall_seconds = 0.0;
};

// Theorem-3.1-style sweep: evolve W(sqrt(N) c0) Omega under the Fock
// Hamiltonian, extract Gamma^(1), compare against the Hartree projector.
std::vector<FockRateRow> rate_sweep(const Vec& c0, const DiscreteModel& model,
                                    const std::vector<int>& Ns, double t,
                                    const SolverConfig& hartree_cfg);

struct ExponentialFit {
    double prefactor = 0.0;   // C
    double rate = 0.0;        // D
    double residual = 0.0;    // rms residual of the log fit
};

// Least-squares fit of y ~ C e^{D t} on the strictly positive samples.
ExponentialFit fit_exponential(const std::vector<double>& times, const std::vector<double>& values);

}  // namespace mflab
