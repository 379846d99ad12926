#include "mflab/manybody.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "mflab/parallel.hpp"

namespace mflab {

void DiscreteModel::validate() const {
    const int m = modes();
    if (one_body.cols() != m || interaction.rows() != m || interaction.cols() != m)
        throw dimension_error("DiscreteModel: matrix shapes disagree");
    if ((one_body - one_body.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw invariant_error("DiscreteModel: one-body matrix not Hermitian");
    if ((interaction - interaction.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw invariant_error("DiscreteModel: interaction table not symmetric");
}

Mat multiplier_matrix(const Grid& g, const Multiplier& m) {
    const int n = g.num_sites;
    if (static_cast<int>(m.symbol.size()) != n)
        throw dimension_error("multiplier_matrix: symbol does not match grid");
    // T = F^dag diag(symbol) F with the unitary DFT; assembled column by
    // column through the lattice transforms.
    Mat t(n, n);
    std::vector<cplx> e(n), modes(n), out(n);
    for (int c = 0; c < n; ++c) {
        std::fill(e.begin(), e.end(), cplx(0.0));
        e[c] = 1.0;
        dft_forward(n, e.data(), modes.data());
        for (int j = 0; j < n; ++j) modes[j] *= m.symbol[j];
        dft_inverse(n, modes.data(), out.data());
        for (int r = 0; r < n; ++r) t(r, c) = out[r] / double(n);
    }
    // symmetrize away transform round-off so downstream Hermiticity checks
    // see an exactly Hermitian matrix
    return 0.5 * (t + Mat(t.adjoint()));
}

DiscreteModel to_discrete_model(const Grid& g, const EffectiveModel& model) {
    model.validate(g);
    if (!model.kernel)
        throw dimension_error("to_discrete_model: model must carry a convolution kernel");
    DiscreteModel d;
    d.one_body = multiplier_matrix(g, model.kinetic);
    if (!model.external.empty())
        for (int j = 0; j < g.num_sites; ++j) d.one_body(j, j) += model.external[j];
    const int m = g.num_sites;
    d.interaction.resize(m, m);
    for (int x = 0; x < m; ++x)
        for (int y = 0; y < m; ++y) {
            int diff = (x - y) % m;
            if (diff < 0) diff += m;
            d.interaction(x, y) = model.kernel->values[diff];
        }
    d.coupling = model.coupling;
    d.validate();
    return d;
}

Vec to_mode_vector(const WaveFunction& phi) {
    const int m = phi.grid.num_sites;
    Vec c(m);
    const double s = std::sqrt(phi.grid.spacing);
    for (int j = 0; j < m; ++j) c(j) = s * phi.amplitudes[j];
    return c;
}

WaveFunction from_mode_vector(const Grid& g, const Vec& c) {
    if (c.size() != g.num_sites) throw dimension_error("from_mode_vector: size mismatch");
    std::vector<cplx> amp(g.num_sites);
    const double s = 1.0 / std::sqrt(g.spacing);
    for (int j = 0; j < g.num_sites; ++j) amp[j] = s * c(j);
    return WaveFunction(g, std::move(amp));
}

std::shared_ptr<const BosonBasis> build_basis(int modes, int particles, std::int64_t cap) {
    return std::make_shared<const BosonBasis>(modes, particles, cap);
}

ManyBodyOperator build_mean_field_hamiltonian(const Mat& one_body,
                                              const Eigen::MatrixXd& interaction,
                                              double kappa,
                                              std::shared_ptr<const BosonBasis> basis,
                                              std::optional<int> n_weight) {
    const int m = basis->modes();
    if (one_body.rows() != m || one_body.cols() != m)
        throw dimension_error("build_mean_field_hamiltonian: one-body shape mismatch");
    if (interaction.rows() != m || interaction.cols() != m)
        throw dimension_error("build_mean_field_hamiltonian: interaction shape mismatch");
    if ((one_body - one_body.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw invariant_error("build_mean_field_hamiltonian: one-body not Hermitian");
    if ((interaction - interaction.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw invariant_error("build_mean_field_hamiltonian: interaction not symmetric");

    const int nw = n_weight.value_or(basis->particles());
    if (nw < 1) throw dimension_error("build_mean_field_hamiltonian: N weight must be >= 1");
    const double pair_scale = kappa / (2.0 * nw);

    const std::int64_t dim = basis->dimension();
    std::vector<std::int64_t> ti, tj;
    std::vector<cplx> tv;
    ti.reserve(dim * (m * m + 1));
    tj.reserve(dim * (m * m + 1));
    tv.reserve(dim * (m * m + 1));

    std::vector<int> occ(m);
    for (std::int64_t row = 0; row < dim; ++row) {
        auto row_occ = basis->occupation(row);

        // diagonal: one-body occupations plus the normal-ordered pair term
        cplx diag = 0.0;
        for (int p = 0; p < m; ++p) diag += one_body(p, p) * double(row_occ[p]);
        double pair = 0.0;
        for (int x = 0; x < m; ++x)
            for (int y = 0; y < m; ++y) {
                const double nx = row_occ[x], ny = row_occ[y];
                pair += interaction(x, y) * (nx * ny - (x == y ? nx : 0.0));
            }
        diag += pair_scale * pair;
        ti.push_back(row);
        tj.push_back(row);
        tv.push_back(diag);

        // hopping: <row| a+_p a_q |col> with col = row - e_p + e_q
        for (int p = 0; p < m; ++p) {
            if (row_occ[p] == 0) continue;
            for (int q = 0; q < m; ++q) {
                if (q == p || one_body(p, q) == cplx(0.0)) continue;
                for (int i = 0; i < m; ++i) occ[i] = row_occ[i];
                occ[p] -= 1;
                occ[q] += 1;
                const std::int64_t colidx = basis->index_of(occ);
                const double amp = std::sqrt(double(row_occ[p]) * double(row_occ[q] + 1));
                ti.push_back(row);
                tj.push_back(colidx);
                tv.push_back(one_body(p, q) * amp);
            }
        }
    }

    ManyBodyOperator h;
    h.basis = std::move(basis);
    h.matrix = Csr::from_triplets(dim, std::move(ti), std::move(tj), std::move(tv));
    return h;
}

ManyBodyOperator build_mean_field_hamiltonian(const DiscreteModel& model,
                                              std::shared_ptr<const BosonBasis> basis,
                                              std::optional<int> n_weight) {
    return build_mean_field_hamiltonian(model.one_body, model.interaction, model.coupling,
                                        std::move(basis), n_weight);
}

ManyBodyState product_state(std::shared_ptr<const BosonBasis> basis, const Vec& c) {
    const int m = basis->modes();
    if (c.size() != m) throw dimension_error("product_state: orbital size mismatch");
    const int n = basis->particles();
    ManyBodyState psi;
    psi.coefficients.resize(basis->dimension());
    const double log_nfact = std::lgamma(n + 1.0);
    for (std::int64_t i = 0; i < basis->dimension(); ++i) {
        auto occ = basis->occupation(i);
        double log_mag = 0.5 * log_nfact;
        double phase = 0.0;
        bool zero = false;
        for (int p = 0; p < m; ++p) {
            log_mag -= 0.5 * std::lgamma(occ[p] + 1.0);
            if (occ[p] > 0) {
                const double r = std::abs(c(p));
                if (r == 0.0) {
                    zero = true;
                    break;
                }
                log_mag += occ[p] * std::log(r);
                phase += occ[p] * std::arg(c(p));
            }
        }
        psi.coefficients(i) = zero ? cplx(0.0) : std::polar(std::exp(log_mag), phase);
    }
    psi.basis = std::move(basis);
    return psi;
}

ManyBodyState propagate(const ManyBodyState& psi, const ManyBodyOperator& h, double t,
                        const PropagateOptions& opt) {
    if (psi.basis->dimension() != h.basis->dimension() || psi.basis->modes() != h.basis->modes())
        throw dimension_error("propagate: basis mismatch");
    ManyBodyState out = psi;
    if (psi.basis->dimension() <= opt.dense_threshold) {
        out.coefficients = expi_apply_dense(h.matrix.to_dense(), t, psi.coefficients);
    } else {
        expi_apply_csr(h.matrix, t, out.coefficients, opt.expi);
    }
    for (Eigen::Index i = 0; i < out.coefficients.size(); ++i) {
        const cplx v = out.coefficients(i);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw integration_error("propagate: non-finite coefficient", 0.0);
    }
    return out;
}

namespace {
inline void annihilate_row(const BosonBasis& target, const BosonBasis& source, int mode,
                           const Vec& in, Vec& out, std::int64_t row, std::vector<int>& scratch) {
    auto occ = target.occupation(row);
    for (int i = 0; i < target.modes(); ++i) scratch[i] = occ[i];
    scratch[mode] += 1;
    const std::int64_t src = source.index_of(scratch);
    out(row) = std::sqrt(double(scratch[mode])) * in(src);
}
}  // namespace

Vec annihilate_mode_serial(const BosonBasis& target, const BosonBasis& source, int mode,
                           const Vec& in) {
    if (source.particles() != target.particles() + 1 || source.modes() != target.modes())
        throw dimension_error("annihilate_mode: bases are not adjacent sectors");
    if (in.size() != source.dimension()) throw dimension_error("annihilate_mode: size mismatch");
    Vec out(target.dimension());
    std::vector<int> scratch(target.modes());
    for (std::int64_t row = 0; row < target.dimension(); ++row)
        annihilate_row(target, source, mode, in, out, row, scratch);
    return out;
}

Vec annihilate_mode(const BosonBasis& target, const BosonBasis& source, int mode, const Vec& in) {
    if (source.particles() != target.particles() + 1 || source.modes() != target.modes())
        throw dimension_error("annihilate_mode: bases are not adjacent sectors");
    if (in.size() != source.dimension()) throw dimension_error("annihilate_mode: size mismatch");
    Vec out(target.dimension());
    par::for_index(target.dimension(), [&](std::ptrdiff_t row) {
        std::vector<int> scratch(target.modes());
        annihilate_row(target, source, mode, in, out, row, scratch);
    });
    return out;
}

ReducedDensity reduced_density(const ManyBodyState& psi, int k, std::int64_t mk_cap) {
    const int m = psi.basis->modes();
    const int n = psi.basis->particles();
    if (k < 1 || k > n) throw dimension_error("reduced_density: order out of range");
    std::int64_t mk = 1;
    for (int i = 0; i < k; ++i) {
        mk *= m;
        if (mk > mk_cap)
            throw size_error("reduced_density: M^k exceeds cap " + std::to_string(mk_cap));
    }

    // Bases for the annihilation chain N, N-1, ..., N-k.
    std::vector<std::shared_ptr<const BosonBasis>> chain;
    chain.push_back(psi.basis);
    for (int j = 1; j <= k; ++j) chain.push_back(build_basis(m, n - j, psi.basis->dimension()));

    // chi_(p1..pk) = a_{pk} ... a_{p1} psi for nondecreasing multi-indices;
    // annihilators commute, so sorted representatives cover all of them.
    std::vector<std::vector<int>> sorted_multi;
    std::vector<int> multi(k, 0);
    auto gen = [&](auto&& self, int slot, int start) -> void {
        if (slot == k) {
            sorted_multi.push_back(multi);
            return;
        }
        for (int p = start; p < m; ++p) {
            multi[slot] = p;
            self(self, slot + 1, p);
        }
    };
    gen(gen, 0, 0);

    const std::size_t n_rep = sorted_multi.size();
    std::vector<Vec> chi(n_rep);
    par::for_index_dynamic(static_cast<std::ptrdiff_t>(n_rep), [&](std::ptrdiff_t i) {
        Vec v = psi.coefficients;
        for (int j = 0; j < k; ++j) {
            v = annihilate_mode_serial(*chain[j + 1], *chain[j], sorted_multi[i][j], v);
        }
        chi[i] = std::move(v);
    });

    // Gram matrix over representatives, then scatter to the full M^k matrix.
    std::map<std::vector<int>, std::size_t> rep_index;
    for (std::size_t i = 0; i < n_rep; ++i) rep_index[sorted_multi[i]] = i;
    Mat gram(n_rep, n_rep);
    par::for_index(static_cast<std::ptrdiff_t>(n_rep), [&](std::ptrdiff_t i) {
        for (std::size_t j = 0; j <= static_cast<std::size_t>(i); ++j) {
            gram(i, j) = chi[j].dot(chi[i]);   // <chi_j, chi_i> = <a+...a...>
            gram(j, i) = std::conj(gram(i, j));
        }
    });

    double norm_factor = 1.0;
    for (int j = 0; j < k; ++j) norm_factor *= double(n - j);
    const double psi_norm2 = psi.coefficients.squaredNorm();

    ReducedDensity rho;
    rho.order = k;
    rho.matrix.resize(mk, mk);
    std::vector<int> pm(k), qm(k);
    for (std::int64_t r = 0; r < mk; ++r) {
        std::int64_t rr = r;
        for (int j = 0; j < k; ++j) {
            pm[j] = rr % m;
            rr /= m;
        }
        std::sort(pm.begin(), pm.end());
        const std::size_t ri = rep_index.at(pm);
        for (std::int64_t col = 0; col < mk; ++col) {
            std::int64_t cc = col;
            for (int j = 0; j < k; ++j) {
                qm[j] = cc % m;
                cc /= m;
            }
            std::sort(qm.begin(), qm.end());
            rho.matrix(r, col) = gram(ri, rep_index.at(qm)) / (norm_factor * psi_norm2);
        }
    }
    return rho;
}

double ReducedDensity::trace_deviation() const {
    return std::abs(matrix.trace() - cplx(1.0));
}

double ReducedDensity::hermiticity_residual() const {
    return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
}

double ReducedDensity::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat> eig(matrix);
    return eig.eigenvalues().minCoeff();
}

double trace_distance(const ReducedDensity& rho, const ReducedDensity& sigma) {
    if (rho.order != sigma.order || rho.matrix.rows() != sigma.matrix.rows())
        throw dimension_error("trace_distance: order or dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Mat> eig(rho.matrix - sigma.matrix);
    return eig.eigenvalues().cwiseAbs().sum();
}

std::vector<SweepRow> convergence_sweep(const WaveFunction& phi0, const EffectiveModel& model,
                                        const std::vector<int>& Ns, double t,
                                        const SolverConfig& hartree_cfg,
                                        const PropagateOptions& opt) {
    const DiscreteModel dm = to_discrete_model(phi0.grid, model);

    SolverConfig cfg = hartree_cfg;
    cfg.t_end = t;
    cfg.store_snapshots = true;
    const Trajectory ref = evolve_hartree(phi0, model, cfg);
    Vec c_t = to_mode_vector(ref.final_state());
    c_t /= c_t.norm();
    ReducedDensity hartree_proj;
    hartree_proj.order = 1;
    hartree_proj.matrix = c_t * c_t.adjoint();

    Vec c0 = to_mode_vector(phi0);
    c0 /= c0.norm();

    std::vector<SweepRow> rows(Ns.size());
    par::for_index_dynamic(static_cast<std::ptrdiff_t>(Ns.size()), [&](std::ptrdiff_t i) {
        const auto start = std::chrono::steady_clock::now();
        const int n = Ns[i];
        auto basis = build_basis(phi0.grid.num_sites, n);
        auto h = build_mean_field_hamiltonian(dm, basis);
        auto psi = product_state(basis, c0);
        psi = propagate(psi, h, t, opt);
        auto gamma1 = reduced_density(psi, 1);
        rows[i].particles = n;
        rows[i].dimension = basis->dimension();
        rows[i].distance = trace_distance(gamma1, hartree_proj);
        rows[i].wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return rows;
}

}  // namespace mflab
