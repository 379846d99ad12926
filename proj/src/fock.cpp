#include "mflab/fock.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "mflab/parallel.hpp"

namespace mflab {

TruncatedFock::TruncatedFock(int m, int nmax, std::int64_t cap) : modes(m), n_max(nmax) {
    if (m < 1) throw dimension_error("TruncatedFock: need at least one mode");
    if (nmax < 0) throw dimension_error("TruncatedFock: negative cutoff");
    offsets.resize(nmax + 2);
    offsets[0] = 0;
    for (int n = 0; n <= nmax; ++n) {
        sectors.push_back(std::make_shared<const BosonBasis>(m, n, cap));
        offsets[n + 1] = offsets[n] + sectors[n]->dimension();
        if (offsets[n + 1] > cap)
            throw size_error("TruncatedFock: total dimension " + std::to_string(offsets[n + 1]) +
                             " exceeds cap " + std::to_string(cap));
    }
    total_dim = offsets[nmax + 1];
}

FockSpacePtr make_fock_space(int modes, int n_max, std::int64_t cap) {
    return std::make_shared<const TruncatedFock>(modes, n_max, cap);
}

FockVector vacuum(FockSpacePtr space) {
    FockVector v;
    v.coefficients = Vec::Zero(space->total_dim);
    v.coefficients(0) = 1.0;
    v.space = std::move(space);
    return v;
}

int cutoff_policy(double nbar) {
    return static_cast<int>(std::ceil(nbar + 6.0 * std::sqrt(nbar) + 10.0));
}

double poisson_tail(double nbar, int n_max) {
    if (nbar == 0.0) return 0.0;
    double p = std::exp(-nbar);
    double cum = p;
    for (int n = 1; n <= n_max; ++n) {
        p *= nbar / n;
        cum += p;
    }
    return std::max(0.0, 1.0 - cum);
}

Vec annihilate_mode_fock(const TruncatedFock& space, int mode, const Vec& in) {
    if (in.size() != space.total_dim) throw dimension_error("annihilate_mode_fock: size mismatch");
    Vec out = Vec::Zero(space.total_dim);
    for (int n = 0; n + 1 <= space.n_max; ++n) {
        const auto& target = *space.sectors[n];
        const auto& source = *space.sectors[n + 1];
        out.segment(space.offsets[n], target.dimension()) = annihilate_mode(
            target, source, mode, in.segment(space.offsets[n + 1], source.dimension()));
    }
    return out;
}

FockVector apply_ladder(LadderKind kind, const Vec& f, const FockVector& psi, double* lost) {
    const auto& space = *psi.space;
    if (f.size() != space.modes) throw dimension_error("apply_ladder: orbital size mismatch");
    FockVector out;
    out.space = psi.space;
    out.coefficients = Vec::Zero(space.total_dim);
    if (kind == LadderKind::annihilate) {
        for (int p = 0; p < space.modes; ++p)
            if (f(p) != cplx(0.0))
                out.coefficients += std::conj(f(p)) * annihilate_mode_fock(space, p, psi.coefficients);
        if (lost) *lost = 0.0;
        return out;
    }
    // creation: sector n receives from n-1; the would-be (n_max+1) sector is
    // truncated away. |a+(f) psi_top|^2 = |a(f) psi_top|^2 + |f|^2 |psi_top|^2.
    for (int n = 1; n <= space.n_max; ++n) {
        const auto& target = *space.sectors[n];
        const auto& source = *space.sectors[n - 1];
        Vec seg = Vec::Zero(target.dimension());
        std::vector<int> scratch(space.modes);
        for (std::int64_t row = 0; row < target.dimension(); ++row) {
            auto occ = target.occupation(row);
            cplx acc = 0.0;
            for (int p = 0; p < space.modes; ++p) {
                if (occ[p] == 0 || f(p) == cplx(0.0)) continue;
                for (int i = 0; i < space.modes; ++i) scratch[i] = occ[i];
                scratch[p] -= 1;
                acc += f(p) * std::sqrt(double(occ[p])) *
                       psi.coefficients(space.offsets[n - 1] + source.index_of(scratch));
            }
            seg(row) = acc;
        }
        out.coefficients.segment(space.offsets[n], target.dimension()) = seg;
    }
    if (lost) {
        const auto& topb = *space.sectors[space.n_max];
        const Vec top = psi.coefficients.segment(space.offsets[space.n_max], topb.dimension());
        FockVector top_only;
        top_only.space = psi.space;
        top_only.coefficients = Vec::Zero(space.total_dim);
        top_only.coefficients.segment(space.offsets[space.n_max], topb.dimension()) = top;
        const FockVector af = apply_ladder(LadderKind::annihilate, f, top_only);
        *lost = std::sqrt(af.coefficients.squaredNorm() + f.squaredNorm() * top.squaredNorm());
    }
    return out;
}

double number_expectation(const FockVector& psi) {
    const auto& space = *psi.space;
    double num = 0.0, den = 0.0;
    for (int n = 0; n <= space.n_max; ++n) {
        const double w =
            psi.coefficients.segment(space.offsets[n], space.sector_dim(n)).squaredNorm();
        num += n * w;
        den += w;
    }
    if (den == 0.0) throw dimension_error("number_expectation: zero vector");
    return num / den;
}

double parity_expectation(const FockVector& psi) {
    const auto& space = *psi.space;
    double num = 0.0, den = 0.0;
    for (int n = 0; n <= space.n_max; ++n) {
        const double w =
            psi.coefficients.segment(space.offsets[n], space.sector_dim(n)).squaredNorm();
        num += (n % 2 == 0 ? 1.0 : -1.0) * w;
        den += w;
    }
    if (den == 0.0) throw dimension_error("parity_expectation: zero vector");
    return num / den;
}

double sector_weight(const FockVector& psi, int n) {
    const auto& space = *psi.space;
    if (n < 0 || n > space.n_max) throw dimension_error("sector_weight: sector out of range");
    return psi.coefficients.segment(space.offsets[n], space.sector_dim(n)).squaredNorm();
}

double boundary_mass(const FockVector& psi) {
    const auto& space = *psi.space;
    const double total = psi.coefficients.squaredNorm();
    if (total == 0.0) return 0.0;
    double top = 0.0;
    for (int n = std::max(0, space.n_max - 2); n <= space.n_max; ++n)
        top += sector_weight(psi, n);
    return top / total;
}

namespace {

// Hermitian generator i (a+(phi) - a(phi)) of the Weyl operator.
Csr weyl_generator(const TruncatedFock& space, const Vec& orbital) {
    std::vector<std::int64_t> ti, tj;
    std::vector<cplx> tv;
    std::vector<int> scratch(space.modes);
    for (int n = 0; n <= space.n_max; ++n) {
        const auto& basis = *space.sectors[n];
        for (std::int64_t row = 0; row < basis.dimension(); ++row) {
            auto occ = basis.occupation(row);
            const std::int64_t grow = space.offsets[n] + row;
            for (int p = 0; p < space.modes; ++p) {
                if (orbital(p) == cplx(0.0)) continue;
                // i a+(phi): <occ| i phi_p a+_p |occ - e_p>
                if (occ[p] > 0) {
                    for (int i = 0; i < space.modes; ++i) scratch[i] = occ[i];
                    scratch[p] -= 1;
                    ti.push_back(grow);
                    tj.push_back(space.offsets[n - 1] + space.sectors[n - 1]->index_of(scratch));
                    tv.push_back(cplx(0.0, 1.0) * orbital(p) * std::sqrt(double(occ[p])));
                }
                // -i a(phi): <occ| -i conj(phi_p) a_p |occ + e_p>
                if (n + 1 <= space.n_max) {
                    for (int i = 0; i < space.modes; ++i) scratch[i] = occ[i];
                    scratch[p] += 1;
                    ti.push_back(grow);
                    tj.push_back(space.offsets[n + 1] + space.sectors[n + 1]->index_of(scratch));
                    tv.push_back(cplx(0.0, -1.0) * std::conj(orbital(p)) *
                                 std::sqrt(double(occ[p] + 1)));
                }
            }
        }
    }
    return Csr::from_triplets(space.total_dim, std::move(ti), std::move(tj), std::move(tv));
}

}  // namespace

FockVector apply_weyl(const Vec& orbital, const FockVector& psi, const ExpiOptions& opt) {
    if (orbital.size() != psi.space->modes)
        throw dimension_error("apply_weyl: orbital size mismatch");
    const Csr gen = weyl_generator(*psi.space, orbital);
    FockVector out = psi;
    expi_apply_csr(gen, 1.0, out.coefficients, opt);
    return out;
}

FockVector coherent_state(const Vec& orbital, FockSpacePtr space, const ExpiOptions& opt) {
    const double nbar = orbital.squaredNorm();
    const int needed = cutoff_policy(nbar);
    if (space->n_max < needed)
        throw size_error("coherent_state: cutoff rule violated; need n_max >= " +
                         std::to_string(needed));
    return apply_weyl(orbital, vacuum(std::move(space)), opt);
}

WeylShiftResiduals weyl_conjugate_check(const Vec& phi, const Vec& f, FockSpacePtr space,
                                        int n_test_states, std::uint64_t seed) {
    // Deterministic random test states supported in the lower third of the
    // sectors, away from the cutoff boundary.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n_fill = std::max(1, space->n_max / 3);
    WeylShiftResiduals res;
    const cplx shift_a = f.dot(phi);          // <f, phi>
    const cplx shift_c = std::conj(shift_a);  // <phi, f>
    for (int s = 0; s < n_test_states; ++s) {
        FockVector psi = vacuum(space);
        for (std::int64_t i = 0; i < space->offsets[n_fill + 1]; ++i)
            psi.coefficients(i) = cplx(gauss(rng), gauss(rng));
        psi.coefficients /= psi.coefficients.norm();

        const FockVector w_psi = apply_weyl(phi, psi);
        const FockVector awp = apply_ladder(LadderKind::annihilate, f, w_psi);
        const FockVector waw = apply_weyl(-phi, awp);   // W*(phi) = W(-phi)
        const FockVector a_psi = apply_ladder(LadderKind::annihilate, f, psi);
        res.annihilate = std::max(
            res.annihilate,
            (waw.coefficients - a_psi.coefficients - shift_a * psi.coefficients).norm());

        const FockVector cwp = apply_ladder(LadderKind::create, f, w_psi);
        const FockVector wcw = apply_weyl(-phi, cwp);
        const FockVector c_psi = apply_ladder(LadderKind::create, f, psi);
        res.create = std::max(
            res.create,
            (wcw.coefficients - c_psi.coefficients - shift_c * psi.coefficients).norm());
    }
    return res;
}

FockOperator fock_hamiltonian(const DiscreteModel& model, int n_weight, FockSpacePtr space) {
    model.validate();
    if (model.modes() != space->modes)
        throw dimension_error("fock_hamiltonian: mode count mismatch");
    std::vector<std::int64_t> ti, tj;
    std::vector<cplx> tv;
    for (int n = 0; n <= space->n_max; ++n) {
        const auto block = build_mean_field_hamiltonian(model, space->sectors[n], n_weight);
        const std::int64_t off = space->offsets[n];
        for (std::int64_t r = 0; r < block.matrix.rows; ++r)
            for (std::int64_t p = block.matrix.row_ptr[r]; p < block.matrix.row_ptr[r + 1]; ++p) {
                ti.push_back(off + r);
                tj.push_back(off + block.matrix.col[p]);
                tv.push_back(block.matrix.val[p]);
            }
    }
    FockOperator h;
    h.space = std::move(space);
    h.matrix = Csr::from_triplets(h.space->total_dim, std::move(ti), std::move(tj), std::move(tv));
    return h;
}

FockVector evolve_fock(const FockVector& psi, const DiscreteModel& model, int n_weight, double t,
                       const PropagateOptions& opt) {
    const auto& space = *psi.space;
    FockVector out = psi;
    par::for_index_dynamic(space.n_max + 1, [&](std::ptrdiff_t n) {
        const auto basis = space.sectors[n];
        const std::int64_t dim = basis->dimension();
        const Vec seg = psi.coefficients.segment(space.offsets[n], dim);
        if (seg.norm() == 0.0) {
            out.coefficients.segment(space.offsets[n], dim).setZero();
            return;
        }
        ManyBodyState st;
        st.basis = basis;
        st.coefficients = seg;
        ManyBodyOperator h;
        if (n == 0) {
            // vacuum sector: H = 0
            out.coefficients.segment(space.offsets[n], dim) = seg;
            return;
        }
        h = build_mean_field_hamiltonian(model, basis, n_weight);
        const ManyBodyState evolved = propagate(st, h, t, opt);
        out.coefficients.segment(space.offsets[n], dim) = evolved.coefficients;
    });
    return out;
}

SectorProjection sector_projection(const FockVector& psi, int n) {
    const auto& space = *psi.space;
    if (n < 0 || n > space.n_max) throw dimension_error("sector_projection: sector out of range");
    SectorProjection out;
    out.projected.space = psi.space;
    out.projected.coefficients = Vec::Zero(space.total_dim);
    out.projected.coefficients.segment(space.offsets[n], space.sector_dim(n)) =
        psi.coefficients.segment(space.offsets[n], space.sector_dim(n));
    out.norm = out.projected.coefficients.norm();
    if (out.norm == 0.0)
        throw inconsistency_error("sector_projection: empty sector (degenerate projection)");
    return out;
}

double sector_constant(int n) {
    if (n < 0) throw dimension_error("sector_constant: negative sector");
    if (n == 0) return 1.0;
    return std::exp(0.5 * n - 0.5 * n * std::log(double(n)) + 0.5 * std::lgamma(n + 1.0));
}

FockVector embed_product(FockSpacePtr space, const Vec& orbital, int n) {
    if (n < 0 || n > space->n_max) throw dimension_error("embed_product: sector out of range");
    const ManyBodyState prod = product_state(space->sectors[n], orbital);
    FockVector out;
    out.coefficients = Vec::Zero(space->total_dim);
    out.coefficients.segment(space->offsets[n], space->sector_dim(n)) = prod.coefficients;
    out.space = std::move(space);
    return out;
}

ReducedDensity gamma1_fock(const FockVector& psi) {
    const auto& space = *psi.space;
    const int m = space.modes;
    std::vector<Vec> chi(m);
    par::for_index_dynamic(m, [&](std::ptrdiff_t p) {
        chi[p] = annihilate_mode_fock(space, static_cast<int>(p), psi.coefficients);
    });
    double expectation_n = 0.0;
    for (int p = 0; p < m; ++p) expectation_n += chi[p].squaredNorm();
    if (expectation_n <= 0.0)
        throw inconsistency_error("gamma1_fock: <N> = 0, density undefined");
    ReducedDensity rho;
    rho.order = 1;
    rho.matrix.resize(m, m);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q <= p; ++q) {
            rho.matrix(p, q) = chi[q].dot(chi[p]) / expectation_n;   // <a+_q a_p>/<N>
            rho.matrix(q, p) = std::conj(rho.matrix(p, q));
        }
    return rho;
}

ModeFlow::ModeFlow(const Vec& c0, const DiscreteModel& model, double t_end, double dt)
    : model_(std::make_shared<const DiscreteModel>(model)), dt_(dt), t_end_(t_end) {
    model.validate();
    const int m = model.modes();
    if (c0.size() != m) throw dimension_error("ModeFlow: orbital size mismatch");
    if (!(dt > 0.0) || !(t_end >= 0.0)) throw dimension_error("ModeFlow: bad time step");

    auto rhs = [&](const Vec& c) -> Vec {
        Eigen::VectorXd rho(m);
        for (int j = 0; j < m; ++j) rho(j) = std::norm(c(j));
        const Eigen::VectorXd u = model.coupling * (model.interaction * rho);
        Vec out = model.one_body * c;
        for (int j = 0; j < m; ++j) out(j) += u(j) * c(j);
        return cplx(0.0, -1.0) * out;
    };

    Vec c = c0;
    nodes_.push_back(c);
    derivs_.push_back(rhs(c));
    if (t_end <= 0.0) return;
    const long n_steps = std::max(1L, std::lround(t_end / dt));
    dt_ = t_end / n_steps;
    for (long s = 0; s < n_steps; ++s) {
        const Vec k1 = rhs(c);
        const Vec k2 = rhs(c + 0.5 * dt_ * k1);
        const Vec k3 = rhs(c + 0.5 * dt_ * k2);
        const Vec k4 = rhs(c + dt_ * k3);
        c = c + dt_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        nodes_.push_back(c);
        derivs_.push_back(rhs(c));
    }
}

Vec ModeFlow::at(double t) const {
    if (t <= 0.0) return nodes_.front();
    if (t >= t_end_) return nodes_.back();
    const std::size_t i =
        std::min<std::size_t>(static_cast<std::size_t>(t / dt_), nodes_.size() - 2);
    const double s = (t - i * dt_) / dt_;
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    return h00 * nodes_[i] + (h10 * dt_) * derivs_[i] + h01 * nodes_[i + 1] +
           (h11 * dt_) * derivs_[i + 1];
}

Csr fluctuation_generator(const TruncatedFock& space, const DiscreteModel& model, int n_weight,
                          const Vec& c, FluctuationVariant variant) {
    model.validate();
    const int m = model.modes();
    if (c.size() != m) throw dimension_error("fluctuation_generator: orbital size mismatch");
    const double kappa = model.coupling;
    const auto& w = model.interaction;

    // quadratic blocks
    Eigen::VectorXd rho(m);
    for (int j = 0; j < m; ++j) rho(j) = std::norm(c(j));
    const Eigen::VectorXd mean_field = kappa * (w * rho);
    Mat hop = model.one_body;
    for (int j = 0; j < m; ++j) hop(j, j) += mean_field(j);
    for (int x = 0; x < m; ++x)
        for (int y = 0; y < m; ++y) hop(x, y) += kappa * w(x, y) * c(x) * std::conj(c(y));
    Mat pair(m, m);   // symmetric
    for (int x = 0; x < m; ++x)
        for (int y = 0; y < m; ++y) pair(x, y) = kappa * w(x, y) * c(x) * c(y);

    const bool full = (variant == FluctuationVariant::full);
    const double coeff3 = full ? kappa / std::sqrt(double(n_weight)) : 0.0;
    const double coeff4 = full ? kappa / (2.0 * n_weight) : 0.0;
    double scalar = 0.0;
    if (full) {
        double vbar = 0.0;
        for (int x = 0; x < m; ++x)
            for (int y = 0; y < m; ++y) vbar += w(x, y) * rho(x) * rho(y);
        scalar = -0.5 * kappa * n_weight * vbar;
    }

    std::vector<std::int64_t> ti, tj;
    std::vector<cplx> tv;
    std::vector<int> scratch(m);
    auto push = [&](std::int64_t r, std::int64_t col, cplx v) {
        ti.push_back(r);
        tj.push_back(col);
        tv.push_back(v);
    };

    for (int n = 0; n <= space.n_max; ++n) {
        const auto& basis = *space.sectors[n];
        for (std::int64_t src = 0; src < basis.dimension(); ++src) {
            auto occ = basis.occupation(src);
            const std::int64_t gcol = space.offsets[n] + src;

            // diagonal: quartic + scalar
            if (full) {
                double quart = 0.0;
                for (int x = 0; x < m; ++x)
                    for (int y = 0; y < m; ++y) {
                        const double nx = occ[x], ny = occ[y];
                        quart += w(x, y) * (nx * ny - (x == y ? nx : 0.0));
                    }
                push(gcol, gcol, coeff4 * quart + scalar);
            }

            // hopping sum_pq Q_pq a+_p a_q (within the sector)
            for (int q = 0; q < m; ++q) {
                if (occ[q] == 0) continue;
                for (int p = 0; p < m; ++p) {
                    for (int i = 0; i < m; ++i) scratch[i] = occ[i];
                    scratch[q] -= 1;
                    const double amp_q = std::sqrt(double(occ[q]));
                    const double amp_p = std::sqrt(double(scratch[p] + 1));
                    scratch[p] += 1;
                    push(space.offsets[n] + basis.index_of(scratch), gcol,
                         hop(p, q) * amp_q * amp_p);
                }
            }

            // pairing (1/2) P_xy a+_x a+_y  -> sector n+2
            if (n + 2 <= space.n_max) {
                const auto& tb = *space.sectors[n + 2];
                for (int x = 0; x < m; ++x)
                    for (int y = 0; y < m; ++y) {
                        for (int i = 0; i < m; ++i) scratch[i] = occ[i];
                        const double ay = std::sqrt(double(scratch[y] + 1));
                        scratch[y] += 1;
                        const double ax = std::sqrt(double(scratch[x] + 1));
                        scratch[x] += 1;
                        push(space.offsets[n + 2] + tb.index_of(scratch), gcol,
                             0.5 * pair(x, y) * ay * ax);
                    }
            }

            // pairing (1/2) conj(P_xy) a_x a_y  -> sector n-2
            if (n >= 2) {
                const auto& tb = *space.sectors[n - 2];
                for (int x = 0; x < m; ++x)
                    for (int y = 0; y < m; ++y) {
                        for (int i = 0; i < m; ++i) scratch[i] = occ[i];
                        if (scratch[y] == 0) continue;
                        const double ay = std::sqrt(double(scratch[y]));
                        scratch[y] -= 1;
                        if (scratch[x] == 0) continue;
                        const double ax = std::sqrt(double(scratch[x]));
                        scratch[x] -= 1;
                        push(space.offsets[n - 2] + tb.index_of(scratch), gcol,
                             0.5 * std::conj(pair(x, y)) * ay * ax);
                    }
            }

            if (!full) continue;

            // cubic A: coeff3 w_xy c_y a+_x a+_y a_x -> sector n+1
            if (n + 1 <= space.n_max) {
                const auto& tb = *space.sectors[n + 1];
                for (int x = 0; x < m; ++x) {
                    if (occ[x] == 0) continue;
                    for (int y = 0; y < m; ++y) {
                        if (w(x, y) == 0.0) continue;
                        for (int i = 0; i < m; ++i) scratch[i] = occ[i];
                        const double ax1 = std::sqrt(double(scratch[x]));
                        scratch[x] -= 1;
                        const double ay = std::sqrt(double(scratch[y] + 1));
                        scratch[y] += 1;
                        const double ax2 = std::sqrt(double(scratch[x] + 1));
                        scratch[x] += 1;
                        push(space.offsets[n + 1] + tb.index_of(scratch), gcol,
                             coeff3 * w(x, y) * c(y) * ax1 * ay * ax2);
                    }
                }
            }

            // cubic B: coeff3 w_xy conj(c_y) a+_x a_y a_x -> sector n-1
            if (n >= 1) {
                const auto& tb = *space.sectors[n - 1];
                for (int x = 0; x < m; ++x) {
                    if (occ[x] == 0) continue;
                    for (int y = 0; y < m; ++y) {
                        if (w(x, y) == 0.0) continue;
                        for (int i = 0; i < m; ++i) scratch[i] = occ[i];
                        const double ax1 = std::sqrt(double(scratch[x]));
                        scratch[x] -= 1;
                        if (scratch[y] == 0) continue;
                        const double ay = std::sqrt(double(scratch[y]));
                        scratch[y] -= 1;
                        const double ax2 = std::sqrt(double(scratch[x] + 1));
                        scratch[x] += 1;
                        push(space.offsets[n - 1] + tb.index_of(scratch), gcol,
                             coeff3 * w(x, y) * std::conj(c(y)) * ax1 * ay * ax2);
                    }
                }
            }
        }
    }
    return Csr::from_triplets(space.total_dim, std::move(ti), std::move(tj), std::move(tv));
}

FluctuationTrajectory evolve_fluctuation(const Vec& c0, const DiscreteModel& model, int n_weight,
                                         FluctuationVariant variant, FluctuationPath path,
                                         FockSpacePtr space, const SolverConfig& cfg) {
    cfg.validate();
    model.validate();
    if (path == FluctuationPath::conjugation && variant != FluctuationVariant::full)
        throw dimension_error("evolve_fluctuation: conjugation path requires the full variant");

    const double nbar = n_weight * c0.squaredNorm();
    if (path == FluctuationPath::conjugation && space->n_max < cutoff_policy(nbar))
        throw size_error("evolve_fluctuation: cutoff rule violated for sqrt(N) phi; need n_max >= " +
                         std::to_string(cutoff_policy(nbar)));

    const double flow_dt = std::min(1e-3, cfg.dt);
    const ModeFlow flow(c0, model, cfg.t_end, flow_dt);

    FluctuationTrajectory tr;
    auto record = [&](double t, const FockVector& psi) {
        tr.times.push_back(t);
        tr.number_series.push_back(number_expectation(psi));
        tr.parity_series.push_back(parity_expectation(psi));
        const double leak = boundary_mass(psi);
        tr.leakage_series.push_back(leak);
        if (leak > 1e-4)
            throw convergence_error(
                "evolve_fluctuation: truncation leakage " + std::to_string(leak) +
                " of mass at t=" + std::to_string(t) + "; increase n_max");
    };

    if (path == FluctuationPath::conjugation) {
        const double sqn = std::sqrt(double(n_weight));
        FockVector psi = vacuum(space);
        record(0.0, psi);
        psi = apply_weyl(sqn * c0, psi);
        psi = evolve_fock(psi, model, n_weight, cfg.t_end);
        psi = apply_weyl(Vec(-sqn * flow.at(cfg.t_end)), psi);
        record(cfg.t_end, psi);
        tr.final_state = std::move(psi);
        return tr;
    }

    // generator path: commutator-free 4th-order Magnus over Gauss nodes
    static const double kSqrt3 = std::sqrt(3.0);
    const double node1 = 0.5 - kSqrt3 / 6.0, node2 = 0.5 + kSqrt3 / 6.0;
    const double wa = 0.25 + kSqrt3 / 6.0, wb = 0.25 - kSqrt3 / 6.0;

    FockVector psi = vacuum(space);
    record(0.0, psi);
    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    const double dt = cfg.t_end / n_steps;
    for (long s = 0; s < n_steps; ++s) {
        const double t = s * dt;
        const Csr a1 = fluctuation_generator(*space, model, n_weight, flow.at(t + node1 * dt),
                                             variant);
        const Csr a2 = fluctuation_generator(*space, model, n_weight, flow.at(t + node2 * dt),
                                             variant);
        // first factor weights the earlier node with (1/4 + sqrt(3)/6)
        expi_apply_csr(combine(a1, wa, a2, wb), dt, psi.coefficients);
        expi_apply_csr(combine(a1, wb, a2, wa), dt, psi.coefficients);
        if ((s + 1) % cfg.record_every == 0 || s + 1 == n_steps) record((s + 1) * dt, psi);
    }
    tr.final_state = std::move(psi);
    return tr;
}

std::vector<FockRateRow> rate_sweep(const Vec& c0, const DiscreteModel& model,
                                    const std::vector<int>& Ns, double t,
                                    const SolverConfig& hartree_cfg) {
    const ModeFlow flow(c0, model, t, std::min(1e-3, hartree_cfg.dt));
    Vec ct = flow.at(t);
    ct /= ct.norm();
    ReducedDensity proj;
    proj.order = 1;
    proj.matrix = ct * ct.adjoint();

    std::vector<FockRateRow> rows(Ns.size());
    par::for_index_dynamic(static_cast<std::ptrdiff_t>(Ns.size()), [&](std::ptrdiff_t i) {
        const auto start = std::chrono::steady_clock::now();
        const int n = Ns[i];
        const int nmax = cutoff_policy(double(n));
        auto space = make_fock_space(model.modes(), nmax);
        FockVector psi = coherent_state(std::sqrt(double(n)) * c0, space);
        psi = evolve_fock(psi, model, n, t);
        const ReducedDensity g1 = gamma1_fock(psi);
        rows[i].particles = n;
        rows[i].n_max = nmax;
        rows[i].dimension = space->total_dim;
        rows[i].leakage = poisson_tail(double(n) * c0.squaredNorm(), nmax);
        rows[i].distance = trace_distance(g1, proj);
        rows[i].wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return rows;
}

ExponentialFit fit_exponential(const std::vector<double>& times,
                               const std::vector<double>& values) {
    if (times.size() != values.size()) throw dimension_error("fit_exponential: length mismatch");
    double st = 0, stt = 0, sy = 0, sty = 0, n = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (values[i] <= 0.0) continue;
        const double y = std::log(values[i]);
        st += times[i];
        stt += times[i] * times[i];
        sy += y;
        sty += times[i] * y;
        n += 1.0;
    }
    if (n < 3.0) throw dimension_error("fit_exponential: need at least 3 positive samples");
    const double det = n * stt - st * st;
    ExponentialFit fit;
    fit.rate = (n * sty - st * sy) / det;
    const double intercept = (sy * stt - st * sty) / det;
    fit.prefactor = std::exp(intercept);
    double ss = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (values[i] <= 0.0) continue;
        const double r = std::log(values[i]) - (intercept + fit.rate * times[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace mflab
