#include "mflab/bbgky.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mflab/parallel.hpp"

namespace mflab {

namespace {

std::int64_t ipow(int base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

inline int digit(std::int64_t index, int slot, std::int64_t stride, int modes) {
    return static_cast<int>((index / stride) % modes);
}

// (h acting on one slot) * gamma  or  gamma * (h on one slot)
Mat apply_slot_left(const Mat& h, const Mat& gamma, int slot, int modes) {
    const std::int64_t dim = gamma.rows();
    const std::int64_t stride = ipow(modes, slot);
    Mat out = Mat::Zero(dim, dim);
    for (std::int64_t r = 0; r < dim; ++r) {
        const int x = digit(r, slot, stride, modes);
        const std::int64_t base = r - x * stride;
        for (int xp = 0; xp < modes; ++xp) {
            const cplx hval = h(x, xp);
            if (hval == cplx(0.0)) continue;
            out.row(r) += hval * gamma.row(base + xp * stride);
        }
    }
    return out;
}

Mat apply_slot_right(const Mat& h, const Mat& gamma, int slot, int modes) {
    const std::int64_t dim = gamma.rows();
    const std::int64_t stride = ipow(modes, slot);
    Mat out = Mat::Zero(dim, dim);
    for (std::int64_t c = 0; c < dim; ++c) {
        const int x = digit(c, slot, stride, modes);
        const std::int64_t base = c - x * stride;
        for (int xp = 0; xp < modes; ++xp) {
            const cplx hval = h(xp, x);
            if (hval == cplx(0.0)) continue;
            out.col(c) += hval * gamma.col(base + xp * stride);
        }
    }
    return out;
}

// Symmetrizer over the n slots of an M^n-dimensional space.
Mat symmetrizer(int modes, int slots) {
    const std::int64_t dim = ipow(modes, slots);
    std::vector<int> perm(slots);
    for (int i = 0; i < slots; ++i) perm[i] = i;
    Mat sym = Mat::Zero(dim, dim);
    double count = 0.0;
    do {
        for (std::int64_t c = 0; c < dim; ++c) {
            std::int64_t r = 0;
            std::int64_t cc = c;
            for (int s = 0; s < slots; ++s) {
                const int d = static_cast<int>(cc % modes);
                cc /= modes;
                r += static_cast<std::int64_t>(d) * ipow(modes, perm[s]);
            }
            sym(r, c) += 1.0;
        }
        count += 1.0;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sym / count;
}

}  // namespace

void HierarchyState::validate(int modes) const {
    if (depth < 1 || static_cast<int>(gammas.size()) != depth)
        throw dimension_error("HierarchyState: depth does not match stored densities");
    if (particle_number && depth > *particle_number)
        throw dimension_error("HierarchyState: depth exceeds particle number");
    for (int k = 1; k <= depth; ++k) {
        const std::int64_t dim = ipow(modes, k);
        if (gammas[k - 1].rows() != dim || gammas[k - 1].cols() != dim)
            throw dimension_error("HierarchyState: gamma^(" + std::to_string(k) +
                                  ") has wrong dimension");
    }
}

HierarchyState factorized_state(const Vec& c, int depth, std::optional<int> particle_number) {
    HierarchyState st;
    st.depth = depth;
    st.particle_number = particle_number;
    const Mat p = c * c.adjoint();
    Mat current = p;
    st.gammas.push_back(current);
    for (int k = 2; k <= depth; ++k) {
        Mat next(current.rows() * p.rows(), current.cols() * p.cols());
        // Kronecker with the new slot as the most significant digit
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            for (Eigen::Index j = 0; j < p.cols(); ++j)
                next.block(i * current.rows(), j * current.cols(), current.rows(),
                           current.cols()) = p(i, j) * current;
        current = std::move(next);
        st.gammas.push_back(current);
    }
    return st;
}

Mat partial_trace_last(const Mat& gamma, int modes) {
    const std::int64_t big = gamma.rows();
    const std::int64_t small = big / modes;
    if (small * modes != big) throw dimension_error("partial_trace_last: dimension not divisible");
    Mat out = Mat::Zero(small, small);
    for (int y = 0; y < modes; ++y)
        out += gamma.block(y * small, y * small, small, small);
    return out;
}

Mat bbgky_rhs(const HierarchyState& state, int k, const DiscreteModel& model, ClosureRule rule) {
    const int m = model.modes();
    state.validate(m);
    if (k < 1 || k > state.depth) throw dimension_error("bbgky_rhs: order out of range");

    const Mat& gamma = state.gammas[k - 1];
    const std::int64_t dim = gamma.rows();
    const double kappa = model.coupling;

    double intra_coeff, collision_coeff;
    if (state.particle_number) {
        const double n = *state.particle_number;
        intra_coeff = kappa / n;
        collision_coeff = kappa * (1.0 - k / n);
    } else {
        intra_coeff = 0.0;
        collision_coeff = kappa;
    }

    Mat rhs = Mat::Zero(dim, dim);

    // kinetic commutator sum_j [h_j, gamma]
    for (int slot = 0; slot < k; ++slot)
        rhs += apply_slot_left(model.one_body, gamma, slot, m) -
               apply_slot_right(model.one_body, gamma, slot, m);

    // intra-group interaction (1/N) sum_{i<j<=k} [w_ij, gamma]
    if (intra_coeff != 0.0 && k >= 2) {
        for (std::int64_t r = 0; r < dim; ++r) {
            for (std::int64_t c = 0; c < dim; ++c) {
                double wr = 0.0, wc = 0.0;
                for (int i = 0; i < k; ++i) {
                    const int xi_r = digit(r, i, ipow(m, i), m);
                    const int xi_c = digit(c, i, ipow(m, i), m);
                    for (int j = i + 1; j < k; ++j) {
                        wr += model.interaction(xi_r, digit(r, j, ipow(m, j), m));
                        wc += model.interaction(xi_c, digit(c, j, ipow(m, j), m));
                    }
                }
                rhs(r, c) += intra_coeff * (wr - wc) * gamma(r, c);
            }
        }
    }

    // collision term (1 - k/N) sum_j tr_{k+1} [w_{j,k+1}, gamma^(k+1)]
    if (collision_coeff != 0.0) {
        Mat next;   // gamma^(k+1)
        if (k < state.depth) {
            next = state.gammas[k];
        } else if (rule == ClosureRule::truncate_zero) {
            next = Mat();   // gamma^(depth+1) = 0
        } else {
            // factorize-top: symmetrized product gamma^(K) v gamma^(1),
            // renormalized to unit trace (a heuristic closure)
            const Mat& top = state.gammas[state.depth - 1];
            const Mat& one = state.gammas[0];
            Mat prod(top.rows() * m, top.cols() * m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    prod.block(i * top.rows(), j * top.cols(), top.rows(), top.cols()) =
                        one(i, j) * top;
            const Mat sym = symmetrizer(m, k + 1);
            next = sym * prod * sym;
            const cplx tr = next.trace();
            if (std::abs(tr) > 1e-14) next /= tr;
        }
        if (next.size() > 0) {
            const std::int64_t mk = dim;
            for (int slot = 0; slot < k; ++slot) {
                const std::int64_t stride = ipow(m, slot);
                for (std::int64_t r = 0; r < dim; ++r) {
                    const int xr = digit(r, slot, stride, m);
                    for (std::int64_t c = 0; c < dim; ++c) {
                        const int xc = digit(c, slot, stride, m);
                        cplx acc = 0.0;
                        for (int y = 0; y < m; ++y)
                            acc += (model.interaction(xr, y) - model.interaction(xc, y)) *
                                   next(r + y * mk, c + y * mk);
                        rhs(r, c) += collision_coeff * acc;
                    }
                }
            }
        }
    }
    // (at k = N the collision coefficient 1 - k/N vanishes identically)

    return rhs;
}

HierarchyTrajectory evolve_hierarchy(const HierarchyState& init, ClosureRule rule,
                                     const DiscreteModel& model, const SolverConfig& cfg) {
    const int m = model.modes();
    init.validate(m);
    cfg.validate();

    // Partial-trace compatibility of the initial data.
    for (int k = 1; k < init.depth; ++k) {
        const Mat contracted = partial_trace_last(init.gammas[k], m);
        if ((contracted - init.gammas[k - 1]).cwiseAbs().maxCoeff() > 1e-8)
            throw invariant_error("evolve_hierarchy: initial data not partial-trace compatible");
    }

    // Sub-step control from the largest interaction value and kinetic scale.
    const double scale = model.one_body.cwiseAbs().maxCoeff() * m * init.depth +
                         std::abs(model.coupling) * model.interaction.cwiseAbs().maxCoeff() *
                             init.depth;
    const int n_sub = std::max(1, static_cast<int>(std::ceil(std::abs(cfg.dt) * scale / 0.5)));
    const double dt = cfg.dt / n_sub;

    HierarchyTrajectory tr;
    HierarchyState state = init;

    auto rhs_all = [&](const HierarchyState& s) {
        std::vector<Mat> out(s.depth);
        par::for_index_dynamic(s.depth, [&](std::ptrdiff_t idx) {
            // i d/dt gamma = rhs  =>  d/dt gamma = -i rhs
            out[idx] = cplx(0.0, -1.0) * bbgky_rhs(s, static_cast<int>(idx) + 1, model, rule);
        });
        return out;
    };

    auto record = [&](double t) {
        double trace_dev = 0.0, herm = 0.0;
        for (int k = 1; k <= state.depth; ++k) {
            trace_dev = std::max(trace_dev, std::abs(state.gammas[k - 1].trace() - cplx(1.0)));
            herm = std::max(herm, (state.gammas[k - 1] - state.gammas[k - 1].adjoint())
                                      .cwiseAbs()
                                      .maxCoeff());
        }
        tr.times.push_back(t);
        tr.states.push_back(state);
        tr.max_trace_deviation.push_back(trace_dev);
        tr.max_hermiticity.push_back(herm);
        if (trace_dev > 1e-6 || herm > 1e-6) tr.invariant_flag = true;
    };

    record(0.0);
    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    for (long step = 1; step <= n_steps; ++step) {
        for (int sub = 0; sub < n_sub; ++sub) {
            // classical RK4 on the stacked matrix system
            HierarchyState tmp = state;
            const auto k1 = rhs_all(state);
            for (int k = 0; k < state.depth; ++k)
                tmp.gammas[k] = state.gammas[k] + 0.5 * dt * k1[k];
            const auto k2 = rhs_all(tmp);
            for (int k = 0; k < state.depth; ++k)
                tmp.gammas[k] = state.gammas[k] + 0.5 * dt * k2[k];
            const auto k3 = rhs_all(tmp);
            for (int k = 0; k < state.depth; ++k)
                tmp.gammas[k] = state.gammas[k] + dt * k3[k];
            const auto k4 = rhs_all(tmp);
            for (int k = 0; k < state.depth; ++k)
                state.gammas[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        for (int k = 0; k < state.depth; ++k)
            if (!state.gammas[k].allFinite())
                throw integration_error("evolve_hierarchy: non-finite density",
                                        (step - 1) * cfg.dt);
        if (step % cfg.record_every == 0 || step == n_steps) record(step * cfg.dt);
    }
    return tr;
}

std::vector<double> infinite_hierarchy_residual(const Trajectory& phi_traj, int k_max,
                                                const EffectiveModel& model, int max_samples) {
    if (phi_traj.snapshots.size() < 5)
        throw dimension_error("infinite_hierarchy_residual: need at least 5 snapshots");
    const std::size_t n = phi_traj.snapshots.size();
    const double delta = phi_traj.times[1] - phi_traj.times[0];
    for (std::size_t i = 1; i + 1 < n; ++i)
        if (std::abs((phi_traj.times[i + 1] - phi_traj.times[i]) - delta) > 1e-9 * std::abs(delta))
            throw dimension_error("infinite_hierarchy_residual: snapshot spacing not uniform");
    if (delta > 0.02)
        throw dimension_error(
            "infinite_hierarchy_residual: snapshot spacing too coarse for the stencil; "
            "record with spacing <= 0.01");

    const Grid& g = phi_traj.snapshots.front().grid;
    const DiscreteModel dm = to_discrete_model(g, model);
    const int m = g.num_sites;

    std::vector<Vec> cs(n);
    for (std::size_t i = 0; i < n; ++i) cs[i] = to_mode_vector(phi_traj.snapshots[i]);

    // interior sample indices, at most max_samples, deterministic stride
    std::vector<std::size_t> samples;
    const std::size_t lo = 2, hi = n - 3;
    const std::size_t span = hi - lo;
    const std::size_t stride = std::max<std::size_t>(1, span / std::max(1, max_samples - 1));
    for (std::size_t i = lo; i <= hi; i += stride) samples.push_back(i);

    std::vector<double> residuals(k_max, 0.0);
    for (int k = 1; k <= k_max; ++k) {
        auto fact = [&](std::size_t i, int order) {
            HierarchyState s = factorized_state(cs[i], order, std::nullopt);
            return s.gammas[order - 1];
        };
        for (std::size_t i : samples) {
            const Mat dgamma = (fact(i - 2, k) - 8.0 * fact(i - 1, k) + 8.0 * fact(i + 1, k) -
                                fact(i + 2, k)) /
                               (12.0 * delta);
            HierarchyState center = factorized_state(cs[i], k + 1, std::nullopt);
            HierarchyState trimmed;
            trimmed.depth = k + 1;
            trimmed.particle_number = std::nullopt;
            trimmed.gammas = center.gammas;
            const Mat rhs = bbgky_rhs(trimmed, k, dm, ClosureRule::truncate_zero);
            const double res = (cplx(0.0, 1.0) * dgamma - rhs).norm();   // Frobenius
            residuals[k - 1] = std::max(residuals[k - 1], res);
        }
    }
    return residuals;
}

}  // namespace mflab
