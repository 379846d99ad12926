#include "mflab/solvers.hpp"

#include <cmath>

namespace mflab {

void EffectiveModel::validate(const Grid& g) const {
    if (static_cast<int>(kinetic.symbol.size()) != g.num_sites)
        throw dimension_error("EffectiveModel: kinetic symbol does not match grid");
    if (!external.empty() && static_cast<int>(external.size()) != g.num_sites)
        throw dimension_error("EffectiveModel: external potential does not match grid");
    if (kernel && cubic_contact)
        throw dimension_error("EffectiveModel: kernel and cubic contact are mutually exclusive");
    if (kernel && !kernel->grid.compatible(g))
        throw dimension_error("EffectiveModel: kernel grid does not match");
    if (!std::isfinite(coupling)) throw dimension_error("EffectiveModel: coupling not finite");
    if (alpha < 0.0) throw dimension_error("EffectiveModel: alpha must be >= 0");
}

EffectiveModel hartree_model(const Grid& g, Kernel kernel, double kappa,
                             std::vector<double> external) {
    EffectiveModel m;
    m.kinetic = kinetic_symbol(g);
    m.kernel = std::move(kernel);
    m.coupling = kappa;
    m.external = std::move(external);
    m.validate(g);
    return m;
}

EffectiveModel gp_model(const Grid& g, double a0) {
    EffectiveModel m;
    m.kinetic = kinetic_symbol(g);
    m.cubic_contact = true;
    m.coupling = 8.0 * 3.14159265358979323846 * a0;
    m.validate(g);
    return m;
}

EffectiveModel semirelativistic_model(const Grid& g, double kappa, double alpha) {
    EffectiveModel m;
    m.kinetic = semirelativistic_symbol(g);
    m.kernel = gravitational_kernel(g, alpha);
    m.coupling = -kappa;   // attraction enters with a minus sign
    m.alpha = alpha;
    m.validate(g);
    return m;
}

void SolverConfig::validate() const {
    if (dt == 0.0 || !std::isfinite(dt)) throw dimension_error("SolverConfig: bad dt");
    if (t_end * dt < 0.0) throw dimension_error("SolverConfig: dt and t_end disagree in sign");
    if (t_end != 0.0 && std::abs(dt) > std::abs(t_end) * (1.0 + 1e-12))
        throw dimension_error("SolverConfig: dt exceeds t_end");
    if (record_every < 1) throw dimension_error("SolverConfig: record_every must be >= 1");
    if (blowup_threshold < 0.0) throw dimension_error("SolverConfig: negative blow-up threshold");
}

const WaveFunction& Trajectory::final_state() const {
    if (snapshots.empty()) throw size_error("Trajectory: no snapshots stored");
    return snapshots.back();
}

namespace {

// Local potential including the nonlinearity, evaluated at the current density.
std::vector<double> effective_potential(const WaveFunction& phi, const EffectiveModel& model) {
    const int m = phi.grid.num_sites;
    std::vector<double> rho(m);
    for (int j = 0; j < m; ++j) rho[j] = std::norm(phi.amplitudes[j]);
    std::vector<double> w(m, 0.0);
    if (model.kernel) {
        w = convolve(*model.kernel, rho);
        for (auto& x : w) x *= model.coupling;
    } else if (model.cubic_contact) {
        for (int j = 0; j < m; ++j) w[j] = model.coupling * rho[j];
    }
    if (!model.external.empty())
        for (int j = 0; j < m; ++j) w[j] += model.external[j];
    return w;
}

void phase_step(WaveFunction& phi, const std::vector<double>& w, double dt) {
    for (int j = 0; j < phi.grid.num_sites; ++j)
        phi.amplitudes[j] *= std::exp(cplx(0.0, -w[j] * dt));
}

void kinetic_step(WaveFunction& phi, const EffectiveModel& model, double dt) {
    const int m = phi.grid.num_sites;
    std::vector<cplx> modes(m);
    dft_forward(m, phi.amplitudes.data(), modes.data());
    for (int j = 0; j < m; ++j) modes[j] *= std::exp(cplx(0.0, -model.kinetic.symbol[j] * dt));
    dft_inverse(m, modes.data(), phi.amplitudes.data());
    const double inv_m = 1.0 / m;
    for (auto& c : phi.amplitudes) c *= inv_m;
}

void strang_step(WaveFunction& phi, const EffectiveModel& model, double dt) {
    phase_step(phi, effective_potential(phi, model), 0.5 * dt);
    kinetic_step(phi, model, dt);
    phase_step(phi, effective_potential(phi, model), 0.5 * dt);
}

void fourth_order_step(WaveFunction& phi, const EffectiveModel& model, double dt) {
    // Yoshida triple jump over the Strang step
    static const double cbrt2 = std::cbrt(2.0);
    static const double w1 = 1.0 / (2.0 - cbrt2);
    static const double w0 = -cbrt2 / (2.0 - cbrt2);
    strang_step(phi, model, w1 * dt);
    strang_step(phi, model, w0 * dt);
    strang_step(phi, model, w1 * dt);
}

WaveFunction rhs(const WaveFunction& phi, const EffectiveModel& model) {
    WaveFunction out = apply_multiplier(model.kinetic, phi);
    const auto w = effective_potential(phi, model);
    for (int j = 0; j < phi.grid.num_sites; ++j) {
        out.amplitudes[j] += w[j] * phi.amplitudes[j];
        out.amplitudes[j] *= cplx(0.0, -1.0);
    }
    return out;
}

void rk4_step(WaveFunction& phi, const EffectiveModel& model, double dt) {
    const int m = phi.grid.num_sites;
    WaveFunction k1 = rhs(phi, model);
    WaveFunction tmp = phi;
    for (int j = 0; j < m; ++j) tmp.amplitudes[j] = phi.amplitudes[j] + 0.5 * dt * k1.amplitudes[j];
    WaveFunction k2 = rhs(tmp, model);
    for (int j = 0; j < m; ++j) tmp.amplitudes[j] = phi.amplitudes[j] + 0.5 * dt * k2.amplitudes[j];
    WaveFunction k3 = rhs(tmp, model);
    for (int j = 0; j < m; ++j) tmp.amplitudes[j] = phi.amplitudes[j] + dt * k3.amplitudes[j];
    WaveFunction k4 = rhs(tmp, model);
    for (int j = 0; j < m; ++j)
        phi.amplitudes[j] += dt / 6.0 *
            (k1.amplitudes[j] + 2.0 * k2.amplitudes[j] + 2.0 * k3.amplitudes[j] + k4.amplitudes[j]);
}

bool finite(const WaveFunction& phi) {
    for (const auto& c : phi.amplitudes)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    return true;
}

Trajectory evolve(const WaveFunction& phi0, const EffectiveModel& model, const SolverConfig& cfg) {
    model.validate(phi0.grid);
    cfg.validate();

    WaveFunction phi = phi0;
    Trajectory tr;
    auto record = [&](double t) {
        tr.times.push_back(t);
        const double mass = l2_norm(phi);
        tr.mass_series.push_back(mass * mass);
        tr.energy_series.push_back(energy(phi, model));
        const double hh = sobolev_half_norm(phi);
        tr.h_half_series.push_back(hh);
        if (cfg.store_snapshots) tr.snapshots.push_back(phi);
        if (cfg.blowup_threshold > 0.0 && !tr.blowup_time && hh > cfg.blowup_threshold)
            tr.blowup_time = t;
    };

    if (cfg.blowup_threshold > 0.0 && sobolev_half_norm(phi) >= cfg.blowup_threshold)
        throw dimension_error("evolve: blow-up threshold below initial H^{1/2} norm");

    record(0.0);
    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    const double remainder = cfg.t_end - n_steps * cfg.dt;
    double t = 0.0;
    long step = 0;
    auto advance = [&](double dt) {
        switch (cfg.scheme) {
            case Scheme::strang_split: strang_step(phi, model, dt); break;
            case Scheme::fourth_order_split: fourth_order_step(phi, model, dt); break;
            case Scheme::explicit_rk4: rk4_step(phi, model, dt); break;
        }
    };
    for (step = 1; step <= n_steps; ++step) {
        advance(cfg.dt);
        if (!finite(phi)) throw integration_error("evolve: state left finite range", t);
        t = step * cfg.dt;
        if (step % cfg.record_every == 0 || (step == n_steps && remainder == 0.0)) record(t);
        if (tr.blowup_time) return tr;   // left the resolved regime; stop here
    }
    if (remainder != 0.0 && std::abs(remainder) > 1e-12 * std::abs(cfg.t_end)) {
        advance(remainder);
        if (!finite(phi)) throw integration_error("evolve: state left finite range", t);
        record(cfg.t_end);
    } else if (tr.times.back() != t && n_steps > 0) {
        record(t);
    }
    return tr;
}

}  // namespace

double energy(const WaveFunction& phi, const EffectiveModel& model) {
    model.validate(phi.grid);
    const int m = phi.grid.num_sites;
    const double h = phi.grid.spacing;
    const auto modes = to_modes(phi);
    double e = 0.0;
    for (int j = 0; j < m; ++j) e += model.kinetic.symbol[j] * std::norm(modes[j]);
    std::vector<double> rho(m);
    for (int j = 0; j < m; ++j) rho[j] = std::norm(phi.amplitudes[j]);
    if (!model.external.empty())
        for (int j = 0; j < m; ++j) e += h * model.external[j] * rho[j];
    if (model.kernel) {
        const auto w = convolve(*model.kernel, rho);
        double inter = 0.0;
        for (int j = 0; j < m; ++j) inter += w[j] * rho[j];
        e += 0.5 * model.coupling * h * inter;
    } else if (model.cubic_contact) {
        double quart = 0.0;
        for (int j = 0; j < m; ++j) quart += rho[j] * rho[j];
        e += 0.5 * model.coupling * h * quart;
    }
    return e;
}

Trajectory evolve_hartree(const WaveFunction& phi0, const EffectiveModel& model,
                          const SolverConfig& cfg) {
    if (!model.kernel)
        throw dimension_error("evolve_hartree: model must carry a convolution kernel");
    return evolve(phi0, model, cfg);
}

Trajectory evolve_gp(const WaveFunction& phi0, double a0, const SolverConfig& cfg) {
    if (!std::isfinite(a0)) throw dimension_error("evolve_gp: a0 not finite");
    return evolve(phi0, gp_model(phi0.grid, a0), cfg);
}

Trajectory evolve_semirel(const WaveFunction& phi0, const EffectiveModel& model,
                          const SolverConfig& cfg) {
    if (!model.kernel)
        throw dimension_error("evolve_semirel: model must carry the regularized kernel");
    if (model.alpha <= 0.0)
        throw dimension_error("evolve_semirel: regularization alpha must be > 0");
    return evolve(phi0, model, cfg);
}

std::optional<double> detect_blowup(const Trajectory& tr, double threshold) {
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        if (tr.h_half_series[i] > threshold) return tr.times[i];
    return std::nullopt;
}

}  // namespace mflab
