#include "mflab/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace mflab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW plan creation is not thread-safe; executing a plan on fresh arrays is.
// Plans are cached per transform size and created with FFTW_UNALIGNED so the
// new-array execute interface accepts any caller buffer.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    void forward(int m, const cplx* in, cplx* out) { run(m, FFTW_FORWARD, in, out); }
    void inverse(int m, const cplx* in, cplx* out) { run(m, FFTW_BACKWARD, in, out); }

  private:
    struct Pair {
        fftw_plan fwd = nullptr;
        fftw_plan bwd = nullptr;
    };

    void run(int m, int sign, const cplx* in, cplx* out) {
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto& p = plans_[m];
            if (!p.fwd) {
                std::vector<cplx> scratch_in(m), scratch_out(m);
                auto* si = reinterpret_cast<fftw_complex*>(scratch_in.data());
                auto* so = reinterpret_cast<fftw_complex*>(scratch_out.data());
                p.fwd = fftw_plan_dft_1d(m, si, so, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
                p.bwd = fftw_plan_dft_1d(m, si, so, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
            }
            plan = (sign == FFTW_FORWARD) ? p.fwd : p.bwd;
        }
        fftw_execute_dft(plan,
                         reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }

    std::mutex mutex_;
    std::map<int, Pair> plans_;
};

}  // namespace

Grid::Grid(int m, double l) : num_sites(m), length(l) {
    if (m < 2) throw dimension_error("Grid: need at least 2 sites");
    if (!(l > 0.0)) throw dimension_error("Grid: length must be positive");
    spacing = length / num_sites;
    mode_wavenumbers.resize(num_sites);
    for (int j = 0; j < num_sites; ++j) {
        const int signed_index = (j < (num_sites + 1) / 2) ? j : j - num_sites;
        mode_wavenumbers[j] = 2.0 * kPi / length * signed_index;
    }
}

WaveFunction::WaveFunction(Grid g, std::vector<cplx> amp) : grid(std::move(g)), amplitudes(std::move(amp)) {
    if (static_cast<int>(amplitudes.size()) != grid.num_sites)
        throw dimension_error("WaveFunction: amplitude length does not match grid");
}

Kernel::Kernel(Grid g, std::vector<double> vals) : grid(std::move(g)), values(std::move(vals)) {
    const int m = grid.num_sites;
    if (static_cast<int>(values.size()) != m)
        throw dimension_error("Kernel: value length does not match grid");
    double asym = 0.0;
    for (int j = 1; j < m; ++j) asym = std::max(asym, std::abs(values[j] - values[m - j]));
    if (asym > 0.0) {
        symmetrized_input = true;
        for (int j = 1; j <= m / 2; ++j) {
            const double mean = 0.5 * (values[j] + values[m - j]);
            values[j] = mean;
            values[m - j] = mean;
        }
    }
}

Multiplier kinetic_symbol(const Grid& g) {
    Multiplier m;
    m.symbol.reserve(g.num_sites);
    for (double k : g.mode_wavenumbers) m.symbol.push_back(k * k);
    return m;
}

Multiplier semirelativistic_symbol(const Grid& g) {
    Multiplier m;
    m.symbol.reserve(g.num_sites);
    for (double k : g.mode_wavenumbers) m.symbol.push_back(std::sqrt(1.0 + k * k));
    return m;
}

double periodic_distance(const Grid& g, int site) {
    const int m = g.num_sites;
    int j = site % m;
    if (j < 0) j += m;
    const double x = j * g.spacing;
    return std::min(x, g.length - x);
}

Kernel gravitational_kernel(const Grid& g, double alpha) {
    if (!(alpha > 0.0))
        throw dimension_error("gravitational_kernel: regularization alpha must be > 0");
    std::vector<double> vals(g.num_sites);
    for (int j = 0; j < g.num_sites; ++j) vals[j] = 1.0 / (periodic_distance(g, j) + alpha);
    return Kernel(g, std::move(vals));
}

void dft_forward(int m, const cplx* in, cplx* out) { PlanCache::instance().forward(m, in, out); }
void dft_inverse(int m, const cplx* in, cplx* out) { PlanCache::instance().inverse(m, in, out); }

std::vector<cplx> to_modes(const WaveFunction& psi) {
    const int m = psi.grid.num_sites;
    std::vector<cplx> modes(m);
    dft_forward(m, psi.amplitudes.data(), modes.data());
    const double scale = std::sqrt(psi.grid.spacing / m);
    for (auto& c : modes) c *= scale;
    return modes;
}

WaveFunction from_modes(const Grid& g, const std::vector<cplx>& modes) {
    const int m = g.num_sites;
    if (static_cast<int>(modes.size()) != m)
        throw dimension_error("from_modes: mode count does not match grid");
    std::vector<cplx> amp(m);
    dft_inverse(m, modes.data(), amp.data());
    const double scale = 1.0 / std::sqrt(g.spacing * m);
    for (auto& c : amp) c *= scale;
    return WaveFunction(g, std::move(amp));
}

WaveFunction apply_multiplier(const Multiplier& m, const WaveFunction& psi) {
    const int n = psi.grid.num_sites;
    if (static_cast<int>(m.symbol.size()) != n)
        throw dimension_error("apply_multiplier: symbol length does not match grid");
    std::vector<cplx> modes(n), out(n);
    dft_forward(n, psi.amplitudes.data(), modes.data());
    for (int j = 0; j < n; ++j) modes[j] *= m.symbol[j];
    dft_inverse(n, modes.data(), out.data());
    const double inv_m = 1.0 / n;
    for (auto& c : out) c *= inv_m;
    return WaveFunction(psi.grid, std::move(out));
}

std::vector<double> convolve(const Kernel& v, const std::vector<double>& rho) {
    const int m = v.grid.num_sites;
    if (static_cast<int>(rho.size()) != m)
        throw dimension_error("convolve: density length does not match kernel grid");
    std::vector<cplx> vk(m), rk(m), prod(m), out(m);
    std::vector<cplx> vc(v.values.begin(), v.values.end());
    std::vector<cplx> rc(rho.begin(), rho.end());
    dft_forward(m, vc.data(), vk.data());
    dft_forward(m, rc.data(), rk.data());
    for (int j = 0; j < m; ++j) prod[j] = vk[j] * rk[j];
    dft_inverse(m, prod.data(), out.data());
    std::vector<double> result(m);
    const double scale = v.grid.spacing / m;
    for (int j = 0; j < m; ++j) result[j] = out[j].real() * scale;
    return result;
}

double l2_norm(const WaveFunction& psi) {
    double s = 0.0;
    for (const auto& c : psi.amplitudes) s += std::norm(c);
    return std::sqrt(psi.grid.spacing * s);
}

cplx inner_product(const WaveFunction& phi, const WaveFunction& psi) {
    if (!phi.grid.compatible(psi.grid))
        throw dimension_error("inner_product: grids differ");
    cplx s = 0.0;
    for (int j = 0; j < phi.grid.num_sites; ++j)
        s += std::conj(phi.amplitudes[j]) * psi.amplitudes[j];
    return phi.grid.spacing * s;
}

double sobolev_half_norm(const WaveFunction& psi) {
    const auto modes = to_modes(psi);
    double s = 0.0;
    for (int j = 0; j < psi.grid.num_sites; ++j) {
        const double k = psi.grid.mode_wavenumbers[j];
        s += std::sqrt(1.0 + k * k) * std::norm(modes[j]);
    }
    return std::sqrt(s);
}

}  // namespace mflab
