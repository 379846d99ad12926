#pragma once

#include <complex>
#include <vector>

#include "mflab/errors.hpp"

namespace mflab {

using cplx = std::complex<double>;

// Periodic one-dimensional mode lattice. Sites x_m = m*h, m = 0..M-1,
// h = L/M. Mode j carries wavenumber (2*pi/L)*s_j with s_j the signed index;
// for even M the Nyquist mode is assigned the negative branch, so symbol
// arrays are reproducible bit-for-bit.
struct Grid {
    int num_sites = 0;
    double length = 0.0;
    double spacing = 0.0;
    std::vector<double> mode_wavenumbers;

    Grid() = default;
    Grid(int m, double l);

    bool compatible(const Grid& other) const {
        return num_sites == other.num_sites && length == other.length;
    }
};

struct WaveFunction {
    Grid grid;
    std::vector<cplx> amplitudes;

    WaveFunction() = default;
    WaveFunction(Grid g, std::vector<cplx> amp);
};

// Real symbol over mode wavenumbers; generates a self-adjoint operator.
struct Multiplier {
    std::vector<double> symbol;
};

// Even two-body kernel sampled on the lattice. Input values are symmetrized
// (v(x)+v(-x))/2 on ingestion; an asymmetric input sets a flag rather than
// failing.
struct Kernel {
    Grid grid;
    std::vector<double> values;
    bool symmetrized_input = false;

    Kernel() = default;
    Kernel(Grid g, std::vector<double> vals);
};

Multiplier kinetic_symbol(const Grid& g);            // k^2
Multiplier semirelativistic_symbol(const Grid& g);   // sqrt(1 + k^2)

// Periodic distance |x| on the torus, min(x, L - x).
double periodic_distance(const Grid& g, int site);

// Regularized attractive kernel 1/(dist(x) + alpha); alpha must be > 0.
Kernel gravitational_kernel(const Grid& g, double alpha);

// Unitary transform pair with measure weight h:
//   modes[j] = sqrt(h/M) * sum_m e^{-i 2 pi j m / M} psi[m]
// so that sum_j |modes[j]|^2 = h * sum_m |psi[m]|^2.
std::vector<cplx> to_modes(const WaveFunction& psi);
WaveFunction from_modes(const Grid& g, const std::vector<cplx>& modes);

WaveFunction apply_multiplier(const Multiplier& m, const WaveFunction& psi);

// Periodic convolution with measure weight h: (v * rho)(x) = h sum_y v(x-y) rho(y).
std::vector<double> convolve(const Kernel& v, const std::vector<double>& rho);

double l2_norm(const WaveFunction& psi);
cplx inner_product(const WaveFunction& phi, const WaveFunction& psi);

// ( sum_k (1+k^2)^{1/2} |psi_hat(k)|^2 )^{1/2}; always >= the L^2 norm.
double sobolev_half_norm(const WaveFunction& psi);

// Raw in-place DFT helpers used by the solvers (unnormalized FFTW transforms).
// forward: out[j] = sum_m e^{-2 pi i j m/M} in[m]; inverse: no 1/M factor.
void dft_forward(int m, const cplx* in, cplx* out);
void dft_inverse(int m, const cplx* in, cplx* out);

}  // namespace mflab
