#include <doctest.h>

#include <complex>
#include <random>

#include "mflab/grid.hpp"

using namespace mflab;

namespace {

WaveFunction random_wave(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<cplx> amp(g.num_sites);
    for (auto& a : amp) a = cplx(gauss(rng), gauss(rng));
    return WaveFunction(g, std::move(amp));
}

WaveFunction plane_wave(const Grid& g, int mode, double amp = 1.0) {
    std::vector<cplx> a(g.num_sites);
    const double k = g.mode_wavenumbers[mode];
    for (int j = 0; j < g.num_sites; ++j)
        a[j] = amp / std::sqrt(g.length) * std::exp(cplx(0.0, k * j * g.spacing));
    return WaveFunction(g, std::move(a));
}

}  // namespace

TEST_CASE("grid wavenumbers are symmetric with the Nyquist mode negative") {
    Grid g(8, 4.0);
    CHECK(g.spacing == doctest::Approx(0.5));
    CHECK(g.mode_wavenumbers[0] == 0.0);
    // negation symmetry up to the Nyquist mode
    for (int j = 1; j < 4; ++j)
        CHECK(g.mode_wavenumbers[j] == doctest::Approx(-g.mode_wavenumbers[8 - j]));
    CHECK(g.mode_wavenumbers[4] < 0.0);   // Nyquist on the negative branch
    CHECK_THROWS_AS(Grid(1, 1.0), dimension_error);
    CHECK_THROWS_AS(Grid(4, -1.0), dimension_error);
}

TEST_CASE("multiplier annihilates constants and scales plane waves") {
    Grid g(16, 2.0 * 3.14159265358979323846);
    const Multiplier kin = kinetic_symbol(g);

    WaveFunction constant(g, std::vector<cplx>(16, cplx(0.7, -0.3)));
    const auto zero = apply_multiplier(kin, constant);
    for (const auto& c : zero.amplitudes) CHECK(std::abs(c) < 1e-13);

    const int mode = 3;
    const auto pw = plane_wave(g, mode);
    const auto kpw = apply_multiplier(kin, pw);
    const double k0 = g.mode_wavenumbers[mode];
    for (int j = 0; j < 16; ++j)
        CHECK(std::abs(kpw.amplitudes[j] - k0 * k0 * pw.amplitudes[j]) < 1e-12);

    // sqrt(1+k^2) on the zero mode is the identity
    const auto sqrt_const = apply_multiplier(semirelativistic_symbol(g), constant);
    for (int j = 0; j < 16; ++j)
        CHECK(std::abs(sqrt_const.amplitudes[j] - constant.amplitudes[j]) < 1e-13);
}

TEST_CASE("multiplier is linear and symmetric on random inputs") {
    Grid g(12, 5.0);
    const Multiplier kin = kinetic_symbol(g);
    const auto phi = random_wave(g, 11);
    const auto psi = random_wave(g, 12);
    const auto lhs = inner_product(phi, apply_multiplier(kin, psi));
    const auto rhs = inner_product(apply_multiplier(kin, phi), psi);
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::abs(lhs) + 1e-12);

    // linearity
    WaveFunction sum = phi;
    for (int j = 0; j < 12; ++j) sum.amplitudes[j] = phi.amplitudes[j] + 2.5 * psi.amplitudes[j];
    const auto msum = apply_multiplier(kin, sum);
    const auto mphi = apply_multiplier(kin, phi);
    const auto mpsi = apply_multiplier(kin, psi);
    for (int j = 0; j < 12; ++j)
        CHECK(std::abs(msum.amplitudes[j] - mphi.amplitudes[j] - 2.5 * mpsi.amplitudes[j]) <
              1e-12);
    CHECK_THROWS_AS(apply_multiplier(kinetic_symbol(Grid(8, 5.0)), phi), dimension_error);
}

TEST_CASE("convolution: delta identity, constant kernel, brute-force oracle") {
    Grid g(10, 3.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> rho(10);
    for (auto& r : rho) r = uni(rng);

    SUBCASE("discrete delta is the identity") {
        std::vector<double> delta(10, 0.0);
        delta[0] = 1.0 / g.spacing;
        const auto out = convolve(Kernel(g, delta), rho);
        for (int j = 0; j < 10; ++j) CHECK(out[j] == doctest::Approx(rho[j]).epsilon(1e-12));
    }
    SUBCASE("constant kernel couples to the total mass") {
        const double c = 1.7;
        const auto out = convolve(Kernel(g, std::vector<double>(10, c)), rho);
        double total = 0.0;
        for (double r : rho) total += r;
        for (int j = 0; j < 10; ++j)
            CHECK(out[j] == doctest::Approx(c * g.spacing * total).epsilon(1e-12));
    }
    SUBCASE("random kernel equals the double-loop sum") {
        std::vector<double> vraw(10);
        for (auto& x : vraw) x = uni(rng);
        const Kernel v(g, vraw);
        const auto out = convolve(v, rho);
        for (int x = 0; x < 10; ++x) {
            double direct = 0.0;
            for (int y = 0; y < 10; ++y) {
                int d = (x - y) % 10;
                if (d < 0) d += 10;
                direct += v.values[d] * rho[y];
            }
            direct *= g.spacing;
            CHECK(std::abs(out[x] - direct) < 1e-12);
        }
    }
    SUBCASE("total integral factorizes") {
        std::vector<double> vraw(10);
        for (auto& x : vraw) x = uni(rng);
        const Kernel v(g, vraw);
        const auto out = convolve(v, rho);
        double so = 0.0, sv = 0.0, sr = 0.0;
        for (int j = 0; j < 10; ++j) {
            so += out[j];
            sv += v.values[j];
            sr += rho[j];
        }
        CHECK(g.spacing * so ==
              doctest::Approx(g.spacing * sv * g.spacing * sr).epsilon(1e-12));
    }
}

TEST_CASE("kernel ingestion symmetrizes asymmetric input with a flag") {
    Grid g(6, 2.0);
    std::vector<double> vals = {1.0, 0.5, 0.2, 0.1, 0.3, 0.9};
    Kernel k(g, vals);
    CHECK(k.symmetrized_input);
    for (int j = 1; j < 6; ++j) CHECK(k.values[j] == doctest::Approx(k.values[6 - j]));
    Kernel even(g, std::vector<double>{1.0, 0.5, 0.2, 0.1, 0.2, 0.5});
    CHECK(!even.symmetrized_input);
}

TEST_CASE("sobolev half norm: plane waves, quadratic-form oracle, lower bound") {
    Grid g(16, 7.0);
    SUBCASE("zero and plane-wave values") {
        WaveFunction zero(g, std::vector<cplx>(16, 0.0));
        CHECK(sobolev_half_norm(zero) == 0.0);
        const int mode = 5;
        const auto pw = plane_wave(g, mode);
        const double k0 = g.mode_wavenumbers[mode];
        CHECK(sobolev_half_norm(pw) ==
              doctest::Approx(std::pow(1.0 + k0 * k0, 0.25)).epsilon(1e-12));
    }
    SUBCASE("quadratic-form oracle and L2 lower bound") {
        const auto psi = random_wave(g, 99);
        const auto form = inner_product(psi, apply_multiplier(semirelativistic_symbol(g), psi));
        CHECK(sobolev_half_norm(psi) ==
              doctest::Approx(std::sqrt(form.real())).epsilon(1e-12));
        CHECK(sobolev_half_norm(psi) >= l2_norm(psi) - 1e-12);
    }
}

TEST_CASE("transform pair is unitary") {
    Grid g(14, 3.3);
    const auto psi = random_wave(g, 5);
    const auto modes = to_modes(psi);
    double mode_norm2 = 0.0;
    for (const auto& c : modes) mode_norm2 += std::norm(c);
    const double l2 = l2_norm(psi);
    CHECK(mode_norm2 == doctest::Approx(l2 * l2).epsilon(1e-12));
    const auto back = from_modes(g, modes);
    for (int j = 0; j < 14; ++j) CHECK(std::abs(back.amplitudes[j] - psi.amplitudes[j]) < 1e-12);
}
