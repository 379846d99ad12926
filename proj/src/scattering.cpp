#include "mflab/scattering.hpp"

#include <cmath>
#include <string>

namespace mflab {

void RadialPotential::validate() const {
    if (!(r_max > 0.0)) throw dimension_error("RadialPotential: r_max must be positive");
    if (samples.size() < 8) throw dimension_error("RadialPotential: too few samples");
    if (!(support_radius > 0.0) || support_radius > r_max)
        throw dimension_error("RadialPotential: support radius outside (0, r_max]");
    const double dr = mesh_size();
    const std::size_t support_idx = static_cast<std::size_t>(std::ceil(support_radius / dr));
    for (std::size_t i = support_idx + 1; i < samples.size(); ++i)
        if (samples[i] != 0.0)
            throw dimension_error("RadialPotential: samples do not vanish beyond support radius");
    for (double s : samples)
        if (!std::isfinite(s)) throw dimension_error("RadialPotential: non-finite sample");
}

RadialPotential square_well(double v0, double radius, double r_max, int n_points) {
    RadialPotential v;
    v.r_max = r_max;
    v.support_radius = radius;
    v.samples.resize(n_points);
    const double dr = r_max / (n_points - 1);
    for (int i = 0; i < n_points; ++i) {
        const double r = i * dr;
        // Midpoint value at a node sitting on the edge; keeps the sampled
        // step consistent with the continuum well beyond first order.
        if (std::abs(r - radius) < 0.5 * dr)
            v.samples[i] = 0.5 * v0;
        else
            v.samples[i] = (r < radius) ? v0 : 0.0;
    }
    return v;
}

RadialPotential scaled_potential(const RadialPotential& v, double lambda) {
    RadialPotential out = v;
    for (auto& s : out.samples) s *= lambda;
    return out;
}

ScatteringResult solve_zero_energy(const RadialPotential& v) {
    v.validate();
    const std::size_t n = v.samples.size();
    const double dr = v.mesh_size();
    if (v.support_radius / dr < 100.0)
        throw dimension_error("solve_zero_energy: mesh too coarse, need support/mesh >= 100");
    if (v.support_radius > 0.8 * v.r_max)
        throw dimension_error(
            "solve_zero_energy: non-vanishing tail; need support_radius <= 0.8 r_max");

    // Numerov on u'' = g u with g = V/2; u(0) = 0, initial slope arbitrary.
    std::vector<double> g(n), u(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = 0.5 * v.samples[i];
    const double h2 = dr * dr;
    u[0] = 0.0;
    u[1] = dr + g[0] * dr * h2 / 6.0;   // cubic series start keeps 4th order
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double c_next = 1.0 - h2 / 12.0 * g[i + 1];
        const double c_here = 2.0 * (1.0 + 5.0 * h2 / 12.0 * g[i]);
        const double c_prev = 1.0 - h2 / 12.0 * g[i - 1];
        u[i + 1] = (c_here * u[i] - c_prev * u[i - 1]) / c_next;
    }
    for (double x : u)
        if (!std::isfinite(x)) throw integration_error("solve_zero_energy: overflow in u", 0.0);

    // Sign change beyond r = 0 signals a bound state (not supported here).
    for (std::size_t i = 2; i < n; ++i)
        if (u[i] * u[i - 1] < 0.0)
            throw inconsistency_error(
                "solve_zero_energy: zero-energy solution changes sign (bound state?)");

    // Least-squares line u = a + b r on the outer 20% of the mesh.
    const std::size_t fit_start = static_cast<std::size_t>(std::floor(0.8 * (n - 1)));
    double sr = 0.0, srr = 0.0, su = 0.0, sru = 0.0, cnt = 0.0;
    for (std::size_t i = fit_start; i < n; ++i) {
        const double r = i * dr;
        sr += r;
        srr += r * r;
        su += u[i];
        sru += r * u[i];
        cnt += 1.0;
    }
    const double det = cnt * srr - sr * sr;
    const double b = (cnt * sru - sr * su) / det;
    const double a = (su * srr - sr * sru) / det;

    ScatteringResult res;
    res.mesh_size = dr;
    const double u_scale = std::abs(u[n - 1]) / v.r_max;
    if (std::abs(b) <= 1e-12 * std::max(1.0, u_scale)) {
        res.ill_conditioned = true;
        throw inconsistency_error("solve_zero_energy: outer slope of u vanished");
    }
    res.ill_conditioned = std::abs(b) < 1e-6 * std::max(1.0, std::abs(a) / v.r_max);
    res.a0_asymptote = -a / b;

    // Normalize so f -> 1 and build the profile f = u / (b r).
    res.f_profile.resize(n);
    res.f_profile[0] = u[1] / (b * dr);   // f(0) = u'(0) after normalization
    for (std::size_t i = 1; i < n; ++i) res.f_profile[i] = u[i] / (b * i * dr);

    // Integral estimator a0 = (1/2) int V f r^2 dr = (1/2) int V u r dr / b,
    // composite Simpson (3/8 closeout for an odd interval count).
    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i) integrand[i] = v.samples[i] * u[i] * (i * dr) / b;
    const std::size_t intervals = n - 1;
    double integral = 0.0;
    std::size_t limit = intervals;
    if (intervals % 2 != 0) limit = intervals - 3;
    for (std::size_t i = 0; i + 2 <= limit; i += 2)
        integral += dr / 3.0 * (integrand[i] + 4.0 * integrand[i + 1] + integrand[i + 2]);
    if (intervals % 2 != 0) {
        const std::size_t i = limit;
        integral += 3.0 * dr / 8.0 *
                    (integrand[i] + 3.0 * integrand[i + 1] + 3.0 * integrand[i + 2] +
                     integrand[i + 3]);
    }
    res.a0_integral = 0.5 * integral;

    const double denom = std::max(std::abs(res.a0_asymptote), 1e-30);
    res.discrepancy = std::abs(res.a0_asymptote - res.a0_integral) / denom;
    return res;
}

double scattering_length(const ScatteringResult& res) {
    if (res.discrepancy > 1e-3)
        throw inconsistency_error("scattering_length: estimators disagree by " +
                                  std::to_string(res.discrepancy) + " relative; refine the mesh");
    return res.a0_asymptote;
}

double scaled_length(const RadialPotential& v, int n) {
    if (n < 1) throw dimension_error("scaled_length: N must be >= 1");
    v.validate();
    if (v.samples.size() > (1u << 26))
        throw size_error("scaled_length: refined mesh would exceed the configured cap; need ~" +
                         std::to_string(v.samples.size()) + " points");
    RadialPotential scaled;
    scaled.r_max = v.r_max / n;
    scaled.support_radius = v.support_radius / n;
    scaled.samples = v.samples;
    const double n2 = static_cast<double>(n) * n;
    for (auto& s : scaled.samples) s *= n2;
    return scattering_length(solve_zero_energy(scaled));
}

double born_length(const RadialPotential& v) {
    const std::size_t n = v.samples.size();
    const double dr = v.mesh_size();
    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i) integrand[i] = v.samples[i] * (i * dr) * (i * dr);
    const std::size_t intervals = n - 1;
    double integral = 0.0;
    std::size_t limit = intervals;
    if (intervals % 2 != 0) limit = intervals - 3;
    for (std::size_t i = 0; i + 2 <= limit; i += 2)
        integral += dr / 3.0 * (integrand[i] + 4.0 * integrand[i + 1] + integrand[i + 2]);
    if (intervals % 2 != 0) {
        const std::size_t i = limit;
        integral += 3.0 * dr / 8.0 *
                    (integrand[i] + 3.0 * integrand[i + 1] + 3.0 * integrand[i + 2] +
                     integrand[i + 3]);
    }
    return 0.5 * integral;
}

}  // namespace mflab
