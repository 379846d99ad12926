#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "mflab/errors.hpp"

namespace mflab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Compressed sparse row storage for Hermitian operators; both triangles are
// stored so the matvec is a plain row-parallel gather.
struct Csr {
    std::int64_t rows = 0;
    std::vector<std::int64_t> row_ptr;   // size rows+1
    std::vector<std::int64_t> col;
    std::vector<std::complex<double>> val;

    static Csr from_triplets(std::int64_t rows,
                             std::vector<std::int64_t> ti,
                             std::vector<std::int64_t> tj,
                             std::vector<std::complex<double>> tv);

    double hermiticity_residual() const;
    Mat to_dense() const;
};

// y = A x. The parallel path assigns whole rows to threads; each row's dot
// product runs serially, so the result is bit-identical to matvec_serial for
// any thread count.
void matvec_serial(const Csr& a, const Vec& x, Vec& y);
void matvec(const Csr& a, const Vec& x, Vec& y);

// Linear combination of two matrices with identical sparsity pattern.
Csr combine(const Csr& a, double ca, const Csr& b, double cb);

// v <- exp(-i t A) v for Hermitian A given as a matvec closure.
// Lanczos with full reorthogonalization and adaptive sub-stepping on the
// standard a-posteriori residual estimate. Deterministic: no randomness,
// fixed iteration order.
struct ExpiOptions {
    int krylov_dim = 30;
    double tol = 1e-12;       // per-substep residual estimate, relative to |v|
    int max_substeps = 100000;
};

template <class MatVec>
void expi_apply(const MatVec& apply, double t, Vec& v, const ExpiOptions& opt = {});

void expi_apply_csr(const Csr& a, double t, Vec& v, const ExpiOptions& opt = {});

// Dense path: exact exponential through a Hermitian eigendecomposition.
Vec expi_apply_dense(const Mat& a, double t, const Vec& v);

// --- implementation ---

template <class MatVec>
void expi_apply(const MatVec& apply, double t, Vec& v, const ExpiOptions& opt) {
    const std::int64_t n = v.size();
    if (t == 0.0 || n == 0) return;
    const double vnorm0 = v.norm();
    if (vnorm0 == 0.0) return;

    const int m = std::min<std::int64_t>(opt.krylov_dim, n);
    Eigen::MatrixXcd basis(n, m + 1);
    Eigen::VectorXd alpha(m), beta(m);
    Vec w(n);

    double remaining = t;
    const double direction = (t > 0.0) ? 1.0 : -1.0;
    int substeps = 0;
    while (std::abs(remaining) > 1e-300) {
        if (++substeps > opt.max_substeps)
            throw convergence_error("expi_apply: substep limit exceeded");
        const double vnorm = v.norm();
        basis.col(0) = v / vnorm;
        int built = 0;
        bool breakdown = false;
        for (int j = 0; j < m; ++j) {
            apply(basis.col(j), w);
            cplx a = basis.col(j).dot(w);
            alpha(j) = a.real();
            w -= a * basis.col(j);
            if (j > 0) w -= cplx(beta(j - 1)) * basis.col(j - 1);
            // full reorthogonalization; subspaces here are small
            for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
            beta(j) = w.norm();
            built = j + 1;
            if (beta(j) < 1e-14 * vnorm) {
                breakdown = true;
                break;
            }
            basis.col(j + 1) = w / beta(j);
        }

        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(built, built);
        for (int j = 0; j < built; ++j) {
            tri(j, j) = alpha(j);
            if (j + 1 < built) tri(j, j + 1) = tri(j + 1, j) = beta(j);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);

        double step = remaining;
        Eigen::VectorXcd small;
        while (true) {
            Eigen::VectorXcd phases(built);
            for (int j = 0; j < built; ++j)
                phases(j) = std::exp(cplx(0.0, -eig.eigenvalues()(j) * step));
            small = eig.eigenvectors().cast<cplx>() *
                    (phases.cwiseProduct(eig.eigenvectors().row(0).transpose().cast<cplx>()));
            if (breakdown) break;
            const double err = beta(built - 1) * std::abs(small(built - 1)) * std::abs(step);
            if (err <= opt.tol) break;
            step *= 0.5;
            if (std::abs(step) < 1e-300)
                throw convergence_error("expi_apply: step underflow");
        }

        v = basis.leftCols(built) * (small * vnorm);
        remaining -= step;
        if (remaining * direction < 0.0) remaining = 0.0;
    }
}

}  // namespace mflab
