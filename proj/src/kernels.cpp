#include "mflab/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "mflab/parallel.hpp"

namespace mflab {

Csr Csr::from_triplets(std::int64_t rows,
                       std::vector<std::int64_t> ti,
                       std::vector<std::int64_t> tj,
                       std::vector<std::complex<double>> tv) {
    if (ti.size() != tj.size() || ti.size() != tv.size())
        throw dimension_error("Csr::from_triplets: ragged triplet arrays");
    const std::size_t nnz_in = ti.size();
    std::vector<std::size_t> order(nnz_in);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ti[a] != ti[b]) return ti[a] < ti[b];
        return tj[a] < tj[b];
    });

    Csr a;
    a.rows = rows;
    a.row_ptr.assign(rows + 1, 0);
    a.col.reserve(nnz_in);
    a.val.reserve(nnz_in);
    std::int64_t prev_i = -1, prev_j = -1;
    for (std::size_t idx : order) {
        const std::int64_t i = ti[idx], j = tj[idx];
        if (i < 0 || i >= rows || j < 0 || j >= rows)
            throw dimension_error("Csr::from_triplets: index out of range");
        if (i == prev_i && j == prev_j) {
            a.val.back() += tv[idx];
        } else {
            a.col.push_back(j);
            a.val.push_back(tv[idx]);
            ++a.row_ptr[i + 1];
            prev_i = i;
            prev_j = j;
        }
    }
    for (std::int64_t i = 0; i < rows; ++i) a.row_ptr[i + 1] += a.row_ptr[i];
    return a;
}

double Csr::hermiticity_residual() const {
    // max |A_ij - conj(A_ji)| through a transpose-indexed pass
    Mat dense_check;  // avoid building dense for big operators
    if (rows <= 512) {
        dense_check = to_dense();
        return (dense_check - dense_check.adjoint()).cwiseAbs().maxCoeff();
    }
    double worst = 0.0;
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            const std::int64_t j = col[p];
            std::complex<double> aji = 0.0;
            for (std::int64_t q = row_ptr[j]; q < row_ptr[j + 1]; ++q)
                if (col[q] == i) {
                    aji = val[q];
                    break;
                }
            worst = std::max(worst, std::abs(val[p] - std::conj(aji)));
        }
    }
    return worst;
}

Mat Csr::to_dense() const {
    Mat d = Mat::Zero(rows, rows);
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col[p]) += val[p];
    return d;
}

namespace {
inline void matvec_row(const Csr& a, const Vec& x, Vec& y, std::int64_t i) {
    std::complex<double> s = 0.0;
    for (std::int64_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) s += a.val[p] * x[a.col[p]];
    y[i] = s;
}
}  // namespace

void matvec_serial(const Csr& a, const Vec& x, Vec& y) {
    if (x.size() != a.rows) throw dimension_error("matvec: dimension mismatch");
    y.resize(a.rows);
    for (std::int64_t i = 0; i < a.rows; ++i) matvec_row(a, x, y, i);
}

void matvec(const Csr& a, const Vec& x, Vec& y) {
    if (x.size() != a.rows) throw dimension_error("matvec: dimension mismatch");
    y.resize(a.rows);
    par::for_index(a.rows, [&](std::ptrdiff_t i) { matvec_row(a, x, y, i); });
}

Csr combine(const Csr& a, double ca, const Csr& b, double cb) {
    if (a.rows != b.rows || a.col != b.col || a.row_ptr != b.row_ptr)
        throw dimension_error("combine: sparsity patterns differ");
    Csr c = a;
    for (std::size_t p = 0; p < c.val.size(); ++p) c.val[p] = ca * a.val[p] + cb * b.val[p];
    return c;
}

void expi_apply_csr(const Csr& a, double t, Vec& v, const ExpiOptions& opt) {
    expi_apply([&](const auto& x, Vec& y) { matvec(a, Vec(x), y); }, t, v, opt);
}

Vec expi_apply_dense(const Mat& a, double t, const Vec& v) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(a);
    Vec coeff = eig.eigenvectors().adjoint() * v;
    for (Eigen::Index j = 0; j < coeff.size(); ++j)
        coeff(j) *= std::exp(cplx(0.0, -eig.eigenvalues()(j) * t));
    return eig.eigenvectors() * coeff;
}

}  // namespace mflab
