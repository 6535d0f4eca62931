#include "fblab/sym_matrix.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fblab {

namespace {

Eigen::Matrix3d to_eigen(const SymMatrix& m) {
    Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) e(i, j) = m(i, j);
    return e;
}

}  // namespace

SymMatrix SymMatrix::identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
}

SymMatrix SymMatrix::diag(int dim, const Vec& d) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.set(i, i, d[i]);
    return m;
}

SymMatrix SymMatrix::outer(int dim, const Vec& e) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) m.set(i, j, e[i] * e[j]);
    return m;
}

SymMatrix SymMatrix::operator+(const SymMatrix& o) const {
    check(dim_ == o.dim_, "SymMatrix: dimension mismatch");
    SymMatrix r(dim_);
    for (int k = 0; k < 6; ++k) r.a_[k] = a_[k] + o.a_[k];
    return r;
}

SymMatrix SymMatrix::operator-(const SymMatrix& o) const {
    check(dim_ == o.dim_, "SymMatrix: dimension mismatch");
    SymMatrix r(dim_);
    for (int k = 0; k < 6; ++k) r.a_[k] = a_[k] - o.a_[k];
    return r;
}

SymMatrix SymMatrix::operator*(double s) const {
    SymMatrix r(dim_);
    for (int k = 0; k < 6; ++k) r.a_[k] = a_[k] * s;
    return r;
}

double SymMatrix::trace() const {
    double t = 0;
    for (int i = 0; i < dim_; ++i) t += a_[i];
    return t;
}

double SymMatrix::ddot(const SymMatrix& o) const {
    check(dim_ == o.dim_, "SymMatrix: dimension mismatch");
    double s = 0;
    for (int i = 0; i < dim_; ++i) s += a_[i] * o.a_[i];
    for (int k = 3; k < 6; ++k) s += 2.0 * a_[k] * o.a_[k];
    return s;
}

std::array<double, 3> SymMatrix::eigenvalues() const {
    std::array<double, 3> vals;
    std::array<Vec, 3> vecs;
    eigen_system(vals, vecs);
    return vals;
}

void SymMatrix::eigen_system(std::array<double, 3>& values, std::array<Vec, 3>& vectors) const {
    if (dim_ == 2) {
        Eigen::Matrix2d e;
        e << (*this)(0, 0), (*this)(0, 1), (*this)(0, 1), (*this)(1, 1);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(e);
        // Eigen sorts ascending; we expose descending.
        values = {solver.eigenvalues()(1), solver.eigenvalues()(0), 0.0};
        vectors[0] = {solver.eigenvectors()(0, 1), solver.eigenvectors()(1, 1), 0.0};
        vectors[1] = {solver.eigenvectors()(0, 0), solver.eigenvectors()(1, 0), 0.0};
        vectors[2] = {0.0, 0.0, 1.0};
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(to_eigen(*this));
    for (int k = 0; k < 3; ++k) {
        int src = 2 - k;
        values[k] = solver.eigenvalues()(src);
        vectors[k] = {solver.eigenvectors()(0, src), solver.eigenvectors()(1, src),
                      solver.eigenvectors()(2, src)};
    }
}

double SymMatrix::lambda_min() const {
    auto v = eigenvalues();
    return v[dim_ - 1];
}

double SymMatrix::lambda_max() const { return eigenvalues()[0]; }

double SymMatrix::spectral_norm() const {
    auto v = eigenvalues();
    return std::max(std::abs(v[0]), std::abs(v[dim_ - 1]));
}

double SymMatrix::frobenius_norm() const { return std::sqrt(ddot(*this)); }

SymMatrix SymMatrix::positive_part() const {
    std::array<double, 3> vals;
    std::array<Vec, 3> vecs;
    eigen_system(vals, vecs);
    SymMatrix r(dim_);
    for (int k = 0; k < dim_; ++k) {
        double lam = std::max(vals[k], 0.0);
        if (lam == 0.0) continue;
        for (int i = 0; i < dim_; ++i)
            for (int j = i; j < dim_; ++j) r.set(i, j, r(i, j) + lam * vecs[k][i] * vecs[k][j]);
    }
    return r;
}

double SymMatrix::quad(const Vec& x) const {
    double s = 0;
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) s += x[i] * (*this)(i, j) * x[j];
    return s;
}

double SymMatrix::max_abs_entry() const {
    double m = 0;
    for (int i = 0; i < dim_; ++i)
        for (int j = i; j < dim_; ++j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
}

Vec apply(const SymMatrix& m, const Vec& x) {
    Vec y = {0, 0, 0};
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) y[i] += m(i, j) * x[j];
    return y;
}

}  // namespace fblab
