#pragma once

#include <array>
#include <cstddef>

#include "fblab/util.hpp"

namespace fblab {

// Dense symmetric d x d matrix, d in {2, 3}. Only the upper triangle is
// stored, so m(i,j) == m(j,i) holds exactly by construction.
class SymMatrix {
  public:
    SymMatrix() : dim_(2) { a_.fill(0.0); }
    explicit SymMatrix(int dim) : dim_(dim) {
        check(dim == 2 || dim == 3, "SymMatrix: dim must be 2 or 3");
        a_.fill(0.0);
    }

    static SymMatrix identity(int dim);
    static SymMatrix diag(int dim, const Vec& d);
    // Rank-one matrix e * e^T.
    static SymMatrix outer(int dim, const Vec& e);

    int dim() const { return dim_; }

    double operator()(int i, int j) const { return a_[slot(i, j)]; }
    void set(int i, int j, double v) { a_[slot(i, j)] = v; }

    SymMatrix operator+(const SymMatrix& o) const;
    SymMatrix operator-(const SymMatrix& o) const;
    SymMatrix operator*(double s) const;

    double trace() const;
    // Full contraction sum_ij a_ij b_ij (off-diagonal terms counted twice).
    double ddot(const SymMatrix& o) const;

    // Eigenvalues sorted in descending order; for dim 2 the third entry is 0
    // and should be ignored.
    std::array<double, 3> eigenvalues() const;
    // Eigenvalues (descending) paired with orthonormal eigenvector columns.
    void eigen_system(std::array<double, 3>& values, std::array<Vec, 3>& vectors) const;

    double lambda_min() const;
    double lambda_max() const;
    double spectral_norm() const;
    double frobenius_norm() const;

    // Projection onto the positive semidefinite cone: negative eigenvalues
    // clamped to zero.
    SymMatrix positive_part() const;

    // Quadratic form x^T M x.
    double quad(const Vec& x) const;

    double max_abs_entry() const;

  private:
    static int slot_table(int i, int j) {
        // (0,0)(1,1)(2,2) -> 0,1,2 ; (0,1) -> 3 ; (0,2) -> 4 ; (1,2) -> 5
        if (i == j) return i;
        int lo = i < j ? i : j, hi = i < j ? j : i;
        return lo == 0 ? (hi == 1 ? 3 : 4) : 5;
    }
    int slot(int i, int j) const {
        check(i >= 0 && i < dim_ && j >= 0 && j < dim_, "SymMatrix: index out of range");
        return slot_table(i, j);
    }

    int dim_;
    std::array<double, 6> a_;
};

inline SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

// Matrix-vector product (uses the symmetric entries).
Vec apply(const SymMatrix& m, const Vec& x);

}  // namespace fblab
