#pragma once

#include "fblab/grid.hpp"
#include "fblab/operators.hpp"

namespace fblab {

// Tag for the normalized polynomial classes:
//   Q    p(x) = (1/2) x.Ax         with A >= 0, F(A) = 1
//   UQ   p(x) = (1/2) x.Ax + b.x   with A >= 0, F(A) = 1
enum class PolyClass { None, Q, UQ };

struct QuadraticPoly {
    SymMatrix A;
    Vec b = {0, 0, 0};
    PolyClass tag = PolyClass::None;

    double eval(const Vec& x) const { return 0.5 * A.quad(x) + dot(b, x, A.dim()); }
    Vec grad(const Vec& x) const { return add(apply(A, x), b); }
};

// Least-squares quadratic model of u on the nodes of B_r(center), in
// coordinates relative to center. With constrain_origin the constant term is
// forced to zero; otherwise it is fitted and discarded. Requires r >= 4h.
QuadraticPoly fit_quadratic(const ScalarField& u, const Vec& center, double r,
                            bool constrain_origin);

// Nearest member of Q or UQ: clamp M to the positive cone, then scale by the
// root s in [0.5, 2] of F(s M+) = 1. For Q the linear part is dropped; for UQ
// it is kept. Errors if the bracket does not contain the root.
QuadraticPoly project_to_class(const SymMatrix& m, const Vec& b, const EllipticOperator& f,
                               PolyClass target);

struct ApproxCertificate {
    QuadraticPoly p;
    double eps = 0;
    double r = 0;
    // min over interior nodes of B_r(center) of the smallest Hessian eigenvalue
    double convexity_floor = 0;
    // Membership in the approximation class: the sup bound holds by
    // construction of eps, and convexity_floor >= -c0 * eps with
    // c0 = 1 / (16 lambda^2).
    bool in_class = false;

    bool in_class_with_slack(double c0, double slack) const {
        return convexity_floor >= -c0 * eps - slack;
    }
};

// Measures eps = sup_{B_r(center)} |u - p| / r^2 and the convexity floor of u
// over the same ball, and flags class membership. p must be tagged Q or UQ.
ApproxCertificate certify(const ScalarField& u, const QuadraticPoly& p, const Vec& center,
                          double r, const EllipticOperator& f);

// For p in UQ with Hessian eigenpairs (a_j, v_j) and b_j = v_j . b: checks
// |b_j| <= sqrt(2 a_j eps) for every j with a_j >= 2 eps.
bool linear_bound_check(const QuadraticPoly& p, double eps);

}  // namespace fblab
