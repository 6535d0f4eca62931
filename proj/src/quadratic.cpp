#include "fblab/quadratic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fblab {

QuadraticPoly fit_quadratic(const ScalarField& u, const Vec& center, double r,
                            bool constrain_origin) {
    const Grid& g = u.grid();
    check(r >= 4.0 * g.h(), "fit_quadratic: r must be at least 4h");
    const int d = g.dim;
    // Unknowns: upper-triangular A (d(d+1)/2), b (d), optional constant.
    const int na = d * (d + 1) / 2;
    const int nb = d;
    const int nc = constrain_origin ? 0 : 1;
    const int m = na + nb + nc;

    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd row(m);
    const double r2 = r * r;
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec x = sub(g.point(i), center);
        if (dot(x, x, d) > r2) continue;
        int c = 0;
        for (int a = 0; a < d; ++a)
            for (int bcol = a; bcol < d; ++bcol)
                row(c++) = (a == bcol) ? 0.5 * x[a] * x[a] : x[a] * x[bcol];
        for (int a = 0; a < d; ++a) row(c++) = x[a];
        if (!constrain_origin) row(c++) = 1.0;
        ata.noalias() += row * row.transpose();
        atb.noalias() += row * u.at(i);
        ++count;
    }
    check(count >= std::size_t(m), "fit_quadratic: not enough nodes in the ball");

    Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        fail("fit_quadratic: rank-deficient normal equations");
    // Guard against near-singular moment matrices (degenerate node sets).
    Eigen::VectorXd diag = ldlt.vectorD();
    if (diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff()))
        fail("fit_quadratic: rank-deficient normal equations");
    Eigen::VectorXd sol = ldlt.solve(atb);

    QuadraticPoly p;
    p.A = SymMatrix(d);
    int c = 0;
    for (int a = 0; a < d; ++a)
        for (int bcol = a; bcol < d; ++bcol) p.A.set(a, bcol, sol(c++));
    for (int a = 0; a < d; ++a) p.b[a] = sol(c++);
    p.tag = PolyClass::None;
    return p;
}

QuadraticPoly project_to_class(const SymMatrix& m, const Vec& b, const EllipticOperator& f,
                               PolyClass target) {
    check(target == PolyClass::Q || target == PolyClass::UQ,
          "project_to_class: target must be Q or UQ");
    check(m.dim() == f.dim(), "project_to_class: dimension mismatch");
    // The projection is only meaningful near the constraint set.
    check(m.lambda_min() >= -0.1 - 1e-12,
          "project_to_class: matrix too far below the positive cone");
    SymMatrix mp = m.positive_part();
    check(mp.spectral_norm() > 1e-14, "project_to_class: zero positive part");

    // F(s M+) is strictly increasing in s; bisect on [0.5, 2].
    double lo = 0.5, hi = 2.0;
    double flo = f.evaluate(mp * lo) - 1.0;
    double fhi = f.evaluate(mp * hi) - 1.0;
    check(flo <= 0 && fhi >= 0, "project_to_class: root bracket failure on [0.5, 2]");
    double s = 1.0;
    for (int it = 0; it < 200; ++it) {
        s = 0.5 * (lo + hi);
        double fs = f.evaluate(mp * s) - 1.0;
        if (std::abs(fs) <= 1e-13) break;
        (fs < 0 ? lo : hi) = s;
        if (hi - lo < 1e-16) break;
    }

    QuadraticPoly p;
    p.A = mp * s;
    p.b = target == PolyClass::UQ ? b : Vec{0, 0, 0};
    p.tag = target;
    // Contract checks: PSD and normalized.
    check(p.A.lambda_min() >= -1e-10, "project_to_class: projected matrix not PSD");
    check(std::abs(f.evaluate(p.A) - 1.0) <= 1e-10, "project_to_class: normalization failed");
    return p;
}

ApproxCertificate certify(const ScalarField& u, const QuadraticPoly& p, const Vec& center,
                          double r, const EllipticOperator& f) {
    check(p.tag != PolyClass::None, "certify: polynomial must be tagged Q or UQ");
    const Grid& g = u.grid();
    check(r > 0, "certify: r must be positive");

    double sup = -1.0;
    double floor = std::numeric_limits<double>::infinity();
    const double r2 = r * r;
    for (std::size_t i = 0; i < g.total(); ++i) {
        NodeIndex idx = g.unflatten(i);
        Vec x = sub(g.point(idx), center);
        if (dot(x, x, g.dim) > r2) continue;
        sup = std::max(sup, std::abs(u.at(i) - p.eval(x)));
        if (g.has_margin(idx, 1)) floor = std::min(floor, hessian_at(u, idx).lambda_min());
    }
    check(sup >= 0, "certify: no grid node inside the ball");
    check(std::isfinite(floor), "certify: no interior node inside the ball");

    ApproxCertificate cert;
    cert.p = p;
    cert.r = r;
    cert.eps = sup / r2;
    cert.convexity_floor = floor;
    cert.in_class = floor >= -f.c0() * cert.eps - 1e-14;
    return cert;
}

bool linear_bound_check(const QuadraticPoly& p, double eps) {
    check(p.tag != PolyClass::None, "linear_bound_check: polynomial must be tagged");
    check(eps >= 0, "linear_bound_check: eps must be nonnegative");
    std::array<double, 3> vals;
    std::array<Vec, 3> vecs;
    p.A.eigen_system(vals, vecs);
    for (int j = 0; j < p.A.dim(); ++j) {
        if (vals[j] < 2.0 * eps) continue;
        double bj = dot(vecs[j], p.b, p.A.dim());
        if (std::abs(bj) > std::sqrt(2.0 * vals[j] * eps) + 1e-14) return false;
    }
    return true;
}

}  // namespace fblab
