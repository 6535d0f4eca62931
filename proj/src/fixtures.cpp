#include "fblab/fixtures.hpp"

#include <cmath>

#include "fblab/quadratic.hpp"

namespace fblab {

const std::vector<Fixture>& fixture_registry() {
    static const std::vector<Fixture> reg = {
        {"halfspace", 0, false, "(gamma_e/2) max(x.e1, 0)^2, the regular-point profile"},
        {"topstratum", 0, false, "(gamma_e/2) x1^2, rank-one quadratic vanishing on a hyperplane"},
        {"quadratic:iso", 0, false, "(gamma/2) |x|^2, isotropic member of Q"},
        {"quadratic:aniso", 0, false, "(1/2) x.Ax with distinct positive eigenvalues, F(A) = 1"},
        {"singular-perturbed", 2, false,
         "(gamma_e/2) x1^2 + 0.02 (x1^4 - 6 x1^2 x2^2 + x2^4), harmonic quartic bump"},
        {"zero", 0, false, "identically 0, full contact"},
        {"thin:linear", 2, true, "-x1, degree-1 Signorini profile (frequency 1)"},
        {"thin:threehalf", 2, true,
         "Re((x2 + i|x1|)^(3/2)), degree-3/2 Signorini profile (frequency 3/2)"},
        {"thin:quadratic", 2, true, "x1 x2, degree-2 Signorini profile (frequency 2)"},
    };
    return reg;
}

bool is_fixture(const std::string& name) {
    for (const Fixture& f : fixture_registry())
        if (f.name == name) return true;
    return false;
}

namespace {

SymMatrix aniso_hessian(const EllipticOperator& f) {
    SymMatrix m = SymMatrix::diag(f.dim(), {2.0, 1.0, 0.5});
    m = m * (1.0 / f.evaluate(m));  // projection bisects near F = 1
    return project_to_class(m, {0, 0, 0}, f, PolyClass::Q).A;
}

}  // namespace

ScalarField make_fixture(const std::string& name, const Grid& g, const EllipticOperator& f) {
    const Fixture* fx = nullptr;
    for (const Fixture& c : fixture_registry())
        if (c.name == name) fx = &c;
    check(fx != nullptr, "make_fixture: unknown fixture " + name);
    check(fx->dim == 0 || fx->dim == g.dim,
          "make_fixture: " + name + " is not available in this dimension");
    if (!fx->thin) check(f.dim() == g.dim, "make_fixture: operator dimension mismatch");

    if (name == "halfspace") {
        double ge = gamma_of(f, {1, 0, 0});
        return ScalarField::from_function(g, [ge](const Vec& x) {
            double s = std::max(x[0], 0.0);
            return 0.5 * ge * s * s;
        });
    }
    if (name == "topstratum") {
        double ge = gamma_of(f, {1, 0, 0});
        return ScalarField::from_function(
            g, [ge](const Vec& x) { return 0.5 * ge * x[0] * x[0]; });
    }
    if (name == "quadratic:iso") {
        double ga = gamma_of(f);
        int dim = g.dim;
        return ScalarField::from_function(
            g, [ga, dim](const Vec& x) { return 0.5 * ga * dot(x, x, dim); });
    }
    if (name == "quadratic:aniso") {
        SymMatrix a = aniso_hessian(f);
        return ScalarField::from_function(g, [a](const Vec& x) { return 0.5 * a.quad(x); });
    }
    if (name == "singular-perturbed") {
        double ge = gamma_of(f, {1, 0, 0});
        const double delta = 0.02;
        return ScalarField::from_function(g, [ge, delta](const Vec& x) {
            double x1 = x[0], x2 = x[1];
            double quartic = x1 * x1 * x1 * x1 - 6.0 * x1 * x1 * x2 * x2 + x2 * x2 * x2 * x2;
            return 0.5 * ge * x1 * x1 + delta * quartic;
        });
    }
    if (name == "zero") return ScalarField(g);
    if (name == "thin:linear")
        return ScalarField::from_function(g, [](const Vec& x) { return -x[0]; });
    if (name == "thin:threehalf") {
        return ScalarField::from_function(g, [](const Vec& x) {
            double r = std::hypot(x[0], x[1]);
            if (r == 0) return 0.0;
            double theta = std::atan2(std::abs(x[0]), x[1]);  // in [0, pi]
            return std::pow(r, 1.5) * std::cos(1.5 * theta);
        });
    }
    if (name == "thin:quadratic")
        return ScalarField::from_function(g, [](const Vec& x) { return x[0] * x[1]; });
    fail("make_fixture: unhandled fixture " + name);
}

SymMatrix fixture_hessian(const std::string& name, int dim, const EllipticOperator& f) {
    if (name == "topstratum" || name == "singular-perturbed") {
        double ge = gamma_of(f, {1, 0, 0});
        SymMatrix m(dim);
        m.set(0, 0, ge);
        return m;
    }
    if (name == "quadratic:iso") {
        double ga = gamma_of(f);
        return SymMatrix::diag(dim, {ga, ga, ga});
    }
    if (name == "quadratic:aniso") return aniso_hessian(f);
    fail("fixture_hessian: no exact Hessian for " + name);
}

}  // namespace fblab
