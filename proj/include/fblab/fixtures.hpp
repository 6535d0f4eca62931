#pragma once

#include <string>
#include <vector>

#include "fblab/grid.hpp"
#include "fblab/operators.hpp"

namespace fblab {

// Closed-form reference profiles used as boundary data and as analytic
// oracles. dim = 0 means the fixture works in both dimensions. Thin fixtures
// are traces of the Signorini model and only make sense with solve_thin.
struct Fixture {
    std::string name;
    int dim = 0;
    bool thin = false;
    std::string formula;
};

const std::vector<Fixture>& fixture_registry();

bool is_fixture(const std::string& name);

// Evaluates the named fixture on the grid. The operator supplies the
// normalization gamma where the formula contains one; thin fixtures ignore it.
ScalarField make_fixture(const std::string& name, const Grid& g, const EllipticOperator& f);

// The quadratic fixtures have an exact Hessian; useful as a test oracle.
// Errors for fixtures without one.
SymMatrix fixture_hessian(const std::string& name, int dim, const EllipticOperator& f);

}  // namespace fblab
