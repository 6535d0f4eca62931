#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fblab/grid.hpp"
#include "fblab/operators.hpp"

namespace fblab {

// Node-activity threshold and PDE residual tolerance used throughout.
inline double tol_active(const Grid& g) { return g.h() * g.h(); }
inline double tol_pde(const Grid& g) { return 10.0 * g.h() * g.h(); }

enum class SolveMethod { Penalization, ProjectedSweep };
std::string method_name(SolveMethod m);

struct SolveReport {
    int iterations = 0;
    // Max complementarity defect: |F(D2u) - 1| at nodes with u > tol_active,
    // (F(D2u) - 1)+ at the remaining nodes.
    double residual = 0;
    double active_fraction = 0;
    SolveMethod method = SolveMethod::Penalization;
};

// General masked Dirichlet problem on a grid: nodes with fixed != 0 carry
// prescribed values, the rest are unknowns. All unknowns must have a full
// stencil (one cell of margin inside the box).
struct DirichletProblem {
    Grid grid;
    std::vector<std::uint8_t> fixed;
    std::vector<double> values;
    bool obstacle = false;  // enforce u >= 0 and F(D2u) = chi_{u>0}
};

// Box problem whose boundary values are read off the boundary nodes of
// `boundary` (interior values are ignored).
DirichletProblem box_problem(const ScalarField& boundary, bool obstacle);

std::pair<ScalarField, SolveReport> solve_dirichlet(const EllipticOperator& f,
                                                    const DirichletProblem& problem,
                                                    SolveMethod method);

// Obstacle problem F(D2u) = chi_{u>0}, u >= 0 on the box, with nonnegative
// Dirichlet data. Method (a) solves the penalized equation
// F(D2u) = 1 + min(u, 0)/delta by semismooth Newton with continuation in
// delta down to h^2; method (b) runs projected relaxation sweeps with a
// safeguarded per-node Newton and clamping at zero. Both are warm-started
// from coarser grids.
std::pair<ScalarField, SolveReport> solve_obstacle(const EllipticOperator& f,
                                                   const ScalarField& boundary,
                                                   SolveMethod method);

// Unconstrained comparison solve F(D2h) = 1 with the same boundary data.
// By the maximum principle h <= u for the obstacle solution u.
std::pair<ScalarField, SolveReport> solve_unconstrained(const EllipticOperator& f,
                                                        const ScalarField& boundary);

struct ComparisonReport {
    bool hypotheses_ok = false;
    std::string failed_hypothesis;
    double max_lower_violation = 0;  // max (phi - u)+ over the box
    double max_upper_violation = 0;  // max (u - psi)+ over the box
    bool pass = false;               // hypotheses hold and violations <= 10h^2
};

// Checks the two-sided comparison bound phi <= u <= psi for a sub-/super-pair:
// phi with F(D2phi) >= 1 on {phi > 0} and phi <= u on the boundary; psi >= 0
// with F(D2psi) <= 1 and psi >= u on the boundary.
ComparisonReport comparison_check(const EllipticOperator& f, const ScalarField& u,
                                  const ScalarField& phi, const ScalarField& psi);

}  // namespace fblab
