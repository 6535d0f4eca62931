#pragma once

#include <vector>

#include "fblab/grid.hpp"

namespace fblab {

// Nodes where the solution sits on the obstacle (u <= h^2), and the subset
// with at least one axis neighbor off the obstacle.
struct ContactSet {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> boundary_nodes;
};

ContactSet extract_contact(const ScalarField& u);

// Minimal width over sampled directions of the node set E restricted to
// B_r(center): min_e (max_{x in E} x.e - min_{x in E} x.e). Directions are
// 720 uniform angles in 2d and a 2000-point Fibonacci sphere in 3d.
// A singleton has width 0; an empty restriction errors.
double min_diameter(const Grid& g, const std::vector<std::size_t>& nodes, const Vec& center,
                    double r);

struct ThicknessProfile {
    std::vector<double> radii;
    std::vector<double> delta;  // min_diameter(E intersect B_r) / r
};

ThicknessProfile thickness_profile(const Grid& g, const std::vector<std::size_t>& nodes,
                                   const Vec& center, const std::vector<double>& radii);

enum class PointClass { Regular, Singular };

struct ClassifyReport {
    PointClass classification = PointClass::Regular;
    double r_min = 0;             // smallest reliable radius, 16h
    double delta_rmin = 0;        // thickness at r_min
    double quadratic_residual = 0;  // RMS residual of the origin-constrained fit
    double halfspace_residual = 0;  // best half-space template RMS residual
};

// Classifies a free-boundary node: Singular when the contact set is thin at
// scale 16h (delta < 0.2) and a quadratic model fits at least as well as the
// best half-space template; Regular otherwise.
ClassifyReport classify_point(const ScalarField& u, const Vec& x0);

// Direction samplers shared with the template fits.
std::vector<Vec> sample_directions(int dim);

}  // namespace fblab
