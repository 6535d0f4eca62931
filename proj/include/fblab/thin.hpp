#pragma once

#include <vector>

#include "fblab/grid.hpp"

namespace fblab {

// Two-dimensional thin-obstacle (Signorini) problem: v superharmonic in the
// box, harmonic off {v > 0} union {x1 != 0}, with v >= 0 on the line
// {x1 = 0}. Boundary data is Dirichlet on the box.
struct ThinSolution {
    ScalarField v;
    int iterations = 0;
    double residual = 0;  // max |Delta_h v| over nodes where the equation holds
};

ThinSolution solve_thin(const ScalarField& boundary);

struct FrequencyProfile {
    std::vector<double> radii;
    std::vector<double> value;  // N(r) = r * int_{B_r} |grad v|^2 / int_{dB_r} v^2
};

// Almgren-type frequency computed with a volume midpoint rule (cells are
// weighted by their overlap with the ball) and a trapezoid rule on the
// circle with cubic sampling. Requires v(0) ~ 0 and radii inside the box.
FrequencyProfile frequency(const ScalarField& v, const Vec& center,
                           const std::vector<double>& radii);

enum class ThinClass { Possibility1, Possibility2, Possibility3 };

// Bands on N at the smallest radius: below 1.25, in [1.25, 1.75), or >= 1.75.
ThinClass classify_thin(const FrequencyProfile& profile);

}  // namespace fblab
