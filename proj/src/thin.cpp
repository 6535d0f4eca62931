#include "fblab/thin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fblab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

ThinSolution solve_thin(const ScalarField& boundary) {
    const Grid& g = boundary.grid();
    check(g.dim == 2, "solve_thin: only the planar problem is supported");
    const int n = g.n;
    const int line = (n - 1) / 2;  // nodes with x1 = 0
    // Warm start from the interior values as given (the boundary row/column
    // data is what defines the problem); clamp the constrained line so the
    // initial iterate is feasible.
    std::vector<double> u = boundary.values();
    check(u[std::size_t(line) * n] >= -1e-12 && u[std::size_t(line) * n + n - 1] >= -1e-12,
          "solve_thin: boundary data negative on the constraint line");
    for (int j = 1; j < n - 1; ++j) {
        std::size_t k = std::size_t(line) * n + j;
        u[k] = std::max(u[k], 0.0);
    }

    // Projected SOR on the 5-point Laplacian; the constraint u >= 0 applies
    // only on the line {x1 = 0}.
    double omega = 2.0 / (1.0 + std::sin(kPi / double(n - 1)));
    double scale = 0;
    for (double b : boundary.values()) scale = std::max(scale, std::abs(b));
    const double tol = 1e-8 * (1.0 + scale);
    const int block = 32;
    const int max_sweeps = 200000;
    int sweeps = 0;
    while (sweeps < max_sweeps) {
        for (int b = 0; b < block; ++b, ++sweeps) {
            for (int i = 1; i < n - 1; ++i) {
                const bool constrained = (i == line);
                std::size_t row = std::size_t(i) * n;
                for (int j = 1; j < n - 1; ++j) {
                    std::size_t k = row + j;
                    double avg = 0.25 * (u[k - 1] + u[k + 1] + u[k - n] + u[k + n]);
                    double next = u[k] + omega * (avg - u[k]);
                    if (constrained && next < 0) next = 0;
                    u[k] = next;
                }
            }
        }
        // Residual of the complementarity system: harmonic off the active
        // line nodes, subharmonic defect nonpositive on them.
        double res = 0;
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) {
                std::size_t k = std::size_t(i) * n + j;
                double lap = u[k - 1] + u[k + 1] + u[k - n] + u[k + n] - 4.0 * u[k];
                if (i == line && u[k] <= 0.0)
                    res = std::max(res, lap);  // only Delta v <= 0 required
                else
                    res = std::max(res, std::abs(lap));
            }
        res /= g.h() * g.h();
        if (res <= tol) {
            ThinSolution sol{ScalarField(g, std::move(u)), sweeps, res};
            return sol;
        }
    }
    fail("solve_thin: did not converge within the sweep budget");
}

FrequencyProfile frequency(const ScalarField& v, const Vec& center,
                           const std::vector<double>& radii) {
    const Grid& g = v.grid();
    check(g.dim == 2, "frequency: only the planar problem is supported");
    check(std::abs(v.sample(center)) <= 1e-6 * (1.0 + sup_norm_ball(v, center, g.half_width / 2)),
          "frequency: field does not vanish at the center");
    const double h = g.h();

    // Precompute |grad v|^2 at interior nodes.
    std::vector<double> grad2(g.total(), 0.0);
    for (std::size_t i = 0; i < g.total(); ++i) {
        NodeIndex idx = g.unflatten(i);
        if (!g.has_margin(idx, 1)) continue;
        Vec gr = gradient_at(v, idx);
        grad2[i] = dot(gr, gr, 2);
    }

    FrequencyProfile prof;
    for (double r : radii) {
        check(r > 4 * h && r < g.half_width, "frequency: radius out of range");
        // Volume integral with antialiased cell weights: a node's cell counts
        // in proportion to its estimated overlap with the ball.
        double dirichlet = 0;
        for (std::size_t i = 0; i < g.total(); ++i) {
            NodeIndex idx = g.unflatten(i);
            if (!g.has_margin(idx, 1)) continue;
            double dist = norm(sub(g.point(idx), center), 2);
            double w = std::clamp((r - dist) / h + 0.5, 0.0, 1.0);
            if (w > 0) dirichlet += w * grad2[i];
        }
        dirichlet *= h * h;

        // Circle integral of v^2 by the trapezoid rule on interpolated values.
        int m = std::max(64, int(std::ceil(4.0 * kPi * r / h)));
        double boundary = 0;
        for (int k = 0; k < m; ++k) {
            double th = 2.0 * kPi * double(k) / double(m);
            Vec x = {center[0] + r * std::cos(th), center[1] + r * std::sin(th), 0.0};
            double val = v.sample(x);
            boundary += val * val;
        }
        boundary *= 2.0 * kPi * r / double(m);
        check(boundary > 0, "frequency: boundary integral vanishes");
        prof.radii.push_back(r);
        prof.value.push_back(r * dirichlet / boundary);
    }
    return prof;
}

ThinClass classify_thin(const FrequencyProfile& profile) {
    check(!profile.radii.empty(), "classify_thin: empty profile");
    std::size_t arg = 0;
    for (std::size_t k = 1; k < profile.radii.size(); ++k)
        if (profile.radii[k] < profile.radii[arg]) arg = k;
    double n0 = profile.value[arg];
    if (n0 < 1.25) return ThinClass::Possibility1;
    if (n0 < 1.75) return ThinClass::Possibility2;
    return ThinClass::Possibility3;
}

}  // namespace fblab
