#pragma once

#include <cstddef>
#include <vector>

#include "fblab/sym_matrix.hpp"
#include "fblab/util.hpp"

namespace fblab {

using NodeIndex = std::array<int, 3>;

// Uniform node-centered grid on the box [-half_width, half_width]^dim.
// n is odd so the origin is a node. Flat storage is row-major with the last
// axis fastest.
struct Grid {
    int dim = 2;
    int n = 17;
    double half_width = 1.0;

    Grid() = default;
    Grid(int dim_, int n_, double half_width_);

    double h() const { return 2.0 * half_width / double(n - 1); }
    std::size_t total() const;

    std::size_t flatten(const NodeIndex& idx) const;
    NodeIndex unflatten(std::size_t flat) const;
    Vec point(const NodeIndex& idx) const;
    Vec point(std::size_t flat) const { return point(unflatten(flat)); }

    // Node whose coordinates are nearest to x.
    NodeIndex nearest(const Vec& x) const;

    bool is_boundary(const NodeIndex& idx) const;
    // True when idx is at least `margin` cells away from every box face.
    bool has_margin(const NodeIndex& idx, int margin) const;

    bool same_geometry(const Grid& o) const {
        return dim == o.dim && n == o.n && half_width == o.half_width;
    }
};

class ScalarField {
  public:
    ScalarField() : grid_(), values_(grid_.total(), 0.0) {}
    explicit ScalarField(const Grid& g, double fill = 0.0) : grid_(g), values_(g.total(), fill) {}
    ScalarField(const Grid& g, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double at(std::size_t flat) const { return values_[flat]; }
    double at(const NodeIndex& idx) const { return values_[grid_.flatten(idx)]; }
    double& at(std::size_t flat) { return values_[flat]; }
    double& at(const NodeIndex& idx) { return values_[grid_.flatten(idx)]; }

    // Evaluate with templated callable f(Vec) -> double over all nodes.
    template <class F>
    static ScalarField from_function(const Grid& g, F&& f) {
        ScalarField u(g);
        for (std::size_t i = 0; i < g.total(); ++i) u.values()[i] = f(g.point(i));
        return u;
    }

    // Tensor-product cubic (4-point Lagrange) interpolation. The point must
    // lie inside the box.
    double sample(const Vec& x) const;

  private:
    Grid grid_;
    std::vector<double> values_;
};

// Centered second differences: exact on quadratics, O(h^2) Taylor remainder
// on C^4 data. Requires one cell of margin around the node.
SymMatrix hessian_at(const ScalarField& u, const NodeIndex& idx);
Vec gradient_at(const ScalarField& u, const NodeIndex& idx);

// Max of |u| over nodes within Euclidean distance r of center.
// Errors when no node qualifies.
double sup_norm_ball(const ScalarField& u, const Vec& center, double r);

struct RescaleResult {
    ScalarField field;
    // Estimated interpolation error of the sampled values (heuristic bound
    // from fourth differences of the source, scaled by 1/r^2).
    double interp_error;
};

// Parabolic rescaling u_r(x) = u(center + r x) / r^2 sampled onto `target`.
// Every sample point must lie inside the source box.
RescaleResult rescale(const ScalarField& u, const Vec& center, double r, const Grid& target);

}  // namespace fblab
