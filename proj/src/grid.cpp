#include "fblab/grid.hpp"

#include <algorithm>
#include <cmath>

namespace fblab {

Grid::Grid(int dim_, int n_, double half_width_) : dim(dim_), n(n_), half_width(half_width_) {
    check(dim == 2 || dim == 3, "Grid: dim must be 2 or 3");
    check(n >= 17 && n % 2 == 1, "Grid: n must be odd and at least 17");
    check(half_width > 0, "Grid: half_width must be positive");
}

std::size_t Grid::total() const {
    std::size_t t = 1;
    for (int k = 0; k < dim; ++k) t *= std::size_t(n);
    return t;
}

std::size_t Grid::flatten(const NodeIndex& idx) const {
    std::size_t flat = 0;
    for (int k = 0; k < dim; ++k) {
        check(idx[k] >= 0 && idx[k] < n, "Grid: node index out of range");
        flat = flat * std::size_t(n) + std::size_t(idx[k]);
    }
    return flat;
}

NodeIndex Grid::unflatten(std::size_t flat) const {
    NodeIndex idx = {0, 0, 0};
    for (int k = dim - 1; k >= 0; --k) {
        idx[k] = int(flat % std::size_t(n));
        flat /= std::size_t(n);
    }
    return idx;
}

Vec Grid::point(const NodeIndex& idx) const {
    Vec x = {0, 0, 0};
    for (int k = 0; k < dim; ++k) x[k] = -half_width + idx[k] * h();
    return x;
}

NodeIndex Grid::nearest(const Vec& x) const {
    NodeIndex idx = {0, 0, 0};
    for (int k = 0; k < dim; ++k) {
        int i = int(std::lround((x[k] + half_width) / h()));
        idx[k] = std::clamp(i, 0, n - 1);
    }
    return idx;
}

bool Grid::is_boundary(const NodeIndex& idx) const {
    for (int k = 0; k < dim; ++k)
        if (idx[k] == 0 || idx[k] == n - 1) return true;
    return false;
}

bool Grid::has_margin(const NodeIndex& idx, int margin) const {
    for (int k = 0; k < dim; ++k)
        if (idx[k] < margin || idx[k] > n - 1 - margin) return false;
    return true;
}

ScalarField::ScalarField(const Grid& g, std::vector<double> values)
    : grid_(g), values_(std::move(values)) {
    check(values_.size() == g.total(), "ScalarField: value count does not match grid");
}

namespace {

// Lagrange cubic weights for the 4 nodes at offsets {-1, 0, 1, 2} relative to
// the cell containing t in [0, 1) (t measured from node 0).
void cubic_weights(double t, double w[4]) {
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

}  // namespace

double ScalarField::sample(const Vec& x) const {
    const Grid& g = grid_;
    const double h = g.h();
    int base[3] = {0, 0, 0};
    double w[3][4];
    for (int k = 0; k < g.dim; ++k) {
        double s = (x[k] + g.half_width) / h;
        check(s >= -1e-9 && s <= double(g.n - 1) + 1e-9, "sample: point outside the box");
        s = std::clamp(s, 0.0, double(g.n - 1));
        int cell = std::min(int(s), g.n - 2);
        // Shift the 4-point stencil inward near the faces; the interpolation
        // stays cubic, only the node set changes.
        int b = std::clamp(cell - 1, 0, g.n - 4);
        double t = s - double(b + 1);
        cubic_weights(t, w[k]);
        base[k] = b;
    }
    double acc = 0;
    int lim2 = g.dim == 3 ? 4 : 1;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            for (int c = 0; c < lim2; ++c) {
                NodeIndex idx = {base[0] + a, base[1] + b, g.dim == 3 ? base[2] + c : 0};
                double weight = w[0][a] * w[1][b] * (g.dim == 3 ? w[2][c] : 1.0);
                acc += weight * values_[g.flatten(idx)];
            }
    return acc;
}

SymMatrix hessian_at(const ScalarField& u, const NodeIndex& idx) {
    const Grid& g = u.grid();
    check(g.has_margin(idx, 1), "hessian_at: node too close to the boundary");
    const double h2 = g.h() * g.h();
    SymMatrix m(g.dim);
    double center = u.at(idx);
    for (int k = 0; k < g.dim; ++k) {
        NodeIndex p = idx, q = idx;
        p[k] += 1;
        q[k] -= 1;
        m.set(k, k, (u.at(p) - 2.0 * center + u.at(q)) / h2);
    }
    for (int k = 0; k < g.dim; ++k)
        for (int l = k + 1; l < g.dim; ++l) {
            NodeIndex pp = idx, mm = idx, pm = idx, mp = idx;
            pp[k] += 1; pp[l] += 1;
            mm[k] -= 1; mm[l] -= 1;
            pm[k] += 1; pm[l] -= 1;
            mp[k] -= 1; mp[l] += 1;
            m.set(k, l, (u.at(pp) + u.at(mm) - u.at(pm) - u.at(mp)) / (4.0 * h2));
        }
    return m;
}

Vec gradient_at(const ScalarField& u, const NodeIndex& idx) {
    const Grid& g = u.grid();
    check(g.has_margin(idx, 1), "gradient_at: node too close to the boundary");
    Vec grad = {0, 0, 0};
    for (int k = 0; k < g.dim; ++k) {
        NodeIndex p = idx, q = idx;
        p[k] += 1;
        q[k] -= 1;
        grad[k] = (u.at(p) - u.at(q)) / (2.0 * g.h());
    }
    return grad;
}

double sup_norm_ball(const ScalarField& u, const Vec& center, double r) {
    const Grid& g = u.grid();
    double best = -1.0;
    const double r2 = r * r;
    for (std::size_t i = 0; i < g.total(); ++i) {
        Vec d = sub(g.point(i), center);
        if (dot(d, d, g.dim) <= r2) best = std::max(best, std::abs(u.at(i)));
    }
    check(best >= 0, "sup_norm_ball: no grid node inside the ball (r < h?)");
    return best;
}

RescaleResult rescale(const ScalarField& u, const Vec& center, double r, const Grid& target) {
    const Grid& src = u.grid();
    check(target.dim == src.dim, "rescale: dimension mismatch");
    check(r > 0, "rescale: radius must be positive");
    // Every target node x maps to center + r x; require the whole sampled box
    // to sit inside the source domain.
    for (int k = 0; k < src.dim; ++k) {
        double lo = center[k] - r * target.half_width;
        double hi = center[k] + r * target.half_width;
        check(lo >= -src.half_width - 1e-12 && hi <= src.half_width + 1e-12,
              "rescale: sampled box leaves the source domain");
    }
    RescaleResult out{ScalarField(target), 0.0};
    const double inv_r2 = 1.0 / (r * r);
    for (std::size_t i = 0; i < target.total(); ++i) {
        Vec x = target.point(i);
        out.field.values()[i] = u.sample(add(center, scaled(x, r))) * inv_r2;
    }
    // Heuristic interpolation error: cubic interpolation error is bounded by
    // a multiple of the fourth difference of the source data; report the
    // worst fourth difference over the sampled region, scaled by 1/r^2.
    double max_d4 = 0;
    for (std::size_t i = 0; i < src.total(); ++i) {
        NodeIndex idx = src.unflatten(i);
        if (!src.has_margin(idx, 2)) continue;
        Vec x = src.point(idx);
        Vec rel = sub(x, center);
        if (norm(rel, src.dim) > r * target.half_width * 1.8) continue;
        for (int k = 0; k < src.dim; ++k) {
            NodeIndex a = idx, b = idx, c = idx, d = idx;
            a[k] -= 2; b[k] -= 1; c[k] += 1; d[k] += 2;
            double d4 = u.at(a) - 4 * u.at(b) + 6 * u.at(idx) - 4 * u.at(c) + u.at(d);
            max_d4 = std::max(max_d4, std::abs(d4));
        }
    }
    out.interp_error = max_d4 / 16.0 * inv_r2;
    return out;
}

}  // namespace fblab
