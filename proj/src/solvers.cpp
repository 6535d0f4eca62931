#include "fblab/solvers.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fblab {

std::string method_name(SolveMethod m) {
    return m == SolveMethod::Penalization ? "penalization" : "projected-sweep";
}

namespace {

// Raw-index view of a grid for the hot loops: strides, neighbor offsets and
// centered-stencil Hessians without bounds checks.
struct Topo {
    int d;
    int n;
    double h, h2;
    std::ptrdiff_t stride[3];

    explicit Topo(const Grid& g) : d(g.dim), n(g.n), h(g.h()), h2(g.h() * g.h()) {
        stride[d - 1] = 1;
        for (int k = d - 2; k >= 0; --k) stride[k] = stride[k + 1] * n;
        if (d == 2) stride[2] = 0;
    }

    SymMatrix hess(const std::vector<double>& u, std::size_t i) const {
        SymMatrix m(d);
        const double c = u[i];
        for (int k = 0; k < d; ++k)
            m.set(k, k, (u[i + stride[k]] - 2.0 * c + u[i - stride[k]]) / h2);
        for (int k = 0; k < d; ++k)
            for (int l = k + 1; l < d; ++l) {
                double v = (u[i + stride[k] + stride[l]] + u[i - stride[k] - stride[l]] -
                            u[i + stride[k] - stride[l]] - u[i - stride[k] + stride[l]]) /
                           (4.0 * h2);
                m.set(k, l, v);
            }
        return m;
    }
};

struct IndexMap {
    std::vector<std::size_t> free_nodes;
    std::vector<std::int64_t> free_id;  // -1 for fixed nodes
};

IndexMap build_index(const DirichletProblem& p) {
    IndexMap map;
    map.free_id.assign(p.grid.total(), -1);
    for (std::size_t i = 0; i < p.grid.total(); ++i) {
        if (p.fixed[i]) continue;
        check(p.grid.has_margin(p.grid.unflatten(i), 1),
              "solve_dirichlet: free node without a full stencil");
        map.free_id[i] = std::int64_t(map.free_nodes.size());
        map.free_nodes.push_back(i);
    }
    check(!map.free_nodes.empty(), "solve_dirichlet: no unknowns");
    return map;
}

// Complementarity defect of the discrete system (see SolveReport::residual).
double contract_residual(const EllipticOperator& f, const Topo& t,
                         const std::vector<double>& u, const IndexMap& map, bool obstacle,
                         double tol_act) {
    double worst = 0;
    for (std::size_t i : map.free_nodes) {
        double fv = f.evaluate(t.hess(u, i)) - 1.0;
        double defect = (obstacle && u[i] <= tol_act) ? std::max(fv, 0.0) : std::abs(fv);
        worst = std::max(worst, defect);
    }
    return worst;
}

double active_fraction_of(const std::vector<double>& u, double tol_act) {
    std::size_t active = 0;
    for (double v : u)
        if (v <= tol_act) ++active;
    return double(active) / double(u.size());
}

// ---------------------------------------------------------------------------
// Penalized semismooth Newton.
//
// Solves G(u) = F(D2u) - 1 - min(u, 0)/delta = 0 on the free nodes with a
// sparse-LU Newton iteration and a residual line search, continuing in delta.
// The unconstrained equation is the same system without the penalty term.
// ---------------------------------------------------------------------------

struct NewtonWorkspace {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analyzed = false;
};

double penalized_residual(const EllipticOperator& f, const Topo& t,
                          const std::vector<double>& u, const IndexMap& map, bool obstacle,
                          double delta, Eigen::VectorXd& g_out) {
    double worst = 0;
    for (std::size_t k = 0; k < map.free_nodes.size(); ++k) {
        std::size_t i = map.free_nodes[k];
        double g = f.evaluate(t.hess(u, i)) - 1.0;
        if (obstacle && u[i] < 0) g -= u[i] / delta;
        g_out(Eigen::Index(k)) = g;
        worst = std::max(worst, std::abs(g));
    }
    return worst;
}

int newton_solve(const EllipticOperator& f, const Topo& t, const IndexMap& map,
                 std::vector<double>& u, bool obstacle, double delta, double tol,
                 int max_iterations) {
    const std::size_t nfree = map.free_nodes.size();
    Eigen::VectorXd g(nfree), g_trial(nfree);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nfree * std::size_t(t.d == 2 ? 9 : 19));
    NewtonWorkspace ws;

    double res = penalized_residual(f, t, u, map, obstacle, delta, g);
    int it = 0;
    while (res > tol && it < max_iterations) {
        ++it;
        trip.clear();
        for (std::size_t k = 0; k < nfree; ++k) {
            std::size_t i = map.free_nodes[k];
            SymMatrix coeff = f.derivative(t.hess(u, i));
            double diag = 0;
            for (int a = 0; a < t.d; ++a) {
                double w = coeff(a, a) / t.h2;
                diag += -2.0 * w;
                for (int s = -1; s <= 1; s += 2) {
                    std::size_t j = std::size_t(std::ptrdiff_t(i) + s * t.stride[a]);
                    if (map.free_id[j] >= 0)
                        trip.emplace_back(int(k), int(map.free_id[j]), w);
                }
            }
            for (int a = 0; a < t.d; ++a)
                for (int b = a + 1; b < t.d; ++b) {
                    double w = coeff(a, b) / (2.0 * t.h2);
                    const std::ptrdiff_t offs[4] = {t.stride[a] + t.stride[b],
                                                    -t.stride[a] - t.stride[b],
                                                    t.stride[a] - t.stride[b],
                                                    -t.stride[a] + t.stride[b]};
                    const double sgn[4] = {1, 1, -1, -1};
                    for (int q = 0; q < 4; ++q) {
                        std::size_t j = std::size_t(std::ptrdiff_t(i) + offs[q]);
                        if (map.free_id[j] >= 0)
                            trip.emplace_back(int(k), int(map.free_id[j]), sgn[q] * w);
                    }
                }
            if (obstacle && u[i] < 0) diag -= 1.0 / delta;
            trip.emplace_back(int(k), int(k), diag);
        }
        Eigen::SparseMatrix<double> jac{Eigen::Index(nfree), Eigen::Index(nfree)};
        jac.setFromTriplets(trip.begin(), trip.end());
        if (!ws.analyzed) {
            ws.lu.analyzePattern(jac);
            ws.analyzed = true;
        }
        ws.lu.factorize(jac);
        if (ws.lu.info() != Eigen::Success) fail("newton_solve: singular Jacobian");
        Eigen::VectorXd step = ws.lu.solve(-g);

        // Armijo backtracking on the Euclidean merit; the Newton direction of
        // the slant derivative is always a descent direction for it, unlike
        // for the sup norm, which penalty-set flips can push up transiently.
        double merit = g.norm();
        double alpha = 1.0;
        std::vector<double> trial = u;
        double r = res;
        bool accepted = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            for (std::size_t k = 0; k < nfree; ++k)
                trial[map.free_nodes[k]] = u[map.free_nodes[k]] + alpha * step(Eigen::Index(k));
            r = penalized_residual(f, t, trial, map, obstacle, delta, g_trial);
            if (std::isfinite(r) && g_trial.norm() <= (1.0 - 1e-4 * alpha) * merit) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) fail("newton_solve: line search stalled");
        u.swap(trial);
        g.swap(g_trial);
        res = r;
    }
    if (res > tol) fail("newton_solve: did not converge");
    return it;
}

int run_penalization(const EllipticOperator& f, const DirichletProblem& p,
                     std::vector<double>& u, double delta_start) {
    check(f.smooth(), "penalization requires a differentiable operator; use projected sweeps");
    Topo t(p.grid);
    IndexMap map = build_index(p);
    const double h2 = t.h2;
    double newton_tol = std::max(1e-3 * h2, 1e-12);
    int total_iters = 0;
    if (!p.obstacle) {
        total_iters = newton_solve(f, t, map, u, false, 0, newton_tol, 60);
    } else {
        double delta = delta_start;
        while (true) {
            total_iters += newton_solve(f, t, map, u, true, delta, newton_tol, 60);
            if (delta <= h2 * (1 + 1e-12)) break;
            delta = std::max(delta / 4.0, h2);
        }

        // Active-set polish: the penalized contact values sit near -delta, so
        // pin them to zero exactly, re-solve the equality system on the rest,
        // and exchange misclassified nodes until the split is consistent.
        DirichletProblem q = p;
        for (std::size_t i : map.free_nodes)
            if (u[i] <= 0) {
                q.fixed[i] = 1;
                q.values[i] = 0;
                u[i] = 0;
            }
        for (int round = 0; round < 12; ++round) {
            bool any_free = false;
            for (std::size_t i : map.free_nodes) any_free = any_free || !q.fixed[i];
            if (any_free) {
                IndexMap qmap = build_index(q);
                total_iters += newton_solve(f, t, qmap, u, false, 0, newton_tol, 60);
            }
            int changes = 0;
            for (std::size_t i : map.free_nodes) {
                if (!q.fixed[i] && u[i] < 0) {
                    q.fixed[i] = 1;
                    q.values[i] = 0;
                    u[i] = 0;
                    ++changes;
                } else if (q.fixed[i] && !p.fixed[i] &&
                           f.evaluate(t.hess(u, i)) - 1.0 > 10.0 * newton_tol) {
                    q.fixed[i] = 0;
                    ++changes;
                }
            }
            if (changes == 0) break;
        }
        for (std::size_t i : map.free_nodes) u[i] = std::max(u[i], 0.0);
    }
    return total_iters;
}

// ---------------------------------------------------------------------------
// Projected relaxation sweeps.
//
// Each visit solves the scalar equation F(D2u)(node) = 1 in the center value
// (monotone decreasing, solved by safeguarded Newton or, for the non-smooth
// Pucci kinds, by bracketed bisection), over-relaxes, and clamps at zero when
// the obstacle is active.
// ---------------------------------------------------------------------------

struct NodeEquation {
    const EllipticOperator* f;
    const Topo* t;
    SymMatrix m;  // scratch: Hessian as a function of the center value

    // Build the x-independent part at node i, returning the axis sums.
    void load(const std::vector<double>& u, std::size_t i, double s_axis[3]) {
        const Topo& tp = *t;
        m = SymMatrix(tp.d);
        for (int k = 0; k < tp.d; ++k) s_axis[k] = u[i + tp.stride[k]] + u[i - tp.stride[k]];
        for (int k = 0; k < tp.d; ++k)
            for (int l = k + 1; l < tp.d; ++l) {
                double v = (u[i + tp.stride[k] + tp.stride[l]] +
                            u[i - tp.stride[k] - tp.stride[l]] -
                            u[i + tp.stride[k] - tp.stride[l]] -
                            u[i - tp.stride[k] + tp.stride[l]]) /
                           (4.0 * tp.h2);
                m.set(k, l, v);
            }
    }

    double g(double x, const double s_axis[3]) {
        for (int k = 0; k < t->d; ++k) m.set(k, k, (s_axis[k] - 2.0 * x) / t->h2);
        return f->evaluate(m) - 1.0;
    }

    // Root of g: monotone decreasing in x.
    double solve(double x0, const double s_axis[3]) {
        if (f->kind() == OperatorKind::ScaledTrace) {
            // g is affine with slope -2d/h^2: one exact step.
            return x0 + g(x0, s_axis) * t->h2 / (2.0 * t->d);
        }
        if (f->smooth()) {
            double x = x0;
            for (int it = 0; it < 30; ++it) {
                double gv = g(x, s_axis);
                if (std::abs(gv) < 1e-13) break;
                double slope = -2.0 / t->h2 * f->derivative(m).trace();
                x -= gv / slope;
            }
            return x;
        }
        // Non-smooth kinds: expand a bracket, then bisect.
        double step = t->h2;
        double lo = x0, hi = x0;
        double glo = g(lo, s_axis);
        while (glo < 0) { lo -= step; step *= 2; glo = g(lo, s_axis); }
        step = t->h2;
        double ghi = g(hi, s_axis);
        while (ghi > 0) { hi += step; step *= 2; ghi = g(hi, s_axis); }
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            if (g(mid, s_axis) > 0) lo = mid; else hi = mid;
            if (hi - lo < 1e-14 * (1 + std::abs(hi))) break;
        }
        return 0.5 * (lo + hi);
    }
};

int run_sweeps(const EllipticOperator& f, const DirichletProblem& p, std::vector<double>& u) {
    Topo t(p.grid);
    IndexMap map = build_index(p);
    const double tol_act = tol_active(p.grid);
    const double target = 0.45 * tol_pde(p.grid);
    // SOR factor tuned to the Laplacian on this box; safeguarded below.
    double omega = 2.0 / (1.0 + std::sin(3.14159265358979323846 * t.h / (2.0 * p.grid.half_width)));
    NodeEquation eq{&f, &t, SymMatrix(t.d)};
    double s_axis[3];

    const int block = 24;
    const int max_sweeps = 60000;
    double prev_res = std::numeric_limits<double>::infinity();
    int sweeps = 0;
    while (sweeps < max_sweeps) {
        for (int b = 0; b < block && sweeps < max_sweeps; ++b, ++sweeps) {
            bool forward = (sweeps % 2) == 0;
            std::size_t nfree = map.free_nodes.size();
            for (std::size_t q = 0; q < nfree; ++q) {
                std::size_t i = map.free_nodes[forward ? q : nfree - 1 - q];
                eq.load(u, i, s_axis);
                double root = eq.solve(u[i], s_axis);
                double next = u[i] + omega * (root - u[i]);
                if (p.obstacle && next < 0) next = 0;
                u[i] = next;
            }
        }
        double res = contract_residual(f, t, u, map, p.obstacle, tol_act);
        if (res <= target) return sweeps;
        if (res > prev_res && omega > 1.0) omega = 1.0 + 0.8 * (omega - 1.0);
        prev_res = res;
    }
    fail("projected sweeps did not converge within the sweep budget");
}

// ---------------------------------------------------------------------------

std::pair<ScalarField, SolveReport> solve_masked(const EllipticOperator& f,
                                                 const DirichletProblem& p, SolveMethod method) {
    check(f.dim() == p.grid.dim, "solve: operator dimension does not match the grid");
    check(p.fixed.size() == p.grid.total() && p.values.size() == p.grid.total(),
          "solve: mask/value arrays do not match the grid");
    std::vector<double> u(p.grid.total(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i)
        if (p.fixed[i]) u[i] = p.values[i];
    if (p.obstacle) {
        for (std::size_t i = 0; i < u.size(); ++i)
            if (p.fixed[i])
                check(p.values[i] >= -1e-12, "solve_obstacle: negative boundary data");
    }

    SolveReport rep;
    rep.method = method;
    if (method == SolveMethod::Penalization)
        rep.iterations = run_penalization(f, p, u, 1e-2);
    else
        rep.iterations = run_sweeps(f, p, u);

    Topo t(p.grid);
    IndexMap map = build_index(p);
    rep.residual = contract_residual(f, t, u, map, p.obstacle, tol_active(p.grid));
    rep.active_fraction = active_fraction_of(u, tol_active(p.grid));
    return {ScalarField(p.grid, std::move(u)), rep};
}

// Coarsen a box problem by dropping every other node (grid sizes 2k+1).
bool can_coarsen(const Grid& g) { return (g.n - 1) % 2 == 0 && (g.n - 1) / 2 + 1 >= 17; }

Grid coarse_grid(const Grid& g) { return Grid(g.dim, (g.n - 1) / 2 + 1, g.half_width); }

ScalarField restrict_boundary(const ScalarField& fine, const Grid& cg) {
    ScalarField out(cg);
    for (std::size_t i = 0; i < cg.total(); ++i) {
        NodeIndex ci = cg.unflatten(i);
        NodeIndex fi = {2 * ci[0], 2 * ci[1], fine.grid().dim == 3 ? 2 * ci[2] : 0};
        out.values()[i] = fine.at(fi);
    }
    return out;
}

std::pair<ScalarField, SolveReport> solve_box_nested(const EllipticOperator& f,
                                                     const ScalarField& boundary, bool obstacle,
                                                     SolveMethod method) {
    const Grid& g = boundary.grid();
    DirichletProblem p = box_problem(boundary, obstacle);
    if (!can_coarsen(g)) return solve_masked(f, p, method);

    // Solve the coarse problem first and prolong as a warm start.
    auto [coarse_u, coarse_rep] = solve_box_nested(f, restrict_boundary(boundary, coarse_grid(g)),
                                                   obstacle, method);
    ScalarField init = rescale(coarse_u, {0, 0, 0}, 1.0, g).field;

    std::vector<double> u = init.values();
    for (std::size_t i = 0; i < g.total(); ++i)
        if (p.fixed[i]) u[i] = p.values[i];
    if (obstacle)
        for (double& v : u) v = std::max(v, 0.0);

    SolveReport rep;
    rep.method = method;
    if (method == SolveMethod::Penalization) {
        // The prolonged solution already satisfies the fine system to O(h^2);
        // continue the penalty from the coarse grid's delta.
        double delta_start = obstacle ? 4.0 * g.h() * g.h() : 0.0;
        rep.iterations = coarse_rep.iterations + run_penalization(f, p, u, delta_start);
    } else {
        rep.iterations = coarse_rep.iterations + run_sweeps(f, p, u);
    }
    Topo t(g);
    IndexMap map = build_index(p);
    rep.residual = contract_residual(f, t, u, map, obstacle, tol_active(g));
    rep.active_fraction = active_fraction_of(u, tol_active(g));
    return {ScalarField(g, std::move(u)), rep};
}

}  // namespace

DirichletProblem box_problem(const ScalarField& boundary, bool obstacle) {
    const Grid& g = boundary.grid();
    DirichletProblem p;
    p.grid = g;
    p.fixed.assign(g.total(), 0);
    p.values.assign(g.total(), 0.0);
    p.obstacle = obstacle;
    for (std::size_t i = 0; i < g.total(); ++i) {
        if (g.is_boundary(g.unflatten(i))) {
            p.fixed[i] = 1;
            p.values[i] = boundary.at(i);
        }
    }
    return p;
}

std::pair<ScalarField, SolveReport> solve_dirichlet(const EllipticOperator& f,
                                                    const DirichletProblem& problem,
                                                    SolveMethod method) {
    return solve_masked(f, problem, method);
}

std::pair<ScalarField, SolveReport> solve_obstacle(const EllipticOperator& f,
                                                   const ScalarField& boundary,
                                                   SolveMethod method) {
    return solve_box_nested(f, boundary, true, method);
}

std::pair<ScalarField, SolveReport> solve_unconstrained(const EllipticOperator& f,
                                                        const ScalarField& boundary) {
    SolveMethod method = f.smooth() ? SolveMethod::Penalization : SolveMethod::ProjectedSweep;
    return solve_box_nested(f, boundary, false, method);
}

ComparisonReport comparison_check(const EllipticOperator& f, const ScalarField& u,
                                  const ScalarField& phi, const ScalarField& psi) {
    const Grid& g = u.grid();
    check(phi.grid().same_geometry(g) && psi.grid().same_geometry(g),
          "comparison_check: fields live on different grids");
    const double tol = tol_pde(g);
    ComparisonReport rep;
    rep.hypotheses_ok = true;

    for (std::size_t i = 0; i < g.total() && rep.hypotheses_ok; ++i) {
        NodeIndex idx = g.unflatten(i);
        if (g.is_boundary(idx)) {
            if (phi.at(i) > u.at(i) + 1e-12) {
                rep.hypotheses_ok = false;
                rep.failed_hypothesis = "phi exceeds u on the boundary";
            }
            if (psi.at(i) < u.at(i) - 1e-12) {
                rep.hypotheses_ok = false;
                rep.failed_hypothesis = "psi below u on the boundary";
            }
            continue;
        }
        double fphi = f.evaluate(hessian_at(phi, idx));
        double fpsi = f.evaluate(hessian_at(psi, idx));
        if (phi.at(i) > 0 && fphi < 1.0 - tol) {
            rep.hypotheses_ok = false;
            rep.failed_hypothesis = "F(D2phi) < 1 on {phi > 0}";
        }
        if (fpsi > 1.0 + tol) {
            rep.hypotheses_ok = false;
            rep.failed_hypothesis = "F(D2psi) > 1";
        }
        if (psi.at(i) < -1e-12) {
            rep.hypotheses_ok = false;
            rep.failed_hypothesis = "psi negative";
        }
    }
    if (!rep.hypotheses_ok) return rep;

    for (std::size_t i = 0; i < g.total(); ++i) {
        rep.max_lower_violation = std::max(rep.max_lower_violation, phi.at(i) - u.at(i));
        rep.max_upper_violation = std::max(rep.max_upper_violation, u.at(i) - psi.at(i));
    }
    rep.max_lower_violation = std::max(rep.max_lower_violation, 0.0);
    rep.max_upper_violation = std::max(rep.max_upper_violation, 0.0);
    rep.pass = rep.max_lower_violation <= tol && rep.max_upper_violation <= tol;
    return rep;
}

}  // namespace fblab
