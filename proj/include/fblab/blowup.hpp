#pragma once

#include <string>
#include <vector>

#include "fblab/quadratic.hpp"
#include "fblab/solvers.hpp"

namespace fblab {

struct BlowupConfig {
    double kappa = 10.0;        // branch threshold: Case 2 when lambda_2(D2p) >= kappa * eps
    double rho = 0.25;          // Case-2 rescaling radius
    double r_case1 = 0.4375;    // upper end of the Case-1 radius search window
    double beta_expect = 0.1;   // expected per-step Case-1 contraction factor
    int max_steps = 40;
    double floor_mult = 20.0;   // eps floor: floor_mult * (h_src / r_total)^2
    double r_init = 0.5;        // initial certification radius around x0
    int work_n = 0;             // working grid size, 0 = pick by dimension
    int min_floor_steps = 3;    // keep iterating this long even when eps starts at floor
    double tol_kernel = 0;      // kernel threshold for the stratum, 0 = max(10 h_src^2, 1e-6)
    double min_scale_cells = 8; // stop once the sampled window spans fewer source cells

    void validate() const;
};

enum class BlowupBranch { Case1, Case2a, Case2b, None };
std::string branch_name(BlowupBranch b);

// State of the iteration at one scale plus the transition executed from it.
// branch = None marks the terminal state (no transition was executed).
struct BlowupStep {
    int k = 0;
    double r_total = 0;          // u_k(x) = u(x0 + r_total x) / r_total^2
    QuadraticPoly p;             // model at this scale
    double eps = 0;              // certified sup |u_k - p| over B_1
    double conv_floor = 0;       // min interior eigenvalue of D2u_k over B_1
    double lambda2 = 0;          // second-largest eigenvalue of D2p
    double floor_k = 0;          // discretization floor at this scale
    BlowupBranch branch = BlowupBranch::None;
    bool has_d2h0 = false;       // Case-2 payload below is meaningful
    SymMatrix d2h0;              // Hessian at 0 of the unconstrained companion
    double uh_gap = 0;           // (u_k - h)(rho/2 e_1)
    double c_gap = 0;            // uh_gap / (eps_k - eps') when alternative 2 fires
};

struct BlowupTrace {
    std::vector<BlowupStep> steps;
    std::vector<int> stages;     // last step index of each completed stage
    QuadraticPoly limit_q;       // final model projected to Q (linear part dropped)
    bool has_limit = false;
    int stratum = -1;            // eigenvalues of D2 limit_q below tol_kernel
    std::string stop_reason;     // max_steps | floor | scale_guard | breakdown
    bool breakdown = false;
    double c_drift = 0;          // max ||D2p_n - D2p_m|| / eps_m over m <= n above floor
    Vec x0 = {0, 0, 0};          // snapped blow-up center
    double h_src = 0;            // source grid spacing (floors, kernel tolerance)
    double h_work = 0;           // working grid spacing
    double kappa = 0;
    double tol_kernel = 0;
};

struct Case1Result {
    QuadraticPoly p;
    double eps = 0;
    double r = 0;
};

// Radius search at a scale where D2p_k is nearly rank one: for each dyadic
// r in [rho, r_case1] fit a quadratic on B_r, project to Q, and certify;
// returns the radius minimizing the certified eps. Requires
// lambda_2(D2p_k) <= kappa eps_k.
Case1Result step_case1(const ScalarField& u_k, const QuadraticPoly& p_k, double eps_k,
                       const EllipticOperator& f, const BlowupConfig& cfg);

struct Case2Result {
    QuadraticPoly p;
    double eps = 0;
    SymMatrix d2h0;
    double uh_gap = 0;
    int alt = 0;                 // 1: eps' <= (1 - beta) eps, 2: otherwise
    double c_gap = 0;            // reported when alt = 2
};

// Two-eigenvalue regime: solve the unconstrained equation F(D2h) = 1 with the
// same boundary data, read the quadratic model off h at the center, project to
// UQ and certify on B_rho. Requires lambda_2(D2p_k) >= kappa eps_k.
Case2Result step_case2(const ScalarField& u_k, const QuadraticPoly& p_k, double eps_k,
                       const EllipticOperator& f, const BlowupConfig& cfg);

// Full iteration at a singular free-boundary point: rescale (always sampling
// the original field), branch on lambda_2(D2p_k) vs kappa eps_k, track the
// certified eps_k, and stop at the step budget, the discretization floor, or
// the resolution guard. An eps increase above the floor is recorded as a
// breakdown; the partial trace is still returned.
BlowupTrace run_blowup(const ScalarField& u, const Vec& x0, const EllipticOperator& f,
                       const BlowupConfig& cfg);

struct TelescopeReport {
    int pairs = 0;
    double hessian_sum = 0;      // sum of ||d2h0_{k+1} - d2h0_k|| over the pairs
    double eps_drop_sum = 0;     // sum of eps_k - eps_{k+1} over the pairs
    double ratio = 0;
    bool vacuous = false;        // eps drop at noise level; bound checked instead
    double noise_bound = 0;
    bool pass = false;
};

// Telescoping control of the companion Hessians: over consecutive Case-2
// steps within one stage, the summed Hessian movement should be bounded by a
// moderate multiple of the summed eps decrease.
TelescopeReport telescope_check(const BlowupTrace& trace, double cap = 10.0);

struct DecayFit {
    std::string rate_kind;       // "geometric" | "log-power"
    double lambda = 0;           // geometric model eps_k ~ eps_0 lambda^k
    double residual_geometric = 0;
    double c_exponent = 0;       // log-power model eps_k ~ C k^{-c}
    double residual_logpower = 0;
};

// Least-squares discrimination between geometric decay (log eps affine in k)
// and log-power decay (log eps affine in log k). Needs at least 4 samples.
DecayFit decay_fit(const std::vector<double>& eps);

// Same, on the trace's eps sequence restricted to steps above the floor.
DecayFit decay_fit(const BlowupTrace& trace);

// Stage boundaries: k enters `stages` when eps_{k+1} drops below
// (1 - beta) times the eps that opened the current stage.
std::vector<int> stage_boundaries(const std::vector<double>& eps, double beta);

}  // namespace fblab
