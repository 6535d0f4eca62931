#include "fblab/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fblab/contact.hpp"

namespace fblab {

void BlowupConfig::validate() const {
    check(kappa > 0, "blowup: kappa must be positive");
    check(rho > 0 && rho <= r_case1 && r_case1 < 0.5, "blowup: need 0 < rho <= r_case1 < 1/2");
    check(beta_expect > 0 && beta_expect < 1, "blowup: beta_expect must lie in (0,1)");
    check(max_steps >= 1, "blowup: max_steps must be at least 1");
    check(floor_mult > 0, "blowup: floor_mult must be positive");
    check(r_init > 0 && r_init < 1, "blowup: r_init must lie in (0,1)");
    check(work_n == 0 || (work_n >= 17 && work_n % 2 == 1), "blowup: work_n must be odd >= 17");
    check(min_floor_steps >= 0, "blowup: min_floor_steps must be nonnegative");
    check(min_scale_cells > 0, "blowup: min_scale_cells must be positive");
}

std::string branch_name(BlowupBranch b) {
    switch (b) {
        case BlowupBranch::Case1: return "case1";
        case BlowupBranch::Case2a: return "case2a";
        case BlowupBranch::Case2b: return "case2b";
        case BlowupBranch::None: return "none";
    }
    fail("branch_name: bad enum");
}

namespace {

const Vec kOrigin = {0, 0, 0};

double lambda2_of(const SymMatrix& a) { return a.eigenvalues()[1]; }

std::vector<double> case1_radii(const BlowupConfig& cfg) {
    std::vector<double> out;
    for (double r : {0.25, 0.3125, 0.375, 0.4375})
        if (r >= cfg.rho - 1e-12 && r <= cfg.r_case1 + 1e-12) out.push_back(r);
    if (out.empty()) out.push_back(cfg.r_case1);
    return out;
}

struct LineFit {
    double slope = 0;
    double intercept = 0;
    double rms = 0;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    check(std::abs(denom) > 1e-30, "fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = ys[i] - f.slope * xs[i] - f.intercept;
        ss += e * e;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

// The class parameter of a certified step: the smallest eps for which the
// field is a member, bounding the sup distance and the convexity deficit
// c0 eps at once. The deficit can dominate (a harmonic quartic perturbation
// has Hessian dips an order larger than its sup deviation), and the branch
// thresholds below must see the parameter that controls both.
double class_eps(const ApproxCertificate& cert, const EllipticOperator& f) {
    return std::max(cert.eps, std::max(0.0, -cert.convexity_floor) / f.c0());
}

}  // namespace

Case1Result step_case1(const ScalarField& u_k, const QuadraticPoly& p_k, double eps_k,
                       const EllipticOperator& f, const BlowupConfig& cfg) {
    check(lambda2_of(p_k.A) <= cfg.kappa * eps_k,
          "step_case1: lambda_2(D2p) exceeds kappa eps, wrong branch");
    Case1Result best;
    best.eps = std::numeric_limits<double>::infinity();
    for (double r : case1_radii(cfg)) {
        QuadraticPoly fit = fit_quadratic(u_k, kOrigin, r, false);
        QuadraticPoly cand = project_to_class(fit.A, kOrigin, f, PolyClass::Q);
        ApproxCertificate cert = certify(u_k, cand, kOrigin, r, f);
        double e = class_eps(cert, f);
        if (e < best.eps) {
            best.p = cand;
            best.eps = e;
            best.r = r;
        }
    }
    return best;
}

Case2Result step_case2(const ScalarField& u_k, const QuadraticPoly& p_k, double eps_k,
                       const EllipticOperator& f, const BlowupConfig& cfg) {
    check(lambda2_of(p_k.A) >= cfg.kappa * eps_k,
          "step_case2: lambda_2(D2p) below kappa eps, wrong branch");
    ScalarField h = solve_unconstrained(f, u_k).first;
    NodeIndex center = u_k.grid().nearest(kOrigin);
    Case2Result res;
    res.d2h0 = hessian_at(h, center);
    Vec g0 = gradient_at(h, center);
    res.p = project_to_class(res.d2h0, g0, f, PolyClass::UQ);
    res.eps = class_eps(certify(u_k, res.p, kOrigin, cfg.rho, f), f);
    Vec probe = {0.5 * cfg.rho, 0, 0};
    res.uh_gap = u_k.sample(probe) - h.sample(probe);
    res.alt = res.eps <= (1.0 - cfg.beta_expect) * eps_k ? 1 : 2;
    if (res.alt == 2) {
        double drop = eps_k - res.eps;
        res.c_gap = drop > 0 ? res.uh_gap / drop : std::numeric_limits<double>::infinity();
    }
    return res;
}

std::vector<int> stage_boundaries(const std::vector<double>& eps, double beta) {
    std::vector<int> out;
    if (eps.empty()) return out;
    double stage_eps = eps[0];
    for (std::size_t k = 0; k + 1 < eps.size(); ++k) {
        if (eps[k + 1] < (1.0 - beta) * stage_eps) {
            out.push_back(static_cast<int>(k));
            stage_eps = eps[k + 1];
        }
    }
    return out;
}

BlowupTrace run_blowup(const ScalarField& u, const Vec& x0_in, const EllipticOperator& f,
                       const BlowupConfig& cfg) {
    cfg.validate();
    const Grid& src = u.grid();
    check(src.dim == f.dim(), "run_blowup: operator dimension mismatch");
    ClassifyReport cls = classify_point(u, x0_in);
    if (cls.classification != PointClass::Singular)
        fail("run_blowup: start point did not classify as singular");

    BlowupTrace trace;
    trace.x0 = src.point(src.nearest(x0_in));
    trace.h_src = src.h();
    trace.kappa = cfg.kappa;
    trace.tol_kernel =
        cfg.tol_kernel > 0 ? cfg.tol_kernel : std::max(10.0 * src.h() * src.h(), 1e-6);

    int work_n = cfg.work_n > 0 ? cfg.work_n : (src.dim == 2 ? 129 : 33);
    Grid work{src.dim, work_n, 1.0};
    trace.h_work = work.h();

    double r_total = cfg.r_init;
    ScalarField u_k = rescale(u, trace.x0, r_total, work).field;
    QuadraticPoly fit = fit_quadratic(u_k, kOrigin, 1.0, false);
    QuadraticPoly p_k = project_to_class(fit.A, kOrigin, f, PolyClass::Q);
    ApproxCertificate cert = certify(u_k, p_k, kOrigin, 1.0, f);

    for (int k = 0;; ++k) {
        BlowupStep st;
        st.k = k;
        st.r_total = r_total;
        st.p = p_k;
        st.eps = class_eps(cert, f);
        st.conv_floor = cert.convexity_floor;
        st.lambda2 = lambda2_of(p_k.A);
        st.floor_k = cfg.floor_mult * (trace.h_src / r_total) * (trace.h_src / r_total);

        if (k >= cfg.max_steps) {
            trace.steps.push_back(st);
            trace.stop_reason = "max_steps";
            break;
        }
        if (st.eps <= st.floor_k && k >= cfg.min_floor_steps) {
            trace.steps.push_back(st);
            trace.stop_reason = "floor";
            break;
        }

        bool case2 = st.lambda2 >= cfg.kappa * st.eps;
        QuadraticPoly p_next;
        double r_step;
        if (case2) {
            Case2Result res = step_case2(u_k, p_k, st.eps, f, cfg);
            r_step = cfg.rho;
            st.branch = res.alt == 1 ? BlowupBranch::Case2a : BlowupBranch::Case2b;
            st.has_d2h0 = true;
            st.d2h0 = res.d2h0;
            st.uh_gap = res.uh_gap;
            st.c_gap = res.c_gap;
            p_next = res.p;
            p_next.b = scaled(res.p.b, 1.0 / r_step);
        } else {
            Case1Result res = step_case1(u_k, p_k, st.eps, f, cfg);
            r_step = res.r;
            st.branch = BlowupBranch::Case1;
            p_next = res.p;
        }

        // The next window must still span a few source cells to mean anything.
        if (2.0 * r_total * r_step < cfg.min_scale_cells * trace.h_src) {
            st.branch = BlowupBranch::None;
            st.has_d2h0 = false;
            trace.steps.push_back(st);
            trace.stop_reason = "scale_guard";
            break;
        }

        double r_next = r_total * r_step;
        ScalarField u_next = rescale(u, trace.x0, r_next, work).field;
        ApproxCertificate cert_next = certify(u_next, p_next, kOrigin, 1.0, f);

        trace.steps.push_back(st);

        double floor_next =
            cfg.floor_mult * (trace.h_src / r_next) * (trace.h_src / r_next);
        double eps_next = class_eps(cert_next, f);
        bool rose = eps_next > st.eps;
        if (rose && st.eps > st.floor_k && eps_next > floor_next) {
            BlowupStep last;
            last.k = k + 1;
            last.r_total = r_next;
            last.p = p_next;
            last.eps = eps_next;
            last.conv_floor = cert_next.convexity_floor;
            last.lambda2 = lambda2_of(p_next.A);
            last.floor_k = floor_next;
            trace.steps.push_back(last);
            trace.breakdown = true;
            trace.stop_reason = "breakdown";
            break;
        }

        r_total = r_next;
        u_k = std::move(u_next);
        p_k = p_next;
        cert = cert_next;
    }

    // Stage boundaries track certified progress; below the convergence floor
    // the measured eps is resolution noise, so clamp before comparing drops.
    std::vector<double> eps_seq;
    for (const BlowupStep& s : trace.steps) eps_seq.push_back(std::max(s.eps, s.floor_k));
    trace.stages = stage_boundaries(eps_seq, cfg.beta_expect);

    const QuadraticPoly& last = trace.steps.back().p;
    trace.limit_q = project_to_class(last.A, kOrigin, f, PolyClass::Q);
    trace.has_limit = true;
    std::array<double, 3> ev = trace.limit_q.A.eigenvalues();
    trace.stratum = 0;
    for (int j = 0; j < src.dim; ++j)
        if (ev[j] <= trace.tol_kernel) ++trace.stratum;

    for (std::size_t m = 0; m < trace.steps.size(); ++m) {
        const BlowupStep& sm = trace.steps[m];
        if (sm.eps <= sm.floor_k) continue;
        for (std::size_t n = m + 1; n < trace.steps.size(); ++n) {
            double drift = (trace.steps[n].p.A - sm.p.A).spectral_norm() / sm.eps;
            trace.c_drift = std::max(trace.c_drift, drift);
        }
    }
    return trace;
}

TelescopeReport telescope_check(const BlowupTrace& trace, double cap) {
    TelescopeReport rep;
    bool all_floor = true;
    double h_eff = trace.h_work;
    for (std::size_t k = 0; k + 1 < trace.steps.size(); ++k) {
        const BlowupStep& a = trace.steps[k];
        const BlowupStep& b = trace.steps[k + 1];
        if (!a.has_d2h0 || !b.has_d2h0) continue;
        bool boundary = std::find(trace.stages.begin(), trace.stages.end(), static_cast<int>(k)) !=
                        trace.stages.end();
        if (boundary) continue;
        ++rep.pairs;
        rep.hessian_sum += (b.d2h0 - a.d2h0).spectral_norm();
        rep.eps_drop_sum += a.eps - b.eps;
        all_floor = all_floor && a.eps <= a.floor_k && b.eps <= b.floor_k;
        h_eff = std::max(h_eff, trace.h_src / b.r_total);
    }
    check(rep.pairs >= 1, "telescope_check: needs two consecutive same-stage Case-2 steps");
    rep.noise_bound = 20.0 * h_eff * h_eff;
    if (all_floor) {
        rep.vacuous = true;
        rep.ratio = 0;
        rep.pass = rep.hessian_sum <= rep.noise_bound;
    } else if (rep.eps_drop_sum > 0) {
        rep.ratio = rep.hessian_sum / rep.eps_drop_sum;
        rep.pass = rep.ratio <= cap;
    } else {
        rep.ratio = std::numeric_limits<double>::infinity();
        rep.pass = false;
    }
    return rep;
}

DecayFit decay_fit(const std::vector<double>& eps) {
    check(eps.size() >= 4, "decay_fit: needs at least 4 samples");
    for (double e : eps) check(e > 0, "decay_fit: eps values must be positive");

    std::vector<double> ks, logs;
    for (std::size_t k = 0; k < eps.size(); ++k) {
        ks.push_back(static_cast<double>(k));
        logs.push_back(std::log(eps[k]));
    }
    LineFit geo = fit_line(ks, logs);

    std::vector<double> logks, logs1;
    for (std::size_t k = 1; k < eps.size(); ++k) {
        logks.push_back(std::log(static_cast<double>(k)));
        logs1.push_back(std::log(eps[k]));
    }
    LineFit pow = fit_line(logks, logs1);

    DecayFit out;
    out.lambda = std::exp(geo.slope);
    out.residual_geometric = geo.rms;
    out.c_exponent = -pow.slope;
    out.residual_logpower = pow.rms;
    out.rate_kind = geo.rms <= pow.rms ? "geometric" : "log-power";
    return out;
}

DecayFit decay_fit(const BlowupTrace& trace) {
    std::vector<double> eps;
    for (const BlowupStep& s : trace.steps)
        if (s.eps > s.floor_k) eps.push_back(s.eps);
    check(eps.size() >= 4, "decay_fit: needs at least 4 steps above the floor");
    return decay_fit(eps);
}

}  // namespace fblab
