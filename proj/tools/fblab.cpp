#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "fblab/checks.hpp"
#include "fblab/contact.hpp"
#include "fblab/experiment.hpp"
#include "fblab/field_io.hpp"
#include "fblab/fixtures.hpp"
#include "fblab/thin.hpp"

using fblab::Vec;
using ordered_json = nlohmann::ordered_json;

namespace {

Vec to_vec(const std::vector<double>& v) {
    fblab::check(v.size() == 2 || v.size() == 3, "--point needs 2 or 3 coordinates");
    Vec x = {0, 0, 0};
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = v[i];
    return x;
}

fblab::EllipticOperator load_op(const std::string& path) {
    return fblab::EllipticOperator::from_config_text(fblab::read_text_file(path));
}

void emit(const ordered_json& j, const std::string& out) {
    std::string text = j.dump(2) + "\n";
    if (out.empty())
        std::fputs(text.c_str(), stdout);
    else
        fblab::write_text_file(out, text);
}

// Shared by solve and thin: --fixture builds the named profile, --boundary
// loads an FBF1 file (and then supplies the grid itself).
fblab::ScalarField boundary_field(const std::string& fixture, const std::string& path, int n,
                                  double hw, const fblab::EllipticOperator& f) {
    if (!path.empty()) return fblab::read_fbf(path);
    fblab::Grid g(f.dim(), n, hw);
    return fblab::make_fixture(fixture, g, f);
}

struct SolveArgs {
    std::string op_path, fixture = "quadratic:iso", boundary, method = "penalization";
    int n = 129;
    double hw = 1.0;
    std::string out, report;
};

int cmd_solve(const SolveArgs& a) {
    fblab::EllipticOperator f = load_op(a.op_path);
    fblab::ScalarField bnd = boundary_field(a.fixture, a.boundary, a.n, a.hw, f);
    fblab::SolveMethod m = a.method == "sweep" ? fblab::SolveMethod::ProjectedSweep
                                               : fblab::SolveMethod::Penalization;
    auto [u, rep] = fblab::solve_obstacle(f, bnd, m);
    if (!a.out.empty()) fblab::write_fbf(u, a.out);
    ordered_json j;
    j["method"] = fblab::method_name(rep.method);
    j["iterations"] = rep.iterations;
    j["residual"] = rep.residual;
    j["active_fraction"] = rep.active_fraction;
    emit(j, a.report);
    return 0;
}

struct AnalyzeArgs {
    std::string field;
    std::vector<double> point = {0, 0};
    std::vector<double> radii;
    std::string out;
};

int cmd_analyze(const AnalyzeArgs& a) {
    fblab::ScalarField u = fblab::read_fbf(a.field);
    Vec pt = to_vec(a.point);
    fblab::ContactSet contact = fblab::extract_contact(u);
    fblab::ClassifyReport cls = fblab::classify_point(u, pt);
    std::vector<double> radii = a.radii;
    if (radii.empty()) {
        for (double r = 16.0 * u.grid().h(); r < 0.5; r *= 1.5) radii.push_back(r);
        radii.push_back(0.5);
    }
    fblab::ThicknessProfile prof = fblab::thickness_profile(u.grid(), contact.nodes, pt, radii);
    ordered_json j;
    j["classification"] =
        cls.classification == fblab::PointClass::Singular ? "singular" : "regular";
    j["r_min"] = cls.r_min;
    j["delta_rmin"] = cls.delta_rmin;
    j["quadratic_residual"] = cls.quadratic_residual;
    j["halfspace_residual"] = cls.halfspace_residual;
    j["contact_count"] = contact.nodes.size();
    j["fb_count"] = contact.boundary_nodes.size();
    j["radii"] = prof.radii;
    j["delta"] = prof.delta;
    emit(j, a.out);
    return 0;
}

struct BlowupArgs {
    std::string field, op_path;
    std::vector<double> point = {0, 0};
    fblab::BlowupConfig cfg;
    std::string out, csv;
};

int cmd_blowup(const BlowupArgs& a) {
    fblab::ScalarField u = fblab::read_fbf(a.field);
    fblab::EllipticOperator f = load_op(a.op_path);
    fblab::BlowupTrace trace = fblab::run_blowup(u, to_vec(a.point), f, a.cfg);
    std::string text = fblab::trace_to_json(trace);
    if (a.out.empty())
        std::fputs(text.c_str(), stdout);
    else
        fblab::write_text_file(a.out, text);
    if (!a.csv.empty()) fblab::write_text_file(a.csv, fblab::trace_to_csv(trace));
    return trace.breakdown ? 1 : 0;
}

struct ThinArgs {
    std::string fixture = "thin:linear", boundary;
    int n = 257;
    double hw = 1.0;
    std::vector<double> radii = {0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
    std::string out, field_out;
};

int cmd_thin(const ThinArgs& a) {
    fblab::ScalarField bnd;
    if (!a.boundary.empty()) {
        bnd = fblab::read_fbf(a.boundary);
    } else {
        fblab::Grid g(2, a.n, a.hw);
        // thin fixtures ignore the operator; any valid one will do
        fblab::EllipticOperator f = fblab::EllipticOperator::scaled_trace(2);
        bnd = fblab::make_fixture(a.fixture, g, f);
    }
    fblab::ThinSolution ts = fblab::solve_thin(bnd);
    fblab::FrequencyProfile prof = fblab::frequency(ts.v, {0, 0, 0}, a.radii);
    fblab::ThinClass cls = fblab::classify_thin(prof);
    if (!a.field_out.empty()) fblab::write_fbf(ts.v, a.field_out);
    ordered_json j;
    j["iterations"] = ts.iterations;
    j["residual"] = ts.residual;
    j["radii"] = prof.radii;
    j["frequency"] = prof.value;
    j["possibility"] = cls == fblab::ThinClass::Possibility1   ? 1
                       : cls == fblab::ThinClass::Possibility2 ? 2
                                                               : 3;
    emit(j, a.out);
    return 0;
}

struct VerifyArgs {
    std::string what = "barrier", op_path, field;
    int n = 129;
    double hw = 1.0;
    double r = 0.5, N = -1, eta = -1;
    int centers = 25;
    unsigned long long seed = 0;
    std::string out;
};

int cmd_verify(const VerifyArgs& a) {
    fblab::EllipticOperator f = load_op(a.op_path);
    ordered_json j;
    j["what"] = a.what;
    if (a.what == "barrier") {
        fblab::Grid g(f.dim(), a.n, a.hw);
        fblab::BarrierSpec spec;
        spec.r = a.r;
        double gamma = fblab::gamma_of(f);
        spec.N = a.N > 0 ? a.N : 10.0 * gamma * spec.r * spec.r;
        spec.eta = a.eta > 0 ? a.eta : spec.r / 100.0;
        fblab::ScalarField w = fblab::build_barrier(f, spec, g);
        std::mt19937_64 rng(a.seed);
        std::uniform_real_distribution<double> unif(-spec.r / 2, spec.r / 2);
        std::vector<Vec> centers;
        while (int(centers.size()) < a.centers) {
            Vec x = {unif(rng), unif(rng), 0};
            if (f.dim() == 3) x[2] = unif(rng);
            if (fblab::norm(x, f.dim()) <= spec.r / 2) centers.push_back(x);
        }
        fblab::BarrierReport rep = fblab::barrier_check(w, f, spec, centers);
        j["r"] = spec.r;
        j["eta"] = spec.eta;
        j["N"] = spec.N;
        j["pass"] = rep.pass;
        j["min_quadratic_slack"] = rep.min_quadratic_slack;
        j["min_patch_slack"] = rep.min_patch_slack;
        j["centers_checked"] = rep.centers_checked;
        emit(j, a.out);
        return rep.pass ? 0 : 1;
    }
    if (a.what == "comparison") {
        fblab::check(!a.field.empty(), "verify comparison needs --field");
        fblab::ScalarField u = fblab::read_fbf(a.field);
        const double c = 0.1;
        fblab::ScalarField phi(u.grid()), psi(u.grid());
        for (std::size_t i = 0; i < u.grid().total(); ++i) {
            phi.at(i) = std::max(u.at(i) - c, 0.0);
            psi.at(i) = u.at(i) + c;
        }
        fblab::ComparisonReport rep = fblab::comparison_check(f, u, phi, psi);
        j["hypotheses_ok"] = rep.hypotheses_ok;
        j["max_lower_violation"] = rep.max_lower_violation;
        j["max_upper_violation"] = rep.max_upper_violation;
        j["pass"] = rep.pass;
        emit(j, a.out);
        return rep.pass ? 0 : 1;
    }
    fblab::check(!a.field.empty(), "verify " + a.what + " needs --field");
    fblab::ScalarField u = fblab::read_fbf(a.field);
    fblab::QuadraticPoly fit = fblab::fit_quadratic(u, {0, 0, 0}, a.r, false);
    fblab::QuadraticPoly p = fblab::project_to_class(fit.A, {0, 0, 0}, f, fblab::PolyClass::Q);
    fblab::ApproxCertificate cert = fblab::certify(u, p, {0, 0, 0}, a.r, f);
    if (a.what == "monotonicity") {
        fblab::MonotonicityParams mp;
        mp.r = a.r;
        if (a.eta > 0) mp.eta = a.eta;
        fblab::MonotonicityReport rep = fblab::monotonicity_check(u, {1, 0, 0}, mp, f, cert.eps);
        j["eps"] = cert.eps;
        j["hypotheses_met"] = rep.hypotheses_met;
        j["hypothesis_margin"] = rep.hypothesis_margin;
        j["conclusion_holds"] = rep.conclusion_holds;
        j["min_directional"] = rep.min_directional;
        emit(j, a.out);
        return rep.conclusion_holds || !rep.hypotheses_met ? 0 : 1;
    }
    if (a.what == "convexity") {
        fblab::ConvexityReport rep = fblab::convexity_check(u, cert, {1, 0, 0}, 1.0);
        j["eps"] = cert.eps;
        j["ratio"] = rep.ratio;
        j["precondition_met"] = rep.precondition_met;
        j["conclusion_holds"] = rep.conclusion_holds;
        j["min_second_difference"] = rep.min_second_difference;
        emit(j, a.out);
        return rep.conclusion_holds || !rep.precondition_met ? 0 : 1;
    }
    fblab::fail("unknown verify kind " + a.what);
}

struct DecayArgs {
    std::string trace, eps_file, out;
};

int cmd_decay(const DecayArgs& a) {
    fblab::DecayFit fit;
    if (!a.trace.empty()) {
        fit = fblab::decay_fit(fblab::trace_from_json(fblab::read_text_file(a.trace)));
    } else {
        fblab::check(!a.eps_file.empty(), "decay needs --trace or --eps-file");
        std::vector<double> eps;
        std::istringstream in(fblab::read_text_file(a.eps_file));
        double v;
        while (in >> v) eps.push_back(v);
        fit = fblab::decay_fit(eps);
    }
    ordered_json j;
    j["rate_kind"] = fit.rate_kind;
    j["lambda"] = fit.lambda;
    j["residual_geometric"] = fit.residual_geometric;
    j["c_exponent"] = fit.c_exponent;
    j["residual_logpower"] = fit.residual_logpower;
    emit(j, a.out);
    return 0;
}

int cmd_fixtures() {
    for (const fblab::Fixture& fx : fblab::fixture_registry()) {
        std::string dim = fx.dim == 0 ? "2,3" : std::to_string(fx.dim);
        std::printf("%-20s dim=%-4s %s%s\n", fx.name.c_str(), dim.c_str(),
                    fx.thin ? "[thin] " : "", fx.formula.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for obstacle problems with convex fully "
                 "nonlinear operators"};
    app.require_subcommand(1);

    SolveArgs sa;
    CLI::App* solve = app.add_subcommand("solve", "solve the obstacle problem on a box");
    solve->add_option("--op", sa.op_path, "operator config (json)")->required();
    solve->add_option("--fixture", sa.fixture, "builtin boundary fixture");
    solve->add_option("--boundary", sa.boundary, "boundary field (fbf)");
    solve->add_option("--n", sa.n, "grid nodes per axis (odd)");
    solve->add_option("--hw", sa.hw, "box half width");
    solve->add_option("--method", sa.method)->check(CLI::IsMember({"penalization", "sweep"}));
    solve->add_option("--out", sa.out, "solution field output (fbf)");
    solve->add_option("--report", sa.report, "report output (json, default stdout)");

    AnalyzeArgs aa;
    CLI::App* analyze = app.add_subcommand("analyze", "contact set and free-boundary class");
    analyze->add_option("--field", aa.field, "solution field (fbf)")->required();
    analyze->add_option("--point", aa.point, "free boundary point")->delimiter(',');
    analyze->add_option("--radii", aa.radii, "thickness radii")->delimiter(',');
    analyze->add_option("--out", aa.out, "report output (json, default stdout)");

    BlowupArgs ba;
    CLI::App* blowup = app.add_subcommand("blowup", "iterative rescaling at a singular point");
    blowup->add_option("--field", ba.field, "solution field (fbf)")->required();
    blowup->add_option("--op", ba.op_path, "operator config (json)")->required();
    blowup->add_option("--point", ba.point, "singular point")->delimiter(',');
    blowup->add_option("--kappa", ba.cfg.kappa, "branch threshold");
    blowup->add_option("--rho", ba.cfg.rho, "second-branch radius");
    blowup->add_option("--beta", ba.cfg.beta_expect, "expected contraction factor");
    blowup->add_option("--max-steps", ba.cfg.max_steps);
    blowup->add_option("--r-init", ba.cfg.r_init, "initial certification radius");
    blowup->add_option("--floor-mult", ba.cfg.floor_mult);
    blowup->add_option("--work-n", ba.cfg.work_n, "working grid nodes per axis");
    blowup->add_option("--min-floor-steps", ba.cfg.min_floor_steps);
    blowup->add_option("--out", ba.out, "trace output (json, default stdout)");
    blowup->add_option("--csv", ba.csv, "iteration table output (csv)");

    ThinArgs ta;
    CLI::App* thin = app.add_subcommand("thin", "thin-obstacle solve and frequencies");
    thin->add_option("--fixture", ta.fixture, "thin boundary fixture");
    thin->add_option("--boundary", ta.boundary, "boundary field (fbf)");
    thin->add_option("--n", ta.n, "grid nodes per axis (odd)");
    thin->add_option("--hw", ta.hw, "box half width");
    thin->add_option("--radii", ta.radii, "frequency radii")->delimiter(',');
    thin->add_option("--out", ta.out, "report output (json, default stdout)");
    thin->add_option("--field-out", ta.field_out, "solution field output (fbf)");

    VerifyArgs va;
    CLI::App* verify = app.add_subcommand("verify", "barrier / comparison / propagation checks");
    verify->add_option("--what", va.what)
        ->check(CLI::IsMember({"barrier", "comparison", "monotonicity", "convexity"}));
    verify->add_option("--op", va.op_path, "operator config (json)")->required();
    verify->add_option("--field", va.field, "solution field (fbf), for field-based checks");
    verify->add_option("--n", va.n, "grid nodes per axis (barrier)");
    verify->add_option("--hw", va.hw, "box half width (barrier)");
    verify->add_option("--r", va.r, "check radius");
    verify->add_option("--N", va.N, "barrier plateau value");
    verify->add_option("--eta", va.eta, "slab half width");
    verify->add_option("--centers", va.centers, "number of sampled centers");
    verify->add_option("--seed", va.seed, "sampling seed");
    verify->add_option("--out", va.out, "report output (json, default stdout)");

    DecayArgs da;
    CLI::App* decay = app.add_subcommand("decay", "fit decay models to an eps sequence");
    decay->add_option("--trace", da.trace, "trace file (json)");
    decay->add_option("--eps-file", da.eps_file, "whitespace-separated eps values");
    decay->add_option("--out", da.out, "report output (json, default stdout)");

    std::string run_config, run_out;
    CLI::App* runc = app.add_subcommand("run", "execute a config-driven experiment");
    runc->add_option("--config", run_config, "experiment config (json)")->required();
    runc->add_option("--out", run_out, "override output directory");

    CLI::App* fixtures = app.add_subcommand("fixtures", "list builtin fixtures");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed()) return cmd_solve(sa);
        if (analyze->parsed()) return cmd_analyze(aa);
        if (blowup->parsed()) return cmd_blowup(ba);
        if (thin->parsed()) return cmd_thin(ta);
        if (verify->parsed()) return cmd_verify(va);
        if (decay->parsed()) return cmd_decay(da);
        if (runc->parsed()) return fblab::run_experiment(run_config, run_out);
        if (fixtures->parsed()) return cmd_fixtures();
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
