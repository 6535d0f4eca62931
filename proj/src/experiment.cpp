#include "fblab/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fblab/checks.hpp"
#include "fblab/contact.hpp"
#include "fblab/field_io.hpp"
#include "fblab/fixtures.hpp"
#include "fblab/thin.hpp"

namespace fblab {

using ordered_json = nlohmann::ordered_json;

namespace {

// Config problems get exit code 2, pipeline failures exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

ordered_json json_vec(const Vec& v, int dim) {
    ordered_json a = ordered_json::array();
    for (int i = 0; i < dim; ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const ordered_json& a) {
    Vec v = {0, 0, 0};
    check(a.is_array() && a.size() >= 2 && a.size() <= 3, "expected a 2- or 3-vector");
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
    return v;
}

ordered_json json_sym(const SymMatrix& m) {
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < m.dim(); ++i) {
        ordered_json row = ordered_json::array();
        for (int j = 0; j < m.dim(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

SymMatrix sym_from_json(const ordered_json& rows) {
    int dim = int(rows.size());
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) m.set(i, j, rows[i][j].get<double>());
    return m;
}

std::string tag_name(PolyClass c) {
    switch (c) {
        case PolyClass::Q: return "Q";
        case PolyClass::UQ: return "UQ";
        case PolyClass::None: return "none";
    }
    fail("tag_name: bad enum");
}

PolyClass tag_from_name(const std::string& s) {
    if (s == "Q") return PolyClass::Q;
    if (s == "UQ") return PolyClass::UQ;
    if (s == "none") return PolyClass::None;
    fail("unknown polynomial tag " + s);
}

ordered_json json_poly(const QuadraticPoly& p) {
    ordered_json j;
    j["A"] = json_sym(p.A);
    j["b"] = json_vec(p.b, p.A.dim());
    j["tag"] = tag_name(p.tag);
    return j;
}

QuadraticPoly poly_from_json(const ordered_json& j) {
    QuadraticPoly p;
    p.A = sym_from_json(j.at("A"));
    p.b = vec_from_json(j.at("b"));
    p.tag = tag_from_name(j.at("tag").get<std::string>());
    return p;
}

BlowupBranch branch_from_name(const std::string& s) {
    if (s == "case1") return BlowupBranch::Case1;
    if (s == "case2a") return BlowupBranch::Case2a;
    if (s == "case2b") return BlowupBranch::Case2b;
    if (s == "none") return BlowupBranch::None;
    fail("unknown branch name " + s);
}

}  // namespace

std::string trace_to_json(const BlowupTrace& trace) {
    int dim = trace.steps.empty() ? 2 : trace.steps.front().p.A.dim();
    ordered_json j;
    j["dim"] = dim;
    j["x0"] = json_vec(trace.x0, dim);
    j["h_src"] = trace.h_src;
    j["h_work"] = trace.h_work;
    j["kappa"] = trace.kappa;
    j["tol_kernel"] = trace.tol_kernel;
    j["stop_reason"] = trace.stop_reason;
    j["breakdown"] = trace.breakdown;
    j["c_drift"] = trace.c_drift;
    j["stratum"] = trace.stratum;
    if (trace.has_limit) j["limit_q"] = json_poly(trace.limit_q);
    j["stages"] = trace.stages;
    ordered_json steps = ordered_json::array();
    for (const BlowupStep& s : trace.steps) {
        ordered_json js;
        js["k"] = s.k;
        js["r_total"] = s.r_total;
        js["eps"] = s.eps;
        js["conv_floor"] = s.conv_floor;
        js["lambda2"] = s.lambda2;
        js["floor_k"] = s.floor_k;
        js["branch"] = branch_name(s.branch);
        js["p"] = json_poly(s.p);
        if (s.has_d2h0) {
            js["d2h0"] = json_sym(s.d2h0);
            js["uh_gap"] = s.uh_gap;
            js["c_gap"] = s.c_gap;
        }
        steps.push_back(js);
    }
    j["steps"] = steps;
    return j.dump(2) + "\n";
}

BlowupTrace trace_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    BlowupTrace t;
    t.x0 = vec_from_json(j.at("x0"));
    t.h_src = j.at("h_src").get<double>();
    t.h_work = j.at("h_work").get<double>();
    t.kappa = j.at("kappa").get<double>();
    t.tol_kernel = j.at("tol_kernel").get<double>();
    t.stop_reason = j.at("stop_reason").get<std::string>();
    t.breakdown = j.at("breakdown").get<bool>();
    t.c_drift = j.at("c_drift").get<double>();
    t.stratum = j.at("stratum").get<int>();
    if (j.contains("limit_q")) {
        t.limit_q = poly_from_json(j.at("limit_q"));
        t.has_limit = true;
    }
    t.stages = j.at("stages").get<std::vector<int>>();
    for (const ordered_json& js : j.at("steps")) {
        BlowupStep s;
        s.k = js.at("k").get<int>();
        s.r_total = js.at("r_total").get<double>();
        s.eps = js.at("eps").get<double>();
        s.conv_floor = js.at("conv_floor").get<double>();
        s.lambda2 = js.at("lambda2").get<double>();
        s.floor_k = js.at("floor_k").get<double>();
        s.branch = branch_from_name(js.at("branch").get<std::string>());
        s.p = poly_from_json(js.at("p"));
        if (js.contains("d2h0")) {
            s.has_d2h0 = true;
            s.d2h0 = sym_from_json(js.at("d2h0"));
            s.uh_gap = js.at("uh_gap").get<double>();
            s.c_gap = js.at("c_gap").get<double>();
        }
        t.steps.push_back(s);
    }
    return t;
}

std::string trace_to_csv(const BlowupTrace& trace) {
    std::string out = "k,r_total,eps_k,branch,lambda2,kappa_eps\n";
    for (const BlowupStep& s : trace.steps) {
        out += std::to_string(s.k);
        out += ',' + format_double(s.r_total);
        out += ',' + format_double(s.eps);
        out += ',' + branch_name(s.branch);
        out += ',' + format_double(s.lambda2);
        out += ',' + format_double(trace.kappa * s.eps);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open " + path + " for writing");
    out << content;
    if (!out) fail("short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

double num_or(const ordered_json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j.at(key).get<double>() : fallback;
}

int int_or(const ordered_json& j, const std::string& key, int fallback) {
    return j.contains(key) ? j.at(key).get<int>() : fallback;
}

struct PipelineState {
    std::optional<ScalarField> u;
    std::optional<BlowupTrace> trace;
};

Vec unit_or_e1(const ordered_json& j, const std::string& key, int dim) {
    Vec e = {1, 0, 0};
    if (j.contains(key)) e = vec_from_json(j.at(key));
    double n = norm(e, dim);
    check(n > 0, "direction must be nonzero");
    return scaled(e, 1.0 / n);
}

Vec sample_in_ball(std::mt19937_64& rng, int dim, double radius) {
    std::uniform_real_distribution<double> unif(-radius, radius);
    for (;;) {
        Vec x = {unif(rng), unif(rng), 0};
        if (dim == 3) x[2] = unif(rng);
        if (norm(x, dim) <= radius) return x;
    }
}

class ExperimentRun {
  public:
    ExperimentRun(const ordered_json& cfg, const std::string& config_dir,
                  const std::string& out_override)
        : cfg_(cfg), op_(load_operator(cfg, config_dir)) {
        grid_ = load_grid(cfg.at("grid"), op_.dim());
        boundary_ = load_boundary(cfg.at("boundary").get<std::string>(), config_dir);
        const ordered_json& pipe = cfg.at("pipeline");
        if (!pipe.is_array() || pipe.empty()) throw ConfigError("pipeline must be nonempty");
        for (const ordered_json& st : pipe) {
            std::string name = st.at("step").get<std::string>();
            if (name != "solve" && name != "analyze" && name != "blowup" && name != "thin" &&
                name != "verify" && name != "decay")
                throw ConfigError("unknown pipeline step " + name);
            if (name == "verify") {
                std::string what = st.at("what").get<std::string>();
                if (what != "barrier" && what != "comparison" && what != "monotonicity" &&
                    what != "convexity")
                    throw ConfigError("unknown verify kind " + what);
            }
        }
        out_dir_ = out_override.empty() ? cfg.at("output").get<std::string>() : out_override;
        seed_ = cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0;
        rng_.seed(seed_);
    }

    void run() {
        std::filesystem::create_directories(out_dir_);
        const ordered_json& pipe = cfg_.at("pipeline");
        int index = 0;
        for (const ordered_json& st : pipe) {
            ++index;
            std::string name = st.at("step").get<std::string>();
            if (name == "solve") run_solve(st, index);
            else if (name == "analyze") run_analyze(st, index);
            else if (name == "blowup") run_blowup_step(st, index);
            else if (name == "thin") run_thin(st, index);
            else if (name == "verify") run_verify(st, index);
            else run_decay(st, index);
            steps_run_.push_back(name);
        }
        ordered_json manifest;
        manifest["seed"] = seed_;
        manifest["steps"] = steps_run_;
        manifest["artifacts"] = artifacts_;
        write_artifact("manifest.json", manifest.dump(2) + "\n");
    }

  private:
    static EllipticOperator load_operator(const ordered_json& cfg, const std::string& dir) {
        if (!cfg.contains("operator")) throw ConfigError("missing operator section");
        const ordered_json& op = cfg.at("operator");
        if (op.is_string()) {
            std::filesystem::path p = op.get<std::string>();
            if (p.is_relative()) p = std::filesystem::path(dir) / p;
            if (!std::filesystem::exists(p))
                throw ConfigError("operator config not found: " + p.string());
            return EllipticOperator::from_config_text(read_text_file(p.string()));
        }
        return EllipticOperator::from_config_text(op.dump());
    }

    static Grid load_grid(const ordered_json& g, int dim) {
        int n = g.at("n").get<int>();
        double hw = num_or(g, "half_width", 1.0);
        return Grid(dim, n, hw);
    }

    ScalarField load_boundary(const std::string& src, const std::string& dir) {
        if (src.rfind("builtin:", 0) == 0) {
            boundary_name_ = src.substr(8);
            if (!is_fixture(boundary_name_)) throw ConfigError("unknown fixture " + boundary_name_);
            return make_fixture(boundary_name_, grid_, op_);
        }
        std::filesystem::path p = src;
        if (p.is_relative()) p = std::filesystem::path(dir) / p;
        if (!std::filesystem::exists(p)) throw ConfigError("boundary field not found: " + p.string());
        ScalarField u = read_fbf(p.string());
        check(u.grid().same_geometry(grid_), "boundary field geometry differs from config grid");
        return u;
    }

    std::string artifact_name(int index, const std::string& stem) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%02d_", index);
        return std::string(buf) + stem;
    }

    void write_artifact(const std::string& name, const std::string& content) {
        write_text_file((std::filesystem::path(out_dir_) / name).string(), content);
        if (name != "manifest.json") artifacts_.push_back(name);
    }

    void write_field(const std::string& name, const ScalarField& u) {
        write_fbf(u, (std::filesystem::path(out_dir_) / name).string());
        artifacts_.push_back(name);
    }

    const ScalarField& need_solution() const {
        check(u_state_.u.has_value(), "pipeline step needs a prior solve step");
        return *u_state_.u;
    }

    void run_solve(const ordered_json& st, int index) {
        std::string m = st.contains("method") ? st.at("method").get<std::string>() : "penalization";
        check(m == "penalization" || m == "sweep", "solve method must be penalization or sweep");
        SolveMethod method =
            m == "penalization" ? SolveMethod::Penalization : SolveMethod::ProjectedSweep;
        auto [u, rep] = solve_obstacle(op_, boundary_, method);
        u_state_.u = u;
        ordered_json j;
        j["method"] = method_name(rep.method);
        j["iterations"] = rep.iterations;
        j["residual"] = rep.residual;
        j["active_fraction"] = rep.active_fraction;
        write_artifact(artifact_name(index, "solve.json"), j.dump(2) + "\n");
        write_field(artifact_name(index, "solution.fbf"), u);
    }

    void run_analyze(const ordered_json& st, int index) {
        const ScalarField& u = need_solution();
        Vec pt = st.contains("point") ? vec_from_json(st.at("point")) : Vec{0, 0, 0};
        ContactSet contact = extract_contact(u);
        ClassifyReport cls = classify_point(u, pt);
        std::vector<double> radii;
        if (st.contains("radii")) {
            radii = st.at("radii").get<std::vector<double>>();
        } else {
            double r = 16.0 * grid_.h();
            while (r < 0.5) {
                radii.push_back(r);
                r *= 1.5;
            }
            radii.push_back(0.5);
        }
        ThicknessProfile prof = thickness_profile(grid_, contact.nodes, pt, radii);
        ordered_json j;
        j["point"] = json_vec(grid_.point(grid_.nearest(pt)), grid_.dim);
        j["classification"] =
            cls.classification == PointClass::Singular ? "singular" : "regular";
        j["r_min"] = cls.r_min;
        j["delta_rmin"] = cls.delta_rmin;
        j["quadratic_residual"] = cls.quadratic_residual;
        j["halfspace_residual"] = cls.halfspace_residual;
        j["contact_count"] = contact.nodes.size();
        j["fb_count"] = contact.boundary_nodes.size();
        j["radii"] = prof.radii;
        j["delta"] = prof.delta;
        write_artifact(artifact_name(index, "analyze.json"), j.dump(2) + "\n");
    }

    void run_blowup_step(const ordered_json& st, int index) {
        const ScalarField& u = need_solution();
        Vec pt = st.contains("point") ? vec_from_json(st.at("point")) : Vec{0, 0, 0};
        BlowupConfig cfg;
        cfg.kappa = num_or(st, "kappa", cfg.kappa);
        cfg.rho = num_or(st, "rho", cfg.rho);
        cfg.r_case1 = num_or(st, "r_case1", cfg.r_case1);
        cfg.beta_expect = num_or(st, "beta", cfg.beta_expect);
        cfg.max_steps = int_or(st, "max_steps", cfg.max_steps);
        cfg.floor_mult = num_or(st, "floor_mult", cfg.floor_mult);
        cfg.r_init = num_or(st, "r_init", cfg.r_init);
        cfg.work_n = int_or(st, "work_n", cfg.work_n);
        cfg.min_floor_steps = int_or(st, "min_floor_steps", cfg.min_floor_steps);
        BlowupTrace trace = run_blowup(u, pt, op_, cfg);
        u_state_.trace = trace;
        write_artifact(artifact_name(index, "trace.json"), trace_to_json(trace));
        write_artifact(artifact_name(index, "decay.csv"), trace_to_csv(trace));
    }

    void run_thin(const ordered_json& st, int index) {
        ThinSolution ts = solve_thin(boundary_);
        std::vector<double> radii;
        if (st.contains("radii")) {
            radii = st.at("radii").get<std::vector<double>>();
        } else {
            for (double r : {0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) radii.push_back(r);
        }
        FrequencyProfile prof = frequency(ts.v, {0, 0, 0}, radii);
        ThinClass cls = classify_thin(prof);
        ordered_json j;
        j["iterations"] = ts.iterations;
        j["residual"] = ts.residual;
        j["radii"] = prof.radii;
        j["frequency"] = prof.value;
        j["possibility"] = cls == ThinClass::Possibility1 ? 1
                           : cls == ThinClass::Possibility2 ? 2
                                                            : 3;
        write_artifact(artifact_name(index, "thin.json"), j.dump(2) + "\n");
        write_field(artifact_name(index, "thin_solution.fbf"), ts.v);
    }

    void run_verify(const ordered_json& st, int index) {
        std::string what = st.at("what").get<std::string>();
        ordered_json j;
        j["what"] = what;
        if (what == "barrier") {
            BarrierSpec spec;
            spec.r = num_or(st, "r", 0.5);
            double gamma = gamma_of(op_);
            spec.N = num_or(st, "N", 10.0 * gamma * spec.r * spec.r);
            spec.eta = num_or(st, "eta", spec.r / 100.0);
            int count = int_or(st, "centers", 25);
            ScalarField w = build_barrier(op_, spec, grid_);
            std::vector<Vec> centers;
            for (int i = 0; i < count; ++i)
                centers.push_back(sample_in_ball(rng_, grid_.dim, spec.r / 2));
            BarrierReport rep = barrier_check(w, op_, spec, centers);
            j["r"] = spec.r;
            j["eta"] = spec.eta;
            j["N"] = spec.N;
            j["pass"] = rep.pass;
            j["min_quadratic_slack"] = rep.min_quadratic_slack;
            j["min_patch_slack"] = rep.min_patch_slack;
            j["centers_checked"] = rep.centers_checked;
        } else if (what == "comparison") {
            const ScalarField& u = need_solution();
            double c = num_or(st, "shift", 0.1);
            check(c > 0, "comparison shift must be positive");
            ScalarField phi(grid_), psi(grid_);
            for (std::size_t i = 0; i < grid_.total(); ++i) {
                phi.at(i) = std::max(u.at(i) - c, 0.0);
                psi.at(i) = u.at(i) + c;
            }
            ComparisonReport rep = comparison_check(op_, u, phi, psi);
            j["shift"] = c;
            j["hypotheses_ok"] = rep.hypotheses_ok;
            j["failed_hypothesis"] = rep.failed_hypothesis;
            j["max_lower_violation"] = rep.max_lower_violation;
            j["max_upper_violation"] = rep.max_upper_violation;
            j["pass"] = rep.pass;
        } else if (what == "monotonicity") {
            const ScalarField& u = need_solution();
            MonotonicityParams mp;
            mp.K = num_or(st, "K", mp.K);
            mp.sigma = num_or(st, "sigma", mp.sigma);
            mp.eta = num_or(st, "eta", mp.eta);
            mp.r = num_or(st, "r", mp.r);
            mp.variant = int_or(st, "variant", mp.variant);
            Vec e = unit_or_e1(st, "e", grid_.dim);
            QuadraticPoly fit = fit_quadratic(u, {0, 0, 0}, mp.r, false);
            QuadraticPoly p = project_to_class(fit.A, {0, 0, 0}, op_, PolyClass::Q);
            ApproxCertificate cert = certify(u, p, {0, 0, 0}, mp.r, op_);
            MonotonicityReport rep = monotonicity_check(u, e, mp, op_, cert.eps);
            j["eps"] = cert.eps;
            j["variant"] = mp.variant;
            j["hypotheses_met"] = rep.hypotheses_met;
            j["hypothesis_margin"] = rep.hypothesis_margin;
            j["conclusion_holds"] = rep.conclusion_holds;
            j["min_directional"] = rep.min_directional;
        } else if (what == "convexity") {
            const ScalarField& u = need_solution();
            double r = num_or(st, "r", 0.5);
            double c_test = num_or(st, "c_test", 1.0);
            Vec e = unit_or_e1(st, "e", grid_.dim);
            QuadraticPoly fit = fit_quadratic(u, {0, 0, 0}, r, false);
            QuadraticPoly p = project_to_class(fit.A, {0, 0, 0}, op_, PolyClass::Q);
            ApproxCertificate cert = certify(u, p, {0, 0, 0}, r, op_);
            ConvexityReport rep = convexity_check(u, cert, e, c_test);
            j["eps"] = cert.eps;
            j["ratio"] = rep.ratio;
            j["precondition_met"] = rep.precondition_met;
            j["conclusion_holds"] = rep.conclusion_holds;
            j["min_second_difference"] = rep.min_second_difference;
        } else {
            fail("unknown verify kind " + what);
        }
        write_artifact(artifact_name(index, "verify_" + what + ".json"), j.dump(2) + "\n");
    }

    void run_decay(const ordered_json& st, int index) {
        DecayFit fit;
        if (st.contains("eps")) {
            fit = decay_fit(st.at("eps").get<std::vector<double>>());
        } else {
            check(u_state_.trace.has_value(), "decay step needs a prior blowup step");
            fit = decay_fit(*u_state_.trace);
        }
        ordered_json j;
        j["rate_kind"] = fit.rate_kind;
        j["lambda"] = fit.lambda;
        j["residual_geometric"] = fit.residual_geometric;
        j["c_exponent"] = fit.c_exponent;
        j["residual_logpower"] = fit.residual_logpower;
        write_artifact(artifact_name(index, "decay_fit.json"), j.dump(2) + "\n");
    }

    ordered_json cfg_;
    EllipticOperator op_;
    Grid grid_;
    ScalarField boundary_{Grid{}};
    std::string boundary_name_;
    std::string out_dir_;
    std::uint64_t seed_ = 0;
    std::mt19937_64 rng_;
    PipelineState u_state_;
    std::vector<std::string> steps_run_;
    ordered_json artifacts_ = ordered_json::array();
};

}  // namespace

int run_experiment(const std::string& config_path, const std::string& out_override) {
    std::optional<ExperimentRun> run;
    try {
        if (!std::filesystem::exists(config_path)) throw ConfigError("no such config");
        ordered_json cfg = ordered_json::parse(read_text_file(config_path));
        std::string dir = std::filesystem::path(config_path).parent_path().string();
        run.emplace(cfg, dir, out_override);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
    try {
        run->run();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pipeline error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace fblab
