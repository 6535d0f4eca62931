#include "fblab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace fblab {

using ordered_json = nlohmann::ordered_json;

std::string kind_name(OperatorKind k) {
    switch (k) {
        case OperatorKind::ScaledTrace: return "scaled-trace";
        case OperatorKind::SmoothedBellman: return "smoothed-bellman";
        case OperatorKind::PucciMax: return "pucci-max";
        case OperatorKind::PucciMin: return "pucci-min";
    }
    fail("unknown operator kind");
}

EllipticOperator EllipticOperator::scaled_trace(int dim) {
    check(dim == 2 || dim == 3, "scaled_trace: dim must be 2 or 3");
    EllipticOperator f;
    f.kind_ = OperatorKind::ScaledTrace;
    f.dim_ = dim;
    // tr(P) lies between |P| and dim * |P| for P >= 0.
    f.lambda_ = dim;
    f.holder_ = HolderData{1.0, 0.0};
    return f;
}

EllipticOperator EllipticOperator::smoothed_bellman(int dim, std::vector<SymMatrix> coeffs,
                                                    double tau) {
    check(dim == 2 || dim == 3, "smoothed_bellman: dim must be 2 or 3");
    check(tau > 0, "smoothed_bellman: tau must be positive");
    check(!coeffs.empty(), "smoothed_bellman: needs at least one coefficient matrix");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (const auto& a : coeffs) {
        check(a.dim() == dim, "smoothed_bellman: coefficient dimension mismatch");
        auto ev = a.eigenvalues();
        check(ev[dim - 1] > 0, "smoothed_bellman: coefficient matrices must be positive definite");
        lo = std::min(lo, ev[dim - 1]);
        hi = std::max(hi, ev[0]);
    }
    EllipticOperator f;
    f.kind_ = OperatorKind::SmoothedBellman;
    f.dim_ = dim;
    f.tau_ = tau;
    f.coeffs_ = std::move(coeffs);
    // Increments are sandwiched by lo * |P| and hi * tr(P) <= hi * dim * |P|.
    f.lambda_ = std::max({1.0, 1.0 / lo, hi * dim});
    // Softmax-weight Lipschitz estimate; recorded, not certified.
    f.holder_ = HolderData{1.0, 2.0 * hi * hi * dim / tau};
    return f;
}

EllipticOperator EllipticOperator::pucci_max(int dim, double pucci_lambda) {
    check(dim == 2 || dim == 3, "pucci_max: dim must be 2 or 3");
    check(pucci_lambda >= 1.0, "pucci_max: parameter must be >= 1");
    EllipticOperator f;
    f.kind_ = OperatorKind::PucciMax;
    f.dim_ = dim;
    f.pucci_lambda_ = pucci_lambda;
    f.lambda_ = pucci_lambda * dim;
    return f;
}

EllipticOperator EllipticOperator::pucci_min(int dim, double pucci_lambda) {
    check(dim == 2 || dim == 3, "pucci_min: dim must be 2 or 3");
    check(pucci_lambda >= 1.0, "pucci_min: parameter must be >= 1");
    EllipticOperator f;
    f.kind_ = OperatorKind::PucciMin;
    f.dim_ = dim;
    f.pucci_lambda_ = pucci_lambda;
    f.lambda_ = pucci_lambda * dim;
    return f;
}

double EllipticOperator::evaluate(const SymMatrix& m) const {
    check(m.dim() == dim_, "evaluate: matrix dimension mismatch");
    switch (kind_) {
        case OperatorKind::ScaledTrace:
            return m.trace();
        case OperatorKind::SmoothedBellman: {
            // Stable log-sum-exp of tr(A_i M)/tau, normalized so F(0) = 0.
            double mx = -std::numeric_limits<double>::infinity();
            for (const auto& a : coeffs_) mx = std::max(mx, a.ddot(m) / tau_);
            double s = 0;
            for (const auto& a : coeffs_) s += std::exp(a.ddot(m) / tau_ - mx);
            return tau_ * (mx + std::log(s) - std::log(double(coeffs_.size())));
        }
        case OperatorKind::PucciMax:
        case OperatorKind::PucciMin: {
            auto ev = m.eigenvalues();
            double s = 0;
            for (int k = 0; k < dim_; ++k) {
                double up = kind_ == OperatorKind::PucciMax ? pucci_lambda_ : 1.0 / pucci_lambda_;
                double dn = kind_ == OperatorKind::PucciMax ? 1.0 / pucci_lambda_ : pucci_lambda_;
                s += ev[k] > 0 ? up * ev[k] : dn * ev[k];
            }
            return s;
        }
    }
    fail("unknown operator kind");
}

SymMatrix EllipticOperator::derivative(const SymMatrix& m) const {
    check(m.dim() == dim_, "derivative: matrix dimension mismatch");
    if (!smooth())
        fail("derivative: " + kind_name(kind_) + " is not differentiable");
    if (kind_ == OperatorKind::ScaledTrace) return SymMatrix::identity(dim_);
    // Softmax-weighted average of the coefficient matrices.
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& a : coeffs_) mx = std::max(mx, a.ddot(m) / tau_);
    double z = 0;
    std::vector<double> w(coeffs_.size());
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        w[i] = std::exp(coeffs_[i].ddot(m) / tau_ - mx);
        z += w[i];
    }
    SymMatrix d(dim_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) d = d + coeffs_[i] * (w[i] / z);
    return d;
}

std::string EllipticOperator::to_config_text() const {
    ordered_json j;
    j["kind"] = kind_name(kind_);
    j["dim"] = dim_;
    j["lambda"] = lambda_;
    if (kind_ == OperatorKind::SmoothedBellman) {
        j["tau"] = tau_;
        ordered_json mats = ordered_json::array();
        for (const auto& a : coeffs_) {
            ordered_json rows = ordered_json::array();
            for (int i = 0; i < dim_; ++i)
                for (int k = 0; k < dim_; ++k) rows.push_back(a(i, k));
            mats.push_back(rows);
        }
        j["coefficients"] = mats;
    }
    if (kind_ == OperatorKind::PucciMax || kind_ == OperatorKind::PucciMin)
        j["pucci_lambda"] = pucci_lambda_;
    if (holder_) {
        j["holder_alpha"] = holder_->alpha;
        j["holder_constant"] = holder_->constant;
    }
    return j.dump(2) + "\n";
}

EllipticOperator EllipticOperator::from_config_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("operator config: invalid JSON: ") + e.what());
    }
    check(j.contains("kind") && j.contains("dim"), "operator config: missing kind or dim");
    std::string kind = j["kind"].get<std::string>();
    int dim = j["dim"].get<int>();
    if (kind == "scaled-trace") return scaled_trace(dim);
    if (kind == "smoothed-bellman") {
        check(j.contains("tau") && j.contains("coefficients"),
              "operator config: smoothed-bellman needs tau and coefficients");
        std::vector<SymMatrix> coeffs;
        for (const auto& rows : j["coefficients"]) {
            check(int(rows.size()) == dim * dim,
                  "operator config: coefficient matrix has wrong size");
            SymMatrix a(dim);
            for (int i = 0; i < dim; ++i)
                for (int k = 0; k < dim; ++k) {
                    double v = rows[std::size_t(i * dim + k)].get<double>();
                    if (k >= i) {
                        a.set(i, k, v);
                    } else {
                        check(std::abs(a(i, k) - v) <= 1e-12 * (1 + std::abs(v)),
                              "operator config: coefficient matrix not symmetric");
                    }
                }
            coeffs.push_back(a);
        }
        return smoothed_bellman(dim, std::move(coeffs), j["tau"].get<double>());
    }
    if (kind == "pucci-max" || kind == "pucci-min") {
        check(j.contains("pucci_lambda"), "operator config: pucci needs pucci_lambda");
        double pl = j["pucci_lambda"].get<double>();
        return kind == "pucci-max" ? pucci_max(dim, pl) : pucci_min(dim, pl);
    }
    throw std::invalid_argument("operator config: unknown kind '" + kind + "'");
}

namespace {

double bisect_gamma(const EllipticOperator& f, const SymMatrix& p) {
    double lo = 1.0 / (2.0 * f.lambda());
    double hi = 2.0 * f.lambda();
    double flo = f.evaluate(p * lo) - 1.0;
    double fhi = f.evaluate(p * hi) - 1.0;
    check(flo < 0 && fhi > 0, "gamma_of: bracket failure");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f.evaluate(p * mid) - 1.0;
        if (std::abs(fm) <= 1e-13) return mid;
        (fm < 0 ? lo : hi) = mid;
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double gamma_of(const EllipticOperator& f) {
    return bisect_gamma(f, SymMatrix::identity(f.dim()));
}

double gamma_of(const EllipticOperator& f, const Vec& direction) {
    double n = norm(direction, f.dim());
    check(n > 0, "gamma_of: zero direction");
    return bisect_gamma(f, SymMatrix::outer(f.dim(), scaled(direction, 1.0 / n)));
}

LinearizedOperator::LinearizedOperator(const EllipticOperator& f, const SymMatrix& constant_hessian)
    : constant_coeff_(f.derivative(constant_hessian)) {
    validate(constant_coeff_, f.lambda());
}

LinearizedOperator::LinearizedOperator(const EllipticOperator& f,
                                       const std::vector<SymMatrix>& hessians)
    : constant_coeff_(f.dim()) {
    check(!hessians.empty(), "linearize: empty hessian list");
    per_node_.reserve(hessians.size());
    for (const auto& h : hessians) {
        per_node_.push_back(f.derivative(h));
        validate(per_node_.back(), f.lambda());
    }
}

const SymMatrix& LinearizedOperator::at(std::size_t node) const {
    if (constant()) return constant_coeff_;
    check(node < per_node_.size(), "LinearizedOperator: node out of range");
    return per_node_[node];
}

void LinearizedOperator::validate(const SymMatrix& coeff, double lambda) const {
    auto ev = coeff.eigenvalues();
    double lo = ev[coeff.dim() - 1], hi = ev[0];
    check(lo >= 1.0 / lambda - 1e-9 && hi <= lambda + 1e-9,
          "linearize: coefficient spectrum outside ellipticity band");
}

LinearizedOperator linearize(const EllipticOperator& f, const SymMatrix& constant_hessian) {
    return LinearizedOperator(f, constant_hessian);
}

LinearizedOperator linearize(const EllipticOperator& f, const std::vector<SymMatrix>& hessians) {
    return LinearizedOperator(f, hessians);
}

}  // namespace fblab
