#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fblab/sym_matrix.hpp"

namespace fblab {

enum class OperatorKind { ScaledTrace, SmoothedBellman, PucciMax, PucciMin };

std::string kind_name(OperatorKind k);

// Gradient-Hoelder data for the operator derivative. These values are
// empirical estimates recorded for reporting; they are not certified bounds.
struct HolderData {
    double alpha;
    double constant;
};

// Degenerate-elliptic operator F acting on symmetric matrices, normalized so
// that F(0) = 0 and, for positive semidefinite P,
//     (1/lambda) |P| <= F(M + P) - F(M) <= lambda |P|.
//
// ScaledTrace      F(M) = tr(M)
// SmoothedBellman  F(M) = tau * log( sum_i exp(tr(A_i M)/tau) / count )
// PucciMax/Min     extremal operators with parameter pucci_lambda; these are
//                  not C^1 and are admitted only for comparison and barrier
//                  work, never where a derivative is required.
class EllipticOperator {
  public:
    static EllipticOperator scaled_trace(int dim);
    static EllipticOperator smoothed_bellman(int dim, std::vector<SymMatrix> coeffs, double tau);
    static EllipticOperator pucci_max(int dim, double pucci_lambda);
    static EllipticOperator pucci_min(int dim, double pucci_lambda);

    OperatorKind kind() const { return kind_; }
    int dim() const { return dim_; }
    // Ellipticity constant of the sandwich inequality above.
    double lambda() const { return lambda_; }
    // Convexity modulus used in the approximation-class membership test.
    double c0() const { return 1.0 / (16.0 * lambda_ * lambda_); }
    bool smooth() const { return kind_ == OperatorKind::ScaledTrace || kind_ == OperatorKind::SmoothedBellman; }
    // Convex as a function of the matrix argument (PucciMin is concave).
    bool convex() const { return kind_ != OperatorKind::PucciMin; }

    double tau() const { return tau_; }
    double pucci_lambda() const { return pucci_lambda_; }
    const std::vector<SymMatrix>& coefficients() const { return coeffs_; }
    const std::optional<HolderData>& holder() const { return holder_; }

    double evaluate(const SymMatrix& m) const;
    // dF/dM at m. Errors for the non-smooth Pucci kinds.
    SymMatrix derivative(const SymMatrix& m) const;

    // Structured text (JSON) round-trip of the defining data.
    std::string to_config_text() const;
    static EllipticOperator from_config_text(const std::string& text);

  private:
    EllipticOperator() = default;

    OperatorKind kind_ = OperatorKind::ScaledTrace;
    int dim_ = 2;
    double lambda_ = 1.0;
    double tau_ = 0.0;
    double pucci_lambda_ = 1.0;
    std::vector<SymMatrix> coeffs_;
    std::optional<HolderData> holder_;
};

// Scalar gamma with F(gamma * I) = 1 (isotropic) or F(gamma * e e^T) = 1
// (directional), found by bisection to |F - 1| <= 1e-12. Always lies in
// [1/lambda, lambda].
double gamma_of(const EllipticOperator& f);
double gamma_of(const EllipticOperator& f, const Vec& direction);

// Coefficients F_ij frozen at given Hessians: the linear operator
// L(M) = sum_ij F_ij M_ij appearing in the convexity inequalities
//     L_v(w - v) <= F(D2w) - F(D2v) <= L_w(w - v).
class LinearizedOperator {
  public:
    LinearizedOperator(const EllipticOperator& f, const SymMatrix& constant_hessian);
    LinearizedOperator(const EllipticOperator& f, const std::vector<SymMatrix>& hessians);

    bool constant() const { return per_node_.empty(); }
    std::size_t size() const { return constant() ? 1 : per_node_.size(); }
    const SymMatrix& at(std::size_t node) const;
    double apply(std::size_t node, const SymMatrix& m) const { return at(node).ddot(m); }

  private:
    void validate(const SymMatrix& coeff, double lambda) const;
    SymMatrix constant_coeff_;
    std::vector<SymMatrix> per_node_;
};

LinearizedOperator linearize(const EllipticOperator& f, const SymMatrix& constant_hessian);
LinearizedOperator linearize(const EllipticOperator& f, const std::vector<SymMatrix>& hessians);

}  // namespace fblab
