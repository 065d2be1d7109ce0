#pragma once

#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ratspec/matrix_tuple.hpp"
#include "ratspec/pencil.hpp"

namespace ratspec {

/// Reported when the recursive inverse rule fails at some subexpression:
/// the inner evaluation had smallest singular value <= inv_tol * largest.
struct DomainFailure {
  std::vector<int> path;   // child indices from the root (0 = lhs/inner, 1 = rhs)
  ExprPtr subexpression;   // the offending Inverse node
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

class EvalOutcome {
 public:
  EvalOutcome(Matrix value) : v_(std::move(value)) {}
  EvalOutcome(DomainFailure f) : v_(std::move(f)) {}

  bool ok() const { return std::holds_alternative<Matrix>(v_); }
  explicit operator bool() const { return ok(); }

  const Matrix& value() const { return std::get<Matrix>(v_); }
  const DomainFailure& failure() const { return std::get<DomainFailure>(v_); }

 private:
  std::variant<Matrix, DomainFailure> v_;
};

namespace eval_detail {

struct SigmaPair {
  double min, max;
};

inline SigmaPair singular_extremes(const Matrix& m) {
  if (m.rows() > 32) {
    Eigen::BDCSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    return {s(s.size() - 1), s(0)};
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  return {s(s.size() - 1), s(0)};
}

/// I (x) u_j with identity coefficient: the inverse of a unitary argument is
/// its adjoint, exactly and cheaply, with no domain test needed.
inline bool is_plain_unitary_leaf(const RationalExpr& e) {
  return e.kind() == NodeKind::ScaledVariable && e.var().kind == VarKind::Unitary &&
         detail::is_identity_coeff(e.coefficient());
}

class Evaluator {
 public:
  Evaluator(const MatrixTuple& point, double inv_tol) : point_(point), inv_tol_(inv_tol) {}

  std::optional<Matrix> run(const ExprPtr& e) {
    switch (e->kind()) {
      case NodeKind::Constant:
        return kron(e->coefficient(), Matrix::Identity(point_.dim, point_.dim));
      case NodeKind::ScaledVariable:
        return kron(e->coefficient(), point_.get(e->var()));
      case NodeKind::Sum: {
        path_.push_back(0);
        auto l = run(e->lhs());
        path_.pop_back();
        if (!l) return std::nullopt;
        path_.push_back(1);
        auto r = run(e->rhs());
        path_.pop_back();
        if (!r) return std::nullopt;
        return *l + *r;
      }
      case NodeKind::Product: {
        path_.push_back(0);
        auto l = run(e->lhs());
        path_.pop_back();
        if (!l) return std::nullopt;
        path_.push_back(1);
        auto r = run(e->rhs());
        path_.pop_back();
        if (!r) return std::nullopt;
        return *l * *r;
      }
      case NodeKind::Inverse: {
        if (is_plain_unitary_leaf(*e->lhs()))
          return kron(e->lhs()->coefficient(),
                      Matrix(point_.get(e->lhs()->var()).adjoint()));
        path_.push_back(0);
        auto inner = run(e->lhs());
        path_.pop_back();
        if (!inner) return std::nullopt;
        SigmaPair s = singular_extremes(*inner);
        if (!(s.min > inv_tol_ * s.max)) {
          failure_ = DomainFailure{path_, e, s.min, s.max};
          return std::nullopt;
        }
        return inner->partialPivLu().inverse();
      }
    }
    throw Error("unreachable");
  }

  DomainFailure take_failure() { return std::move(failure_); }

 private:
  const MatrixTuple& point_;
  double inv_tol_;
  std::vector<int> path_;
  DomainFailure failure_;
};

}  // namespace eval_detail

/// Recursive evaluation with the domain semantics of rational expressions:
/// sums and products intersect domains, and an inverse node is defined only
/// where the inner evaluation is invertible (relative smallest singular
/// value above inv_tol).
inline EvalOutcome eval_expr(const ExprPtr& e, const MatrixTuple& point,
                             double inv_tol = 1e-10) {
  if (!point.matches(e->signature()))
    throw ShapeMismatchError("matrix tuple does not match the expression signature");
  eval_detail::Evaluator ev(point, inv_tol);
  if (auto value = ev.run(e)) return EvalOutcome(std::move(*value));
  return EvalOutcome(ev.take_failure());
}

/// A0 (x) I + sum A_j (x) X_j + sum B_j (x) U_j (+ B_j* (x) U_j* if paired).
inline Matrix eval_pencil(const AffinePencil& pencil, const MatrixTuple& point) {
  if (!point.matches(pencil.signature))
    throw ShapeMismatchError("matrix tuple does not match the pencil signature");
  const int n = point.dim;
  Matrix out = kron(pencil.constant, Matrix::Identity(n, n));
  for (int j = 0; j < pencil.signature.selfadjoint_count; ++j)
    out += kron(pencil.selfadjoint_coeffs[j], point.selfadjoint[j]);
  for (int j = 0; j < pencil.signature.unitary_count; ++j) {
    out += kron(pencil.unitary_coeffs[j], point.unitary[j]);
    if (pencil.adjoint_paired)
      out += kron(pencil.unitary_coeffs[j].adjoint(), Matrix(point.unitary[j].adjoint()));
  }
  return out;
}

/// det(Q(Z)) in log-modulus/phase form so that pencils of dimension in the
/// thousands do not overflow. A singular evaluation reports phase 0 and
/// log_abs = -infinity.
struct LogDet {
  double log_abs = 0.0;
  Complex phase = 1.0;

  bool is_zero() const { return phase == Complex(0.0, 0.0); }
};

inline LogDet log_det(const Matrix& m) {
  Eigen::PartialPivLU<Matrix> lu(m);
  LogDet out;
  out.phase = Complex(static_cast<double>(lu.permutationP().determinant()), 0.0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Complex d = lu.matrixLU()(i, i);
    double a = std::abs(d);
    if (a == 0.0) return {-std::numeric_limits<double>::infinity(), Complex(0.0, 0.0)};
    out.log_abs += std::log(a);
    out.phase *= d / a;
  }
  return out;
}

inline LogDet pencil_det(const AffinePencil& pencil, const MatrixTuple& point) {
  return log_det(eval_pencil(pencil, point));
}

/// Outcome of checking R(X) = u A(X)^{-1} v (or w* Q^{-1} w) at one point.
struct RepCheck {
  bool ok = false;
  double residual = std::numeric_limits<double>::quiet_NaN();
  bool pencil_invertible = false;
  std::optional<DomainFailure> expr_failure;
};

namespace eval_detail {

inline RepCheck check_representation(const AffinePencil& pencil, const Matrix& left,
                                     const Matrix& right, bool hermitian_part,
                                     const ExprPtr& expr, const MatrixTuple& point,
                                     double tol, double inv_tol) {
  RepCheck report;
  EvalOutcome direct = eval_expr(expr, point, inv_tol);
  if (!direct) {
    report.expr_failure = direct.failure();
    return report;
  }
  Matrix q = eval_pencil(pencil, point);
  SigmaPair s = singular_extremes(q);
  report.pencil_invertible = s.min > inv_tol * s.max;
  if (!report.pencil_invertible) return report;

  const int n = point.dim;
  Matrix rhs = kron(right, Matrix::Identity(n, n));
  Matrix solved = q.partialPivLu().solve(rhs);
  Matrix via_pencil = kron(left, Matrix::Identity(n, n)) * solved;
  Matrix target = direct.value();
  if (hermitian_part) target = 0.5 * (target + target.adjoint()).eval();
  report.residual = frobenius(target - via_pencil) / (1.0 + frobenius(target));
  report.ok = report.residual <= tol;
  return report;
}

}  // namespace eval_detail

/// Verifies the representation identity at one in-domain point, including
/// the domain inclusion dom(R) in dom(A^{-1}).
inline RepCheck verify_representation(const FormalLinRep& rep, const ExprPtr& expr,
                                      const MatrixTuple& point, double tol = 1e-8,
                                      double inv_tol = 1e-10) {
  return eval_detail::check_representation(rep.pencil, rep.left, rep.right,
                                           /*hermitian_part=*/false, expr, point, tol,
                                           inv_tol);
}

/// For the doubled representation, w* Q^{-1} w reproduces the Hermitian part
/// of R(X); at self-adjoint evaluations that is R(X) itself.
inline RepCheck verify_representation(const SaLinRep& rep, const ExprPtr& expr,
                                      const MatrixTuple& point, double tol = 1e-8,
                                      double inv_tol = 1e-10) {
  return eval_detail::check_representation(rep.pencil, rep.column.adjoint(), rep.column,
                                           /*hermitian_part=*/true, expr, point, tol,
                                           inv_tol);
}

}  // namespace ratspec
