#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ratspec/common.hpp"

namespace ratspec {

/// Variable alphabet: d1 self-adjoint variables x1..x{d1} followed by
/// d2 unitary variables u1..u{d2}.
struct Signature {
  int selfadjoint_count = 0;  // d1
  int unitary_count = 0;      // d2

  Signature() = default;
  Signature(int d1, int d2) : selfadjoint_count(d1), unitary_count(d2) {
    if (d1 < 0 || d2 < 0 || d1 + d2 < 1)
      throw ConfigError("signature requires d1 >= 0, d2 >= 0, d1 + d2 >= 1");
  }

  /// Skips the d1 + d2 >= 1 check; variable-free contexts (constant tuples,
  /// pencils without variables) are legitimate.
  static Signature unchecked(int d1, int d2) {
    Signature s;
    s.selfadjoint_count = d1;
    s.unitary_count = d2;
    return s;
  }

  friend bool operator==(const Signature&, const Signature&) = default;
};

enum class VarKind { SelfAdjoint, Unitary };

/// Zero-based reference into a Signature.
struct VarRef {
  VarKind kind = VarKind::SelfAdjoint;
  int index = 0;

  friend bool operator==(const VarRef&, const VarRef&) = default;
};

inline void check_var(const Signature& sig, VarRef v) {
  int limit = v.kind == VarKind::SelfAdjoint ? sig.selfadjoint_count : sig.unitary_count;
  if (v.index < 0 || v.index >= limit)
    throw UnknownVariableError(std::string(v.kind == VarKind::SelfAdjoint ? "x" : "u") +
                               std::to_string(v.index + 1) + " exceeds signature");
}

enum class NodeKind { Constant, ScaledVariable, Sum, Product, Inverse };

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

class RationalExpr;
using ExprPtr = std::shared_ptr<const RationalExpr>;

/// Immutable node of a matrix-valued noncommutative rational expression.
/// Leaves carry a constant coefficient A and stand for A (x) 1 or A (x) z_j;
/// interior nodes are Sum, Product and Inverse. Expressions are completely
/// formal: no arithmetic identification is ever performed on them.
class RationalExpr {
 public:
  static ExprPtr constant(Matrix a, Signature sig) {
    if (a.size() == 0) throw ShapeMismatchError("constant coefficient must be non-empty");
    auto e = std::make_shared<RationalExpr>(Private{});
    e->kind_ = NodeKind::Constant;
    e->shape_ = {a.rows(), a.cols()};
    e->coefficient_ = std::move(a);
    e->signature_ = sig;
    return e;
  }

  static ExprPtr scaled_variable(Matrix a, VarRef var, Signature sig) {
    if (a.size() == 0) throw ShapeMismatchError("variable coefficient must be non-empty");
    check_var(sig, var);
    auto e = std::make_shared<RationalExpr>(Private{});
    e->kind_ = NodeKind::ScaledVariable;
    e->shape_ = {a.rows(), a.cols()};
    e->coefficient_ = std::move(a);
    e->var_ = var;
    e->signature_ = sig;
    return e;
  }

  /// Plain scalar variable: 1 (x) z_j.
  static ExprPtr variable(VarRef var, Signature sig) {
    return scaled_variable(Matrix::Ones(1, 1), var, sig);
  }

  static ExprPtr sum(ExprPtr lhs, ExprPtr rhs) {
    require_same_signature(*lhs, *rhs);
    if (lhs->shape() != rhs->shape())
      throw ShapeMismatchError("sum of " + shape_str(lhs->shape()) + " and " +
                               shape_str(rhs->shape()));
    auto e = std::make_shared<RationalExpr>(Private{});
    e->kind_ = NodeKind::Sum;
    e->shape_ = lhs->shape();
    e->signature_ = lhs->signature();
    e->lhs_ = std::move(lhs);
    e->rhs_ = std::move(rhs);
    return e;
  }

  static ExprPtr product(ExprPtr lhs, ExprPtr rhs) {
    require_same_signature(*lhs, *rhs);
    if (lhs->cols() != rhs->rows())
      throw ShapeMismatchError("product of " + shape_str(lhs->shape()) + " and " +
                               shape_str(rhs->shape()));
    auto e = std::make_shared<RationalExpr>(Private{});
    e->kind_ = NodeKind::Product;
    e->shape_ = {lhs->rows(), rhs->cols()};
    e->signature_ = lhs->signature();
    e->lhs_ = std::move(lhs);
    e->rhs_ = std::move(rhs);
    return e;
  }

  static ExprPtr inverse(ExprPtr inner) {
    if (inner->rows() != inner->cols())
      throw ShapeMismatchError("inverse of non-square " + shape_str(inner->shape()));
    auto e = std::make_shared<RationalExpr>(Private{});
    e->kind_ = NodeKind::Inverse;
    e->shape_ = inner->shape();
    e->signature_ = inner->signature();
    e->lhs_ = std::move(inner);
    return e;
  }

  NodeKind kind() const { return kind_; }
  Shape shape() const { return shape_; }
  Eigen::Index rows() const { return shape_.rows; }
  Eigen::Index cols() const { return shape_.cols; }
  const Signature& signature() const { return signature_; }

  const Matrix& coefficient() const { return coefficient_; }  // Constant / ScaledVariable
  VarRef var() const { return var_; }                         // ScaledVariable
  const ExprPtr& lhs() const { return lhs_; }                 // Sum / Product / Inverse
  const ExprPtr& rhs() const { return rhs_; }                 // Sum / Product

  bool is_leaf() const {
    return kind_ == NodeKind::Constant || kind_ == NodeKind::ScaledVariable;
  }

  struct Private {};  // factory-only construction
  explicit RationalExpr(Private) {}

 private:
  static void require_same_signature(const RationalExpr& a, const RationalExpr& b) {
    if (!(a.signature() == b.signature()))
      throw ShapeMismatchError("operands declared over different signatures");
  }

  static std::string shape_str(Shape s) {
    return std::to_string(s.rows) + "x" + std::to_string(s.cols);
  }

  NodeKind kind_ = NodeKind::Constant;
  Shape shape_;
  Matrix coefficient_;
  VarRef var_;
  ExprPtr lhs_, rhs_;
  Signature signature_;
};

/// Cached shape of an expression; factories guarantee consistency.
inline Shape shape(const ExprPtr& e) { return e->shape(); }

/// Recomputes the shape bottom-up, ignoring the cache. Used to verify that
/// the cache never drifts from the size rules.
inline Shape recompute_shape(const ExprPtr& e) {
  switch (e->kind()) {
    case NodeKind::Constant:
    case NodeKind::ScaledVariable:
      return {e->coefficient().rows(), e->coefficient().cols()};
    case NodeKind::Sum: {
      Shape l = recompute_shape(e->lhs()), r = recompute_shape(e->rhs());
      if (l != r) throw ShapeMismatchError("sum shape mismatch");
      return l;
    }
    case NodeKind::Product: {
      Shape l = recompute_shape(e->lhs()), r = recompute_shape(e->rhs());
      if (l.cols != r.rows) throw ShapeMismatchError("product shape mismatch");
      return {l.rows, r.cols};
    }
    case NodeKind::Inverse: {
      Shape s = recompute_shape(e->lhs());
      if (s.rows != s.cols) throw ShapeMismatchError("inverse of non-square");
      return s;
    }
  }
  throw Error("unreachable");
}

/// Structural identity: same tree, same coefficients (bit for bit), same
/// variable references. Expressions are formal objects, so this is the only
/// meaningful notion of equality besides evaluation equivalence.
inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a->kind() != b->kind() || !(a->signature() == b->signature())) return false;
  switch (a->kind()) {
    case NodeKind::Constant:
      return exactly_equal(a->coefficient(), b->coefficient());
    case NodeKind::ScaledVariable:
      return a->var() == b->var() && exactly_equal(a->coefficient(), b->coefficient());
    case NodeKind::Sum:
    case NodeKind::Product:
      return structurally_equal(a->lhs(), b->lhs()) && structurally_equal(a->rhs(), b->rhs());
    case NodeKind::Inverse:
      return structurally_equal(a->lhs(), b->lhs());
  }
  return false;
}

namespace detail {
inline bool is_identity_coeff(const Matrix& a) {
  return a.rows() == a.cols() && exactly_equal(a, Matrix::Identity(a.rows(), a.cols()));
}
}  // namespace detail

/// Syntactic adjoint: reverses products, conjugate-transposes constants,
/// fixes self-adjoint variables and sends unitary variables to their
/// inverses. Evaluating the result at Hermitian/unitary points yields the
/// conjugate transpose of the original evaluation.
inline ExprPtr formal_adjoint(const ExprPtr& e) {
  const Signature& sig = e->signature();
  switch (e->kind()) {
    case NodeKind::Constant:
      return RationalExpr::constant(e->coefficient().adjoint(), sig);
    case NodeKind::ScaledVariable: {
      if (e->var().kind == VarKind::SelfAdjoint)
        return RationalExpr::scaled_variable(e->coefficient().adjoint(), e->var(), sig);
      // (A (x) u)^* = A^* (x) u^{-1}, written (A^* (x) 1) . (I (x) u)^{-1}.
      Eigen::Index p = e->rows();
      ExprPtr u_inv = RationalExpr::inverse(
          RationalExpr::scaled_variable(Matrix::Identity(p, p), e->var(), sig));
      if (detail::is_identity_coeff(e->coefficient())) return u_inv;
      return RationalExpr::product(RationalExpr::constant(e->coefficient().adjoint(), sig),
                                   std::move(u_inv));
    }
    case NodeKind::Sum:
      return RationalExpr::sum(formal_adjoint(e->lhs()), formal_adjoint(e->rhs()));
    case NodeKind::Product:
      return RationalExpr::product(formal_adjoint(e->rhs()), formal_adjoint(e->lhs()));
    case NodeKind::Inverse:
      return RationalExpr::inverse(formal_adjoint(e->lhs()));
  }
  throw Error("unreachable");
}

/// A p x q grid of scalar-valued expressions over one common signature.
struct ExprMatrix {
  std::vector<std::vector<ExprPtr>> entries;

  Eigen::Index rows() const { return static_cast<Eigen::Index>(entries.size()); }
  Eigen::Index cols() const {
    return entries.empty() ? 0 : static_cast<Eigen::Index>(entries.front().size());
  }

  void validate() const {
    if (entries.empty() || entries.front().empty())
      throw ShapeMismatchError("expression matrix must be non-empty");
    const Signature& sig = entries[0][0]->signature();
    for (const auto& row : entries) {
      if (static_cast<Eigen::Index>(row.size()) != cols())
        throw ShapeMismatchError("ragged expression matrix");
      for (const auto& entry : row) {
        if (entry->rows() != 1 || entry->cols() != 1)
          throw ShapeMismatchError("expression matrix entries must be scalar-valued");
        if (!(entry->signature() == sig))
          throw ShapeMismatchError("expression matrix entries over different signatures");
      }
    }
  }

  const Signature& signature() const { return entries[0][0]->signature(); }
};

/// Identifies a grid (r_ij) with the single expression
/// sum_ij (e_i (x) 1) r_ij (e_j^T (x) 1). A grid of constants collapses to
/// one constant block matrix.
inline ExprPtr lift_matrix(const ExprMatrix& m) {
  m.validate();
  const Signature& sig = m.signature();
  const Eigen::Index p = m.rows(), q = m.cols();

  bool all_const = true;
  for (const auto& row : m.entries)
    for (const auto& entry : row)
      if (entry->kind() != NodeKind::Constant) all_const = false;
  if (all_const) {
    Matrix block(p, q);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < q; ++j) block(i, j) = m.entries[i][j]->coefficient()(0, 0);
    return RationalExpr::constant(block, sig);
  }

  ExprPtr acc;
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      Matrix basis_col = Matrix::Zero(p, 1);
      basis_col(i, 0) = 1.0;
      Matrix basis_row = Matrix::Zero(1, q);
      basis_row(0, j) = 1.0;
      ExprPtr term = RationalExpr::product(
          RationalExpr::product(RationalExpr::constant(basis_col, sig), m.entries[i][j]),
          RationalExpr::constant(basis_row, sig));
      acc = acc ? RationalExpr::sum(acc, term) : term;
    }
  }
  return acc;
}

}  // namespace ratspec
