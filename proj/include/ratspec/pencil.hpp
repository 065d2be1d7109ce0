#pragma once

#include <vector>

#include "ratspec/expr.hpp"

namespace ratspec {

/// Affine linear pencil A0 (x) 1 + sum_j A_j (x) x_j + sum_j B_j (x) u_j.
/// With adjoint_paired set, the unitary term is B_j (x) u_j + B_j* (x) u_j*
/// instead; that is the shape carried by self-adjoint representations.
struct AffinePencil {
  int dim = 0;  // k: coefficients are k x k
  Signature signature;
  Matrix constant;                        // A0
  std::vector<Matrix> selfadjoint_coeffs; // A_j, one per x variable
  std::vector<Matrix> unitary_coeffs;     // B_j, one per u variable
  bool adjoint_paired = false;

  static AffinePencil zero(int k, Signature sig, bool paired = false) {
    AffinePencil p;
    p.dim = k;
    p.signature = sig;
    p.constant = Matrix::Zero(k, k);
    p.selfadjoint_coeffs.assign(sig.selfadjoint_count, Matrix::Zero(k, k));
    p.unitary_coeffs.assign(sig.unitary_count, Matrix::Zero(k, k));
    p.adjoint_paired = paired;
    return p;
  }

  Matrix& coeff(VarRef v) {
    return v.kind == VarKind::SelfAdjoint ? selfadjoint_coeffs[v.index]
                                          : unitary_coeffs[v.index];
  }
  const Matrix& coeff(VarRef v) const {
    return v.kind == VarKind::SelfAdjoint ? selfadjoint_coeffs[v.index]
                                          : unitary_coeffs[v.index];
  }
};

/// Formal linear representation (u, A, v): R(X) = u . A(X)^{-1} . v on the
/// whole domain of R, with dom(R) contained in dom(A^{-1}).
struct FormalLinRep {
  Matrix left;         // u: p x k
  AffinePencil pencil; // A
  Matrix right;        // v: k x q

  Eigen::Index out_rows() const { return left.rows(); }   // p
  Eigen::Index out_cols() const { return right.cols(); }  // q
  int dim() const { return pencil.dim; }
};

/// Self-adjoint formal linear representation (Q, w): R(X) = w* . Q^{-1} . w
/// at every point where R evaluates self-adjointly. The pencil has Hermitian
/// A0 and A_j and adjoint-paired unitary coefficients.
struct SaLinRep {
  AffinePencil pencil; // Q
  Matrix column;       // w: k x p

  Eigen::Index out_rows() const { return column.cols(); }
  int dim() const { return pencil.dim; }
};

namespace pencil_detail {

inline void place_block(AffinePencil& dst, const AffinePencil& src, int row, int col) {
  dst.constant.block(row, col, src.dim, src.dim) = src.constant;
  for (int j = 0; j < dst.signature.selfadjoint_count; ++j)
    dst.selfadjoint_coeffs[j].block(row, col, src.dim, src.dim) = src.selfadjoint_coeffs[j];
  for (int j = 0; j < dst.signature.unitary_count; ++j)
    dst.unitary_coeffs[j].block(row, col, src.dim, src.dim) = src.unitary_coeffs[j];
}

/// Base constructor: a p x q leaf R gets the (p+q)-dimensional pencil
///   [ I_p  -R ]        u = [ I_p  0 ],   v = [ 0  I_q ]^T.
///   [  0  I_q ]
inline FormalLinRep base_rep(const RationalExpr& leaf) {
  const Eigen::Index p = leaf.rows(), q = leaf.cols();
  const int k = static_cast<int>(p + q);
  FormalLinRep rep;
  rep.pencil = AffinePencil::zero(k, leaf.signature());
  rep.pencil.constant.topLeftCorner(p, p) = Matrix::Identity(p, p);
  rep.pencil.constant.bottomRightCorner(q, q) = Matrix::Identity(q, q);
  if (leaf.kind() == NodeKind::Constant)
    rep.pencil.constant.topRightCorner(p, q) = -leaf.coefficient();
  else
    rep.pencil.coeff(leaf.var()).topRightCorner(p, q) = -leaf.coefficient();
  rep.left = Matrix::Zero(p, k);
  rep.left.leftCols(p) = Matrix::Identity(p, p);
  rep.right = Matrix::Zero(k, q);
  rep.right.bottomRows(q) = Matrix::Identity(q, q);
  return rep;
}

/// A square leaf is itself an affine pencil, so its inverse has the direct
/// representation (I_p, leaf-as-pencil, I_p) of dimension p. This is what
/// produces the compact pencils for expressions like x1 + x2^-1.
inline FormalLinRep inverted_leaf_rep(const RationalExpr& leaf) {
  const Eigen::Index p = leaf.rows();
  FormalLinRep rep;
  rep.pencil = AffinePencil::zero(static_cast<int>(p), leaf.signature());
  if (leaf.kind() == NodeKind::Constant)
    rep.pencil.constant = leaf.coefficient();
  else
    rep.pencil.coeff(leaf.var()) = leaf.coefficient();
  rep.left = Matrix::Identity(p, p);
  rep.right = Matrix::Identity(p, p);
  return rep;
}

inline FormalLinRep sum_rep(const FormalLinRep& a, const FormalLinRep& b) {
  const int k1 = a.dim(), k2 = b.dim();
  FormalLinRep rep;
  rep.pencil = AffinePencil::zero(k1 + k2, a.pencil.signature);
  place_block(rep.pencil, a.pencil, 0, 0);
  place_block(rep.pencil, b.pencil, k1, k1);
  rep.left = Matrix(a.left.rows(), k1 + k2);
  rep.left << a.left, b.left;
  rep.right = Matrix(k1 + k2, a.right.cols());
  rep.right << a.right, b.right;
  return rep;
}

inline FormalLinRep product_rep(const FormalLinRep& a, const FormalLinRep& b) {
  const int k1 = a.dim(), k2 = b.dim();
  FormalLinRep rep;
  rep.pencil = AffinePencil::zero(k1 + k2, a.pencil.signature);
  place_block(rep.pencil, a.pencil, 0, 0);
  place_block(rep.pencil, b.pencil, k1, k1);
  rep.pencil.constant.block(0, k1, k1, k2) = -a.right * b.left;  // -v1 u2 coupling
  rep.left = Matrix::Zero(a.left.rows(), k1 + k2);
  rep.left.leftCols(k1) = a.left;
  rep.right = Matrix::Zero(k1 + k2, b.right.cols());
  rep.right.bottomRows(k2) = b.right;
  return rep;
}

/// Borders the pencil with the representation's constant maps:
///   A~ = [ 0_{p x p}  u ]
///        [     v      A ].
inline AffinePencil bordered_pencil(const FormalLinRep& rep) {
  const Eigen::Index p = rep.out_rows();
  const int k = rep.dim();
  AffinePencil out = AffinePencil::zero(static_cast<int>(p) + k, rep.pencil.signature);
  out.constant.block(0, p, p, k) = rep.left;
  out.constant.block(p, 0, k, p) = rep.right;
  out.constant.block(p, p, k, k) = rep.pencil.constant;
  for (int j = 0; j < out.signature.selfadjoint_count; ++j)
    out.selfadjoint_coeffs[j].block(p, p, k, k) = rep.pencil.selfadjoint_coeffs[j];
  for (int j = 0; j < out.signature.unitary_count; ++j)
    out.unitary_coeffs[j].block(p, p, k, k) = rep.pencil.unitary_coeffs[j];
  return out;
}

inline FormalLinRep inverse_rep(const FormalLinRep& inner) {
  const Eigen::Index p = inner.out_rows();
  FormalLinRep rep;
  rep.pencil = bordered_pencil(inner);
  rep.left = Matrix::Zero(p, rep.pencil.dim);
  rep.left.leftCols(p) = Matrix::Identity(p, p);
  rep.right = Matrix::Zero(rep.pencil.dim, p);
  rep.right.topRows(p) = -Matrix::Identity(p, p);
  return rep;
}

}  // namespace pencil_detail

/// Builds a proper formal linear representation by structural recursion:
/// block-diagonal pencils for sums, an upper-triangular -v1 u2 coupling for
/// products, and a bordered pencil for inverses. Inverses of single leaves
/// use the leaf itself as the pencil.
inline FormalLinRep linearize(const ExprPtr& e) {
  using namespace pencil_detail;
  switch (e->kind()) {
    case NodeKind::Constant:
    case NodeKind::ScaledVariable:
      return base_rep(*e);
    case NodeKind::Sum:
      return sum_rep(linearize(e->lhs()), linearize(e->rhs()));
    case NodeKind::Product:
      return product_rep(linearize(e->lhs()), linearize(e->rhs()));
    case NodeKind::Inverse:
      if (e->lhs()->is_leaf()) return inverted_leaf_rep(*e->lhs());
      return inverse_rep(linearize(e->lhs()));
  }
  throw Error("unreachable");
}

/// Doubles (u, A, v) into the self-adjoint representation (Q, w) with
///   A0~ = [ 0  A0* ],  coefficient doubling B~ = [ 0  0 ],  w = [ u*/2 ]
///         [ A0  0  ]                             [ B  0 ]       [  v   ].
/// Coefficients of x_j* are merged into x_j by addition, which leaves every
/// self-adjoint coefficient Hermitian; unitary coefficients stay paired with
/// their adjoints.
inline SaLinRep make_selfadjoint_rep(const FormalLinRep& rep) {
  if (rep.out_rows() != rep.out_cols())
    throw NotSquareError("self-adjoint representation requires a square expression");
  const int k = rep.dim();
  SaLinRep sa;
  sa.pencil = AffinePencil::zero(2 * k, rep.pencil.signature, /*paired=*/true);
  sa.pencil.constant.topRightCorner(k, k) = rep.pencil.constant.adjoint();
  sa.pencil.constant.bottomLeftCorner(k, k) = rep.pencil.constant;
  for (int j = 0; j < sa.pencil.signature.selfadjoint_count; ++j) {
    const Matrix& b = rep.pencil.selfadjoint_coeffs[j];
    sa.pencil.selfadjoint_coeffs[j].bottomLeftCorner(k, k) = b;
    sa.pencil.selfadjoint_coeffs[j].topRightCorner(k, k) = b.adjoint();
  }
  for (int j = 0; j < sa.pencil.signature.unitary_count; ++j)
    sa.pencil.unitary_coeffs[j].bottomLeftCorner(k, k) = rep.pencil.unitary_coeffs[j];
  sa.column = Matrix(2 * k, rep.out_rows());
  sa.column.topRows(k) = 0.5 * rep.left.adjoint();
  sa.column.bottomRows(k) = rep.right;
  return sa;
}

inline SaLinRep linearize_selfadjoint(const ExprPtr& e) {
  return make_selfadjoint_rep(linearize(e));
}

/// The bordered pencil A~ associated to a representation of a square
/// expression; A~(X) is invertible exactly when A(X) and R(X) both are.
inline AffinePencil schur_pencil(const FormalLinRep& rep) {
  if (rep.out_rows() != rep.out_cols())
    throw NotSquareError("bordered pencil requires a square expression");
  return pencil_detail::bordered_pencil(rep);
}

inline int numerical_rank(const Matrix& m, double tol = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  double largest = svd.singularValues()(0);
  if (largest == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > tol * largest) ++r;
  return r;
}

/// Proper: k >= max(p, q) with u of full row rank and v of full column rank.
inline bool is_proper(const FormalLinRep& rep, double tol = 1e-10) {
  const Eigen::Index p = rep.out_rows(), q = rep.out_cols();
  if (rep.dim() < std::max(p, q)) return false;
  return numerical_rank(rep.left, tol) == p && numerical_rank(rep.right, tol) == q;
}

inline bool is_proper(const SaLinRep& rep, double tol = 1e-10) {
  const Eigen::Index p = rep.out_rows();
  if (rep.dim() < p) return false;
  return numerical_rank(rep.column, tol) == p;
}

}  // namespace ratspec
