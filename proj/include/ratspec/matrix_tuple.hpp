#pragma once

#include <vector>

#include "ratspec/expr.hpp"

namespace ratspec {

/// A point (X_1..X_{d1}, U_1..U_{d2}) of N x N Hermitian and unitary
/// matrices at which expressions and pencils are evaluated.
struct MatrixTuple {
  int dim = 0;  // N
  std::vector<Matrix> selfadjoint;
  std::vector<Matrix> unitary;

  Signature signature() const {
    return Signature::unchecked(static_cast<int>(selfadjoint.size()),
                                static_cast<int>(unitary.size()));
  }

  bool matches(const Signature& sig) const {
    return static_cast<int>(selfadjoint.size()) == sig.selfadjoint_count &&
           static_cast<int>(unitary.size()) == sig.unitary_count;
  }

  const Matrix& get(VarRef v) const {
    return v.kind == VarKind::SelfAdjoint ? selfadjoint[v.index] : unitary[v.index];
  }

  /// Hermiticity / unitarity defects, for validation.
  double hermitian_defect() const {
    double worst = 0.0;
    for (const Matrix& x : selfadjoint) {
      double scale = std::max(1.0, x.norm());
      worst = std::max(worst, (x - Matrix(x.adjoint())).norm() / scale);
    }
    return worst;
  }

  double unitary_defect() const {
    double worst = 0.0;
    for (const Matrix& u : unitary)
      worst = std::max(worst, (u * u.adjoint() - Matrix::Identity(dim, dim)).norm());
    return worst;
  }
};

}  // namespace ratspec
