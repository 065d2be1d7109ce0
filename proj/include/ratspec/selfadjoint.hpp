#pragma once

#include <optional>

#include "ratspec/eval.hpp"
#include "ratspec/randmat.hpp"

namespace ratspec {

/// Verdict of the randomized self-adjointness test. A No is certain (the
/// witness point evaluates non-self-adjointly); a Yes is probabilistic, as
/// the test only samples finitely many points.
struct SelfAdjointVerdict {
  bool selfadjoint = false;
  std::optional<MatrixTuple> witness;  // present on No
  double worst_defect = 0.0;           // max relative asymmetry among successes
  int successful_trials = 0;

  explicit operator bool() const { return selfadjoint; }
};

/// Evaluates the expression at `trials` independent draws from the
/// absolutely continuous model (GUE + Haar) and tests R(X,U)* = R(X,U).
inline SelfAdjointVerdict is_selfadjoint_probabilistic(const ExprPtr& e, int n, int trials,
                                                       double tol = 1e-8,
                                                       std::uint64_t seed = 0,
                                                       double inv_tol = 1e-10) {
  if (e->rows() != e->cols())
    throw NotSquareError("self-adjointness is defined for square expressions");
  if (n < 2) throw ConfigError("self-adjointness test requires N >= 2");

  SelfAdjointVerdict verdict;
  for (int t = 0; t < trials; ++t) {
    MatrixTuple point =
        sample_default_tuple(e->signature(), n, CounterRng::derive(seed, 0x5341, n, t));
    EvalOutcome outcome = eval_expr(e, point, inv_tol);
    if (!outcome) continue;
    const Matrix& r = outcome.value();
    double defect = (Matrix(r.adjoint()) - r).norm() / std::max(1e-300, r.norm());
    verdict.worst_defect = std::max(verdict.worst_defect, defect);
    ++verdict.successful_trials;
    if (defect > tol) {
      verdict.selfadjoint = false;
      verdict.witness = std::move(point);
      return verdict;
    }
  }
  if (verdict.successful_trials == 0)
    throw NoSampleInDomainError("every trial hit a domain failure");
  verdict.selfadjoint = true;
  return verdict;
}

}  // namespace ratspec
