#pragma once

// Shared helpers for the test suites: random expression generators, domain
// point search, and quadrature oracles that stay independent of the library
// code they check.

#include <functional>
#include <optional>

#include "ratspec/eval.hpp"
#include "ratspec/parser.hpp"
#include "ratspec/randmat.hpp"
#include "ratspec/rng.hpp"

namespace testutil {

using namespace ratspec;

inline Matrix random_complex_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian_complex();
  return m;
}

inline Matrix random_hermitian_matrix(CounterRng& rng, Eigen::Index n) {
  Matrix m = random_complex_matrix(rng, n, n);
  return 0.5 * (m + m.adjoint());
}

inline VarRef random_var(CounterRng& rng, const Signature& sig) {
  int total = sig.selfadjoint_count + sig.unitary_count;
  int pick = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(total));
  if (pick < sig.selfadjoint_count) return VarRef{VarKind::SelfAdjoint, pick};
  return VarRef{VarKind::Unitary, pick - sig.selfadjoint_count};
}

/// Random expression of the requested shape; leaves are weighted toward
/// plain variables so that generated trees actually involve the arguments.
inline ExprPtr random_expr(CounterRng& rng, const Signature& sig, int depth,
                           Eigen::Index rows = 1, Eigen::Index cols = 1) {
  auto leaf = [&]() -> ExprPtr {
    switch (rng.next_u64() % 4) {
      case 0:
        return RationalExpr::constant(random_complex_matrix(rng, rows, cols), sig);
      case 1:
        return RationalExpr::scaled_variable(random_complex_matrix(rng, rows, cols),
                                             random_var(rng, sig), sig);
      default: {
        VarRef v = random_var(rng, sig);
        if (rows == 1 && cols == 1) return RationalExpr::variable(v, sig);
        return RationalExpr::scaled_variable(random_complex_matrix(rng, rows, cols), v, sig);
      }
    }
  };
  if (depth <= 0) return leaf();
  switch (rng.next_u64() % 8) {
    case 0:
    case 1:
      return leaf();
    case 2:
    case 3:
      return RationalExpr::sum(random_expr(rng, sig, depth - 1, rows, cols),
                               random_expr(rng, sig, depth - 1, rows, cols));
    case 4:
    case 5: {
      Eigen::Index mid = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
      return RationalExpr::product(random_expr(rng, sig, depth - 1, rows, mid),
                                   random_expr(rng, sig, depth - 1, mid, cols));
    }
    default:
      if (rows == cols) return RationalExpr::inverse(random_expr(rng, sig, depth - 1, rows, cols));
      return leaf();
  }
}

/// Random expression that is self-adjoint of type (d1, d2) by construction:
/// built from Hermitian leaves, sums, inverses, and conjugations g . s . g*.
inline ExprPtr random_selfadjoint_expr(CounterRng& rng, const Signature& sig, int depth,
                                       Eigen::Index n = 1) {
  auto leaf = [&]() -> ExprPtr {
    switch (rng.next_u64() % 3) {
      case 0:
        return RationalExpr::constant(random_hermitian_matrix(rng, n), sig);
      default: {
        VarRef v = random_var(rng, sig);
        if (v.kind == VarKind::SelfAdjoint)
          return RationalExpr::scaled_variable(random_hermitian_matrix(rng, n), v, sig);
        // u + u^{-1} scaled by a Hermitian coefficient.
        ExprPtr u = RationalExpr::scaled_variable(Matrix::Identity(n, n), v, sig);
        return RationalExpr::sum(u, RationalExpr::inverse(u));
      }
    }
  };
  if (depth <= 0) return leaf();
  switch (rng.next_u64() % 8) {
    case 0:
    case 1:
      return leaf();
    case 2:
    case 3:
      return RationalExpr::sum(random_selfadjoint_expr(rng, sig, depth - 1, n),
                               random_selfadjoint_expr(rng, sig, depth - 1, n));
    case 4:
      return RationalExpr::inverse(random_selfadjoint_expr(rng, sig, depth - 1, n));
    case 5: {
      // g + g*
      ExprPtr g = random_expr(rng, sig, depth - 1, n, n);
      return RationalExpr::sum(g, formal_adjoint(g));
    }
    default: {
      // g . s . g*
      Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
      ExprPtr g = random_expr(rng, sig, depth - 1, n, m);
      ExprPtr s = random_selfadjoint_expr(rng, sig, depth - 1, m);
      return RationalExpr::product(RationalExpr::product(g, s), formal_adjoint(g));
    }
  }
}

struct DomainPoint {
  MatrixTuple point;
  Matrix value;
};

/// Searches GUE/Haar samples at N in [n_lo, n_hi] for an in-domain point.
inline std::optional<DomainPoint> find_domain_point(const ExprPtr& e, std::uint64_t seed,
                                                    int n_lo = 2, int n_hi = 6,
                                                    int trials_per_n = 4,
                                                    double inv_tol = 1e-10) {
  for (int n = n_lo; n <= n_hi; ++n) {
    for (int t = 0; t < trials_per_n; ++t) {
      MatrixTuple point =
          sample_default_tuple(e->signature(), n, CounterRng::derive(seed, 0xd0, n, t));
      EvalOutcome outcome = eval_expr(e, point, inv_tol);
      if (outcome) return DomainPoint{std::move(point), outcome.value()};
    }
  }
  return std::nullopt;
}

/// Draws random expressions until one evaluates somewhere; returns the
/// expression with its witness point.
inline std::pair<ExprPtr, DomainPoint> random_expr_with_point(
    CounterRng& rng, const Signature& sig, int depth, bool selfadjoint_shape,
    Eigen::Index size = 1) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    ExprPtr e = selfadjoint_shape ? random_selfadjoint_expr(rng, sig, depth, size)
                                  : random_expr(rng, sig, depth, size, size);
    if (auto dp = find_domain_point(e, rng.next_u64())) return {e, std::move(*dp)};
  }
  throw std::runtime_error("no nondegenerate random expression found");
}

// ---------------------------------------------------------------------------
// Quadrature oracles (independent of the spectral module)

/// CDF of 2 cos(theta), theta uniform on [-pi, pi], by midpoint quadrature
/// of the indicator.
inline double arcsine2_cdf_oracle(double t, int points = 2000000) {
  const double h = 2.0 * std::numbers::pi / points;
  long hits = 0;
  for (int i = 0; i < points; ++i) {
    double theta = -std::numbers::pi + (i + 0.5) * h;
    if (2.0 * std::cos(theta) <= t) ++hits;
  }
  return static_cast<double>(hits) / points;
}

inline double semicircle_density(double variance, double s) {
  double support = 4.0 * variance - s * s;
  return support <= 0 ? 0.0 : std::sqrt(support) / (2.0 * std::numbers::pi * variance);
}

/// CDF of the semicircle law by midpoint quadrature of the density.
inline double semicircle_cdf_oracle(double variance, double t, int points = 2000000) {
  const double edge = 2.0 * std::sqrt(variance);
  if (t <= -edge) return 0.0;
  if (t >= edge) return 1.0;
  const double h = (t + edge) / points;
  double mass = 0.0;
  for (int i = 0; i < points; ++i) mass += semicircle_density(variance, -edge + (i + 0.5) * h);
  return mass * h;
}

/// CDF of 1/S for S semicircular, by quadrature of the indicator against
/// the density; no pushforward formula involved.
inline double inverse_semicircle_cdf_oracle(double variance, double t, int points = 2000000) {
  const double edge = 2.0 * std::sqrt(variance);
  const double h = 2.0 * edge / points;
  double mass = 0.0;
  for (int i = 0; i < points; ++i) {
    double s = -edge + (i + 0.5) * h;
    if (1.0 / s <= t) mass += semicircle_density(variance, s);
  }
  return mass * h;
}

}  // namespace testutil
