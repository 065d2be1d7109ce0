#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <variant>
#include <vector>

#include "ratspec/common.hpp"
#include "ratspec/rng.hpp"

namespace ratspec {

/// Sorted real eigenvalue list; the finite-N analogue of the analytic
/// distribution under the normalized trace.
struct EmpiricalSpectrum {
  std::vector<double> eigenvalues;  // non-decreasing

  EmpiricalSpectrum() = default;
  explicit EmpiricalSpectrum(std::vector<double> values) : eigenvalues(std::move(values)) {
    std::sort(eigenvalues.begin(), eigenvalues.end());
  }

  int dim() const { return static_cast<int>(eigenvalues.size()); }

  double cdf(double t) const {
    auto it = std::upper_bound(eigenvalues.begin(), eigenvalues.end(), t);
    return static_cast<double>(it - eigenvalues.begin()) / static_cast<double>(dim());
  }
};

/// Semicircle law with the given variance: support [-2s, 2s], s = sqrt(var).
struct Semicircle {
  double variance = 1.0;
};

/// Law of 2 cos(theta) with theta uniform: the spectral distribution of
/// u + u^{-1} for a Haar unitary u. Support [-2, 2].
struct Arcsine2 {};

struct TabulatedCdf {
  std::vector<double> t;  // strictly increasing
  std::vector<double> f;  // non-decreasing, in [0, 1]
};

struct CdfQueryable;

/// Law of 1/S where S follows the base law (assumed atomless at 0).
struct PushforwardInverse {
  std::shared_ptr<const CdfQueryable> base;
};

struct CdfQueryable
    : std::variant<EmpiricalSpectrum, Semicircle, Arcsine2, PushforwardInverse, TabulatedCdf> {
  using variant::variant;
};

inline double cdf(const CdfQueryable& q, double t);

namespace spectral_detail {

inline double semicircle_cdf(double variance, double t) {
  const double s = std::sqrt(variance);
  const double edge = 2.0 * s;
  if (t <= -edge) return 0.0;
  if (t >= edge) return 1.0;
  const double u = t / s;  // reduce to variance 1 on [-2, 2]
  return 0.5 + (u * std::sqrt(4.0 - u * u)) / (4.0 * std::numbers::pi) +
         std::asin(u / 2.0) / std::numbers::pi;
}

inline double arcsine2_cdf(double t) {
  if (t <= -2.0) return 0.0;
  if (t >= 2.0) return 1.0;
  return 0.5 + std::asin(t / 2.0) / std::numbers::pi;
}

inline double tabulated_cdf(const TabulatedCdf& tab, double t) {
  if (tab.t.empty()) return 0.0;
  if (t < tab.t.front()) return 0.0;
  if (t >= tab.t.back()) return 1.0;
  auto it = std::upper_bound(tab.t.begin(), tab.t.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - tab.t.begin());
  std::size_t lo = hi - 1;
  double span = tab.t[hi] - tab.t[lo];
  double w = span > 0 ? (t - tab.t[lo]) / span : 0.0;
  return tab.f[lo] + w * (tab.f[hi] - tab.f[lo]);
}

/// F_{1/S}(t) from F_S: for t > 0 it is F_S(0) + 1 - F_S(1/t), for t < 0 it
/// is F_S(0) - F_S(1/t), and F_S(0) at t = 0.
inline double pushforward_inverse_cdf(const CdfQueryable& base, double t) {
  double at_zero = cdf(base, 0.0);
  if (t == 0.0) return at_zero;
  if (t > 0.0) return at_zero + 1.0 - cdf(base, 1.0 / t);
  return at_zero - cdf(base, 1.0 / t);
}

}  // namespace spectral_detail

inline double cdf(const CdfQueryable& q, double t) {
  using namespace spectral_detail;
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, EmpiricalSpectrum>) return law.cdf(t);
        if constexpr (std::is_same_v<T, Semicircle>) return semicircle_cdf(law.variance, t);
        if constexpr (std::is_same_v<T, Arcsine2>) return arcsine2_cdf(t);
        if constexpr (std::is_same_v<T, TabulatedCdf>) return tabulated_cdf(law, t);
        if constexpr (std::is_same_v<T, PushforwardInverse>)
          return pushforward_inverse_cdf(*law.base, t);
      },
      static_cast<const CdfQueryable::variant&>(q));
}

/// Eigenvalues of a Hermitian matrix, sorted ascending. The input is
/// symmetrized before decomposition; inputs further than 1e-8 (relative)
/// from Hermitian are rejected.
inline EmpiricalSpectrum hermitian_eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw NotHermitianError("matrix is not square");
  double scale = std::max(1e-300, m.norm());
  if ((m - Matrix(m.adjoint())).norm() > 1e-8 * scale)
    throw NotHermitianError("matrix is not Hermitian within 1e-8");
  Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  std::vector<double> values(solver.eigenvalues().data(),
                             solver.eigenvalues().data() + solver.eigenvalues().size());
  return EmpiricalSpectrum(std::move(values));
}

/// sup_t |F_a(t) - F_b(t)|, evaluated at the jump points of the empirical
/// sides (from both sides); exact for empirical-vs-empirical and
/// empirical-vs-analytic comparisons.
inline double kolmogorov_distance(const CdfQueryable& a, const CdfQueryable& b) {
  const auto* ea = std::get_if<EmpiricalSpectrum>(&static_cast<const CdfQueryable::variant&>(a));
  const auto* eb = std::get_if<EmpiricalSpectrum>(&static_cast<const CdfQueryable::variant&>(b));

  auto sup_at_jumps = [](const EmpiricalSpectrum& emp, const CdfQueryable& other) {
    const int n = emp.dim();
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      double f = cdf(other, emp.eigenvalues[i]);
      double below = static_cast<double>(i) / n;       // empirical CDF just left of the jump
      double above = static_cast<double>(i + 1) / n;   // and at the jump
      best = std::max({best, std::abs(f - below), std::abs(f - above)});
    }
    return best;
  };

  if (ea && eb) return std::max(sup_at_jumps(*ea, b), sup_at_jumps(*eb, a));
  if (ea) return sup_at_jumps(*ea, b);
  if (eb) return sup_at_jumps(*eb, a);

  // Analytic vs analytic: dense grid scan; not required to be exact.
  double best = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    double x = -100.0 + i * 0.001;
    best = std::max(best, std::abs(cdf(a, x) - cdf(b, x)));
  }
  return best;
}

inline double kolmogorov_distance(const EmpiricalSpectrum& a, const EmpiricalSpectrum& b) {
  return kolmogorov_distance(CdfQueryable(a), CdfQueryable(b));
}

/// Fraction of singular values above tol * sigma_max; the finite-N analogue
/// of the trace rank. Zero matrices have rank 0.
inline double normalized_rank(const Matrix& m, double tol = 1e-10) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++count;
  return static_cast<double>(count) / static_cast<double>(std::min(m.rows(), m.cols()));
}

/// Fraction of eigenvalues within [lambda - eps, lambda + eps]: a windowed
/// estimate of the atom mass at lambda.
inline double atom_fraction(const EmpiricalSpectrum& s, double lambda, double eps) {
  if (eps <= 0) throw ConfigError("atom_fraction requires eps > 0");
  auto lo = std::lower_bound(s.eigenvalues.begin(), s.eigenvalues.end(), lambda - eps);
  auto hi = std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), lambda + eps);
  return static_cast<double>(hi - lo) / static_cast<double>(s.dim());
}

/// Functional calculus f_eps(Q) for Hermitian Q, where f_eps(t) = 1/t for
/// |t| >= eps and t/eps^2 inside. The interpolation is odd and continuous
/// with sup norm 1/eps, so the result stays Hermitian with norm <= 1/eps.
inline Matrix regularized_inverse_apply(const Matrix& q, double eps) {
  if (eps <= 0) throw ConfigError("regularized inverse requires eps > 0");
  if (q.rows() != q.cols()) throw NotHermitianError("matrix is not square");
  double scale = std::max(1e-300, q.norm());
  if ((q - Matrix(q.adjoint())).norm() > 1e-8 * scale)
    throw NotHermitianError("matrix is not Hermitian within 1e-8");
  Matrix h = 0.5 * (q + q.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success) throw Error("eigenvalue computation failed");
  RealVector f = solver.eigenvalues();
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double t = f(i);
    f(i) = std::abs(t) >= eps ? 1.0 / t : t / (eps * eps);
  }
  return solver.eigenvectors() * f.asDiagonal() * solver.eigenvectors().adjoint();
}

struct RankBoundReport {
  bool cdf_bound_ok = false;
  double bound = 0.0;          // normalized rank of the perturbation
  double worst_gap = 0.0;      // sup over checked t of |F_X - F_{X+Y}|
  double worst_t = 0.0;
  bool projection_rank_ok = false;  // rk(pXp) <= rk(X) for sampled projections
};

/// Finite-dimensional check of the two rank lemmas: a rank-r perturbation
/// moves the CDF by at most r/N uniformly, and compression by a projection
/// cannot increase rank.
inline RankBoundReport rank_cdf_bound_check(const Matrix& x, const Matrix& y,
                                            std::vector<double> grid,
                                            std::uint64_t seed = 12345,
                                            double rank_tol = 1e-10) {
  if (x.rows() != y.rows() || x.cols() != y.cols() || x.rows() != x.cols())
    throw ShapeMismatchError("rank_cdf_bound_check requires equal square matrices");
  EmpiricalSpectrum fx = hermitian_eigenvalues(x);
  EmpiricalSpectrum fxy = hermitian_eigenvalues(x + y);

  RankBoundReport report;
  report.bound = normalized_rank(y, rank_tol);

  for (double lam : fx.eigenvalues) grid.push_back(lam);
  for (double lam : fxy.eigenvalues) grid.push_back(lam);
  const double eps_left = 1e-9;
  for (double t : grid) {
    for (double probe : {t, t - eps_left}) {
      double gap = std::abs(fx.cdf(probe) - fxy.cdf(probe));
      if (gap > report.worst_gap) {
        report.worst_gap = gap;
        report.worst_t = probe;
      }
    }
  }
  report.cdf_bound_ok = report.worst_gap <= report.bound + 1e-12;

  // Compression lemma on a few random orthogonal projections.
  const int n = static_cast<int>(x.rows());
  double rank_x = normalized_rank(0.5 * (x + x.adjoint()), rank_tol);
  report.projection_rank_ok = true;
  CounterRng rng(CounterRng::derive(seed, 0x70726f6a));
  for (int trial = 0; trial < 4; ++trial) {
    int r = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
    Matrix g(n, r);
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < n; ++i) g(i, j) = rng.gaussian_complex();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix qthin = qr.householderQ() * Matrix::Identity(n, r);
    Matrix proj = qthin * qthin.adjoint();
    double compressed = normalized_rank(proj * x * proj, rank_tol);
    if (compressed > rank_x + 1e-12) report.projection_rank_ok = false;
  }
  return report;
}

}  // namespace ratspec
