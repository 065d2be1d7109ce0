#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ratspec/matrix_tuple.hpp"
#include "ratspec/rng.hpp"

namespace ratspec {

namespace randmat_detail {
// Key-derivation labels, so streams for different objects never collide.
constexpr std::uint64_t kHermitianTag = 0x48455254;  // "HERT"
constexpr std::uint64_t kUnitaryTag = 0x554e4954;    // "UNIT"
constexpr std::uint64_t kSpectrumTag = 0x53504543;   // "SPEC"
}  // namespace randmat_detail

/// GUE-normalized Hermitian matrix: diagonal entries real N(0, 1/N),
/// off-diagonal complex with independent N(0, 1/(2N)) real and imaginary
/// parts. Hermitian by construction, spectrum converging to the semicircle
/// law on [-2, 2].
inline Matrix sample_hermitian_gue(int n, std::uint64_t key, double scale = 1.0) {
  CounterRng rng(CounterRng::derive(key, randmat_detail::kHermitianTag, n));
  Matrix x(n, n);
  const double diag_sd = scale / std::sqrt(static_cast<double>(n));
  const double off_sd = scale / std::sqrt(2.0 * static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    x(i, i) = rng.gaussian() * diag_sd;
    for (int j = i + 1; j < n; ++j) {
      Complex z(rng.gaussian() * off_sd, rng.gaussian() * off_sd);
      x(i, j) = z;
      x(j, i) = std::conj(z);
    }
  }
  return x;
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of the R diagonal absorbed into Q. Without the phase correction plain QR
/// is not Haar.
inline Matrix sample_haar_unitary(int n, std::uint64_t key) {
  CounterRng rng(CounterRng::derive(key, randmat_detail::kUnitaryTag, n));
  Matrix g(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = rng.gaussian_complex();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < n; ++j) {
    Complex d = r(j, j);
    double a = std::abs(d);
    q.col(j) *= (a == 0.0) ? Complex(1.0, 0.0) : d / a;
  }
  return q;
}

/// Model for one self-adjoint variable. FixedSpectrumHaarConjugated draws
/// V diag(lambda) V* with V Haar and lambda i.i.d. from a named spectrum
/// sampler; its limiting eigenvalue distribution is the sampling law.
struct SelfAdjointModel {
  enum class Kind { GaussianHermitian, FixedSpectrumHaarConjugated };
  Kind kind = Kind::GaussianHermitian;
  double scale = 1.0;                   // GaussianHermitian variance scale
  std::string spectrum = "uniform";     // "uniform" on [lo, hi] or "semicircle"
  double lo = -1.0, hi = 1.0;
};

struct EnsembleSpec {
  Signature signature;
  int dim = 0;  // N
  std::vector<SelfAdjointModel> selfadjoint_models;  // empty = all GUE
  std::uint64_t seed = 0;

  SelfAdjointModel model_for(int j) const {
    if (j < static_cast<int>(selfadjoint_models.size())) return selfadjoint_models[j];
    return SelfAdjointModel{};
  }
};

namespace randmat_detail {

inline double sample_spectrum_point(const SelfAdjointModel& m, CounterRng& rng) {
  if (m.spectrum == "semicircle") {
    // Rejection from the uniform box over the semicircle density on [-2, 2].
    while (true) {
      double t = rng.uniform(-2.0, 2.0);
      double y = rng.uniform(0.0, 1.0 / std::numbers::pi);
      if (y <= std::sqrt(4.0 - t * t) / (2.0 * std::numbers::pi)) return t;
    }
  }
  return rng.uniform(m.lo, m.hi);
}

inline Matrix sample_fixed_spectrum(const SelfAdjointModel& m, int n, std::uint64_t key) {
  CounterRng rng(CounterRng::derive(key, kSpectrumTag, n));
  RealVector lambda(n);
  for (int i = 0; i < n; ++i) lambda(i) = sample_spectrum_point(m, rng);
  Matrix v = sample_haar_unitary(n, CounterRng::derive(key, kSpectrumTag + 1));
  Matrix x = v * lambda.asDiagonal() * v.adjoint();
  return 0.5 * (x + x.adjoint());  // exact Hermiticity
}

}  // namespace randmat_detail

/// Independent draws per variable; bit-for-bit deterministic function of
/// (spec.seed, variable index), independent of call order and thread count.
inline MatrixTuple sample_tuple(const EnsembleSpec& spec) {
  MatrixTuple tuple;
  tuple.dim = spec.dim;
  for (int j = 0; j < spec.signature.selfadjoint_count; ++j) {
    std::uint64_t key = CounterRng::derive(spec.seed, 1, j);
    SelfAdjointModel m = spec.model_for(j);
    if (m.kind == SelfAdjointModel::Kind::GaussianHermitian)
      tuple.selfadjoint.push_back(sample_hermitian_gue(spec.dim, key, m.scale));
    else
      tuple.selfadjoint.push_back(randmat_detail::sample_fixed_spectrum(m, spec.dim, key));
  }
  for (int j = 0; j < spec.signature.unitary_count; ++j) {
    std::uint64_t key = CounterRng::derive(spec.seed, 2, j);
    tuple.unitary.push_back(sample_haar_unitary(spec.dim, key));
  }
  return tuple;
}

/// Convenience: the default absolutely continuous model (GUE + Haar).
inline MatrixTuple sample_default_tuple(const Signature& sig, int n, std::uint64_t seed) {
  EnsembleSpec spec;
  spec.signature = sig;
  spec.dim = n;
  spec.seed = seed;
  return sample_tuple(spec);
}

}  // namespace ratspec
