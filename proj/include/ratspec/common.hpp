#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace ratspec {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Base class for all errors thrown by the library. Domain failures during
/// evaluation are *not* exceptions; see EvalOutcome.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

struct UnknownVariableError : Error {
  using Error::Error;
};

struct SyntaxError : Error {
  std::size_t position;
  SyntaxError(const std::string& what, std::size_t pos)
      : Error(what + " (at offset " + std::to_string(pos) + ")"), position(pos) {}
};

struct NotSquareError : Error {
  using Error::Error;
};

struct NotHermitianError : Error {
  using Error::Error;
};

struct NoSampleInDomainError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

inline Matrix identity(Eigen::Index n) { return Matrix::Identity(n, n); }

/// Kronecker product A (p x q) with X (N x N) -> pN x qN.
inline Matrix kron(const Matrix& a, const Matrix& x) {
  Matrix out(a.rows() * x.rows(), a.cols() * x.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * x.rows(), j * x.cols(), x.rows(), x.cols()) = a(i, j) * x;
  return out;
}

inline double frobenius(const Matrix& m) { return m.norm(); }

inline bool exactly_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace ratspec
