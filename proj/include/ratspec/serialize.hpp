#pragma once

#include <json.hpp>

#include "ratspec/eval.hpp"
#include "ratspec/matrix_tuple.hpp"
#include "ratspec/pencil.hpp"
#include "ratspec/randmat.hpp"
#include "ratspec/spectral.hpp"

// JSON wire formats. Complex entries are [re, im] pairs; matrices are arrays
// of rows. nlohmann::json keeps object keys sorted, which together with its
// shortest round-trip double formatting makes every dump byte-reproducible.

namespace ratspec {

using Json = nlohmann::json;

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix JSON must be a non-empty array");
  const auto rows = j.size();
  const auto cols = j.at(0).size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw ConfigError("ragged matrix JSON");
    for (std::size_t c = 0; c < cols; ++c) {
      const Json& entry = j.at(i).at(c);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          Complex(entry.at(0).get<double>(), entry.at(1).get<double>());
    }
  }
  return m;
}

inline Json to_json(const MatrixTuple& t) {
  Json xs = Json::array(), us = Json::array();
  for (const Matrix& x : t.selfadjoint) xs.push_back(to_json(x));
  for (const Matrix& u : t.unitary) us.push_back(to_json(u));
  return Json{{"N", t.dim}, {"Xs", std::move(xs)}, {"Us", std::move(us)}};
}

inline MatrixTuple tuple_from_json(const Json& j) {
  MatrixTuple t;
  t.dim = j.at("N").get<int>();
  for (const Json& x : j.at("Xs")) t.selfadjoint.push_back(matrix_from_json(x));
  for (const Json& u : j.at("Us")) t.unitary.push_back(matrix_from_json(u));
  for (const Matrix& m : t.selfadjoint)
    if (m.rows() != t.dim || m.cols() != t.dim)
      throw ConfigError("tuple entry does not match declared N");
  for (const Matrix& m : t.unitary)
    if (m.rows() != t.dim || m.cols() != t.dim)
      throw ConfigError("tuple entry does not match declared N");
  return t;
}

inline Json to_json(const AffinePencil& p) {
  Json aj = Json::array(), bj = Json::array();
  for (const Matrix& a : p.selfadjoint_coeffs) aj.push_back(to_json(a));
  for (const Matrix& b : p.unitary_coeffs) bj.push_back(to_json(b));
  return Json{{"k", p.dim},
              {"A0", to_json(p.constant)},
              {"Aj", std::move(aj)},
              {"Bj", std::move(bj)},
              {"adjoint_paired", p.adjoint_paired}};
}

inline AffinePencil pencil_from_json(const Json& j) {
  AffinePencil p;
  p.dim = j.at("k").get<int>();
  p.constant = matrix_from_json(j.at("A0"));
  for (const Json& a : j.at("Aj")) p.selfadjoint_coeffs.push_back(matrix_from_json(a));
  for (const Json& b : j.at("Bj")) p.unitary_coeffs.push_back(matrix_from_json(b));
  p.adjoint_paired = j.value("adjoint_paired", false);
  p.signature = Signature::unchecked(static_cast<int>(p.selfadjoint_coeffs.size()),
                                     static_cast<int>(p.unitary_coeffs.size()));
  for (const Matrix& m : p.selfadjoint_coeffs)
    if (m.rows() != p.dim || m.cols() != p.dim)
      throw ConfigError("pencil coefficient is not k x k");
  for (const Matrix& m : p.unitary_coeffs)
    if (m.rows() != p.dim || m.cols() != p.dim)
      throw ConfigError("pencil coefficient is not k x k");
  if (p.constant.rows() != p.dim || p.constant.cols() != p.dim)
    throw ConfigError("pencil constant is not k x k");
  return p;
}

inline Json to_json(const FormalLinRep& rep) {
  Json j = to_json(rep.pencil);
  j["u"] = to_json(rep.left);
  j["v"] = to_json(rep.right);
  return j;
}

inline Json to_json(const SaLinRep& rep) {
  Json j = to_json(rep.pencil);
  j["w"] = to_json(rep.column);
  return j;
}

inline FormalLinRep rep_from_json(const Json& j) {
  FormalLinRep rep;
  rep.pencil = pencil_from_json(j);
  rep.left = matrix_from_json(j.at("u"));
  rep.right = matrix_from_json(j.at("v"));
  return rep;
}

inline SaLinRep sa_rep_from_json(const Json& j) {
  SaLinRep rep;
  rep.pencil = pencil_from_json(j);
  rep.column = matrix_from_json(j.at("w"));
  return rep;
}

inline Json to_json(const DomainFailure& f) {
  return Json{{"path", f.path},
              {"sigma_min", f.sigma_min},
              {"sigma_max", f.sigma_max}};
}

}  // namespace ratspec
