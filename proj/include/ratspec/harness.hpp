#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ratspec/parser.hpp"
#include "ratspec/selfadjoint.hpp"
#include "ratspec/serialize.hpp"
#include "ratspec/spectral.hpp"

namespace ratspec {

/// Worker count: RATSPEC_THREADS if set, otherwise hardware parallelism.
inline int worker_count() {
  if (const char* env = std::getenv("RATSPEC_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

/// Runs `count` independent jobs on a small pool. Jobs receive their index,
/// so results land in preassigned slots and the output is identical for
/// every thread count.
inline void parallel_for(int count, const std::function<void(int)>& job) {
  int threads = std::min(worker_count(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Experiment configuration

struct ReferenceSpec {
  enum class Kind { Analytic, Surrogate };
  Kind kind = Kind::Surrogate;
  std::optional<CdfQueryable> law;  // set when kind == Analytic
};

struct ExperimentConfig {
  std::string expression;  // expression text (no header line)
  Signature signature{1, 0};
  std::vector<SelfAdjointModel> selfadjoint_models;
  std::vector<int> N_list;
  int samples_per_N = 1;
  std::vector<double> eps_list;
  ReferenceSpec reference;
  std::uint64_t seed = 0;
  std::string out_dir;
  double inv_tol = 1e-10;
  bool force = false;  // skip the self-adjointness gate

  void validate() const {
    if (N_list.empty()) throw ConfigError("N_list must be non-empty");
    for (std::size_t i = 1; i < N_list.size(); ++i)
      if (N_list[i] <= N_list[i - 1])
        throw ConfigError("N_list must be strictly increasing");
    if (samples_per_N < 1) throw ConfigError("samples_per_N must be >= 1");
    for (double e : eps_list)
      if (e <= 0) throw ConfigError("eps values must be positive");
  }
};

// Reference law JSON: {"type": "semicircle", "variance": v}, {"type":
// "arcsine2"}, {"type": "pushforward_inverse", "base": {...}},
// {"type": "tabulated", "t": [...], "F": [...]}, or {"type": "surrogate"}.
inline CdfQueryable law_from_json(const Json& j) {
  std::string type = j.at("type").get<std::string>();
  if (type == "semicircle") return Semicircle{j.value("variance", 1.0)};
  if (type == "arcsine2") return Arcsine2{};
  if (type == "pushforward_inverse")
    return PushforwardInverse{
        std::make_shared<CdfQueryable>(law_from_json(j.at("base")))};
  if (type == "tabulated")
    return TabulatedCdf{j.at("t").get<std::vector<double>>(),
                        j.at("F").get<std::vector<double>>()};
  throw ConfigError("unknown reference law type: " + type);
}

inline Json law_to_json(const CdfQueryable& law) {
  return std::visit(
      [](const auto& l) -> Json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Semicircle>)
          return Json{{"type", "semicircle"}, {"variance", l.variance}};
        else if constexpr (std::is_same_v<T, Arcsine2>)
          return Json{{"type", "arcsine2"}};
        else if constexpr (std::is_same_v<T, PushforwardInverse>)
          return Json{{"type", "pushforward_inverse"}, {"base", law_to_json(*l.base)}};
        else if constexpr (std::is_same_v<T, TabulatedCdf>)
          return Json{{"type", "tabulated"}, {"t", l.t}, {"F", l.f}};
        else
          return Json{{"type", "empirical"}};
      },
      static_cast<const CdfQueryable::variant&>(law));
}

inline SelfAdjointModel model_from_json(const Json& j) {
  SelfAdjointModel m;
  std::string type = j.value("type", "gue");
  if (type == "gue") {
    m.kind = SelfAdjointModel::Kind::GaussianHermitian;
    m.scale = j.value("scale", 1.0);
  } else if (type == "fixed_spectrum") {
    m.kind = SelfAdjointModel::Kind::FixedSpectrumHaarConjugated;
    m.spectrum = j.value("spectrum", "uniform");
    m.lo = j.value("lo", -1.0);
    m.hi = j.value("hi", 1.0);
  } else {
    throw ConfigError("unknown self-adjoint model type: " + type);
  }
  return m;
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  cfg.signature = Signature(j.at("signature").at("d1").get<int>(),
                            j.at("signature").at("d2").get<int>());
  cfg.expression = j.at("expression").get<std::string>();
  if (j.contains("ensemble"))
    for (const Json& m : j.at("ensemble")) cfg.selfadjoint_models.push_back(model_from_json(m));
  cfg.N_list = j.at("N_list").get<std::vector<int>>();
  cfg.samples_per_N = j.value("samples_per_N", 1);
  cfg.eps_list = j.value("eps_list", std::vector<double>{});
  if (j.contains("reference") && j.at("reference").at("type") != "surrogate") {
    cfg.reference.kind = ReferenceSpec::Kind::Analytic;
    cfg.reference.law = law_from_json(j.at("reference"));
  }
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.out_dir = j.value("out_dir", std::string{});
  cfg.inv_tol = j.value("inv_tol", 1e-10);
  cfg.force = j.value("force", false);
  return cfg;
}

// ---------------------------------------------------------------------------
// Convergence experiment

struct SampleResult {
  int N = 0;
  int sample = 0;
  bool in_domain = false;
  std::string spectrum_file;
  double ks = std::numeric_limits<double>::quiet_NaN();
  EmpiricalSpectrum spectrum;
  // Per-eps: window mass at zero and the KS gap between the direct spectrum
  // and the regularized linearized reconstruction.
  std::vector<double> atom0_per_eps;
  std::vector<double> route_ks_per_eps;
};

struct PerNSummary {
  int N = 0;
  double mean_ks = std::numeric_limits<double>::quiet_NaN();
  double max_ks = std::numeric_limits<double>::quiet_NaN();
  int domain_failures = 0;
  bool all_failed = false;
};

struct ConvergenceReport {
  std::vector<SampleResult> samples;
  std::vector<PerNSummary> per_N;
  bool surrogate_reference = false;
  double two_route_max_discrepancy = std::numeric_limits<double>::quiet_NaN();
};

namespace harness_detail {

inline std::string format_short(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline void write_spectrum_csv(const std::string& path, const EmpiricalSpectrum& s) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "index,value\n";
  for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
    out << i << "," << format_short(s.eigenvalues[i]) << "\n";
}

inline void write_cdf_csv(const std::string& path, const EmpiricalSpectrum& s) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "t,F\n";
  const int n = s.dim();
  for (int i = 0; i < n; ++i)
    out << format_short(s.eigenvalues[i]) << ","
        << format_short(static_cast<double>(i + 1) / n) << "\n";
}

/// Spectrum of w* f_eps(Q(X,U,U*)) w: the linearized route to the spectral
/// distribution, which matches the direct route whenever no eigenvalue of
/// the pencil evaluation falls inside [-eps, eps].
inline EmpiricalSpectrum reconstruct_spectrum(const SaLinRep& rep, const MatrixTuple& point,
                                              double eps) {
  Matrix q = eval_pencil(rep.pencil, point);
  Matrix f = regularized_inverse_apply(q, eps);
  Matrix w = kron(rep.column, Matrix::Identity(point.dim, point.dim));
  Matrix r = w.adjoint() * f * w;
  return hermitian_eigenvalues(r);
}

}  // namespace harness_detail

/// Runs the convergence experiment: draws tuples per (N, sample), evaluates
/// the expression, eigendecomposes, compares against the reference CDF, and
/// (when eps_list is non-empty) cross-checks the spectrum against the
/// linearized f_eps reconstruction. Deterministic given config and seed.
inline ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  ExprPtr expr = parse(cfg.expression, cfg.signature);
  if (expr->rows() != expr->cols())
    throw ConfigError("convergence experiments need a square expression");

  if (!cfg.force) {
    SelfAdjointVerdict verdict = is_selfadjoint_probabilistic(
        expr, /*n=*/4, /*trials=*/12, /*tol=*/1e-8, CounterRng::derive(cfg.seed, 0x73636b),
        cfg.inv_tol);
    if (!verdict)
      throw ConfigError(
          "expression failed the self-adjointness check; rerun with force to override");
  }

  std::optional<SaLinRep> sa;
  if (!cfg.eps_list.empty()) sa = linearize_selfadjoint(expr);

  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  const int per_n = cfg.samples_per_N;
  const int total = static_cast<int>(cfg.N_list.size()) * per_n;
  ConvergenceReport report;
  report.samples.resize(total);
  report.surrogate_reference = cfg.reference.kind == ReferenceSpec::Kind::Surrogate;

  parallel_for(total, [&](int idx) {
    SampleResult& r = report.samples[idx];
    r.N = cfg.N_list[idx / per_n];
    r.sample = idx % per_n;
    EnsembleSpec spec;
    spec.signature = cfg.signature;
    spec.dim = r.N;
    spec.selfadjoint_models = cfg.selfadjoint_models;
    spec.seed = CounterRng::derive(cfg.seed, r.N, r.sample);
    MatrixTuple point = sample_tuple(spec);
    EvalOutcome outcome = eval_expr(expr, point, cfg.inv_tol);
    if (!outcome) return;  // domain failure recorded via in_domain = false
    r.in_domain = true;
    r.spectrum = hermitian_eigenvalues(0.5 * (outcome.value() + outcome.value().adjoint()));
    for (double eps : cfg.eps_list) {
      r.atom0_per_eps.push_back(atom_fraction(r.spectrum, 0.0, eps));
      EmpiricalSpectrum rebuilt = harness_detail::reconstruct_spectrum(*sa, point, eps);
      r.route_ks_per_eps.push_back(kolmogorov_distance(r.spectrum, rebuilt));
    }
  });

  // Reference CDF: analytic, or the largest-N first-sample spectrum.
  std::optional<CdfQueryable> reference;
  if (cfg.reference.kind == ReferenceSpec::Kind::Analytic) {
    reference = *cfg.reference.law;
  } else {
    for (int idx = total - per_n; idx < total; ++idx)
      if (report.samples[idx].in_domain) {
        reference = CdfQueryable(report.samples[idx].spectrum);
        break;
      }
  }

  for (SampleResult& r : report.samples) {
    if (!r.in_domain || !reference) continue;
    r.ks = kolmogorov_distance(CdfQueryable(r.spectrum), *reference);
    if (!cfg.out_dir.empty()) {
      r.spectrum_file = "spectrum_N" + std::to_string(r.N) + "_s" + std::to_string(r.sample) +
                        ".csv";
      harness_detail::write_spectrum_csv(
          (std::filesystem::path(cfg.out_dir) / r.spectrum_file).string(), r.spectrum);
    }
  }

  for (std::size_t ni = 0; ni < cfg.N_list.size(); ++ni) {
    PerNSummary s;
    s.N = cfg.N_list[ni];
    double sum = 0.0, worst = 0.0;
    int ok = 0;
    std::vector<double> pooled;
    for (int k = 0; k < per_n; ++k) {
      const SampleResult& r = report.samples[ni * per_n + k];
      if (!r.in_domain) {
        ++s.domain_failures;
        continue;
      }
      ++ok;
      if (!std::isnan(r.ks)) {
        sum += r.ks;
        worst = std::max(worst, r.ks);
      }
      pooled.insert(pooled.end(), r.spectrum.eigenvalues.begin(), r.spectrum.eigenvalues.end());
    }
    s.all_failed = ok == 0;
    if (ok > 0) {
      s.mean_ks = sum / ok;
      s.max_ks = worst;
    }
    report.per_N.push_back(s);
    if (!cfg.out_dir.empty() && !pooled.empty())
      harness_detail::write_cdf_csv(
          (std::filesystem::path(cfg.out_dir) / ("cdf_N" + std::to_string(s.N) + ".csv"))
              .string(),
          EmpiricalSpectrum(std::move(pooled)));
  }

  double worst_route = std::numeric_limits<double>::quiet_NaN();
  for (const SampleResult& r : report.samples)
    for (double d : r.route_ks_per_eps)
      if (std::isnan(worst_route) || d > worst_route) worst_route = d;
  report.two_route_max_discrepancy = worst_route;
  return report;
}

inline Json report_to_json(const ConvergenceReport& report, const ExperimentConfig& cfg) {
  Json samples = Json::array();
  for (const SampleResult& r : report.samples) {
    Json s{{"N", r.N},
           {"sample", r.sample},
           {"in_domain", r.in_domain},
           {"spectrum_file", r.spectrum_file}};
    s["ks"] = std::isnan(r.ks) ? Json() : Json(r.ks);
    if (!r.atom0_per_eps.empty()) {
      Json eps = Json::array();
      for (std::size_t i = 0; i < r.atom0_per_eps.size(); ++i)
        eps.push_back(Json{{"eps", cfg.eps_list[i]},
                           {"atom0", r.atom0_per_eps[i]},
                           {"route_ks", r.route_ks_per_eps[i]}});
      s["eps"] = std::move(eps);
    }
    samples.push_back(std::move(s));
  }
  Json per_n = Json::array();
  for (const PerNSummary& s : report.per_N) {
    Json e{{"N", s.N},
           {"domain_failures", s.domain_failures},
           {"all_failed", s.all_failed}};
    e["mean_ks"] = std::isnan(s.mean_ks) ? Json() : Json(s.mean_ks);
    e["max_ks"] = std::isnan(s.max_ks) ? Json() : Json(s.max_ks);
    per_n.push_back(std::move(e));
  }
  Json out{{"expression", cfg.expression},
           {"signature",
            Json{{"d1", cfg.signature.selfadjoint_count},
                 {"d2", cfg.signature.unitary_count}}},
           {"seed", cfg.seed},
           {"samples", std::move(samples)},
           {"per_N", std::move(per_n)},
           {"surrogate_reference", report.surrogate_reference}};
  out["reference"] = cfg.reference.kind == ReferenceSpec::Kind::Analytic
                         ? law_to_json(*cfg.reference.law)
                         : Json{{"type", "surrogate"}};
  out["two_route_max_discrepancy"] = std::isnan(report.two_route_max_discrepancy)
                                         ? Json()
                                         : Json(report.two_route_max_discrepancy);
  return out;
}

/// Runs the experiment and writes report.json plus per-sample CSVs.
inline ConvergenceReport run_convergence_to_dir(const ExperimentConfig& cfg) {
  ConvergenceReport report = run_convergence(cfg);
  if (!cfg.out_dir.empty()) {
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "report.json");
    out << report_to_json(report, cfg).dump(2) << "\n";
  }
  return report;
}

// ---------------------------------------------------------------------------
// Probabilistic testers

struct DomainWitness {
  int N = 0;
  int trial = 0;
  MatrixTuple point;
};

/// Scans the dimensions in N_list for a point where the expression
/// evaluates; a miss is probabilistic evidence only.
inline std::optional<DomainWitness> test_nondegeneracy(const ExprPtr& expr,
                                                       const std::vector<int>& N_list,
                                                       int trials, std::uint64_t seed,
                                                       double inv_tol = 1e-10) {
  for (int n : N_list) {
    for (int t = 0; t < trials; ++t) {
      MatrixTuple point =
          sample_default_tuple(expr->signature(), n, CounterRng::derive(seed, 0x6e64, n, t));
      if (eval_expr(expr, point, inv_tol)) return DomainWitness{n, t, std::move(point)};
    }
  }
  return std::nullopt;
}

struct FullnessVerdict {
  bool full = false;
  int witness_N = 0;
  int witness_trial = 0;
  double best_sigma_ratio = 0.0;  // best smallest/largest singular value seen

  explicit operator bool() const { return full; }
};

/// A pencil evaluated at an absolutely continuous sample is almost surely
/// invertible when the pencil is full and never invertible otherwise, so a
/// single nonsingular evaluation certifies fullness. The singular/non-full
/// verdict remains probabilistic.
inline FullnessVerdict test_fullness(const AffinePencil& pencil, const std::vector<int>& N_list,
                                     int trials, std::uint64_t seed, double tol = 1e-10) {
  FullnessVerdict verdict;
  Signature sig = pencil.signature;
  for (int n : N_list) {
    for (int t = 0; t < trials; ++t) {
      EnsembleSpec spec;
      spec.signature = sig;
      spec.dim = n;
      spec.seed = CounterRng::derive(seed, 0x66756c, n, t);
      Matrix q = eval_pencil(pencil, sample_tuple(spec));
      Eigen::BDCSVD<Matrix> svd(q);
      const auto& s = svd.singularValues();
      double ratio = s(0) == 0.0 ? 0.0 : s(s.size() - 1) / s(0);
      verdict.best_sigma_ratio = std::max(verdict.best_sigma_ratio, ratio);
      if (ratio > tol) {
        verdict.full = true;
        verdict.witness_N = n;
        verdict.witness_trial = t;
        return verdict;
      }
    }
  }
  return verdict;
}

struct InnerRankEstimate {
  int rank = 0;
  double zero_fraction = 0.0;              // extrapolated to eps -> 0
  std::vector<double> fraction_per_eps;    // at the largest N
};

/// Estimates the inner rank of a square self-adjoint expression matrix from
/// the asymptotic share of zero eigenvalues: evaluates the lift at the
/// dimensions in N_list, measures the atom at 0 for each window in eps_list,
/// extrapolates the window mass to zero width, and returns
/// rank = round(p * (1 - fraction)).
inline InnerRankEstimate estimate_inner_rank(const ExprMatrix& m,
                                             const std::vector<int>& N_list,
                                             std::vector<double> eps_list, std::uint64_t seed,
                                             double inv_tol = 1e-10) {
  m.validate();
  if (m.rows() != m.cols()) throw NotSquareError("inner rank estimation needs a square matrix");
  if (eps_list.empty()) eps_list = {0.1, 0.05, 0.01};
  std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
  ExprPtr lifted = lift_matrix(m);

  const int p = static_cast<int>(m.rows());
  InnerRankEstimate estimate;
  bool any = false;
  for (int n : N_list) {
    std::optional<EmpiricalSpectrum> spectrum;
    for (int t = 0; t < 8 && !spectrum; ++t) {
      MatrixTuple point =
          sample_default_tuple(m.signature(), n, CounterRng::derive(seed, 0x726b, n, t));
      EvalOutcome outcome = eval_expr(lifted, point, inv_tol);
      if (!outcome) continue;
      spectrum =
          hermitian_eigenvalues(0.5 * (outcome.value() + outcome.value().adjoint()));
    }
    if (!spectrum) continue;
    any = true;
    estimate.fraction_per_eps.clear();
    for (double eps : eps_list)
      estimate.fraction_per_eps.push_back(atom_fraction(*spectrum, 0.0, eps));
  }
  if (!any) throw NoSampleInDomainError("no in-domain sample at any requested dimension");

  const auto& f = estimate.fraction_per_eps;
  double f0;
  if (f.size() >= 2) {
    // Linear extrapolation to eps = 0 from the two smallest windows.
    double e1 = eps_list[eps_list.size() - 2], e2 = eps_list.back();
    double f1 = f[f.size() - 2], f2 = f.back();
    f0 = e1 == e2 ? f2 : f2 - e2 * (f1 - f2) / (e1 - e2);
  } else {
    f0 = f.back();
  }
  estimate.zero_fraction = std::clamp(f0, 0.0, 1.0);
  estimate.rank = std::clamp(
      static_cast<int>(std::lround(p * (1.0 - estimate.zero_fraction))), 0, p);
  return estimate;
}

}  // namespace ratspec
