// ratspec: noncommutative rational expressions, linear pencil
// representations, and random-matrix spectra from the command line.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "ratspec/harness.hpp"

namespace {

using namespace ratspec;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;  // verdict-negative (sa-check No, not full, ...)
constexpr int kExitUsage = 2;

struct GlobalOpts {
  std::uint64_t seed = 0;
  double tol = 1e-8;
  std::string out_dir;
  bool json = false;
};

ExprSource load_source(const std::string& expr_file, const std::string& text, int d1, int d2) {
  if (!expr_file.empty()) return read_expr_file(expr_file);
  if (text.empty()) throw ConfigError("provide either an expression file or literal text");
  return ExprSource{text, Signature(d1, d2)};
}

CdfQueryable reference_by_name(const std::string& name) {
  auto split = [](const std::string& s) {
    auto colon = s.find(':');
    return std::pair{s.substr(0, colon),
                     colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1))};
  };
  auto [kind, value] = split(name);
  if (kind == "semicircle") return Semicircle{value};
  if (kind == "arcsine2") return Arcsine2{};
  if (kind == "inv-semicircle")
    return PushforwardInverse{std::make_shared<CdfQueryable>(Semicircle{value})};
  throw ConfigError("unknown reference '" + name +
                    "' (expected semicircle[:var], arcsine2, inv-semicircle[:var], surrogate)");
}

std::string pretty_matrix(const Matrix& m) {
  std::ostringstream out;
  out << m;
  return out.str();
}

int cmd_parse(const GlobalOpts& g, const ExprSource& src) {
  ExprPtr e = parse(src);
  if (g.json) {
    Json j{{"canonical", render(e)},
           {"rows", e->rows()},
           {"cols", e->cols()},
           {"signature",
            Json{{"d1", src.signature.selfadjoint_count},
                 {"d2", src.signature.unitary_count}}}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << render(e) << "\n";
  }
  return kExitOk;
}

int cmd_linearize(const GlobalOpts& g, const ExprSource& src, bool selfadjoint, bool schur) {
  ExprPtr e = parse(src);
  FormalLinRep rep = linearize(e);
  Json j;
  if (schur) {
    j = to_json(schur_pencil(rep));
  } else if (selfadjoint) {
    SaLinRep sa = make_selfadjoint_rep(rep);
    j = to_json(sa);
    j["proper"] = is_proper(sa);
  } else {
    j = to_json(rep);
    j["proper"] = is_proper(rep);
  }
  if (g.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "dimension k = " << j["k"] << (schur ? " (bordered pencil)" : "")
              << (j.contains("proper") ? (j["proper"].get<bool>() ? ", proper" : ", NOT proper")
                                       : "")
              << "\n"
              << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_eval(const GlobalOpts& g, const ExprSource& src, const std::string& point_file,
             double inv_tol) {
  ExprPtr e = parse(src);
  std::ifstream in(point_file);
  if (!in) throw ConfigError("cannot open point file: " + point_file);
  MatrixTuple point = tuple_from_json(Json::parse(in));
  EvalOutcome outcome = eval_expr(e, point, inv_tol);
  if (!outcome) {
    const DomainFailure& f = outcome.failure();
    if (g.json) {
      Json j{{"in_domain", false}, {"failure", to_json(f)}};
      j["failure"]["subexpression"] = render(f.subexpression);
      std::cout << j.dump(2) << "\n";
    } else {
      std::cout << "domain failure at " << render(f.subexpression)
                << " (sigma_min = " << f.sigma_min << ", sigma_max = " << f.sigma_max << ")\n";
    }
    return kExitNegative;
  }
  if (g.json) {
    Json j{{"in_domain", true}, {"value", to_json(outcome.value())}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << pretty_matrix(outcome.value()) << "\n";
  }
  return kExitOk;
}

int cmd_sample(const GlobalOpts& g, int d1, int d2, int n) {
  EnsembleSpec spec;
  spec.signature = Signature(d1, d2);
  spec.dim = n;
  spec.seed = g.seed;
  MatrixTuple t = sample_tuple(spec);
  std::cout << to_json(t).dump(g.json ? -1 : 2) << "\n";
  return kExitOk;
}

int cmd_sa_check(const GlobalOpts& g, const ExprSource& src, int n, int trials) {
  ExprPtr e = parse(src);
  SelfAdjointVerdict verdict = is_selfadjoint_probabilistic(e, n, trials, g.tol, g.seed);
  if (g.json) {
    Json j{{"selfadjoint", verdict.selfadjoint},
           {"worst_defect", verdict.worst_defect},
           {"successful_trials", verdict.successful_trials}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << (verdict ? "self-adjoint (probabilistic)" : "NOT self-adjoint")
              << "; worst relative asymmetry " << verdict.worst_defect << " over "
              << verdict.successful_trials << " in-domain trials\n";
  }
  return verdict ? kExitOk : kExitNegative;
}

int cmd_converge(const GlobalOpts& g, ExperimentConfig cfg, const std::string& config_file) {
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw ConfigError("cannot open config file: " + config_file);
    cfg = config_from_json(Json::parse(in));
  }
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (cfg.seed == 0) cfg.seed = g.seed;
  ConvergenceReport report = run_convergence_to_dir(cfg);
  if (g.json) {
    std::cout << report_to_json(report, cfg).dump(2) << "\n";
  } else {
    for (const PerNSummary& s : report.per_N) {
      std::cout << "N = " << s.N;
      if (s.all_failed)
        std::cout << ": all samples out of domain";
      else
        std::cout << ": mean KS = " << s.mean_ks << ", max KS = " << s.max_ks << " ("
                  << s.domain_failures << " domain failures)";
      std::cout << "\n";
    }
    if (!std::isnan(report.two_route_max_discrepancy))
      std::cout << "two-route max discrepancy = " << report.two_route_max_discrepancy << "\n";
    if (!cfg.out_dir.empty()) std::cout << "report written to " << cfg.out_dir << "\n";
  }
  return kExitOk;
}

int cmd_fullness(const GlobalOpts& g, const ExprSource& src, const std::string& pencil_file,
                 std::vector<int> n_list, int trials) {
  AffinePencil pencil;
  if (!pencil_file.empty()) {
    std::ifstream in(pencil_file);
    if (!in) throw ConfigError("cannot open pencil file: " + pencil_file);
    pencil = pencil_from_json(Json::parse(in));
  } else {
    ExprPtr e = parse(src);
    pencil = schur_pencil(linearize(e));
  }
  if (n_list.empty()) n_list = {2, 4, 8};
  FullnessVerdict verdict = test_fullness(pencil, n_list, trials, g.seed);
  if (g.json) {
    Json j{{"full", verdict.full}, {"best_sigma_ratio", verdict.best_sigma_ratio}};
    if (verdict) {
      j["witness_N"] = verdict.witness_N;
      j["witness_trial"] = verdict.witness_trial;
    }
    std::cout << j.dump(2) << "\n";
  } else if (verdict) {
    std::cout << "full (witness at N = " << verdict.witness_N << ", trial "
              << verdict.witness_trial << ")\n";
  } else {
    std::cout << "probably NOT full (best sigma ratio " << verdict.best_sigma_ratio << ")\n";
  }
  return verdict ? kExitOk : kExitNegative;
}

int cmd_rank(const GlobalOpts& g, const std::string& matrix_file, std::vector<int> n_list,
             std::vector<double> eps_list) {
  ExprSource src = read_expr_file(matrix_file);
  ExprMatrix m = parse_matrix(src.text, src.signature);
  if (n_list.empty()) n_list = {50, 100, 200};
  InnerRankEstimate estimate = estimate_inner_rank(m, n_list, eps_list, g.seed);
  if (g.json) {
    Json j{{"rank", estimate.rank},
           {"zero_fraction", estimate.zero_fraction},
           {"fraction_per_eps", estimate.fraction_per_eps}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "estimated inner rank = " << estimate.rank << " (zero-eigenvalue fraction "
              << estimate.zero_fraction << ")\n";
  }
  return kExitOk;
}

int cmd_nondegenerate(const GlobalOpts& g, const ExprSource& src, std::vector<int> n_list,
                      int trials) {
  ExprPtr e = parse(src);
  if (n_list.empty()) n_list = {1, 2, 3, 4};
  auto witness = test_nondegeneracy(e, n_list, trials, g.seed);
  if (g.json) {
    Json j{{"found", witness.has_value()}};
    if (witness) {
      j["N"] = witness->N;
      j["trial"] = witness->trial;
    }
    std::cout << j.dump(2) << "\n";
  } else if (witness) {
    std::cout << "witness at N = " << witness->N << " (trial " << witness->trial << ")\n";
  } else {
    std::cout << "no witness found (probabilistic; not a proof of degeneracy)\n";
  }
  return witness ? kExitOk : kExitNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "noncommutative rational expressions, linearizations, and random-matrix spectra"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "base RNG seed")->capture_default_str();
  app.add_option("--tol", g.tol, "generic tolerance")->capture_default_str();
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--json", g.json, "machine-readable output on stdout");

  std::string expr_file, text, point_file, config_file, pencil_file, matrix_file, reference;
  std::string reference_json;
  int d1 = 1, d2 = 0, n = 4, trials = 20, samples = 1;
  double inv_tol = 1e-10;
  std::vector<int> n_list;
  std::vector<double> eps_list;
  bool selfadjoint = false, schur = false, force = false;

  auto add_expr_opts = [&](CLI::App* cmd) {
    cmd->add_option("--expr", expr_file, "expression file (signature header + text)");
    cmd->add_option("--text", text, "expression text (with --d1/--d2)");
    cmd->add_option("--d1", d1, "self-adjoint variable count for --text");
    cmd->add_option("--d2", d2, "unitary variable count for --text");
  };

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse and print the canonical form");
  add_expr_opts(parse_cmd);

  CLI::App* lin_cmd = app.add_subcommand("linearize", "build a formal linear representation");
  add_expr_opts(lin_cmd);
  lin_cmd->add_flag("--selfadjoint", selfadjoint, "build the self-adjoint representation");
  lin_cmd->add_flag("--schur", schur, "print the bordered pencil instead");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate at a matrix tuple");
  add_expr_opts(eval_cmd);
  eval_cmd->add_option("--point", point_file, "matrix tuple JSON file")->required();
  eval_cmd->add_option("--inv-tol", inv_tol, "relative invertibility threshold")
      ->capture_default_str();

  CLI::App* sample_cmd = app.add_subcommand("sample", "draw a GUE/Haar matrix tuple");
  sample_cmd->add_option("--d1", d1, "self-adjoint variable count")->required();
  sample_cmd->add_option("--d2", d2, "unitary variable count")->required();
  sample_cmd->add_option("--N", n, "matrix dimension")->required();

  CLI::App* sa_cmd = app.add_subcommand("sa-check", "randomized self-adjointness test");
  add_expr_opts(sa_cmd);
  sa_cmd->add_option("--N", n, "test dimension")->capture_default_str();
  sa_cmd->add_option("--trials", trials, "number of sampled points")->capture_default_str();

  CLI::App* conv_cmd = app.add_subcommand("converge", "run a convergence experiment");
  add_expr_opts(conv_cmd);
  conv_cmd->add_option("--config", config_file, "experiment config JSON (overrides flags)");
  conv_cmd->add_option("--N", n_list, "dimensions, ascending")->delimiter(',');
  conv_cmd->add_option("--samples", samples, "samples per dimension")->capture_default_str();
  conv_cmd->add_option("--eps", eps_list, "f_eps regularization widths")->delimiter(',');
  conv_cmd->add_option("--reference", reference,
                       "reference law: semicircle[:var], arcsine2, inv-semicircle[:var], "
                       "surrogate");
  conv_cmd->add_option("--reference-json", reference_json, "reference law as JSON");
  conv_cmd->add_flag("--force", force, "skip the self-adjointness gate");

  CLI::App* full_cmd = app.add_subcommand("fullness", "probabilistic pencil fullness test");
  add_expr_opts(full_cmd);
  full_cmd->add_option("--pencil", pencil_file, "pencil JSON file (instead of --expr)");
  full_cmd->add_option("--N", n_list, "dimensions to try")->delimiter(',');
  full_cmd->add_option("--trials", trials, "trials per dimension")->capture_default_str();

  CLI::App* rank_cmd = app.add_subcommand("rank", "estimate inner rank from zero eigenvalues");
  rank_cmd->add_option("--matrix", matrix_file, "matrix expression file")->required();
  rank_cmd->add_option("--N", n_list, "dimensions, ascending")->delimiter(',');
  rank_cmd->add_option("--eps", eps_list, "atom windows, descending")->delimiter(',');

  CLI::App* nd_cmd = app.add_subcommand("nondegenerate", "scan for a domain witness");
  add_expr_opts(nd_cmd);
  nd_cmd->add_option("--N", n_list, "dimensions to try")->delimiter(',');
  nd_cmd->add_option("--trials", trials, "trials per dimension")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (parse_cmd->parsed()) return cmd_parse(g, load_source(expr_file, text, d1, d2));
    if (lin_cmd->parsed())
      return cmd_linearize(g, load_source(expr_file, text, d1, d2), selfadjoint, schur);
    if (eval_cmd->parsed())
      return cmd_eval(g, load_source(expr_file, text, d1, d2), point_file, inv_tol);
    if (sample_cmd->parsed()) return cmd_sample(g, d1, d2, n);
    if (sa_cmd->parsed())
      return cmd_sa_check(g, load_source(expr_file, text, d1, d2), n, trials);
    if (conv_cmd->parsed()) {
      ExperimentConfig cfg;
      if (config_file.empty()) {
        ExprSource src = load_source(expr_file, text, d1, d2);
        cfg.expression = src.text;
        cfg.signature = src.signature;
        cfg.N_list = n_list;
        cfg.samples_per_N = samples;
        cfg.eps_list = eps_list;
        cfg.seed = g.seed;
        cfg.force = force;
        if (!reference_json.empty()) {
          cfg.reference.kind = ReferenceSpec::Kind::Analytic;
          cfg.reference.law = law_from_json(Json::parse(reference_json));
        } else if (!reference.empty() && reference != "surrogate") {
          cfg.reference.kind = ReferenceSpec::Kind::Analytic;
          cfg.reference.law = reference_by_name(reference);
        }
      }
      return cmd_converge(g, std::move(cfg), config_file);
    }
    if (full_cmd->parsed())
      return cmd_fullness(g, expr_file.empty() && text.empty()
                                 ? ExprSource{"x1", Signature(1, 0)}
                                 : load_source(expr_file, text, d1, d2),
                          pencil_file, n_list, trials);
    if (rank_cmd->parsed()) return cmd_rank(g, matrix_file, n_list, eps_list);
    if (nd_cmd->parsed())
      return cmd_nondegenerate(g, load_source(expr_file, text, d1, d2), n_list, trials);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
