#pragma once

// Command-line front end: generate | compute | mu | validate.
//
// Exit codes: 0 success, 1 internal numerical failure, 2 no grid rate is
// feasible, 3 a trace has no independent data matrix, 4 parse/validation/usage
// error, 5 generation failure, 6 at least one Monte Carlo run failed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwellcert/data.hpp"
#include "dwellcert/dwell.hpp"
#include "dwellcert/error.hpp"
#include "dwellcert/lmi.hpp"
#include "dwellcert/psi.hpp"
#include "dwellcert/sim.hpp"

namespace dwellcert::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInfeasibleGrid = 2,
  kAssumptionViolated = 3,
  kInvalidInput = 4,
  kGenerationFailed = 5,
  kValidationFailed = 6,
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Write-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    if (!out.flush()) throw ValidationError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

// Shortest round-trip decimal, e.g. 0.7 rather than 0.69999999999999996.
inline std::string fmt(double v) { return Json(v).dump(); }

inline bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// One JSON dataset, or one CSV file per subsystem in order.
inline SubsystemDataset load_dataset(const std::vector<std::string>& paths) {
  if (paths.size() == 1 && !ends_with(paths.front(), ".csv")) return parse_dataset(read_file(paths.front()));
  std::vector<std::string> texts;
  for (const auto& p : paths) {
    if (!ends_with(p, ".csv")) throw ValidationError("--data: mix of CSV and non-CSV inputs ('" + p + "')");
    texts.push_back(read_file(p));
  }
  return dataset_from_csv(texts, paths);
}

inline std::vector<Vector> parse_initial_states(std::string_view text) {
  const Json doc = detail::parse_json(text, "initial states");
  const Json& arr = doc.is_object() ? detail::require(doc, "initial_states", "initial states") : doc;
  if (!arr.is_array()) throw ParseError("initial states: expected an array of vectors");
  std::vector<Vector> out;
  for (const auto& x : arr) out.push_back(detail::as_vector(x, "initial states", "initial_states"));
  return out;
}

struct GenerateArgs {
  std::size_t modes = 0;
  std::size_t dim = 0;
  std::size_t length = 0;
  std::uint64_t seed = 1;
  double tol = kDefaultIndependenceTol;
  std::string out_data, out_models, coeffs, initial_states;
};

struct ComputeArgs {
  std::vector<std::string> data;
  std::string out;
  AlgorithmConfig cfg;
  std::string solver = "barrier";
};

struct MuArgs {
  std::string certificates, out, data;
  double eps = 0.01;
  double tol = kDefaultIndependenceTol;
};

struct ValidateArgs {
  std::string models, out_report, out_norms;
  std::size_t tau = 0;
  std::size_t runs = 1000;
  std::size_t horizon = 500;
  std::uint64_t seed = 1;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  err << "config: generate modes=" << a.modes << " dim=" << a.dim << " length=" << a.length << " seed=" << a.seed
      << " tol=" << fmt(a.tol) << " coeffs=" << (a.coeffs.empty() ? "<random>" : a.coeffs)
      << " initial-states=" << (a.initial_states.empty() ? "<random>" : a.initial_states)
      << " out-data=" << a.out_data << " out-models=" << a.out_models << "\n";
  Rng rng(a.seed);
  std::vector<SubsystemModel> models;
  if (!a.coeffs.empty()) {
    models = parse_models(read_file(a.coeffs));
    if (a.modes != 0 && a.modes != models.size())
      throw ValidationError("--modes " + std::to_string(a.modes) + " disagrees with " +
                            std::to_string(models.size()) + " models in '" + a.coeffs + "'");
    if (a.dim != 0 && a.dim != models.front().dimension())
      throw ValidationError("--dim " + std::to_string(a.dim) + " disagrees with the models' dimension");
  } else {
    if (a.modes < 1 || a.dim < 1) throw ValidationError("--modes and --dim (>= 1) are required without --coeffs");
    if (a.length < a.dim)
      throw ValidationError("--length " + std::to_string(a.length) + " is below --dim " + std::to_string(a.dim));
    for (std::size_t i = 0; i < a.modes; ++i) models.push_back(random_schur_companion(a.dim, rng));
  }
  SubsystemDataset ds;
  if (!a.initial_states.empty())
    ds = dataset_from_initial_states(models, parse_initial_states(read_file(a.initial_states)), a.length, a.tol);
  else
    ds = generate_dataset(models, a.length, rng, a.tol);
  write_file_atomic(a.out_models, serialize_models(models));
  write_file_atomic(a.out_data, serialize_dataset(ds));
  out << "generated " << models.size() << " subsystems of dimension " << ds.dimension << " with L = " << a.length
      << "\n";
  return kOk;
}

inline int cmd_compute(ComputeArgs a, std::ostream& out, std::ostream& err) {
  a.cfg.solver.method = a.solver == "subgradient" ? SolverMethod::subgradient : SolverMethod::barrier;
  const auto& c = a.cfg;
  err << "config: compute data=";
  for (std::size_t i = 0; i < a.data.size(); ++i) err << (i ? "," : "") << a.data[i];
  err << " h=" << fmt(c.h) << " eps=" << fmt(c.epsilon) << " tol=" << fmt(c.independence_tol)
      << " max-iter=" << c.solver.max_iterations << " feas-tol=" << fmt(c.solver.feas_tol) << " solver=" << a.solver
      << " c0=" << fmt(c.solver.c0) << " optimize-tau=" << (c.optimize_tau ? "on" : "off")
      << " h-refine=" << (c.h_refine ? "on" : "off") << " out=" << a.out << "\n";
  const SubsystemDataset ds = load_dataset(a.data);
  const DwellTimeResult r = compute_min_dwell(ds, a.cfg);
  write_file_atomic(a.out, serialize_result(r));
  out << "lambda_s = " << fmt(r.lambda_s) << "\n"
      << "mu = " << fmt(r.mu) << "\n"
      << "tau = " << r.tau << "\n";
  return kOk;
}

inline constexpr double kSymmetryTol = 1e-12;

inline int cmd_mu(const MuArgs& a, std::ostream& out, std::ostream& err) {
  err << "config: mu certificates=" << a.certificates << " eps=" << fmt(a.eps)
      << " data=" << (a.data.empty() ? "<none>" : a.data) << " tol=" << fmt(a.tol) << " out=" << a.out << "\n";
  const CertificateSet set = parse_certificate_set(read_file(a.certificates));
  std::vector<Matrix> ps;
  for (const auto& [id, p] : set.matrices) {
    const std::string who = "certificate " + std::to_string(id);
    if (relative_asymmetry(p) > kSymmetryTol) throw ValidationError(who + ": field 'P' is not symmetric");
    if (!is_positive_definite(p)) throw ValidationError(who + ": field 'P' is not positive definite");
    ps.push_back(p);
  }
  std::optional<SubsystemDataset> ds;
  if (!a.data.empty()) {
    ds = load_dataset({a.data});
    if (ds->size() != ps.size() || ds->dimension != ps.front().rows())
      throw ValidationError("--data does not match the certificates in count or dimension");
  }
  const MuSummary mu = mu_max(ps);
  DwellTimeResult r;
  r.lambda_s = set.lambda_s;
  r.epsilon = a.eps;
  r.mu = mu.mu;
  r.mu_matrix = mu.mu_matrix;
  r.tau = dwell_time(mu.mu, set.lambda_s, a.eps);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CertificateRecord rec{static_cast<int>(i) + 1, ps[i], lambda_min(ps[i]), std::nullopt, std::nullopt};
    if (ds) {
      PsiMatrix psi = find_psi(ds->subsystems[i].trace, a.tol);
      rec.t_offset = static_cast<int>(psi.t_offset);
      const auto margins = verify_certificate(LmiProblem(std::move(psi), set.lambda_s), ps[i]);
      rec.margin_pd = margins.margin_pd;
      rec.margin_lmi = margins.margin_lmi;
    }
    r.certificates.push_back(std::move(rec));
  }
  write_file_atomic(a.out, serialize_result(r));
  out << "mu = " << fmt(r.mu) << "\n"
      << "tau = " << r.tau << "\n";
  if (ds) {
    for (const auto& rec : r.certificates)
      out << "certificate " << rec.id << ": margin_pd = " << fmt(rec.margin_pd)
          << " margin_lmi = " << fmt(*rec.margin_lmi) << "\n";
  }
  return kOk;
}

inline int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  err << "config: validate models=" << a.models << " tau=" << a.tau << " runs=" << a.runs << " horizon=" << a.horizon
      << " seed=" << a.seed << " threshold=" << fmt(kGasThreshold) << " out-report=" << a.out_report
      << " out-norms=" << a.out_norms << "\n";
  if (a.runs < 1) throw ValidationError("--runs must be >= 1");
  if (a.tau < 1) throw ValidationError("--tau must be >= 1");
  const std::vector<SubsystemModel> models = parse_models(read_file(a.models));
  const MonteCarloReport rep = monte_carlo_gas(models, a.tau, a.runs, a.horizon, a.seed);
  write_file_atomic(a.out_report, serialize_report_summary(rep));
  write_file_atomic(a.out_norms, serialize_norms_csv(rep));
  out << "passed " << rep.passed << "/" << rep.runs << " (worst final ratio " << fmt(rep.worst_final_ratio) << ")\n";
  return rep.all_passed() ? kOk : kValidationFailed;
}

// Parses argv (argv[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Stabilizing minimum dwell times for switched linear systems from trajectory data", "dwellcert"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate companion models and trajectory data");
  g->add_option("--modes", gen.modes, "Number of subsystems");
  g->add_option("--dim", gen.dim, "State dimension d");
  g->add_option("--length", gen.length, "Trace length L (states x(0..L))")->required();
  g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  g->add_option("--tol", gen.tol, "Independence tolerance sigma_min/sigma_max")->capture_default_str();
  g->add_option("--out-data", gen.out_data, "Dataset document to write")->required();
  g->add_option("--out-models", gen.out_models, "Models document to write")->required();
  g->add_option("--coeffs", gen.coeffs, "Use the models in this document instead of random ones");
  g->add_option("--initial-states", gen.initial_states, "Initial states, one per subsystem (no retries)");

  ComputeArgs comp;
  auto* c = app.add_subcommand("compute", "Compute a stabilizing minimum dwell time from data");
  c->set_help_flag("--help", "Print this help message and exit");  // -h would clash with --h
  c->add_option("--data", comp.data, "Dataset document, or one CSV trace per subsystem")->required();
  c->add_option("--h", comp.cfg.h, "Grid step for lambda_s")->capture_default_str();
  c->add_option("--eps", comp.cfg.epsilon, "epsilon in the dwell-time formula")->capture_default_str();
  c->add_option("--tol", comp.cfg.independence_tol, "Independence tolerance sigma_min/sigma_max")
      ->capture_default_str();
  c->add_option("--max-iter", comp.cfg.solver.max_iterations, "Solver iteration cap")->capture_default_str();
  c->add_option("--feas-tol", comp.cfg.solver.feas_tol, "Strict feasibility threshold on the margin")
      ->capture_default_str();
  c->add_option("--solver", comp.solver, "LMI method")
      ->check(CLI::IsMember({"barrier", "subgradient"}))
      ->capture_default_str();
  c->add_option("--c0", comp.cfg.solver.c0, "Subgradient step constant")->capture_default_str();
  c->add_flag("--optimize-tau", comp.cfg.optimize_tau, "Minimize tau over all feasible grid rates");
  c->add_flag("--h-refine", comp.cfg.h_refine, "Retry with h/10 (up to 3 times) when no grid rate is feasible");
  c->add_option("--out", comp.out, "Result document to write")->required();

  MuArgs mua;
  auto* m = app.add_subcommand("mu", "Recompute mu and tau from supplied certificates");
  m->add_option("--certificates", mua.certificates, "Document with lambda_s and P matrices")->required();
  m->add_option("--eps", mua.eps, "epsilon in the dwell-time formula")->capture_default_str();
  m->add_option("--data", mua.data, "Optional dataset to verify the certificates against");
  m->add_option("--tol", mua.tol, "Independence tolerance used with --data")->capture_default_str();
  m->add_option("--out", mua.out, "Result document to write")->required();

  ValidateArgs val;
  auto* v = app.add_subcommand("validate", "Monte Carlo check of a dwell time against known models");
  v->add_option("--models", val.models, "Models document")->required();
  v->add_option("--tau", val.tau, "Minimum dwell time to enforce")->required();
  v->add_option("--runs", val.runs, "Number of runs")->capture_default_str();
  v->add_option("--horizon", val.horizon, "Steps per run")->capture_default_str();
  v->add_option("--seed", val.seed, "Random seed")->capture_default_str();
  v->add_option("--out-report", val.out_report, "Summary document to write")->required();
  v->add_option("--out-norms", val.out_norms, "Norms table (run,t,norm) to write")->required();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("dwellcert");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kInvalidInput;
  }

  try {
    if (g->parsed()) return cmd_generate(gen, out, err);
    if (c->parsed()) return cmd_compute(comp, out, err);
    if (m->parsed()) return cmd_mu(mua, out, err);
    return cmd_validate(val, out, err);
  } catch (const InfeasibleGridError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasibleGrid;
  } catch (const AssumptionViolatedError& e) {
    err << "assumption violated: " << e.what() << "\n";
    return kAssumptionViolated;
  } catch (const GenerationError& e) {
    err << "generation failed: " << e.what() << "\n";
    return kGenerationFailed;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const NotPositiveDefiniteError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const IndexError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace dwellcert::cli
