#pragma once

// Minimum dwell time from subsystem data:
//   1. a data matrix per subsystem,
//   2. the smallest grid rate lambda_s at which every subsystem admits a
//      certificate P_i,
//   3. mu_ij = lambda_max(P_j P_i^{-1}) and mu = max mu_ij,
//   4. tau = ceil(ln(mu) / |ln(lambda_s)| + epsilon).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dwellcert/data.hpp"
#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"
#include "dwellcert/lmi.hpp"
#include "dwellcert/psi.hpp"

namespace dwellcert {

struct AlgorithmConfig {
  double h = 0.1;
  double epsilon = 0.01;
  double independence_tol = kDefaultIndependenceTol;
  SolverOptions solver;
  bool optimize_tau = false;  // search the whole grid for the smallest tau
  bool h_refine = false;      // on total infeasibility retry with h/10, up to 3 times
};

inline constexpr int kMaxGridRefinements = 3;

// {h, 2h, ..., kh} with k the largest integer such that kh < 1. When 1/h is
// an integer m the points are formed as j/m so that e.g. 7 * 0.1 reads 0.7.
inline std::vector<double> lambda_grid(double h) {
  if (!(h > 0.0 && h < 1.0)) throw DomainError("lambda_grid: h must lie in ]0,1[");
  const double inv = 1.0 / h;
  const double m = std::round(inv);
  const bool exact = std::abs(m * h - 1.0) < 1e-12;
  auto point = [&](long j) { return exact ? static_cast<double>(j) / m : static_cast<double>(j) * h; };
  std::vector<double> grid;
  for (long j = 1; point(j) < 1.0 && (!exact || j < static_cast<long>(m)); ++j) grid.push_back(point(j));
  return grid;
}

struct LineSearchResult {
  double lambda_s = 0.0;
  double h = 0.0;  // grid step that produced lambda_s
  std::vector<LyapunovCertificate> certificates;
};

namespace detail {

// Certificates for every subsystem at one rate, or the index of the first
// subsystem that failed.
struct RateAttempt {
  std::vector<LyapunovCertificate> certificates;
  std::optional<std::size_t> failed;
};

inline RateAttempt try_rate(const std::vector<PsiMatrix>& psis, double lambda, const SolverOptions& opts) {
  RateAttempt out;
  for (std::size_t i = 0; i < psis.size(); ++i) {
    FeasibilityOutcome r = solve_feasibility(LmiProblem(psis[i], lambda), opts);
    if (!r.feasible()) {
      out.failed = i;
      out.certificates.clear();
      return out;
    }
    out.certificates.push_back(std::move(*r.certificate));
  }
  return out;
}

inline std::vector<double> refinement_steps(const AlgorithmConfig& cfg) {
  std::vector<double> steps{cfg.h};
  if (cfg.h_refine)
    for (int r = 0; r < kMaxGridRefinements; ++r) steps.push_back(steps.back() / 10.0);
  return steps;
}

[[noreturn]] inline void throw_infeasible(const std::vector<double>& steps, double last_lambda,
                                          std::size_t failed_subsystem) {
  std::ostringstream msg;
  msg << "no grid rate admits certificates for all subsystems (grid step";
  for (std::size_t k = 0; k < steps.size(); ++k) msg << (k ? ", " : " ") << steps[k];
  msg << "); subsystem " << failed_subsystem + 1 << " is infeasible at the largest rate " << last_lambda;
  throw InfeasibleGridError(msg.str());
}

}  // namespace detail

// Smallest grid rate at which every subsystem's LMI is strictly feasible,
// scanning upward and stopping at the first success.
inline LineSearchResult line_search_lambda(const std::vector<PsiMatrix>& psis, const AlgorithmConfig& cfg) {
  if (psis.empty()) throw DomainError("line_search_lambda: no subsystems");
  const auto steps = detail::refinement_steps(cfg);
  double last_lambda = 0.0;
  std::size_t last_failed = 0;
  for (double h : steps) {
    // Feasibility is monotone in lambda, so a finer grid only needs the
    // points above the largest rate that already failed.
    const double known_infeasible = last_lambda;
    for (double lambda : lambda_grid(h)) {
      if (lambda <= known_infeasible) continue;
      detail::RateAttempt attempt = detail::try_rate(psis, lambda, cfg.solver);
      if (!attempt.failed) return {lambda, h, std::move(attempt.certificates)};
      last_lambda = lambda;
      last_failed = *attempt.failed;
    }
  }
  detail::throw_infeasible(steps, last_lambda, last_failed);
}

// lambda_max(P_j P_i^{-1}) computed as lambda_max(L^{-1} P_j L^{-T}) with P_i = L L^T.
inline double mu_pairwise(const Matrix& p_i, const Matrix& p_j) {
  if (p_i.rows() != p_j.rows() || !p_i.is_square() || !p_j.is_square())
    throw DimensionError("mu_pairwise: certificates must be square and of equal size");
  const Matrix li = lower_inverse(cholesky(p_i));
  (void)cholesky(p_j);
  return lambda_max(li * p_j * li.transpose());
}

struct MuSummary {
  double mu = 1.0;
  Matrix mu_matrix;
};

// mu_matrix(i, j) = mu_pairwise(P_i, P_j); the diagonal is exactly 1.
inline MuSummary mu_max(const std::vector<Matrix>& ps) {
  if (ps.empty()) throw DomainError("mu_max: no certificates");
  const std::size_t n = ps.size();
  MuSummary out{1.0, Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      out.mu_matrix(i, j) = i == j ? 1.0 : mu_pairwise(ps[i], ps[j]);
      out.mu = std::max(out.mu, out.mu_matrix(i, j));
    }
  return out;
}

inline MuSummary mu_max(const std::vector<LyapunovCertificate>& certs) {
  std::vector<Matrix> ps;
  ps.reserve(certs.size());
  for (const auto& c : certs) ps.push_back(c.p);
  return mu_max(ps);
}

inline int dwell_time(double mu, double lambda_s, double epsilon) {
  if (!(mu >= 1.0) || !std::isfinite(mu)) throw DomainError("dwell_time: mu must be >= 1");
  if (!(lambda_s > 0.0 && lambda_s < 1.0)) throw DomainError("dwell_time: lambda_s must lie in ]0,1[");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("dwell_time: epsilon must be > 0");
  return std::max(1, detail::dwell_time_formula(mu, lambda_s, epsilon));
}

// Data matrices for every subsystem; failures name the subsystem.
inline std::vector<PsiMatrix> build_all_psi(const SubsystemDataset& ds, double tol) {
  std::vector<PsiMatrix> psis;
  psis.reserve(ds.size());
  for (const auto& s : ds.subsystems) {
    try {
      psis.push_back(find_psi(s.trace, tol));
    } catch (const AssumptionViolatedError& e) {
      throw AssumptionViolatedError("subsystem " + std::to_string(s.id) + ": " + e.what(), e.best_ratio(),
                                    e.best_offset());
    }
  }
  return psis;
}

inline DwellTimeResult assemble_result(double lambda_s, const std::vector<LyapunovCertificate>& certs,
                                       const std::vector<PsiMatrix>& psis, double epsilon) {
  const MuSummary mu = mu_max(certs);
  DwellTimeResult r;
  r.lambda_s = lambda_s;
  r.epsilon = epsilon;
  r.mu = mu.mu;
  r.mu_matrix = mu.mu_matrix;
  r.tau = dwell_time(mu.mu, lambda_s, epsilon);
  for (std::size_t i = 0; i < certs.size(); ++i)
    r.certificates.push_back({static_cast<int>(i) + 1, certs[i].p, certs[i].margin_pd, certs[i].margin_lmi,
                              static_cast<int>(psis[i].t_offset)});
  validate(r);
  return r;
}

// The full pipeline. With cfg.optimize_tau every grid rate feasible for all
// subsystems is evaluated and the smallest tau wins (ties keep the smaller rate).
inline DwellTimeResult compute_min_dwell(const SubsystemDataset& ds, const AlgorithmConfig& cfg = {}) {
  validate(ds);
  if (!(cfg.epsilon > 0.0)) throw DomainError("compute_min_dwell: epsilon must be > 0");
  const std::vector<PsiMatrix> psis = build_all_psi(ds, cfg.independence_tol);

  if (!cfg.optimize_tau) {
    const LineSearchResult ls = line_search_lambda(psis, cfg);
    return assemble_result(ls.lambda_s, ls.certificates, psis, cfg.epsilon);
  }

  const auto steps = detail::refinement_steps(cfg);
  double last_lambda = 0.0;
  std::size_t last_failed = 0;
  for (double h : steps) {
    std::optional<DwellTimeResult> best;
    const double known_infeasible = last_lambda;
    for (double lambda : lambda_grid(h)) {
      if (lambda <= known_infeasible) continue;
      detail::RateAttempt attempt = detail::try_rate(psis, lambda, cfg.solver);
      if (attempt.failed) {
        last_lambda = lambda;
        last_failed = *attempt.failed;
        continue;
      }
      DwellTimeResult r = assemble_result(lambda, attempt.certificates, psis, cfg.epsilon);
      if (!best || r.tau < best->tau) best = std::move(r);
    }
    if (best) return *best;
  }
  detail::throw_infeasible(steps, last_lambda, last_failed);
}

}  // namespace dwellcert
