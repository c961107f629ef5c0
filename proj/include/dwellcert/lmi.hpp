#pragma once

// Data-based Lyapunov inequality for one subsystem.
//
// With X_plus = rows 1..d and X = rows 2..d+1 of the data matrix, a symmetric
// P certifies decay at rate lambda iff
//
//   P > 0   and   F(P) := lambda X^T P X - X_plus^T P X_plus > 0.
//
// F is the negated left-hand side of the selector form
// Psi^T [I 0; 0 I]^T diag(P, -lambda P) [I 0; 0 I] Psi < 0.
// Feasibility is decided by maximizing the margin
//
//   m(P) = min(lambda_min(P), lambda_min(F(P)) / s),   s = max(1, sigma_max(Psi)^2)
//
// over symmetric P with trace(P) = d.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"
#include "dwellcert/psi.hpp"

namespace dwellcert {

enum class SolverMethod {
  barrier,     // log-barrier interior point on the margin (default)
  subgradient  // projected subgradient ascent, step c0 / sqrt(k)
};

struct SolverOptions {
  int max_iterations = 20000;
  double feas_tol = 1e-8;
  double c0 = 1.0;  // subgradient step constant
  SolverMethod method = SolverMethod::barrier;
};

class LmiProblem {
 public:
  LmiProblem(PsiMatrix psi, double lambda) : psi_(std::move(psi)), lambda_(lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("LmiProblem: lambda outside ]0,1]");
    const std::size_t d = psi_.psi.cols();
    if (d == 0 || psi_.psi.rows() != d + 1) throw DimensionError("LmiProblem: data matrix must be (d+1) x d");
    x_plus_ = psi_.x_plus();
    x_ = psi_.x();
    const double smax = min_max_singular(psi_.psi).max;
    branch_scale_ = std::max(1.0, smax * smax);
  }

  const PsiMatrix& psi() const { return psi_; }
  double lambda() const { return lambda_; }
  std::size_t dimension() const { return x_.cols(); }
  const Matrix& x_plus() const { return x_plus_; }
  const Matrix& x() const { return x_; }
  // s in m(P); keeps the data-scaled branch comparable to lambda_min(P).
  double branch_scale() const { return branch_scale_; }

 private:
  PsiMatrix psi_;
  double lambda_;
  Matrix x_plus_;
  Matrix x_;
  double branch_scale_ = 1.0;
};

struct LyapunovCertificate {
  Matrix p;
  double lambda = 0.0;
  double margin_pd = 0.0;   // lambda_min(P)
  double margin_lmi = 0.0;  // lambda_min(F(P))
  int iterations_used = 0;
};

struct FeasibilityOutcome {
  std::optional<LyapunovCertificate> certificate;  // empty means infeasible
  double best_margin = 0.0;                        // m(P) of the best iterate
  int iterations = 0;

  bool feasible() const { return certificate.has_value(); }
};

// F(P) = lambda X^T P X - X_plus^T P X_plus, symmetrized.
inline Matrix lmi_value(const LmiProblem& prob, const Matrix& p) {
  const std::size_t d = prob.dimension();
  if (p.rows() != d || p.cols() != d)
    throw DimensionError("lmi_value: P must be " + std::to_string(d) + " x " + std::to_string(d));
  const Matrix& x = prob.x();
  const Matrix& xp = prob.x_plus();
  Matrix f = prob.lambda() * (x.transpose() * p * x);
  f -= xp.transpose() * p * xp;
  return symmetrized(f);
}

struct CertificateMargins {
  double margin_pd;
  double margin_lmi;
};

// Direct evaluation of both conditions; independent of how P was produced.
inline CertificateMargins verify_certificate(const LmiProblem& prob, const Matrix& p) {
  const std::size_t d = prob.dimension();
  if (p.rows() != d || p.cols() != d)
    throw DimensionError("verify_certificate: P must be " + std::to_string(d) + " x " + std::to_string(d));
  return {lambda_min(symmetrized(p)), lambda_min(lmi_value(prob, p))};
}

namespace detail {

inline double margin_of(const LmiProblem& prob, const Matrix& p) {
  const auto m = verify_certificate(prob, p);
  return std::min(m.margin_pd, m.margin_lmi / prob.branch_scale());
}

inline void require_finite_iterate(const Matrix& p, const char* method) {
  if (!p.all_finite()) throw NumericalError(std::string("solve_feasibility (") + method + "): non-finite iterate");
}

// Symmetric trace-zero basis: e_ii - e_dd for i < d-1, then e_ij + e_ji for i < j.
inline std::vector<Matrix> trace_free_basis(std::size_t d) {
  std::vector<Matrix> basis;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    Matrix e(d, d);
    e(i, i) = 1.0;
    e(d - 1, d - 1) = -1.0;
    basis.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      Matrix e(d, d);
      e(i, j) = e(j, i) = 1.0;
      basis.push_back(std::move(e));
    }
  return basis;
}

// log det via Cholesky; empty when the matrix is not positive definite.
inline std::optional<double> log_det_pd(const Matrix& m) {
  try {
    const Matrix l = cholesky(m);
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
  } catch (const NotPositiveDefiniteError&) {
    return std::nullopt;
  }
}

// trace(A B) for square A, B.
inline double trace_of_product(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += a(i, j) * b(j, i);
  return s;
}

struct Solved {
  Matrix p;
  int iterations;
};

// Maximizes eta t + log det(P - t I) + log det(F(P) - s t I) for increasing eta.
// P = I + sum y_k E_k keeps trace(P) = d exactly. The central-path gap 2d/eta
// bounds how far t is below the optimal margin.
inline Solved solve_barrier(const LmiProblem& prob, const SolverOptions& opts) {
  const std::size_t d = prob.dimension();
  const double s = prob.branch_scale();
  const std::vector<Matrix> basis = trace_free_basis(d);
  const std::size_t n = basis.size();
  const std::size_t nv = n + 1;  // y and t
  const Matrix eye = Matrix::identity(d);

  std::vector<Matrix> g1, g2;  // generators of the two barrier blocks
  for (const auto& e : basis) {
    g1.push_back(e);
    g2.push_back(lmi_value(prob, e));
  }
  g1.push_back(eye * -1.0);
  g2.push_back(eye * -s);
  const Matrix f_identity = lmi_value(prob, eye);

  Vector z(nv, 0.0);
  z[n] = std::min(1.0, lambda_min(f_identity) / s) - 1.0;

  auto blocks = [&](const Vector& v) {
    Matrix m1 = eye, m2 = f_identity;
    for (std::size_t k = 0; k < n; ++k) {
      if (v[k] == 0.0) continue;
      m1 += basis[k] * v[k];
      m2 += g2[k] * v[k];
    }
    m1 -= eye * v[n];
    m2 -= eye * (s * v[n]);
    return std::pair{std::move(m1), std::move(m2)};
  };
  auto p_of = [&](const Vector& v) {
    Matrix p = eye;
    for (std::size_t k = 0; k < n; ++k) p += basis[k] * v[k];
    return p;
  };

  const double nu = 2.0 * static_cast<double>(d);
  const double feas_tol = opts.feas_tol;
  double eta = 1.0;
  int iterations = 0;
  Matrix best_p = eye;
  double best_margin = margin_of(prob, eye);

  while (iterations < opts.max_iterations) {
    // Centering.
    for (int inner = 0; inner < 200 && iterations < opts.max_iterations; ++inner) {
      const auto [m1, m2] = blocks(z);
      const Matrix inv1 = spd_inverse(m1), inv2 = spd_inverse(m2);
      std::vector<Matrix> a1, a2;
      a1.reserve(nv);
      a2.reserve(nv);
      for (std::size_t k = 0; k < nv; ++k) {
        a1.push_back(inv1 * g1[k]);
        a2.push_back(inv2 * g2[k]);
      }
      Vector grad(nv);
      Matrix neg_hess(nv, nv);
      for (std::size_t k = 0; k < nv; ++k) {
        grad[k] = a1[k].trace() + a2[k].trace();
        for (std::size_t l = k; l < nv; ++l) {
          const double h = trace_of_product(a1[k], a1[l]) + trace_of_product(a2[k], a2[l]);
          neg_hess(k, l) = neg_hess(l, k) = h;
        }
      }
      grad[n] += eta;
      Vector step;
      try {
        step = cholesky_solve(cholesky(neg_hess), grad);
      } catch (const NotPositiveDefiniteError&) {
        try {
          step = lu_solve(neg_hess, grad);
        } catch (const SingularMatrixError&) {
          break;
        }
      }
      ++iterations;
      const double decrement = dot(grad, step);
      if (!std::isfinite(decrement)) throw NumericalError("solve_feasibility (barrier): non-finite Newton step");
      if (decrement < 2e-9) break;

      const double f0 = eta * z[n] + *log_det_pd(m1) + *log_det_pd(m2);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        Vector trial(nv);
        for (std::size_t k = 0; k < nv; ++k) trial[k] = z[k] + alpha * step[k];
        const auto [t1, t2] = blocks(trial);
        const auto l1 = log_det_pd(t1);
        if (!l1) continue;
        const auto l2 = log_det_pd(t2);
        if (!l2) continue;
        if (eta * trial[n] + *l1 + *l2 >= f0 + 0.25 * alpha * decrement) {
          z = std::move(trial);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }

    const Matrix p = p_of(z);
    require_finite_iterate(p, "barrier");
    const double m = margin_of(prob, p);
    if (m > best_margin) {
      best_margin = m;
      best_p = p;
    }
    const double gap = nu / eta;
    if (z[n] + gap <= feas_tol) break;              // optimum provably below the threshold
    if (z[n] > feas_tol && gap < 1e-3 * z[n]) break;  // margin known to 0.1%
    if (gap < 1e-13) break;
    eta *= 8.0;
  }
  return {std::move(best_p), iterations};
}

// Ascent along the minimizing branch's subgradient, projected onto trace(P) = d.
inline Solved solve_subgradient(const LmiProblem& prob, const SolverOptions& opts) {
  const std::size_t d = prob.dimension();
  const double s = prob.branch_scale();
  const double lambda = prob.lambda();
  const Matrix& x = prob.x();
  const Matrix& xp = prob.x_plus();
  Matrix p = Matrix::identity(d);
  Matrix best_p = p;
  double best_margin = -std::numeric_limits<double>::infinity();
  int k = 1;
  for (; k <= opts.max_iterations; ++k) {
    const SymEigResult ep = sym_eig(p);
    const SymEigResult ef = sym_eig(lmi_value(prob, p));
    const double pd_branch = ep.eigenvalues.front();
    const double lmi_branch = ef.eigenvalues.front() / s;
    const double m = std::min(pd_branch, lmi_branch);
    if (m > best_margin) {
      best_margin = m;
      best_p = p;
    }
    Matrix g;
    if (pd_branch <= lmi_branch) {
      const Vector v = ep.eigenvectors.col(0);
      g = outer(v, v);
    } else {
      const Vector v = ef.eigenvectors.col(0);
      const Vector xv = x * v, xpv = xp * v;
      g = (lambda * outer(xv, xv) - outer(xpv, xpv)) * (1.0 / s);
    }
    p += symmetrized(g) * (opts.c0 / std::sqrt(static_cast<double>(k)));
    const double shift = (p.trace() - static_cast<double>(d)) / static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) p(i, i) -= shift;
    require_finite_iterate(p, "subgradient");
  }
  return {std::move(best_p), k - 1};
}

}  // namespace detail

// Decides strict feasibility of the data LMI at the problem's rate. The
// verdict and the returned margins come from a fresh eigen-evaluation of the
// solver's best iterate.
inline FeasibilityOutcome solve_feasibility(const LmiProblem& prob, const SolverOptions& opts = {}) {
  if (opts.max_iterations < 1) throw DomainError("solve_feasibility: max_iterations must be >= 1");
  if (!(opts.feas_tol > 0.0)) throw DomainError("solve_feasibility: feas_tol must be > 0");
  detail::Solved solved = opts.method == SolverMethod::barrier ? detail::solve_barrier(prob, opts)
                                                               : detail::solve_subgradient(prob, opts);
  // Remove rounding drift from the normalization.
  solved.p = symmetrized(solved.p) * (static_cast<double>(prob.dimension()) / solved.p.trace());
  detail::require_finite_iterate(solved.p, "final");

  const CertificateMargins margins = verify_certificate(prob, solved.p);
  FeasibilityOutcome out;
  out.best_margin = std::min(margins.margin_pd, margins.margin_lmi / prob.branch_scale());
  out.iterations = solved.iterations;
  if (out.best_margin > opts.feas_tol)
    out.certificate = LyapunovCertificate{solved.p, prob.lambda(), margins.margin_pd, margins.margin_lmi,
                                          solved.iterations};
  return out;
}

}  // namespace dwellcert
