#pragma once

// Stacked data vectors and the (d+1) x d data matrix built from one trace.
//
// q(t) = (x^(1)(t+1), x^(1)(t), ..., x^(d)(t)) and the data matrix at offset T
// has columns q(T), q(T+1), ..., q(T+d-1). Its first d rows hold successor
// states and its last d rows hold the states themselves.

#include <cstddef>
#include <sstream>
#include <string>

#include "dwellcert/data.hpp"
#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"

namespace dwellcert {

inline constexpr double kDefaultIndependenceTol = 1e-8;

struct PsiMatrix {
  Matrix psi;               // (d+1) x d
  std::size_t t_offset = 0;
  double sigma_ratio = 0.0;  // sigma_min / sigma_max

  std::size_t dimension() const { return psi.cols(); }
  // Rows 1..d: successor states.
  Matrix x_plus() const { return psi.row_block(0, psi.cols()); }
  // Rows 2..d+1: current states.
  Matrix x() const { return psi.row_block(1, psi.cols()); }
};

inline Vector build_q(const Trace& trace, std::size_t t) {
  if (trace.states.size() < 2 || t > trace.last_index() - 1)
    throw IndexError("build_q: t = " + std::to_string(t) + " outside 0..L-1 (L = " +
                     std::to_string(trace.last_index()) + ")");
  const Vector& now = trace.states[t];
  Vector q;
  q.reserve(now.size() + 1);
  q.push_back(trace.states[t + 1].front());
  q.insert(q.end(), now.begin(), now.end());
  return q;
}

inline Matrix build_psi(const Trace& trace, std::size_t t) {
  const std::size_t d = trace.dimension();
  if (d == 0 || trace.states.size() < 2 || t + d > trace.last_index())
    throw IndexError("build_psi: offset " + std::to_string(t) + " needs states up to x(" + std::to_string(t + d) +
                     ") but the trace ends at x(" + std::to_string(trace.last_index()) + ")");
  Matrix psi(d + 1, d);
  for (std::size_t c = 0; c < d; ++c) {
    const Vector q = build_q(trace, t + c);
    for (std::size_t r = 0; r <= d; ++r) psi(r, c) = q[r];
  }
  return psi;
}

namespace detail {

inline constexpr double kUnderflowNorm = 1e-300;

inline double independence_ratio(const Matrix& psi) {
  if (psi.frobenius_norm() < kUnderflowNorm) return 0.0;
  const auto sv = min_max_singular(psi);
  return sv.max < kUnderflowNorm ? 0.0 : sv.min / sv.max;
}

}  // namespace detail

// Smallest offset T in 0..L-d whose data matrix has sigma_min/sigma_max > tol.
inline PsiMatrix find_psi(const Trace& trace, double tol = kDefaultIndependenceTol) {
  if (!(tol > 0.0 && tol < 1.0)) throw DomainError("find_psi: tolerance must lie in ]0,1[");
  const std::size_t d = trace.dimension();
  if (d == 0 || trace.last_index() < d)
    throw IndexError("find_psi: trace has " + std::to_string(trace.states.size()) + " states, needs at least d+1 = " +
                     std::to_string(d + 1));
  double best_ratio = -1.0;
  std::size_t best_t = 0;
  for (std::size_t t = 0; t + d <= trace.last_index(); ++t) {
    Matrix psi = build_psi(trace, t);
    const double ratio = detail::independence_ratio(psi);
    if (ratio > tol) return {std::move(psi), t, ratio};
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best_t = t;
    }
  }
  std::ostringstream msg;
  msg << "no offset T in 0.." << trace.last_index() - d << " gives linearly independent data columns (best "
      << "sigma ratio " << best_ratio << " at T = " << best_t << ", tolerance " << tol << ")";
  throw AssumptionViolatedError(msg.str(), best_ratio, static_cast<int>(best_t));
}

}  // namespace dwellcert
