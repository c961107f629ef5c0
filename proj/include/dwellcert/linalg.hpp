#pragma once

// Dense kernels for the small matrices this library works with (d <= ~20).
// Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dwellcert/error.hpp"

namespace dwellcert {

using Vector = std::vector<double>;

// Row-major dense matrix with finite entries.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Builds from nested rows; all rows must have equal length.
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw DimensionError("Matrix: ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.data_.begin() + r * m.cols_);
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Vector row(std::size_t r) const {
    return Vector(data_.begin() + r * cols_, data_.begin() + (r + 1) * cols_);
  }
  Vector col(std::size_t c) const {
    Vector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
  }
  std::vector<Vector> to_rows() const {
    std::vector<Vector> out;
    out.reserve(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out.push_back(row(r));
    return out;
  }

  // Rows [first, first + count) as a new matrix.
  Matrix row_block(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw DimensionError("Matrix::row_block out of range");
    Matrix m(count, cols_);
    std::copy(data_.begin() + first * cols_, data_.begin() + (first + count) * cols_,
              m.data_.begin());
    return m;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    same_shape(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    same_shape(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionError("Matrix product: inner dimensions differ");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  friend Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols_ != x.size()) throw DimensionError("Matrix-vector product: size mismatch");
    Vector y(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }
  friend Vector operator*(const Matrix& a, const Vector& x) {
    return a * std::span<const double>(x);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void same_shape(const Matrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string("Matrix ") + op + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline Matrix outer(std::span<const double> a, std::span<const double> b) {
  Matrix m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
  return m;
}

// x^T M x
inline double quadratic_form(const Matrix& m, std::span<const double> x) {
  return dot(x, m * x);
}

// (M + M^T) / 2
inline Matrix symmetrized(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("symmetrized: matrix is not square");
  Matrix s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

// Largest |M_ij - M_ji| relative to ||M||_F (zero for the zero matrix).
inline double relative_asymmetry(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("relative_asymmetry: matrix is not square");
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
  const double n = m.frobenius_norm();
  return n == 0.0 ? 0.0 : worst / n;
}

namespace detail {

inline constexpr double kNormFloor = 1e-14;

inline void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) throw NumericalError(std::string(op) + ": non-finite matrix entry");
}

inline void require_finite(std::span<const double> v, const char* op) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericalError(std::string(op) + ": non-finite vector entry");
}

}  // namespace detail

struct SymEigResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // column k pairs with eigenvalues[k]
};

inline constexpr int kJacobiMaxSweeps = 100;

// Cyclic Jacobi eigensolver for symmetric matrices. The input is symmetrized
// first; sweeps stop once every off-diagonal entry is below 1e-12 ||M||_F.
inline SymEigResult sym_eig(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("sym_eig: matrix is not square");
  detail::require_finite(m, "sym_eig");
  const std::size_t n = m.rows();
  Matrix a = symmetrized(m);
  Matrix v = Matrix::identity(n);
  const double threshold = 1e-12 * std::max(a.frobenius_norm(), detail::kNormFloor);

  auto off_max = [&] {
    double w = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) w = std::max(w, std::abs(a(p, q)));
    return w;
  };

  int sweep = 0;
  for (; sweep < kJacobiMaxSweeps && off_max() >= threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < threshold * 1e-3) continue;
        // Rotation angle from the symmetric Schur decomposition of the (p,q) block.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  const double residual = off_max();
  if (residual >= threshold)
    throw NumericalError("sym_eig: Jacobi did not converge in " + std::to_string(kJacobiMaxSweeps) +
                             " sweeps",
                         residual);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });

  SymEigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
  }
  return out;
}

inline double lambda_min(const Matrix& m) { return sym_eig(m).eigenvalues.front(); }
inline double lambda_max(const Matrix& m) { return sym_eig(m).eigenvalues.back(); }

// Lower-triangular L with L L^T = M. A non-positive pivot means M is not
// positive definite; callers use the exception as the definiteness test.
inline Matrix cholesky(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("cholesky: matrix is not square");
  detail::require_finite(m, "cholesky");
  const std::size_t n = m.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = m(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0))
      throw NotPositiveDefiniteError("cholesky: non-positive pivot " + std::to_string(diag) +
                                     " at column " + std::to_string(j));
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

inline bool is_positive_definite(const Matrix& m) {
  try {
    (void)cholesky(m);
    return true;
  } catch (const NotPositiveDefiniteError&) {
    return false;
  }
}

// Solves L y = b for lower-triangular L.
inline Vector forward_substitute(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= l(i, k) * y[k];
    y[i] /= l(i, i);
  }
  return y;
}

// Solves L L^T x = b given the Cholesky factor L.
inline Vector cholesky_solve(const Matrix& l, std::span<const double> b) {
  Vector x = forward_substitute(l, b);
  for (std::size_t i = l.rows(); i-- > 0;) {
    for (std::size_t j = i + 1; j < l.rows(); ++j) x[i] -= l(j, i) * x[j];
    x[i] /= l(i, i);
  }
  return x;
}

// L^{-1} for lower-triangular L.
inline Matrix lower_inverse(const Matrix& l) {
  const std::size_t n = l.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    std::fill(e.begin(), e.end(), 0.0);
    e[c] = 1.0;
    const Vector col = forward_substitute(l, e);
    for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
  }
  return inv;
}

// M^{-1} for symmetric positive definite M, via Cholesky.
inline Matrix spd_inverse(const Matrix& m) {
  const Matrix li = lower_inverse(cholesky(m));
  return li.transpose() * li;
}

// Gaussian elimination with partial pivoting.
inline Vector lu_solve(const Matrix& a, std::span<const double> b) {
  if (!a.is_square()) throw DimensionError("lu_solve: matrix is not square");
  if (b.size() != a.rows()) throw DimensionError("lu_solve: right-hand side has wrong length");
  detail::require_finite(a, "lu_solve");
  detail::require_finite(b, "lu_solve");
  const std::size_t n = a.rows();
  const double tiny = 1e-13 * std::max(a.frobenius_norm(), detail::kNormFloor);
  Matrix lu = a;
  Vector x(b.begin(), b.end());
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    if (std::abs(lu(piv, k)) < tiny)
      throw SingularMatrixError("lu_solve: pivot below 1e-13 ||A||_F at column " + std::to_string(k));
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
      std::swap(x[k], x[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = x[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu(i, j) * x[j];
    x[i] = s / lu(i, i);
  }
  return x;
}

struct SingularValueRange {
  double min;
  double max;
};

// Extreme singular values from the eigenvalues of M^T M.
inline SingularValueRange min_max_singular(const Matrix& m) {
  if (m.rows() < m.cols()) throw DimensionError("min_max_singular: expects rows >= cols");
  const Vector ev = sym_eig(m.transpose() * m).eigenvalues;
  return {std::sqrt(std::max(ev.front(), 0.0)), std::sqrt(std::max(ev.back(), 0.0))};
}

struct SteinResult {
  bool feasible = false;
  std::optional<Matrix> p;
};

// Model-based ground truth for decay at rate lambda: solves
// (A/sqrt(l))^T P (A/sqrt(l)) - P = -I through the d^2 x d^2 vectorized
// system and accepts iff P is positive definite. A feasible P satisfies
// A^T P A - l P = -l I. Never used on the data path.
inline SteinResult stein_feasibility_oracle(const Matrix& a, double lambda) {
  if (!a.is_square()) throw DimensionError("stein_feasibility_oracle: A is not square");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("stein_feasibility_oracle: lambda outside ]0,1]");
  const std::size_t d = a.rows();
  const Matrix bt = a.transpose() * (1.0 / std::sqrt(lambda));
  // Row-major vec: vec(B^T P B) = (B^T kron B^T) vec(P).
  Matrix k(d * d, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < d; ++q) k(i * d + p, j * d + q) = bt(i, j) * bt(p, q);
  for (std::size_t i = 0; i < d * d; ++i) k(i, i) -= 1.0;
  Vector rhs(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) rhs[i * d + i] = -1.0;

  Vector sol;
  try {
    sol = lu_solve(k, rhs);
  } catch (const SingularMatrixError&) {
    return {};
  }
  Matrix p(d, d);
  std::copy(sol.begin(), sol.end(), p.data().begin());
  p = symmetrized(p);
  if (!is_positive_definite(p)) return {};
  return {true, std::move(p)};
}

}  // namespace dwellcert
