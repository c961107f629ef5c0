#pragma once

// Shared test fixtures: the five-subsystem reference example (d = 5, L = 5)
// shipped in data/, its published certificates and mu table, plus random
// generators for property tests.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "dwellcert/dwellcert.hpp"

namespace fixtures {

using dwellcert::Matrix;
using dwellcert::Vector;

inline std::string data_path(const std::string& name) { return std::string(DWELLCERT_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline dwellcert::SubsystemDataset reference_dataset() {
  return dwellcert::parse_dataset(slurp(data_path("reference_dataset.json")));
}

inline std::vector<dwellcert::SubsystemModel> reference_models() {
  return dwellcert::parse_models(slurp(data_path("reference_models.json")));
}

inline dwellcert::CertificateSet published_certificates() {
  return dwellcert::parse_certificate_set(slurp(data_path("published_certificates.json")));
}

// Data matrix of subsystem 1 as printed alongside its trace.
inline const Matrix kReferencePsi1{
    {-0.2250353, 0.2295586, -0.2848105, 0.0950412, -0.0147282},
    {-0.3776165, -0.2250353, 0.2295586, -0.2848105, 0.0950412},
    {0.5511093, -0.3776165, -0.2250353, 0.2295586, -0.2848105},
    {-0.9545606, 0.5511093, -0.3776165, -0.2250353, 0.2295586},
    {0.4685422, -0.9545606, 0.5511093, -0.3776165, -0.2250353},
    {0.0824293, 0.4685422, -0.9545606, 0.5511093, -0.3776165},
};

// Published mu_ij for the published certificates, row i, column j.
inline const std::array<std::array<double, 5>, 5> kPublishedMu{{
    {1.0, 1.8655187, 3.2227957, 1.9351747, 1.6117808},
    {1.7165712, 1.0, 2.548444, 2.6037244, 1.922591},
    {6.2478964, 3.8349598, 1.0, 3.7633396, 2.3671962},
    {4.013124, 4.024821, 6.6157071, 1.0, 3.1883122},
    {6.7105711, 5.9626058, 9.4062392, 3.60176, 1.0},
}};

inline constexpr double kPublishedMu53 = 9.4062392;

// Spectral radius squared of companion subsystem 3: |-0.8014558 +- 0.2326244j|^2.
inline double reference_rho2_subsystem3() {
  return 0.8014558 * 0.8014558 + 0.2326244 * 0.2326244;
}

// Nilpotent d = 2 companion system x(t+1) = [[0,0],[1,0]] x(t) from x(0) = (1,0).
inline dwellcert::Trace nilpotent_trace() { return {{{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}}; }

inline dwellcert::PsiMatrix nilpotent_psi() { return dwellcert::find_psi(nilpotent_trace(), 1e-8); }

inline Matrix random_symmetric(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  return m;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

// Random symmetric positive definite matrix B B^T + shift I.
inline Matrix random_spd(std::size_t n, std::mt19937_64& rng, double shift = 0.1) {
  const Matrix b = random_matrix(n, n, rng);
  Matrix p = b * b.transpose();
  for (std::size_t i = 0; i < n; ++i) p(i, i) += shift;
  return dwellcert::symmetrized(p);
}

// Spectral radius squared of a companion matrix, via the power of A^k norms.
// Independent of the Stein oracle: rho^2 = lim ||A^k||_F^{2/k}, refined by a
// ratio of consecutive norms over a long run.
inline double spectral_radius_sq_estimate(const Matrix& a, int steps = 4000) {
  const std::size_t d = a.rows();
  Matrix p = Matrix::identity(d);
  double log_norm = 0.0;
  for (int k = 0; k < steps; ++k) {
    p = a * p;
    const double n = p.frobenius_norm();
    if (n == 0.0) return 0.0;
    log_norm += std::log(n);
    p *= 1.0 / n;
  }
  return std::exp(2.0 * log_norm / steps);
}

}  // namespace fixtures
