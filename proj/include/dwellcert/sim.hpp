#pragma once

// Ground-truth side: companion-form subsystem models, trace generation,
// dwell-time-constrained switching and Monte Carlo convergence checks.
// Nothing in psi/lmi/dwell reads a model; models live in their own document:
//
//   { "dimension": d, "models": [ { "id": i, "coefficients": [a0, ..., a_{d-1}] } ] }

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dwellcert/data.hpp"
#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"
#include "dwellcert/psi.hpp"

namespace dwellcert {

using Rng = std::mt19937_64;

inline constexpr double kMinLeadingCoefficient = 1e-12;

struct SubsystemModel {
  Vector coefficients;  // a0 .. a_{d-1}
  Matrix matrix;        // first row (-a_{d-1}, ..., -a1, -a0), ones on the subdiagonal

  std::size_t dimension() const { return coefficients.size(); }
};

// Companion matrix of x^d + a_{d-1} x^{d-1} + ... + a0. A vanishing a0 makes
// the matrix singular and is rejected unless allow_singular is set.
inline SubsystemModel companion_from_coeffs(const Vector& coeffs, bool allow_singular = false) {
  const std::size_t d = coeffs.size();
  if (d == 0) throw DimensionError("companion_from_coeffs: need at least one coefficient");
  detail::require_finite(coeffs, "companion_from_coeffs");
  if (!allow_singular && std::abs(coeffs.front()) < kMinLeadingCoefficient)
    throw ValidationError("companion_from_coeffs: |a0| < 1e-12 gives a rank-deficient matrix");
  Matrix a(d, d);
  for (std::size_t c = 0; c < d; ++c) a(0, c) = -coeffs[d - 1 - c];
  for (std::size_t r = 1; r < d; ++r) a(r, r - 1) = 1.0;
  return {coeffs, std::move(a)};
}

inline Vector uniform_vector(std::size_t d, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector v(d);
  for (double& x : v) x = unit(rng);
  return v;
}

inline constexpr int kMaxModelRejections = 10000;

// Rejection-samples coefficients uniform in [-1,1]^d until the Stein oracle
// accepts the companion matrix at rate 1 - 1e-9.
inline SubsystemModel random_schur_companion(std::size_t d, Rng& rng) {
  if (d == 0) throw DimensionError("random_schur_companion: d must be >= 1");
  for (int attempt = 0; attempt < kMaxModelRejections; ++attempt) {
    const Vector coeffs = uniform_vector(d, rng);
    if (std::abs(coeffs.front()) < kMinLeadingCoefficient) continue;
    SubsystemModel m = companion_from_coeffs(coeffs);
    if (stein_feasibility_oracle(m.matrix, 1.0 - 1e-9).feasible) return m;
  }
  throw GenerationError("random_schur_companion: " + std::to_string(kMaxModelRejections) +
                        " consecutive samples were not Schur stable");
}

inline Trace simulate_subsystem(const SubsystemModel& model, const Vector& x0, std::size_t steps) {
  if (x0.size() != model.dimension()) throw DimensionError("simulate_subsystem: x0 has the wrong dimension");
  Trace tr;
  tr.states.reserve(steps + 1);
  tr.states.push_back(x0);
  for (std::size_t t = 0; t < steps; ++t) tr.states.push_back(model.matrix * tr.states.back());
  return tr;
}

inline constexpr int kMaxInitialStateRetries = 1000;

// One trace of length L per model. Initial states are redrawn until the
// trace yields an independent data matrix at the given tolerance.
inline SubsystemDataset generate_dataset(const std::vector<SubsystemModel>& models, std::size_t length, Rng& rng,
                                         double tol = kDefaultIndependenceTol) {
  if (models.empty()) throw DomainError("generate_dataset: no models");
  const std::size_t d = models.front().dimension();
  if (length < d) throw ValidationError("generate_dataset: trace length L = " + std::to_string(length) +
                                        " is below the dimension d = " + std::to_string(d));
  SubsystemDataset ds;
  ds.dimension = d;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].dimension() != d) throw DimensionError("generate_dataset: models differ in dimension");
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxInitialStateRetries && !accepted; ++attempt) {
      Trace tr = simulate_subsystem(models[i], uniform_vector(d, rng), length);
      try {
        (void)find_psi(tr, tol);
      } catch (const AssumptionViolatedError&) {
        continue;
      }
      ds.subsystems.push_back({static_cast<int>(i) + 1, std::move(tr)});
      accepted = true;
    }
    if (!accepted)
      throw GenerationError("generate_dataset: subsystem " + std::to_string(i + 1) + ": no initial state out of " +
                            std::to_string(kMaxInitialStateRetries) + " gave independent data columns");
  }
  return ds;
}

// Traces from given initial states (no retries). Fails if a trace does not
// yield an independent data matrix.
inline SubsystemDataset dataset_from_initial_states(const std::vector<SubsystemModel>& models,
                                                    const std::vector<Vector>& initial_states, std::size_t length,
                                                    double tol = kDefaultIndependenceTol) {
  if (models.empty() || initial_states.size() != models.size())
    throw DimensionError("dataset_from_initial_states: need one initial state per model");
  const std::size_t d = models.front().dimension();
  if (length < d) throw ValidationError("dataset_from_initial_states: trace length L = " + std::to_string(length) +
                                        " is below the dimension d = " + std::to_string(d));
  SubsystemDataset ds;
  ds.dimension = d;
  for (std::size_t i = 0; i < models.size(); ++i) {
    Trace tr = simulate_subsystem(models[i], initial_states[i], length);
    try {
      (void)find_psi(tr, tol);
    } catch (const AssumptionViolatedError& e) {
      throw GenerationError("subsystem " + std::to_string(i + 1) + ": " + e.what());
    }
    ds.subsystems.push_back({static_cast<int>(i) + 1, std::move(tr)});
  }
  validate(ds);
  return ds;
}

// Piecewise-constant mode sequence. Modes are 0-based indices into the model list.
struct SwitchingSignal {
  std::vector<std::size_t> switching_instants;  // starts at 0, strictly increasing
  std::vector<std::size_t> modes;               // mode on [instants[m], instants[m+1])
  std::size_t horizon = 0;

  std::size_t mode_at(std::size_t t) const {
    const auto it = std::upper_bound(switching_instants.begin(), switching_instants.end(), t);
    return modes[static_cast<std::size_t>(it - switching_instants.begin()) - 1];
  }

  // Every completed interval lasts at least tau; the last one may be cut by the horizon.
  bool respects_dwell(std::size_t tau) const {
    for (std::size_t m = 0; m + 1 < switching_instants.size(); ++m)
      if (switching_instants[m + 1] - switching_instants[m] < tau) return false;
    for (std::size_t m = 0; m + 1 < modes.size(); ++m)
      if (modes[m] == modes[m + 1]) return false;
    return !switching_instants.empty() && switching_instants.front() == 0;
  }
};

// Dwell durations uniform on {tau, ..., 2 tau}; the next mode is uniform over
// the other modes.
inline SwitchingSignal random_dwell_signal(std::size_t num_modes, std::size_t tau, std::size_t horizon, Rng& rng) {
  if (num_modes < 1) throw DomainError("random_dwell_signal: need at least one mode");
  if (tau < 1) throw DomainError("random_dwell_signal: tau must be >= 1");
  SwitchingSignal sig;
  sig.horizon = horizon;
  std::uniform_int_distribution<std::size_t> first(0, num_modes - 1);
  std::uniform_int_distribution<std::size_t> dwell(tau, 2 * tau);
  sig.switching_instants.push_back(0);
  sig.modes.push_back(first(rng));
  if (num_modes == 1) return sig;
  std::uniform_int_distribution<std::size_t> other(1, num_modes - 1);
  std::size_t t = dwell(rng);
  while (t < horizon) {
    sig.switching_instants.push_back(t);
    sig.modes.push_back((sig.modes.back() + other(rng)) % num_modes);
    t += dwell(rng);
  }
  return sig;
}

struct SwitchedTrajectory {
  std::vector<Vector> states;  // x(0..horizon)
  Vector norms;                // ||x(t)||
};

inline SwitchedTrajectory simulate_switched(const std::vector<SubsystemModel>& models, const SwitchingSignal& signal,
                                            const Vector& x0, std::size_t horizon) {
  if (models.empty()) throw DomainError("simulate_switched: no models");
  if (x0.size() != models.front().dimension()) throw DimensionError("simulate_switched: x0 has the wrong dimension");
  if (signal.switching_instants.empty()) throw DomainError("simulate_switched: empty switching signal");
  for (std::size_t m : signal.modes)
    if (m >= models.size()) throw DomainError("simulate_switched: signal refers to an unknown mode");
  SwitchedTrajectory out;
  out.states.reserve(horizon + 1);
  out.states.push_back(x0);
  out.norms.push_back(norm2(x0));
  for (std::size_t t = 0; t < horizon; ++t) {
    out.states.push_back(models[signal.mode_at(t)].matrix * out.states.back());
    out.norms.push_back(norm2(out.states.back()));
  }
  return out;
}

inline constexpr double kGasThreshold = 1e-6;

struct MonteCarloReport {
  std::size_t runs = 0;
  std::size_t passed = 0;
  std::size_t tau = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  double threshold = kGasThreshold;
  double worst_final_ratio = 0.0;  // max over runs of ||x(horizon)|| / max(1, ||x(0)||)
  std::vector<Vector> norms;       // per run, ||x(0..horizon)||
  std::vector<bool> run_passed;

  bool all_passed() const { return passed == runs; }
};

// Generator for run k, independent of the order in which runs execute.
inline Rng run_stream(std::uint64_t seed, std::size_t run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(static_cast<std::uint64_t>(run) >> 32)};
  return Rng(seq);
}

// Each run draws x(0) uniform in [-1,1]^d and a fresh dwell-constrained
// signal; it passes iff ||x(horizon)|| <= 1e-6 max(1, ||x(0)||).
inline MonteCarloReport monte_carlo_gas(const std::vector<SubsystemModel>& models, std::size_t tau, std::size_t runs,
                                        std::size_t horizon, std::uint64_t seed) {
  if (runs < 1) throw DomainError("monte_carlo_gas: runs must be >= 1");
  if (tau < 1) throw DomainError("monte_carlo_gas: tau must be >= 1");
  if (models.empty()) throw DomainError("monte_carlo_gas: no models");
  MonteCarloReport rep;
  rep.runs = runs;
  rep.tau = tau;
  rep.horizon = horizon;
  rep.seed = seed;
  const std::size_t d = models.front().dimension();
  for (std::size_t k = 0; k < runs; ++k) {
    Rng rng = run_stream(seed, k);
    const Vector x0 = uniform_vector(d, rng);
    const SwitchingSignal sig = random_dwell_signal(models.size(), tau, horizon, rng);
    SwitchedTrajectory traj = simulate_switched(models, sig, x0, horizon);
    const double ratio = traj.norms.back() / std::max(1.0, traj.norms.front());
    const bool ok = ratio <= rep.threshold;
    rep.worst_final_ratio = std::max(rep.worst_final_ratio, ratio);
    rep.passed += ok ? 1 : 0;
    rep.run_passed.push_back(ok);
    rep.norms.push_back(std::move(traj.norms));
  }
  return rep;
}

inline std::string serialize_report_summary(const MonteCarloReport& rep) {
  Json doc;
  doc["runs"] = rep.runs;
  doc["passed"] = rep.passed;
  doc["failed"] = rep.runs - rep.passed;
  doc["tau"] = rep.tau;
  doc["horizon"] = rep.horizon;
  doc["seed"] = rep.seed;
  doc["threshold"] = rep.threshold;
  doc["worst_final_ratio"] = rep.worst_final_ratio;
  Json failed = Json::array();
  for (std::size_t k = 0; k < rep.run_passed.size(); ++k)
    if (!rep.run_passed[k]) failed.push_back(k);
  doc["failed_runs"] = std::move(failed);
  return doc.dump(2) + "\n";
}

// Columns run,t,norm; one row per run and time step.
inline std::string serialize_norms_csv(const MonteCarloReport& rep) {
  std::string out = "run,t,norm\n";
  char buf[64];
  for (std::size_t k = 0; k < rep.norms.size(); ++k)
    for (std::size_t t = 0; t < rep.norms[k].size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", k, t, rep.norms[k][t]);
      out += buf;
    }
  return out;
}

inline std::string serialize_models(const std::vector<SubsystemModel>& models) {
  if (models.empty()) throw DomainError("serialize_models: no models");
  Json doc;
  doc["dimension"] = models.front().dimension();
  Json arr = Json::array();
  for (std::size_t i = 0; i < models.size(); ++i)
    arr.push_back({{"id", i + 1}, {"coefficients", models[i].coefficients}});
  doc["models"] = std::move(arr);
  return doc.dump(2) + "\n";
}

inline std::vector<SubsystemModel> parse_models(std::string_view text) {
  const Json doc = detail::parse_json(text, "models");
  const long long d = detail::as_integer(detail::require(doc, "dimension", "models"), "models", "dimension");
  if (d < 1) throw ValidationError("models: field 'dimension' must be >= 1");
  const Json& arr = detail::require(doc, "models", "models");
  if (!arr.is_array() || arr.empty()) throw ParseError("models: field 'models' must be a non-empty array");
  std::vector<SubsystemModel> models;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string ctx = "models[" + std::to_string(k) + "]";
    const long long id = detail::as_integer(detail::require(arr[k], "id", ctx), ctx, "id");
    const std::string who = "model " + std::to_string(id);
    if (id != static_cast<long long>(k) + 1) throw ValidationError(who + ": field 'id' out of sequence");
    Vector coeffs = detail::as_vector(detail::require(arr[k], "coefficients", who), who, "coefficients");
    if (coeffs.size() != static_cast<std::size_t>(d))
      throw ValidationError(who + ": field 'coefficients' has " + std::to_string(coeffs.size()) +
                            " entries, dimension is " + std::to_string(d));
    try {
      models.push_back(companion_from_coeffs(coeffs));
    } catch (const ValidationError& e) {
      throw ValidationError(who + ": " + e.what());
    }
  }
  return models;
}

}  // namespace dwellcert
