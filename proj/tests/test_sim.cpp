#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"

using namespace dwellcert;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

SubsystemModel nilpotent_model() { return companion_from_coeffs({0.0, 0.0}, true); }

}  // namespace

TEST_CASE("companion_from_coeffs examples", "[sim]") {
  CHECK(companion_from_coeffs({0.25, 0.0}).matrix == Matrix{{0, -0.25}, {1, 0}});
  CHECK(companion_from_coeffs({0.5}).matrix == Matrix{{-0.5}});

  const Vector coeffs{0.1, -0.2, 0.3};
  const Matrix a = companion_from_coeffs(coeffs).matrix;
  Vector back(3);
  for (std::size_t c = 0; c < 3; ++c) back[2 - c] = -a(0, c);
  CHECK(back == coeffs);
  CHECK(a(1, 0) == 1.0);
  CHECK(a(2, 1) == 1.0);
  CHECK(a(2, 0) == 0.0);

  CHECK_THROWS_AS(companion_from_coeffs({0.0, 0.5}), ValidationError);
  CHECK_NOTHROW(companion_from_coeffs({0.0, 0.5}, true));
  CHECK_THROWS_AS(companion_from_coeffs({}), DimensionError);
}

TEST_CASE("reference models match their published matrices", "[sim]") {
  const auto models = fixtures::reference_models();
  REQUIRE(models.size() == 5);
  CHECK(models[0].matrix(0, 0) == 0.2799379);
  CHECK(models[0].matrix(0, 4) == 0.2272202);
  CHECK(models[2].matrix(0, 0) == -0.7060622);
  CHECK(models[4].matrix(0, 4) == -0.1238403);
  CHECK(models[3].matrix(4, 3) == 1.0);
  for (const auto& m : models) CHECK(stein_feasibility_oracle(m.matrix, 1.0 - 1e-9).feasible);
}

TEST_CASE("random_schur_companion", "[sim]") {
  Rng a(61), b(61);
  CHECK(random_schur_companion(4, a).coefficients == random_schur_companion(4, b).coefficients);

  Rng rng(62);
  for (int k = 0; k < 100; ++k) {
    const SubsystemModel m = random_schur_companion(5, rng);
    REQUIRE(stein_feasibility_oracle(m.matrix, 1.0 - 1e-9).feasible);
    for (double c : m.coefficients) REQUIRE(std::abs(c) <= 1.0);
  }
  for (int k = 0; k < 100; ++k) {
    const SubsystemModel m = random_schur_companion(1, rng);
    REQUIRE(std::abs(m.coefficients[0]) < 1.0);
    REQUIRE(std::abs(m.coefficients[0]) >= 1e-12);
  }
  CHECK_THROWS_AS(random_schur_companion(0, rng), DimensionError);
}

TEST_CASE("simulate_subsystem examples", "[sim]") {
  const Trace nil = simulate_subsystem(nilpotent_model(), {1.0, 0.0}, 2);
  CHECK(nil == fixtures::nilpotent_trace());

  const auto models = fixtures::reference_models();
  const SubsystemDataset ref = fixtures::reference_dataset();
  for (std::size_t i = 0; i < 5; ++i) {
    const Trace& published = ref.subsystems[i].trace;
    const Trace sim = simulate_subsystem(models[i], published.states[0], 5);
    REQUIRE(sim.states.size() == 6);
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t c = 0; c < 5; ++c) CHECK(sim.states[t][c] == Approx(published.states[t][c]).margin(1e-6));
  }

  const Trace zero = simulate_subsystem(models[0], Vector(5, 0.0), 10);
  for (const auto& x : zero.states) CHECK(x == Vector(5, 0.0));

  CHECK_THROWS_AS(simulate_subsystem(models[0], {1.0}, 3), DimensionError);
}

TEST_CASE("generate_dataset", "[sim]") {
  const auto models = fixtures::reference_models();
  Rng rng(63);
  const SubsystemDataset ds = generate_dataset(models, 5, rng);
  REQUIRE(ds.size() == 5);
  for (const auto& s : ds.subsystems) {
    CHECK(s.trace.states.size() == 6);
    CHECK_NOTHROW(find_psi(s.trace, 1e-8));
  }

  CHECK_THROWS_AS(generate_dataset(models, 4, rng), ValidationError);
  CHECK_THROWS_AS(generate_dataset({}, 4, rng), DomainError);

  Rng r1(64), r2(64);
  CHECK(serialize_dataset(generate_dataset(models, 7, r1)) == serialize_dataset(generate_dataset(models, 7, r2)));
}

TEST_CASE("dataset_from_initial_states reproduces the reference traces", "[sim]") {
  const auto models = fixtures::reference_models();
  const SubsystemDataset ref = fixtures::reference_dataset();
  std::vector<Vector> x0s;
  for (const auto& s : ref.subsystems) x0s.push_back(s.trace.states[0]);
  const SubsystemDataset ds = dataset_from_initial_states(models, x0s, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t c = 0; c < 5; ++c)
        REQUIRE(ds.subsystems[i].trace.states[t][c] == Approx(ref.subsystems[i].trace.states[t][c]).margin(1e-6));

  CHECK_THROWS_AS(dataset_from_initial_states(models, {x0s[0]}, 5), DimensionError);
  CHECK_THROWS_AS(dataset_from_initial_states(models, x0s, 4), ValidationError);
  std::vector<Vector> zeros(5, Vector(5, 0.0));
  CHECK_THROWS_AS(dataset_from_initial_states(models, zeros, 5), GenerationError);
}

TEST_CASE("generated data always has a data matrix and the shift property", "[sim][property]") {
  Rng rng(65);
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 1 + k % 5;
    std::vector<SubsystemModel> models{random_schur_companion(d, rng), random_schur_companion(d, rng),
                                       random_schur_companion(d, rng)};
    const SubsystemDataset ds = generate_dataset(models, d + static_cast<std::size_t>(k % 4), rng);
    for (const auto& s : ds.subsystems) {
      REQUIRE_NOTHROW(find_psi(s.trace, 1e-8));
      for (std::size_t t = 0; t + 1 < s.trace.states.size(); ++t)
        for (std::size_t p = 0; p + 1 < d; ++p) REQUIRE(s.trace.states[t + 1][p + 1] == s.trace.states[t][p]);
    }
  }
}

TEST_CASE("random_dwell_signal", "[sim]") {
  Rng rng(66);
  const SwitchingSignal one = random_dwell_signal(1, 3, 100, rng);
  CHECK(one.modes.size() == 1);
  for (std::size_t t = 0; t < 100; ++t) REQUIRE(one.mode_at(t) == one.modes[0]);

  const SwitchingSignal sig = random_dwell_signal(3, 3, 100, rng);
  CHECK(sig.respects_dwell(3));
  CHECK(sig.switching_instants.front() == 0);
  for (std::size_t m = 0; m + 1 < sig.switching_instants.size(); ++m) {
    const std::size_t gap = sig.switching_instants[m + 1] - sig.switching_instants[m];
    CHECK(gap >= 3);
    CHECK(gap <= 6);
  }

  Rng a(67), b(67);
  const SwitchingSignal sa = random_dwell_signal(4, 5, 300, a);
  const SwitchingSignal sb = random_dwell_signal(4, 5, 300, b);
  CHECK(sa.switching_instants == sb.switching_instants);
  CHECK(sa.modes == sb.modes);

  CHECK_THROWS_AS(random_dwell_signal(0, 3, 100, rng), DomainError);
  CHECK_THROWS_AS(random_dwell_signal(2, 0, 100, rng), DomainError);
}

TEST_CASE("signals respect their dwell time by direct scan", "[sim][property]") {
  Rng rng(68);
  for (int k = 0; k < 500; ++k) {
    const std::size_t n = 1 + static_cast<std::size_t>(k % 5);
    const std::size_t tau = 1 + static_cast<std::size_t>(k % 13);
    const std::size_t horizon = 50 + static_cast<std::size_t>(k);
    const SwitchingSignal sig = random_dwell_signal(n, tau, horizon, rng);
    // Scan sigma(t) for switches and measure run lengths.
    std::size_t last_switch = 0;
    bool first = true;
    for (std::size_t t = 1; t < horizon; ++t) {
      if (sig.mode_at(t) == sig.mode_at(t - 1)) continue;
      if (!first) REQUIRE(t - last_switch >= tau);
      REQUIRE(t >= tau);
      first = false;
      last_switch = t;
    }
    for (std::size_t m : sig.modes) REQUIRE(m < n);
  }
}

TEST_CASE("simulate_switched examples", "[sim]") {
  const std::vector<SubsystemModel> nil{nilpotent_model()};
  Rng rng(69);
  const SwitchingSignal constant = random_dwell_signal(1, 1, 10, rng);
  const SwitchedTrajectory tr = simulate_switched(nil, constant, {0.3, -0.7}, 10);
  REQUIRE(tr.norms.size() == 11);
  for (std::size_t t = 2; t <= 10; ++t) CHECK(tr.norms[t] == 0.0);

  const auto models = fixtures::reference_models();
  const SwitchingSignal sig = random_dwell_signal(5, 2, 40, rng);
  const SwitchedTrajectory zero = simulate_switched(models, sig, Vector(5, 0.0), 40);
  for (double n : zero.norms) CHECK(n == 0.0);

  // A single-mode signal reproduces the subsystem simulation.
  const std::vector<SubsystemModel> m3{models[2]};
  const Vector x0{0.1, -0.4, 0.9, 0.2, -0.3};
  const SwitchedTrajectory sw = simulate_switched(m3, random_dwell_signal(1, 4, 30, rng), x0, 30);
  CHECK(sw.states == simulate_subsystem(models[2], x0, 30).states);

  CHECK_THROWS_AS(simulate_switched(models, sig, {1.0}, 10), DimensionError);
  SwitchingSignal bad = sig;
  bad.modes[0] = 7;
  CHECK_THROWS_AS(simulate_switched(models, bad, x0, 10), DomainError);
}

TEST_CASE("monte_carlo_gas on the reference models", "[sim]") {
  const auto models = fixtures::reference_models();
  const MonteCarloReport rep = monte_carlo_gas(models, 7, 1000, 500, 1);
  CHECK(rep.passed == 1000);
  CHECK(rep.all_passed());
  CHECK(rep.worst_final_ratio <= kGasThreshold);
  CHECK(rep.norms.size() == 1000);
  CHECK(rep.norms[0].size() == 501);

  CHECK_THROWS_AS(monte_carlo_gas(models, 0, 10, 500, 1), DomainError);
  CHECK_THROWS_AS(monte_carlo_gas(models, 7, 0, 500, 1), DomainError);

  const MonteCarloReport a = monte_carlo_gas(models, 7, 1, 100, 99);
  const MonteCarloReport b = monte_carlo_gas(models, 7, 1, 100, 99);
  CHECK(a.norms == b.norms);
  CHECK(serialize_norms_csv(a) == serialize_norms_csv(b));
  // Run k does not depend on how many runs precede or follow it.
  const MonteCarloReport c = monte_carlo_gas(models, 7, 3, 100, 99);
  CHECK(c.norms[0] == a.norms[0]);
}

TEST_CASE("monte_carlo_gas flags an unstable switching pattern", "[sim]") {
  // Each mode is stable alone (spectral radii 0.79 and 0.69) but every product
  // A2^m A1^k with k, m in {1, 2} has spectral radius above 1.3, so dwell
  // blocks of 1 or 2 steps make the state grow.
  const std::vector<SubsystemModel> pair{companion_from_coeffs({0.62, -1.0}), companion_from_coeffs({0.48, 0.97})};
  const MonteCarloReport rep = monte_carlo_gas(pair, 1, 20, 200, 3);
  CHECK(rep.runs == 20);
  CHECK(rep.passed == 0);
  CHECK_FALSE(rep.all_passed());
  CHECK(rep.worst_final_ratio > 1.0);
  const std::string summary = serialize_report_summary(rep);
  CHECK_THAT(summary, ContainsSubstring("\"runs\": 20"));
  CHECK_THAT(summary, ContainsSubstring("\"passed\": 0"));
  CHECK_THAT(summary, ContainsSubstring("\"failed_runs\": [\n    0,"));
}

TEST_CASE("per-block Lyapunov decay along switched trajectories", "[sim][property]") {
  const auto models = fixtures::reference_models();
  const DwellTimeResult r = compute_min_dwell(fixtures::reference_dataset());
  Rng rng(70);
  for (int run = 0; run < 100; ++run) {
    const SwitchingSignal sig = random_dwell_signal(5, static_cast<std::size_t>(r.tau), 200, rng);
    const Vector x0 = uniform_vector(5, rng);
    const SwitchedTrajectory tr = simulate_switched(models, sig, x0, 200);
    for (std::size_t t = 0; t < 200; ++t) {
      const Matrix& p = r.certificates[sig.mode_at(t)].p;
      const double v_now = quadratic_form(p, tr.states[t]);
      const double v_next = quadratic_form(p, tr.states[t + 1]);
      REQUIRE(v_next <= r.lambda_s * v_now + 1e-9 * std::max(v_now, 1e-300));
    }
  }
}

TEST_CASE("norms table and models documents", "[sim]") {
  MonteCarloReport rep;
  rep.norms = {{1.0, 0.5}, {0.1}};
  CHECK(serialize_norms_csv(rep) == "run,t,norm\n0,0,1\n0,1,0.5\n1,0,0.10000000000000001\n");

  const auto models = fixtures::reference_models();
  const auto again = parse_models(serialize_models(models));
  REQUIRE(again.size() == models.size());
  for (std::size_t i = 0; i < models.size(); ++i) CHECK(again[i].matrix == models[i].matrix);

  CHECK_THROWS_AS(parse_models(R"({"dimension": 2, "models": [{"id": 1, "coefficients": [0.1]}]})"), Error);
  CHECK_THROWS_AS(parse_models(R"({"dimension": 2, "models": []})"), ParseError);
  CHECK_THROWS_AS(parse_models("nope"), ParseError);
}
