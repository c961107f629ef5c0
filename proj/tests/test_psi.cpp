#include <catch_amalgamated.hpp>

#include <random>

#include "fixtures.hpp"

using namespace dwellcert;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("build_q examples", "[psi]") {
  const SubsystemDataset ds = fixtures::reference_dataset();
  const Vector q = build_q(ds.subsystems[0].trace, 0);
  CHECK(q == Vector{-0.2250353, -0.3776165, 0.5511093, -0.9545606, 0.4685422, 0.0824293});

  const Trace small{{{1.0, 0.0}, {0.5, 1.0}}};
  CHECK(build_q(small, 0) == Vector{0.5, 1.0, 0.0});
  CHECK_THROWS_AS(build_q(small, 1), IndexError);
  CHECK_THROWS_AS(build_q(ds.subsystems[0].trace, 5), IndexError);
}

TEST_CASE("build_psi examples", "[psi]") {
  const SubsystemDataset ds = fixtures::reference_dataset();
  CHECK(build_psi(ds.subsystems[0].trace, 0) == fixtures::kReferencePsi1);

  const Trace zero{std::vector<Vector>(4, Vector(3, 0.0))};
  CHECK(build_psi(zero, 0) == Matrix(4, 3));

  CHECK(build_psi(fixtures::nilpotent_trace(), 0) == Matrix{{0, 0}, {1, 0}, {0, 1}});

  CHECK_THROWS_AS(build_psi(ds.subsystems[0].trace, 1), IndexError);
  CHECK_THROWS_AS(build_psi(fixtures::nilpotent_trace(), 1), IndexError);
}

TEST_CASE("find_psi examples", "[psi]") {
  const SubsystemDataset ds = fixtures::reference_dataset();
  const PsiMatrix p1 = find_psi(ds.subsystems[0].trace, 1e-8);
  CHECK(p1.t_offset == 0);
  CHECK(p1.psi == fixtures::kReferencePsi1);
  CHECK(p1.x_plus() == fixtures::kReferencePsi1.row_block(0, 5));
  CHECK(p1.x() == fixtures::kReferencePsi1.row_block(1, 5));
  CHECK(p1.sigma_ratio > 1e-8);

  // x(0) along the direction (2,1) which the first step doubles, so q(0) and
  // q(1) are parallel; the jump to (0,8) makes q(1), q(2) independent.
  const Trace late{{{2, 1}, {4, 2}, {8, 4}, {0, 8}}};
  const PsiMatrix p2 = find_psi(late, 1e-8);
  CHECK(p2.t_offset == 1);
  CHECK(p2.psi == Matrix{{8, 0}, {4, 8}, {2, 4}});

  const Trace zero{std::vector<Vector>(6, Vector(2, 0.0))};
  try {
    (void)find_psi(zero, 1e-8);
    FAIL("expected AssumptionViolatedError");
  } catch (const AssumptionViolatedError& e) {
    CHECK(e.best_ratio() == 0.0);
    CHECK(e.best_offset() == 0);
  }

  const Trace parallel{{{2, 1}, {4, 2}, {8, 4}}};
  try {
    (void)find_psi(parallel, 1e-8);
    FAIL("expected AssumptionViolatedError");
  } catch (const AssumptionViolatedError& e) {
    CHECK(e.best_ratio() < 1e-8);
    CHECK_THAT(std::string(e.what()), ContainsSubstring("independent"));
  }
}

TEST_CASE("find_psi tolerance domain", "[psi]") {
  CHECK_THROWS_AS(find_psi(fixtures::nilpotent_trace(), 0.0), DomainError);
  CHECK_THROWS_AS(find_psi(fixtures::nilpotent_trace(), 1.0), DomainError);
}

TEST_CASE("first column of Psi is q", "[psi][property]") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 50; ++k) {
    const std::size_t d = 1 + k % 5;
    const Matrix states = fixtures::random_matrix(d + 4, d, rng);
    const Trace tr{states.to_rows()};
    for (std::size_t t = 0; t + d <= tr.last_index(); ++t) REQUIRE(build_psi(tr, t).col(0) == build_q(tr, t));
  }
}

TEST_CASE("find_psi returns the minimal valid offset", "[psi][property]") {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 200; ++k) {
    const std::size_t d = 1 + k % 5;
    Matrix states = fixtures::random_matrix(d + 5, d, rng);
    // Blank a random prefix so that early offsets are rank deficient.
    const std::size_t blank = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 4)(rng));
    for (std::size_t t = 0; t < blank; ++t)
      for (std::size_t c = 0; c < d; ++c) states(t, c) = 0.0;
    const Trace tr{states.to_rows()};

    std::optional<std::size_t> expected;
    for (std::size_t t = 0; t + d <= tr.last_index() && !expected; ++t) {
      const auto sv = min_max_singular(build_psi(tr, t));
      if (sv.max > 0.0 && sv.min / sv.max > 1e-8) expected = t;
    }
    if (expected) {
      REQUIRE(find_psi(tr, 1e-8).t_offset == *expected);
    } else {
      REQUIRE_THROWS_AS(find_psi(tr, 1e-8), AssumptionViolatedError);
    }
  }
}

TEST_CASE("shift structure holds on companion data", "[psi][property]") {
  Rng rng(33);
  for (int k = 0; k < 40; ++k) {
    const std::size_t d = 2 + k % 4;
    std::vector<SubsystemModel> models{random_schur_companion(d, rng), random_schur_companion(d, rng)};
    const SubsystemDataset ds = generate_dataset(models, d + 3, rng, 1e-8);
    for (const auto& s : ds.subsystems) {
      for (std::size_t t = 0; t + d <= s.trace.last_index(); ++t) {
        const Matrix psi = build_psi(s.trace, t);
        for (std::size_t c = 0; c + 1 < d; ++c)
          for (std::size_t r = 0; r < d; ++r) REQUIRE(psi(r, c) == psi(r + 1, c + 1));
      }
    }
  }
}

TEST_CASE("reference traces all admit a data matrix at offset 0", "[psi]") {
  const SubsystemDataset ds = fixtures::reference_dataset();
  const auto psis = build_all_psi(ds, 1e-8);
  REQUIRE(psis.size() == 5);
  for (const auto& p : psis) CHECK(p.t_offset == 0);
}
