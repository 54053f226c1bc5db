#include <doctest.h>

#include "achopf/stokes.hpp"

using namespace achopf;

TEST_CASE("pure pressure gradient gives zero velocity") {
  const Mode m = make_mode(2, 3, 1.7);
  const cplx c(0.3, -1.2);
  // g = -grad c on the symbol level: pressure absorbs it exactly.
  const StokesSolution s = solve_stokes_mode(m, 0.0, -m.a * c, -m.b * c);
  CHECK(std::abs(s.v1_hat) + std::abs(s.v2_hat) <= 1e-14 * std::abs(c) * m.a);
  CHECK(std::abs(s.residual) <= 1e-14);
}

TEST_CASE("solenoidal forcing gives zero pressure") {
  const Mode m = make_mode(1, 1, M_PI / std::sqrt(2.0));
  const StokesSolution s = solve_stokes_mode(m, 0.0, m.b, -m.a);
  CHECK(std::abs(s.p_hat) <= 1e-14);
  CHECK(std::abs(s.v1_hat - m.b / m.mu) <= 1e-14);
}

TEST_CASE("zero data gives zero solution and degenerate modes are rejected") {
  const Mode m = make_mode(3, 1, 2.0);
  const StokesSolution s = solve_stokes_mode(m, 0.0, 0.0, 0.0);
  CHECK(s.p_hat == cplx(0));
  CHECK(s.v1_hat == cplx(0));
  CHECK(s.v2_hat == cplx(0));
  CHECK_THROWS_AS(solve_stokes_mode(make_mode(0, 1, 2.0), 1.0, 0.0, 0.0), InvalidInput);
}

TEST_CASE("sweep: residuals small, ratios bounded by 3") {
  const StokesSweep sw = stokes_sweep(M_PI / std::sqrt(2.0), 12, 11);
  CHECK(sw.count >= 144);
  CHECK(sw.max_residual <= 1e-12);
  CHECK(sw.max_r1 <= 3.0);
  CHECK(sw.max_r2 <= 3.0);
  CHECK(sw.min_r1 > 0);
  CHECK(sw.pure_pressure_v <= 1e-12);
  CHECK(sw.pure_pressure_p <= 1e-12);
  CHECK(sw.solenoidal_p <= 1e-12);
  CHECK(sw.zero_data == 0);
}
