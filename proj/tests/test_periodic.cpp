#include <doctest.h>

#include <cmath>

#include "achopf/dynamics.hpp"
#include "achopf/periodic.hpp"

using namespace achopf;

namespace {

const Truncation kT{6, 6};
constexpr int kM = 6;

struct Setup {
  CriticalPoint inc, ac;
  PeriodicSystem sys;
  Setup()
      : inc(find_inc_critical(Params{}, kT)),
        ac(find_ac_critical(Params{}, 0.025, kT, inc)),
        sys(ac, inc.a, kM) {}
};

const Setup& setup() {
  static const Setup s;
  return s;
}

const PeriodicSystem& sys() { return setup().sys; }

// u_+ placed on harmonic m of the critical mode.
PeriodicField on_harmonic(int m, const ModeVector& v) {
  PeriodicField u = sys().zero();
  u.at(m).modes[sys().critical_index()].coeffs = v.coeffs;
  return u;
}

PeriodicField scaled(cplx s, PeriodicField u) {
  for (auto& h : u.harm) h *= s;
  return u;
}

}  // namespace

TEST_CASE("brackets of the kernel functions") {
  const ProjectionReport zp = projections(sys().z_plus(), sys());
  CHECK(std::abs(zp.bracket_plus - 1.0) <= 1e-12);
  CHECK(std::abs(zp.bracket_minus) <= 1e-12);
  const ProjectionReport zm = projections(sys().z_minus(), sys());
  CHECK(std::abs(zm.bracket_minus - 1.0) <= 1e-12);
  CHECK(std::abs(zm.bracket_plus) <= 1e-12);
  CHECK(sys().norm_eps(zp.Q_part) <= 1e-12 * sys().norm_eps(sys().z_plus()));
}

TEST_CASE("real fields have conjugate brackets; high harmonics have none") {
  const PeriodicField u = periodic_probe(sys(), 3, 3);
  CHECK(u.is_real(1e-12));
  PeriodicField v = u + scaled(cplx(0.3, 0), sys().z_plus()) + scaled(cplx(0.3, 0), sys().z_minus());
  const ProjectionReport r = projections(v, sys());
  CHECK(std::abs(r.bracket_plus - std::conj(r.bracket_minus)) <= 1e-12);
  CHECK(std::abs(r.bracket_plus - 0.3) <= 1e-12);

  const PeriodicField h = on_harmonic(2, setup().ac.u_plus) + on_harmonic(-3, setup().ac.u_minus);
  const ProjectionReport rh = projections(h, sys());
  CHECK(std::abs(rh.bracket_plus) == 0);
  CHECK(std::abs(rh.bracket_minus) == 0);
}

TEST_CASE("projection is idempotent and commutes with d/dt") {
  PeriodicField u = periodic_probe(sys(), 5, 2) + scaled(cplx(1, 2), sys().z_plus()) + scaled(cplx(1, -2), sys().z_minus());
  const ProjectionReport r = projections(u, sys());
  const ProjectionReport rr = projections(r.P_part, sys());
  CHECK(sys().norm_eps(rr.P_part - r.P_part) <= 1e-12 * sys().norm_eps(r.P_part));
  const PeriodicField a = projections(sys().dt(u), sys()).P_part;
  const PeriodicField b = sys().dt(r.P_part);
  CHECK(sys().norm_eps(a - b) <= 1e-12 * sys().norm_eps(b));
  CHECK(sys().norm_eps(r.P_part + r.Q_part - u) <= 1e-14 * sys().norm_eps(u));
}

TEST_CASE("kernel functions solve B z = 0") {
  CHECK(kernel_residual(sys()) <= 1e-12);
}

TEST_CASE("solve on Q Y_a: residual, representation, round trip") {
  const PeriodicField F = periodic_probe(sys(), 11, 2);
  const PeriodicSolve s = solve_Beps(F, sys());
  CHECK(s.residual <= 1e-10);
  CHECK(s.rep_discrepancy <= 1e-8);
  CHECK(s.ratio_Y_X > 0);
  CHECK(s.ratio_literal > 0);
  const PeriodicField v = periodic_probe(sys(), 12, 3);
  const PeriodicSolve back = solve_Beps(sys().apply_B(v), sys());
  CHECK(sys().norm_eps(back.u - v) <= 1e-9 * sys().norm_eps(v));
  // Solutions stay in Q Y_a and real data gives real solutions.
  const ProjectionReport r = projections(s.u, sys());
  CHECK(std::abs(r.bracket_plus) <= 1e-12 * sys().norm_eps(s.u));
  CHECK(s.u.is_real(1e-10));
}

TEST_CASE("solvability condition is enforced") {
  const PeriodicField F = periodic_probe(sys(), 11, 2);
  CHECK_THROWS_WITH_AS(solve_Beps(F + scaled(1e-6, sys().z_plus()), sys()),
                       doctest::Contains("solvability"), InvalidInput);
  CHECK_NOTHROW(solve_Beps(F + scaled(1e-14, sys().z_plus()), sys()));
}

TEST_CASE("incompatible fields are rejected") {
  PeriodicField F = periodic_probe(sys(), 1, 2);
  F.a *= 1.01;
  CHECK_THROWS_AS(solve_Beps(F, sys()), InvalidInput);
  PeriodicField G = periodic_probe(sys(), 1, 2);
  G.eps = 0.1;
  CHECK_THROWS_AS(solve_Beps(G, sys()), InvalidInput);
}

TEST_CASE("omega family") {
  const PeriodicField F = periodic_probe(sys(), 11, 2);
  const PeriodicSolve s0 = solve_Beps(F, sys());
  const PeriodicSolve w0 = solve_Beps_omega(F, 0.0, sys());
  CHECK(sys().norm_eps(s0.u - w0.u) <= 1e-12 * sys().norm_eps(s0.u));
  for (double w : {-0.25, -0.1, 0.1, 0.25}) {
    const PeriodicSolve sw = solve_Beps_omega(F, w, sys());
    CHECK(sys().norm_X(sys().apply_B(sw.u, w) - F) <= 1e-9 * sys().norm_X(F));
  }
  CHECK_THROWS_AS(solve_Beps_omega(F, 0.3, sys()), InvalidInput);
  // Only the harmonic kernel closes at omega = 0 and it opens linearly.
  const double k1 = kernel_singular_value(1e-3, sys()), k2 = kernel_singular_value(1e-2, sys());
  CHECK(kernel_singular_value(0.0, sys()) <= 1e-12);
  CHECK(k2 / k1 == doctest::Approx(10).epsilon(0.02));
  const double n0 = solution_operator_norm(0.0, sys());
  CHECK(std::isfinite(n0));
  CHECK(solution_operator_norm(0.1, sys()) <= 2 * n0);
}

TEST_CASE("resolvent: eigenfunctions, poles, and a large real shift") {
  const double ae = sys().a_eps();
  for (int k : {-2, 0, 3}) {
    const PeriodicField v = on_harmonic(1 - k, setup().ac.u_plus);
    const cplx lam(0.7, 0.2);
    const ResolventResult r = resolvent_Beps(lam, v, sys());
    const PeriodicField expect = scaled(1.0 / (lam - cplx(0, k * ae)), v);
    CHECK(sys().norm_eps(r.u - expect) <= 1e-10 * sys().norm_eps(expect));
  }
  CHECK_THROWS_AS(resolvent_Beps(cplx(0, ae), periodic_probe(sys(), 1, 2), sys()), InvalidInput);
  CHECK_THROWS_AS(resolvent_norm_Beps(cplx(0, 2 * ae) + 1e-12, sys()), InvalidInput);
  // Well away from the spectrum the resolvent is close to 1/lambda.
  const double n10 = resolvent_norm_Beps(10.0, sys());
  CHECK(n10 * 10 <= 2.0);
  CHECK(n10 * 10 >= 1.0 - 1e-12);
}

TEST_CASE("semisimple poles blow up at rate one") {
  const double ae = sys().a_eps();
  for (int k : {-1, 0, 1}) {
    const RateFit f = resolvent_blowup(cplx(0, k * ae), {1e-2, 1e-3, 1e-4, 1e-5}, sys());
    CHECK(-f.slope == doctest::Approx(1.0).epsilon(0.02));
    CHECK(f.r_squared >= 0.999);
  }
}

TEST_CASE("monodromy probe rejections and a bounded value") {
  const double r = 0.1;
  CHECK_THROWS_AS(monodromy_resolvent_probe(1.05, 0.0, r, sys()), InvalidInput);
  CHECK_THROWS_AS(monodromy_resolvent_probe(std::exp(cplx(0, 2 * M_PI / 1.1)), 0.1, r, sys()), InvalidInput);
  CHECK_THROWS_AS(monodromy_resolvent_probe(1e-12, 0.0, r, sys()), InvalidInput);
  CHECK_THROWS_AS(monodromy_resolvent_probe(2.0, 0.3, r, sys()), InvalidInput);
  const MonodromyProbe mp = monodromy_resolvent_probe(2.0, 0.0, r, sys());
  CHECK(std::isfinite(mp.inv_norm));
  CHECK(mp.inv_norm > 0);
}

TEST_CASE("fixed point: large shifts return the data; the Neumann tail rate matches") {
  const CriticalPoint& cp = setup().ac;
  const Field F = project_Q(random_field(cp.params, kT, 7), cp);
  const FixedPointResult big = fixed_point_solve(50.0, F, sys());
  double d = 0, n = 0;
  for (size_t i = 0; i < F.modes.size(); ++i) {
    d += (big.u.modes[i].coeffs - F.modes[i].coeffs).squaredNorm();
    n += F.modes[i].coeffs.squaredNorm();
  }
  CHECK(std::sqrt(d / n) <= 1e-5);
  const FixedPointResult fp = fixed_point_solve(0.0, F, sys());
  REQUIRE(fp.neumann_checked);
  CHECK(fp.neumann_ratio / fp.expected_ratio == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("incompressible periodic kernel is two-dimensional and semisimple") {
  const IncKernel k = inc_periodic_kernel(setup().inc, 4);
  CHECK(k.nullity == 2);
  CHECK(k.semisimple);
  CHECK(k.min_pairing > 1e-6);
}

TEST_CASE("JSON round trip") {
  const PeriodicField u = periodic_probe(sys(), 9, 2) + scaled(cplx(0.5, -1), sys().z_plus());
  const PeriodicField v = periodic_from_json(periodic_to_json(u));
  CHECK(v.M == u.M);
  CHECK(v.a == u.a);
  CHECK(v.eps == u.eps);
  CHECK(sys().norm_eps(v - u) == 0);
  CHECK_THROWS_AS(periodic_from_json("{\"a\": 1}"), InvalidInput);
  CHECK_THROWS_AS(periodic_from_json("not json"), InvalidInput);
}
