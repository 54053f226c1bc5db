#include <doctest.h>

#include <cmath>

#include "achopf/dynamics.hpp"
#include "achopf/spectral_survey.hpp"

using namespace achopf;

namespace {

const Truncation kT{8, 8};

const CriticalPoint& inc8() {
  static const CriticalPoint cp = find_inc_critical(Params{}, kT);
  return cp;
}

const CriticalPoint& ac8() {
  static const CriticalPoint cp = find_ac_critical(Params{}, 0.05, kT, inc8());
  return cp;
}

}  // namespace

TEST_CASE("gap is the salinity decay rate of the (0,1) mode") {
  const Params p;
  const double expected = p.d * M_PI * M_PI;
  const GapReport g0 = spectral_gap(p, 0.0, inc8().R1c, kT, &inc8());
  CHECK(g0.kappa1 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(g0.witness_mode.j == 0);
  CHECK(g0.witness_mode.k == 1);
  CHECK(g0.excluded == 2);

  const GapReport g = spectral_gap(p, 0.05, ac8().R1c, kT, &ac8());
  CHECK(g.kappa1 == doctest::Approx(expected).epsilon(1e-12));
  CHECK(g.witness_mode.j == 0);
  CHECK(g.witness_mode.k == 1);
  CHECK(g.excluded == 2);
}

TEST_CASE("gap refuses an unstable configuration") {
  const Params p;
  CHECK_THROWS_AS(spectral_gap(p, 0.05, ac8().R1c * 1.2, kT, &ac8()), NumericalFailure);
}

TEST_CASE("Poincare constant and X norm") {
  Params p;
  CHECK(poincare_constant(p, kT) == doctest::Approx(p.alpha));  // smallest symbol is alpha^2 on (1,0)
  Field F = zero_field(p.alpha, Truncation{2, 2});
  F.at(0, 1).set(Component::Theta, 1.0);
  // ||theta||^2 over the cell: (2 pi / alpha) * 1/2.
  const double l2 = std::sqrt(2 * M_PI / p.alpha * 0.5);
  CHECK(norm_eps_X(F, 0.1, p.Pr) == doctest::Approx(l2).epsilon(1e-14));
  Field G = zero_field(p.alpha, Truncation{2, 2});
  G.at(1, 1).set(Component::Phi, 1.0);
  const double b2 = 2 * M_PI / p.alpha * 0.25, mu = make_mode(1, 1, p.alpha).mu;
  const double e = 0.1;
  CHECK(norm_eps_X(G, e, p.Pr) == doctest::Approx(std::sqrt(e * e * b2 + e * e * e * e * mu * b2)).epsilon(1e-14));
}

TEST_CASE("high-frequency probes stay bounded") {
  const Params p;
  const CriticalPoint& cp = ac8();
  const double kappa = 0.5 * spectral_gap(p, cp.eps, cp.R1c, kT, &cp).kappa1;
  const auto grid = highfreq_gamma_grid(p, cp.eps, cp.R1c, kT, cp.a, 9);
  REQUIRE(grid.size() >= 9u);
  const Field F = random_field(p, kT, 17);
  const auto probes = resolvent_probe_highfreq(p, cp.eps, cp.R1c, kT, kappa, grid, F);
  for (const auto& pr : probes) {
    CHECK_FALSE(pr.singular);
    CHECK(pr.bound_ratio > 0);
    CHECK(pr.bound_ratio <= highfreq_operator_norm(p, cp.eps, cp.R1c, kT, kappa, pr.gamma) * (1 + 1e-10));
  }
}

TEST_CASE("projection removes the near-resonant blow-up") {
  const CriticalPoint& cp = ac8();
  const Field F = unit_probe_field(cp.params, kT, cp.mode_c);
  const cplx near = cplx(0, cp.a) + 1e-8;
  const auto proj = resolvent_probe_lowfreq(cp, {near}, F, true);
  const auto raw = resolvent_probe_lowfreq(cp, {near}, F, false);
  REQUIRE(proj.size() == 1u);
  CHECK_FALSE(proj[0].singular);
  CHECK(proj[0].u_ratio < 1e3);
  CHECK(raw[0].u_ratio > 1e6);
  // At the pole itself only the projected problem is admissible.
  const auto at = resolvent_probe_lowfreq(cp, {cplx(0, cp.a)}, F, true);
  CHECK_FALSE(at[0].singular);
}

TEST_CASE("acoustic branch scales like 1/eps") {
  const Params p;
  const std::vector<double> eps{0.04, 0.02, 0.01, 0.005};
  const std::vector<double> R1(eps.size(), inc8().R1c);
  const AcousticFit f = acoustic_branch_fit(p, make_mode(1, 0, p.alpha), eps, R1);
  CHECK(f.fit.slope == doctest::Approx(-1).epsilon(0.05));
  for (double re : f.re) CHECK(re < 0);
}

TEST_CASE("low-frequency grid layout") {
  const auto g = lowfreq_grid(0.1, 20, 1.0);
  CHECK(g.size() == 9u);
  CHECK(g.front() == cplx(-0.5, 0));
}
