#include <doctest.h>

#include <cmath>

#include "achopf/dynamics.hpp"

using namespace achopf;

namespace {

const Truncation kT{5, 5};

const CriticalPoint& inc5() {
  static const CriticalPoint cp = find_inc_critical(Params{}, kT);
  return cp;
}

const CriticalPoint& ac5() {
  static const CriticalPoint cp = find_ac_critical(Params{}, 0.05, kT, inc5());
  return cp;
}

double dist(const Field& a, const Field& b) {
  double s = 0;
  for (size_t i = 0; i < a.modes.size(); ++i) s += (a.modes[i].coeffs - b.modes[i].coeffs).squaredNorm();
  return std::sqrt(s);
}

double size(const Field& a) {
  double s = 0;
  for (const auto& mv : a.modes) s += mv.coeffs.squaredNorm();
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("Chebyshev sample times") {
  const auto t = chebyshev_times(3.0, 9);
  REQUIRE(t.size() == 9u);
  CHECK(t.front() == doctest::Approx(0.0));
  CHECK(t.back() == doctest::Approx(3.0));
  for (size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
  CHECK_THROWS_AS(chebyshev_times(1.0, 1), InvalidInput);
}

TEST_CASE("propagation is a semigroup") {
  const CriticalPoint& cp = ac5();
  const Generator g(cp.params, cp.eps, cp.R1c, kT, 1.3);
  const Field u0 = random_field(cp.params, kT, 4);
  const Field a = g.propagate(g.propagate(u0, 0.02), 0.05);
  const Field b = g.propagate(u0, 0.07);
  CHECK(dist(a, b) <= 1e-11 * size(b));
  CHECK(dist(g.propagate(u0, 0.0), u0) <= 1e-14 * size(u0));
}

TEST_CASE("Duhamel solution satisfies the equation at every sample") {
  const CriticalPoint& cp = ac5();
  const double beta = 1.1;
  const Generator g(cp.params, cp.eps, cp.R1c, kT, beta);
  const Field u0 = random_field(cp.params, kT, 8);
  TimeFourierForcing F;
  F.omega = 3.0;
  F.harmonics[1] = random_field(cp.params, kT, 9);
  F.harmonics[-1] = F.harmonics[1].conj();
  const auto times = chebyshev_times(0.5, 17);
  const Trajectory tr = solve_ivp(g, u0, F, times);
  CHECK_FALSE(tr.resonant);
  CHECK(dist(tr.states[0], u0) <= 1e-12 * size(u0));
  double worst = 0;
  for (size_t k = 0; k < times.size(); ++k) {
    const Field rhs = g.apply(tr.states[k]) + tr.forcing[k];
    worst = std::max(worst, dist(cplx(beta) * tr.rates[k], rhs) / std::max(1.0, size(rhs)));
  }
  CHECK(worst <= 1e-10);

  // Restarting from a sample reproduces the later states.
  TimeFourierForcing F2 = F;
  const double t0 = times[8];
  for (auto& [m, Fm] : F2.harmonics) Fm = std::exp(cplx(0, m * F.omega * t0)) * Fm;
  std::vector<double> rest;
  for (size_t k = 8; k < times.size(); ++k) rest.push_back(times[k] - t0);
  const Trajectory tr2 = solve_ivp(g, tr.states[8], F2, rest);
  for (size_t k = 0; k < rest.size(); ++k)
    CHECK(dist(tr2.states[k], tr.states[k + 8]) <= 1e-10 * std::max(1.0, size(tr.states[k + 8])));
}

TEST_CASE("forcing at the critical frequency is flagged resonant") {
  const CriticalPoint& cp = ac5();
  const Generator g(cp.params, cp.eps, cp.R1c, kT);
  TimeFourierForcing F;
  F.omega = cp.a;
  F.harmonics[1] = unit_probe_field(cp.params, kT, cp.mode_c);
  const Trajectory tr = solve_ivp(g, zero_field(cp.params.alpha, kT), F, {0.0, 0.1});
  CHECK(tr.resonant);
}

TEST_CASE("spectral projections") {
  const CriticalPoint& cp = ac5();
  require_normalized(cp);
  const Field u = random_field(cp.params, kT, 21);
  const Field P = project_P(u, cp), Q = project_Q(u, cp);
  CHECK(dist(P + Q, u) <= 1e-14 * size(u));
  CHECK(dist(project_P(P, cp), P) <= 1e-12 * size(P));
  CHECK(std::abs(bracket_plus(Q, cp)) <= 1e-12 * size(u));
  CHECK(std::abs(bracket_minus(Q, cp)) <= 1e-12 * size(u));
  const CMat Pm = critical_projection_matrix(cp);
  CHECK((Pm * Pm - Pm).norm() <= 1e-10 * Pm.norm());
  // P commutes with the generator on the critical block.
  const CMat A = critical_block(cp, cp.R1c);
  CHECK((A * Pm - Pm * A).norm() <= 1e-9 * A.norm());
}

TEST_CASE("Q-part decays at the gap rate") {
  const CriticalPoint& cp = ac5();
  const Generator g(cp.params, cp.eps, cp.R1c, kT);
  const Field u0 = project_Q(random_field(cp.params, kT, 5), cp);
  const DecayFit df = decay_fit(g, u0, cp.gap, 10 / cp.gap, 40);
  CHECK(df.kappa_fit / cp.gap >= 0.95);
  CHECK(df.C_fit >= 1.0 - 1e-12);
  CHECK(std::isfinite(df.C_fit));
}

TEST_CASE("oscillation integral is monotone in the horizon") {
  const CriticalPoint& cp = ac5();
  const Generator g(cp.params, cp.eps, cp.R1c, kT);
  const Field u0 = project_Q(random_field(cp.params, kT, 6), cp);
  const double a = scalar_oscillation_integral(g, u0, 0.5 * cp.gap, 2.0);
  const double b = scalar_oscillation_integral(g, u0, 0.5 * cp.gap, 4.0);
  CHECK(a > 0);
  CHECK(b >= a);
}
