#include <doctest.h>

#include <cmath>

#include "achopf/dynamics.hpp"
#include "achopf/energy.hpp"

using namespace achopf;

namespace {

const Truncation kT{4, 4};

struct Setup {
  CriticalPoint inc, ac;
  double beta;
  Setup() : inc(find_inc_critical(Params{}, kT)), ac(find_ac_critical(Params{}, 0.05, kT, inc)), beta(ac.a / inc.a) {}
};

const Setup& setup() {
  static const Setup s;
  return s;
}

Trajectory trajectory(const Generator& g, std::uint64_t seed) {
  const Setup& s = setup();
  TimeFourierForcing F;
  F.omega = s.inc.a;
  F.harmonics[2] = random_field(s.ac.params, kT, seed + 1);
  F.harmonics[-2] = F.harmonics[2];
  const Field u0 = project_Q(random_field(s.ac.params, kT, seed), s.ac);
  return solve_ivp(g, u0, F, chebyshev_times(2 * M_PI / s.inc.a, 33));
}

}  // namespace

TEST_CASE("energy functionals on a simple field") {
  const Params p;
  Field u = zero_field(p.alpha, kT);
  CHECK(energy_functionals(u, 0.1, p, EnergyConfig{}).E == 0);
  u.at(0, 1).set(Component::Theta, 1.0);
  const EnergyValues v = energy_functionals(u, 0.1, p, EnergyConfig{});
  CHECK(v.E > 0);
  CHECK(v.D > 0);
  CHECK(v.phi_sq == 0);
  CHECK(v.coupling == 0);
}

TEST_CASE("continuity equation holds along trajectories; sampled constants sit below the state supremum") {
  const Setup& s = setup();
  const Generator g(s.ac.params, s.ac.eps, s.ac.R1c, kT, s.beta);
  const EnergyConfig ec = EnergyConfig::with_beta(s.beta);
  const Trajectory tr = trajectory(g, 31);
  const MarginReport rep = verify_energy_inequalities(tr, s.ac.params, ec);
  CHECK(rep.continuity_residual <= 1e-12);
  CHECK(rep.sandwich_lower >= 0);
  CHECK(rep.sandwich_upper >= 0);
  CHECK(rep.E1_equiv_lo > 0);
  CHECK(rep.E1_equiv_lo <= rep.E1_equiv_hi);
  CHECK_FALSE(rep.failed);
  const auto sup = state_sup_constants(g, ec);
  REQUIRE_FALSE(sup.empty());
  for (const auto& r : sup) {
    CHECK(std::isfinite(r.C_sup));
    CHECK(rep.row(r.name).C_star <= r.C_sup * (1 + 1e-9) + 1e-12);
  }
  CHECK_THROWS(rep.row("no such row"));
}

TEST_CASE("calibration only ever shrinks the absorption constants") {
  const Setup& s = setup();
  const Generator g(s.ac.params, s.ac.eps, s.ac.R1c, kT, s.beta);
  const EnergyConfig ec = EnergyConfig::with_beta(s.beta);
  const EnergyConfig cal = calibrate_energy({trajectory(g, 3), trajectory(g, 5)}, s.ac.params, ec);
  CHECK(cal.c0 <= ec.c0);
  CHECK(cal.c2 <= ec.c2);
  CHECK(cal.c3 <= ec.c3);
  const MarginReport rep = verify_energy_inequalities(trajectory(g, 3), s.ac.params, cal);
  CHECK(rep.calibration_margin >= 0);
}
