#include <doctest.h>

#include <cmath>

#include "achopf/criticality.hpp"

using namespace achopf;

namespace {

const CriticalPoint& inc_default() {
  static const CriticalPoint cp = find_inc_critical(Params{}, Truncation{});
  return cp;
}

const CriticalPoint& ac_default() {
  static const CriticalPoint cp = find_ac_critical(Params{}, 0.1, Truncation{}, inc_default());
  return cp;
}

}  // namespace

TEST_CASE("incompressible critical point, frozen values") {
  const CriticalPoint& cp = inc_default();
  CHECK(cp.mode_c.j == 1);
  CHECK(cp.mode_c.k == 1);
  CHECK(cp.R1c == doctest::Approx(46.469620462985).epsilon(1e-11));
  CHECK(cp.a == doctest::Approx(19.9451321242).epsilon(1e-10));
  CHECK(std::abs(cp.lambda_plus - cplx(0, cp.a)) <= 1e-9 * cp.a);
  CHECK(cp.truncation_ok);
  CHECK_FALSE(cp.degenerate);
  // Closed form on the critical mode is the same number.
  const auto th = inc_oscillatory_threshold(cp.params, cp.mode_c);
  CHECK(th.oscillatory);
  CHECK(std::sqrt(th.R1_sq) == doctest::Approx(cp.R1c).epsilon(1e-12));
  CHECK(std::sqrt(th.a_sq) == doctest::Approx(cp.a).epsilon(1e-10));
}

TEST_CASE("the critical R1 separates stable from unstable") {
  const CriticalPoint& cp = inc_default();
  Truncation t{6, 6};
  CHECK(spectral_abscissa(cp.params, 0.0, cp.R1c * (1 - 1e-3), t) < 0);
  CHECK(spectral_abscissa(cp.params, 0.0, cp.R1c * (1 + 1e-3), t) > 0);
  CHECK(std::abs(spectral_abscissa(cp.params, 0.0, cp.R1c, t)) <= 1e-9);
}

TEST_CASE("classical stationary limit") {
  Params p;
  p.R2 = 0;
  p.alpha = M_PI / std::sqrt(2.0);
  const double v = inc_stationary_threshold(p, make_mode(1, 1, p.alpha));
  CHECK(v == doctest::Approx(27 * std::pow(M_PI, 4) / 4).epsilon(1e-12));
  // Other wavenumbers sit above the minimum.
  CHECK(inc_stationary_threshold(p, make_mode(2, 1, p.alpha)) > v);
  p.alpha = 1.5;
  CHECK(inc_stationary_threshold(p, make_mode(1, 1, p.alpha)) > v);
}

TEST_CASE("no oscillatory onset without salinity") {
  Params p;
  p.R2 = 0;
  CHECK_FALSE(inc_oscillatory_threshold(p, make_mode(1, 1, p.alpha)).oscillatory);
}

TEST_CASE("compressible critical point at eps = 0.1, frozen values") {
  const CriticalPoint& cp = ac_default();
  CHECK(cp.regime == Regime::AC);
  CHECK(cp.mode_c.j == 1);
  CHECK(cp.mode_c.k == 1);
  CHECK(cp.R1c == doctest::Approx(54.2088892612).epsilon(1e-10));
  CHECK(cp.a == doctest::Approx(21.57338548).epsilon(1e-8));
  CHECK(cp.gap > 0);
  CHECK(cp.abscissa_residual <= 1e-10);
}

TEST_CASE("biorthogonal critical eigenvectors") {
  for (const CriticalPoint* cp : {&inc_default(), &ac_default()}) {
    const double e = cp->pairing_eps(), Pr = cp->params.Pr;
    CHECK(std::abs(inner_product_eps(cp->u_plus, cp->u_plus_star, e, Pr) - 1.0) <= 1e-12);
    CHECK(std::abs(inner_product_eps(cp->u_minus, cp->u_minus_star, e, Pr) - 1.0) <= 1e-12);
    CHECK(std::abs(inner_product_eps(cp->u_plus, cp->u_minus_star, e, Pr)) <= 1e-12);
    CHECK(std::abs(inner_product_eps(cp->u_minus, cp->u_plus_star, e, Pr)) <= 1e-12);
  }
}

TEST_CASE("transversality agrees with finite differences") {
  for (const CriticalPoint* cp : {&inc_default(), &ac_default()}) {
    const cplx fd = transversality_fd(*cp, 1e-4 * cp->R1c);
    CHECK(std::abs(fd - cp->transversality) <= 1e-6 * std::abs(cp->transversality));
    CHECK(cp->transversality.real() > 0);
  }
}

TEST_CASE("branch crosses the axis at R1c") {
  const CriticalPoint& cp = inc_default();
  const auto br = eigenpair_branch(cp, {-0.5, -0.1, 0.0, 0.1, 0.5});
  REQUIRE(br.size() == 5u);
  CHECK(br[0].real() < br[1].real());
  CHECK(br[1].real() < 0);
  CHECK(std::abs(br[2].real()) <= 1e-9);
  CHECK(br[3].real() > 0);
  CHECK(br[4].real() > br[3].real());
}

TEST_CASE("compressible preconditions") {
  CHECK_THROWS_AS(find_ac_critical(Params{}, 0.3, Truncation{4, 4}, inc_default()), InvalidInput);
  CHECK_THROWS_AS(find_ac_critical(Params{}, -0.1, Truncation{4, 4}, inc_default()), InvalidInput);
}

TEST_CASE("salinity window") {
  Params p;
  const SalinityWindow w = salinity_window(p, Truncation{4, 4}, 200, 100);
  CHECK(w.found);
  CHECK(w.R2_lower < p.R2);
  CHECK(w.R2_upper >= p.R2);
}
