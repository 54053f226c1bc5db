#include <doctest.h>

#include <random>

#include "achopf/model.hpp"

using namespace achopf;

namespace {

Params random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0, 1);
  Params p;
  p.Pr = 1.1 + 9 * U(rng);
  p.d = 0.05 + 0.9 * U(rng);
  p.R2 = 100 * U(rng);
  p.alpha = 0.5 + 3 * U(rng);
  return p;
}

// max |(D M - M*^H D)_ij| relative to max(1, |D M|_ij), D = weight * basis norm.
double adjoint_defect(const ModeMatrix& A, const ModeMatrix& S, const Params& p, double eps) {
  RVec w = weight_diagonal(A.mode, A.comps, p, eps);
  const ModeVector mv = make_mode_vector(A.mode, A.comps, p.alpha);
  for (int c = 0; c < w.size(); ++c) w[c] *= mv.basis_norms[c];
  const CMat D = w.cast<cplx>().asDiagonal();
  const CMat DM = D * A.entries;
  const CMat E = DM - S.entries.adjoint() * D;
  double worst = 0;
  for (int i = 0; i < E.rows(); ++i)
    for (int j = 0; j < E.cols(); ++j)
      worst = std::max(worst, std::abs(E(i, j)) / std::max(1.0, std::abs(DM(i, j))));
  return worst;
}

}  // namespace

TEST_CASE("mode classification and truncation order") {
  const double al = 1.3;
  CHECK(make_mode(2, 3, al).kind == ModeKind::Full);
  CHECK(make_mode(2, 3, al).dim() == 5);
  CHECK(make_mode(2, 0, al).kind == ModeKind::Acoustic);
  CHECK(make_mode(2, 0, al).dim() == 2);
  CHECK(make_mode(0, 4, al).kind == ModeKind::Scalar);
  CHECK(make_mode(0, 0, al).kind == ModeKind::Null);
  CHECK(make_mode(2, 3, al).mu == doctest::Approx(al * al * 4 + 9 * M_PI * M_PI));
  CHECK_THROWS_AS(make_mode(-1, 0, al), InvalidInput);

  Truncation t{3, 2};
  const auto ms = truncated_modes(al, t);
  REQUIRE(ms.size() == 11u);
  CHECK(ms.front().j == 0);
  CHECK(ms.front().k == 1);
  for (size_t i = 1; i < ms.size(); ++i)
    CHECK((ms[i - 1].j < ms[i].j || (ms[i - 1].j == ms[i].j && ms[i - 1].k < ms[i].k)));
}

TEST_CASE("assemble preconditions") {
  Params p;
  CHECK_THROWS_AS(assemble(make_mode(0, 0, p.alpha), Operator::INC, p, 50), InvalidInput);
  CHECK_THROWS_AS(assemble(make_mode(1, 1, p.alpha), Operator::AC, p, 50), InvalidInput);
  CHECK_THROWS_AS(assemble(make_mode(1, 1, p.alpha), Operator::AC, p, 50, 0.0), InvalidInput);
  Params bad = p;
  bad.Pr = -1;
  CHECK_THROWS_AS(assemble(make_mode(1, 1, p.alpha), Operator::INC, bad, 50), InvalidInput);
  const auto A = assemble(make_mode(1, 1, p.alpha), Operator::AC, p, 50, 0.1);
  CHECK(A.entries.rows() == 5);
  CHECK(A.entries.cols() == 5);
}

TEST_CASE("weighted adjoint identity on random parameters") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> J(0, 6);
  std::uniform_real_distribution<double> U(0, 1);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Params p = random_params(rng);
    int j = J(rng), k = J(rng);
    if (j == 0 && k == 0) k = 1;
    const Mode m = make_mode(j, k, p.alpha);
    const double R1 = 200 * U(rng);
    const double eps = 0.001 + 0.3 * U(rng);
    worst = std::max(worst, adjoint_defect(assemble(m, Operator::AC, p, R1, eps),
                                           assemble(m, Operator::ACAdjoint, p, R1, eps), p, eps));
    if (m.kind != ModeKind::Acoustic)
      worst = std::max(worst, adjoint_defect(assemble(m, Operator::INC, p, R1),
                                             assemble(m, Operator::INCAdjoint, p, R1), p, 0.0));
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("K is the R1 derivative of the generator") {
  Params p;
  const Mode m = make_mode(2, 1, p.alpha);
  const double eps = 0.07;
  const CMat d = assemble(m, Operator::AC, p, 60, eps).entries - assemble(m, Operator::AC, p, 50, eps).entries;
  const CMat K = assemble(m, Operator::KAC, p, 0, eps).entries;
  CHECK((d / 10.0 - K).norm() <= 1e-12 * (1 + K.norm()));
  const CMat di = assemble(m, Operator::INC, p, 60).entries - assemble(m, Operator::INC, p, 50).entries;
  const CMat Ki = assemble(m, Operator::KINC, p, 0).entries;
  CHECK((di / 10.0 - Ki).norm() <= 1e-12 * (1 + Ki.norm()));
}

TEST_CASE("inner product is Hermitian and positive") {
  Params p;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  const Mode m = make_mode(1, 2, p.alpha);
  for (double eps : {0.0, 0.05, 0.2}) {
    ModeVector u = make_mode_vector(m, p.alpha), v = make_mode_vector(m, p.alpha);
    for (int c = 0; c < u.coeffs.size(); ++c) {
      u.coeffs[c] = cplx(N(rng), N(rng));
      v.coeffs[c] = cplx(N(rng), N(rng));
    }
    const cplx uv = inner_product_eps(u, v, eps, p.Pr), vu = inner_product_eps(v, u, eps, p.Pr);
    CHECK(std::abs(uv - std::conj(vu)) <= 1e-13 * std::abs(uv));
    const cplx uu = inner_product_eps(u, u, eps, p.Pr);
    CHECK(uu.real() > 0);
    CHECK(std::abs(uu.imag()) <= 1e-14 * uu.real());
    CHECK(norms(u, eps, p).n_eps == doctest::Approx(std::sqrt(uu.real())).epsilon(1e-12));
  }
}

TEST_CASE("field arithmetic") {
  Params p;
  Truncation t{3, 3};
  Field u = zero_field(p.alpha, t), v = zero_field(p.alpha, t);
  u.at(1, 1).set(Component::Theta, cplx(1, 2));
  v.at(1, 1).set(Component::Theta, cplx(-3, 0.5));
  v.at(2, 0).set(Component::Phi, 4.0);
  const Field w = (u + v) - v;
  for (size_t i = 0; i < w.modes.size(); ++i) CHECK((w.modes[i].coeffs - u.modes[i].coeffs).norm() == 0);
  CHECK((cplx(2) * u).at(1, 1).get(Component::Theta) == cplx(2, 4));
  CHECK(u.conj().at(1, 1).get(Component::Theta) == cplx(1, -2));
  CHECK_THROWS(u.at(9, 9));
}

TEST_CASE("nondimensionalization") {
  PhysicalParams ph{1e-6, 1.4e-7, 1.4e-9, 2e-4, 8e-4, 9.81, 0.05, 20, 10, 35, 34, 1.0};
  const Nondimensional nd = nondimensionalize(ph);
  CHECK(nd.params.Pr == doctest::Approx(1e-6 / 1.4e-7));
  CHECK(nd.params.d == doctest::Approx(0.01));
  CHECK(nd.params.alpha == doctest::Approx(0.05));
  CHECK(nd.R1 == doctest::Approx(std::sqrt(2e-4 * 9.81 * 1.25e-4 * 10 / (1.4e-7 * 1e-6))));
  ph.T1 = 30;
  CHECK_THROWS_AS(nondimensionalize(ph), InvalidInput);
}
