#include <doctest.h>

#include <algorithm>
#include <random>

#include "achopf/blockops.hpp"
#include "achopf/smalleig.hpp"

using namespace achopf;

namespace {

CMat random_matrix(std::mt19937_64& rng, int n, double scale = 1) {
  std::normal_distribution<double> N;
  CMat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = scale * cplx(N(rng), N(rng));
  return A;
}

// Greedy nearest matching; returns the worst distance relative to max(1, |z|).
double match(std::vector<cplx> a, std::vector<cplx> b) {
  double worst = 0;
  for (const cplx& z : a) {
    auto it = std::min_element(b.begin(), b.end(),
                               [&](cplx x, cplx y) { return std::abs(x - z) < std::abs(y - z); });
    worst = std::max(worst, std::abs(*it - z) / std::max(1.0, std::abs(z)));
    b.erase(it);
  }
  return worst;
}

}  // namespace

TEST_CASE("eigenvalues agree with characteristic-polynomial roots") {
  std::mt19937_64 rng(42);
  double worst = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 4;
    const CMat A = random_matrix(rng, n);
    worst = std::max(worst, match(eig_dense(A).values, char_poly_roots(A)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("pairs are certified and ordered") {
  std::mt19937_64 rng(5);
  const CMat A = random_matrix(rng, 6, 3.0);
  const Spectrum s = eig_dense(A);
  REQUIRE(s.size() == 6);
  for (int i = 0; i < s.size(); ++i) {
    CHECK((A * s.right[i] - s.values[i] * s.right[i]).norm() <= 1e-11 * A.norm());
    CHECK((s.left[i].adjoint() * A - s.values[i] * s.left[i].adjoint()).norm() <= 1e-11 * A.norm());
    CHECK(std::abs(s.dual(i).dot(s.right[i]) - 1.0) <= 1e-12);
    if (i > 0) CHECK(s.values[i - 1].real() >= s.values[i].real());
  }
  CHECK(s.nearest(s.values[3] + cplx(1e-9, 0)) == 3);
}

TEST_CASE("diagonal and triangular inputs") {
  CMat D = CMat::Zero(3, 3);
  D(0, 0) = 2.0;
  D(1, 1) = cplx(-1, 4);
  D(2, 2) = cplx(-1, -4);
  const Spectrum s = eig_dense(D);
  CHECK(s.values[0] == cplx(2, 0));
  CHECK(s.values[1] == cplx(-1, 4));  // Im descending on ties
  CHECK(s.values[2] == cplx(-1, -4));
}

TEST_CASE("Jordan block has infinite condition") {
  CMat J = CMat::Zero(2, 2);
  J(0, 0) = J(1, 1) = 0.5;
  J(0, 1) = 1.0;
  const Spectrum s = eig_dense(J);
  REQUIRE(s.size() == 2);
  CHECK(std::abs(s.values[0] - 0.5) <= 1e-7);
  CHECK(s.condition[0] == kDefectiveCondition);
}

TEST_CASE("identity has a triple root") {
  const CMat I = CMat::Identity(3, 3);
  for (const cplx& z : char_poly_roots(I)) CHECK(std::abs(z - 1.0) <= 1e-4);
  for (const cplx& z : eigenvalues(I)) CHECK(std::abs(z - 1.0) <= 1e-12);
}

TEST_CASE("Faddeev-LeVerrier coefficients") {
  CMat A(2, 2);
  A << 1, 2, 3, 4;
  const auto c = char_poly_coeffs(A);
  REQUIRE(c.size() == 3u);
  CHECK(std::abs(c[2] - 1.0) == 0);
  CHECK(std::abs(c[1] + 5.0) <= 1e-14);
  CHECK(std::abs(c[0] + 2.0) <= 1e-14);
}

TEST_CASE("block exponential matches Taylor and is a semigroup") {
  std::mt19937_64 rng(9);
  const CMat A = random_matrix(rng, 5, 0.7);
  RVec s = RVec::Ones(5);
  s[0] = 10;
  const BlockExp E(A, s);
  const CMat ref = expm_taylor(0.8 * A);
  CHECK((E.matrix(0.8) - ref).norm() <= 1e-11 * ref.norm());
  CHECK((E.matrix(0.3) * E.matrix(0.5) - ref).norm() <= 1e-11 * ref.norm());
  CHECK((E.matrix(0.0) - CMat::Identity(5, 5)).norm() <= 1e-13);
}

TEST_CASE("frame solve and singular values") {
  std::mt19937_64 rng(2);
  const CMat A = random_matrix(rng, 4);
  RVec s(4);
  s << 1e-3, 1, 1, 1e3;
  const CVec b = CVec::Ones(4);
  const CVec x = solve_in_frame(A, s, b);
  CHECK((A * x - b).norm() <= 1e-9 * A.norm() * x.norm());
  const CMat S = s.cast<cplx>().asDiagonal();
  const Eigen::JacobiSVD<CMat> svd(S * A * S.inverse());
  CHECK(min_singular(A, s) == doctest::Approx(svd.singularValues().minCoeff()).epsilon(1e-10));
  CHECK(frame_opnorm(A, s, s) == doctest::Approx(svd.singularValues().maxCoeff()).epsilon(1e-10));
}
