#include "achopf/stokes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace achopf {

StokesSolution solve_stokes_mode(const Mode& m, cplx f_hat, cplx g1_hat, cplx g2_hat) {
  if (m.kind != ModeKind::Full || !(m.mu > 0))
    throw InvalidInput("solve_stokes_mode: needs a full mode with j >= 1 and k >= 1");
  Eigen::Matrix3cd A;
  A << 0, m.a, m.b,
      -m.a, m.mu, 0,
      -m.b, 0, m.mu;
  const Eigen::Vector3cd rhs(f_hat, g1_hat, g2_hat);
  const Eigen::Vector3cd x = A.partialPivLu().solve(rhs);
  StokesSolution s;
  s.mode = m;
  s.p_hat = x[0];
  s.v1_hat = x[1];
  s.v2_hat = x[2];
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  s.residual = rhs.cwiseAbs().maxCoeff() > 0 ? (A * x - rhs).cwiseAbs().maxCoeff() / scale : x.norm();
  const double sq = std::sqrt(m.mu);
  const double v = std::hypot(std::abs(x[1]), std::abs(x[2]));
  const double g = std::hypot(std::abs(g1_hat), std::abs(g2_hat));
  const double f = std::abs(f_hat), p = std::abs(x[0]);
  const double d1 = f + g / sq, d2 = sq * f + g;
  s.r1 = d1 > 0 ? (p + sq * v) / d1 : 0;
  s.r2 = d2 > 0 ? (sq * p + m.mu * v) / d2 : 0;
  return s;
}

StokesSweep stokes_sweep(double alpha, int n_max, std::uint64_t seed) {
  if (n_max < 1) throw InvalidInput("stokes_sweep: n_max must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto draw = [&] { return cplx(nd(rng), nd(rng)); };
  StokesSweep out;
  out.n_max = n_max;
  out.min_r1 = out.min_r2 = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= n_max; ++j)
    for (int k = 1; k <= n_max; ++k) {
      const Mode m = make_mode(j, k, alpha);
      const cplx f = draw(), g1 = draw(), g2 = draw();
      const StokesSolution s = solve_stokes_mode(m, f, g1, g2);
      ++out.count;
      out.max_residual = std::max(out.max_residual, s.residual);
      out.max_r1 = std::max(out.max_r1, s.r1);
      out.max_r2 = std::max(out.max_r2, s.r2);
      out.min_r1 = std::min(out.min_r1, s.r1);
      out.min_r2 = std::min(out.min_r2, s.r2);

      const cplx c = draw();
      const StokesSolution gp = solve_stokes_mode(m, 0.0, -m.a * c, -m.b * c);
      out.pure_pressure_v = std::max(out.pure_pressure_v, std::hypot(std::abs(gp.v1_hat), std::abs(gp.v2_hat)) / std::abs(c));
      out.pure_pressure_p = std::max(out.pure_pressure_p, std::abs(gp.p_hat - c) / std::abs(c));
      out.max_residual = std::max(out.max_residual, gp.residual);

      const cplx w = draw();
      const StokesSolution sol = solve_stokes_mode(m, 0.0, m.b * w, -m.a * w);
      out.solenoidal_p = std::max(out.solenoidal_p, std::abs(sol.p_hat) / (std::abs(w) * m.mu));
      out.max_residual = std::max(out.max_residual, sol.residual);

      const StokesSolution z = solve_stokes_mode(m, 0.0, 0.0, 0.0);
      out.zero_data = std::max({out.zero_data, std::abs(z.p_hat), std::abs(z.v1_hat), std::abs(z.v2_hat)});
    }
  return out;
}

}  // namespace achopf
