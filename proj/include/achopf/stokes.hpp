#pragma once

#include <cstdint>
#include <vector>

#include "achopf/model.hpp"

namespace achopf {

// One Fourier mode of div v = f, -Lap v + grad p = g.
struct StokesSolution {
  Mode mode;
  cplx p_hat, v1_hat, v2_hat;
  double residual = 0;  // max equation residual relative to the data size
  double r1 = 0;        // (|p| + |grad v|) / (|f| + |g|_{H^-1})
  double r2 = 0;        // (|grad p| + |Lap v|) / (|grad f| + |g|)
};

// Solves a v1 + b v2 = f, mu v1 - a p = g1, mu v2 - b p = g2 on a full mode.
// Norms are per-mode: H^-1 carries mu^{-1/2}, H^1 (homogeneous) carries mu^{1/2}.
StokesSolution solve_stokes_mode(const Mode& m, cplx f_hat, cplx g1_hat, cplx g2_hat);

struct StokesSweep {
  int n_max = 0;
  int count = 0;
  double max_residual = 0;
  double max_r1 = 0, max_r2 = 0;
  double min_r1 = 0, min_r2 = 0;
  double pure_pressure_v = 0;  // |v| for g = -grad c, f = 0 (should vanish)
  double pure_pressure_p = 0;  // |p - c| for the same data
  double solenoidal_p = 0;     // |p| for f = 0, g divergence-free
  double zero_data = 0;        // |solution| for zero data
};

// Random data on every full mode with 1 <= j, k <= n_max, plus the
// structural examples on each mode.
StokesSweep stokes_sweep(double alpha, int n_max, std::uint64_t seed);

}  // namespace achopf
