#pragma once

#include <optional>
#include <vector>

#include "achopf/model.hpp"
#include "achopf/rates.hpp"
#include "achopf/smalleig.hpp"

namespace achopf {

enum class Regime { INC, AC };

struct OscillatoryThreshold {
  double R1_sq = 0;
  double a_sq = 0;
  bool oscillatory = false;  // a_sq > 0
};

OscillatoryThreshold inc_oscillatory_threshold(const Params& p, const Mode& m);
double inc_stationary_threshold(const Params& p, const Mode& m);

struct CriticalPoint {
  Regime regime = Regime::INC;
  double eps = 0;  // 0 for the incompressible regime
  Params params;
  Truncation trunc;
  double R1c = 0;
  double a = 0;
  Mode mode_c;
  cplx lambda_plus;
  // Five-component vectors; for the incompressible regime phi and w1 are
  // reconstructed from the divergence-free relation and the w1 momentum row.
  ModeVector u_plus, u_minus, u_plus_star, u_minus_star;
  // Incompressible regime only: (w2, theta, psi) vectors.
  std::optional<ModeVector> red_plus, red_plus_star;
  // d lambda_+ / d R1 at criticality, i.e. (K u+, u+*) with K = dM/dR1.
  cplx transversality;
  double gap = 0;              // min -Re over the rest of the truncated spectrum
  double discarded_bound = 0;  // estimated abscissa over modes beyond the truncation
  bool truncation_ok = true;
  double abscissa_residual = 0;
  int iterations = 0;
  bool degenerate = false;
  std::vector<Mode> tied_modes;

  // Weight parameter for the pairing that makes (u_j, u_k*) = delta_jk.
  double pairing_eps() const { return regime == Regime::INC ? 0.0 : eps; }
};

struct CriticalityOptions {
  double tol = 1e-12;
  double eps_max = 0.2;
};

CriticalPoint find_inc_critical(const Params& p, const Truncation& t = {});
CriticalPoint find_ac_critical(const Params& p, double eps, const Truncation& t,
                               const CriticalPoint& inc, const CriticalityOptions& opt = {});

// Generator block on the critical mode at a given R1 (AC or INC).
CMat critical_block(const CriticalPoint& cp, double R1);
// Largest real part over every retained block, compressible when eps > 0.
double spectral_abscissa(const Params& p, double eps, double R1, const Truncation& t);

// Centered-difference estimate of d lambda_+/d R1 at R1c.
cplx transversality_fd(const CriticalPoint& cp, double h);

// Nearest-eigenvalue continuation of lambda_+ along R1c + eta.
std::vector<cplx> eigenpair_branch(const CriticalPoint& cp, const std::vector<double>& eta_grid);

struct ConvergenceStudy {
  CriticalPoint inc;
  std::vector<double> eps_grid;
  std::vector<CriticalPoint> ac;
  std::vector<double> err_R1c, err_a, err_uplus, err_uplus_star, err_proj, proj_norm;
  RateFit fit_R1c, fit_a, fit_uplus, fit_uplus_star, fit_proj;
};

ConvergenceStudy eps_convergence_study(const Params& p, const std::vector<double>& eps_grid,
                                       const Truncation& t = {});

// Fluid-norm sqrt((u,u)_0).
double fluid_norm(const ModeVector& u, double Pr);

struct SalinityWindow {
  double R2_lower = 0;
  double R2_upper = 0;
  bool found = false;
  bool contiguous = true;  // scan saw a single run of admissible R2
};

// Range of R2 in [0, R2_max] on which oscillatory onset preempts steady onset.
SalinityWindow salinity_window(const Params& p, const Truncation& t, double R2_max, int scan = 200);

}  // namespace achopf
