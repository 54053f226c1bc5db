#pragma once

#include <optional>
#include <vector>

#include "achopf/criticality.hpp"
#include "achopf/dynamics.hpp"
#include "achopf/model.hpp"
#include "achopf/rates.hpp"

namespace achopf {

struct ModeSpectrum {
  Mode mode;
  std::vector<cplx> values;
  std::vector<bool> excluded;  // matched to the critical pair
};

struct GapReport {
  double eps = 0;  // 0: incompressible truncation
  double R1 = 0;
  double kappa1 = 0;
  Mode witness_mode;
  cplx witness_lambda;
  std::optional<double> acoustic_abscissa;  // max Re over |Im| >= 1/(2 eps)
  int excluded = 0;
  std::vector<ModeSpectrum> table;
};

// Minimum of -Re over every retained eigenvalue except the critical pair,
// which is removed by eigenvector overlap (>= 0.99 with u_+ or u_-) when cp is
// given. Throws NumericalFailure if anything else has Re > 0 or if more than
// two eigenvalues match.
GapReport spectral_gap(const Params& p, double eps, double R1, const Truncation& t,
                       const CriticalPoint* cp = nullptr);

// sqrt of the smallest Laplacian symbol over retained modes.
double poincare_constant(const Params& p, const Truncation& t);

// |||F|||_{eps,X}^2 = eps^2 ||f||^2 + eps^4 ||grad f||^2 + ||F_fluid||_2^2.
double norm_eps_X(const Field& F, double eps, double Pr);

struct ResolventProbe {
  cplx lambda;
  double kappa = 0, gamma = 0;
  Field u;
  double w_norm = 0, grad_w_norm = 0, F_norm = 0;
  double bound_ratio = 0;  // ((gamma + c_P)||w|| + ||grad w||) / |||F|||_{eps,X}
  bool singular = false;
};

// u = (lambda - M)^{-1} F on every mode at lambda = -kappa + i gamma / eps.
// (The resolvent of the generator M is that of -L at the same point.)
std::vector<ResolventProbe> resolvent_probe_highfreq(const Params& p, double eps, double R1,
                                                     const Truncation& t, double kappa,
                                                     const std::vector<double>& gamma_grid,
                                                     const Field& F);

// Worst case of the same ratio over all F, as a per-mode operator norm with
// output weight sqrt((|gamma| + c_P)^2 + mu) on w. Infinity if singular.
double highfreq_operator_norm(const Params& p, double eps, double R1, const Truncation& t,
                              double kappa, double gamma);

// Log-spaced gamma in [gamma_*, gamma_max] with gamma_* = max(1, 3 eps a_eps),
// plus eps |Im| of every retained eigenvalue that falls in that range.
std::vector<double> highfreq_gamma_grid(const Params& p, double eps, double R1, const Truncation& t,
                                        double a_eps, int n = 41, double gamma_max = 100);

struct LowFreqProbe {
  cplx lambda;
  double u_ratio = 0;    // (1 + |lambda|) ||u||_2 / |||F|||_{eps,X}
  double phi_ratio = 0;  // (eps ||phi|| + eps^2 ||grad phi||) / |||F|||_{eps,X}
  double F_norm = 0;
  bool singular = false;
};

// The Q-part resolvent on F. With project = true, F is replaced by Q F and the
// critical block is solved deflated, so lambda = +-i a_eps is admissible.
std::vector<LowFreqProbe> resolvent_probe_lowfreq(const CriticalPoint& cp, const std::vector<cplx>& grid,
                                                  const Field& F, bool project = true);

// {-kappa/2 + i y : y in {0, +-a_eps, +-C0/(2 eps), +-C0/eps}} plus 1 and i a_eps.
std::vector<cplx> lowfreq_grid(double eps, double a_eps, double kappa, double C0 = 1.0);

struct AcousticFit {
  Mode mode;
  std::vector<double> eps, im, re;
  RateFit fit;  // log |Im| against log eps; slope near -1
};

// Fastest eigenvalue of the block on mode m at each eps, with R1 per eps.
AcousticFit acoustic_branch_fit(const Params& p, const Mode& m, const std::vector<double>& eps,
                                const std::vector<double>& R1);

}  // namespace achopf
