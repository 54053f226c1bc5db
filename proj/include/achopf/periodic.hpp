#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "achopf/criticality.hpp"
#include "achopf/model.hpp"
#include "achopf/rates.hpp"

namespace achopf {

// u(t) = sum_{|m| <= M} u_m e^{i m a t}, period 2 pi / a.
struct PeriodicField {
  double a = 0;
  int M = 0;
  double eps = 0;
  std::vector<Field> harm;  // harm[m + M]

  Field& at(int m);
  const Field& at(int m) const;
  Field eval(double t) const;
  bool is_real(double tol = 1e-14) const;
  PeriodicField& operator+=(const PeriodicField& o);
  PeriodicField& operator-=(const PeriodicField& o);
};

PeriodicField operator+(PeriodicField x, const PeriodicField& y);
PeriodicField operator-(PeriodicField x, const PeriodicField& y);

// JSON layout documented in README: {a, M, eps, alpha, j_max, k_max,
// modes: [{j, k, comps}], coeffs: [[re, im], ...]} with coeffs ordered by
// harmonic m = -M..M, then mode, then component.
std::string periodic_to_json(const PeriodicField& u);
PeriodicField periodic_from_json(const std::string& text);

// Harmonic-diagonal realization of B(omega) = (a_eps / a)(1 + omega) d_t - M
// around compressible critical data.
class PeriodicSystem {
 public:
  PeriodicSystem(const CriticalPoint& ac, double a, int M = 16);

  const CriticalPoint& critical() const { return cp_; }
  double a() const { return a_; }
  double a_eps() const { return cp_.a; }
  double eps() const { return cp_.eps; }
  double period() const;
  int M() const { return M_; }
  int size() const { return static_cast<int>(modes_.size()); }
  int critical_index() const { return crit_; }
  const Mode& mode(int i) const { return modes_[i]; }
  const CMat& block(int i) const { return blocks_[i]; }
  const RVec& frame(int i) const { return frames_[i]; }
  const CMat& P_plus() const { return Pp_; }
  const CMat& P_minus() const { return Pm_; }
  double kappa1() const { return kappa1_; }

  PeriodicField zero() const;
  PeriodicField z_plus() const;   // e^{iat} u_+
  PeriodicField z_minus() const;  // e^{-iat} u_-
  PeriodicField apply_B(const PeriodicField& u, double omega = 0) const;
  PeriodicField dt(const PeriodicField& u) const;

  double norm_X(const PeriodicField& u) const;  // |||u|||_{eps, X_a}
  double norm_Y(const PeriodicField& u) const;  // |||u|||_{eps, Y_a}, sup over a uniform time grid
  double norm_eps(const PeriodicField& u) const;  // time-averaged |||u|||_eps

  void require_compatible(const PeriodicField& u) const;

 private:
  CriticalPoint cp_;
  double a_;
  int M_;
  std::vector<Mode> modes_;
  std::vector<CMat> blocks_;
  std::vector<RVec> frames_;
  CMat Pp_, Pm_;
  int crit_ = -1;
  double kappa1_ = 0;
};

struct ProjectionReport {
  cplx bracket_plus, bracket_minus;  // <u, z_+-^*>_eps
  PeriodicField P_part, Q_part;
};

ProjectionReport projections(const PeriodicField& u, const PeriodicSystem& sys);

struct PeriodicSolve {
  PeriodicField u;
  double residual = 0;        // |||B u - F|||_X / |||F|||_X
  double rep_discrepancy = 0;  // representation formula vs harmonic solve, relative
  double ratio_Y_X = 0;        // |||u|||_Y / |||F|||_X
  double ratio_literal = 0;    // |||u|||_Y against the bound with |Re(F, u)| taken literally
  std::vector<std::string> warnings;
};

// B u = F on Q Y_a. Throws InvalidInput "solvability condition violated" when
// |[F]_+-| > 1e-12.
PeriodicSolve solve_Beps(const PeriodicField& F, const PeriodicSystem& sys);

// B(omega) u = F on Q Y_a for |omega| <= 1/4.
PeriodicSolve solve_Beps_omega(const PeriodicField& F, double omega, const PeriodicSystem& sys);

struct ResolventResult {
  PeriodicField u;
  double rep_discrepancy = 0;
  double bracket_term = 0;  // sum |[e^{-lambda'(T - s)} F]_j| / |1 - e^{-2 pi lambda / a_eps}|
  double regular_term = 0;  // |||F|||_X
  double norm_Y = 0;
};

// (lambda + B)^{-1} F. Rejects lambda within 1e-10 of i k a_eps.
ResolventResult resolvent_Beps(cplx lambda, const PeriodicField& F, const PeriodicSystem& sys);

// Operator norm of (lambda + B)^{-1} on X_a in the |||.|||_eps frame.
double resolvent_norm_Beps(cplx lambda, const PeriodicSystem& sys);

// Fit of log ||(lambda + B)^{-1}|| against log r at lambda = pole + r.
RateFit resolvent_blowup(cplx pole, const std::vector<double>& radii, const PeriodicSystem& sys);

struct MonodromyProbe {
  cplx mu;
  double omega = 0;
  double inv_norm = 0;
  double bound_ratio = 0;  // inv_norm / (1/r + 1/|mu|)
};

// max over modes of |(mu - V_omega(2 pi / a))^{-1}| in the eps frame.
MonodromyProbe monodromy_resolvent_probe(cplx mu, double omega, double r, const PeriodicSystem& sys);

struct FixedPointResult {
  Field u;
  double neumann_ratio = 0;    // measured tail ratio of the Q-part Neumann series
  double expected_ratio = 0;   // e^{-2 pi (Re lambda + kappa1) / a_eps}
  bool neumann_checked = false;
};

// (I - e^{-2 pi lambda / a_eps} V_0(2 pi / a)) u = F.
FixedPointResult fixed_point_solve(cplx lambda, const Field& F, const PeriodicSystem& sys);

// max over +- of |||B z_+-||| / |||M u_+-|||.
double kernel_residual(const PeriodicSystem& sys);

// Largest |||u|||_Y / |||F|||_X for u = B(omega)^{-1} F over inputs F in Q X_a
// supported on a single (harmonic, mode) block. For such inputs the sup over
// time is exact, so this is a computable lower bound on the solution-operator
// norm that is attained.
double solution_operator_norm(double omega, const PeriodicSystem& sys);

// Smallest frame singular value of the (m = +1, critical) block of B(omega).
double kernel_singular_value(double omega, const PeriodicSystem& sys);

struct IncKernel {
  int nullity = 0;
  double min_pairing = 0;  // |y^H x| of normalized left/right null vectors
  bool semisimple = false;
};

// Null space of the incompressible harmonic-diagonal operator at criticality.
IncKernel inc_periodic_kernel(const CriticalPoint& inc, int M);

// Real-valued probe on harmonics |m| <= width, Q-projected.
PeriodicField periodic_probe(const PeriodicSystem& sys, std::uint64_t seed, int width = 2);

}  // namespace achopf
