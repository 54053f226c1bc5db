#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "achopf/blockops.hpp"
#include "achopf/criticality.hpp"
#include "achopf/model.hpp"

namespace achopf {

// exp(t M) u0 on one mode.
ModeVector propagate_mode(const ModeMatrix& M, const ModeVector& u0, double t);

// All retained compressible blocks at (eps, R1), time-scaled by 1/beta:
// beta du/dt = M u + F.
class Generator {
 public:
  Generator(const Params& p, double eps, double R1, const Truncation& t, double beta = 1.0);

  const Params& params() const { return p_; }
  double eps() const { return eps_; }
  double R1() const { return R1_; }
  double beta() const { return beta_; }
  const Truncation& trunc() const { return trunc_; }
  int size() const { return static_cast<int>(modes_.size()); }
  const Mode& mode(int i) const { return modes_[i]; }
  const CMat& block(int i) const { return blocks_[i]; }  // unscaled M
  const RVec& frame(int i) const { return frames_[i]; }
  const BlockExp& exp_of(int i) const { return exps_[i]; }  // exp(t M / beta)

  Field apply(const Field& u) const;  // M u (unscaled)
  Field propagate(const Field& u0, double t) const;

 private:
  Params p_;
  double eps_, R1_, beta_;
  Truncation trunc_;
  std::vector<Mode> modes_;
  std::vector<CMat> blocks_;
  std::vector<RVec> frames_;
  std::vector<BlockExp> exps_;
};

// (u, u_+^*)_eps restricted to the critical mode.
cplx bracket_plus(const Field& u, const CriticalPoint& cp);
cplx bracket_minus(const Field& u, const CriticalPoint& cp);
Field project_P(const Field& u, const CriticalPoint& cp);
Field project_Q(const Field& u, const CriticalPoint& cp);
// Throws unless (u_j, u_k^*) = delta_jk to 1e-10.
void require_normalized(const CriticalPoint& cp);
// Rank-two eigenprojection on the critical block as a coefficient matrix.
CMat critical_projection_matrix(const CriticalPoint& cp);

// Deterministic probe fields.
Field random_field(const Params& p, const Truncation& t, std::uint64_t seed);
Field unit_probe_field(const Params& p, const Truncation& t, const Mode& critical);

// F(t) = sum_m F_m e^{i m omega t}.
struct TimeFourierForcing {
  double omega = 0;
  std::map<int, Field> harmonics;
  bool empty() const { return harmonics.empty(); }
  Field at(double t, const Field& zero) const;
};

struct Trajectory {
  double eps = 0;
  double beta = 1;
  std::vector<double> times;
  std::vector<Field> states;
  std::vector<Field> rates;  // du/dt
  std::vector<Field> forcing;
  bool resonant = false;     // a harmonic hit an eigenvalue of M / beta
};

std::vector<double> chebyshev_times(double T, int n);

// Closed-form per-mode Duhamel solution at the requested times.
Trajectory solve_ivp(const Generator& g, const Field& u0, const TimeFourierForcing& F,
                     const std::vector<double>& times);

struct DecayFit {
  double kappa_fit = 0;   // fitted rate in the unscaled time of M (rate / beta * beta)
  double C_fit = 0;       // max_t N(t) e^{kappa1 t / beta} / N(0)
  std::vector<double> times;
  std::vector<double> norms;
};

// Least-squares rate of |||V(t) Q u0|||_{eps,X1} for u0 already projected.
DecayFit decay_fit(const Generator& g, const Field& u0, double kappa1, double T, int n_samples);

// int_0^T e^{2 kappa s} (||theta||^2 + ||psi||^2) ds along exp(sM/beta) u0, exact per mode.
double scalar_oscillation_integral(const Generator& g, const Field& u0, double kappa, double T);

}  // namespace achopf
