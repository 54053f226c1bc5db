#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "achopf/dynamics.hpp"

namespace achopf {

struct EnergyConfig {
  double beta = 1;
  double c0 = 1e-2;      // weight of |||d_x1 u|||^2 in E
  double c1 = 1.0 / 16;  // beta / 16
  double c2 = 1e-2;      // weight of ||d_x2 phi||^2 in E
  double c3 = 1e-2;      // weight of the elliptic step; enters no energy term
  double kappa = 0;
  double c_small = 0.125;  // the 1/8 multiplying the time-derivative terms

  // The assembled estimates only hold with a small multiple of the dissipation
  // block on the left; tie it to the absorption constants so halving shrinks it too.
  double diss_weight() const { return 0.1 * std::min({c0, c2, c3}); }

  static EnergyConfig with_beta(double beta) {
    EnergyConfig c;
    c.beta = beta;
    c.c1 = beta / 16;
    return c;
  }
};

struct EnergyValues {
  double E1 = 0;
  double E = 0;
  double D = 0;
  double D1 = 0;        // D(u) - 2 Re(phi, div w)
  double D2 = 0;        // |||d_x1 u|||_eps^2
  double coupling = 0;  // Re(phi, div w)
  double phi_sq = 0;    // ||phi||^2
};

EnergyValues energy_functionals(const Field& u, double eps, const Params& p, const EnergyConfig& cfg);

// One row per inequality: smallest C with LHS <= C * bracket over all samples.
struct InequalityMargin {
  std::string name;
  double C_star = 0;
  double worst_time = 0;
  double worst_lhs = 0;
  double worst_bracket = 0;
};

struct MarginReport {
  std::vector<InequalityMargin> rows;
  double continuity_residual = 0;      // max relative residual of beta eps^2 phi_t + div w = eps^2 f
  double sandwich_lower = 0;    // min over samples of D1 - (D/2 - 8||phi||^2)
  double sandwich_upper = 0;    // min over samples of (3D/2 + 8||phi||^2) - D1
  double E1_equiv_lo = 0;       // min E1 / (beta(|||u|||^2 + eps^2 D))
  double E1_equiv_hi = 0;       // max of the same ratio
  double calibration_margin = 0;  // assembled-estimate margin with constant C_cal at the worst sample
  bool failed = false;          // some positive LHS met a zero bracket
  const InequalityMargin& row(const std::string& n) const;
};

// Evaluate the five basic energy estimates and the two assembled ones along
// a trajectory. Time derivatives
// of quadratic forms come from du/dt, never from differencing samples.
MarginReport verify_energy_inequalities(const Trajectory& tr, const Params& p, const EnergyConfig& cfg,
                                        double C_cal = 100.0);

// Smallest C with LHS <= C * bracket over every state (u, F) of the truncated
// system, not just along one trajectory. Blocks decouple, so this is a max over
// modes of a Hermitian pencil bound. Rows with absolute values are skipped.
struct StateSup {
  std::string name;
  double C_sup = 0;
  int j = 0, k = 0;  // mode attaining the max
};
std::vector<StateSup> state_sup_constants(const Generator& g, const EnergyConfig& cfg);

// Halve c0, c2, c3 until the assembled-estimate margin is non-negative on
// every calibration trajectory.
EnergyConfig calibrate_energy(const std::vector<Trajectory>& cal, const Params& p, EnergyConfig cfg,
                              double C_cal = 100.0, int max_halvings = 30);

}  // namespace achopf
