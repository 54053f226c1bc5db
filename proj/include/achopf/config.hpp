#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "achopf/model.hpp"

namespace achopf {

// Config text problems; the message names the line or the missing field.
struct ConfigError : InvalidInput {
  using InvalidInput::InvalidInput;
};

struct Tolerances {
  double criticality = 1e-12;
  double threshold = 1e-9;           // closed-form vs detected crossing
  double classical = 1e-9;           // classical stationary limit
  double transversality = 1e-6;
  double adjoint = 1e-13;
  double biorthogonality = 1e-12;
  double kernel = 1e-12;
  double periodic_residual = 1e-10;
  double representation = 1e-8;
  double roundtrip = 1e-9;
  double stokes_residual = 1e-12;
  double continuity = 1e-12;
};

struct RunConfig {
  Params params;
  std::vector<double> eps_grid{0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125};
  std::vector<double> omega_grid{-0.25, -0.1, -0.01, 0.0, 0.01, 0.1, 0.25};
  std::vector<double> eta_grid{-0.05, -0.025, -0.01, 0.0, 0.01, 0.025, 0.05};  // relative to R1c
  std::vector<double> radii{1e-2, 1e-3, 1e-4, 1e-5};
  Truncation trunc;
  int M = 16;
  Tolerances tol;
  std::uint64_t seed = 20240601;
  std::string output_dir = "achopf_out";
  double eps_max = 0.2;
  double monodromy_r = 0.1;
  int stokes_n = 32;
  int threshold_samples = 50;
  double energy_c0 = 1e-2, energy_c2 = 1e-2, energy_c3 = 1e-2;
  double C_cal = 100.0;
  bool svg = false;
};

// Grammar, one entry per line:
//   section.key = value        value: number, comma-separated numbers, or text
//   # comment                  (also after a value)
// params.Pr, params.d, params.R2 and params.alpha are required; everything
// else has the defaults above. Unknown or repeated keys are errors.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// Canonical text form; parse_config(config_to_text(c)) == c.
std::string config_to_text(const RunConfig& c);

// Throws ConfigError naming the first bad field.
void validate_config(const RunConfig& c);

}  // namespace achopf
