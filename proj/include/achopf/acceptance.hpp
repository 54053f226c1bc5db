#pragma once

#include <memory>
#include <string>
#include <vector>

#include "achopf/config.hpp"
#include "achopf/criticality.hpp"
#include "achopf/periodic.hpp"
#include "achopf/report.hpp"

namespace achopf {

// Shared, lazily built critical data for one configuration.
class Session {
 public:
  explicit Session(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  const CriticalPoint& inc();
  // Compressible critical points on the eps grid, in grid order.
  const std::vector<CriticalPoint>& ac();
  // Full convergence study; needs at least five eps values.
  const ConvergenceStudy& study();
  const PeriodicSystem& periodic(size_t i);

 private:
  RunConfig cfg_;
  std::unique_ptr<CriticalPoint> inc_;
  std::unique_ptr<ConvergenceStudy> study_;
  std::unique_ptr<std::vector<CriticalPoint>> ac_;
  std::vector<std::unique_ptr<PeriodicSystem>> periodic_;
};

struct Outcome {
  bool ok = true;
  std::string detail;
};

// One function per acceptance criterion; each also writes its data tables
// into the bundle.
Outcome check_threshold_oracle(Session& s, ReportBundle& b);     // 1
Outcome check_classical_limit(Session& s, ReportBundle& b);      // 2
Outcome check_singular_limit_rates(Session& s, ReportBundle& b); // 3
Outcome check_transversality(Session& s, ReportBundle& b);       // 4
Outcome check_structure_identities(Session& s, ReportBundle& b); // 5
Outcome check_gap(Session& s, ReportBundle& b);                  // 6, kappa1 part
Outcome check_decay(Session& s, ReportBundle& b);                // 6, trajectory part
Outcome check_periodic_solvability(Session& s, ReportBundle& b); // 7
Outcome check_semisimplicity(Session& s, ReportBundle& b);       // 8
Outcome check_omega_uniformity(Session& s, ReportBundle& b);     // 9
Outcome check_energy(Session& s, ReportBundle& b);               // 10
Outcome check_resolvent_probes(Session& s, ReportBundle& b);     // 11
Outcome check_stokes(Session& s, ReportBundle& b);               // 12
Outcome check_determinism(Session& s, ReportBundle& b);          // 13
Outcome check_branch(Session& s, ReportBundle& b);               // crossing along the eta grid

const std::vector<std::string>& subcommands();

// Runs one subcommand pipeline. Throws InvalidInput for unknown names.
ReportBundle run_subcommand(const std::string& name, const RunConfig& cfg);

// Reduced configuration used by the determinism check.
RunConfig determinism_config(const RunConfig& cfg);

}  // namespace achopf
