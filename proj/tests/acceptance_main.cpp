// Runs the full acceptance suite with the default configuration and prints one
// line per criterion.
#include <cstdio>
#include <iostream>

#include "achopf/acceptance.hpp"

int main(int argc, char** argv) {
  achopf::RunConfig cfg;
  if (argc > 1) cfg = achopf::load_config(argv[1]);
  const achopf::ReportBundle b = achopf::run_subcommand("acceptance", cfg);
  int failed = 0;
  for (const auto& c : b.checks) {
    std::printf("%s criterion %2d %-22s %s\n", c.passed ? "PASS" : "FAIL", c.id, c.name.c_str(), c.detail.c_str());
    if (!c.passed) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(b.checks.size()) - failed, b.checks.size());
  return failed == 0 ? 0 : 1;
}
