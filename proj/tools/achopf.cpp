#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "achopf/acceptance.hpp"
#include "achopf/config.hpp"
#include "achopf/report.hpp"

namespace {

constexpr int kPass = 0, kCheckFailure = 1, kUsage = 2;

std::vector<double> parse_eps_list(const std::string& text) {
  // Reuse the config grammar so --eps accepts exactly what grid.eps accepts.
  return achopf::parse_config("params.Pr = 2\nparams.d = 0.1\nparams.R2 = 1\nparams.alpha = 1\ngrid.eps = " + text + "\n",
                              "--eps")
      .eps_grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"achopf: spectral verification toolkit for the artificial-compressibility double-diffusive system"};
  app.require_subcommand(1, 1);
  std::string config_path, eps_text, out_dir;
  long long seed = -1;
  bool svg = false;
  for (const auto& name : achopf::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " pipeline");
    sub->add_option("--config", config_path, "config file (section.key = value)");
    sub->add_option("--eps", eps_text, "comma-separated eps grid overriding grid.eps");
    sub->add_option("--out", out_dir, "output directory overriding run.output_dir");
    sub->add_option("--seed", seed, "seed overriding run.seed")->check(CLI::NonNegativeNumber);
    sub->add_flag("--svg", svg, "also write SVG charts");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  achopf::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = achopf::load_config(config_path);
    if (!eps_text.empty()) cfg.eps_grid = parse_eps_list(eps_text);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (svg) cfg.svg = true;
    achopf::validate_config(cfg);
  } catch (const achopf::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const achopf::ReportBundle b = achopf::run_subcommand(name, cfg);
    achopf::write_bundle(b, cfg.output_dir, cfg.svg);
    std::cout << achopf::render_summary(b);
    return b.passed() ? kPass : kCheckFailure;
  } catch (const achopf::InvalidInput& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return kCheckFailure;
  }
}
