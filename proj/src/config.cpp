#include "achopf/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace achopf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Line {
  std::string source;
  int number;
  std::string key;
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source + ":" + std::to_string(number) + ": " + key + ": " + what);
  }
};

double parse_number(const std::string& tok, const Line& ln) {
  const std::string t = trim(tok);
  if (t.empty()) ln.fail("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) ln.fail("not a finite number: '" + t + "'");
  return v;
}

std::vector<double> parse_list(const std::string& val, const Line& ln) {
  std::vector<double> out;
  std::stringstream ss(val);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_number(tok, ln));
  if (out.empty()) ln.fail("empty list");
  return out;
}

long long parse_int(const std::string& val, const Line& ln) {
  const double v = parse_number(val, ln);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) ln.fail("expected an integer");
  return static_cast<long long>(v);
}

using Setter = std::function<void(RunConfig&, const std::string&, const Line&)>;

Setter num(double RunConfig::*f) {
  return [f](RunConfig& c, const std::string& v, const Line& l) { c.*f = parse_number(v, l); };
}
Setter par(double Params::*f) {
  return [f](RunConfig& c, const std::string& v, const Line& l) { c.params.*f = parse_number(v, l); };
}
Setter tol(double Tolerances::*f) {
  return [f](RunConfig& c, const std::string& v, const Line& l) { c.tol.*f = parse_number(v, l); };
}
Setter list(std::vector<double> RunConfig::*f) {
  return [f](RunConfig& c, const std::string& v, const Line& l) { c.*f = parse_list(v, l); };
}
Setter integer(int RunConfig::*f) {
  return [f](RunConfig& c, const std::string& v, const Line& l) { c.*f = static_cast<int>(parse_int(v, l)); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"params.Pr", par(&Params::Pr)},
      {"params.d", par(&Params::d)},
      {"params.R2", par(&Params::R2)},
      {"params.alpha", par(&Params::alpha)},
      {"grid.eps", list(&RunConfig::eps_grid)},
      {"grid.omega", list(&RunConfig::omega_grid)},
      {"grid.eta", list(&RunConfig::eta_grid)},
      {"grid.radii", list(&RunConfig::radii)},
      {"truncation.j_max", [](RunConfig& c, const std::string& v, const Line& l) { c.trunc.j_max = static_cast<int>(parse_int(v, l)); }},
      {"truncation.k_max", [](RunConfig& c, const std::string& v, const Line& l) { c.trunc.k_max = static_cast<int>(parse_int(v, l)); }},
      {"truncation.M", integer(&RunConfig::M)},
      {"tol.criticality", tol(&Tolerances::criticality)},
      {"tol.threshold", tol(&Tolerances::threshold)},
      {"tol.classical", tol(&Tolerances::classical)},
      {"tol.transversality", tol(&Tolerances::transversality)},
      {"tol.adjoint", tol(&Tolerances::adjoint)},
      {"tol.biorthogonality", tol(&Tolerances::biorthogonality)},
      {"tol.kernel", tol(&Tolerances::kernel)},
      {"tol.periodic_residual", tol(&Tolerances::periodic_residual)},
      {"tol.representation", tol(&Tolerances::representation)},
      {"tol.roundtrip", tol(&Tolerances::roundtrip)},
      {"tol.stokes_residual", tol(&Tolerances::stokes_residual)},
      {"tol.continuity", tol(&Tolerances::continuity)},
      {"run.seed", [](RunConfig& c, const std::string& v, const Line& l) {
         const long long s = parse_int(v, l);
         if (s < 0) l.fail("seed must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"run.output_dir", [](RunConfig& c, const std::string& v, const Line& l) {
         std::string s = v;
         if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
         if (s.empty()) l.fail("empty path");
         c.output_dir = s;
       }},
      {"run.svg", [](RunConfig& c, const std::string& v, const Line& l) {
         if (v == "true" || v == "1") c.svg = true;
         else if (v == "false" || v == "0") c.svg = false;
         else l.fail("expected true or false");
       }},
      {"criticality.eps_max", num(&RunConfig::eps_max)},
      {"periodic.monodromy_r", num(&RunConfig::monodromy_r)},
      {"stokes.n_max", integer(&RunConfig::stokes_n)},
      {"threshold.samples", integer(&RunConfig::threshold_samples)},
      {"energy.c0", num(&RunConfig::energy_c0)},
      {"energy.c2", num(&RunConfig::energy_c2)},
      {"energy.c3", num(&RunConfig::energy_c3)},
      {"energy.C_cal", num(&RunConfig::C_cal)},
  };
  return table;
}

const char* const kRequired[] = {"params.Pr", "params.d", "params.R2", "params.alpha"};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Line ln{source, number, trim(line.substr(0, eq == std::string::npos ? line.size() : eq))};
    if (eq == std::string::npos) ln.fail("expected 'section.key = value'");
    if (ln.key.empty() || ln.key.find('.') == std::string::npos) ln.fail("key must have the form section.key");
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) ln.fail("missing value");
    const auto it = setters().find(ln.key);
    if (it == setters().end()) ln.fail("unknown key");
    if (!seen.insert(ln.key).second) ln.fail("key given twice");
    it->second(c, value, ln);
  }
  for (const char* key : kRequired)
    if (!seen.count(key)) throw ConfigError(source + ": missing required key '" + key + "'");
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

void validate_config(const RunConfig& c) {
  auto bad = [](const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); };
  try {
    c.params.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (c.eps_grid.empty()) bad("grid.eps", "must be nonempty");
  for (double e : c.eps_grid)
    if (!(e > 0) || e > c.eps_max) bad("grid.eps", "entries must lie in (0, criticality.eps_max]");
  if (c.omega_grid.empty()) bad("grid.omega", "must be nonempty");
  for (double w : c.omega_grid)
    if (std::abs(w) > 0.25) bad("grid.omega", "entries must satisfy |omega| <= 1/4");
  if (c.eta_grid.empty()) bad("grid.eta", "must be nonempty");
  if (c.radii.size() < 3) bad("grid.radii", "needs at least three radii");
  for (double r : c.radii)
    if (!(r > 0)) bad("grid.radii", "entries must be positive");
  if (c.trunc.j_max < 2 || c.trunc.k_max < 2) bad("truncation", "j_max and k_max must be at least 2");
  if (c.M < 2) bad("truncation.M", "must be at least 2");
  const Tolerances& t = c.tol;
  for (double v : {t.criticality, t.threshold, t.classical, t.transversality, t.adjoint, t.biorthogonality, t.kernel,
                   t.periodic_residual, t.representation, t.roundtrip, t.stokes_residual, t.continuity})
    if (!(v > 0)) bad("tol", "tolerances must be positive");
  if (!(c.eps_max > 0)) bad("criticality.eps_max", "must be positive");
  if (!(c.monodromy_r > 0)) bad("periodic.monodromy_r", "must be positive");
  if (c.stokes_n < 1) bad("stokes.n_max", "must be positive");
  if (c.threshold_samples < 1) bad("threshold.samples", "must be positive");
  if (!(c.energy_c0 > 0 && c.energy_c2 > 0 && c.energy_c3 > 0)) bad("energy", "c0, c2, c3 must be positive");
  if (!(c.C_cal > 0)) bad("energy.C_cal", "must be positive");
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << "\n"; };
  auto lst = [](const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
  };
  line("params.Pr", fmt(c.params.Pr));
  line("params.d", fmt(c.params.d));
  line("params.R2", fmt(c.params.R2));
  line("params.alpha", fmt(c.params.alpha));
  line("grid.eps", lst(c.eps_grid));
  line("grid.omega", lst(c.omega_grid));
  line("grid.eta", lst(c.eta_grid));
  line("grid.radii", lst(c.radii));
  line("truncation.j_max", std::to_string(c.trunc.j_max));
  line("truncation.k_max", std::to_string(c.trunc.k_max));
  line("truncation.M", std::to_string(c.M));
  const Tolerances& t = c.tol;
  line("tol.criticality", fmt(t.criticality));
  line("tol.threshold", fmt(t.threshold));
  line("tol.classical", fmt(t.classical));
  line("tol.transversality", fmt(t.transversality));
  line("tol.adjoint", fmt(t.adjoint));
  line("tol.biorthogonality", fmt(t.biorthogonality));
  line("tol.kernel", fmt(t.kernel));
  line("tol.periodic_residual", fmt(t.periodic_residual));
  line("tol.representation", fmt(t.representation));
  line("tol.roundtrip", fmt(t.roundtrip));
  line("tol.stokes_residual", fmt(t.stokes_residual));
  line("tol.continuity", fmt(t.continuity));
  line("run.seed", std::to_string(c.seed));
  line("run.output_dir", c.output_dir);
  line("run.svg", c.svg ? "true" : "false");
  line("criticality.eps_max", fmt(c.eps_max));
  line("periodic.monodromy_r", fmt(c.monodromy_r));
  line("stokes.n_max", std::to_string(c.stokes_n));
  line("threshold.samples", std::to_string(c.threshold_samples));
  line("energy.c0", fmt(c.energy_c0));
  line("energy.c2", fmt(c.energy_c2));
  line("energy.c3", fmt(c.energy_c3));
  line("energy.C_cal", fmt(c.C_cal));
  return os.str();
}

}  // namespace achopf
