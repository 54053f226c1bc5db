#include "achopf/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "achopf/blockops.hpp"
#include "achopf/dynamics.hpp"
#include "achopf/energy.hpp"
#include "achopf/smalleig.hpp"
#include "achopf/spectral_survey.hpp"
#include "achopf/stokes.hpp"

namespace achopf {

namespace {

constexpr double kPi = 3.141592653589793;

std::string s6(double v) { return fmt_short(v); }

// Builds "a, b; c" details without repeating the formatting noise.
struct Detail {
  std::ostringstream os;
  bool first = true;
  Detail& add(const std::string& k, double v) {
    os << (first ? "" : ", ") << k << " " << s6(v);
    first = false;
    return *this;
  }
  Detail& text(const std::string& t) {
    os << (first ? "" : ", ") << t;
    first = false;
    return *this;
  }
  std::string str() const { return os.str(); }
};

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }
double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

}  // namespace

// ------------------------------------------------------------------- Session

Session::Session(RunConfig cfg) : cfg_(std::move(cfg)) { validate_config(cfg_); }

const CriticalPoint& Session::inc() {
  if (!inc_) inc_ = std::make_unique<CriticalPoint>(study_ ? study_->inc : find_inc_critical(cfg_.params, cfg_.trunc));
  return *inc_;
}

const ConvergenceStudy& Session::study() {
  if (!study_) {
    study_ = std::make_unique<ConvergenceStudy>(eps_convergence_study(cfg_.params, cfg_.eps_grid, cfg_.trunc));
    if (!inc_) inc_ = std::make_unique<CriticalPoint>(study_->inc);
    if (!ac_) ac_ = std::make_unique<std::vector<CriticalPoint>>(study_->ac);
  }
  return *study_;
}

const std::vector<CriticalPoint>& Session::ac() {
  if (!ac_) {
    if (cfg_.eps_grid.size() >= 5) {
      study();
    } else {
      const CriticalPoint& base = inc();
      CriticalityOptions opt;
      opt.tol = cfg_.tol.criticality;
      opt.eps_max = cfg_.eps_max;
      auto v = std::make_unique<std::vector<CriticalPoint>>(cfg_.eps_grid.size());
      parallel_for(static_cast<int>(v->size()), [&](int i) {
        (*v)[i] = find_ac_critical(cfg_.params, cfg_.eps_grid[i], cfg_.trunc, base, opt);
      });
      ac_ = std::move(v);
    }
  }
  return *ac_;
}

const PeriodicSystem& Session::periodic(size_t i) {
  if (periodic_.size() != cfg_.eps_grid.size()) periodic_.resize(cfg_.eps_grid.size());
  if (!periodic_.at(i)) periodic_[i] = std::make_unique<PeriodicSystem>(ac().at(i), inc().a, cfg_.M);
  return *periodic_[i];
}

// ------------------------------------------------------------- criterion 1

namespace {

// Real part of the complex pair of a 3x3 incompressible block, if there is one.
std::optional<double> pair_real(const Mode& m, const Params& p, double R1, double& im) {
  const auto vals = eigenvalues(assemble(m, Operator::INC, p, R1).entries, "threshold oracle block");
  std::optional<double> re;
  for (cplx z : vals)
    if (z.imag() > 1e-8 * (1 + std::abs(z))) re = z.real(), im = z.imag();
  return re;
}

}  // namespace

Outcome check_threshold_oracle(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uPr(1.2, 10), ud(0.05, 0.9), uR2(5, 200), ual(0.5, 4);
  std::uniform_int_distribution<int> ujk(1, 4);
  Table& t = b.table("threshold_oracle.csv", {"Pr", "d", "R2", "alpha", "j", "k", "R1_closed", "R1_detected",
                                              "rel_err", "freq_closed", "freq_detected"});
  int accepted = 0, tries = 0;
  double worst = 0;
  while (accepted < cfg.threshold_samples && tries < 200 * cfg.threshold_samples) {
    ++tries;
    Params p;
    p.Pr = uPr(rng), p.d = ud(rng), p.R2 = uR2(rng), p.alpha = ual(rng);
    const int j = ujk(rng), k = ujk(rng);
    const Mode m = make_mode(j, k, p.alpha);
    const auto th = inc_oscillatory_threshold(p, m);
    if (!th.oscillatory || !(th.R1_sq > 0)) continue;
    const double R = std::sqrt(th.R1_sq);
    double lo = R * (1 - 1e-3), hi = R * (1 + 1e-3), im = 0;
    const auto flo = pair_real(m, p, lo, im), fhi = pair_real(m, p, hi, im);
    // Samples whose pair turns real inside the bracket carry no crossing to detect.
    if (!flo || !fhi || (*flo < 0) == (*fhi < 0)) continue;
    const bool rising = *flo < 0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * R; ++it) {
      const double mid = 0.5 * (lo + hi);
      const auto fm = pair_real(m, p, mid, im);
      if (!fm) break;
      ((*fm < 0) == rising ? lo : hi) = mid;
    }
    const double Rd = 0.5 * (lo + hi);
    pair_real(m, p, Rd, im);
    const double rel = std::abs(Rd - R) / R;
    worst = std::max(worst, rel);
    t.add({p.Pr, p.d, p.R2, p.alpha, double(j), double(k), R, Rd, rel, std::sqrt(th.a_sq), im});
    ++accepted;
  }
  Outcome o;
  o.ok = accepted == cfg.threshold_samples && worst <= cfg.tol.threshold;
  o.detail = Detail().add("samples", accepted).add("max rel err", worst).add("tol", cfg.tol.threshold).str();
  b.json["threshold_oracle"] = {{"samples", accepted}, {"draws", tries}, {"max_rel_err", worst}};
  return o;
}

// ------------------------------------------------------------- criterion 2

Outcome check_classical_limit(Session& s, ReportBundle& b) {
  Params p = s.config().params;
  p.R2 = 0;
  p.alpha = kPi / std::sqrt(2.0);
  const double expected = 27 * std::pow(kPi, 4) / 4;
  const double v = inc_stationary_threshold(p, make_mode(1, 1, p.alpha));
  double best = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= 8; ++j) best = std::min(best, inc_stationary_threshold(p, make_mode(j, 1, p.alpha)));
  const double rel = std::abs(v - expected) / expected, rel_min = std::abs(best - expected) / expected;
  Outcome o;
  o.ok = rel <= s.config().tol.classical && rel_min <= s.config().tol.classical;
  o.detail = Detail().add("R1^2 (1,1)", v).add("27 pi^4/4", expected).add("rel err", rel).add("min over j rel err", rel_min).str();
  b.json["classical_limit"] = {{"value", v}, {"expected", expected}, {"rel_err", rel}, {"min_over_j", best}};
  return o;
}

// ------------------------------------------------------------- criterion 3

Outcome check_singular_limit_rates(Session& s, ReportBundle& b) {
  Outcome o;
  if (s.config().eps_grid.size() < 5) {
    o.ok = false;
    o.detail = "needs at least five eps values";
    return o;
  }
  const ConvergenceStudy& st = s.study();
  Table& t = b.table("sweep_eps.csv", {"eps", "R1c_eps", "a_eps", "err_R1c", "err_a", "err_uplus"});
  Table& t2 = b.table("sweep_eps_extra.csv", {"eps", "err_uplus_star", "err_proj", "proj_norm"});
  for (size_t i = 0; i < st.eps_grid.size(); ++i) {
    t.add({st.eps_grid[i], st.ac[i].R1c, st.ac[i].a, st.err_R1c[i], st.err_a[i], st.err_uplus[i]});
    t2.add({st.eps_grid[i], st.err_uplus_star[i], st.err_proj[i], st.proj_norm[i]});
  }
  Detail d;
  const std::pair<const char*, const RateFit*> fits[] = {
      {"R1c", &st.fit_R1c}, {"a", &st.fit_a}, {"uplus", &st.fit_uplus}, {"uplus_star", &st.fit_uplus_star}};
  for (auto [name, f] : fits) {
    const bool ok = f->slope >= 1.8 && f->slope <= 2.2 && f->r_squared >= 0.99;
    o.ok = o.ok && ok;
    d.add(std::string(name) + " slope", f->slope).add("r2", f->r_squared);
    b.json["rate_fits"][name] = to_json(*f);
  }
  b.json["rate_fits"]["projection"] = to_json(st.fit_proj);
  b.json["inc"] = {{"R1c", st.inc.R1c}, {"a", st.inc.a}, {"mode", {st.inc.mode_c.j, st.inc.mode_c.k}}};
  o.detail = d.str();
  Chart c{"sweep_eps.svg", "singular-limit errors", "eps", "error", true, true, {}};
  for (auto [name, vals] : {std::pair<const char*, const std::vector<double>*>{"R1c", &st.err_R1c},
                            {"a", &st.err_a}, {"uplus", &st.err_uplus}, {"uplus_star", &st.err_uplus_star}}) {
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < vals->size(); ++i) pts.push_back({st.eps_grid[i], (*vals)[i]});
    c.series.push_back({name, pts});
  }
  b.charts.push_back(c);
  return o;
}

// ------------------------------------------------------------- criterion 4

Outcome check_transversality(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("transversality.csv", {"eps", "re_formula", "im_formula", "re_fd", "im_fd", "rel_err"});
  std::vector<const CriticalPoint*> cps{&s.inc()};
  for (const auto& c : s.ac()) cps.push_back(&c);
  double worst = 0, min_re = std::numeric_limits<double>::infinity();
  for (const CriticalPoint* cp : cps) {
    const cplx fd = transversality_fd(*cp, 1e-4 * cp->R1c);
    const double rel = std::abs(fd - cp->transversality) / std::abs(fd);
    worst = std::max(worst, rel);
    min_re = std::min(min_re, cp->transversality.real());
    t.add({cp->eps, cp->transversality.real(), cp->transversality.imag(), fd.real(), fd.imag(), rel});
  }
  Outcome o;
  o.ok = worst <= cfg.tol.transversality && min_re > 0;
  o.detail = Detail().add("max rel err", worst).add("min Re", min_re).add("points", cps.size()).str();
  return o;
}

// ------------------------------------------------------------- criterion 5

namespace {

// max_ij |(D M - M*^H D)_ij| / max(1, |(D M)_ij|) with D = diag(W nu).
double adjoint_defect(const Mode& m, const Params& p, double R1, double eps) {
  const bool ac = eps > 0;
  const ModeMatrix A = ac ? assemble(m, Operator::AC, p, R1, eps) : assemble(m, Operator::INC, p, R1);
  const ModeMatrix S = ac ? assemble(m, Operator::ACAdjoint, p, R1, eps) : assemble(m, Operator::INCAdjoint, p, R1);
  RVec w = weight_diagonal(m, A.comps, p, eps);
  const ModeVector mv = make_mode_vector(m, A.comps, p.alpha);
  for (int c = 0; c < w.size(); ++c) w[c] *= mv.basis_norms[c];
  const CMat D = w.cast<cplx>().asDiagonal();
  const CMat DM = D * A.entries;
  const CMat E = DM - S.entries.adjoint() * D;
  double worst = 0;
  for (int i = 0; i < E.rows(); ++i)
    for (int j = 0; j < E.cols(); ++j) worst = std::max(worst, std::abs(E(i, j)) / std::max(1.0, std::abs(DM(i, j))));
  return worst;
}

double biorth_defect(const CriticalPoint& cp) {
  const double e = cp.pairing_eps(), Pr = cp.params.Pr;
  const ModeVector* u[2] = {&cp.u_plus, &cp.u_minus};
  const ModeVector* v[2] = {&cp.u_plus_star, &cp.u_minus_star};
  double worst = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      worst = std::max(worst, std::abs(inner_product_eps(*u[i], *v[j], e, Pr) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace

Outcome check_structure_identities(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  const Params& p = cfg.params;
  Table& t = b.table("structure.csv", {"eps", "adjoint_defect", "biorth_defect", "kernel_residual"});
  const auto modes = truncated_modes(p.alpha, cfg.trunc);
  auto sweep = [&](double eps, double R1) {
    std::vector<double> d(modes.size(), 0);
    parallel_for(static_cast<int>(modes.size()), [&](int i) {
      if (eps == 0 && modes[i].kind == ModeKind::Acoustic) return;
      d[i] = adjoint_defect(modes[i], p, R1, eps);
    });
    return max_of(d);
  };
  double adj = sweep(0.0, s.inc().R1c), bio = biorth_defect(s.inc()), ker = 0;
  t.add({0.0, adj, bio, std::numeric_limits<double>::quiet_NaN()});
  for (size_t i = 0; i < s.ac().size(); ++i) {
    const CriticalPoint& cp = s.ac()[i];
    const double a = sweep(cp.eps, cp.R1c), bo = biorth_defect(cp), k = kernel_residual(s.periodic(i));
    adj = std::max(adj, a), bio = std::max(bio, bo), ker = std::max(ker, k);
    t.add({cp.eps, a, bo, k});
  }
  Outcome o;
  o.ok = adj <= cfg.tol.adjoint && bio <= cfg.tol.biorthogonality && ker <= cfg.tol.kernel;
  o.detail = Detail().add("adjoint", adj).add("biorthogonality", bio).add("B z residual", ker).str();
  return o;
}

// ------------------------------------------------------------- criterion 6

Outcome check_gap(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("gap.csv", {"eps", "kappa1", "witness_j", "witness_k", "acoustic_abscissa", "excluded"});
  std::vector<double> k1;
  Outcome o;
  for (const auto& cp : s.ac()) {
    const GapReport g = spectral_gap(cfg.params, cp.eps, cp.R1c, cfg.trunc, &cp);
    k1.push_back(g.kappa1);
    t.add({cp.eps, g.kappa1, double(g.witness_mode.j), double(g.witness_mode.k),
           g.acoustic_abscissa.value_or(std::numeric_limits<double>::quiet_NaN()), double(g.excluded)});
    if (!(g.kappa1 > 0) || g.excluded != 2) o.ok = false;
  }
  const double spread = spread_ratio(k1);
  o.ok = o.ok && spread <= 2;
  o.detail = Detail().add("min kappa1", min_of(k1)).add("max/min", spread).str();
  return o;
}

Outcome check_decay(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  const Params& p = cfg.params;
  Table& t = b.table("decay.csv", {"eps", "seed", "kappa1", "kappa_fit", "ratio", "C_fit"});
  std::vector<double> Cmax;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& cp : s.ac()) {
    const double beta = cp.a / s.inc().a;
    const Generator g(p, cp.eps, cp.R1c, cfg.trunc, beta);
    const double k1 = cp.gap;
    double cm = 0;
    for (int q = 0; q < 5; ++q) {
      const std::uint64_t seed = cfg.seed + 1000 + q;
      const Field u0 = project_Q(random_field(p, cfg.trunc, seed), cp);
      const DecayFit df = decay_fit(g, u0, k1, 10 / k1, 64);
      worst = std::min(worst, df.kappa_fit / k1);
      cm = std::max(cm, df.C_fit);
      t.add({cp.eps, double(seed), k1, df.kappa_fit, df.kappa_fit / k1, df.C_fit});
    }
    Cmax.push_back(cm);
  }
  const double spread = spread_ratio(Cmax);
  Outcome o;
  o.ok = worst >= 0.95 && spread <= 2;
  o.detail = Detail().add("min kappa_fit/kappa1", worst).add("C_fit max/min", spread).str();
  return o;
}

// ------------------------------------------------------------- criterion 7

Outcome check_periodic_solvability(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("periodic_solve.csv", {"eps", "residual", "rep_discrepancy", "roundtrip", "ratio_Y_X",
                                            "ratio_literal", "rejects_above", "accepts_below"});
  double res = 0, rep = 0, rt = 0;
  bool reject_ok = true;
  for (size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    const PeriodicSystem& sys = s.periodic(i);
    const PeriodicField F = periodic_probe(sys, cfg.seed, 2);
    const PeriodicSolve sol = solve_Beps(F, sys);
    const PeriodicField v = periodic_probe(sys, cfg.seed + 17, 3);
    const PeriodicSolve back = solve_Beps(sys.apply_B(v), sys);
    const double r = sys.norm_eps(back.u - v) / sys.norm_eps(v);
    // Push one bracket just over and just under the rejection level.
    bool above = true, below = true;
    for (const PeriodicField& z : {sys.z_plus(), sys.z_minus()}) {
      PeriodicField over = F, under = F;
      for (int m = -sys.M(); m <= sys.M(); ++m) {
        over.at(m) += cplx(1.01e-12) * z.at(m);
        under.at(m) += cplx(0.99e-12) * z.at(m);
      }
      try {
        solve_Beps(over, sys);
        above = false;
      } catch (const InvalidInput&) {
      }
      try {
        solve_Beps(under, sys);
      } catch (const InvalidInput&) {
        below = false;
      }
    }
    reject_ok = reject_ok && above && below;
    res = std::max(res, sol.residual), rep = std::max(rep, sol.rep_discrepancy), rt = std::max(rt, r);
    t.add({sys.eps(), sol.residual, sol.rep_discrepancy, r, sol.ratio_Y_X, sol.ratio_literal, double(above), double(below)});
    if (i + 1 == cfg.eps_grid.size()) {
      b.files["periodic_F.json"] = periodic_to_json(F);
      b.files["periodic_u.json"] = periodic_to_json(sol.u);
    }
  }
  Outcome o;
  o.ok = res <= cfg.tol.periodic_residual && rep <= cfg.tol.representation && rt <= cfg.tol.roundtrip && reject_ok;
  o.detail = Detail()
                 .add("residual", res)
                 .add("representation", rep)
                 .add("round trip", rt)
                 .text(reject_ok ? "rejection exactly above 1e-12" : "rejection threshold misplaced")
                 .str();
  return o;
}

// ------------------------------------------------------------- criterion 8

Outcome check_semisimplicity(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("blowup.csv", {"eps", "pole_k", "exponent", "r_squared", "midpoint_norm"});
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  double worst_mid = 0;
  for (size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    const PeriodicSystem& sys = s.periodic(i);
    for (int k = -3; k <= 3; ++k) {
      const RateFit f = resolvent_blowup(cplx(0, k * sys.a_eps()), cfg.radii, sys);
      const double mid = resolvent_norm_Beps(cplx(0, (k + 0.5) * sys.a_eps()), sys);
      worst_mid = std::max(worst_mid, mid);
      t.add({sys.eps(), double(k), -f.slope, f.r_squared, mid});
      if (std::abs(k) <= 1) lo = std::min(lo, -f.slope), hi = std::max(hi, -f.slope);
    }
  }
  Outcome o;
  o.ok = lo >= 0.95 && hi <= 1.05;
  o.detail = Detail().add("exponent min", lo).add("max", hi).add("largest norm at lattice midpoints", worst_mid).str();
  return o;
}

// ------------------------------------------------------------- criterion 9

Outcome check_omega_uniformity(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("omega.csv", {"eps", "omega", "operator_norm", "probe_ratio", "residual", "kernel_singular_value",
                                   "warnings"});
  std::vector<double> all;
  double ref = std::numeric_limits<double>::quiet_NaN(), cont = 0;
  size_t smallest = 0;
  for (size_t i = 1; i < cfg.eps_grid.size(); ++i)
    if (cfg.eps_grid[i] < cfg.eps_grid[smallest]) smallest = i;
  Chart c{"omega.svg", "sup |||u|||_Y / |||F|||_X", "omega", "norm", false, false, {}};
  for (size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    const PeriodicSystem& sys = s.periodic(i);
    const PeriodicField F = periodic_probe(sys, cfg.seed, 2);
    const PeriodicSolve base = solve_Beps(F, sys);
    std::vector<std::pair<double, double>> pts;
    for (double w : cfg.omega_grid) {
      const PeriodicSolve sol = solve_Beps_omega(F, w, sys);
      const double norm = solution_operator_norm(w, sys);
      all.push_back(norm);
      pts.push_back({w, norm});
      t.add({sys.eps(), w, norm, sol.ratio_Y_X, sol.residual, kernel_singular_value(w, sys),
             double(sol.warnings.size())});
      if (w == 0) {
        cont = std::max(cont, sys.norm_eps(sol.u - base.u) / sys.norm_eps(base.u));
        if (i == smallest) ref = norm;
      }
    }
    c.series.push_back({"eps " + s6(sys.eps()), pts});
  }
  b.charts.push_back(c);
  if (std::isnan(ref)) ref = solution_operator_norm(0.0, s.periodic(smallest));
  const double spread = spread_ratio(all), top = max_of(all);
  Outcome o;
  o.ok = spread <= 2 && top <= 10 * ref && cont <= 1e-12;
  o.detail = Detail().add("max/min", spread).add("max", top).add("reference", ref).add("omega=0 vs direct", cont).str();
  return o;
}

// ------------------------------------------------------------ criterion 10

Outcome check_energy(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  const Params& p = cfg.params;
  const Truncation& tr = cfg.trunc;
  std::map<std::string, std::vector<double>> sup_by_row;
  std::vector<double> osc;
  Table& t = b.table("energy.csv", {"eps", "continuity_residual", "sandwich_lower", "sandwich_upper", "E1_equiv_lo",
                                    "E1_equiv_hi", "calibration_margin", "oscillation_C"});
  Table& ts = b.table("energy_constants.csv", {"eps", "row", "C_sup", "mode_j", "mode_k", "C_sampled"});
  double cont = 0;
  bool sandwich = true, sampled_ok = true, finite = true, calib = true;
  std::vector<std::string> row_names;
  for (const auto& cp : s.ac()) {
    const double beta = cp.a / s.inc().a;
    const Generator g(p, cp.eps, cp.R1c, tr, beta);
    EnergyConfig ec = EnergyConfig::with_beta(beta);
    ec.c0 = cfg.energy_c0, ec.c2 = cfg.energy_c2, ec.c3 = cfg.energy_c3;
    const auto sup = state_sup_constants(g, ec);
    const Field u0 = project_Q(random_field(p, tr, cfg.seed + 7), cp);
    TimeFourierForcing F;
    F.omega = s.inc().a;
    F.harmonics[2] = random_field(p, tr, cfg.seed + 99);
    F.harmonics[-2] = F.harmonics[2];
    const Trajectory traj = solve_ivp(g, u0, F, chebyshev_times(2 * kPi / s.inc().a, 65));
    const MarginReport rep = verify_energy_inequalities(traj, p, ec, cfg.C_cal);
    const double k1 = cp.gap;
    const double oc = scalar_oscillation_integral(g, u0, 0.9 * k1 / beta, 10 / k1) / energy_functionals(u0, cp.eps, p, ec).E;
    osc.push_back(oc);
    cont = std::max(cont, rep.continuity_residual);
    sandwich = sandwich && rep.sandwich_lower >= 0 && rep.sandwich_upper >= 0 && rep.E1_equiv_lo > 0;
    calib = calib && rep.calibration_margin >= 0 && !rep.failed;
    t.add({cp.eps, rep.continuity_residual, rep.sandwich_lower, rep.sandwich_upper, rep.E1_equiv_lo, rep.E1_equiv_hi,
           rep.calibration_margin, oc});
    row_names.clear();
    for (const auto& r : sup) {
      const double sampled = rep.row(r.name).C_star;
      finite = finite && std::isfinite(r.C_sup) && r.C_sup > 0;
      sampled_ok = sampled_ok && sampled <= r.C_sup * (1 + 1e-9) + 1e-12;
      sup_by_row[r.name].push_back(r.C_sup);
      row_names.push_back(r.name);
      ts.add({cp.eps, double(row_names.size() - 1), r.C_sup, double(r.j), double(r.k), sampled});
    }
  }
  Detail d;
  bool uniform = true;
  for (size_t i = 0; i < row_names.size(); ++i) {
    const double sp = spread_ratio(sup_by_row[row_names[i]]);
    uniform = uniform && sp <= 2;
    d.add(row_names[i] + " spread", sp);
    b.json["energy_rows"][std::to_string(i)] = row_names[i];
  }
  const double osc_spread = spread_ratio(osc);
  Outcome o;
  o.ok = cont <= cfg.tol.continuity && sandwich && calib && finite && sampled_ok && uniform && osc_spread <= 2;
  d.add("continuity", cont).add("oscillation spread", osc_spread);
  if (!sandwich) d.text("sandwich violated");
  if (!calib) d.text("calibration margin negative");
  if (!sampled_ok) d.text("sampled constant above state supremum");
  o.detail = d.str();
  return o;
}

// ------------------------------------------------------------ criterion 11

Outcome check_resolvent_probes(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  const Params& p = cfg.params;
  Table& th = b.table("resolvent_highfreq.csv", {"eps", "gamma", "operator_norm"});
  Table& tl = b.table("resolvent_lowfreq.csv", {"eps", "re_lambda", "im_lambda", "probe", "u_ratio", "phi_ratio"});
  std::vector<double> hf, lf;
  bool singular = false;
  for (const auto& cp : s.ac()) {
    const GapReport g = spectral_gap(p, cp.eps, cp.R1c, cfg.trunc, &cp);
    const auto grid = highfreq_gamma_grid(p, cp.eps, cp.R1c, cfg.trunc, cp.a);
    std::vector<double> norms(grid.size());
    parallel_for(static_cast<int>(grid.size()), [&](int i) {
      norms[i] = highfreq_operator_norm(p, cp.eps, cp.R1c, cfg.trunc, g.kappa1 / 2, grid[i]);
    });
    for (size_t i = 0; i < grid.size(); ++i) th.add({cp.eps, grid[i], norms[i]});
    hf.push_back(max_of(norms));
    const auto lgrid = lowfreq_grid(cp.eps, cp.a, g.kappa1);
    const Field F1 = unit_probe_field(p, cfg.trunc, cp.mode_c), F2 = random_field(p, cfg.trunc, cfg.seed + 7);
    double worst = 0;
    int probe = 0;
    for (const Field* F : {&F1, &F2}) {
      for (const auto& r : resolvent_probe_lowfreq(cp, lgrid, *F)) {
        singular = singular || r.singular;
        worst = std::max(worst, r.u_ratio);
        tl.add({cp.eps, r.lambda.real(), r.lambda.imag(), double(probe), r.u_ratio, r.phi_ratio});
      }
      ++probe;
    }
    lf.push_back(worst);
  }
  const double hf_ratio = max_of(hf) / median(hf), lf_spread = spread_ratio(lf);
  Outcome o;
  o.ok = hf_ratio <= 2 && lf_spread <= 2 && !singular;
  o.detail = Detail()
                 .add("high-freq max/median", hf_ratio)
                 .add("high-freq max", max_of(hf))
                 .add("low-freq max/min", lf_spread)
                 .add("low-freq max", max_of(lf))
                 .str();
  return o;
}

// ------------------------------------------------------------ criterion 12

Outcome check_stokes(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  const StokesSweep sw = stokes_sweep(cfg.params.alpha, cfg.stokes_n, cfg.seed);
  b.table("stokes.csv", {"n_max", "modes", "max_residual", "min_r1", "max_r1", "min_r2", "max_r2", "pure_pressure_v",
                         "pure_pressure_p", "solenoidal_p", "zero_data"})
      .add({double(sw.n_max), double(sw.count), sw.max_residual, sw.min_r1, sw.max_r1, sw.min_r2, sw.max_r2,
            sw.pure_pressure_v, sw.pure_pressure_p, sw.solenoidal_p, sw.zero_data});
  // Per mode |p| <= |f| + |g| mu^{-1/2} and sqrt(mu)|v| <= 2|g| mu^{-1/2} + |f|, so 3 bounds both ratios.
  const double C = 3.0;
  Outcome o;
  o.ok = sw.max_residual <= cfg.tol.stokes_residual && sw.max_r1 <= C && sw.max_r2 <= C &&
         sw.pure_pressure_v <= 1e-12 && sw.pure_pressure_p <= 1e-12 && sw.solenoidal_p <= 1e-12 && sw.zero_data == 0;
  o.detail = Detail()
                 .add("modes", sw.count)
                 .add("max residual", sw.max_residual)
                 .add("max r1", sw.max_r1)
                 .add("max r2", sw.max_r2)
                 .add("bound", C)
                 .str();
  return o;
}

// ------------------------------------------------------------ criterion 13

RunConfig determinism_config(const RunConfig& cfg) {
  RunConfig d = cfg;
  d.eps_grid = {0.1, 0.05, 0.025};
  d.omega_grid = {-0.25, 0.0, 0.25};
  d.trunc = {8, 8};
  d.M = 8;
  d.stokes_n = 8;
  d.threshold_samples = 10;
  return d;
}

namespace {

std::string render_all(const ReportBundle& b) {
  std::string out = render_json(b) + render_summary(b);
  for (const auto& [name, t] : b.tables) out += name + "\n" + t.to_csv();
  for (const auto& [name, body] : b.files) out += name + "\n" + body;
  return out;
}

// Scoped ACHOPF_THREADS override.
struct ThreadEnv {
  std::optional<std::string> saved;
  explicit ThreadEnv(const char* value) {
    if (const char* v = std::getenv("ACHOPF_THREADS")) saved = v;
    setenv("ACHOPF_THREADS", value, 1);
  }
  ~ThreadEnv() {
    if (saved)
      setenv("ACHOPF_THREADS", saved->c_str(), 1);
    else
      unsetenv("ACHOPF_THREADS");
  }
};

}  // namespace

Outcome check_determinism(Session& s, ReportBundle& b) {
  const RunConfig d = determinism_config(s.config());
  const std::vector<std::string> subs{"critical", "periodic", "energy", "stokes-check"};
  Outcome o;
  Detail det;
  size_t bytes = 0;
  for (const auto& name : subs) {
    const std::string first = render_all(run_subcommand(name, d));
    std::string second;
    {
      ThreadEnv one("1");
      second = render_all(run_subcommand(name, d));
    }
    const bool same = first == second;
    bytes += first.size();
    o.ok = o.ok && same;
    if (!same) det.text(name + " differs");
  }
  det.add("bytes compared", bytes).text("second run single-threaded");
  o.detail = det.str();
  b.json["determinism"] = {{"subcommands", subs}, {"bytes", bytes}, {"identical", o.ok}};
  return o;
}

// ----------------------------------------------------------------- branch

Outcome check_branch(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& t = b.table("branch.csv", {"eps", "eta", "re_lambda", "im_lambda"});
  std::vector<const CriticalPoint*> cps{&s.inc()};
  for (const auto& c : s.ac()) cps.push_back(&c);
  std::vector<double> eta = cfg.eta_grid;
  std::sort(eta.begin(), eta.end());
  eta.erase(std::unique(eta.begin(), eta.end()), eta.end());
  bool ok = true;
  double at_zero = 0;
  for (const CriticalPoint* cp : cps) {
    std::vector<double> abs_eta;
    for (double e : eta) abs_eta.push_back(e * cp->R1c);
    const auto vals = eigenpair_branch(*cp, abs_eta);
    for (size_t i = 0; i < eta.size(); ++i) {
      t.add({cp->eps, abs_eta[i], vals[i].real(), vals[i].imag()});
      if (eta[i] == 0)
        at_zero = std::max(at_zero, std::abs(vals[i].real()) / std::abs(vals[i]));
      else if ((vals[i].real() > 0) != (eta[i] > 0))
        ok = false;
    }
  }
  Outcome o;
  o.ok = ok && at_zero <= 1e-9;
  o.detail = Detail().text(ok ? "Re lambda changes sign with eta" : "no clean crossing").add("|Re|/|lambda| at eta=0", at_zero).str();
  return o;
}

// ------------------------------------------------------------- pipelines

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"critical", "sweep-eps", "branch", "gap",          "resolvent",
                                          "decay",    "energy",    "periodic", "stokes-check", "acceptance"};
  return v;
}

namespace {

void critical_table(Session& s, ReportBundle& b) {
  Table& t = b.table("critical.csv", {"eps", "R1c", "a", "mode_j", "mode_k", "re_transversality", "im_transversality",
                                      "gap", "discarded_bound"});
  auto row = [&](const CriticalPoint& cp) {
    t.add({cp.eps, cp.R1c, cp.a, double(cp.mode_c.j), double(cp.mode_c.k), cp.transversality.real(),
           cp.transversality.imag(), cp.gap, cp.discarded_bound});
    nlohmann::ordered_json j;
    j["regime"] = cp.regime == Regime::INC ? "INC" : "AC";
    j["eps"] = cp.eps;
    j["R1c"] = cp.R1c;
    j["a"] = cp.a;
    j["mode"] = {cp.mode_c.j, cp.mode_c.k};
    j["lambda_plus"] = to_json(cp.lambda_plus);
    j["transversality"] = to_json(cp.transversality);
    j["gap"] = cp.gap;
    j["truncation_ok"] = cp.truncation_ok;
    auto vec = nlohmann::ordered_json::array();
    for (int c = 0; c < cp.u_plus.coeffs.size(); ++c) vec.push_back(to_json(cp.u_plus.coeffs[c]));
    j["u_plus"] = vec;
    b.json["critical_points"].push_back(j);
  };
  row(s.inc());
  for (const auto& cp : s.ac()) row(cp);
}

void periodic_extras(Session& s, ReportBundle& b) {
  const RunConfig& cfg = s.config();
  Table& tm = b.table("monodromy.csv", {"eps", "re_mu", "im_mu", "omega", "inv_norm", "bound_ratio"});
  Table& tf = b.table("fixed_point.csv", {"eps", "re_lambda", "im_lambda", "neumann_ratio", "expected_ratio"});
  std::vector<double> inv;
  double worst_fp = 1;
  bool rejects = true;
  for (size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    const PeriodicSystem& sys = s.periodic(i);
    for (double w : {-0.25, 0.0, 0.25}) {
      const MonodromyProbe mp = monodromy_resolvent_probe(2.0, w, cfg.monodromy_r, sys);
      tm.add({sys.eps(), 2.0, 0.0, w, mp.inv_norm, mp.bound_ratio});
      if (w == 0) inv.push_back(mp.inv_norm);
      try {
        monodromy_resolvent_probe(std::exp(cplx(0, 2 * kPi / (1 + w))), w, cfg.monodromy_r, sys);
        rejects = false;
      } catch (const InvalidInput&) {
      }
    }
    const Field F = project_Q(random_field(cfg.params, cfg.trunc, cfg.seed + 5), sys.critical());
    for (cplx lam : {cplx(0, 0), cplx(0.5, 0.3), cplx(5, 0)}) {
      const FixedPointResult fp = fixed_point_solve(lam, F, sys);
      if (fp.neumann_checked) {
        const double q = fp.neumann_ratio / fp.expected_ratio;
        worst_fp = std::max({worst_fp, q, 1 / q});
      }
      tf.add({sys.eps(), lam.real(), lam.imag(), fp.neumann_ratio, fp.expected_ratio});
    }
  }
  b.check(0, "monodromy_probe", rejects && spread_ratio(inv) <= 2,
          Detail().add("mu=2 inverse max/min over eps", spread_ratio(inv)).text(rejects ? "critical multipliers rejected" : "critical multiplier accepted").str());
  b.check(0, "fixed_point_neumann", worst_fp <= 2, Detail().add("worst measured/expected ratio factor", worst_fp).str());
}

void add(ReportBundle& b, int id, const std::string& name, const std::function<Outcome()>& fn) {
  try {
    const Outcome o = fn();
    b.check(id, name, o.ok, o.detail);
  } catch (const std::exception& e) {
    b.check(id, name, false, std::string("error: ") + e.what());
  }
}

}  // namespace

ReportBundle run_subcommand(const std::string& name, const RunConfig& cfg) {
  if (std::find(subcommands().begin(), subcommands().end(), name) == subcommands().end())
    throw InvalidInput("unknown subcommand '" + name + "'");
  Session s(cfg);
  ReportBundle b;
  b.subcommand = name;
  b.json["config"] = config_to_text(cfg);
  auto run = [&](int id, const std::string& n, Outcome (*fn)(Session&, ReportBundle&)) {
    add(b, id, n, [&] { return fn(s, b); });
  };
  if (name == "critical") {
    add(b, 0, "critical_points", [&] {
      critical_table(s, b);
      return Outcome{true, "INC and " + std::to_string(s.ac().size()) + " compressible points"};
    });
    run(1, "threshold_oracle", check_threshold_oracle);
    run(2, "classical_limit", check_classical_limit);
    run(4, "transversality", check_transversality);
    run(5, "structure_identities", check_structure_identities);
  } else if (name == "sweep-eps") {
    run(3, "singular_limit_rates", check_singular_limit_rates);
  } else if (name == "branch") {
    run(0, "branch_crossing", check_branch);
  } else if (name == "gap") {
    run(6, "uniform_gap.kappa1", check_gap);
  } else if (name == "decay") {
    run(6, "uniform_gap.decay", check_decay);
  } else if (name == "resolvent") {
    run(11, "resolvent_probes", check_resolvent_probes);
  } else if (name == "energy") {
    run(10, "energy_machinery", check_energy);
  } else if (name == "periodic") {
    run(7, "periodic_solvability", check_periodic_solvability);
    run(8, "semisimplicity", check_semisimplicity);
    run(9, "omega_uniformity", check_omega_uniformity);
    add(b, 0, "periodic_extras", [&] {
      periodic_extras(s, b);
      return Outcome{true, "monodromy and fixed-point tables written"};
    });
  } else if (name == "stokes-check") {
    run(12, "stokes", check_stokes);
  } else {
    run(1, "threshold_oracle", check_threshold_oracle);
    run(2, "classical_limit", check_classical_limit);
    run(3, "singular_limit_rates", check_singular_limit_rates);
    run(4, "transversality", check_transversality);
    run(5, "structure_identities", check_structure_identities);
    add(b, 6, "uniform_gap", [&] {
      const Outcome g = check_gap(s, b), d = check_decay(s, b);
      return Outcome{g.ok && d.ok, g.detail + "; " + d.detail};
    });
    run(7, "periodic_solvability", check_periodic_solvability);
    run(8, "semisimplicity", check_semisimplicity);
    run(9, "omega_uniformity", check_omega_uniformity);
    run(10, "energy_machinery", check_energy);
    run(11, "resolvent_probes", check_resolvent_probes);
    run(12, "stokes", check_stokes);
    run(13, "determinism", check_determinism);
  }
  return b;
}

}  // namespace achopf
