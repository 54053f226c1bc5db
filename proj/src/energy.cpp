#include "achopf/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace achopf {

namespace {

// Per-component weight of the eps inner product.
double w_eps(Component c, double eps, double Pr) {
  switch (c) {
    case Component::Phi: return eps * eps;
    case Component::W1:
    case Component::W2: return 1.0 / Pr;
    default: return 1.0;
  }
}

bool is_w(Component c) { return c == Component::W1 || c == Component::W2; }

// Every per-sample quantity the inequalities need, summed over modes.
struct Sample {
  double n2 = 0, dn2 = 0;             // |||u|||^2 and its time derivative
  double D = 0, dD = 0;
  double cpl = 0, dcpl = 0;           // Re(phi, div w)
  double phi2 = 0;
  double n2x1 = 0, dn2x1 = 0;         // |||d_x1 u|||^2
  double phix2 = 0, dphix2 = 0;       // ||d_x2 phi||^2
  double Dx1 = 0;                     // D(d_x1 u)
  double nx2 = 0;                     // |||d_x u|||^2
  double nt2 = 0;                     // |||d_t u|||^2
  double uxx2 = 0;                    // ||d_x^2 u||^2 (fluid)
  double phixt2 = 0;                  // ||d_x d_t phi||^2
  double phix1t2 = 0, phix2t2 = 0;    // ||d_t d_x1 phi||^2, ||d_t d_x2 phi||^2
  double th2 = 0, ps2 = 0;
  double Fu = 0;                      // Re(F, u)_eps
  double fx1phix1 = 0;                // Re(d_x1 f, d_x1 phi)
  double f2 = 0, fx2 = 0, fx1_2 = 0, fx2_2 = 0;
  double F2eps = 0;                   // |||F|||^2
  double Ffl2 = 0;                    // ||F||_2^2 fluid
  double Fdual2 = 0;                  // ||F||_{(X1)*}^2
  double g2 = 0;                      // ||g||^2
  double u2 = 0;                      // ||u||_2^2 fluid
  double divw2 = 0;
  double wt2 = 0;                     // ||d_t w||^2
  double phit2 = 0, phitx2 = 0;       // ||d_t phi||^2, ||d_x d_t phi||^2
  double ut2 = 0;                     // ||d_t u||_2^2 fluid
  double phix2_full = 0;              // ||d_x phi||^2
  double res_cont = 0, scale_cont = 0;
};

void accumulate_mode(Sample& s, const ModeVector& x, const CVec& v, const CVec& f, double eps,
                     const Params& p, double beta) {
  const double Pr = p.Pr;
  const Mode& m = x.mode;
  const double a2 = m.a * m.a, b2 = m.b * m.b, mu = m.mu;
  cplx phi = 0, dphi = 0, fphi = 0, divw = 0, ddivw = 0;
  for (size_t c = 0; c < x.comps.size(); ++c) {
    const Component k = x.comps[c];
    const double nu = x.basis_norms[c];
    const cplx xc = x.coeffs[c], vc = v[c], fc = f[c];
    const double we = w_eps(k, eps, Pr) * nu;
    s.n2 += we * std::norm(xc);
    s.dn2 += 2 * we * std::real(vc * std::conj(xc));
    s.n2x1 += a2 * we * std::norm(xc);
    s.dn2x1 += 2 * a2 * we * std::real(vc * std::conj(xc));
    s.nx2 += mu * we * std::norm(xc);
    s.nt2 += we * std::norm(vc);
    s.Fu += we * std::real(fc * std::conj(xc));
    s.F2eps += we * std::norm(fc);
    if (k == Component::Phi) {
      phi = xc, dphi = vc, fphi = fc;
      s.phi2 += nu * std::norm(xc);
      s.phix2 += b2 * nu * std::norm(xc);
      s.dphix2 += 2 * b2 * nu * std::real(vc * std::conj(xc));
      s.phix2_full += mu * nu * std::norm(xc);
      s.phixt2 += mu * nu * std::norm(vc);
      s.phix1t2 += a2 * nu * std::norm(vc);
      s.phix2t2 += b2 * nu * std::norm(vc);
      s.phit2 += nu * std::norm(vc);
      s.phitx2 += mu * nu * std::norm(vc);
      s.fx1phix1 += a2 * nu * std::real(fc * std::conj(xc));
      s.f2 += nu * std::norm(fc);
      s.fx2 += mu * nu * std::norm(fc);
      s.fx1_2 += a2 * nu * std::norm(fc);
      s.fx2_2 += b2 * nu * std::norm(fc);
      continue;
    }
    const double dw = (k == Component::Psi ? p.d : 1.0) * mu * nu;
    s.D += dw * std::norm(xc);
    s.dD += 2 * dw * std::real(vc * std::conj(xc));
    s.Dx1 += a2 * dw * std::norm(xc);
    s.uxx2 += mu * mu * nu * std::norm(xc);
    const double wl = w_eps(k, eps, Pr) * nu;  // L2 with 1/Pr on w
    s.u2 += wl * std::norm(xc);
    s.ut2 += wl * std::norm(vc);
    s.Ffl2 += wl * std::norm(fc);
    s.Fdual2 += w_eps(k, eps, Pr) * nu * std::norm(fc) / mu;
    if (k == Component::Theta) s.th2 += nu * std::norm(xc);
    if (k == Component::Psi) s.ps2 += nu * std::norm(xc);
    if (is_w(k)) {
      s.g2 += nu * std::norm(fc);
      s.wt2 += nu * std::norm(vc);
      const double sym = k == Component::W1 ? m.a : m.b;
      divw += sym * xc;
      ddivw += sym * vc;
    }
  }
  if (m.kind == ModeKind::Full || m.kind == ModeKind::Acoustic) {
    const double nu = x.basis_norms[0];
    s.cpl += nu * std::real(phi * std::conj(divw));
    s.dcpl += nu * std::real(dphi * std::conj(divw) + phi * std::conj(ddivw));
    s.divw2 += nu * std::norm(divw);
    // beta eps^2 phi_t + div w = eps^2 f on this mode
    const cplx r = beta * eps * eps * dphi + divw - eps * eps * fphi;
    s.res_cont = std::max(s.res_cont, std::abs(r));
    s.scale_cont = std::max({s.scale_cont, std::abs(divw), eps * eps * std::abs(fphi),
                             beta * eps * eps * std::abs(dphi)});
  }
}

Sample evaluate(const Field& u, const Field& du, const Field& F, double eps, const Params& p,
                double beta) {
  Sample s;
  for (size_t i = 0; i < u.modes.size(); ++i)
    accumulate_mode(s, u.modes[i], du.modes[i].coeffs, F.modes[i].coeffs, eps, p, beta);
  return s;
}

struct Ratio {
  double C = -std::numeric_limits<double>::infinity();
  double t = 0, lhs = 0, br = 0;
  bool failed = false;
  void add(double lhs_, double br_, double time) {
    double r;
    if (br_ > 0) r = lhs_ / br_;
    else if (lhs_ > 0) {
      failed = true;
      r = std::numeric_limits<double>::infinity();
    } else r = 0;
    if (r > C) C = r, t = time, lhs = lhs_, br = br_;
  }
};

double energy_E(const Sample& s, double eps, const EnergyConfig& c) {
  const double e2 = eps * eps;
  return c.beta * s.n2 + c.c1 * e2 * (s.D - 2 * s.cpl) + c.c0 * c.beta * e2 * s.n2x1 +
         c.c2 * c.beta * e2 * e2 * s.phix2;
}

double energy_dE(const Sample& s, double eps, const EnergyConfig& c) {
  const double e2 = eps * eps;
  return c.beta * s.dn2 + c.c1 * e2 * (s.dD - 2 * s.dcpl) + c.c0 * c.beta * e2 * s.dn2x1 +
         c.c2 * c.beta * e2 * e2 * s.dphix2;
}

double lhs_assembled(const Sample& s, double eps, const EnergyConfig& c) {
  const double e2 = eps * eps, b2 = c.beta * c.beta;
  return energy_dE(s, eps, c) +
         c.diss_weight() * (s.nx2 + b2 * e2 * s.nt2 + e2 * s.uxx2 + b2 * e2 * e2 * e2 * s.phixt2);
}

double bracket_assembled(const Sample& s, double eps) {
  const double e2 = eps * eps;
  return std::abs(s.Fu) + e2 * e2 * std::abs(s.fx1phix1) + e2 * s.F2eps + e2 * e2 * e2 * s.fx2 +
         s.th2 + s.ps2;
}

struct InequalityDef {
  const char* name;
  bool quadratic;  // both sides are Hermitian forms in (u, F)
  std::function<double(const Sample&)> lhs, bracket;
};

std::vector<InequalityDef> inequality_table(double eps, const EnergyConfig& cfg) {
  const double beta = cfg.beta, e2 = eps * eps, e4 = e2 * e2, b2 = beta * beta, c = cfg.c_small;
  std::vector<InequalityDef> d;
  d.push_back({"basic_energy", true,
               [=](const Sample& s) { return beta * s.dn2 + s.D - 2 * s.Fu; },
               [=](const Sample& s) { return s.th2 + s.ps2; }});
  d.push_back({"tangential_energy", true,
               [=](const Sample& s) {
                 return beta * s.dn2x1 + s.Dx1 + c * b2 * e4 * s.phix1t2 - 2 * e2 * s.fx1phix1;
               },
               [=](const Sample& s) { return e4 * s.fx1_2 + s.Ffl2 + s.u2; }});
  d.push_back({"dissipation_rate", true,
               [=](const Sample& s) { return beta * (s.dD - 2 * s.dcpl) + b2 * s.nt2; },
               [=](const Sample& s) { return s.divw2 / e2 + s.F2eps + s.u2; }});
  d.push_back({"vertical_pressure", true,
               [=](const Sample& s) { return beta * e2 * s.dphix2 + s.phix2 + c * b2 * e4 * s.phix2t2; },
               [=](const Sample& s) { return e4 * s.fx2_2 + s.g2 + s.Dx1 + b2 * s.wt2 + s.u2; }});
  d.push_back({"elliptic", true, [=](const Sample& s) { return s.phix2_full + s.uxx2; },
               [=](const Sample& s) {
                 return e4 * (s.f2 + s.fx2) + s.Ffl2 + b2 * e4 * (s.phit2 + s.phitx2) + b2 * s.ut2 + s.u2;
               }});
  d.push_back({"assembled", false, [=](const Sample& s) { return lhs_assembled(s, eps, cfg); },
               [=](const Sample& s) { return bracket_assembled(s, eps); }});
  d.push_back({"assembled_dual", true, [=](const Sample& s) { return lhs_assembled(s, eps, cfg); },
               [=](const Sample& s) {
                 return e2 * s.f2 + s.Fdual2 + e2 * s.Ffl2 + e2 * e4 * s.fx2 + s.th2 + s.ps2;
               }});
  return d;
}

// Hermitian matrices of lhs and bracket in z = (u, F) on one mode, by polarization.
void mode_forms(const Generator& g, int i, const InequalityDef& def, CMat& L, CMat& B) {
  const Mode& m = g.mode(i);
  const CMat& M = g.block(i);
  const int n = static_cast<int>(M.rows());
  ModeVector x = make_mode_vector(m, m.components(), g.params().alpha);
  auto eval = [&](const CVec& z, double& l, double& b) {
    x.coeffs = z.head(n);
    const CVec f = z.tail(n);
    const CVec v = (M * x.coeffs + f) / g.beta();
    Sample s;
    accumulate_mode(s, x, v, f, g.eps(), g.params(), g.beta());
    l = def.lhs(s);
    b = def.bracket(s);
  };
  const int N = 2 * n;
  L = CMat::Zero(N, N);
  B = CMat::Zero(N, N);
  for (int a = 0; a < N; ++a) {
    CVec z = CVec::Zero(N);
    z[a] = 1;
    double l, b;
    eval(z, l, b);
    L(a, a) = l;
    B(a, a) = b;
  }
  for (int a = 0; a < N; ++a)
    for (int c = a + 1; c < N; ++c) {
      CVec z = CVec::Zero(N);
      z[a] = 1;
      z[c] = 1;
      double l1, b1, l2, b2;
      eval(z, l1, b1);
      z[c] = cplx(0, 1);
      eval(z, l2, b2);
      const cplx lac(0.5 * (l1 - L(a, a).real() - L(c, c).real()),
                     -0.5 * (l2 - L(a, a).real() - L(c, c).real()));
      const cplx bac(0.5 * (b1 - B(a, a).real() - B(c, c).real()),
                     -0.5 * (b2 - B(a, a).real() - B(c, c).real()));
      L(a, c) = lac, L(c, a) = std::conj(lac);
      B(a, c) = bac, B(c, a) = std::conj(bac);
    }
}

// Smallest C >= 0 with C B - L positive semidefinite; infinity if none below 1e12.
double pencil_sup(CMat L, CMat B) {
  const int N = static_cast<int>(L.rows());
  RVec dsc(N);
  for (int a = 0; a < N; ++a) {
    const double s = std::abs(B(a, a)) + std::abs(L(a, a));
    dsc[a] = s > 0 ? 1 / std::sqrt(s) : 1.0;
  }
  const auto D = dsc.cast<cplx>().asDiagonal();
  L = D * L * D;
  B = D * B * D;
  const double tol = 1e-10 * std::max({1.0, L.norm(), B.norm()});
  auto feasible = [&](double C) {
    Eigen::SelfAdjointEigenSolver<CMat> es(C * B - L, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0] >= -tol * std::max(1.0, C);
  };
  if (feasible(0)) return 0;
  double hi = 1;
  while (!feasible(hi)) {
    hi *= 2;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  double lo = hi / 2;
  if (hi == 1) lo = 0;
  for (int it = 0; it < 60 && hi - lo > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

EnergyValues energy_functionals(const Field& u, double eps, const Params& p, const EnergyConfig& cfg) {
  Field zero = u;
  for (auto& mv : zero.modes) mv.coeffs.setZero();
  const Sample s = evaluate(u, zero, zero, eps, p, cfg.beta);
  EnergyValues e;
  e.D = s.D;
  e.coupling = s.cpl;
  e.D1 = s.D - 2 * s.cpl;
  e.D2 = s.n2x1;
  e.phi_sq = s.phi2;
  e.E1 = cfg.beta * s.n2 + cfg.c1 * eps * eps * e.D1;
  e.E = energy_E(s, eps, cfg);
  return e;
}

const InequalityMargin& MarginReport::row(const std::string& n) const {
  for (const auto& r : rows)
    if (r.name == n) return r;
  throw InvalidInput("margin report has no row " + n);
}

MarginReport verify_energy_inequalities(const Trajectory& tr, const Params& p, const EnergyConfig& cfg,
                                        double C_cal) {
  if (tr.states.empty()) throw InvalidInput("verify_energy_inequalities: empty trajectory");
  const double eps = tr.eps, beta = cfg.beta, e2 = eps * eps;
  if (std::abs(beta - tr.beta) > 1e-14 * beta)
    throw InvalidInput("verify_energy_inequalities: config beta differs from trajectory beta");

  const auto defs = inequality_table(eps, cfg);
  std::vector<Ratio> ratios(defs.size());
  MarginReport rep;
  rep.sandwich_lower = rep.sandwich_upper = std::numeric_limits<double>::infinity();
  rep.E1_equiv_lo = std::numeric_limits<double>::infinity();
  rep.E1_equiv_hi = 0;
  rep.calibration_margin = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < tr.states.size(); ++k) {
    const double t = tr.times[k];
    const Sample s = evaluate(tr.states[k], tr.rates[k], tr.forcing[k], eps, p, beta);
    for (size_t r = 0; r < defs.size(); ++r) ratios[r].add(defs[r].lhs(s), defs[r].bracket(s), t);
    const double L = lhs_assembled(s, eps, cfg);
    const double Basm = bracket_assembled(s, eps);
    rep.calibration_margin =
        std::min(rep.calibration_margin, (C_cal * Basm - L) / std::max(std::abs(L), 1e-300));

    if (s.scale_cont > 0) rep.continuity_residual = std::max(rep.continuity_residual, s.res_cont / s.scale_cont);
    const double D1 = s.D - 2 * s.cpl;
    rep.sandwich_lower = std::min(rep.sandwich_lower, D1 - (0.5 * s.D - 8 * s.phi2));
    rep.sandwich_upper = std::min(rep.sandwich_upper, (1.5 * s.D + 8 * s.phi2) - D1);
    const double ref = beta * (s.n2 + e2 * s.D);
    if (ref > 0) {
      const double E1 = beta * s.n2 + cfg.c1 * e2 * D1;
      rep.E1_equiv_lo = std::min(rep.E1_equiv_lo, E1 / ref);
      rep.E1_equiv_hi = std::max(rep.E1_equiv_hi, E1 / ref);
    }
  }
  for (size_t r = 0; r < defs.size(); ++r) {
    rep.rows.push_back({defs[r].name, ratios[r].C, ratios[r].t, ratios[r].lhs, ratios[r].br});
    rep.failed |= ratios[r].failed;
  }
  return rep;
}

EnergyConfig calibrate_energy(const std::vector<Trajectory>& cal, const Params& p, EnergyConfig cfg,
                              double C_cal, int max_halvings) {
  for (int h = 0; h <= max_halvings; ++h) {
    bool ok = true;
    for (const auto& tr : cal)
      if (verify_energy_inequalities(tr, p, cfg, C_cal).calibration_margin < 0) ok = false;
    if (ok) return cfg;
    cfg.c0 *= 0.5;
    cfg.c2 *= 0.5;
    cfg.c3 *= 0.5;
  }
  throw NumericalFailure("calibrate_energy: assembled-estimate margin stays negative after halving");
}


std::vector<StateSup> state_sup_constants(const Generator& g, const EnergyConfig& cfg) {
  if (std::abs(cfg.beta - g.beta()) > 1e-14 * cfg.beta)
    throw InvalidInput("state_sup_constants: config beta differs from generator beta");
  const auto defs = inequality_table(g.eps(), cfg);
  std::vector<StateSup> out;
  for (const auto& def : defs) {
    if (!def.quadratic) continue;
    std::vector<double> per(g.size());
    parallel_for(g.size(), [&](int i) {
      CMat L, B;
      mode_forms(g, i, def, L, B);
      per[i] = pencil_sup(L, B);
    });
    StateSup r;
    r.name = def.name;
    for (int i = 0; i < g.size(); ++i)
      if (per[i] > r.C_sup) r.C_sup = per[i], r.j = g.mode(i).j, r.k = g.mode(i).k;
    out.push_back(r);
  }
  return out;
}

}  // namespace achopf
