#include "achopf/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "achopf/blockops.hpp"

namespace achopf {

namespace {

std::string label(const Mode& m) {
  std::ostringstream os;
  os << "(" << m.j << "," << m.k << ")";
  return os.str();
}

double max_re(const std::vector<cplx>& v) {
  double r = -std::numeric_limits<double>::infinity();
  for (cplx z : v) r = std::max(r, z.real());
  return r;
}

// Five-component image of an incompressible (w2, theta, psi) vector.
ModeVector embed_inc(const Mode& m, const CVec& red, cplx lam, const Params& p, bool adjoint) {
  ModeVector v = make_mode_vector(m, p.alpha);
  const cplx w2 = red[0];
  const cplx w1 = -(m.b / m.a) * w2;
  const cplx phi = adjoint ? -(std::conj(lam) + p.Pr * m.mu) * w1 / (p.Pr * m.a)
                           : (lam + p.Pr * m.mu) * w1 / (p.Pr * m.a);
  v.coeffs << phi, w1, w2, red[1], red[2];
  return v;
}

ModeVector conj_vec(ModeVector v) {
  v.coeffs = v.coeffs.conjugate();
  return v;
}

// Unit fluid norm with real positive theta, then biorthogonal in (.,.)_eps,
// then a real rescaling that equalizes the fluid norms of the pair.
void balance_pair(ModeVector& v, ModeVector& us, double eps, double Pr) {
  v.coeffs /= fluid_norm(v, Pr);
  const cplx th = v.get(Component::Theta);
  if (std::abs(th) > 0) v.coeffs *= std::abs(th) / th;
  const cplx ip = inner_product_eps(v, us, eps, Pr);
  if (std::abs(ip) == 0) throw NumericalFailure("critical eigenpair: left and right vectors are orthogonal");
  us.coeffs /= std::conj(ip);
  const double s = std::sqrt(fluid_norm(us, Pr) / fluid_norm(v, Pr));
  v.coeffs *= s;
  us.coeffs /= s;
}

// Weighted pairing sum_c w_c nu_c x_c conj(y_c) for raw coefficient vectors.
cplx weighted_pair(const CVec& x, const CVec& y, const RVec& wnu) {
  cplx s = 0;
  for (int i = 0; i < x.size(); ++i) s += wnu[i] * x[i] * std::conj(y[i]);
  return s;
}

RVec weight_times_norm(const Mode& m, const std::vector<Component>& comps, const Params& p,
                       double eps) {
  RVec w = weight_diagonal(m, comps, p, eps);
  for (int i = 0; i < w.size(); ++i) w[i] *= m.basis_norm(comps[i], p.alpha);
  return w;
}

CMat block_for(const Mode& m, const Params& p, double R1, double eps) {
  if (eps > 0) return assemble(m, Operator::AC, p, R1, eps).entries;
  return assemble(m, Operator::INC, p, R1).entries;
}

// Indices of the two eigenvalues of the critical block closest to +-ia.
std::pair<int, int> crossing_pair(const std::vector<cplx>& vals, double a) {
  int ip = 0, im = 0;
  double dp = 1e300, dm = 1e300;
  for (int i = 0; i < static_cast<int>(vals.size()); ++i) {
    const double ep = std::abs(vals[i] - cplx(0, a)), em = std::abs(vals[i] - cplx(0, -a));
    if (ep < dp) dp = ep, ip = i;
    if (em < dm) dm = em, im = i;
  }
  return {ip, im};
}

double rest_gap(const CriticalPoint& cp) {
  double gap = std::numeric_limits<double>::infinity();
  for (const Mode& m : truncated_modes(cp.params.alpha, cp.trunc)) {
    if (cp.regime == Regime::INC && m.kind == ModeKind::Acoustic) continue;
    auto vals = eigenvalues(block_for(m, cp.params, cp.R1c, cp.eps), "gap block");
    if (m == cp.mode_c) {
      auto [ip, im] = crossing_pair(vals, cp.a);
      for (int i = 0; i < static_cast<int>(vals.size()); ++i)
        if (i != ip && i != im) gap = std::min(gap, -vals[i].real());
    } else {
      for (cplx z : vals) gap = std::min(gap, -z.real());
    }
  }
  return gap;
}

// Numerical-range bound on the abscissa of an incompressible block with
// Laplacian symbol mu: the symmetric part in the weighted frame couples
// w2 and theta only, with strength at most sqrt(Pr) R1.
double numerical_range_bound(const Params& p, double R1, double mu) {
  const double h = 0.5 * (p.Pr - 1.0) * mu;
  return std::max(-p.d * mu, -0.5 * (p.Pr + 1.0) * mu + std::sqrt(h * h + p.Pr * R1 * R1));
}

void set_discarded_bound(CriticalPoint& cp) {
  const Params& p = cp.params;
  const Truncation& t = cp.trunc;
  if (cp.regime == Regime::INC) {
    const double aj = p.alpha * (t.j_max + 1), bk = M_PI * (t.k_max + 1);
    const double mu_min = std::min(aj * aj, bk * bk);
    cp.discarded_bound = numerical_range_bound(p, cp.R1c, mu_min);
  } else {
    // The phi direction has no dissipation, so no such bound is available;
    // sample the first two shells of discarded modes instead.
    double b = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= t.j_max + 2; ++j)
      for (int k = 0; k <= t.k_max + 2; ++k) {
        if (j <= t.j_max && k <= t.k_max) continue;
        const Mode m = make_mode(j, k, p.alpha);
        b = std::max(b, max_re(eigenvalues(block_for(m, p, cp.R1c, cp.eps), "discarded block")));
      }
    cp.discarded_bound = b;
  }
  cp.truncation_ok = cp.discarded_bound < 0;
}

}  // namespace

double fluid_norm(const ModeVector& u, double Pr) {
  return std::sqrt(std::max(0.0, inner_product_eps(u, u, 0.0, Pr).real()));
}

OscillatoryThreshold inc_oscillatory_threshold(const Params& p, const Mode& m) {
  p.validate();
  if (m.kind != ModeKind::Full)
    throw InvalidInput("oscillatory threshold needs a full mode, got " + label(m));
  const double mu = m.mu, q = m.a * m.a / mu;
  const double s = p.Pr * mu, t = mu, u = p.d * mu;
  const double R2s = p.R2 * p.R2;
  OscillatoryThreshold out;
  out.R1_sq = ((s + t + u) * (s * t + s * u + t * u) - s * t * u + p.Pr * q * R2s * (s + u)) /
              (p.Pr * q * (s + t));
  out.a_sq = s * t + s * u + t * u - p.Pr * q * (out.R1_sq - R2s);
  out.oscillatory = out.a_sq > 0;
  return out;
}

double inc_stationary_threshold(const Params& p, const Mode& m) {
  p.validate();
  if (m.kind != ModeKind::Full)
    throw InvalidInput("stationary threshold needs a full mode, got " + label(m));
  return m.mu * m.mu * m.mu / (m.a * m.a) + p.R2 * p.R2 / p.d;
}

CMat critical_block(const CriticalPoint& cp, double R1) {
  return block_for(cp.mode_c, cp.params, R1, cp.regime == Regime::AC ? cp.eps : 0.0);
}

double spectral_abscissa(const Params& p, double eps, double R1, const Truncation& t) {
  double g = -std::numeric_limits<double>::infinity();
  for (const Mode& m : truncated_modes(p.alpha, t)) {
    if (eps == 0 && m.kind == ModeKind::Acoustic) continue;
    g = std::max(g, max_re(eigenvalues(block_for(m, p, R1, eps), "abscissa block")));
  }
  return g;
}

CriticalPoint find_inc_critical(const Params& p, const Truncation& t) {
  p.validate();
  if (!p.hopf_admissible())
    throw InvalidInput("find_inc_critical: Hopf structure needs Pr > 1 and 0 < d < 1");
  if (t.j_max < 1 || t.k_max < 1) throw InvalidInput("find_inc_critical: truncation has no full modes");

  double best = std::numeric_limits<double>::infinity(), best_a2 = 0;
  double stat_min = std::numeric_limits<double>::infinity();
  Mode best_mode;
  std::vector<Mode> ties;
  for (int j = 1; j <= t.j_max; ++j)
    for (int k = 1; k <= t.k_max; ++k) {
      const Mode m = make_mode(j, k, p.alpha);
      stat_min = std::min(stat_min, inc_stationary_threshold(p, m));
      const auto th = inc_oscillatory_threshold(p, m);
      if (!th.oscillatory) continue;
      if (th.R1_sq < best * (1 - 1e-12)) {
        best = th.R1_sq;
        best_a2 = th.a_sq;
        best_mode = m;
        ties.clear();
      } else if (th.R1_sq <= best * (1 + 1e-12)) {
        ties.push_back(m);  // later in scan order, so larger j or same j larger k
      }
    }
  if (!std::isfinite(best)) throw InvalidInput("find_inc_critical: no oscillatory window at these params");
  if (best >= stat_min) throw InvalidInput("find_inc_critical: steady onset preempts Hopf");
  if (best_mode.j == t.j_max || best_mode.k == t.k_max)
    throw InvalidInput("find_inc_critical: critical mode " + label(best_mode) +
                       " lies on the truncation boundary");

  CriticalPoint cp;
  cp.regime = Regime::INC;
  cp.params = p;
  cp.trunc = t;
  cp.R1c = std::sqrt(best);
  cp.a = std::sqrt(best_a2);
  cp.mode_c = best_mode;
  cp.degenerate = !ties.empty();
  cp.tied_modes = ties;

  const Mode& m = best_mode;
  const auto comps = inc_components(m);
  const CMat M = assemble(m, Operator::INC, p, cp.R1c).entries;
  Spectrum S = eig_dense(M, 1e-11, "incompressible critical block " + label(m));
  const int i = S.nearest(cplx(0, cp.a));
  cp.lambda_plus = S.values[i];
  const RVec wnu = weight_times_norm(m, comps, p, 0.0);
  CVec ustar = S.left[i].cwiseQuotient(wnu.cast<cplx>());

  ModeVector v = embed_inc(m, S.right[i], cp.lambda_plus, p, false);
  ModeVector us = embed_inc(m, ustar, cp.lambda_plus, p, true);
  balance_pair(v, us, 0.0, p.Pr);
  cp.u_plus = v;
  cp.u_plus_star = us;
  cp.u_minus = conj_vec(v);
  cp.u_minus_star = conj_vec(us);

  ModeVector rv = make_mode_vector(m, comps, p.alpha), rs = rv;
  rv.coeffs << v.get(Component::W2), v.get(Component::Theta), v.get(Component::Psi);
  rs.coeffs << us.get(Component::W2), us.get(Component::Theta), us.get(Component::Psi);
  cp.red_plus = rv;
  cp.red_plus_star = rs;

  const CMat K = assemble(m, Operator::KINC, p, cp.R1c).entries;
  cp.transversality = weighted_pair(K * rv.coeffs, rs.coeffs, wnu);
  cp.gap = rest_gap(cp);
  set_discarded_bound(cp);
  return cp;
}

CriticalPoint find_ac_critical(const Params& p, double eps, const Truncation& t,
                               const CriticalPoint& inc, const CriticalityOptions& opt) {
  p.validate();
  if (!(eps > 0) || eps > opt.eps_max)
    throw InvalidInput("find_ac_critical: eps must lie in (0, eps_max]");
  if (inc.regime != Regime::INC) throw InvalidInput("find_ac_critical: needs incompressible criticality");

  const auto modes = truncated_modes(p.alpha, t);
  // Acoustic and scalar blocks do not depend on R1.
  double fixed = -std::numeric_limits<double>::infinity();
  std::vector<Mode> full;
  for (const Mode& m : modes) {
    if (m.kind == ModeKind::Full) full.push_back(m);
    else fixed = std::max(fixed, max_re(eigenvalues(block_for(m, p, 0.0, eps), "fixed block")));
  }
  auto g = [&](double R1) {
    double r = fixed;
    for (const Mode& m : full) r = std::max(r, max_re(eigenvalues(block_for(m, p, R1, eps), "AC block")));
    return r;
  };

  int evals = 0;
  double lo = 0.9 * inc.R1c, hi = 1.1 * inc.R1c;
  double glo = g(lo), ghi = g(hi);
  evals += 2;
  for (int e = 0; glo >= 0 && e < 40; ++e) lo *= 0.9, glo = g(lo), ++evals;
  for (int e = 0; ghi <= 0 && e < 40; ++e) hi *= 1.1, ghi = g(hi), ++evals;
  if (!(glo < 0 && ghi > 0))
    throw NumericalFailure("find_ac_critical: no sign change of the spectral abscissa in bracket");

  // Illinois-modified regula falsi: secant steps that keep the bracket.
  double x = 0.5 * (lo + hi), gx = 0;
  int side = 0;
  for (int it = 0; it < 300; ++it) {
    x = (lo * ghi - hi * glo) / (ghi - glo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    gx = g(x);
    ++evals;
    if (std::abs(gx) <= opt.tol) break;
    if (gx < 0) {
      lo = x, glo = gx;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = x, ghi = gx;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) break;
  }

  CriticalPoint cp;
  cp.regime = Regime::AC;
  cp.eps = eps;
  cp.params = p;
  cp.trunc = t;
  cp.R1c = x;
  cp.abscissa_residual = std::abs(gx);
  cp.iterations = evals;

  // Which mode attains the abscissa at the root?
  double top = -std::numeric_limits<double>::infinity();
  Mode arg;
  for (const Mode& m : full) {
    const double r = max_re(eigenvalues(block_for(m, p, x, eps), "AC block"));
    if (r > top) top = r, arg = m;
  }
  if (fixed > top) throw NumericalFailure("find_ac_critical: crossing pair lost to an R1-independent block");
  if (!(arg == inc.mode_c))
    throw NumericalFailure("find_ac_critical: critical mode " + label(arg) +
                           " differs from the incompressible one " + label(inc.mode_c));
  cp.mode_c = arg;

  const Mode& m = arg;
  const auto comps = m.components();
  const CMat M = assemble(m, Operator::AC, p, x, eps).entries;
  Spectrum S = eig_dense(M, 1e-11, "compressible critical block " + label(m));
  const cplx l0 = S.values[0], l1 = S.values[1];
  if (std::abs(l0.imag()) < 1e-8 * std::abs(l0) + 1e-14 || std::abs(l0 - std::conj(l1)) > 1e-8 * std::abs(l0))
    throw NumericalFailure("find_ac_critical: crossing pair lost (leading eigenvalues not a complex pair)");
  // Acoustic pair sits near +-i sqrt(Pr mu)/eps; the Hopf pair near the incompressible a.
  const double acoustic_freq = std::sqrt(p.Pr * m.mu) / eps;
  if (std::abs(std::abs(l0.imag()) - inc.a) > std::abs(std::abs(l0.imag()) - acoustic_freq))
    throw NumericalFailure("find_ac_critical: crossing pair swapped with the acoustic branch");
  const int i = l0.imag() > 0 ? 0 : 1;
  cp.lambda_plus = S.values[i];
  cp.a = std::abs(cp.lambda_plus.imag());

  const RVec wnu = weight_times_norm(m, comps, p, eps);
  ModeVector v = make_mode_vector(m, p.alpha), us = v;
  v.coeffs = S.right[i];
  us.coeffs = S.left[i].cwiseQuotient(wnu.cast<cplx>());
  balance_pair(v, us, eps, p.Pr);
  cp.u_plus = v;
  cp.u_plus_star = us;
  cp.u_minus = conj_vec(v);
  cp.u_minus_star = conj_vec(us);

  const CMat K = assemble(m, Operator::KAC, p, x, eps).entries;
  cp.transversality = weighted_pair(K * v.coeffs, us.coeffs, wnu);
  cp.gap = rest_gap(cp);
  set_discarded_bound(cp);
  return cp;
}

namespace {

cplx tracked_eigenvalue(const CMat& M, cplx guess) {
  auto vals = eigenvalues(M, "branch block");
  cplx best = vals[0];
  for (cplx z : vals)
    if (std::abs(z - guess) < std::abs(best - guess)) best = z;
  return best;
}

}  // namespace

cplx transversality_fd(const CriticalPoint& cp, double h) {
  if (!(h > 0)) throw InvalidInput("transversality_fd: step must be positive");
  const cplx lp = tracked_eigenvalue(critical_block(cp, cp.R1c + h), cp.lambda_plus);
  const cplx lm = tracked_eigenvalue(critical_block(cp, cp.R1c - h), cp.lambda_plus);
  return (lp - lm) / (2 * h);
}

std::vector<cplx> eigenpair_branch(const CriticalPoint& cp, const std::vector<double>& eta_grid) {
  if (eta_grid.empty()) throw InvalidInput("eigenpair_branch: empty eta grid");
  const int n = static_cast<int>(eta_grid.size());
  for (int i = 1; i < n; ++i)
    if (!(eta_grid[i] > eta_grid[i - 1])) throw InvalidInput("eigenpair_branch: eta grid must increase");
  // Start from the grid point closest to eta = 0 and walk outwards.
  int i0 = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(eta_grid[i]) < std::abs(eta_grid[i0])) i0 = i;
  std::vector<cplx> out(n);
  auto step = [&](int i, cplx prev) {
    auto vals = eigenvalues(critical_block(cp, cp.R1c + eta_grid[i]), "branch block");
    std::sort(vals.begin(), vals.end(),
              [&](cplx a, cplx b) { return std::abs(a - prev) < std::abs(b - prev); });
    const double d0 = std::abs(vals[0] - prev), d1 = std::abs(vals[1] - prev);
    // Two candidates inside the continuation radius: the branch is ambiguous.
    if (d1 <= 2 * d0 && d1 < 1e-3 * std::max(1.0, std::abs(prev)))
      throw NumericalFailure("eigenpair_branch: branch collision near eta = " +
                             std::to_string(eta_grid[i]) + "; refine the grid");
    out[i] = vals[0];
    return vals[0];
  };
  cplx prev = step(i0, cp.lambda_plus);
  for (int i = i0 + 1; i < n; ++i) prev = step(i, prev);
  prev = out[i0];
  for (int i = i0 - 1; i >= 0; --i) prev = step(i, prev);
  return out;
}

ConvergenceStudy eps_convergence_study(const Params& p, const std::vector<double>& eps_grid,
                                       const Truncation& t) {
  if (eps_grid.size() < 5) throw InvalidInput("eps_convergence_study: need at least 5 grid points");
  for (double e : eps_grid)
    if (!(e > 0)) throw InvalidInput("eps_convergence_study: grid values must be positive");
  ConvergenceStudy st;
  st.inc = find_inc_critical(p, t);
  st.eps_grid = eps_grid;
  const int n = static_cast<int>(eps_grid.size());
  st.ac.resize(n);
  parallel_for(n, [&](int i) { st.ac[i] = find_ac_critical(p, eps_grid[i], t, st.inc); });

  const Mode& m = st.inc.mode_c;
  const auto comps = m.components();
  // Projection difference measured on fluid inputs and outputs in the fluid norm.
  RVec sf(4);
  for (int c = 1; c < 5; ++c)
    sf[c - 1] = std::sqrt(weight_diagonal(m, comps, p, 1.0)[c] * m.basis_norm(comps[c], p.alpha));
  auto proj = [&](const CriticalPoint& cp, double eps) {
    const RVec wnu = weight_times_norm(m, comps, p, eps);
    CMat P = CMat::Zero(5, 5);
    for (const auto* pr : {&cp.u_plus, &cp.u_minus}) {
      const ModeVector& star = pr == &cp.u_plus ? cp.u_plus_star : cp.u_minus_star;
      P += pr->coeffs * (star.coeffs.conjugate().cwiseProduct(wnu.cast<cplx>())).transpose();
    }
    return P;
  };
  const CMat P0 = proj(st.inc, 0.0).bottomRightCorner(4, 4);
  for (int i = 0; i < n; ++i) {
    const auto& cp = st.ac[i];
    st.err_R1c.push_back(std::abs(cp.R1c - st.inc.R1c));
    st.err_a.push_back(std::abs(cp.a - st.inc.a));
    ModeVector dv = cp.u_plus, ds = cp.u_plus_star;
    dv.coeffs -= st.inc.u_plus.coeffs;
    ds.coeffs -= st.inc.u_plus_star.coeffs;
    st.err_uplus.push_back(fluid_norm(dv, p.Pr));
    st.err_uplus_star.push_back(fluid_norm(ds, p.Pr));
    const CMat Pe = proj(cp, cp.eps);
    st.err_proj.push_back(frame_opnorm(CMat(Pe.bottomRightCorner(4, 4) - P0), sf, sf));
    RVec se(5);
    for (int c = 0; c < 5; ++c) se[c] = std::sqrt(weight_times_norm(m, comps, p, cp.eps)[c]);
    st.proj_norm.push_back(frame_opnorm(Pe, se, se));
  }
  st.fit_R1c = fit_rate(eps_grid, st.err_R1c);
  st.fit_a = fit_rate(eps_grid, st.err_a);
  st.fit_uplus = fit_rate(eps_grid, st.err_uplus);
  st.fit_uplus_star = fit_rate(eps_grid, st.err_uplus_star);
  st.fit_proj = fit_rate(eps_grid, st.err_proj);
  return st;
}

namespace {

bool hopf_preempts(Params p, double R2, const Truncation& t) {
  p.R2 = R2;
  double osc = std::numeric_limits<double>::infinity(), stat = osc;
  for (int j = 1; j <= t.j_max; ++j)
    for (int k = 1; k <= t.k_max; ++k) {
      const Mode m = make_mode(j, k, p.alpha);
      stat = std::min(stat, inc_stationary_threshold(p, m));
      const auto th = inc_oscillatory_threshold(p, m);
      if (th.oscillatory) osc = std::min(osc, th.R1_sq);
    }
  return osc < stat;
}

}  // namespace

SalinityWindow salinity_window(const Params& p, const Truncation& t, double R2_max, int scan) {
  p.validate();
  if (!p.hopf_admissible()) throw InvalidInput("salinity_window: params not Hopf-admissible");
  if (!(R2_max > 0) || scan < 4) throw InvalidInput("salinity_window: bad scan range");
  SalinityWindow w;
  int first = -1, last = -1, runs = 0;
  bool prev = false;
  for (int i = 0; i <= scan; ++i) {
    const bool ok = hopf_preempts(p, R2_max * i / scan, t);
    if (ok && !prev) ++runs;
    if (ok) {
      if (first < 0) first = i;
      last = i;
    }
    prev = ok;
  }
  if (first < 0) return w;
  w.found = true;
  w.contiguous = runs == 1;
  auto edge = [&](double a, double b, bool ok_at_a) {
    for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, b); ++it) {
      const double mid = 0.5 * (a + b);
      if (hopf_preempts(p, mid, t) == ok_at_a) a = mid;
      else b = mid;
    }
    return 0.5 * (a + b);
  };
  w.R2_lower = first == 0 ? 0.0 : edge(R2_max * (first - 1) / scan, R2_max * first / scan, false);
  w.R2_upper = last == scan ? R2_max : edge(R2_max * last / scan, R2_max * (last + 1) / scan, true);
  return w;
}

}  // namespace achopf
