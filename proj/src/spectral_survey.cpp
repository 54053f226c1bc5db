#include "achopf/spectral_survey.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "achopf/blockops.hpp"

namespace achopf {

namespace {

ModeMatrix block_of(const Mode& m, const Params& p, double eps, double R1) {
  return eps > 0 ? assemble(m, Operator::AC, p, R1, eps) : assemble(m, Operator::INC, p, R1);
}

double overlap(const CVec& x, const ModeVector& ref, const RVec& w) {
  const CVec wx = x.cwiseProduct(w.cast<cplx>());
  const cplx ip = ref.coeffs.dot(wx);  // conj(ref) . W x
  const double nx = std::sqrt(std::abs(x.dot(wx)));
  const double nr = std::sqrt(std::abs(ref.coeffs.dot(ref.coeffs.cwiseProduct(w.cast<cplx>()))));
  return std::abs(ip) / (nx * nr);
}

std::string where(const Mode& m) {
  std::ostringstream os;
  os << "(" << m.j << "," << m.k << ")";
  return os.str();
}

bool has_w(const Mode& m) { return m.kind == ModeKind::Full || m.kind == ModeKind::Acoustic; }

}  // namespace

GapReport spectral_gap(const Params& p, double eps, double R1, const Truncation& t, const CriticalPoint* cp) {
  p.validate();
  if (eps < 0) throw InvalidInput("spectral_gap: eps must be non-negative");
  if (cp && std::abs(cp->pairing_eps() - eps) > 1e-15)
    throw InvalidInput("spectral_gap: critical data belongs to a different eps");
  GapReport r;
  r.eps = eps;
  r.R1 = R1;
  r.kappa1 = std::numeric_limits<double>::infinity();
  double acoustic = -std::numeric_limits<double>::infinity();
  for (const Mode& m : truncated_modes(p.alpha, t)) {
    if (eps == 0 && m.kind == ModeKind::Acoustic) continue;
    const ModeMatrix B = block_of(m, p, eps, R1);
    ModeSpectrum row;
    row.mode = m;
    if (cp && m == cp->mode_c) {
      const Spectrum S = eig_dense(B.entries, 1e-10, "critical block");
      row.values = S.values;
      row.excluded.assign(S.size(), false);
      RVec w = weight_diagonal(m, B.comps, p, eps);
      const ModeVector& up = eps > 0 ? cp->u_plus : *cp->red_plus;
      ModeVector um = up;
      um.coeffs = up.coeffs.conjugate();
      for (int i = 0; i < S.size(); ++i)
        if (std::max(overlap(S.right[i], up, w), overlap(S.right[i], um, w)) >= 0.99) {
          row.excluded[i] = true;
          ++r.excluded;
        }
    } else {
      row.values = eigenvalues(B.entries, "gap block");
      sort_spectral(row.values);
      row.excluded.assign(row.values.size(), false);
    }
    for (size_t i = 0; i < row.values.size(); ++i) {
      const cplx z = row.values[i];
      if (row.excluded[i]) continue;
      if (eps > 0 && std::abs(z.imag()) >= 0.5 / eps) acoustic = std::max(acoustic, z.real());
      if (-z.real() < r.kappa1) r.kappa1 = -z.real(), r.witness_mode = m, r.witness_lambda = z;
    }
    r.table.push_back(std::move(row));
  }
  if (r.excluded > 2)
    throw NumericalFailure("spectral_gap: more than two eigenvalues match the critical pair");
  if (r.kappa1 < 0) {
    std::ostringstream os;
    os << "basic state unstable in Q-complement: Re " << r.witness_lambda.real() << " > 0 on mode "
       << where(r.witness_mode);
    throw NumericalFailure(os.str());
  }
  if (eps > 0 && acoustic > -std::numeric_limits<double>::infinity()) r.acoustic_abscissa = acoustic;
  return r;
}

double poincare_constant(const Params& p, const Truncation& t) {
  double mu = std::numeric_limits<double>::infinity();
  for (const Mode& m : truncated_modes(p.alpha, t)) mu = std::min(mu, m.mu);
  return std::sqrt(mu);
}

double norm_eps_X(const Field& F, double eps, double Pr) {
  double s = 0;
  for (const auto& mv : F.modes)
    for (size_t c = 0; c < mv.comps.size(); ++c) {
      const double m2 = mv.basis_norms[c] * std::norm(mv.coeffs[c]);
      switch (mv.comps[c]) {
        case Component::Phi: s += (eps * eps + std::pow(eps, 4) * mv.mode.mu) * m2; break;
        case Component::W1:
        case Component::W2: s += m2 / Pr; break;
        default: s += m2;
      }
    }
  return std::sqrt(s);
}

namespace {

// Solve (lambda - M) u = f in the frame; flag near-singular systems.
bool frame_solve(const CMat& M, const RVec& s, cplx lambda, const CVec& f, CVec& u) {
  const int n = static_cast<int>(M.rows());
  CMat A = lambda * CMat::Identity(n, n) - M;
  if (min_singular(A, s) <= 1e-13 * std::max(1.0, frame_opnorm(A, s, s))) return false;
  u = solve_in_frame(A, s, f);
  return true;
}

}  // namespace

std::vector<ResolventProbe> resolvent_probe_highfreq(const Params& p, double eps, double R1,
                                                     const Truncation& t, double kappa,
                                                     const std::vector<double>& gamma_grid,
                                                     const Field& F) {
  p.validate();
  if (!(eps > 0)) throw InvalidInput("resolvent_probe_highfreq: eps must be positive");
  const double cP = poincare_constant(p, t);
  const double Fn = norm_eps_X(F, eps, p.Pr);
  const auto modes = truncated_modes(p.alpha, t);
  std::vector<ResolventProbe> out(gamma_grid.size());
  parallel_for(static_cast<int>(gamma_grid.size()), [&](int gi) {
    ResolventProbe pr;
    pr.kappa = kappa;
    pr.gamma = gamma_grid[gi];
    pr.lambda = cplx(-kappa, pr.gamma / eps);
    pr.u = F;
    pr.F_norm = Fn;
    double w2 = 0, gw2 = 0;
    for (size_t i = 0; i < modes.size(); ++i) {
      const Mode& m = modes[i];
      const ModeMatrix B = assemble(m, Operator::AC, p, R1, eps);
      const RVec s = frame_scale(m, B.comps, p, eps, p.alpha);
      CVec u;
      if (!frame_solve(B.entries, s, pr.lambda, F.modes[i].coeffs, u)) {
        pr.singular = true;
        break;
      }
      pr.u.modes[i].coeffs = u;
      for (size_t c = 0; c < B.comps.size(); ++c)
        if (B.comps[c] == Component::W1 || B.comps[c] == Component::W2) {
          const double m2 = pr.u.modes[i].basis_norms[c] * std::norm(u[c]);
          w2 += m2;
          gw2 += m.mu * m2;
        }
    }
    if (!pr.singular) {
      pr.w_norm = std::sqrt(w2);
      pr.grad_w_norm = std::sqrt(gw2);
      pr.bound_ratio = Fn > 0 ? ((std::abs(pr.gamma) + cP) * pr.w_norm + pr.grad_w_norm) / Fn : 0.0;
    }
    out[gi] = std::move(pr);
  });
  return out;
}

double highfreq_operator_norm(const Params& p, double eps, double R1, const Truncation& t, double kappa,
                              double gamma) {
  p.validate();
  if (!(eps > 0)) throw InvalidInput("highfreq_operator_norm: eps must be positive");
  const double cP = poincare_constant(p, t);
  const cplx lambda(-kappa, gamma / eps);
  double best = 0;
  for (const Mode& m : truncated_modes(p.alpha, t)) {
    if (!has_w(m)) continue;
    const ModeMatrix B = assemble(m, Operator::AC, p, R1, eps);
    const int n = static_cast<int>(B.comps.size());
    RVec s_in(n), s_out(n), frame = frame_scale(m, B.comps, p, eps, p.alpha);
    for (int c = 0; c < n; ++c) {
      switch (B.comps[c]) {
        case Component::Phi: s_in[c] = std::sqrt(eps * eps + std::pow(eps, 4) * m.mu); break;
        case Component::W1:
        case Component::W2: s_in[c] = 1 / std::sqrt(p.Pr); break;
        default: s_in[c] = 1;
      }
      const bool w = B.comps[c] == Component::W1 || B.comps[c] == Component::W2;
      s_out[c] = w ? std::sqrt(std::pow(std::abs(gamma) + cP, 2) + m.mu) : 0.0;
    }
    CMat A = lambda * CMat::Identity(n, n) - B.entries;
    if (min_singular(A, frame) <= 1e-13 * std::max(1.0, frame_opnorm(A, frame, frame)))
      return std::numeric_limits<double>::infinity();
    // basis norms are common to a mode and cancel in the ratio
    const CMat R = A.partialPivLu().inverse();
    best = std::max(best, frame_opnorm(R, s_out, s_in));
  }
  return best;
}

std::vector<double> highfreq_gamma_grid(const Params& p, double eps, double R1, const Truncation& t,
                                        double a_eps, int n, double gamma_max) {
  if (n < 2) throw InvalidInput("highfreq_gamma_grid: need at least two points");
  const double g0 = std::max(1.0, 3 * eps * a_eps);
  if (!(g0 < gamma_max)) throw InvalidInput("highfreq_gamma_grid: empty gamma range");
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(g0 * std::pow(gamma_max / g0, double(i) / (n - 1)));
  for (const Mode& m : truncated_modes(p.alpha, t))
    for (cplx z : eigenvalues(assemble(m, Operator::AC, p, R1, eps).entries, "gamma grid block")) {
      const double gg = eps * std::abs(z.imag());
      if (gg >= g0 && gg <= gamma_max) g.push_back(gg);
    }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<cplx> lowfreq_grid(double eps, double a_eps, double kappa, double C0) {
  std::vector<cplx> g;
  for (double y : {0.0, a_eps, -a_eps, 0.5 * C0 / eps, -0.5 * C0 / eps, C0 / eps, -C0 / eps})
    g.emplace_back(-0.5 * kappa, y);
  g.emplace_back(1.0, 0.0);
  g.emplace_back(0.0, a_eps);
  return g;
}

std::vector<LowFreqProbe> resolvent_probe_lowfreq(const CriticalPoint& cp, const std::vector<cplx>& grid,
                                                  const Field& F, bool project) {
  if (cp.regime != Regime::AC) throw InvalidInput("resolvent_probe_lowfreq: needs compressible critical data");
  const Params& p = cp.params;
  const double eps = cp.eps;
  const Field G = project ? project_Q(F, cp) : F;
  const double Fn = norm_eps_X(G, eps, p.Pr);
  const CMat P = critical_projection_matrix(cp);
  const auto modes = truncated_modes(p.alpha, cp.trunc);
  std::vector<LowFreqProbe> out(grid.size());
  parallel_for(static_cast<int>(grid.size()), [&](int gi) {
    LowFreqProbe pr;
    pr.lambda = grid[gi];
    pr.F_norm = Fn;
    double u2 = 0, phi2 = 0, gphi2 = 0;
    for (size_t i = 0; i < modes.size(); ++i) {
      const Mode& m = modes[i];
      const ModeMatrix B = assemble(m, Operator::AC, p, cp.R1c, eps);
      const RVec s = frame_scale(m, B.comps, p, eps, p.alpha);
      CMat M = B.entries;
      cplx lam = pr.lambda;
      if (project && m == cp.mode_c) {
        // (lambda - M Q - (lambda - 1) P) u = Q F: the P-part vanishes and the
        // Q-part is the true resolvent, even at lambda = +-i a_eps.
        const int n = static_cast<int>(M.rows());
        const CMat Q = CMat::Identity(n, n) - P;
        M = M * Q + (lam - 1.0) * P;
      }
      CVec u;
      if (!frame_solve(M, s, lam, G.modes[i].coeffs, u)) {
        pr.singular = true;
        break;
      }
      const auto& nu = G.modes[i].basis_norms;
      for (size_t c = 0; c < B.comps.size(); ++c) {
        const double m2 = nu[c] * std::norm(u[c]);
        switch (B.comps[c]) {
          case Component::Phi:
            phi2 += m2;
            gphi2 += m.mu * m2;
            break;
          case Component::W1:
          case Component::W2: u2 += m2 / p.Pr; break;
          default: u2 += m2;
        }
      }
    }
    if (!pr.singular && Fn > 0) {
      pr.u_ratio = (1 + std::abs(pr.lambda)) * std::sqrt(u2) / Fn;
      pr.phi_ratio = (eps * std::sqrt(phi2) + eps * eps * std::sqrt(gphi2)) / Fn;
    }
    out[gi] = pr;
  });
  return out;
}

AcousticFit acoustic_branch_fit(const Params& p, const Mode& m, const std::vector<double>& eps,
                                const std::vector<double>& R1) {
  if (eps.size() != R1.size()) throw InvalidInput("acoustic_branch_fit: eps and R1 lengths differ");
  if (!has_w(m)) throw InvalidInput("acoustic_branch_fit: mode " + where(m) + " has no pressure");
  AcousticFit f;
  f.mode = m;
  for (size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0)) throw InvalidInput("acoustic_branch_fit: eps must be positive");
    const auto vals = eigenvalues(assemble(m, Operator::AC, p, R1[i], eps[i]).entries, "acoustic block");
    cplx fast = vals[0];
    for (cplx z : vals)
      if (std::abs(z.imag()) > std::abs(fast.imag())) fast = z;
    f.eps.push_back(eps[i]);
    f.im.push_back(std::abs(fast.imag()));
    f.re.push_back(fast.real());
  }
  f.fit = fit_rate(f.eps, f.im);
  return f;
}

}  // namespace achopf
