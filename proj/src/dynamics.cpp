#include "achopf/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace achopf {

using std::numbers::pi;

ModeVector propagate_mode(const ModeMatrix& M, const ModeVector& u0, double t) {
  if (!(t >= 0)) throw InvalidInput("propagate_mode: t must be non-negative");
  if (!(M.mode == u0.mode) || M.comps != u0.comps)
    throw InvalidInput("propagate_mode: vector and block live on different supports");
  // Only the eps scale of phi matters for conditioning of the frame.
  const double eps = M.eps.value_or(1.0);
  RVec s(M.comps.size());
  for (size_t i = 0; i < M.comps.size(); ++i)
    s[i] = M.comps[i] == Component::Phi ? eps : 1.0;
  BlockExp E(M.entries, s);
  ModeVector out = u0;
  out.coeffs = E.apply(t, u0.coeffs);
  return out;
}

Generator::Generator(const Params& p, double eps, double R1, const Truncation& t, double beta)
    : p_(p), eps_(eps), R1_(R1), beta_(beta), trunc_(t) {
  p.validate();
  if (!(eps > 0)) throw InvalidInput("Generator: eps must be positive");
  if (!(beta > 0)) throw InvalidInput("Generator: beta must be positive");
  modes_ = truncated_modes(p.alpha, t);
  const int n = size();
  blocks_.resize(n);
  frames_.resize(n);
  exps_.resize(n);
  parallel_for(n, [&](int i) {
    const Mode& m = modes_[i];
    blocks_[i] = assemble(m, Operator::AC, p, R1, eps).entries;
    frames_[i] = frame_scale(m, m.components(), p, eps, p.alpha);
    exps_[i] = BlockExp(blocks_[i] / beta, frames_[i]);
  });
}

Field Generator::apply(const Field& u) const {
  Field out = u;
  for (int i = 0; i < size(); ++i) out.modes[i].coeffs = blocks_[i] * u.modes[i].coeffs;
  return out;
}

Field Generator::propagate(const Field& u0, double t) const {
  if (!(t >= 0)) throw InvalidInput("propagate: t must be non-negative");
  Field out = u0;
  for (int i = 0; i < size(); ++i) out.modes[i].coeffs = exps_[i].apply(t, u0.modes[i].coeffs);
  return out;
}

void require_normalized(const CriticalPoint& cp) {
  const double e = cp.pairing_eps(), Pr = cp.params.Pr;
  const cplx pp = inner_product_eps(cp.u_plus, cp.u_plus_star, e, Pr);
  const cplx pm = inner_product_eps(cp.u_plus, cp.u_minus_star, e, Pr);
  const cplx mm = inner_product_eps(cp.u_minus, cp.u_minus_star, e, Pr);
  const cplx mp = inner_product_eps(cp.u_minus, cp.u_plus_star, e, Pr);
  if (std::abs(pp - 1.0) > 1e-10 || std::abs(mm - 1.0) > 1e-10 || std::abs(pm) > 1e-10 ||
      std::abs(mp) > 1e-10)
    throw InvalidInput("critical data is not biorthonormal");
}

namespace {

const ModeVector& critical_slot(const Field& u, const CriticalPoint& cp) {
  if (u.alpha != cp.params.alpha) throw InvalidInput("field and critical data use different alpha");
  return u.at(cp.mode_c.j, cp.mode_c.k);
}

}  // namespace

cplx bracket_plus(const Field& u, const CriticalPoint& cp) {
  return inner_product_eps(critical_slot(u, cp), cp.u_plus_star, cp.pairing_eps(), cp.params.Pr);
}

cplx bracket_minus(const Field& u, const CriticalPoint& cp) {
  return inner_product_eps(critical_slot(u, cp), cp.u_minus_star, cp.pairing_eps(), cp.params.Pr);
}

Field project_P(const Field& u, const CriticalPoint& cp) {
  require_normalized(cp);
  Field out = u;
  for (auto& mv : out.modes) mv.coeffs.setZero();
  const cplx bp = bracket_plus(u, cp), bm = bracket_minus(u, cp);
  out.at(cp.mode_c.j, cp.mode_c.k).coeffs = bp * cp.u_plus.coeffs + bm * cp.u_minus.coeffs;
  return out;
}

Field project_Q(const Field& u, const CriticalPoint& cp) {
  require_normalized(cp);
  Field out = u;
  const cplx bp = bracket_plus(u, cp), bm = bracket_minus(u, cp);
  out.at(cp.mode_c.j, cp.mode_c.k).coeffs -= bp * cp.u_plus.coeffs + bm * cp.u_minus.coeffs;
  return out;
}

CMat critical_projection_matrix(const CriticalPoint& cp) {
  const Mode& m = cp.mode_c;
  RVec wnu = weight_diagonal(m, m.components(), cp.params, cp.pairing_eps());
  for (int i = 0; i < wnu.size(); ++i) wnu[i] *= cp.u_plus.basis_norms[i];
  const CVec dp = cp.u_plus_star.coeffs.cwiseProduct(wnu.cast<cplx>());
  const CVec dm = cp.u_minus_star.coeffs.cwiseProduct(wnu.cast<cplx>());
  return cp.u_plus.coeffs * dp.adjoint() + cp.u_minus.coeffs * dm.adjoint();
}

Field random_field(const Params& p, const Truncation& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Field f = zero_field(p.alpha, t);
  for (auto& mv : f.modes)
    for (int i = 0; i < mv.coeffs.size(); ++i) mv.coeffs[i] = nd(rng) / (1.0 + mv.mode.mu);
  return f;
}

Field unit_probe_field(const Params& p, const Truncation& t, const Mode& critical) {
  Field f = zero_field(p.alpha, t);
  f.at(critical.j, critical.k).coeffs.setOnes();
  f.at(0, 1).coeffs.setOnes();
  return f;
}

Field TimeFourierForcing::at(double t, const Field& zero) const {
  Field out = zero;
  for (auto& mv : out.modes) mv.coeffs.setZero();
  for (const auto& [m, F] : harmonics) out += std::exp(cplx(0, m * omega * t)) * F;
  return out;
}

std::vector<double> chebyshev_times(double T, int n) {
  if (n < 2) throw InvalidInput("chebyshev_times: need at least 2 samples");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = 0.5 * T * (1.0 - std::cos(pi * i / (n - 1)));
  t.front() = 0.0;
  t.back() = T;
  return t;
}

namespace {

// Particular part of one forced harmonic on one mode.
struct HarmonicPart {
  double freq = 0;   // m omega
  CVec y;            // coefficient of e^{i freq t}
  CVec secular;      // coefficient of t e^{i freq t} (zero unless resonant)
  bool resonant = false;
};

HarmonicPart harmonic_part(const CMat& A, const RVec& s, double freq, const CVec& F, double beta) {
  const int n = static_cast<int>(A.rows());
  const cplx iw(0, freq);
  HarmonicPart h;
  h.freq = freq;
  h.secular = CVec::Zero(n);
  Spectrum S = eig_dense(s.cast<cplx>().asDiagonal() * A * s.cwiseInverse().cast<cplx>().asDiagonal(),
                         1e-10, "forced block");
  int r = -1;
  for (int i = 0; i < S.size(); ++i)
    if (std::abs(S.values[i] - iw) <= 1e-9 * std::max(1.0, std::abs(S.values[i]))) r = i;
  if (r < 0) {
    CMat B = iw * CMat::Identity(n, n) - A;
    h.y = solve_in_frame(B, s, F) / beta;
    return h;
  }
  // e^{tA} and e^{i freq t} coincide on the resonant direction: split it off
  // as a secular term and invert on the complement.
  h.resonant = true;
  const CVec v = s.cwiseInverse().cast<cplx>().asDiagonal() * S.right[r];
  const CVec d = s.cast<cplx>().asDiagonal() * S.dual(r);  // d^H v = 1
  const cplx c = d.dot(F);
  const CVec rest = F - c * v;
  CMat B = iw * CMat::Identity(n, n) - A + v * d.adjoint();
  h.y = solve_in_frame(B, s, rest) / beta;
  h.secular = c * v / beta;
  return h;
}

}  // namespace

Trajectory solve_ivp(const Generator& g, const Field& u0, const TimeFourierForcing& F,
                     const std::vector<double>& times) {
  for (double t : times)
    if (!(t >= 0)) throw InvalidInput("solve_ivp: times must be non-negative");
  const int nm = g.size();
  Trajectory tr;
  tr.eps = g.eps();
  tr.beta = g.beta();
  tr.times = times;

  std::vector<std::vector<HarmonicPart>> parts(nm);
  std::vector<CVec> z(nm);  // homogeneous data after removing the particular parts at t = 0
  std::vector<int> res(nm, 0);
  parallel_for(nm, [&](int i) {
    const CMat A = g.block(i) / g.beta();
    z[i] = u0.modes[i].coeffs;
    for (const auto& [m, Fm] : F.harmonics) {
      const CVec& f = Fm.modes[i].coeffs;
      if (f.squaredNorm() == 0) continue;
      auto h = harmonic_part(A, g.frame(i), m * F.omega, f, g.beta());
      z[i] -= h.y;
      res[i] |= h.resonant;
      parts[i].push_back(std::move(h));
    }
  });
  for (int r : res) tr.resonant |= r != 0;

  const Field zero = [&] {
    Field f = u0;
    for (auto& mv : f.modes) mv.coeffs.setZero();
    return f;
  }();
  tr.states.resize(times.size(), zero);
  tr.rates.resize(times.size(), zero);
  tr.forcing.resize(times.size(), zero);
  parallel_for(static_cast<int>(times.size()), [&](int k) {
    const double t = times[k];
    Field& u = tr.states[k];
    for (int i = 0; i < nm; ++i) {
      CVec x = g.exp_of(i).apply(t, z[i]);
      for (const auto& h : parts[i]) {
        const cplx e = std::exp(cplx(0, h.freq * t));
        x += e * h.y + (t * e) * h.secular;
      }
      u.modes[i].coeffs = x;
    }
    tr.forcing[k] = F.empty() ? zero : F.at(t, zero);
    Field du = g.apply(u);
    du += tr.forcing[k];
    du *= 1.0 / g.beta();
    tr.rates[k] = du;
  });
  return tr;
}

DecayFit decay_fit(const Generator& g, const Field& u0, double kappa1, double T, int n_samples) {
  if (!(T > 0) || n_samples < 3) throw InvalidInput("decay_fit: need T > 0 and at least 3 samples");
  DecayFit out;
  out.times = chebyshev_times(T, n_samples);
  out.norms.resize(n_samples);
  parallel_for(n_samples, [&](int k) {
    out.norms[k] = norms(g.propagate(u0, out.times[k]), g.eps(), g.params()).n_eps_X1;
  });
  const double n0 = out.norms.front();
  if (!(n0 > 0)) throw InvalidInput("decay_fit: zero initial data");
  if (!(out.norms.back() < n0))
    throw NumericalFailure("decay_fit: sample does not decay (projection failure?)");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (int k = 0; k < n_samples; ++k) {
    const double t = out.times[k], y = std::log(out.norms[k]);
    st += t, sy += y, stt += t * t, sty += t * y;
  }
  const double n = n_samples;
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  out.kappa_fit = -slope * g.beta();
  double c = 0;
  for (int k = 0; k < n_samples; ++k)
    c = std::max(c, out.norms[k] * std::exp(kappa1 * out.times[k] / g.beta()) / n0);
  out.C_fit = c;
  return out;
}

namespace {

// (e^{zT} - 1) / z, stable near z = 0.
cplx expm1_over(cplx z, double T) {
  const cplx w = z * T;
  if (std::abs(w) < 1e-6) return T * (1.0 + w / 2.0 + w * w / 6.0);
  return (std::exp(w) - 1.0) / z;
}

}  // namespace

double scalar_oscillation_integral(const Generator& g, const Field& u0, double kappa, double T) {
  const int nm = g.size();
  std::vector<double> parts(nm, 0.0);
  parallel_for(nm, [&](int i) {
    const ModeVector& mv = u0.modes[i];
    std::vector<int> idx;
    for (int c = 0; c < static_cast<int>(mv.comps.size()); ++c)
      if (mv.comps[c] == Component::Theta || mv.comps[c] == Component::Psi) idx.push_back(c);
    if (idx.empty()) return;
    CMat V;
    CVec c;
    const BlockExp& E = g.exp_of(i);
    if (E.modal(mv.coeffs, V, c)) {
      const auto& lam = E.eigenvalues();
      const int n = static_cast<int>(c.size());
      cplx s = 0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          cplx gab = 0;
          for (int r : idx) gab += mv.basis_norms[r] * std::conj(V(r, a)) * V(r, b);
          s += std::conj(c[a]) * c[b] * gab * expm1_over(2 * kappa + std::conj(lam[a]) + lam[b], T);
        }
      parts[i] = s.real();
      return;
    }
    // Ill-conditioned eigenbasis: composite Gauss-Legendre.
    static const double xg[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                 0.8611363115940526};
    static const double wg[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                 0.3478548451374538};
    const int panels = 2000;
    const double h = T / panels;
    double s = 0;
    for (int p = 0; p < panels; ++p)
      for (int q = 0; q < 4; ++q) {
        const double t = h * (p + 0.5 + 0.5 * xg[q]);
        const CVec x = E.apply(t, mv.coeffs);
        double v = 0;
        for (int r : idx) v += mv.basis_norms[r] * std::norm(x[r]);
        s += 0.5 * h * wg[q] * std::exp(2 * kappa * t) * v;
      }
    parts[i] = s;
  });
  double total = 0;
  for (double v : parts) total += v;
  return total;
}

}  // namespace achopf
