#include "achopf/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "achopf/blockops.hpp"
#include "achopf/dynamics.hpp"

namespace achopf {

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::string where(int m, const Mode& md) {
  std::ostringstream os;
  os << "(m=" << m << ", mode (" << md.j << "," << md.k << "))";
  return os.str();
}

bool is_zero(const CVec& v) { return v.size() == 0 || v.cwiseAbs().maxCoeff() == 0.0; }

double frame_sq(const CVec& x, const RVec& s) { return x.cwiseProduct(s.cast<cplx>()).squaredNorm(); }

// Scaled system S A S^{-1} with its SVD; smallest singular value relative to
// the largest flags near-singular blocks.
struct FrameSolver {
  Eigen::JacobiSVD<CMat> svd;
  RVec s;
  double rel_min = 0;

  FrameSolver(const CMat& A, const RVec& scale) : s(scale) {
    const CMat At = s.cast<cplx>().asDiagonal() * A * s.cwiseInverse().cast<cplx>().asDiagonal();
    svd.compute(At, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    rel_min = sv(0) > 0 ? sv(sv.size() - 1) / sv(0) : 0.0;
  }
  CVec solve(const CVec& f) const {
    const CVec y = svd.solve(f.cwiseProduct(s.cast<cplx>()));
    return y.cwiseQuotient(s.cast<cplx>());
  }
};

CVec weighted(const ModeVector& v, const RVec& wnu) { return v.coeffs.cwiseProduct(wnu.cast<cplx>()); }

}  // namespace

// ---------------------------------------------------------------- PeriodicField

Field& PeriodicField::at(int m) {
  if (m < -M || m > M) throw InvalidInput("PeriodicField: harmonic out of range");
  return harm[m + M];
}

const Field& PeriodicField::at(int m) const {
  if (m < -M || m > M) throw InvalidInput("PeriodicField: harmonic out of range");
  return harm[m + M];
}

Field PeriodicField::eval(double t) const {
  Field out = harm.at(M);
  for (auto& mv : out.modes) mv.coeffs.setZero();
  for (int m = -M; m <= M; ++m) {
    const cplx e = std::exp(cplx(0, m * a * t));
    const Field& h = at(m);
    for (size_t i = 0; i < out.modes.size(); ++i) out.modes[i].coeffs += e * h.modes[i].coeffs;
  }
  return out;
}

bool PeriodicField::is_real(double tol) const {
  double scale = 0;
  for (const auto& h : harm)
    for (const auto& mv : h.modes)
      if (mv.coeffs.size()) scale = std::max(scale, mv.coeffs.cwiseAbs().maxCoeff());
  const double lim = tol * std::max(1.0, scale);
  for (int m = 0; m <= M; ++m) {
    const Field& p = at(m);
    const Field& q = at(-m);
    for (size_t i = 0; i < p.modes.size(); ++i)
      if (p.modes[i].coeffs.size() &&
          (p.modes[i].coeffs - q.modes[i].coeffs.conjugate()).cwiseAbs().maxCoeff() > lim)
        return false;
  }
  return true;
}

PeriodicField& PeriodicField::operator+=(const PeriodicField& o) {
  if (o.M != M || o.harm.size() != harm.size()) throw InvalidInput("PeriodicField: harmonic counts differ");
  for (size_t i = 0; i < harm.size(); ++i) harm[i] += o.harm[i];
  return *this;
}

PeriodicField& PeriodicField::operator-=(const PeriodicField& o) {
  if (o.M != M || o.harm.size() != harm.size()) throw InvalidInput("PeriodicField: harmonic counts differ");
  for (size_t i = 0; i < harm.size(); ++i) harm[i] -= o.harm[i];
  return *this;
}

PeriodicField operator-(PeriodicField x, const PeriodicField& y) { return x -= y; }
PeriodicField operator+(PeriodicField x, const PeriodicField& y) { return x += y; }

std::string periodic_to_json(const PeriodicField& u) {
  using nlohmann::json;
  if (u.harm.empty()) throw InvalidInput("periodic_to_json: empty field");
  const Field& f0 = u.harm.front();
  json j;
  j["a"] = u.a;
  j["M"] = u.M;
  j["eps"] = u.eps;
  j["alpha"] = f0.alpha;
  j["j_max"] = f0.trunc.j_max;
  j["k_max"] = f0.trunc.k_max;
  json modes = json::array();
  for (const auto& mv : f0.modes) {
    json comps = json::array();
    for (Component c : mv.comps) comps.push_back(component_name(c));
    modes.push_back({{"j", mv.mode.j}, {"k", mv.mode.k}, {"comps", comps}});
  }
  j["modes"] = modes;
  json coeffs = json::array();
  for (int m = -u.M; m <= u.M; ++m)
    for (const auto& mv : u.at(m).modes)
      for (int c = 0; c < mv.coeffs.size(); ++c) coeffs.push_back({mv.coeffs[c].real(), mv.coeffs[c].imag()});
  j["coeffs"] = coeffs;
  return j.dump();
}

PeriodicField periodic_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("periodic_from_json: ") + e.what());
  }
  for (const char* key : {"a", "M", "eps", "alpha", "j_max", "k_max", "modes", "coeffs"})
    if (!j.contains(key)) throw InvalidInput(std::string("periodic_from_json: missing key '") + key + "'");
  PeriodicField u;
  u.a = j["a"].get<double>();
  u.M = j["M"].get<int>();
  u.eps = j["eps"].get<double>();
  if (u.M < 0) throw InvalidInput("periodic_from_json: M must be non-negative");
  Truncation t{j["j_max"].get<int>(), j["k_max"].get<int>()};
  const Field z = zero_field(j["alpha"].get<double>(), t);
  const auto& modes = j["modes"];
  if (modes.size() != z.modes.size()) throw InvalidInput("periodic_from_json: mode list does not match truncation");
  size_t per_harm = 0;
  for (size_t i = 0; i < z.modes.size(); ++i) {
    const auto& mv = z.modes[i];
    if (modes[i]["j"].get<int>() != mv.mode.j || modes[i]["k"].get<int>() != mv.mode.k ||
        modes[i]["comps"].size() != mv.comps.size())
      throw InvalidInput("periodic_from_json: mode entry " + std::to_string(i) + " out of canonical order");
    per_harm += mv.comps.size();
  }
  const auto& coeffs = j["coeffs"];
  if (coeffs.size() != per_harm * (2 * u.M + 1))
    throw InvalidInput("periodic_from_json: coefficient count does not match modes and M");
  u.harm.assign(2 * u.M + 1, z);
  size_t pos = 0;
  for (auto& h : u.harm)
    for (auto& mv : h.modes)
      for (int c = 0; c < mv.coeffs.size(); ++c, ++pos)
        mv.coeffs[c] = cplx(coeffs[pos][0].get<double>(), coeffs[pos][1].get<double>());
  return u;
}

// --------------------------------------------------------------- PeriodicSystem

PeriodicSystem::PeriodicSystem(const CriticalPoint& ac, double a, int M) : cp_(ac), a_(a), M_(M) {
  if (ac.regime != Regime::AC) throw InvalidInput("PeriodicSystem: needs compressible critical data");
  if (!(a > 0)) throw InvalidInput("PeriodicSystem: base frequency a must be positive");
  if (M < 1) throw InvalidInput("PeriodicSystem: M must be at least 1 to carry the kernel harmonics");
  require_normalized(ac);
  const Params& p = ac.params;
  modes_ = truncated_modes(p.alpha, ac.trunc);
  const int n = size();
  blocks_.resize(n);
  frames_.resize(n);
  parallel_for(n, [&](int i) {
    blocks_[i] = assemble(modes_[i], Operator::AC, p, ac.R1c, ac.eps).entries;
    frames_[i] = frame_scale(modes_[i], modes_[i].components(), p, ac.eps, p.alpha);
  });
  for (int i = 0; i < n; ++i)
    if (modes_[i] == ac.mode_c) crit_ = i;
  if (crit_ < 0) throw InvalidInput("PeriodicSystem: critical mode outside the truncation");
  const Mode& mc = ac.mode_c;
  RVec wnu = weight_diagonal(mc, mc.components(), p, ac.eps);
  for (int c = 0; c < wnu.size(); ++c) wnu[c] *= ac.u_plus.basis_norms[c];
  Pp_ = ac.u_plus.coeffs * weighted(ac.u_plus_star, wnu).adjoint();
  Pm_ = ac.u_minus.coeffs * weighted(ac.u_minus_star, wnu).adjoint();
  kappa1_ = ac.gap;
}

double PeriodicSystem::period() const { return kTwoPi / a_; }

PeriodicField PeriodicSystem::zero() const {
  PeriodicField u;
  u.a = a_;
  u.M = M_;
  u.eps = eps();
  u.harm.assign(2 * M_ + 1, zero_field(cp_.params.alpha, cp_.trunc));
  return u;
}

PeriodicField PeriodicSystem::z_plus() const {
  PeriodicField u = zero();
  u.at(1).modes[crit_].coeffs = cp_.u_plus.coeffs;
  return u;
}

PeriodicField PeriodicSystem::z_minus() const {
  PeriodicField u = zero();
  u.at(-1).modes[crit_].coeffs = cp_.u_minus.coeffs;
  return u;
}

void PeriodicSystem::require_compatible(const PeriodicField& u) const {
  if (std::abs(u.a - a_) > 1e-12 * a_)
    throw InvalidInput("periodic field base frequency does not match the critical data");
  if (std::abs(u.eps - eps()) > 1e-15) throw InvalidInput("periodic field eps does not match the critical data");
  if (u.M != M_) throw InvalidInput("periodic field support exceeds or differs from the harmonic truncation M");
  if (static_cast<int>(u.harm.size()) != 2 * M_ + 1) throw InvalidInput("periodic field is malformed");
  for (const auto& h : u.harm)
    if (static_cast<int>(h.modes.size()) != size() || h.trunc.j_max != cp_.trunc.j_max ||
        h.trunc.k_max != cp_.trunc.k_max)
      throw InvalidInput("periodic field spatial truncation does not match the critical data");
}

PeriodicField PeriodicSystem::apply_B(const PeriodicField& u, double omega) const {
  require_compatible(u);
  PeriodicField out = u;
  const double ae = a_eps() * (1 + omega);
  for (int m = -M_; m <= M_; ++m) {
    const Field& h = u.at(m);
    Field& o = out.at(m);
    for (int i = 0; i < size(); ++i)
      o.modes[i].coeffs = cplx(0, m * ae) * h.modes[i].coeffs - blocks_[i] * h.modes[i].coeffs;
  }
  return out;
}

PeriodicField PeriodicSystem::dt(const PeriodicField& u) const {
  require_compatible(u);
  PeriodicField out = u;
  for (int m = -M_; m <= M_; ++m)
    for (auto& mv : out.at(m).modes) mv.coeffs *= cplx(0, m * a_);
  return out;
}

namespace {

// Weights of the frame split into the phi row and the fluid rows.
struct SplitSq {
  double phi = 0, fluid = 0;
};

SplitSq split_sq(const ModeVector& mv, const RVec& s) {
  SplitSq r;
  for (size_t c = 0; c < mv.comps.size(); ++c) {
    const double v = s[c] * s[c] * std::norm(mv.coeffs[c]);
    if (mv.comps[c] == Component::Phi)
      r.phi += v;
    else
      r.fluid += v;
  }
  return r;
}

}  // namespace

double PeriodicSystem::norm_X(const PeriodicField& u) const {
  require_compatible(u);
  const double e2 = eps() * eps();
  double s = 0;
  for (int m = -M_; m <= M_; ++m)
    for (int i = 0; i < size(); ++i) {
      const SplitSq q = split_sq(u.at(m).modes[i], frames_[i]);
      const double mu = modes_[i].mu;
      s += q.phi * (1 + e2 * e2 * mu) + q.fluid * (1 / mu + e2);
    }
  return std::sqrt(period() * s);
}

double PeriodicSystem::norm_Y(const PeriodicField& u) const {
  require_compatible(u);
  const double e2 = eps() * eps();
  double integral = 0;
  for (int m = -M_; m <= M_; ++m) {
    const double ma2 = (m * a_) * (m * a_);
    for (int i = 0; i < size(); ++i) {
      const SplitSq q = split_sq(u.at(m).modes[i], frames_[i]);
      const double mu = modes_[i].mu;
      integral += (mu + e2 * ma2) * (q.phi + q.fluid) + e2 * mu * mu * q.fluid + e2 * e2 * mu * ma2 * q.phi;
    }
  }
  const int nt = 4 * (2 * M_ + 1);
  double sup = 0;
  for (int k = 0; k < nt; ++k) {
    const Field f = u.eval(period() * k / nt);
    double v = 0;
    for (int i = 0; i < size(); ++i)
      v += (1 + e2 * modes_[i].mu) * frame_sq(f.modes[i].coeffs, frames_[i]);
    sup = std::max(sup, v);
  }
  return std::sqrt(sup + period() * integral);
}

double PeriodicSystem::norm_eps(const PeriodicField& u) const {
  require_compatible(u);
  double s = 0;
  for (int m = -M_; m <= M_; ++m)
    for (int i = 0; i < size(); ++i) s += frame_sq(u.at(m).modes[i].coeffs, frames_[i]);
  return std::sqrt(s);
}

// ------------------------------------------------------------------ projections

namespace {

// (x, u*)_eps on the critical mode.
cplx pair_star(const CVec& x, const ModeVector& star, const CriticalPoint& cp) {
  ModeVector v = star;
  v.coeffs = x;
  return inner_product_eps(v, star, cp.eps, cp.params.Pr);
}

}  // namespace

ProjectionReport projections(const PeriodicField& u, const PeriodicSystem& sys) {
  sys.require_compatible(u);
  const CriticalPoint& cp = sys.critical();
  const int ic = sys.critical_index();
  ProjectionReport r;
  r.bracket_plus = pair_star(u.at(1).modes[ic].coeffs, cp.u_plus_star, cp);
  r.bracket_minus = pair_star(u.at(-1).modes[ic].coeffs, cp.u_minus_star, cp);
  r.P_part = sys.zero();
  r.P_part.at(1).modes[ic].coeffs = r.bracket_plus * cp.u_plus.coeffs;
  r.P_part.at(-1).modes[ic].coeffs = r.bracket_minus * cp.u_minus.coeffs;
  r.Q_part = u - r.P_part;
  return r;
}

// ---------------------------------------------------------------- solves

namespace {

// Harmonic-diagonal solve of (lambda + i m a_eps (1 + omega) - M) u_m = F_m.
// With deflate, the (+-1, critical) blocks are replaced by
// z - M(I - P) - (z - 1) P, which keeps P_+- u = P_+- F = 0 and inverts on the
// complement.
struct DiagonalOut {
  PeriodicField u;
  std::vector<std::string> warnings;
};

DiagonalOut diagonal_solve(const PeriodicField& F, cplx lambda, double omega, bool deflate,
                           const PeriodicSystem& sys) {
  const int M = sys.M(), n = sys.size();
  DiagonalOut out{sys.zero(), {}};
  const int nh = 2 * M + 1;
  std::vector<std::string> singular(static_cast<size_t>(nh) * n);
  std::vector<char> resonant(static_cast<size_t>(nh) * n, 0);
  parallel_for(nh * n, [&](int idx) {
    const int m = idx / n - M, i = idx % n;
    const CVec& f = F.at(m).modes[i].coeffs;
    if (is_zero(f)) return;
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    const cplx z = lambda + cplx(0, m * sys.a_eps() * (1 + omega));
    CMat A = z * CMat::Identity(d, d) - B;
    const bool kernel_block = deflate && i == sys.critical_index() && (m == 1 || m == -1);
    if (kernel_block) {
      const CMat& P = m == 1 ? sys.P_plus() : sys.P_minus();
      A = z * CMat::Identity(d, d) - B * (CMat::Identity(d, d) - P) - (z - 1.0) * P;
    }
    FrameSolver fs(A, sys.frame(i));
    if (fs.rel_min < 1e-13) {
      singular[idx] = where(m, sys.mode(i));
      return;
    }
    if (fs.rel_min < 1e-10) resonant[idx] = 1;
    out.u.at(m).modes[i].coeffs = fs.solve(f);
  });
  for (int idx = 0; idx < nh * n; ++idx) {
    if (!singular[idx].empty())
      throw NumericalFailure("singular block at " + singular[idx] + " (parameters off criticality or on a pole)");
    if (resonant[idx])
      out.warnings.push_back("near-resonant block at " + where(idx / n - M, sys.mode(idx % n)));
  }
  return out;
}

// Independent evaluation of the periodic solution of
// u' = s (M - lambda) u + s F(t), s = a / (a_eps (1 + omega)),
// through matrix exponentials: the Q-part uses the monodromy inverse
// [(I - e^{AT}) Q]^{-1} and closed-form Duhamel integrals per harmonic, the
// P-part solves the scalar equations along u_+- directly. Returns u(t_k).
std::vector<Field> representation_formula(const PeriodicField& F, cplx lambda, double omega,
                                          const PeriodicSystem& sys, const std::vector<double>& times) {
  const int M = sys.M(), n = sys.size(), ic = sys.critical_index();
  const double a = sys.a(), T = sys.period();
  const double s = a / (sys.a_eps() * (1 + omega));
  const CriticalPoint& cp = sys.critical();
  std::vector<Field> out(times.size(), F.at(0));
  for (auto& f : out)
    for (auto& mv : f.modes) mv.coeffs.setZero();

  parallel_for(n, [&](int i) {
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    const CMat I = CMat::Identity(d, d);
    const bool crit = i == ic;
    const CMat Pc = crit ? CMat(sys.P_plus() + sys.P_minus()) : CMat::Zero(d, d);
    const CMat Qc = I - Pc;
    const CMat A = s * (B - lambda * I);
    const BlockExp E(A, sys.frame(i));
    const CMat ET = E.matrix(T);

    std::vector<int> ms;
    for (int m = -M; m <= M; ++m)
      if (!is_zero(F.at(m).modes[i].coeffs)) ms.push_back(m);
    if (ms.empty()) return;

    std::vector<CVec> G(ms.size());
    CVec W = CVec::Zero(d), Gsum = CVec::Zero(d);
    for (size_t q = 0; q < ms.size(); ++q) {
      const CMat R = (cplx(0, ms[q] * a) * I - A) * Qc + Pc;
      G[q] = solve_in_frame(R, sys.frame(i), Qc * F.at(ms[q]).modes[i].coeffs);
      W += s * (I - ET) * G[q];
      Gsum += s * G[q];
    }
    const CVec u0 = solve_in_frame((I - ET) * Qc + Pc, sys.frame(i), Qc * W);

    for (size_t k = 0; k < times.size(); ++k) {
      const double t = times[k];
      CVec v = E.apply(t, u0 - Gsum);
      for (size_t q = 0; q < ms.size(); ++q) v += s * std::exp(cplx(0, ms[q] * a * t)) * G[q];
      out[k].modes[i].coeffs = v;
    }

    if (!crit) return;
    for (int sg : {1, -1}) {
      const ModeVector& star = sg == 1 ? cp.u_plus_star : cp.u_minus_star;
      const CVec& dir = sg == 1 ? cp.u_plus.coeffs : cp.u_minus.coeffs;
      const cplx kap = s * (cplx(0, sg * sys.a_eps()) - lambda);
      const cplx eT = std::exp(kap * T);
      std::vector<cplx> f(ms.size());
      for (size_t q = 0; q < ms.size(); ++q) f[q] = pair_star(F.at(ms[q]).modes[i].coeffs, star, cp);
      cplx c0 = 0;
      const bool kernel = std::abs(1.0 - eT) < 1e-12;
      for (size_t q = 0; q < ms.size(); ++q) {
        const cplx den = cplx(0, ms[q] * a) - kap;
        if (std::abs(den) < 1e-12) continue;  // f_q = 0 by solvability
        c0 += kernel ? s * f[q] / den : s * f[q] * (1.0 - eT) / den;
      }
      if (!kernel) c0 /= (1.0 - eT);
      for (size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const cplx ek = std::exp(kap * t);
        cplx c = ek * c0;
        for (size_t q = 0; q < ms.size(); ++q) {
          const cplx den = cplx(0, ms[q] * a) - kap;
          if (std::abs(den) < 1e-12) continue;
          c += s * f[q] * (std::exp(cplx(0, ms[q] * a * t)) - ek) / den;
        }
        out[k].modes[i].coeffs += c * dir;
      }
    }
  });
  return out;
}

double rep_discrepancy(const PeriodicField& u, const PeriodicField& F, cplx lambda, double omega,
                       const PeriodicSystem& sys) {
  std::vector<double> times(7);
  for (int k = 0; k < 7; ++k) times[k] = sys.period() * k / 7.0;
  const auto rep = representation_formula(F, lambda, omega, sys, times);
  double num = 0, den = 0;
  for (size_t k = 0; k < times.size(); ++k) {
    const Field ud = u.eval(times[k]);
    double dk = 0, nk = 0;
    for (int i = 0; i < sys.size(); ++i) {
      dk += frame_sq(ud.modes[i].coeffs - rep[k].modes[i].coeffs, sys.frame(i));
      nk += frame_sq(ud.modes[i].coeffs, sys.frame(i));
    }
    num = std::max(num, std::sqrt(dk));
    den = std::max(den, std::sqrt(nk));
  }
  return den > 0 ? num / den : num;
}

// Integral of the weighted fluid pairing (F, u) over one period.
double fluid_pairing(const PeriodicField& F, const PeriodicField& u, const PeriodicSystem& sys) {
  cplx acc = 0;
  for (int m = -sys.M(); m <= sys.M(); ++m)
    for (int i = 0; i < sys.size(); ++i) {
      const ModeVector& f = F.at(m).modes[i];
      const ModeVector& v = u.at(m).modes[i];
      const RVec& s = sys.frame(i);
      for (size_t c = 0; c < f.comps.size(); ++c)
        if (f.comps[c] != Component::Phi) acc += s[c] * s[c] * f.coeffs[c] * std::conj(v.coeffs[c]);
    }
  return sys.period() * acc.real();
}

void require_solvable(const PeriodicField& F, const PeriodicSystem& sys) {
  const ProjectionReport pr = projections(F, sys);
  if (std::abs(pr.bracket_plus) > 1e-12 || std::abs(pr.bracket_minus) > 1e-12)
    throw InvalidInput("solvability condition violated: |[F]_+-| > 1e-12");
}

PeriodicSolve finish_solve(DiagonalOut&& d, const PeriodicField& F, double omega, const PeriodicSystem& sys) {
  PeriodicSolve r;
  r.u = std::move(d.u);
  r.warnings = std::move(d.warnings);
  const double FX = sys.norm_X(F);
  const PeriodicField res = sys.apply_B(r.u, omega) - F;
  r.residual = FX > 0 ? sys.norm_X(res) / FX : sys.norm_X(res);
  r.rep_discrepancy = rep_discrepancy(r.u, F, 0.0, omega, sys);
  const double Y = sys.norm_Y(r.u);
  r.ratio_Y_X = FX > 0 ? Y / FX : 0;
  const double lit = FX + std::sqrt(std::abs(fluid_pairing(F, r.u, sys)));
  r.ratio_literal = lit > 0 ? Y / lit : 0;
  return r;
}

}  // namespace

PeriodicSolve solve_Beps(const PeriodicField& F, const PeriodicSystem& sys) {
  sys.require_compatible(F);
  require_solvable(F, sys);
  return finish_solve(diagonal_solve(F, 0.0, 0.0, true, sys), F, 0.0, sys);
}

PeriodicSolve solve_Beps_omega(const PeriodicField& F, double omega, const PeriodicSystem& sys) {
  if (!(std::abs(omega) <= 0.25)) throw InvalidInput("solve_Beps_omega: |omega| must be at most 1/4");
  sys.require_compatible(F);
  require_solvable(F, sys);
  DiagonalOut d = diagonal_solve(F, 0.0, omega, true, sys);
  if (!d.warnings.empty()) {
    const double shifted = omega + (omega < 0.25 ? 1e-9 : -1e-9);
    std::vector<std::string> w = std::move(d.warnings);
    d = diagonal_solve(F, 0.0, shifted, true, sys);
    w.push_back("accidental resonance: omega perturbed by 1e-9 to " + std::to_string(shifted));
    d.warnings = std::move(w);
    omega = shifted;
  }
  return finish_solve(std::move(d), F, omega, sys);
}

namespace {

void require_off_lattice(cplx lambda, const PeriodicSystem& sys) {
  const double ae = sys.a_eps();
  const double k = std::round(lambda.imag() / ae);
  if (std::abs(lambda - cplx(0, k * ae)) <= 1e-10) {
    std::ostringstream os;
    os << "resolvent: lambda is a pole i k a_eps (k = " << k << ")";
    throw InvalidInput(os.str());
  }
  if (!(lambda.real() > -(ae / sys.a()) * sys.kappa1()))
    throw InvalidInput("resolvent: Re lambda must exceed -(a_eps / a) kappa1");
}

}  // namespace

ResolventResult resolvent_Beps(cplx lambda, const PeriodicField& F, const PeriodicSystem& sys) {
  sys.require_compatible(F);
  require_off_lattice(lambda, sys);
  ResolventResult r;
  r.u = diagonal_solve(F, lambda, 0.0, false, sys).u;
  r.rep_discrepancy = rep_discrepancy(r.u, F, lambda, 0.0, sys);
  r.regular_term = sys.norm_X(F);
  r.norm_Y = sys.norm_Y(r.u);
  // [e^{-lambda'(T - s)} F]_+- as a time average, lambda' = (a / a_eps) lambda.
  const double a = sys.a(), T = sys.period();
  const cplx lp = (a / sys.a_eps()) * lambda;
  const cplx decay = std::exp(-lp * T);
  const CriticalPoint& cp = sys.critical();
  const int ic = sys.critical_index();
  double brackets = 0;
  for (int sg : {1, -1}) {
    const ModeVector& star = sg == 1 ? cp.u_plus_star : cp.u_minus_star;
    cplx acc = 0;
    for (int m = -sys.M(); m <= sys.M(); ++m) {
      const cplx f = pair_star(F.at(m).modes[ic].coeffs, star, cp);
      if (f == 0.0) continue;
      const cplx den = lp + cplx(0, (m - sg) * a);
      acc += f * (std::abs(den) < 1e-14 ? cplx(T) : (1.0 - decay) / den);
    }
    brackets += std::abs(acc * (a / kTwoPi));
  }
  r.bracket_term = brackets / std::abs(1.0 - std::exp(-kTwoPi * lambda / sys.a_eps()));
  return r;
}

double resolvent_norm_Beps(cplx lambda, const PeriodicSystem& sys) {
  require_off_lattice(lambda, sys);
  const int M = sys.M(), n = sys.size(), nh = 2 * M + 1;
  std::vector<double> inv(static_cast<size_t>(nh) * n, 0);
  parallel_for(nh * n, [&](int idx) {
    const int m = idx / n - M, i = idx % n;
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    const CMat A = (lambda + cplx(0, m * sys.a_eps())) * CMat::Identity(d, d) - B;
    const double smin = min_singular(A, sys.frame(i));
    inv[idx] = smin > 0 ? 1 / smin : std::numeric_limits<double>::infinity();
  });
  return *std::max_element(inv.begin(), inv.end());
}

RateFit resolvent_blowup(cplx pole, const std::vector<double>& radii, const PeriodicSystem& sys) {
  std::vector<double> norms;
  for (double r : radii) norms.push_back(resolvent_norm_Beps(pole + r, sys));
  return fit_rate(radii, norms);
}

MonodromyProbe monodromy_resolvent_probe(cplx mu, double omega, double r, const PeriodicSystem& sys) {
  if (!(r > 0)) throw InvalidInput("monodromy probe: r must be positive");
  if (!(std::abs(omega) <= 0.25)) throw InvalidInput("monodromy probe: |omega| must be at most 1/4");
  if (std::abs(mu - 1.0) < r) throw InvalidInput("monodromy probe: |mu - 1| < r (kernel direction)");
  const double floor = std::exp(-0.75 * sys.kappa1() * sys.period());
  if (std::abs(mu) < floor) throw InvalidInput("monodromy probe: |mu| below exp(-(3/4) kappa1 2 pi / a)");
  for (int sg : {1, -1}) {
    const cplx crit = std::exp(cplx(0, sg * kTwoPi / (1 + omega)));
    if (std::abs(mu - crit) < r)
      throw InvalidInput("monodromy probe: mu within r of the critical multiplier exp(+-2 pi i / (1 + omega))");
  }
  const double t = kTwoPi / (sys.a_eps() * (1 + omega));
  const int n = sys.size();
  std::vector<double> inv(n, 0);
  std::vector<char> bad(n, 0);
  parallel_for(n, [&](int i) {
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    const CMat V = BlockExp(B, sys.frame(i)).matrix(t);
    const CMat A = mu * CMat::Identity(d, d) - V;
    const double smin = min_singular(A, sys.frame(i));
    const double big = frame_opnorm(A, sys.frame(i), sys.frame(i));
    if (smin <= 1e-13 * std::max(1.0, big)) bad[i] = 1;
    inv[i] = smin > 0 ? 1 / smin : std::numeric_limits<double>::infinity();
  });
  for (int i = 0; i < n; ++i)
    if (bad[i]) {
      std::ostringstream os;
      os << "monodromy probe: mu is a monodromy eigenvalue on mode (" << sys.mode(i).j << "," << sys.mode(i).k << ")";
      throw InvalidInput(os.str());
    }
  MonodromyProbe p;
  p.mu = mu;
  p.omega = omega;
  p.inv_norm = *std::max_element(inv.begin(), inv.end());
  p.bound_ratio = p.inv_norm / (1 / r + 1 / std::abs(mu));
  return p;
}

FixedPointResult fixed_point_solve(cplx lambda, const Field& F, const PeriodicSystem& sys) {
  const CriticalPoint& cp = sys.critical();
  if (static_cast<int>(F.modes.size()) != sys.size()) throw InvalidInput("fixed_point_solve: truncation mismatch");
  const cplx q = std::exp(-kTwoPi * lambda / sys.a_eps());
  const Field PF = project_P(F, cp);
  const Field QF = F - PF;
  const int ic = sys.critical_index();
  FixedPointResult r;
  r.u = QF;
  if (std::abs(1.0 - q) < 1e-12) {
    if (std::sqrt(frame_sq(PF.modes[ic].coeffs, sys.frame(ic))) > 1e-12)
      throw InvalidInput("fixed_point_solve: solvability violated (e^{2 pi lambda / a_eps} = 1 and P F != 0)");
  }
  const double t = kTwoPi / sys.a_eps();
  const int n = sys.size();
  std::vector<CMat> V(n);
  parallel_for(n, [&](int i) {
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    V[i] = BlockExp(B, sys.frame(i)).matrix(t);
    const CMat I = CMat::Identity(d, d);
    const CMat Pc = i == ic ? CMat(sys.P_plus() + sys.P_minus()) : CMat::Zero(d, d);
    const CMat Qc = I - Pc;
    r.u.modes[i].coeffs = solve_in_frame((I - q * V[i]) * Qc + Pc, sys.frame(i), QF.modes[i].coeffs);
  });
  if (std::abs(1.0 - q) >= 1e-12) r.u.modes[ic].coeffs += PF.modes[ic].coeffs / (1.0 - q);

  r.expected_ratio = std::abs(q) * std::exp(-kTwoPi * sys.kappa1() / sys.a_eps());
  r.neumann_checked = lambda.real() > -sys.kappa1();
  if (r.neumann_checked) {
    // Tail ratio of ||(q V)^k Q F||; the slowest decaying mode dominates.
    std::vector<CVec> x(n);
    for (int i = 0; i < n; ++i) x[i] = QF.modes[i].coeffs;
    auto total = [&]() {
      double s = 0;
      for (int i = 0; i < n; ++i) s += frame_sq(x[i], sys.frame(i));
      return std::sqrt(s);
    };
    std::vector<double> N{total()};
    for (int k = 1; k <= 80 && N.back() > 1e-200 * N.front() && N.back() > 0; ++k) {
      for (int i = 0; i < n; ++i) x[i] = q * (V[i] * x[i]);
      N.push_back(total());
    }
    const int last = static_cast<int>(N.size()) - 1;
    const int mid = last / 2;
    if (last >= 2 && N[last] > 0 && N[mid] > 0)
      r.neumann_ratio = std::pow(N[last] / N[mid], 1.0 / (last - mid));
    else
      r.neumann_checked = false;
  }
  return r;
}

double kernel_residual(const PeriodicSystem& sys) {
  const CriticalPoint& cp = sys.critical();
  const int ic = sys.critical_index();
  const CMat& B = sys.block(ic);
  const RVec& s = sys.frame(ic);
  double worst = 0;
  for (int sg : {1, -1}) {
    const CVec& u = sg == 1 ? cp.u_plus.coeffs : cp.u_minus.coeffs;
    const CVec res = cplx(0, sg * sys.a_eps()) * u - B * u;
    worst = std::max(worst, std::sqrt(frame_sq(res, s) / frame_sq(B * u, s)));
  }
  return worst;
}

double solution_operator_norm(double omega, const PeriodicSystem& sys) {
  if (!(std::abs(omega) <= 0.25)) throw InvalidInput("solution_operator_norm: |omega| must be at most 1/4");
  const int M = sys.M(), n = sys.size(), nh = 2 * M + 1;
  const double e2 = sys.eps() * sys.eps(), T = sys.period();
  std::vector<double> best(static_cast<size_t>(nh) * n, 0);
  parallel_for(nh * n, [&](int idx) {
    const int m = idx / n - M, i = idx % n;
    const Mode& md = sys.mode(i);
    const auto comps = md.components();
    const CMat& B = sys.block(i);
    const int d = static_cast<int>(B.rows());
    const double mu = md.mu, ma2 = (m * sys.a()) * (m * sys.a());
    RVec g(d), h(d);
    for (int c = 0; c < d; ++c) {
      const bool phi = comps[c] == Component::Phi;
      const double xw = phi ? 1 + e2 * e2 * mu : 1 / mu + e2;
      const double yw = 1 + e2 * mu + T * ((mu + e2 * ma2) + (phi ? e2 * e2 * mu * ma2 : e2 * mu * mu));
      g[c] = std::sqrt(T * xw) * sys.frame(i)[c];
      h[c] = std::sqrt(yw) * sys.frame(i)[c];
    }
    const cplx z(0, m * sys.a_eps() * (1 + omega));
    const CMat I = CMat::Identity(d, d);
    CMat A = z * I - B;
    CMat basis = I;  // admissible inputs, orthonormal in the X weights
    if (i == sys.critical_index() && (m == 1 || m == -1)) {
      const CMat& P = m == 1 ? sys.P_plus() : sys.P_minus();
      A = z * I - B * (I - P) - (z - 1.0) * P;
      const CMat Pw = g.cast<cplx>().asDiagonal() * (I - P) * g.cwiseInverse().cast<cplx>().asDiagonal();
      Eigen::JacobiSVD<CMat> svd(Pw, Eigen::ComputeFullU);
      int r = 0;
      while (r < d && svd.singularValues()(r) > 1e-10 * svd.singularValues()(0)) ++r;
      basis = svd.matrixU().leftCols(r);
    }
    const CMat K = h.cast<cplx>().asDiagonal() * A.partialPivLu().solve(g.cwiseInverse().cast<cplx>().asDiagonal() * basis);
    best[idx] = Eigen::JacobiSVD<CMat>(K).singularValues()(0);
  });
  return *std::max_element(best.begin(), best.end());
}

double kernel_singular_value(double omega, const PeriodicSystem& sys) {
  const int ic = sys.critical_index();
  const CMat& B = sys.block(ic);
  const int d = static_cast<int>(B.rows());
  return min_singular(cplx(0, sys.a_eps() * (1 + omega)) * CMat::Identity(d, d) - B, sys.frame(ic));
}

IncKernel inc_periodic_kernel(const CriticalPoint& inc, int M) {
  if (inc.regime != Regime::INC) throw InvalidInput("inc_periodic_kernel: needs incompressible critical data");
  if (M < 1) throw InvalidInput("inc_periodic_kernel: M must be at least 1");
  const Params& p = inc.params;
  IncKernel r;
  r.min_pairing = std::numeric_limits<double>::infinity();
  for (const Mode& md : truncated_modes(p.alpha, inc.trunc)) {
    if (md.kind == ModeKind::Acoustic) continue;
    const ModeMatrix B = assemble(md, Operator::INC, p, inc.R1c);
    const RVec s = frame_scale(md, B.comps, p, 0.0, p.alpha);
    const int d = static_cast<int>(B.entries.rows());
    for (int m = -M; m <= M; ++m) {
      const CMat A = cplx(0, m * inc.a) * CMat::Identity(d, d) - B.entries;
      FrameSolver fs(A, s);
      const auto& sv = fs.svd.singularValues();
      for (int c = 0; c < sv.size(); ++c)
        if (sv(c) <= 1e-10 * std::max(1.0, sv(0))) {
          ++r.nullity;
          const CVec x = fs.svd.matrixV().col(c);
          const CVec y = fs.svd.matrixU().col(c);
          r.min_pairing = std::min(r.min_pairing, std::abs(y.dot(x)));
        }
    }
  }
  if (r.nullity == 0) r.min_pairing = 0;
  r.semisimple = r.nullity == 2 && r.min_pairing > 1e-6;
  return r;
}

PeriodicField periodic_probe(const PeriodicSystem& sys, std::uint64_t seed, int width) {
  if (width < 0 || width > sys.M()) throw InvalidInput("periodic_probe: width must lie in [0, M]");
  const Params& p = sys.critical().params;
  const Truncation& t = sys.critical().trunc;
  PeriodicField F = sys.zero();
  F.at(0) = random_field(p, t, seed);
  for (int m = 1; m <= width; ++m) {
    Field h = random_field(p, t, seed + 2 * m - 1);
    h += cplx(0, 1) * random_field(p, t, seed + 2 * m);
    F.at(-m) = h.conj();
    F.at(m) = std::move(h);
  }
  return projections(F, sys).Q_part;
}

}  // namespace achopf
