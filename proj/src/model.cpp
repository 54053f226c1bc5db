#include "achopf/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace achopf {

using std::numbers::pi;

void Params::validate() const {
  auto bad = [](const char* what) { throw InvalidInput(std::string("params: ") + what); };
  if (!(Pr > 0) || !std::isfinite(Pr)) bad("Pr must be positive");
  if (!(d > 0) || !std::isfinite(d)) bad("d must be positive");
  if (!(R2 >= 0) || !std::isfinite(R2)) bad("R2 must be non-negative");
  if (!(alpha > 0) || !std::isfinite(alpha)) bad("alpha must be positive");
}

Nondimensional nondimensionalize(const PhysicalParams& p) {
  auto need_pos = [](double v, const char* name) {
    if (!(v > 0)) throw InvalidInput(std::string("physical params: ") + name + " must be positive");
  };
  need_pos(p.nu, "nu");
  need_pos(p.dT, "dT");
  need_pos(p.dS, "dS");
  need_pos(p.aT, "aT");
  if (!(p.aS >= 0)) throw InvalidInput("physical params: aS must be non-negative");
  need_pos(p.g, "g");
  need_pos(p.ell, "ell");
  need_pos(p.alpha_physical, "alpha_physical");
  if (!(p.T0 > p.T1)) throw InvalidInput("physical params: T0 > T1 violated");
  if (!(p.S0 > p.S1)) throw InvalidInput("physical params: S0 > S1 violated");

  const double l3 = p.ell * p.ell * p.ell;
  Nondimensional out;
  out.params.Pr = p.nu / p.dT;
  out.params.d = p.dS / p.dT;
  out.R1 = std::sqrt(p.aT * p.g * l3 * (p.T0 - p.T1) / (p.dT * p.nu));
  out.params.R2 = std::sqrt(p.aS * p.g * l3 * (p.S0 - p.S1) / (p.dT * p.nu));
  out.params.alpha = p.alpha_physical * p.ell;
  return out;
}

const char* component_name(Component c) {
  switch (c) {
    case Component::Phi: return "phi";
    case Component::W1: return "w1";
    case Component::W2: return "w2";
    case Component::Theta: return "theta";
    case Component::Psi: return "psi";
  }
  return "?";
}

const char* kind_name(ModeKind k) {
  switch (k) {
    case ModeKind::Full: return "full";
    case ModeKind::Acoustic: return "acoustic";
    case ModeKind::Scalar: return "scalar";
    case ModeKind::Null: return "null";
  }
  return "?";
}

std::vector<Component> Mode::components() const {
  switch (kind) {
    case ModeKind::Full:
      return {Component::Phi, Component::W1, Component::W2, Component::Theta, Component::Psi};
    case ModeKind::Acoustic: return {Component::Phi, Component::W1};
    case ModeKind::Scalar: return {Component::Theta, Component::Psi};
    case ModeKind::Null: return {};
  }
  return {};
}

double Mode::basis_norm(Component, double alpha) const {
  // cos/sin products over (0, 2pi/alpha) x (0, 1); a zero index contributes
  // the full length instead of half of it.
  const double fx = j > 0 ? 0.5 : 1.0;
  const double fy = k > 0 ? 0.5 : 1.0;
  return (2.0 * pi / alpha) * fx * fy;
}

Mode make_mode(int j, int k, double alpha) {
  if (j < 0 || k < 0) throw InvalidInput("mode indices must be non-negative");
  Mode m;
  m.j = j;
  m.k = k;
  m.a = alpha * j;
  m.b = k * pi;
  m.mu = m.a * m.a + m.b * m.b;
  if (j >= 1 && k >= 1) m.kind = ModeKind::Full;
  else if (j >= 1) m.kind = ModeKind::Acoustic;
  else if (k >= 1) m.kind = ModeKind::Scalar;
  else m.kind = ModeKind::Null;
  return m;
}

std::vector<Mode> truncated_modes(double alpha, const Truncation& t) {
  if (t.j_max < 0 || t.k_max < 0 || t.j_max + t.k_max == 0)
    throw InvalidInput("truncation must contain at least one mode");
  std::vector<Mode> out;
  for (int j = 0; j <= t.j_max; ++j)
    for (int k = 0; k <= t.k_max; ++k)
      if (j != 0 || k != 0) out.push_back(make_mode(j, k, alpha));
  return out;
}

std::vector<Component> inc_components(const Mode& m) {
  switch (m.kind) {
    case ModeKind::Full: return {Component::W2, Component::Theta, Component::Psi};
    case ModeKind::Scalar: return {Component::Theta, Component::Psi};
    case ModeKind::Acoustic:
      throw InvalidInput("acoustic mode carries no divergence-free component");
    case ModeKind::Null: throw InvalidInput("null mode (0,0) rejected");
  }
  return {};
}

namespace {

std::string mode_label(const Mode& m) {
  std::ostringstream os;
  os << "(" << m.j << "," << m.k << ")";
  return os.str();
}

CMat ac_block(const Mode& m, const Params& p, double R1, double eps, bool adjoint) {
  const double a = m.a, b = m.b, mu = m.mu, Pr = p.Pr, R2 = p.R2, d = p.d;
  const double e2 = eps * eps;
  const double s = adjoint ? -1.0 : 1.0;  // pressure coupling flips sign
  switch (m.kind) {
    case ModeKind::Full: {
      CMat M = CMat::Zero(5, 5);
      M(0, 1) = -s * a / e2;
      M(0, 2) = -s * b / e2;
      M(1, 0) = s * Pr * a;
      M(1, 1) = -Pr * mu;
      M(2, 0) = s * Pr * b;
      M(2, 2) = -Pr * mu;
      M(3, 3) = -mu;
      M(4, 4) = -d * mu;
      if (!adjoint) {
        M(2, 3) = Pr * R1;
        M(2, 4) = -Pr * R2;
        M(3, 2) = R1;
        M(4, 2) = R2;
      } else {
        M(2, 3) = Pr * R1;
        M(2, 4) = Pr * R2;
        M(3, 2) = R1;
        M(4, 2) = -R2;
      }
      return M;
    }
    case ModeKind::Acoustic: {
      CMat M(2, 2);
      M << -s * 0.0, -s * a / e2, s * Pr * a, -Pr * a * a;
      return M;
    }
    case ModeKind::Scalar: {
      CMat M = CMat::Zero(2, 2);
      M(0, 0) = -mu;
      M(1, 1) = -d * mu;
      return M;
    }
    case ModeKind::Null: break;
  }
  throw InvalidInput("null mode (0,0) rejected");
}

CMat inc_block(const Mode& m, const Params& p, double R1, bool adjoint) {
  const double mu = m.mu, Pr = p.Pr, R2 = p.R2, d = p.d;
  if (m.kind == ModeKind::Scalar) {
    CMat M = CMat::Zero(2, 2);
    M(0, 0) = -mu;
    M(1, 1) = -d * mu;
    return M;
  }
  const double q = m.a * m.a / mu;
  CMat M = CMat::Zero(3, 3);
  M(0, 0) = -Pr * mu;
  M(1, 1) = -mu;
  M(2, 2) = -d * mu;
  if (!adjoint) {
    M(0, 1) = Pr * q * R1;
    M(0, 2) = -Pr * q * R2;
    M(1, 0) = R1;
    M(2, 0) = R2;
  } else {
    M(0, 1) = Pr * q * R1;
    M(0, 2) = Pr * q * R2;
    M(1, 0) = R1;
    M(2, 0) = -R2;
  }
  return M;
}

}  // namespace

ModeMatrix assemble(const Mode& m, Operator which, const Params& p, double R1,
                    std::optional<double> eps) {
  p.validate();
  if (m.kind == ModeKind::Null) throw InvalidInput("assemble: null mode (0,0) rejected");
  ModeMatrix out;
  out.mode = m;
  out.which = which;
  out.R1 = R1;
  const bool compressible =
      which == Operator::AC || which == Operator::ACAdjoint || which == Operator::KAC;
  if (which == Operator::AC || which == Operator::ACAdjoint) {
    if (!eps) throw InvalidInput("assemble: eps required for the compressible operator");
    if (!(*eps > 0)) throw InvalidInput("assemble: eps must be positive");
    out.eps = eps;
  } else if (which == Operator::KAC && eps) {
    out.eps = eps;
  }
  out.comps = compressible ? m.components() : inc_components(m);
  const int n = static_cast<int>(out.comps.size());

  switch (which) {
    case Operator::AC: out.entries = ac_block(m, p, R1, *eps, false); break;
    case Operator::ACAdjoint: out.entries = ac_block(m, p, R1, *eps, true); break;
    case Operator::INC: out.entries = inc_block(m, p, R1, false); break;
    case Operator::INCAdjoint: out.entries = inc_block(m, p, R1, true); break;
    case Operator::KAC:
      out.entries = CMat::Zero(n, n);
      if (m.kind == ModeKind::Full) {
        out.entries(2, 3) = p.Pr;
        out.entries(3, 2) = 1.0;
      }
      break;
    case Operator::KINC:
      out.entries = CMat::Zero(n, n);
      if (m.kind == ModeKind::Full) {
        out.entries(0, 1) = p.Pr * m.a * m.a / m.mu;
        out.entries(1, 0) = 1.0;
      }
      break;
  }
  if (out.entries.rows() != n)
    throw NumericalFailure("assemble: dimension mismatch on mode " + mode_label(m));
  return out;
}

RVec weight_diagonal(const Mode& m, const std::vector<Component>& comps, const Params& p,
                     double eps) {
  RVec w(comps.size());
  for (size_t i = 0; i < comps.size(); ++i) {
    switch (comps[i]) {
      case Component::Phi: w[i] = eps * eps; break;
      case Component::W1: w[i] = 1.0 / p.Pr; break;
      case Component::W2: {
        const bool reduced = eps == 0.0 && m.kind == ModeKind::Full &&
                             std::find(comps.begin(), comps.end(), Component::W1) == comps.end();
        w[i] = reduced ? m.mu / (p.Pr * m.a * m.a) : 1.0 / p.Pr;
        break;
      }
      case Component::Theta:
      case Component::Psi: w[i] = 1.0; break;
    }
  }
  return w;
}

cplx ModeVector::get(Component c) const {
  for (size_t i = 0; i < comps.size(); ++i)
    if (comps[i] == c) return coeffs[i];
  return 0.0;
}

void ModeVector::set(Component c, cplx v) {
  for (size_t i = 0; i < comps.size(); ++i)
    if (comps[i] == c) {
      coeffs[i] = v;
      return;
    }
  throw InvalidInput(std::string("component ") + component_name(c) + " inactive on mode " +
                     mode_label(mode));
}

ModeVector make_mode_vector(const Mode& m, const std::vector<Component>& comps, double alpha) {
  ModeVector v;
  v.mode = m;
  v.comps = comps;
  v.coeffs = CVec::Zero(comps.size());
  v.basis_norms.resize(comps.size());
  for (size_t i = 0; i < comps.size(); ++i) v.basis_norms[i] = m.basis_norm(comps[i], alpha);
  return v;
}

ModeVector make_mode_vector(const Mode& m, double alpha) {
  return make_mode_vector(m, m.components(), alpha);
}

int Field::index_of(int j, int k) const {
  if (j < 0 || k < 0 || j > trunc.j_max || k > trunc.k_max || (j == 0 && k == 0))
    throw InvalidInput("mode outside truncation");
  // j outer, k inner, (0,0) skipped
  return j * (trunc.k_max + 1) + k - 1;
}

static void check_same_support(const Field& a, const Field& b) {
  if (a.modes.size() != b.modes.size() || a.alpha != b.alpha ||
      a.trunc.j_max != b.trunc.j_max || a.trunc.k_max != b.trunc.k_max)
    throw InvalidInput("fields have mismatched truncations");
}

Field& Field::operator+=(const Field& o) {
  check_same_support(*this, o);
  for (size_t i = 0; i < modes.size(); ++i) modes[i].coeffs += o.modes[i].coeffs;
  return *this;
}

Field& Field::operator-=(const Field& o) {
  check_same_support(*this, o);
  for (size_t i = 0; i < modes.size(); ++i) modes[i].coeffs -= o.modes[i].coeffs;
  return *this;
}

Field& Field::operator*=(cplx s) {
  for (auto& m : modes) m.coeffs *= s;
  return *this;
}

Field Field::conj() const {
  Field out = *this;
  for (auto& m : out.modes) m.coeffs = m.coeffs.conjugate();
  return out;
}

Field zero_field(double alpha, const Truncation& t) {
  Field f;
  f.alpha = alpha;
  f.trunc = t;
  for (const Mode& m : truncated_modes(alpha, t)) f.modes.push_back(make_mode_vector(m, alpha));
  return f;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx s, Field a) { return a *= s; }

namespace {

double comp_weight(Component c, double eps, double Pr) {
  switch (c) {
    case Component::Phi: return eps * eps;
    case Component::W1:
    case Component::W2: return 1.0 / Pr;
    default: return 1.0;
  }
}

}  // namespace

cplx inner_product_eps(const ModeVector& u, const ModeVector& v, double eps, double Pr) {
  if (!(u.mode == v.mode) || u.comps != v.comps)
    throw InvalidInput("inner product: mismatched mode support");
  cplx s = 0;
  for (size_t i = 0; i < u.comps.size(); ++i)
    s += comp_weight(u.comps[i], eps, Pr) * u.basis_norms[i] * u.coeffs[i] * std::conj(v.coeffs[i]);
  return s;
}

cplx inner_product_eps(const Field& u, const Field& v, double eps, double Pr) {
  check_same_support(u, v);
  cplx s = 0;
  for (size_t i = 0; i < u.modes.size(); ++i) s += inner_product_eps(u.modes[i], v.modes[i], eps, Pr);
  return s;
}

namespace {

void accumulate(const ModeVector& v, double eps, const Params& p, NormReport& r, double& ne2,
                double& nx12, double& x12, double& dual2, double& D) {
  const double mu = v.mode.mu;
  double row = 0;
  for (size_t i = 0; i < v.comps.size(); ++i) {
    const Component c = v.comps[i];
    const double m2 = v.basis_norms[i] * std::norm(v.coeffs[i]);
    const double w = comp_weight(c, eps, p.Pr);
    row += w * m2;
    if (c != Component::Phi) {
      x12 += w * mu * m2;
      dual2 += w * m2 / mu;
      D += (c == Component::Psi ? p.d : 1.0) * mu * m2;
    }
  }
  ne2 += row;
  nx12 += (1.0 + eps * eps * mu) * row;
  r.per_mode.push_back({v.mode.j, v.mode.k, row, (1.0 + eps * eps * mu) * row});
}

}  // namespace

NormReport norms(const Field& u, double eps, const Params& p) {
  NormReport r;
  double ne2 = 0, nx12 = 0, x12 = 0, dual2 = 0, D = 0;
  for (const auto& v : u.modes) accumulate(v, eps, p, r, ne2, nx12, x12, dual2, D);
  r.n_eps = std::sqrt(ne2);
  r.n_eps_X1 = std::sqrt(nx12);
  r.n_X1 = std::sqrt(x12);
  r.n_dual = std::sqrt(dual2);
  r.D = D;
  return r;
}

NormReport norms(const ModeVector& u, double eps, const Params& p) {
  NormReport r;
  double ne2 = 0, nx12 = 0, x12 = 0, dual2 = 0, D = 0;
  accumulate(u, eps, p, r, ne2, nx12, x12, dual2, D);
  r.n_eps = std::sqrt(ne2);
  r.n_eps_X1 = std::sqrt(nx12);
  r.n_X1 = std::sqrt(x12);
  r.n_dual = std::sqrt(dual2);
  r.D = D;
  return r;
}

}  // namespace achopf
