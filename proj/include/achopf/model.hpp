#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace achopf {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

// Rejected input: precondition or invariant violated by the caller.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not deliver its contract.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Params {
  double Pr = 2.0;
  double d = 0.1;
  double R2 = 44.721359549995796;  // sqrt(2000)
  double alpha = 2.2214414690791831;  // pi / sqrt(2)

  bool hopf_admissible() const { return Pr > 1.0 && d > 0.0 && d < 1.0; }
  void validate() const;
};

struct PhysicalParams {
  double nu, dT, dS, aT, aS, g, ell, T0, T1, S0, S1;
  double alpha_physical;
};

struct Nondimensional {
  Params params;
  double R1;
};

Nondimensional nondimensionalize(const PhysicalParams& p);

enum class Component { Phi = 0, W1 = 1, W2 = 2, Theta = 3, Psi = 4 };
enum class ModeKind { Full, Acoustic, Scalar, Null };

const char* component_name(Component c);
const char* kind_name(ModeKind k);

struct Mode {
  int j = 0;
  int k = 0;
  double a = 0;   // alpha * j
  double b = 0;   // k * pi
  double mu = 0;  // a^2 + b^2
  ModeKind kind = ModeKind::Null;

  // Components carried by the compressible system on this mode.
  std::vector<Component> components() const;
  int dim() const { return static_cast<int>(components().size()); }
  // Integral over the cell of the squared basis function for component c.
  double basis_norm(Component c, double alpha) const;

  bool operator==(const Mode& o) const { return j == o.j && k == o.k; }
};

Mode make_mode(int j, int k, double alpha);

struct Truncation {
  int j_max = 16;
  int k_max = 16;
};

// Canonical mode order: j outer, k inner, (0,0) skipped.
std::vector<Mode> truncated_modes(double alpha, const Truncation& t);

enum class Operator { AC, ACAdjoint, INC, INCAdjoint, KAC, KINC };

struct ModeMatrix {
  Mode mode;
  Operator which;
  std::vector<Component> comps;
  CMat entries;
  std::optional<double> eps;
  double R1 = 0;
};

// Components of the incompressible reduction on a mode.
std::vector<Component> inc_components(const Mode& m);

ModeMatrix assemble(const Mode& m, Operator which, const Params& p, double R1,
                    std::optional<double> eps = std::nullopt);

// Diagonal of the inner-product weight for the given component list.
// eps > 0: compressible weight (eps^2, 1/Pr, 1/Pr, 1, 1).
// eps == 0: incompressible weight; on full modes w2 carries 1/(Pr q).
RVec weight_diagonal(const Mode& m, const std::vector<Component>& comps, const Params& p,
                     double eps);

struct ModeVector {
  Mode mode;
  std::vector<Component> comps;
  CVec coeffs;
  RVec basis_norms;

  cplx get(Component c) const;
  void set(Component c, cplx v);
};

ModeVector make_mode_vector(const Mode& m, const std::vector<Component>& comps, double alpha);
ModeVector make_mode_vector(const Mode& m, double alpha);

// A truncated field: one ModeVector per mode, canonical order.
struct Field {
  double alpha = 0;
  Truncation trunc;
  std::vector<ModeVector> modes;

  int index_of(int j, int k) const;
  ModeVector& at(int j, int k) { return modes.at(index_of(j, k)); }
  const ModeVector& at(int j, int k) const { return modes.at(index_of(j, k)); }
  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(cplx s);
  Field conj() const;
};

Field zero_field(double alpha, const Truncation& t);
Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx s, Field a);

// (u, v)_eps, conjugate-linear in v. eps = 0 drops phi (fluid pairing).
cplx inner_product_eps(const ModeVector& u, const ModeVector& v, double eps, double Pr);
cplx inner_product_eps(const Field& u, const Field& v, double eps, double Pr);

struct ModeNormRow {
  int j, k;
  double n_eps_sq;
  double n_eps_X1_sq;
};

struct NormReport {
  double n_eps = 0;
  double n_eps_X1 = 0;
  double n_X1 = 0;
  double n_dual = 0;
  double D = 0;
  std::vector<ModeNormRow> per_mode;
};

NormReport norms(const Field& u, double eps, const Params& p);
NormReport norms(const ModeVector& u, double eps, const Params& p);

}  // namespace achopf
