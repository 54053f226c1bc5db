#include "achopf/smalleig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace achopf {

namespace {

constexpr double kUlp = std::numeric_limits<double>::epsilon();

// Diagonal similarity D^{-1} A D with power-of-two entries.
RVec balance(CMat& A) {
  const int n = static_cast<int>(A.rows());
  RVec D = RVec::Ones(n);
  bool done = false;
  for (int sweep = 0; sweep < 100 && !done; ++sweep) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double c = 0, r = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(A(j, i));
        r += std::abs(A(i, j));
      }
      if (c == 0 || r == 0) continue;
      double g = r / 2, f = 1, s = c + r;
      while (c < g) {
        f *= 2;
        c *= 4;
      }
      g = r * 2;
      while (c >= g) {
        f /= 2;
        c /= 4;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        D[i] *= f;
        A.row(i) /= f;
        A.col(i) *= f;
      }
    }
  }
  return D;
}

void hessenberg(CMat& H) {
  const int n = static_cast<int>(H.rows());
  for (int k = 0; k < n - 2; ++k) {
    CVec x = H.block(k + 1, k, n - k - 1, 1);
    const double alpha = x.norm();
    if (alpha == 0) continue;
    const cplx x0 = x[0];
    const cplx phase = std::abs(x0) == 0 ? cplx(1) : x0 / std::abs(x0);
    CVec v = x;
    v[0] += phase * alpha;
    const double vn = v.norm();
    if (vn == 0) continue;
    v /= vn;
    // H <- (I - 2vv^H) H (I - 2vv^H) on the trailing block
    auto rows = H.block(k + 1, 0, n - k - 1, n);
    Eigen::RowVectorXcd t = v.adjoint() * rows;
    rows -= 2.0 * v * t;
    auto cols = H.block(0, k + 1, n, n - k - 1);
    CVec u = cols * v;
    cols -= 2.0 * u * v.adjoint();
    for (int i = k + 2; i < n; ++i) H(i, k) = 0;
  }
}

// Shifted QR on an upper Hessenberg matrix; eigenvalues only.
std::vector<cplx> hessenberg_qr(CMat H, const std::string& name) {
  const int n = static_cast<int>(H.rows());
  std::vector<cplx> ev(n);
  int hi = n - 1;
  int iter = 0, total = 0;
  const double hnorm = std::max(H.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  while (hi >= 0) {
    if (hi == 0) {
      ev[0] = H(0, 0);
      break;
    }
    int l = hi;
    for (; l > 0; --l) {
      const double s = std::abs(H(l, l)) + std::abs(H(l - 1, l - 1));
      const double ref = s == 0 ? hnorm : s;
      if (std::abs(H(l, l - 1)) <= kUlp * ref) {
        H(l, l - 1) = 0;
        break;
      }
    }
    if (l == hi) {
      ev[hi] = H(hi, hi);
      --hi;
      iter = 0;
      continue;
    }
    ++iter;
    ++total;
    if (iter > 80 || total > 60 * n)
      throw NumericalFailure("eig_dense: QR iteration did not converge for " + name);

    cplx sigma;
    if (iter % 11 == 10) {
      sigma = H(hi, hi) + 0.75 * std::abs(H(hi, hi - 1));
    } else {
      const cplx a = H(hi - 1, hi - 1), b = H(hi - 1, hi), c = H(hi, hi - 1), d = H(hi, hi);
      const cplx half = 0.5 * (a - d);
      const cplx disc = std::sqrt(half * half + b * c);
      const cplx m1 = 0.5 * (a + d) + disc, m2 = 0.5 * (a + d) - disc;
      sigma = std::abs(m1 - d) < std::abs(m2 - d) ? m1 : m2;
    }

    for (int i = l; i <= hi; ++i) H(i, i) -= sigma;
    std::vector<std::pair<cplx, cplx>> rot;
    for (int k = l; k < hi; ++k) {
      const cplx x = H(k, k), y = H(k + 1, k);
      const double r = std::hypot(std::abs(x), std::abs(y));
      cplx c = 1, s = 0;
      if (r != 0) {
        c = x / r;
        s = y / r;
      }
      rot.emplace_back(c, s);
      for (int j = k; j <= hi; ++j) {
        const cplx p = H(k, j), q = H(k + 1, j);
        H(k, j) = std::conj(c) * p + std::conj(s) * q;
        H(k + 1, j) = -s * p + c * q;
      }
    }
    for (int k = l; k < hi; ++k) {
      const auto [c, s] = rot[k - l];
      const int top = std::min(k + 2, hi);
      for (int i = l; i <= top; ++i) {
        const cplx p = H(i, k), q = H(i, k + 1);
        H(i, k) = p * c + q * s;
        H(i, k + 1) = -p * std::conj(s) + q * std::conj(c);
      }
    }
    for (int i = l; i <= hi; ++i) H(i, i) += sigma;
  }
  return ev;
}

// LU with partial pivoting; exactly zero pivots are nudged so inverse
// iteration on a singular shift still produces a direction.
struct SmallLU {
  CMat LU;
  std::vector<int> piv;

  explicit SmallLU(CMat A) : LU(std::move(A)) {
    const int n = static_cast<int>(LU.rows());
    piv.resize(n);
    const double scale = std::max(LU.cwiseAbs().maxCoeff(), 1e-300);
    for (int k = 0; k < n; ++k) {
      int p = k;
      for (int i = k + 1; i < n; ++i)
        if (std::abs(LU(i, k)) > std::abs(LU(p, k))) p = i;
      piv[k] = p;
      if (p != k) LU.row(k).swap(LU.row(p));
      if (std::abs(LU(k, k)) < kUlp * scale) LU(k, k) = kUlp * scale;
      for (int i = k + 1; i < n; ++i) {
        LU(i, k) /= LU(k, k);
        for (int j = k + 1; j < n; ++j) LU(i, j) -= LU(i, k) * LU(k, j);
      }
    }
  }

  CVec solve(CVec b) const {
    const int n = static_cast<int>(LU.rows());
    for (int k = 0; k < n; ++k) std::swap(b[k], b[piv[k]]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) b[i] -= LU(i, j) * b[j];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) b[i] -= LU(i, j) * b[j];
      b[i] /= LU(i, i);
    }
    return b;
  }
};

CVec start_vector(int n) {
  CVec v(n);
  for (int i = 0; i < n; ++i) v[i] = cplx(1.0 + 0.1 * i, 0.05 * (i % 3));
  return v.normalized();
}

CVec inverse_iteration(const CMat& A, cplx lambda) {
  const int n = static_cast<int>(A.rows());
  SmallLU lu(A - lambda * CMat::Identity(n, n));
  CVec x = start_vector(n);
  for (int it = 0; it < 3; ++it) {
    x = lu.solve(x);
    const double nx = x.norm();
    if (!std::isfinite(nx) || nx == 0) break;
    x /= nx;
  }
  return x;
}

}  // namespace

void sort_spectral(std::vector<cplx>& v) {
  double scale = 1;
  for (auto z : v) scale = std::max(scale, std::abs(z));
  const double tol = 1e-12 * scale;
  std::stable_sort(v.begin(), v.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
  size_t i = 0;
  while (i < v.size()) {
    size_t j = i + 1;
    while (j < v.size() && v[i].real() - v[j].real() <= tol) ++j;
    std::stable_sort(v.begin() + i, v.begin() + j, [](cplx a, cplx b) { return a.imag() > b.imag(); });
    i = j;
  }
}

CVec Spectrum::dual(int i) const {
  const cplx s = left[i].dot(right[i]);  // y^H x
  return left[i] / std::conj(s);
}

int Spectrum::nearest(cplx z) const {
  int best = 0;
  for (int i = 1; i < size(); ++i)
    if (std::abs(values[i] - z) < std::abs(values[best] - z)) best = i;
  return best;
}

std::vector<cplx> eigenvalues(const CMat& M, const std::string& name) {
  if (M.rows() != M.cols()) throw InvalidInput("eig_dense: matrix must be square: " + name);
  if (M.rows() > 8) throw InvalidInput("eig_dense: dimension exceeds 8: " + name);
  if (!M.allFinite()) throw InvalidInput("eig_dense: non-finite entries in " + name);
  CMat B = M;
  balance(B);
  hessenberg(B);
  return hessenberg_qr(B, name);
}

Spectrum eig_dense(const CMat& M, double tol, const std::string& name) {
  if (M.rows() != M.cols()) throw InvalidInput("eig_dense: matrix must be square: " + name);
  if (M.rows() > 8) throw InvalidInput("eig_dense: dimension exceeds 8: " + name);
  if (!M.allFinite()) throw InvalidInput("eig_dense: non-finite entries in " + name);
  const int n = static_cast<int>(M.rows());
  CMat B = M;
  const RVec D = balance(B);
  CMat H = B;
  hessenberg(H);
  std::vector<cplx> vals = hessenberg_qr(H, name);
  sort_spectral(vals);

  Spectrum S;
  S.matrix = M;
  const double mnorm = M.norm();
  const CMat Bh = B.adjoint();
  for (int i = 0; i < n; ++i) {
    cplx lam = vals[i];
    CVec xb = inverse_iteration(B, lam);
    CVec yb = inverse_iteration(Bh, std::conj(lam));
    CVec x = D.cast<cplx>().asDiagonal() * xb;
    CVec y = D.cwiseInverse().cast<cplx>().asDiagonal() * yb;
    x.normalize();
    y.normalize();
    double res = (M * x - lam * x).norm();
    if (!(res <= tol * std::max(mnorm, 1e-300))) {
      // one Rayleigh-quotient refinement before giving up
      const cplx yx = y.dot(x);
      if (std::abs(yx) > 0) {
        const cplx rq = y.dot(M * x) / yx;
        CVec x2 = D.cast<cplx>().asDiagonal() * inverse_iteration(B, rq);
        x2.normalize();
        const double res2 = (M * x2 - rq * x2).norm();
        if (res2 < res) {
          lam = rq;
          x = x2;
          res = res2;
        }
      }
    }
    if (!(res <= tol * std::max(mnorm, 1e-300)) && mnorm > 0)
      throw NumericalFailure("eig_dense: eigenpair residual above tolerance for " + name);
    const double yx = std::abs(y.dot(x));
    S.values.push_back(lam);
    S.right.push_back(x);
    S.left.push_back(y);
    S.residuals.push_back(res);
    S.condition.push_back(yx < 1e-12 ? kDefectiveCondition : 1.0 / yx);
  }
  return S;
}

std::vector<cplx> char_poly_coeffs(const CMat& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<cplx> c(n + 1);
  c[n] = 1;
  CMat Mk = CMat::Zero(n, n);
  const CMat I = CMat::Identity(n, n);
  for (int k = 1; k <= n; ++k) {
    Mk = A * Mk + c[n - k + 1] * I;
    c[n - k] = -(A * Mk).trace() / static_cast<double>(k);
  }
  return c;
}

std::vector<cplx> poly_roots(const std::vector<cplx>& c_in) {
  const int n = static_cast<int>(c_in.size()) - 1;
  if (n < 1) return {};
  std::vector<cplx> c = c_in;
  for (auto& v : c) v /= c_in[n];
  double bound = 0;
  for (int i = 0; i < n; ++i) bound = std::max(bound, std::abs(c[i]));
  bound += 1;
  auto eval = [&](cplx z) {
    cplx p = c[n];
    for (int i = n - 1; i >= 0; --i) p = p * z + c[i];
    return p;
  };
  auto eval_abs = [&](cplx z) {
    double p = std::abs(c[n]);
    for (int i = n - 1; i >= 0; --i) p = p * std::abs(z) + std::abs(c[i]);
    return p;
  };
  std::vector<cplx> z(n);
  const cplx seed(0.4, 0.9);
  cplx w = 1;
  for (int i = 0; i < n; ++i) {
    w *= seed;
    z[i] = bound * 0.5 * w;
  }
  bool converged = false;
  for (int it = 0; it < 5000 && !converged; ++it) {
    double maxstep = 0;
    for (int i = 0; i < n; ++i) {
      cplx den = 1;
      for (int j = 0; j < n; ++j)
        if (j != i) den *= (z[i] - z[j]);
      if (den == cplx(0)) den = kUlp;
      const cplx step = eval(z[i]) / den;
      z[i] -= step;
      maxstep = std::max(maxstep, std::abs(step) / std::max(1.0, std::abs(z[i])));
    }
    if (maxstep <= 1e-13) converged = true;
  }
  if (!converged) {
    // Clustered roots stall at the rounding floor; accept when the
    // backward residual is at that floor, otherwise report stagnation.
    for (int i = 0; i < n; ++i)
      if (std::abs(eval(z[i])) > 1e-9 * eval_abs(z[i]))
        throw NumericalFailure("char_poly_roots: Durand-Kerner stagnated");
  }
  return z;
}

std::vector<cplx> char_poly_roots(const CMat& M) {
  if (M.rows() != M.cols() || M.rows() > 6) throw InvalidInput("char_poly_roots: need square n <= 6");
  auto r = poly_roots(char_poly_coeffs(M));
  sort_spectral(r);
  return r;
}

}  // namespace achopf
