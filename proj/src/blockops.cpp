#include "achopf/blockops.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace achopf {

RVec frame_scale(const Mode& m, const std::vector<Component>& comps, const Params& p, double eps,
                 double alpha) {
  RVec w = weight_diagonal(m, comps, p, eps);
  RVec s(w.size());
  for (int i = 0; i < w.size(); ++i) s[i] = std::sqrt(w[i] * m.basis_norm(comps[i], alpha));
  return s;
}

CVec solve_in_frame(const CMat& A, const RVec& s, const CVec& rhs) {
  const auto S = s.cast<cplx>().asDiagonal();
  const auto Si = s.cwiseInverse().cast<cplx>().asDiagonal();
  CMat At = S * A * Si;
  CVec y = At.partialPivLu().solve(S * rhs);
  return Si * y;
}

double frame_opnorm(const CMat& A, const RVec& s_out, const RVec& s_in) {
  CMat At = s_out.cast<cplx>().asDiagonal() * A * s_in.cwiseInverse().cast<cplx>().asDiagonal();
  Eigen::JacobiSVD<CMat> svd(At);
  return svd.singularValues()(0);
}

double min_singular(const CMat& A, const RVec& s) {
  CMat At = s.cast<cplx>().asDiagonal() * A * s.cwiseInverse().cast<cplx>().asDiagonal();
  Eigen::JacobiSVD<CMat> svd(At);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

CMat expm_taylor(const CMat& A) {
  const int n = static_cast<int>(A.rows());
  const double norm1 = A.cwiseAbs().colwise().sum().maxCoeff();
  int sq = 0;
  if (norm1 > 0.5) sq = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const CMat B = A / std::ldexp(1.0, sq);
  CMat E = CMat::Identity(n, n), term = CMat::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = term * B / static_cast<double>(k);
    E += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * E.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < sq; ++i) E = E * E;
  return E;
}

BlockExp::BlockExp(const CMat& A, const RVec& s) : s_(s) {
  const int n = static_cast<int>(A.rows());
  A_ = s.cast<cplx>().asDiagonal() * A * s.cwiseInverse().cast<cplx>().asDiagonal();
  CMat off = A_;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() == 0) {
    diagonal_ = true;
    for (int i = 0; i < n; ++i) lam_.push_back(A_(i, i));
    return;
  }
  try {
    Spectrum S = eig_dense(A_, 1e-10, "propagator block");
    V_.resize(n, n);
    for (int i = 0; i < n; ++i) V_.col(i) = S.right[i];
    lam_ = S.values;
    Eigen::PartialPivLU<CMat> lu(V_);
    Vinv_ = lu.inverse();
    const double cond = V_.norm() * Vinv_.norm();
    use_eigen_ = std::isfinite(cond) && cond < 1e8;
  } catch (const NumericalFailure&) {
    use_eigen_ = false;
  }
}

CMat BlockExp::matrix(double t) const {
  const int n = static_cast<int>(A_.rows());
  CMat E;
  if (diagonal_) {
    E = CMat::Zero(n, n);
    for (int i = 0; i < n; ++i) E(i, i) = std::exp(t * lam_[i]);
  } else if (use_eigen_) {
    CVec ex(n);
    for (int i = 0; i < n; ++i) ex[i] = std::exp(t * lam_[i]);
    E = V_ * ex.asDiagonal() * Vinv_;
  } else {
    E = expm_taylor(t * A_);
  }
  return s_.cwiseInverse().cast<cplx>().asDiagonal() * E * s_.cast<cplx>().asDiagonal();
}

CVec BlockExp::apply(double t, const CVec& x) const {
  const int n = static_cast<int>(A_.rows());
  CVec y = s_.cast<cplx>().asDiagonal() * x;
  if (diagonal_) {
    for (int i = 0; i < n; ++i) y[i] *= std::exp(t * lam_[i]);
  } else if (use_eigen_) {
    CVec c = Vinv_ * y;
    for (int i = 0; i < n; ++i) c[i] *= std::exp(t * lam_[i]);
    y = V_ * c;
  } else {
    y = expm_taylor(t * A_) * y;
  }
  return s_.cwiseInverse().cast<cplx>().asDiagonal() * y;
}

bool BlockExp::modal(const CVec& x, CMat& V, CVec& c) const {
  const int n = static_cast<int>(A_.rows());
  if (diagonal_) {
    V = CMat::Identity(n, n);
    c = x;
    return true;
  }
  if (!use_eigen_) return false;
  V = s_.cwiseInverse().cast<cplx>().asDiagonal() * V_;
  c = Vinv_ * (s_.cast<cplx>().asDiagonal() * x);
  return true;
}

int worker_count() {
  const char* env = std::getenv("ACHOPF_THREADS");
  int n = 1;
  if (env) {
    n = std::atoi(env);
  } else {
    n = static_cast<int>(std::thread::hardware_concurrency());
  }
  return std::max(1, std::min(n, 64));
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace achopf
