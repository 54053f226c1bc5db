#pragma once

#include <functional>

#include "achopf/model.hpp"
#include "achopf/smalleig.hpp"

namespace achopf {

// Scale vector taking coefficients to an orthonormal frame of the weighted
// product: s_c = sqrt(W_c * nu_c).
RVec frame_scale(const Mode& m, const std::vector<Component>& comps, const Params& p, double eps,
                 double alpha);

// Solve A x = rhs through the frame similarity S A S^{-1}; better scaled than
// a raw solve when the eps^-2 row dominates.
CVec solve_in_frame(const CMat& A, const RVec& s, const CVec& rhs);

// 2-norm of diag(s_out) A diag(s_in)^{-1}.
double frame_opnorm(const CMat& A, const RVec& s_out, const RVec& s_in);
double min_singular(const CMat& A, const RVec& s);

// exp(t A) for a fixed small block, built once and applied at many times.
class BlockExp {
 public:
  BlockExp() = default;
  BlockExp(const CMat& A, const RVec& s);
  CMat matrix(double t) const;
  CVec apply(double t, const CVec& x) const;
  bool eigen_path() const { return use_eigen_; }
  const std::vector<cplx>& eigenvalues() const { return lam_; }
  // Modal form x = V c with V in the caller's coordinates; false when the
  // eigenbasis is too ill-conditioned to use.
  bool modal(const CVec& x, CMat& V, CVec& c) const;

 private:
  CMat A_;      // in frame coordinates
  RVec s_;
  bool diagonal_ = false;
  bool use_eigen_ = false;
  std::vector<cplx> lam_;
  CMat V_, Vinv_;
};

// Scaling-and-squaring Taylor exponential of a small dense matrix.
CMat expm_taylor(const CMat& A);

// Run fn(i) for i in [0, n) on up to ACHOPF_THREADS workers. Each index is
// processed independently so results are identical for any thread count.
void parallel_for(int n, const std::function<void(int)>& fn);
int worker_count();

}  // namespace achopf
