#pragma once

#include <limits>
#include <string>
#include <vector>

#include "achopf/model.hpp"

namespace achopf {

inline constexpr double kDefectiveCondition = std::numeric_limits<double>::infinity();

struct Spectrum {
  CMat matrix;
  std::vector<cplx> values;   // Re descending, ties by Im descending
  std::vector<CVec> right;    // unit 2-norm
  std::vector<CVec> left;     // unit 2-norm, y^H M = lambda y^H
  std::vector<double> residuals;
  std::vector<double> condition;  // 1/|y^H x|, infinity when defective

  int size() const { return static_cast<int>(values.size()); }
  // Left vector rescaled so that dual(i)^H right[i] == 1.
  CVec dual(int i) const;
  // Index of the eigenvalue nearest to z.
  int nearest(cplx z) const;
};

// Dense complex eigensolver for n <= 8. Throws NumericalFailure naming
// `name` if the QR iteration stalls or a pair fails certification.
Spectrum eig_dense(const CMat& M, double tol = 1e-11, const std::string& name = "matrix");

// Eigenvalues only (same algorithm, no vectors), unsorted order not guaranteed.
std::vector<cplx> eigenvalues(const CMat& M, const std::string& name = "matrix");

// Characteristic polynomial coefficients c[0..n], c[n] = 1, via Faddeev-LeVerrier.
std::vector<cplx> char_poly_coeffs(const CMat& M);
// Roots of sum c[i] z^i by Durand-Kerner.
std::vector<cplx> poly_roots(const std::vector<cplx>& c);
// Oracle eigenvalues, n <= 6.
std::vector<cplx> char_poly_roots(const CMat& M);

// Sort in place by the spectrum ordering rule.
void sort_spectral(std::vector<cplx>& v);

}  // namespace achopf
