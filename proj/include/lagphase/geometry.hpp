#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "lagphase/errors.hpp"
#include "lagphase/sym_matrix.hpp"

namespace lagphase {

// Induced metric of the gradient graph (x, Du): g = I + M^2 for the local
// Hessian M. Eigenvalues of g are 1 + lambda_i^2 >= 1, so g is always
// invertible and the Cholesky factorization below cannot fail.
struct InducedMetric {
  SymMatrix g;
  SymMatrix g_inv;
  double vol_density;  // sqrt(det g) >= 1

  InducedMetric(SymMatrix g_, SymMatrix g_inv_, double vol)
      : g(std::move(g_)), g_inv(std::move(g_inv_)), vol_density(vol) {}
};

inline InducedMetric induced_metric(const SymMatrix& m) {
  if (!m.finite()) throw invalid_input("induced_metric: non-finite entries");
  const int n = m.dim();
  Eigen::MatrixXd a = m.dense();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n) + a * a;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  double vol = 1.0;
  for (int i = 0; i < n; ++i) vol *= llt.matrixL()(i, i);
  return InducedMetric(SymMatrix::from_dense(g, 1e-9),
                       SymMatrix::from_dense(inv, 1e-9), vol);
}

// <v, w> with respect to the inverse metric: sum g^{ij} v_i w_j.
inline double metric_inner(const SymMatrix& g_inv, const Eigen::VectorXd& v,
                           const Eigen::VectorXd& w) {
  if (v.size() != g_inv.dim() || w.size() != g_inv.dim())
    throw invalid_input("metric_inner: dimension mismatch");
  return v.dot(g_inv.dense() * w);
}

// Coefficients of the Laplace-Beltrami operator on the graph:
//   second_order = g^{-1},  first_order[j] = sum_{p,q} g^{jp} theta_q M_{pq}.
// The first-order part enters the operator with a minus sign.
struct LaplaceBeltramiCoeffs {
  SymMatrix second_order;
  Eigen::VectorXd first_order;
};

inline LaplaceBeltramiCoeffs laplace_beltrami_coeffs(const SymMatrix& m,
                                                     const Eigen::VectorXd& dtheta) {
  if (dtheta.size() != m.dim())
    throw invalid_input("laplace_beltrami_coeffs: dimension mismatch");
  InducedMetric im = induced_metric(m);
  Eigen::VectorXd first = im.g_inv.dense() * (m.dense() * dtheta);
  return LaplaceBeltramiCoeffs{std::move(im.g_inv), std::move(first)};
}

// |H| = sqrt(sum g^{ij} theta_i theta_j), the metric norm of the phase
// gradient; the rotation to the normal bundle is an isometry.
inline double mean_curvature_norm(const SymMatrix& m, const Eigen::VectorXd& dtheta) {
  if (dtheta.size() != m.dim())
    throw invalid_input("mean_curvature_norm: dimension mismatch");
  InducedMetric im = induced_metric(m);
  return std::sqrt(metric_inner(im.g_inv, dtheta, dtheta));
}

}  // namespace lagphase
