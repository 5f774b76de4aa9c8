#pragma once

// Dense 1D collocation oracle for radial problems on a ball:
//   atan(u'') + (n-1) atan(u'/r) = theta(r) on (0, R),  u'(0) = 0,  u(R) = phi0.
// Independent of the PDE solver; used to cross-check center values.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

inline Eigen::VectorXd radial_profile(int n, const std::function<double(double)>& theta,
                                      double R, double phi0, int m = 400) {
  const double dr = R / m;
  // unknowns u_0..u_{m-1}; u_m = phi0 is the boundary value
  Eigen::VectorXd u(m);
  const double coeff = 0.5 * std::tan(theta(0.0) / n);
  for (int i = 0; i < m; ++i) {
    const double r = i * dr;
    u[i] = phi0 + coeff * (r * r - R * R);
  }

  auto value = [&](const Eigen::VectorXd& v, int i) -> double {
    return i < m ? v[i] : phi0;
  };

  // residual evaluation bottoms out near 1e-16/dr^2 from second-difference
  // cancellation, hence the absolute floor below
  for (int newton = 0; newton < 80; ++newton) {
    Eigen::VectorXd f(m);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      if (i == 0) {
        const double upp = 2.0 * (value(u, 1) - u[0]) / (dr * dr);
        f[0] = n * std::atan(upp) - theta(0.0);
        const double d = n / (1.0 + upp * upp) * 2.0 / (dr * dr);
        jac(0, 0) = -d;
        if (m > 1) jac(0, 1) = d;
      } else {
        const double r = i * dr;
        const double upp = (value(u, i + 1) - 2.0 * u[i] + u[i - 1]) / (dr * dr);
        const double up = (value(u, i + 1) - u[i - 1]) / (2.0 * dr);
        f[i] = std::atan(upp) + (n - 1) * std::atan(up / r) - theta(r);
        const double da = 1.0 / (1.0 + upp * upp) / (dr * dr);
        const double db = (n - 1) / (1.0 + (up / r) * (up / r)) / (2.0 * dr * r);
        jac(i, i - 1) += da - db;
        jac(i, i) += -2.0 * da;
        if (i + 1 < m) jac(i, i + 1) += da + db;
      }
    }
    if (f.cwiseAbs().maxCoeff() < 1e-9) return u;
    Eigen::VectorXd delta = jac.partialPivLu().solve(-f);
    u += delta;
    if (delta.cwiseAbs().maxCoeff() < 1e-12 * (1.0 + u.cwiseAbs().maxCoeff())) return u;
  }
  throw std::runtime_error("radial oracle did not converge");
}

inline double radial_center_value(int n, const std::function<double(double)>& theta,
                                  double R, double phi0, int m = 400) {
  return radial_profile(n, theta, R, phi0, m)[0];
}

}  // namespace oracles
