#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "lagphase/errors.hpp"

namespace lagphase {

enum class DomainKind { Box, Ball, Ellipsoid };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Box: return "box";
    case DomainKind::Ball: return "ball";
    case DomainKind::Ellipsoid: return "ellipsoid";
  }
  return "?";
}

// Origin-centered computational domain. Box is the axis-aligned rectangle
// given by half-widths; it is the one non-strictly-convex kind and reports
// must carry that flag. Ball and ellipsoid are strictly convex.
struct DomainSpec {
  DomainKind kind = DomainKind::Ball;
  int dim = 2;
  std::vector<double> params;  // box: half-widths; ball: {radius}; ellipsoid: semi-axes
  double spacing = 0.1;        // lattice spacing h

  static DomainSpec box(std::vector<double> half_widths, double h) {
    DomainSpec d;
    d.kind = DomainKind::Box;
    d.dim = static_cast<int>(half_widths.size());
    d.params = std::move(half_widths);
    d.spacing = h;
    d.validate();
    return d;
  }

  static DomainSpec ball(int dim, double radius, double h) {
    DomainSpec d;
    d.kind = DomainKind::Ball;
    d.dim = dim;
    d.params = {radius};
    d.spacing = h;
    d.validate();
    return d;
  }

  static DomainSpec ellipsoid(std::vector<double> semi_axes, double h) {
    DomainSpec d;
    d.kind = DomainKind::Ellipsoid;
    d.dim = static_cast<int>(semi_axes.size());
    d.params = std::move(semi_axes);
    d.spacing = h;
    d.validate();
    return d;
  }

  void validate() const {
    if (dim < 2 || dim > 3) throw invalid_input("DomainSpec: dim must be 2 or 3");
    if (!(spacing > 0.0)) throw invalid_input("DomainSpec: spacing must be positive");
    const std::size_t want = kind == DomainKind::Ball ? 1u : static_cast<std::size_t>(dim);
    if (params.size() != want) throw invalid_input("DomainSpec: wrong parameter count");
    for (double p : params)
      if (!(p > 0.0) || !std::isfinite(p))
        throw invalid_input("DomainSpec: geometry parameters must be positive");
  }

  bool strictly_convex() const { return kind != DomainKind::Box; }

  double bounding_half_width(int axis) const {
    switch (kind) {
      case DomainKind::Box: return params[static_cast<std::size_t>(axis)];
      case DomainKind::Ball: return params[0];
      case DomainKind::Ellipsoid: return params[static_cast<std::size_t>(axis)];
    }
    return 0.0;
  }

  // Negative inside, zero on the boundary, positive outside. Box and ball are
  // in length units; the ellipsoid level is the normalized radius minus one.
  double level(const Eigen::VectorXd& x) const {
    switch (kind) {
      case DomainKind::Box: {
        double m = -std::numeric_limits<double>::infinity();
        for (int d = 0; d < dim; ++d)
          m = std::max(m, std::abs(x[d]) - params[static_cast<std::size_t>(d)]);
        return m;
      }
      case DomainKind::Ball:
        return x.norm() - params[0];
      case DomainKind::Ellipsoid: {
        double q = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double t = x[d] / params[static_cast<std::size_t>(d)];
          q += t * t;
        }
        return std::sqrt(q) - 1.0;
      }
    }
    return 0.0;
  }

  double level_tolerance() const {
    if (kind == DomainKind::Ellipsoid) return 1e-12;
    double scale = 0.0;
    for (double p : params) scale = std::max(scale, p);
    return 1e-12 * std::max(1.0, scale);
  }

  bool inside(const Eigen::VectorXd& x) const { return level(x) < -level_tolerance(); }

  bool on_boundary(const Eigen::VectorXd& x) const {
    return std::abs(level(x)) <= level_tolerance();
  }

  // Fraction s in (0, 1] with x + s*step on the boundary, for x inside and
  // x + step outside or on the boundary. Closed form per kind.
  double crossing_fraction(const Eigen::VectorXd& x, const Eigen::VectorXd& step) const {
    double s = 1.0;
    switch (kind) {
      case DomainKind::Box: {
        s = std::numeric_limits<double>::infinity();
        for (int d = 0; d < dim; ++d) {
          if (step[d] == 0.0) continue;
          const double a = params[static_cast<std::size_t>(d)];
          const double target = step[d] > 0.0 ? a : -a;
          const double cand = (target - x[d]) / step[d];
          if (cand > 0.0) s = std::min(s, cand);
        }
        break;
      }
      case DomainKind::Ball:
      case DomainKind::Ellipsoid: {
        // quadratic |(x + s*step)/a|^2 = r^2 (a = 1, r = radius for the ball)
        Eigen::VectorXd xs = x, ds = step;
        double r2 = 1.0;
        if (kind == DomainKind::Ball) {
          r2 = params[0] * params[0];
        } else {
          for (int d = 0; d < dim; ++d) {
            xs[d] /= params[static_cast<std::size_t>(d)];
            ds[d] /= params[static_cast<std::size_t>(d)];
          }
        }
        const double a = ds.squaredNorm();
        const double b = 2.0 * xs.dot(ds);
        const double c = xs.squaredNorm() - r2;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0 || a == 0.0)
          throw error("crossing_fraction: ray does not reach the boundary");
        s = (-b + std::sqrt(disc)) / (2.0 * a);
        break;
      }
    }
    if (!(s > 0.0)) throw error("crossing_fraction: start point not inside");
    return std::min(s, 1.0);
  }

  // Distance to the boundary; exact for box and ball, first-order estimate
  // for the ellipsoid (only used for band classification).
  double distance_to_boundary(const Eigen::VectorXd& x) const {
    switch (kind) {
      case DomainKind::Box: {
        double m = std::numeric_limits<double>::infinity();
        for (int d = 0; d < dim; ++d)
          m = std::min(m, params[static_cast<std::size_t>(d)] - std::abs(x[d]));
        return m;
      }
      case DomainKind::Ball:
        return params[0] - x.norm();
      case DomainKind::Ellipsoid: {
        double q = 0.0, grad2 = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double a = params[static_cast<std::size_t>(d)];
          const double t = x[d] / a;
          q += t * t;
          grad2 += t * t / (a * a);
        }
        const double qs = std::sqrt(q);
        double amin = params[0];
        for (double p : params) amin = std::min(amin, p);
        if (qs < 1e-9) return amin;
        return (1.0 - qs) * qs / std::sqrt(grad2);
      }
    }
    return 0.0;
  }
};

}  // namespace lagphase
