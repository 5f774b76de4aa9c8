#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lagphase/domain.hpp"
#include "lagphase/errors.hpp"
#include "lagphase/operator_core.hpp"
#include "lagphase/sym_matrix.hpp"
#include "lagphase/util.hpp"

namespace lagphase {

// Affine functional of the interior unknowns: sum of weighted node values
// plus a constant carrying the Dirichlet data contributions.
struct LinearForm {
  std::vector<std::pair<int, double>> terms;  // (interior node id, weight), id-sorted
  double constant = 0.0;

  double eval(const Eigen::VectorXd& u) const {
    double v = constant;
    for (const auto& [id, w] : terms) v += w * u[id];
    return v;
  }
};

enum class NodeClass { Regular = 0, BoundaryAdjacent = 1 };

// One finite-difference arm. Full arms point at an interior neighbor; cut
// arms end on the boundary at fraction alpha of a lattice step and carry the
// Dirichlet value at the crossing.
struct ArmInfo {
  int neighbor = -1;
  double alpha = 1.0;
  double boundary_value = 0.0;
};

struct GridNode {
  Eigen::VectorXd x;
  std::array<int, 3> idx{0, 0, 0};
  NodeClass cls = NodeClass::Regular;
  std::array<ArmInfo, 6> arms{};  // [2d] plus arm, [2d+1] minus arm along axis d
  int min_mixed_order = 2;        // 2 central, 1 one-sided, 0 ghost-extrapolated
};

struct GridSignature {
  int dim = 0;
  DomainKind kind = DomainKind::Ball;
  std::vector<double> params;
  double h = 0.0;
  int node_count = 0;

  bool operator==(const GridSignature& o) const {
    return dim == o.dim && kind == o.kind && params == o.params && h == o.h &&
           node_count == o.node_count;
  }
};

// Discretized Dirichlet problem on an axis-aligned lattice with
// Shortley-Weller treatment at the curved boundary.
struct GridProblem {
  DomainSpec domain;
  PhaseSpec theta;
  double h = 0.0;
  int dim = 0;

  std::vector<GridNode> nodes;
  // per node: n(n+1)/2 Hessian entry forms (upper-triangle order), then n
  // gradient forms
  std::vector<std::array<LinearForm, 6>> hessian_forms;
  std::vector<std::array<LinearForm, 3>> gradient_forms;

  Eigen::VectorXd theta_field;
  Eigen::VectorXd u;
  PhaseClass classification = PhaseClass::Mixed;

  std::vector<std::pair<Eigen::VectorXd, double>> boundary_samples;  // (point, phi)

  // lattice index map: >= 0 interior id, -1 exterior, -2 boundary lattice point
  std::array<int, 3> lat_lo{0, 0, 0};
  std::array<int, 3> lat_hi{0, 0, 0};
  std::vector<int> lat_cell;
  std::map<std::int64_t, double> boundary_lattice_values;

  int interior_count() const { return static_cast<int>(nodes.size()); }

  int hessian_entry_count() const { return dim * (dim + 1) / 2; }

  static int entry_index(int i, int j, int dim) {
    if (i > j) std::swap(i, j);
    return i * (2 * dim - i - 1) / 2 + j;
  }

  std::int64_t linear_cell(const std::array<int, 3>& idx) const {
    std::int64_t lin = 0;
    for (int d = 0; d < dim; ++d) {
      lin = lin * (lat_hi[d] - lat_lo[d] + 1) + (idx[d] - lat_lo[d]);
    }
    return lin;
  }

  bool in_lattice(const std::array<int, 3>& idx) const {
    for (int d = 0; d < dim; ++d)
      if (idx[d] < lat_lo[d] || idx[d] > lat_hi[d]) return false;
    return true;
  }

  int cell_state(const std::array<int, 3>& idx) const {
    if (!in_lattice(idx)) return -1;
    return lat_cell[static_cast<std::size_t>(linear_cell(idx))];
  }

  // interior node id at a lattice offset from node a, or -1
  int neighbor_at(int a, const std::array<int, 3>& offset) const {
    std::array<int, 3> idx = nodes[static_cast<std::size_t>(a)].idx;
    for (int d = 0; d < dim; ++d) idx[d] += offset[d];
    const int s = cell_state(idx);
    return s >= 0 ? s : -1;
  }

  Eigen::VectorXd lattice_point(const std::array<int, 3>& idx) const {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x[d] = idx[d] * h;
    return x;
  }

  GridSignature signature() const {
    return GridSignature{dim, domain.kind, domain.params, h, interior_count()};
  }

  // Re-evaluates the phase field, for phase functions that depend on the
  // solution value. Validates the operator range at every node.
  void refresh_theta(const Eigen::VectorXd& u_values) {
    const double limit = phase_range_limit(dim);
    for (int a = 0; a < interior_count(); ++a) {
      const double t = theta.value(nodes[static_cast<std::size_t>(a)].x, u_values[a]);
      if (!(std::abs(t) < limit))
        throw out_of_range_error("phase out of range (-n*pi/2, n*pi/2) at node " +
                                 std::to_string(a));
      theta_field[a] = t;
    }
  }
};

namespace detail {

struct PointRef {
  enum class Kind { Interior, BoundaryValue, Outside } kind;
  int id = -1;
  double value = 0.0;
};

inline PointRef resolve_point(const GridProblem& p, std::array<int, 3> idx) {
  const int s = p.cell_state(idx);
  if (s >= 0) return {PointRef::Kind::Interior, s, 0.0};
  if (s == -2) {
    auto it = p.boundary_lattice_values.find(p.linear_cell(idx));
    return {PointRef::Kind::BoundaryValue, -1, it->second};
  }
  return {PointRef::Kind::Outside, -1, 0.0};
}

class FormBuilder {
 public:
  void add_node(int id, double w) { acc_[id] += w; }
  void add_const(double v) { constant_ += v; }

  LinearForm build() const {
    LinearForm f;
    f.constant = constant_;
    f.terms.assign(acc_.begin(), acc_.end());
    return f;
  }

 private:
  std::map<int, double> acc_;
  double constant_ = 0.0;
};

}  // namespace detail

// Builds the discrete problem: classifies lattice points, computes
// Shortley-Weller arms with Dirichlet values at the crossings, assembles the
// Hessian/gradient stencil forms, and samples the phase field.
inline GridProblem build_grid(const DomainSpec& domain,
                              const std::function<double(const Eigen::VectorXd&)>& phi,
                              const PhaseSpec& theta) {
  domain.validate();
  const int n = domain.dim;
  if (theta.dim != n) throw invalid_input("build_grid: phase dimension mismatch");

  GridProblem p;
  p.domain = domain;
  p.theta = theta;
  p.h = domain.spacing;
  p.dim = n;

  for (int d = 0; d < n; ++d) {
    const double bound = domain.bounding_half_width(d);
    p.lat_lo[d] = static_cast<int>(std::floor(-bound / p.h)) - 1;
    p.lat_hi[d] = static_cast<int>(std::ceil(bound / p.h)) + 1;
  }

  std::int64_t total = 1;
  for (int d = 0; d < n; ++d) total *= (p.lat_hi[d] - p.lat_lo[d] + 1);
  if (total > 50'000'000) throw degenerate_grid_error("build_grid: lattice too large");
  p.lat_cell.assign(static_cast<std::size_t>(total), -1);

  auto for_each_cell = [&](auto&& fn) {
    std::array<int, 3> idx{0, 0, 0};
    std::function<void(int)> rec = [&](int d) {
      if (d == n) {
        fn(idx);
        return;
      }
      for (idx[d] = p.lat_lo[d]; idx[d] <= p.lat_hi[d]; ++idx[d]) rec(d + 1);
    };
    rec(0);
  };

  // classification: strictly inside -> interior candidate (-3), on-boundary
  // lattice point -> -2 with its Dirichlet value, else exterior (-1)
  for_each_cell([&](const std::array<int, 3>& idx) {
    const Eigen::VectorXd x = p.lattice_point(idx);
    const double lv = domain.level(x);
    const double tol = domain.level_tolerance();
    int state = -1;
    if (lv < -tol)
      state = -3;
    else if (std::abs(lv) <= tol)
      state = -2;
    p.lat_cell[static_cast<std::size_t>(p.linear_cell(idx))] = state;
    if (state == -2) p.boundary_lattice_values[p.linear_cell(idx)] = phi(x);
  });

  // snap pass: interior candidates whose boundary crossing along some axis is
  // closer than 1e-9 of a step behave like boundary points; the tiny arm
  // would otherwise destroy the conditioning of the one-sided stencils
  for (int pass = 0; pass < 3; ++pass) {
    bool changed = false;
    for_each_cell([&](const std::array<int, 3>& idx) {
      const std::int64_t lin = p.linear_cell(idx);
      if (p.lat_cell[static_cast<std::size_t>(lin)] != -3) return;
      const Eigen::VectorXd x = p.lattice_point(idx);
      for (int d = 0; d < n && p.lat_cell[static_cast<std::size_t>(lin)] == -3; ++d)
        for (int sign : {+1, -1}) {
          std::array<int, 3> nb = idx;
          nb[d] += sign;
          if (p.cell_state(nb) == -3 || p.cell_state(nb) == -2) continue;
          Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
          step[d] = sign * p.h;
          const double alpha = domain.crossing_fraction(x, step);
          if (alpha < 1e-9) {
            const Eigen::VectorXd c = x + alpha * step;
            p.lat_cell[static_cast<std::size_t>(lin)] = -2;
            p.boundary_lattice_values[lin] = phi(c);
            changed = true;
            break;
          }
        }
    });
    if (!changed) break;
  }

  // assign interior ids in lexicographic lattice order
  for_each_cell([&](const std::array<int, 3>& idx) {
    const std::int64_t lin = p.linear_cell(idx);
    if (p.lat_cell[static_cast<std::size_t>(lin)] != -3) return;
    GridNode node;
    node.x = p.lattice_point(idx);
    node.idx = idx;
    p.lat_cell[static_cast<std::size_t>(lin)] = static_cast<int>(p.nodes.size());
    p.nodes.push_back(std::move(node));
  });

  if (p.nodes.empty()) throw degenerate_grid_error("build_grid: no interior nodes");

  // arms
  for (int a = 0; a < p.interior_count(); ++a) {
    GridNode& node = p.nodes[static_cast<std::size_t>(a)];
    for (int d = 0; d < n; ++d)
      for (int sign : {+1, -1}) {
        ArmInfo& arm = node.arms[static_cast<std::size_t>(2 * d + (sign > 0 ? 0 : 1))];
        std::array<int, 3> nb = node.idx;
        nb[d] += sign;
        const int state = p.cell_state(nb);
        if (state >= 0) {
          arm.neighbor = state;
          arm.alpha = 1.0;
        } else if (state == -2) {
          arm.neighbor = -1;
          arm.alpha = 1.0;
          arm.boundary_value = p.boundary_lattice_values.at(p.linear_cell(nb));
          p.boundary_samples.emplace_back(p.lattice_point(nb), arm.boundary_value);
          node.cls = NodeClass::BoundaryAdjacent;
        } else {
          Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
          step[d] = sign * p.h;
          arm.alpha = domain.crossing_fraction(node.x, step);
          const Eigen::VectorXd c = node.x + arm.alpha * step;
          arm.neighbor = -1;
          arm.boundary_value = phi(c);
          p.boundary_samples.emplace_back(c, arm.boundary_value);
          node.cls = NodeClass::BoundaryAdjacent;
        }
      }
  }

  // stencil forms
  p.hessian_forms.resize(p.nodes.size());
  p.gradient_forms.resize(p.nodes.size());
  const double h = p.h;

  for (int a = 0; a < p.interior_count(); ++a) {
    GridNode& node = p.nodes[static_cast<std::size_t>(a)];

    auto arm_term = [&](const ArmInfo& arm, detail::FormBuilder& fb, double w) {
      if (arm.neighbor >= 0)
        fb.add_node(arm.neighbor, w);
      else
        fb.add_const(w * arm.boundary_value);
    };

    for (int d = 0; d < n; ++d) {
      const ArmInfo& plus = node.arms[static_cast<std::size_t>(2 * d)];
      const ArmInfo& minus = node.arms[static_cast<std::size_t>(2 * d + 1)];
      const double sa = plus.alpha * h;   // distance to the plus point
      const double sb = minus.alpha * h;  // distance to the minus point

      // second difference, exact on quadratics for any arm lengths
      {
        detail::FormBuilder fb;
        const double denom = sa * sb * (sa + sb);
        arm_term(plus, fb, 2.0 * sb / denom);
        arm_term(minus, fb, 2.0 * sa / denom);
        fb.add_node(a, -2.0 * (sa + sb) / denom);
        p.hessian_forms[static_cast<std::size_t>(a)]
                       [static_cast<std::size_t>(GridProblem::entry_index(d, d, n))] =
            fb.build();
      }
      // first derivative
      {
        detail::FormBuilder fb;
        const double denom = sa * sb * (sa + sb);
        arm_term(plus, fb, sb * sb / denom);
        arm_term(minus, fb, -sa * sa / denom);
        fb.add_node(a, (sa * sa - sb * sb) / denom);
        p.gradient_forms[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)] =
            fb.build();
      }
    }

    // mixed entries
    for (int d = 0; d < n; ++d)
      for (int e = d + 1; e < n; ++e) {
        auto point_at = [&](int sd, int se) {
          std::array<int, 3> idx = node.idx;
          idx[d] += sd;
          idx[e] += se;
          return detail::resolve_point(p, idx);
        };

        detail::FormBuilder fb;
        int order = 2;

        const detail::PointRef pp = point_at(+1, +1);
        const detail::PointRef pm = point_at(+1, -1);
        const detail::PointRef mp = point_at(-1, +1);
        const detail::PointRef mm = point_at(-1, -1);
        auto available = [](const detail::PointRef& r) {
          return r.kind != detail::PointRef::Kind::Outside;
        };

        auto add_ref = [&](const detail::PointRef& r, double w) {
          if (r.kind == detail::PointRef::Kind::Interior)
            fb.add_node(r.id, w);
          else
            fb.add_const(w * r.value);
        };

        if (available(pp) && available(pm) && available(mp) && available(mm)) {
          const double w = 1.0 / (4.0 * h * h);
          add_ref(pp, w);
          add_ref(mm, w);
          add_ref(pm, -w);
          add_ref(mp, -w);
        } else {
          // one-sided quadrant; prefer the direction of the longer arms
          std::array<std::pair<int, int>, 4> quadrants = {
              std::pair{+1, +1}, {+1, -1}, {-1, +1}, {-1, -1}};
          auto arm_alpha = [&](int axis, int sign) {
            return node.arms[static_cast<std::size_t>(2 * axis + (sign > 0 ? 0 : 1))].alpha;
          };
          std::stable_sort(quadrants.begin(), quadrants.end(),
                           [&](const auto& q1, const auto& q2) {
                             return arm_alpha(d, q1.first) + arm_alpha(e, q1.second) >
                                    arm_alpha(d, q2.first) + arm_alpha(e, q2.second);
                           });

          auto count_missing = [&](const std::pair<int, int>& q) {
            int missing = 0;
            std::array<int, 3> ed = node.idx, ee = node.idx, corner = node.idx;
            ed[d] += q.first;
            ee[e] += q.second;
            corner[d] += q.first;
            corner[e] += q.second;
            if (!available(detail::resolve_point(p, ed))) ++missing;
            if (!available(detail::resolve_point(p, ee))) ++missing;
            if (!available(detail::resolve_point(p, corner))) ++missing;
            return missing;
          };

          std::pair<int, int> best = quadrants[0];
          int best_missing = count_missing(best);
          for (const auto& q : quadrants) {
            const int miss = count_missing(q);
            if (miss < best_missing) {
              best = q;
              best_missing = miss;
            }
          }

          order = best_missing == 0 ? 1 : 0;
          const int sd = best.first, se = best.second;
          const double w = sd * se / (h * h);

          // resolves a point, extrapolating through the boundary crossing
          // when the lattice point lies outside
          auto add_point_or_ghost = [&](std::array<int, 3> idx, double weight) {
            const detail::PointRef r = detail::resolve_point(p, idx);
            if (available(r)) {
              add_ref(r, weight);
              return;
            }
            Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
            for (int dd = 0; dd < n; ++dd) step[dd] = (idx[dd] - node.idx[dd]) * h;
            const double beta = p.domain.crossing_fraction(node.x, step);
            const Eigen::VectorXd c = node.x + beta * step;
            fb.add_node(a, weight * (1.0 - 1.0 / beta));
            fb.add_const(weight * phi(c) / beta);
          };

          std::array<int, 3> ed = node.idx, ee = node.idx, corner = node.idx;
          ed[d] += sd;
          ee[e] += se;
          corner[d] += sd;
          corner[e] += se;
          add_point_or_ghost(corner, w);
          add_point_or_ghost(ed, -w);
          add_point_or_ghost(ee, -w);
          fb.add_node(a, w);
          node.cls = NodeClass::BoundaryAdjacent;
        }

        node.min_mixed_order = std::min(node.min_mixed_order, order);
        p.hessian_forms[static_cast<std::size_t>(a)]
                       [static_cast<std::size_t>(GridProblem::entry_index(d, e, n))] =
            fb.build();
      }
  }

  // phase field and classification
  p.theta_field.resize(p.interior_count());
  p.u = Eigen::VectorXd::Zero(p.interior_count());
  p.refresh_theta(p.u);
  double tmin = p.theta_field.minCoeff(), tmax = p.theta_field.maxCoeff();
  p.classification = classify_phase(tmin, tmax, n);
  p.theta.classification = p.classification;

  return p;
}

// Discrete Hessian and gradient of u at an interior node.
inline std::pair<SymMatrix, Eigen::VectorXd> discrete_hessian(const GridProblem& p,
                                                              int node,
                                                              const Eigen::VectorXd& u) {
  if (node < 0 || node >= p.interior_count())
    throw invalid_input("discrete_hessian: node out of range");
  const int n = p.dim;
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      m.set(i, j,
            p.hessian_forms[static_cast<std::size_t>(node)]
                           [static_cast<std::size_t>(GridProblem::entry_index(i, j, n))]
                               .eval(u));
  Eigen::VectorXd grad(n);
  for (int d = 0; d < n; ++d)
    grad[d] = p.gradient_forms[static_cast<std::size_t>(node)][static_cast<std::size_t>(d)].eval(u);
  return {std::move(m), std::move(grad)};
}

inline std::pair<SymMatrix, Eigen::VectorXd> discrete_hessian(const GridProblem& p,
                                                              int node) {
  return discrete_hessian(p, node, p.u);
}

// Residual of the discrete equation: phase(D^2_h u) - theta per node.
inline Eigen::VectorXd residual(const GridProblem& p, const Eigen::VectorXd& u) {
  Eigen::VectorXd r(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a) {
    try {
      r[a] = phase_of(discrete_hessian(p, a, u).first) - p.theta_field[a];
    } catch (const error& e) {
      throw error("residual at node " + std::to_string(a) + ": " + e.what());
    }
  }
  return r;
}

inline Eigen::VectorXd residual(const GridProblem& p) { return residual(p, p.u); }

// Jacobian of the residual: row a combines the phase derivative DF(M_a) with
// the stencil weights. Off-diagonal Hessian entries appear twice in the
// matrix, hence the factor 2.
inline Eigen::SparseMatrix<double> assemble_jacobian(const GridProblem& p,
                                                     const Eigen::VectorXd& u) {
  const int n = p.dim;
  const int m = p.interior_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * 12);
  for (int a = 0; a < m; ++a) {
    SymMatrix df = phase_gradient(discrete_hessian(p, a, u).first);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double factor = (i == j) ? df(i, i) : 2.0 * df(i, j);
        const LinearForm& form =
            p.hessian_forms[static_cast<std::size_t>(a)]
                           [static_cast<std::size_t>(GridProblem::entry_index(i, j, n))];
        for (const auto& [b, w] : form.terms)
          trips.emplace_back(a, b, factor * w);
      }
  }
  Eigen::SparseMatrix<double> jac(m, m);
  jac.setFromTriplets(trips.begin(), trips.end());
  jac.makeCompressed();
  return jac;
}

inline Eigen::SparseMatrix<double> assemble_jacobian(const GridProblem& p) {
  return assemble_jacobian(p, p.u);
}

// ---------------------------------------------------------------------------
// Plain lattice differences of a nodal field (no boundary closure); only
// valid at nodes whose full neighborhood is interior. Used by the probes.
// ---------------------------------------------------------------------------

inline bool regular_lattice_neighborhood(const GridProblem& p, int a) {
  const GridNode& node = p.nodes[static_cast<std::size_t>(a)];
  for (int d = 0; d < p.dim; ++d) {
    for (int sign : {+1, -1}) {
      std::array<int, 3> off{0, 0, 0};
      off[d] = sign;
      if (p.neighbor_at(a, off) < 0) return false;
    }
    for (int e = d + 1; e < p.dim; ++e)
      for (int sd : {+1, -1})
        for (int se : {+1, -1}) {
          std::array<int, 3> off{0, 0, 0};
          off[d] = sd;
          off[e] = se;
          if (p.neighbor_at(a, off) < 0) return false;
        }
  }
  (void)node;
  return true;
}

inline Eigen::VectorXd lattice_gradient(const GridProblem& p, int a,
                                        const Eigen::VectorXd& field) {
  Eigen::VectorXd g(p.dim);
  for (int d = 0; d < p.dim; ++d) {
    std::array<int, 3> off{0, 0, 0};
    off[d] = 1;
    const int plus = p.neighbor_at(a, off);
    off[d] = -1;
    const int minus = p.neighbor_at(a, off);
    if (plus < 0 || minus < 0) throw invalid_input("lattice_gradient: irregular node");
    g[d] = (field[plus] - field[minus]) / (2.0 * p.h);
  }
  return g;
}

inline SymMatrix lattice_hessian(const GridProblem& p, int a,
                                 const Eigen::VectorXd& field) {
  SymMatrix m(p.dim);
  const double h2 = p.h * p.h;
  for (int d = 0; d < p.dim; ++d) {
    std::array<int, 3> off{0, 0, 0};
    off[d] = 1;
    const int plus = p.neighbor_at(a, off);
    off[d] = -1;
    const int minus = p.neighbor_at(a, off);
    if (plus < 0 || minus < 0) throw invalid_input("lattice_hessian: irregular node");
    m.set(d, d, (field[plus] - 2.0 * field[a] + field[minus]) / h2);
    for (int e = d + 1; e < p.dim; ++e) {
      auto at = [&](int sd, int se) {
        std::array<int, 3> o{0, 0, 0};
        o[d] = sd;
        o[e] = se;
        const int id = p.neighbor_at(a, o);
        if (id < 0) throw invalid_input("lattice_hessian: irregular node");
        return field[id];
      };
      m.set(d, e, (at(1, 1) + at(-1, -1) - at(1, -1) - at(-1, 1)) / (4.0 * h2));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Dumps
// ---------------------------------------------------------------------------

inline std::string signature_header(const GridProblem& p) {
  std::ostringstream os;
  os << "# lagphase solution dump\n# dim=" << p.dim << " kind=" << to_string(p.domain.kind)
     << " params=";
  for (std::size_t i = 0; i < p.domain.params.size(); ++i) {
    if (i) os << ";";
    os << fmt_double(p.domain.params[i]);
  }
  os << " h=" << fmt_double(p.h) << " nodes=" << p.interior_count() << "\n";
  return os.str();
}

// CSV columns: node_index, x1..xn, class, u, theta, residual
inline std::string solution_csv(const GridProblem& p) {
  const Eigen::VectorXd r = residual(p);
  std::ostringstream os;
  os << signature_header(p);
  os << "node_index";
  for (int d = 1; d <= p.dim; ++d) os << ",x" << d;
  os << ",class,u,theta,residual\n";
  for (int a = 0; a < p.interior_count(); ++a) {
    const GridNode& node = p.nodes[static_cast<std::size_t>(a)];
    os << a;
    for (int d = 0; d < p.dim; ++d) os << "," << fmt_double(node.x[d]);
    os << "," << static_cast<int>(node.cls) << "," << fmt_double(p.u[a]) << ","
       << fmt_double(p.theta_field[a]) << "," << fmt_double(r[a]) << "\n";
  }
  return os.str();
}

// Same columns as the CSV, whitespace-aligned for reading by eye.
inline std::string solution_table(const GridProblem& p) {
  const Eigen::VectorXd r = residual(p);
  std::ostringstream os;
  os << signature_header(p);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%10s %14s %14s %14s %5s %22s %22s %14s\n", "node",
                "x1", "x2", p.dim > 2 ? "x3" : "", "class", "u", "theta", "residual");
  os << buf;
  for (int a = 0; a < p.interior_count(); ++a) {
    const GridNode& node = p.nodes[static_cast<std::size_t>(a)];
    std::snprintf(buf, sizeof(buf), "%10d %14.6g %14.6g %14s %5d %22.14g %22.14g %14.6g\n",
                  a, node.x[0], node.x[1],
                  p.dim > 2 ? std::to_string(node.x[2]).c_str() : "",
                  static_cast<int>(node.cls), p.u[a], p.theta_field[a], r[a]);
    os << buf;
  }
  return os.str();
}

struct SolutionDump {
  GridSignature sig;
  Eigen::VectorXd u;
};

inline SolutionDump parse_solution_csv(const std::string& content) {
  SolutionDump dump;
  std::istringstream in(content);
  std::string line;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "dim") dump.sig.dim = std::stoi(val);
        else if (key == "h") dump.sig.h = std::stod(val);
        else if (key == "nodes") dump.sig.node_count = std::stoi(val);
        else if (key == "kind") {
          if (val == "box") dump.sig.kind = DomainKind::Box;
          else if (val == "ball") dump.sig.kind = DomainKind::Ball;
          else if (val == "ellipsoid") dump.sig.kind = DomainKind::Ellipsoid;
          else throw invalid_input("solution dump: unknown domain kind " + val);
        } else if (key == "params") {
          dump.sig.params.clear();
          std::istringstream ps(val);
          std::string num;
          while (std::getline(ps, num, ';')) dump.sig.params.push_back(std::stod(num));
        }
      }
      continue;
    }
    if (line.rfind("node_index", 0) == 0) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < static_cast<std::size_t>(dump.sig.dim) + 4)
      throw invalid_input("solution dump: malformed row");
    values.push_back(std::stod(fields[static_cast<std::size_t>(dump.sig.dim) + 2]));
  }
  if (static_cast<int>(values.size()) != dump.sig.node_count)
    throw invalid_input("solution dump: row count does not match header");
  dump.u = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return dump;
}

}  // namespace lagphase
