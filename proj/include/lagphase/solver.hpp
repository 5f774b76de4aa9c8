#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lagphase/errors.hpp"
#include "lagphase/grid.hpp"
#include "lagphase/operator_core.hpp"

namespace lagphase {

struct SolverConfig {
  double newton_tol = 1e-8;       // max-norm residual target
  int max_newton_iters = 50;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double min_step = 1e-10;
  int continuation_steps = 8;
  double linear_solver_tol = 1e-10;
  int bisection_depth = 4;        // adaptive schedule refinement on stage failure
  // unknown count above which Krylov replaces the direct factorization; 3d
  // fill-in makes the direct solver impractical well before 5e4 unknowns
  int direct_solver_limit = 6000;

  void validate() const {
    if (!(newton_tol > 0.0) || !(linear_solver_tol > 0.0) || !(min_step > 0.0))
      throw invalid_input("SolverConfig: tolerances must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0))
      throw invalid_input("SolverConfig: armijo_c must lie in (0,1)");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
      throw invalid_input("SolverConfig: backtrack_factor must lie in (0,1)");
    if (max_newton_iters < 1 || continuation_steps < 1 || bisection_depth < 0)
      throw invalid_input("SolverConfig: iteration counts must be positive");
  }
};

struct IterationRecord {
  int stage = 0;
  int iter = 0;
  double residual_max = 0.0;
  double step_length = 0.0;
  double lambda1_max = 0.0;
  double lambdan_min = 0.0;
};

struct SolveTrace {
  std::vector<IterationRecord> records;

  double final_residual() const {
    return records.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : records.back().residual_max;
  }
  int iterations() const {
    return records.empty() ? 0 : records.back().iter;
  }
};

// CSV columns: stage, iter, residual_max, step_length, lambda1_max, lambdan_min
inline std::string trace_csv(const SolveTrace& trace) {
  std::ostringstream os;
  os << "stage,iter,residual_max,step_length,lambda1_max,lambdan_min\n";
  for (const IterationRecord& r : trace.records)
    os << r.stage << "," << r.iter << "," << fmt_double(r.residual_max) << ","
       << fmt_double(r.step_length) << "," << fmt_double(r.lambda1_max) << ","
       << fmt_double(r.lambdan_min) << "\n";
  return os.str();
}

enum class SolveFailureKind { Stagnation, IterationBudget, LinearSolve, Continuation };

inline const char* to_string(SolveFailureKind k) {
  switch (k) {
    case SolveFailureKind::Stagnation: return "stagnation";
    case SolveFailureKind::IterationBudget: return "iteration-budget";
    case SolveFailureKind::LinearSolve: return "linear-solve";
    case SolveFailureKind::Continuation: return "continuation";
  }
  return "?";
}

struct solve_failure : error {
  SolveFailureKind kind;
  SolveTrace trace;
  double deepest_s = -1.0;  // continuation failures: deepest s attempted

  solve_failure(SolveFailureKind kind_, const std::string& msg, SolveTrace trace_)
      : error(msg), kind(kind_), trace(std::move(trace_)) {}
};

struct HessianFieldExtremes {
  double lambda1_max = -std::numeric_limits<double>::infinity();
  double lambdan_min = std::numeric_limits<double>::infinity();
};

inline HessianFieldExtremes hessian_extremes(const GridProblem& p,
                                             const Eigen::VectorXd& u) {
  HessianFieldExtremes ext;
  for (int a = 0; a < p.interior_count(); ++a) {
    Spectrum s = Spectrum::of(discrete_hessian(p, a, u).first);
    ext.lambda1_max = std::max(ext.lambda1_max, s.largest());
    ext.lambdan_min = std::min(ext.lambdan_min, s.smallest());
  }
  return ext;
}

namespace detail {

inline Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& jac,
                                    const Eigen::VectorXd& rhs,
                                    const SolverConfig& cfg, const SolveTrace& trace) {
  if (jac.rows() <= cfg.direct_solver_limit) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success)
      throw solve_failure(SolveFailureKind::LinearSolve,
                          "newton_solve: sparse factorization failed", trace);
    Eigen::VectorXd d = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
      throw solve_failure(SolveFailureKind::LinearSolve,
                          "newton_solve: sparse solve failed", trace);
    return d;
  }
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> krylov;
  krylov.preconditioner().setDroptol(1e-3);
  krylov.preconditioner().setFillfactor(10);
  krylov.setTolerance(cfg.linear_solver_tol);
  krylov.compute(jac);
  Eigen::VectorXd d = krylov.solve(rhs);
  if (krylov.info() != Eigen::Success)
    throw solve_failure(SolveFailureKind::LinearSolve,
                        "newton_solve: Krylov solve did not converge", trace);
  return d;
}

}  // namespace detail

// Damped Newton iteration on the discrete system, merit = residual max-norm.
// Starts from P.u and leaves the final iterate there. For phase functions
// depending on u the field is re-evaluated at the top of every iterate.
inline SolveTrace newton_solve(GridProblem& p, const SolverConfig& cfg, int stage = 0) {
  cfg.validate();
  Eigen::VectorXd u = p.u;
  SolveTrace trace;
  double last_step = 0.0;

  for (int iter = 0; iter <= cfg.max_newton_iters; ++iter) {
    if (p.theta.u_dependent) p.refresh_theta(u);
    Eigen::VectorXd r = residual(p, u);
    const double rn = r.cwiseAbs().maxCoeff();
    HessianFieldExtremes ext = hessian_extremes(p, u);
    trace.records.push_back({stage, iter, rn, last_step, ext.lambda1_max, ext.lambdan_min});

    if (rn <= cfg.newton_tol) {
      p.u = u;
      return trace;
    }
    if (iter == cfg.max_newton_iters) break;

    Eigen::SparseMatrix<double> jac = assemble_jacobian(p, u);
    Eigen::VectorXd direction = detail::solve_linear(jac, -r, cfg, trace);

    // backtracking line search on the max-norm merit
    double t = 1.0;
    bool accepted = false;
    while (t >= cfg.min_step) {
      Eigen::VectorXd u_try = u + t * direction;
      const double rn_try = residual(p, u_try).cwiseAbs().maxCoeff();
      if (rn_try <= (1.0 - cfg.armijo_c * t) * rn) {
        u = std::move(u_try);
        last_step = t;
        accepted = true;
        break;
      }
      t *= cfg.backtrack_factor;
    }
    if (!accepted) {
      p.u = u;
      throw solve_failure(SolveFailureKind::Stagnation,
                          "newton_solve: line search found no descent (residual " +
                              fmt_double(rn) + ")",
                          trace);
    }
  }

  p.u = u;
  throw solve_failure(SolveFailureKind::IterationBudget,
                      "newton_solve: iteration budget exhausted (residual " +
                          fmt_double(trace.final_residual()) + ")",
                      trace);
}

// Quadratic start q(x) = tan(theta0/n)/2 |x|^2, whose phase is exactly theta0,
// shifted by the constant that matches the mean of the boundary data.
inline Eigen::VectorXd initial_guess(const GridProblem& p, double theta0) {
  if (!(std::abs(theta0) < phase_range_limit(p.dim)))
    throw out_of_range_error("initial_guess: phase out of range");
  const double coeff = 0.5 * std::tan(theta0 / p.dim);
  double shift = 0.0;
  if (!p.boundary_samples.empty()) {
    double acc = 0.0;
    for (const auto& [x, v] : p.boundary_samples) acc += v - coeff * x.squaredNorm();
    shift = acc / static_cast<double>(p.boundary_samples.size());
  }
  Eigen::VectorXd u(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a)
    u[a] = coeff * p.nodes[static_cast<std::size_t>(a)].x.squaredNorm() + shift;
  return u;
}

// Discrete Poisson start: solves trace(D^2_h u) = n tan(theta0/n) with the
// problem's own boundary data. Unlike the detached paraboloid it honors phi
// near the boundary, which keeps the arctangents away from saturation on
// grids with very short boundary arms.
inline Eigen::VectorXd poisson_start(const GridProblem& p, double theta0,
                                     const SolverConfig& cfg) {
  if (!(std::abs(theta0) < phase_range_limit(p.dim)))
    throw out_of_range_error("poisson_start: phase out of range");
  const int m = p.interior_count();
  const int n = p.dim;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs =
      Eigen::VectorXd::Constant(m, static_cast<double>(n) * std::tan(theta0 / n));
  for (int a = 0; a < m; ++a)
    for (int d = 0; d < n; ++d) {
      const LinearForm& form =
          p.hessian_forms[static_cast<std::size_t>(a)]
                         [static_cast<std::size_t>(GridProblem::entry_index(d, d, n))];
      for (const auto& [b, w] : form.terms) trips.emplace_back(a, b, w);
      rhs[a] -= form.constant;
    }
  Eigen::SparseMatrix<double> lap(m, m);
  lap.setFromTriplets(trips.begin(), trips.end());
  lap.makeCompressed();
  SolveTrace dummy;
  return detail::solve_linear(lap, rhs, cfg, dummy);
}

// Phase deformation (1-s) Theta0 + s theta_target along a fixed schedule,
// approaching the target from the supercritical side.
struct ContinuationPath {
  double start_phase = 0.0;
  PhaseSpec target;
  std::vector<double> schedule;  // 0 = s_0 < s_1 < ... < s_K = 1

  static ContinuationPath uniform(double theta0, PhaseSpec target, int steps) {
    ContinuationPath path;
    path.start_phase = theta0;
    path.target = std::move(target);
    for (int k = 0; k <= steps; ++k)
      path.schedule.push_back(static_cast<double>(k) / steps);
    path.validate(path.target.dim);
    return path;
  }

  void validate(int dim) const {
    if (std::abs(start_phase) <= critical_phase(dim) ||
        std::abs(start_phase) >= phase_range_limit(dim))
      throw invalid_input("ContinuationPath: start phase must be supercritical");
    if (schedule.empty() || schedule.front() != 0.0 || schedule.back() != 1.0)
      throw invalid_input("ContinuationPath: schedule must run from 0 to 1");
    for (std::size_t k = 1; k < schedule.size(); ++k)
      if (!(schedule[k] > schedule[k - 1]))
        throw invalid_input("ContinuationPath: schedule must increase");
    if (target.u_dependent)
      throw invalid_input("ContinuationPath: target phase must not depend on u");
  }
};

struct ContinuationResult {
  std::vector<SolveTrace> stage_traces;
  std::vector<double> solved_s;
  int engaged_bisection_depth = 0;
};

// Solves the s_0 problem from the quadratic start, then warm-starts every
// later stage from the previous solution. A failing stage bisects its
// schedule interval up to cfg.bisection_depth before giving up.
inline ContinuationResult continuation_solve(GridProblem& p, const ContinuationPath& path,
                                             const SolverConfig& cfg) {
  cfg.validate();
  path.validate(p.dim);

  Eigen::VectorXd target_field(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a)
    target_field[a] = path.target.value(p.nodes[static_cast<std::size_t>(a)].x, 0.0);

  const double limit = phase_range_limit(p.dim);
  auto set_stage = [&](double s) {
    for (int a = 0; a < p.interior_count(); ++a) {
      const double t = (1.0 - s) * path.start_phase + s * target_field[a];
      if (!(std::abs(t) < limit))
        throw out_of_range_error("continuation_solve: phase out of range at s = " +
                                 fmt_double(s));
      p.theta_field[a] = t;
    }
  };

  ContinuationResult result;
  int stage_counter = 0;

  // first stage from the quadratic start, falling back to the Poisson start
  // when the detached paraboloid saturates the boundary stencils
  set_stage(path.schedule.front());
  p.u = initial_guess(p, path.start_phase);
  try {
    result.stage_traces.push_back(newton_solve(p, cfg, stage_counter++));
  } catch (const solve_failure& f) {
    if (f.kind == SolveFailureKind::LinearSolve) throw;
    p.u = poisson_start(p, path.start_phase, cfg);
    result.stage_traces.push_back(newton_solve(p, cfg, stage_counter++));
  }
  result.solved_s.push_back(path.schedule.front());

  std::function<void(double, double, int)> advance = [&](double s_from, double s_to,
                                                         int depth) {
    Eigen::VectorXd warm = p.u;
    set_stage(s_to);
    try {
      result.stage_traces.push_back(newton_solve(p, cfg, stage_counter++));
      result.solved_s.push_back(s_to);
    } catch (const solve_failure& f) {
      if (f.kind == SolveFailureKind::LinearSolve) throw;
      if (depth >= cfg.bisection_depth) {
        solve_failure cf(SolveFailureKind::Continuation,
                         "continuation_solve: stage s = " + fmt_double(s_to) +
                             " failed at bisection depth " + std::to_string(depth),
                         f.trace);
        cf.deepest_s = s_to;
        throw cf;
      }
      result.engaged_bisection_depth = std::max(result.engaged_bisection_depth, depth + 1);
      p.u = warm;
      const double mid = 0.5 * (s_from + s_to);
      advance(s_from, mid, depth + 1);
      advance(mid, s_to, depth + 1);
    }
  };

  for (std::size_t k = 1; k < path.schedule.size(); ++k)
    advance(path.schedule[k - 1], path.schedule[k], 0);

  return result;
}

// Ordering check for two solves with identical grids and boundary data and
// pointwise-ordered phases: the larger phase must give the smaller solution.
struct ComparisonResult {
  bool ordered = false;
  double max_violation = 0.0;  // max of u_b - u_a; <= tol when ordered
};

inline ComparisonResult comparison_check(const GridProblem& pa, const GridProblem& pb,
                                         const Eigen::VectorXd& ua,
                                         const Eigen::VectorXd& ub, double tol) {
  if (!(pa.signature() == pb.signature()))
    throw grid_mismatch_error("comparison_check: grids differ");
  if (pa.boundary_samples.size() != pb.boundary_samples.size())
    throw grid_mismatch_error("comparison_check: boundary data differs");
  for (std::size_t k = 0; k < pa.boundary_samples.size(); ++k)
    if (std::abs(pa.boundary_samples[k].second - pb.boundary_samples[k].second) > 1e-12)
      throw grid_mismatch_error("comparison_check: boundary data differs");
  for (int a = 0; a < pa.interior_count(); ++a)
    if (pa.theta_field[a] > pb.theta_field[a] + 1e-12)
      throw inconsistent_input("comparison_check: phases are not ordered");
  if (ua.size() != pa.interior_count() || ub.size() != pb.interior_count())
    throw invalid_input("comparison_check: field size mismatch");

  ComparisonResult r;
  r.max_violation = (ub - ua).maxCoeff();
  r.ordered = r.max_violation <= tol;
  return r;
}

// Difference-quotient maxima of u along one lattice step, split between
// pairs that touch the boundary-adjacent band and pairs that do not.
struct TranslationProbeResult {
  double interior_max = 0.0;
  double boundary_max = 0.0;
  int interior_pairs = 0;
  int boundary_pairs = 0;
};

inline TranslationProbeResult translation_lipschitz_probe(const GridProblem& p,
                                                          const Eigen::VectorXd& u,
                                                          int axis) {
  if (axis < 0 || axis >= p.dim)
    throw invalid_input("translation_lipschitz_probe: bad axis");
  TranslationProbeResult r;
  for (int a = 0; a < p.interior_count(); ++a) {
    std::array<int, 3> off{0, 0, 0};
    off[axis] = 1;
    const int b = p.neighbor_at(a, off);
    if (b < 0) continue;
    const double dq = std::abs(u[b] - u[a]) / p.h;
    const bool band = p.nodes[static_cast<std::size_t>(a)].cls == NodeClass::BoundaryAdjacent ||
                      p.nodes[static_cast<std::size_t>(b)].cls == NodeClass::BoundaryAdjacent;
    if (band) {
      r.boundary_max = std::max(r.boundary_max, dq);
      ++r.boundary_pairs;
    } else {
      r.interior_max = std::max(r.interior_max, dq);
      ++r.interior_pairs;
    }
  }
  if (r.interior_pairs + r.boundary_pairs == 0)
    throw empty_overlap_error("translation_lipschitz_probe: empty overlap");
  return r;
}

}  // namespace lagphase
