#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lagphase/errors.hpp"
#include "lagphase/geometry.hpp"
#include "lagphase/grid.hpp"
#include "lagphase/solver.hpp"

namespace lagphase {

// Stand-ins for the existential constants of the interior estimates. The
// Jacobi constants are calibrated once on the critical-ball baseline and
// frozen here; probes report margins against them rather than asserting the
// estimates in the abstract.
struct ProbeConfig {
  double lambda1_threshold = 5.0;   // Lambda(n): clip level for b = ln(lambda_1)
  double jacobi_c = 0.05;           // c(n)
  // C, frozen from the critical-ball baseline calibration (max observed
  // pointwise deficit 0.85 at h = 1/8)
  double jacobi_C = 2.0;
  double boundary_band_width = 1.5; // band half-width in multiples of h
  double epsilon_grad = 0.01;       // epsilon in |grad u| + eps u^2
  double eigen_gap_min = 0.1;       // simple-lambda_1 gate for the pointwise probe
  double phase_match_tol = 1e-6;    // residual slack for fieldwise lemma checks
  // the interior estimate holds at a fixed separation from the boundary; the
  // pointwise probe only samples nodes at least this far inside (length units)
  double jacobi_interior_band = 0.25;

  void validate() const {
    if (!(lambda1_threshold > 0.0 && jacobi_c > 0.0 && jacobi_C > 0.0 &&
          boundary_band_width > 0.0 && epsilon_grad > 0.0 && eigen_gap_min > 0.0 &&
          phase_match_tol > 0.0 && jacobi_interior_band > 0.0))
      throw invalid_input("ProbeConfig: all constants must be positive");
  }

  std::map<std::string, double> snapshot() const {
    return {{"lambda1_threshold", lambda1_threshold},
            {"jacobi_c", jacobi_c},
            {"jacobi_C", jacobi_C},
            {"boundary_band_width", boundary_band_width},
            {"epsilon_grad", epsilon_grad},
            {"eigen_gap_min", eigen_gap_min},
            {"phase_match_tol", phase_match_tol},
            {"jacobi_interior_band", jacobi_interior_band}};
  }
};

namespace detail {

// Largest eigenvalue of the discrete Hessian at every node; NaN where the
// Hessian could not be evaluated.
inline Eigen::VectorXd lambda1_field(const GridProblem& p, const Eigen::VectorXd& u) {
  Eigen::VectorXd f(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a)
    f[a] = Spectrum::of(discrete_hessian(p, a, u).first).largest();
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise Jacobi probe: margin of
//   sum_i F^{ii} b_ii >= c sum_i F^{ii} b_i^2 - C,   b = ln(lambda_1)
// at nodes with a simple, large lambda_1. The frame-contracted form
// tr(DF H_b) and grad(b)^T DF grad(b) equals the eigenframe sums.
// ---------------------------------------------------------------------------

struct JacobiPointwiseResult {
  int qualifying_nodes = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  int argmin_node = -1;
  std::vector<int> violating_nodes;

  bool empty() const { return qualifying_nodes == 0; }
};

inline JacobiPointwiseResult jacobi_pointwise_probe(const GridProblem& p,
                                                    const Eigen::VectorXd& u,
                                                    const ProbeConfig& cfg) {
  cfg.validate();
  const int count = p.interior_count();
  Eigen::VectorXd l1(count), gap(count), b(count);
  for (int a = 0; a < count; ++a) {
    Spectrum s = Spectrum::of(discrete_hessian(p, a, u).first);
    l1[a] = s.largest();
    gap[a] = s[0] - s[1];
    b[a] = s.largest() > 0.0 ? std::log(s.largest()) : std::numeric_limits<double>::quiet_NaN();
  }

  JacobiPointwiseResult result;
  for (int a = 0; a < count; ++a) {
    if (!(l1[a] >= cfg.lambda1_threshold)) continue;
    if (!(gap[a] >= cfg.eigen_gap_min)) continue;
    if (p.domain.distance_to_boundary(p.nodes[static_cast<std::size_t>(a)].x) <
        cfg.jacobi_interior_band)
      continue;
    if (!regular_lattice_neighborhood(p, a)) continue;

    // lambda_1 must stay simple across the whole difference stencil of b,
    // otherwise the lattice derivatives straddle a branch kink
    bool defined = std::isfinite(b[a]);
    for (int d = 0; d < p.dim && defined; ++d)
      for (int e = d; e < p.dim && defined; ++e)
        for (int sd : {+1, -1})
          for (int se : {+1, -1}) {
            std::array<int, 3> off{0, 0, 0};
            off[d] += sd;
            if (e != d) off[e] += se;
            const int nb = p.neighbor_at(a, off);
            if (nb < 0 || !std::isfinite(b[nb]) || !(gap[nb] >= cfg.eigen_gap_min)) {
              defined = false;
              break;
            }
          }
    if (!defined) continue;

    const SymMatrix df = phase_gradient(discrete_hessian(p, a, u).first);
    const SymMatrix hb = lattice_hessian(p, a, b);
    const Eigen::VectorXd gb = lattice_gradient(p, a, b);
    const double lhs = (df.dense().cwiseProduct(hb.dense())).sum();
    const double rhs = gb.dot(df.dense() * gb);
    const double margin = lhs - cfg.jacobi_c * rhs + cfg.jacobi_C;

    ++result.qualifying_nodes;
    if (margin < result.min_margin) {
      result.min_margin = margin;
      result.argmin_node = a;
    }
    if (margin < 0.0) result.violating_nodes.push_back(a);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Integral Jacobi probe with b = ln(max(Lambda, lambda_1)) and a quartic bump
// test function; midpoint quadrature over lattice cells inside the support.
// ---------------------------------------------------------------------------

struct BumpSpec {
  Eigen::VectorXd center;
  double radius = 0.0;

  double value(const Eigen::VectorXd& x) const {
    const double q = 1.0 - (x - center).squaredNorm() / (radius * radius);
    return q > 0.0 ? q * q : 0.0;
  }

  Eigen::VectorXd grad(const Eigen::VectorXd& x) const {
    const double q = 1.0 - (x - center).squaredNorm() / (radius * radius);
    if (q <= 0.0) return Eigen::VectorXd::Zero(center.size());
    return q * (-4.0 / (radius * radius)) * (x - center);
  }
};

struct JacobiIntegralResult {
  double margin = 0.0;
  double lhs = 0.0;       // -int <grad phi, grad b> dv_g
  double dirichlet = 0.0; // int phi |grad b|^2 dv_g
  double mass = 0.0;      // int phi dv_g
  int cells = 0;
};

inline JacobiIntegralResult jacobi_integral_probe(const GridProblem& p,
                                                  const Eigen::VectorXd& u,
                                                  const BumpSpec& bump,
                                                  const ProbeConfig& cfg) {
  cfg.validate();
  if (bump.center.size() != p.dim || !(bump.radius > 0.0))
    throw invalid_bump_error("jacobi_integral_probe: malformed bump");

  const Eigen::VectorXd l1 = detail::lambda1_field(p, u);
  Eigen::VectorXd b(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a)
    b[a] = std::log(std::max(cfg.lambda1_threshold, l1[a]));

  // the support must sit inside the interior with room for the b stencil
  for (int a = 0; a < p.interior_count(); ++a) {
    if (bump.value(p.nodes[static_cast<std::size_t>(a)].x) <= 0.0) continue;
    for (int d = 0; d < p.dim; ++d)
      for (int sign : {+1, -1}) {
        std::array<int, 3> off{0, 0, 0};
        off[d] = sign;
        if (p.neighbor_at(a, off) < 0)
          throw invalid_bump_error(
              "jacobi_integral_probe: bump support is not contained in the interior");
      }
  }

  JacobiIntegralResult result;
  const double cell_volume = std::pow(p.h, p.dim);
  const double cell_reach = 0.5 * p.h * std::sqrt(static_cast<double>(p.dim));
  for (int a = 0; a < p.interior_count(); ++a) {
    const Eigen::VectorXd& x = p.nodes[static_cast<std::size_t>(a)].x;
    // midpoint rule over cells fully interior to the support
    if ((x - bump.center).norm() + cell_reach > bump.radius) continue;

    const SymMatrix hess = discrete_hessian(p, a, u).first;
    InducedMetric metric = induced_metric(hess);
    const Eigen::VectorXd gb = lattice_gradient(p, a, b);
    const Eigen::VectorXd gphi = bump.grad(x);
    const double phi = bump.value(x);
    const double dv = metric.vol_density * cell_volume;

    result.lhs -= metric_inner(metric.g_inv, gphi, gb) * dv;
    result.dirichlet += phi * metric_inner(metric.g_inv, gb, gb) * dv;
    result.mass += phi * dv;
    ++result.cells;
  }
  result.margin = result.lhs - cfg.jacobi_c * result.dirichlet + cfg.jacobi_C * result.mass;
  return result;
}

// ---------------------------------------------------------------------------
// Gradient maximum principle probe: |grad u| maxima inside and in the
// boundary band, and the location of the maximum of |grad u| + eps u^2.
// ---------------------------------------------------------------------------

struct GradientProbeResult {
  double interior_max = 0.0;
  double band_max = 0.0;
  int interior_nodes = 0;
  int band_nodes = 0;
  bool test_function_max_in_band = false;
  int argmax_node = -1;
};

inline GradientProbeResult gradient_max_principle_probe(const GridProblem& p,
                                                        const Eigen::VectorXd& u,
                                                        const ProbeConfig& cfg) {
  cfg.validate();
  GradientProbeResult result;
  double best_test = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < p.interior_count(); ++a) {
    const GridNode& node = p.nodes[static_cast<std::size_t>(a)];
    Eigen::VectorXd grad(p.dim);
    for (int d = 0; d < p.dim; ++d)
      grad[d] = p.gradient_forms[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)].eval(u);
    const double gn = grad.norm();
    const bool in_band =
        p.domain.distance_to_boundary(node.x) <= cfg.boundary_band_width * p.h;
    if (in_band) {
      result.band_max = std::max(result.band_max, gn);
      ++result.band_nodes;
    } else {
      result.interior_max = std::max(result.interior_max, gn);
      ++result.interior_nodes;
    }
    const double test = gn + cfg.epsilon_grad * u[a] * u[a];
    if (test > best_test) {
      best_test = test;
      result.argmax_node = a;
      result.test_function_max_in_band = in_band;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Fieldwise eigenvalue-structure report: the critical-phase lemma margins at
// every node in the applicable regime.
// ---------------------------------------------------------------------------

struct EigenFieldReport {
  int applicable_nodes = 0;
  int not_applicable_nodes = 0;
  std::vector<double> worst_margins;  // componentwise minima, empty when no node applies
  double min_margin = std::numeric_limits<double>::infinity();
  int argmin_node = -1;
  bool all_hold = true;

  bool empty() const { return applicable_nodes == 0; }
};

inline EigenFieldReport eigen_field_report(const GridProblem& p, const Eigen::VectorXd& u,
                                           const ProbeConfig& cfg) {
  cfg.validate();
  EigenFieldReport report;
  const double crit = critical_phase(p.dim);
  for (int a = 0; a < p.interior_count(); ++a) {
    if (!(p.theta_field[a] >= crit - 1e-15)) {
      ++report.not_applicable_nodes;
      continue;
    }
    Spectrum s = Spectrum::of(discrete_hessian(p, a, u).first);
    EigenLemmaReport lemma =
        check_eigen_lemma(s, p.theta_field[a], p.dim, cfg.phase_match_tol);
    if (report.worst_margins.empty())
      report.worst_margins.assign(lemma.margins.size(),
                                  std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < lemma.margins.size(); ++k)
      report.worst_margins[k] = std::min(report.worst_margins[k], lemma.margins[k]);
    const double node_min = lemma.min_margin();
    if (node_min < report.min_margin) {
      report.min_margin = node_min;
      report.argmin_node = a;
    }
    report.all_hold = report.all_hold && lemma.all_hold();
    ++report.applicable_nodes;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Interior C^2 refinement study
// ---------------------------------------------------------------------------

struct C2FamilySpec {
  DomainKind kind = DomainKind::Ball;
  std::vector<double> shape_params;
  PhaseSpec theta;
  std::function<double(const Eigen::VectorXd&)> phi;
  SolverConfig solver;
  // supercritical continuation start; NaN solves directly from the quadratic
  // start at the mean phase
  double start_phase = std::numeric_limits<double>::quiet_NaN();
  double center_ball_radius = 0.25;
  double lipschitz_ball_radius = 1.0;
};

struct C2Row {
  double h = 0.0;
  int nodes = 0;
  double center_hessian_max = 0.0;  // max spectral norm of D^2_h u over the center ball
  double lipschitz_norm = 0.0;      // max |grad u| over the unit ball
  double theta_sup = 0.0;
  double final_residual = 0.0;
};

inline std::vector<C2Row> interior_c2_probe(const C2FamilySpec& family,
                                            const std::vector<double>& levels) {
  if (levels.empty()) throw invalid_input("interior_c2_probe: no levels");
  std::vector<C2Row> rows;
  for (double h : levels) {
    DomainSpec domain;
    domain.kind = family.kind;
    domain.dim = family.theta.dim;
    domain.params = family.shape_params;
    domain.spacing = h;
    domain.validate();

    GridProblem p = build_grid(domain, family.phi, family.theta);

    bool center_found = false;
    for (const GridNode& node : p.nodes)
      if (node.x.norm() == 0.0) center_found = true;
    if (!center_found)
      throw invalid_input("interior_c2_probe: center node missing at h = " + fmt_double(h));

    SolveTrace last;
    if (std::isfinite(family.start_phase)) {
      ContinuationPath path = ContinuationPath::uniform(
          family.start_phase, family.theta, family.solver.continuation_steps);
      ContinuationResult cr = continuation_solve(p, path, family.solver);
      last = cr.stage_traces.back();
    } else {
      const double mean_phase = p.theta_field.mean();
      p.u = initial_guess(p, mean_phase);
      try {
        last = newton_solve(p, family.solver);
      } catch (const solve_failure& f) {
        if (f.kind == SolveFailureKind::LinearSolve) throw;
        p.u = poisson_start(p, mean_phase, family.solver);
        last = newton_solve(p, family.solver);
      }
    }

    C2Row row;
    row.h = h;
    row.nodes = p.interior_count();
    row.final_residual = last.final_residual();
    row.theta_sup = p.theta_field.cwiseAbs().maxCoeff();
    for (int a = 0; a < p.interior_count(); ++a) {
      const GridNode& node = p.nodes[static_cast<std::size_t>(a)];
      if (node.x.norm() <= family.center_ball_radius) {
        Spectrum s = Spectrum::of(discrete_hessian(p, a).first);
        row.center_hessian_max = std::max(
            row.center_hessian_max, std::max(std::abs(s.largest()), std::abs(s.smallest())));
      }
      if (node.x.norm() <= family.lipschitz_ball_radius) {
        Eigen::VectorXd grad(p.dim);
        for (int d = 0; d < p.dim; ++d)
          grad[d] =
              p.gradient_forms[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)].eval(p.u);
        row.lipschitz_norm = std::max(row.lipschitz_norm, grad.norm());
      }
    }
    rows.push_back(row);
  }
  return rows;
}

// CSV columns: h, nodes, center_hessian_max, lipschitz_norm, theta_sup, final_residual
inline std::string c2_table_csv(const std::vector<C2Row>& rows) {
  std::ostringstream os;
  os << "h,nodes,center_hessian_max,lipschitz_norm,theta_sup,final_residual\n";
  for (const C2Row& r : rows)
    os << fmt_double(r.h) << "," << r.nodes << "," << fmt_double(r.center_hessian_max)
       << "," << fmt_double(r.lipschitz_norm) << "," << fmt_double(r.theta_sup) << ","
       << fmt_double(r.final_residual) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Merged report
// ---------------------------------------------------------------------------

struct ProbeRecord {
  std::string probe;
  std::string regime;  // phase regime in which the underlying estimate applies
  bool applicable = false;
  bool pass = false;
  double min_margin = std::numeric_limits<double>::quiet_NaN();
  int argmin_node = -1;
  std::map<std::string, double> extra;
};

struct DiagnosticsReport {
  GridSignature grid;
  PhaseClass classification = PhaseClass::Mixed;
  bool strictly_convex = false;
  std::map<std::string, double> config_snapshot;
  std::vector<ProbeRecord> records;

  // every applicable probe must be nonnegative up to the tolerance
  bool all_pass(double tol = 1e-12) const {
    for (const ProbeRecord& r : records)
      if (r.applicable && !r.pass && !(r.min_margin >= -tol)) return false;
    return true;
  }

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["grid"] = {{"dim", grid.dim},
                 {"kind", to_string(grid.kind)},
                 {"params", grid.params},
                 {"h", grid.h},
                 {"nodes", grid.node_count}};
    j["classification"] = to_string(classification);
    j["strictly_convex"] = strictly_convex;
    j["config"] = config_snapshot;
    j["probes"] = nlohmann::ordered_json::array();
    for (const ProbeRecord& r : records) {
      nlohmann::ordered_json pj;
      pj["probe"] = r.probe;
      pj["regime"] = r.regime;
      pj["applicable"] = r.applicable;
      pj["pass"] = r.pass;
      if (std::isfinite(r.min_margin)) pj["min_margin"] = r.min_margin;
      pj["argmin_node"] = r.argmin_node;
      for (const auto& [k, v] : r.extra) pj[k] = v;
      j["probes"].push_back(pj);
    }
    return j.dump(2) + "\n";
  }
};

// Runs the enabled probes over a solved problem, gating each by the phase
// regime of its estimate: the Jacobi and eigenvalue-structure probes need
// theta >= (n-2)pi/2 everywhere, the gradient probe applies to every phase.
inline DiagnosticsReport run_diagnostics(const GridProblem& p, const Eigen::VectorXd& u,
                                         const ProbeConfig& cfg,
                                         const std::vector<std::string>& enabled,
                                         std::optional<BumpSpec> bump = std::nullopt) {
  cfg.validate();
  DiagnosticsReport report;
  report.grid = p.signature();
  report.classification = p.classification;
  report.strictly_convex = p.domain.strictly_convex();
  report.config_snapshot = cfg.snapshot();

  const double crit = critical_phase(p.dim);
  const bool critical_regime = p.theta_field.minCoeff() >= crit - 1e-15;

  auto wants = [&enabled](const std::string& name) {
    if (enabled.empty()) return true;
    for (const std::string& e : enabled)
      if (e == name) return true;
    return false;
  };

  if (wants("jacobi_pointwise")) {
    ProbeRecord r;
    r.probe = "jacobi_pointwise";
    r.regime = "critical-supercritical";
    r.applicable = critical_regime;
    if (r.applicable) {
      JacobiPointwiseResult res = jacobi_pointwise_probe(p, u, cfg);
      r.extra["qualifying_nodes"] = res.qualifying_nodes;
      if (!res.empty()) {
        r.min_margin = res.min_margin;
        r.argmin_node = res.argmin_node;
        r.pass = res.violating_nodes.empty();
      } else {
        r.pass = true;  // empty probe is not a failure
      }
    }
    report.records.push_back(std::move(r));
  }

  if (wants("jacobi_integral")) {
    ProbeRecord r;
    r.probe = "jacobi_integral";
    r.regime = "critical-supercritical";
    r.applicable = critical_regime && bump.has_value();
    if (r.applicable) {
      JacobiIntegralResult res = jacobi_integral_probe(p, u, *bump, cfg);
      r.min_margin = res.margin;
      r.pass = res.margin >= -1e-12;
      r.extra["cells"] = res.cells;
      r.extra["lhs"] = res.lhs;
      r.extra["dirichlet"] = res.dirichlet;
      r.extra["mass"] = res.mass;
    }
    report.records.push_back(std::move(r));
  }

  if (wants("gradient_max")) {
    ProbeRecord r;
    r.probe = "gradient_max";
    r.regime = "all-phases";
    r.applicable = true;
    GradientProbeResult res = gradient_max_principle_probe(p, u, cfg);
    r.pass = res.test_function_max_in_band;
    r.min_margin = res.band_max - res.interior_max;
    r.argmin_node = res.argmax_node;
    r.extra["interior_max"] = res.interior_max;
    r.extra["band_max"] = res.band_max;
    r.extra["interior_nodes"] = res.interior_nodes;
    r.extra["band_nodes"] = res.band_nodes;
    r.extra["test_max_in_band"] = res.test_function_max_in_band ? 1.0 : 0.0;
    report.records.push_back(std::move(r));
  }

  if (wants("eigen_field")) {
    ProbeRecord r;
    r.probe = "eigen_field";
    r.regime = "critical-supercritical";
    r.applicable = critical_regime;
    if (r.applicable) {
      EigenFieldReport res = eigen_field_report(p, u, cfg);
      r.extra["applicable_nodes"] = res.applicable_nodes;
      r.extra["not_applicable_nodes"] = res.not_applicable_nodes;
      if (!res.empty()) {
        r.min_margin = res.min_margin;
        r.argmin_node = res.argmin_node;
        r.pass = res.min_margin >= -cfg.phase_match_tol;
      } else {
        r.pass = true;
      }
    }
    report.records.push_back(std::move(r));
  }

  return report;
}

}  // namespace lagphase
