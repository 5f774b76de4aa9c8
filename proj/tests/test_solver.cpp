#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lagphase/solver.hpp"
#include "support/oracles.hpp"
#include "support/radial_oracle.hpp"

using namespace lagphase;

namespace {

double mms2(const Eigen::VectorXd& x) { return std::sin(x[0]) * std::cos(x[1]); }
Eigen::Matrix2d mms2_hessian(const Eigen::VectorXd& x) {
  Eigen::Matrix2d h;
  h(0, 0) = h(1, 1) = -std::sin(x[0]) * std::cos(x[1]);
  h(0, 1) = h(1, 0) = -std::cos(x[0]) * std::sin(x[1]);
  return h;
}
double mms2_phase(const Eigen::VectorXd& x) {
  const Eigen::Matrix2d m = mms2_hessian(x);
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double disc = std::sqrt(0.25 * (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) +
                                m(0, 1) * m(0, 1));
  return std::atan(mean + disc) + std::atan(mean - disc);
}

Eigen::VectorXd sample_field(const GridProblem& p,
                             const std::function<double(const Eigen::VectorXd&)>& f) {
  Eigen::VectorXd u(p.interior_count());
  for (int a = 0; a < p.interior_count(); ++a) u[a] = f(p.nodes[static_cast<std::size_t>(a)].x);
  return u;
}

bool trace_monotone(const SolveTrace& t) {
  for (std::size_t k = 1; k < t.records.size(); ++k)
    if (!(t.records[k].residual_max < t.records[k - 1].residual_max)) return false;
  return true;
}

}  // namespace

TEST_CASE("newton reproduces a quadratic with constant Hessian") {
  auto uq = [](const Eigen::VectorXd& x) {
    return 0.6 * x[0] * x[0] + 0.3 * x[1] * x[1] + 0.2 * x[0] * x[1] + 0.1 * x[0];
  };
  Eigen::Matrix2d m0;
  m0 << 1.2, 0.2, 0.2, 0.6;
  const double theta0 = phase_of(SymMatrix::from_dense(m0));

  GridProblem p = build_grid(DomainSpec::ball(2, 1.0, 0.2), uq, PhaseSpec::constant(2, theta0));
  for (const GridNode& node : p.nodes) REQUIRE(node.min_mixed_order >= 1);

  p.u = initial_guess(p, theta0);
  SolveTrace trace = newton_solve(p, SolverConfig{});
  CHECK(trace.final_residual() <= 1e-8);
  CHECK(trace_monotone(trace));

  const Eigen::VectorXd exact = sample_field(p, uq);
  CHECK((p.u - exact).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("manufactured solution converges at second order") {
  // frequency 3 keeps the interior truncation term dominant on the ball, so
  // the observed order sits near 2 instead of the boundary-damped 2.5+
  auto u3 = [](const Eigen::VectorXd& x) {
    return std::sin(3.0 * x[0]) * std::cos(3.0 * x[1]) / 9.0;
  };
  auto theta3 = [](const Eigen::VectorXd& x) {
    const double s = -std::sin(3.0 * x[0]) * std::cos(3.0 * x[1]);
    const double c = -std::cos(3.0 * x[0]) * std::sin(3.0 * x[1]);
    return std::atan(s + std::abs(c)) + std::atan(s - std::abs(c));
  };
  std::vector<double> errs_all, errs_reg;
  for (double h : {0.125, 0.0625, 0.03125}) {
    GridProblem p = build_grid(DomainSpec::ball(2, 1.0, h), u3, PhaseSpec::of(2, theta3));
    p.u = sample_field(p, u3);
    SolveTrace trace = newton_solve(p, SolverConfig{});
    CHECK(trace.final_residual() <= 1e-8);

    const Eigen::VectorXd exact = sample_field(p, u3);
    double err_all = 0.0, err_reg = 0.0;
    for (int a = 0; a < p.interior_count(); ++a) {
      const double e = std::abs(p.u[a] - exact[a]);
      err_all = std::max(err_all, e);
      if (p.nodes[static_cast<std::size_t>(a)].cls == NodeClass::Regular)
        err_reg = std::max(err_reg, e);
    }
    errs_all.push_back(err_all);
    errs_reg.push_back(err_reg);
  }
  // observed order across the three levels
  const double order_all = 0.5 * std::log2(errs_all[0] / errs_all[2]);
  const double order_reg = 0.5 * std::log2(errs_reg[0] / errs_reg[2]);
  CHECK(order_all > 0.9);
  CHECK(order_all < 2.3);
  CHECK(order_reg > 1.7);
  CHECK(order_reg < 2.3);
}

TEST_CASE("supercritical 3d ball converges from the quadratic start") {
  auto phi = [](const Eigen::VectorXd& x) { return x[0] * x[0] - 0.3 * x[2]; };
  const double theta0 = 0.5 * kPi + 0.3;
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, 0.125), phi,
                             PhaseSpec::constant(3, theta0));
  p.u = initial_guess(p, theta0);
  SolveTrace trace = newton_solve(p, SolverConfig{});
  CHECK(trace.final_residual() <= 1e-8);
  CHECK(trace.iterations() <= 25);
  CHECK(trace_monotone(trace));
}

TEST_CASE("initial_guess has exactly constant phase") {
  // theta0 = 3*pi/4 gives the paraboloid |x|^2/2; boundary data matching the
  // paraboloid makes the discrete Hessian exact at every one-sided node
  for (double theta0 : {0.75 * kPi, 0.5 * kPi + 0.3}) {
    const double coeff = 0.5 * std::tan(theta0 / 3.0);
    GridProblem p = build_grid(
        DomainSpec::ball(3, 1.0, 0.25),
        [coeff](const Eigen::VectorXd& x) { return coeff * x.squaredNorm(); },
        PhaseSpec::constant(3, theta0));
    p.u = initial_guess(p, theta0);
    if (theta0 == 0.75 * kPi) CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.5, 1e-15));
    for (int a = 0; a < p.interior_count(); ++a) {
      if (p.nodes[static_cast<std::size_t>(a)].min_mixed_order < 1) continue;
      CHECK_THAT(phase_of(discrete_hessian(p, a).first),
                 Catch::Matchers::WithinAbs(theta0, 1e-12));
    }
  }

  // with unrelated boundary data the phase is still exact wherever the
  // stencil touches no Dirichlet values
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, 0.25),
                             [](const Eigen::VectorXd& x) { return x[0]; },
                             PhaseSpec::constant(3, 0.75 * kPi));
  const double theta1 = 0.5 * kPi + 0.3;
  p.u = initial_guess(p, theta1);
  for (int a = 0; a < p.interior_count(); ++a) {
    bool touches_data = false;
    for (int k = 0; k < p.hessian_entry_count(); ++k)
      if (p.hessian_forms[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)].constant != 0.0)
        touches_data = true;
    if (touches_data) continue;
    CHECK_THAT(phase_of(discrete_hessian(p, a).first),
               Catch::Matchers::WithinAbs(theta1, 1e-12));
  }

  CHECK_THROWS_AS(initial_guess(p, 1.6 * kPi), out_of_range_error);
}

TEST_CASE("continuation with a trivial path equals the direct solve") {
  auto phi = [](const Eigen::VectorXd& x) { return 0.5 * x[0] - 0.2 * x[1] * x[1]; };
  const double theta0 = 0.5 * kPi + 0.4;

  GridProblem pa = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi,
                              PhaseSpec::constant(3, theta0));
  GridProblem pb = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi,
                              PhaseSpec::constant(3, theta0));

  ContinuationPath path = ContinuationPath::uniform(theta0, PhaseSpec::constant(3, theta0), 1);
  SolverConfig cfg;
  ContinuationResult cr = continuation_solve(pa, path, cfg);
  CHECK(cr.engaged_bisection_depth == 0);

  pb.u = initial_guess(pb, theta0);
  newton_solve(pb, cfg);

  REQUIRE(pa.u.size() == pb.u.size());
  for (int a = 0; a < pa.u.size(); ++a) CHECK(pa.u[a] == pb.u[a]);
}

TEST_CASE("continuation reaches the critical phase on the ball") {
  auto phi = [](const Eigen::VectorXd& x) { return x[0] * x[0] - 0.3 * x[2]; };
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi,
                             PhaseSpec::constant(3, 0.5 * kPi));
  ContinuationPath path =
      ContinuationPath::uniform(0.5 * kPi + 0.4, PhaseSpec::constant(3, 0.5 * kPi), 8);
  ContinuationResult cr = continuation_solve(p, path, SolverConfig{});
  CHECK(cr.stage_traces.back().final_residual() <= 1e-8);
  CHECK(residual(p).cwiseAbs().maxCoeff() <= 1e-8);

  // uniqueness spot-check: a different start reaches the same solution
  GridProblem q = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi,
                             PhaseSpec::constant(3, 0.5 * kPi));
  ContinuationPath path2 =
      ContinuationPath::uniform(0.5 * kPi + 0.7, PhaseSpec::constant(3, 0.5 * kPi), 8);
  continuation_solve(q, path2, SolverConfig{});
  CHECK((p.u - q.u).cwiseAbs().maxCoeff() <= 1e-7);
}

TEST_CASE("continuation handles a critical-touching variable phase") {
  auto phi = [](const Eigen::VectorXd& x) { return 0.3 * x[0]; };
  auto theta = [](const Eigen::VectorXd& x) {
    return std::max(0.5 * kPi, 0.5 * kPi + 0.2 * x[0]);
  };
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi, PhaseSpec::of(3, theta));
  CHECK(p.classification == PhaseClass::Critical);
  ContinuationPath path =
      ContinuationPath::uniform(0.5 * kPi + 0.4, PhaseSpec::of(3, theta), 4);
  ContinuationResult cr = continuation_solve(p, path, SolverConfig{});
  CHECK(cr.stage_traces.back().final_residual() <= 1e-8);
  CHECK(cr.engaged_bisection_depth >= 0);
}

TEST_CASE("comparison principle orders solutions by phase") {
  auto zero = [](const Eigen::VectorXd&) { return 0.0; };
  const double h = 0.25;

  GridProblem pa = build_grid(DomainSpec::ball(3, 1.0, h), zero,
                              PhaseSpec::constant(3, 0.5 * kPi));
  ContinuationPath patha =
      ContinuationPath::uniform(0.5 * kPi + 0.4, PhaseSpec::constant(3, 0.5 * kPi), 4);
  continuation_solve(pa, patha, SolverConfig{});

  GridProblem pb = build_grid(DomainSpec::ball(3, 1.0, h), zero,
                              PhaseSpec::constant(3, 0.5 * kPi + 0.2));
  pb.u = initial_guess(pb, 0.5 * kPi + 0.2);
  newton_solve(pb, SolverConfig{});

  ComparisonResult cmp = comparison_check(pa, pb, pa.u, pb.u, 10.0 * h * h);
  CHECK(cmp.ordered);
  // zero boundary data with supercritical phase pulls the solution below zero
  CHECK(pa.u.maxCoeff() <= 10.0 * h * h);
  CHECK(pb.u.minCoeff() < 0.0);

  // identical problems have identical solves
  ComparisonResult same = comparison_check(pa, pa, pa.u, pa.u, 1e-14);
  CHECK(same.ordered);
  CHECK(same.max_violation == 0.0);

  CHECK_THROWS_AS(comparison_check(pb, pa, pb.u, pa.u, 1.0), inconsistent_input);
}

TEST_CASE("radial solves match the 1d collocation oracle") {
  // radially varying phase, so the solution is a genuine radial profile and
  // the collocation oracle actually iterates
  auto phi = [](const Eigen::VectorXd&) { return 0.2; };
  auto theta_r = [](double r) { return 0.5 * kPi + 0.2 * (1.0 - r * r); };
  auto theta_a = [&](const Eigen::VectorXd& x) { return theta_r(x.norm()); };
  auto theta_b = [&](const Eigen::VectorXd& x) { return theta_r(x.norm()) + 0.3; };
  const double h = 0.125;

  GridProblem pa = build_grid(DomainSpec::ball(3, 1.0, h), phi, PhaseSpec::of(3, theta_a));
  pa.u = initial_guess(pa, 0.5 * kPi + 0.2);
  newton_solve(pa, SolverConfig{});

  GridProblem pb = build_grid(DomainSpec::ball(3, 1.0, h), phi, PhaseSpec::of(3, theta_b));
  pb.u = initial_guess(pb, 0.5 * kPi + 0.5);
  newton_solve(pb, SolverConfig{});

  int center = -1;
  for (int a = 0; a < pa.interior_count(); ++a)
    if (pa.nodes[static_cast<std::size_t>(a)].x.norm() == 0.0) center = a;
  REQUIRE(center >= 0);

  const double oracle_a = oracles::radial_center_value(3, theta_r, 1.0, 0.2);
  const double oracle_b =
      oracles::radial_center_value(3, [&](double r) { return theta_r(r) + 0.3; }, 1.0, 0.2);
  CHECK(std::abs(pa.u[center] - oracle_a) < 10.0 * h * h);
  CHECK(std::abs(pb.u[center] - oracle_b) < 10.0 * h * h);

  // strict ordering gap at the center, matching the oracle gap
  const double gap_oracle = oracle_a - oracle_b;
  CHECK(gap_oracle > 0.0);
  CHECK(pa.u[center] - pb.u[center] > 0.5 * gap_oracle);

  ComparisonResult cmp = comparison_check(pa, pb, pa.u, pb.u, 10.0 * h * h);
  CHECK(cmp.ordered);
}

TEST_CASE("translation probe on a quadratic") {
  auto uq = [](const Eigen::VectorXd& x) {
    return x[0] * x[0] + 0.3 * x[1] - 0.1 * x[0] * x[1];
  };
  GridProblem p = build_grid(DomainSpec::ball(2, 1.0, 0.2), uq, PhaseSpec::constant(2, 0.0));
  Eigen::VectorXd u = sample_field(p, uq);

  TranslationProbeResult r = translation_lipschitz_probe(p, u, 0);
  // difference quotients of a quadratic are exact midpoint derivatives
  double expect_int = 0.0, expect_bnd = 0.0;
  for (int a = 0; a < p.interior_count(); ++a) {
    std::array<int, 3> off{1, 0, 0};
    const int b = p.neighbor_at(a, off);
    if (b < 0) continue;
    const Eigen::VectorXd mid =
        0.5 * (p.nodes[static_cast<std::size_t>(a)].x + p.nodes[static_cast<std::size_t>(b)].x);
    const double d = std::abs(2.0 * mid[0] - 0.1 * mid[1]);
    const bool band =
        p.nodes[static_cast<std::size_t>(a)].cls == NodeClass::BoundaryAdjacent ||
        p.nodes[static_cast<std::size_t>(b)].cls == NodeClass::BoundaryAdjacent;
    (band ? expect_bnd : expect_int) = std::max(band ? expect_bnd : expect_int, d);
  }
  CHECK_THAT(r.interior_max, Catch::Matchers::WithinAbs(expect_int, 1e-10));
  CHECK_THAT(r.boundary_max, Catch::Matchers::WithinAbs(expect_bnd, 1e-10));

  CHECK_THROWS_AS(translation_lipschitz_probe(p, u, 5), invalid_input);
}

TEST_CASE("translation probe sees the boundary dominate on a constant-phase solve") {
  auto phi = [](const Eigen::VectorXd& x) { return x[0] * x[0] - 0.3 * x[2]; };
  const double h = 0.2;
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, h), phi,
                             PhaseSpec::constant(3, 0.5 * kPi));
  ContinuationPath path =
      ContinuationPath::uniform(0.5 * kPi + 0.4, PhaseSpec::constant(3, 0.5 * kPi), 4);
  continuation_solve(p, path, SolverConfig{});

  for (int axis = 0; axis < 3; ++axis) {
    TranslationProbeResult r = translation_lipschitz_probe(p, p.u, axis);
    CHECK(r.interior_max <= r.boundary_max + 2.0 * h);
  }

  // symmetric data: axes 1 and 2 agree up to the solve tolerance scale
  auto phi_sym = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
  GridProblem ps = build_grid(DomainSpec::ball(3, 1.0, h), phi_sym,
                              PhaseSpec::constant(3, 0.5 * kPi + 0.3));
  ps.u = initial_guess(ps, 0.5 * kPi + 0.3);
  newton_solve(ps, SolverConfig{});
  TranslationProbeResult r1 = translation_lipschitz_probe(ps, ps.u, 1);
  TranslationProbeResult r2 = translation_lipschitz_probe(ps, ps.u, 2);
  CHECK_THAT(r1.interior_max, Catch::Matchers::WithinAbs(r2.interior_max, 1e-6));
  CHECK_THAT(r1.boundary_max, Catch::Matchers::WithinAbs(r2.boundary_max, 1e-6));
}

TEST_CASE("phase depending on u is re-evaluated each iterate") {
  auto phi = [](const Eigen::VectorXd& x) { return 0.2 * x[0]; };
  PhaseSpec theta = PhaseSpec::of_xu(3, [](const Eigen::VectorXd&, double u) {
    return 0.5 * kPi + 0.3 - 0.1 * std::tanh(u);
  });
  GridProblem p = build_grid(DomainSpec::ball(3, 1.0, 0.25), phi, theta);
  p.u = initial_guess(p, 0.5 * kPi + 0.3);
  SolveTrace trace = newton_solve(p, SolverConfig{});
  CHECK(trace.final_residual() <= 1e-8);
  // the stored field reflects the final iterate
  p.refresh_theta(p.u);
  CHECK(residual(p).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("solver failure modes carry traces") {
  GridProblem p = build_grid(DomainSpec::ball(2, 1.0, 0.2), mms2, PhaseSpec::of(2, mms2_phase));

  p.u = Eigen::VectorXd::Zero(p.interior_count());
  SolverConfig budget;
  budget.max_newton_iters = 1;
  try {
    newton_solve(p, budget);
    FAIL("expected iteration-budget failure");
  } catch (const solve_failure& f) {
    CHECK(f.kind == SolveFailureKind::IterationBudget);
    CHECK(f.trace.records.size() >= 2);
  }

  p.u = Eigen::VectorXd::Zero(p.interior_count());
  SolverConfig strict;
  strict.armijo_c = 0.999999;
  strict.min_step = 0.9;
  try {
    newton_solve(p, strict);
    FAIL("expected stagnation failure");
  } catch (const solve_failure& f) {
    CHECK(f.kind == SolveFailureKind::Stagnation);
    CHECK_FALSE(f.trace.records.empty());
  }

  // trace CSV has the documented column order
  const std::string csv = trace_csv(SolveTrace{{{0, 0, 1.0, 0.0, 2.0, -1.0}}});
  CHECK(csv.rfind("stage,iter,residual_max,step_length,lambda1_max,lambdan_min\n", 0) == 0);
}

TEST_CASE("solver config validation") {
  SolverConfig bad;
  bad.armijo_c = 1.5;
  CHECK_THROWS_AS(bad.validate(), invalid_input);
  bad = SolverConfig{};
  bad.newton_tol = -1.0;
  CHECK_THROWS_AS(bad.validate(), invalid_input);
  CHECK_THROWS_AS(ContinuationPath::uniform(0.2, PhaseSpec::constant(3, 0.5 * kPi), 4),
                  invalid_input);
}
