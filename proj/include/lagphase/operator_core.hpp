#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lagphase/errors.hpp"
#include "lagphase/sym_matrix.hpp"
#include "lagphase/util.hpp"

namespace lagphase {

inline constexpr double kPi = 3.14159265358979323846;

// Threshold (n-2)*pi/2 separating the phase regimes.
inline double critical_phase(int n) { return 0.5 * kPi * (n - 2); }

// Open range bound n*pi/2 of the operator.
inline double phase_range_limit(int n) { return 0.5 * kPi * n; }

enum class PhaseClass { Subcritical, Critical, Supercritical, Mixed };

inline const char* to_string(PhaseClass c) {
  switch (c) {
    case PhaseClass::Subcritical: return "subcritical";
    case PhaseClass::Critical: return "critical";
    case PhaseClass::Supercritical: return "supercritical";
    case PhaseClass::Mixed: return "mixed";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Operator evaluation and derivatives
// ---------------------------------------------------------------------------

// Sum of arctangents of the eigenvalues. Lies in (-n*pi/2, n*pi/2).
inline double phase_of(const SymMatrix& m) {
  if (!m.finite()) throw invalid_input("phase_of: non-finite entries");
  Spectrum s = Spectrum::of(m);
  double phase = 0.0;
  for (double lambda : s.values()) phase += std::atan(lambda);
  return phase;
}

inline double phase_of_spectrum(const Spectrum& s) {
  double phase = 0.0;
  for (double lambda : s.values()) phase += std::atan(lambda);
  return phase;
}

// Derivative of the phase: (I + M^2)^(-1), symmetric positive definite with
// eigenvalues 1/(1+lambda_i^2). Computed by a dense symmetric solve, which
// stays well conditioned at repeated eigenvalues.
inline SymMatrix phase_gradient(const SymMatrix& m) {
  if (!m.finite()) throw invalid_input("phase_gradient: non-finite entries");
  const int n = m.dim();
  Eigen::MatrixXd a = m.dense();
  Eigen::MatrixXd base = Eigen::MatrixXd::Identity(n, n) + a * a;
  Eigen::MatrixXd inv = base.llt().solve(Eigen::MatrixXd::Identity(n, n));
  return SymMatrix::from_dense(inv, 1e-9);
}

// Second derivative coefficients F^{ij,kl} at a diagonal matrix with the given
// (distinct) eigenvalues. Only two index patterns are nonzero:
//   i=j=k=l       ->  -2*lambda_i / (1+lambda_i^2)^2
//   i=l, j=k, i!=j -> -(lambda_i+lambda_j) / ((1+lambda_i^2)(1+lambda_j^2))
class HessianCoeffs {
 public:
  HessianCoeffs(int n, std::vector<double> pure, Eigen::MatrixXd cross)
      : n_(n), pure_(std::move(pure)), cross_(std::move(cross)) {}

  int dim() const { return n_; }

  double operator()(int i, int j, int k, int l) const {
    check(i); check(j); check(k); check(l);
    if (i == j && j == k && k == l) return pure_[static_cast<std::size_t>(i)];
    if (i == l && j == k && i != j) return cross_(i, j);
    return 0.0;
  }

 private:
  void check(int i) const {
    if (i < 0 || i >= n_) throw invalid_input("HessianCoeffs: index out of bounds");
  }

  int n_;
  std::vector<double> pure_;
  Eigen::MatrixXd cross_;
};

inline HessianCoeffs phase_hessian_diag_frame(const Spectrum& s,
                                              double gap_tol = 1e-8) {
  const int n = s.size();
  for (int i = 0; i + 1 < n; ++i)
    if (s[i] - s[i + 1] < gap_tol)
      throw degenerate_spectrum_error(
          "phase_hessian_diag_frame: repeated eigenvalues (gap < tol); no "
          "pointwise formula at multiplicity");
  std::vector<double> pure(static_cast<std::size_t>(n));
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double di = 1.0 + s[i] * s[i];
    pure[static_cast<std::size_t>(i)] = -2.0 * s[i] / (di * di);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dj = 1.0 + s[j] * s[j];
      cross(i, j) = -(s[i] + s[j]) / (di * dj);
    }
  }
  return HessianCoeffs(n, std::move(pure), std::move(cross));
}

// ---------------------------------------------------------------------------
// Phase classification
// ---------------------------------------------------------------------------

// Classifies a phase range against the critical threshold (n-2)*pi/2,
// applied to |theta| over [theta_min, theta_max].
inline PhaseClass classify_phase(double theta_min, double theta_max, int n) {
  if (!(std::isfinite(theta_min) && std::isfinite(theta_max)) ||
      theta_min > theta_max)
    throw invalid_input("classify_phase: bad range");
  const double limit = phase_range_limit(n);
  if (theta_min <= -limit || theta_max >= limit)
    throw out_of_range_error("classify_phase: phase out of range (-n*pi/2, n*pi/2)");
  const double abs_inf =
      (theta_min <= 0.0 && theta_max >= 0.0)
          ? 0.0
          : std::min(std::abs(theta_min), std::abs(theta_max));
  const double abs_sup = std::max(std::abs(theta_min), std::abs(theta_max));
  const double crit = critical_phase(n);
  if (abs_inf > crit) return PhaseClass::Supercritical;
  if (abs_sup < crit) return PhaseClass::Subcritical;
  if (abs_inf == crit) return PhaseClass::Critical;
  return PhaseClass::Mixed;
}

// Phase function theta over the domain, optionally depending on the solution
// value. classification is known up front for constants and filled in from
// nodal ranges once a grid samples the function.
struct PhaseSpec {
  int dim = 0;
  std::function<double(const Eigen::VectorXd& x, double u)> value;
  bool u_dependent = false;
  std::optional<PhaseClass> classification;

  static PhaseSpec constant(int n, double theta) {
    const double limit = phase_range_limit(n);
    if (!(std::abs(theta) < limit))
      throw out_of_range_error("PhaseSpec: phase out of range");
    PhaseSpec p;
    p.dim = n;
    p.value = [theta](const Eigen::VectorXd&, double) { return theta; };
    p.classification = classify_phase(theta, theta, n);
    return p;
  }

  static PhaseSpec of(int n, std::function<double(const Eigen::VectorXd&)> f) {
    PhaseSpec p;
    p.dim = n;
    p.value = [f = std::move(f)](const Eigen::VectorXd& x, double) { return f(x); };
    return p;
  }

  static PhaseSpec of_xu(int n,
                         std::function<double(const Eigen::VectorXd&, double)> f) {
    PhaseSpec p;
    p.dim = n;
    p.value = std::move(f);
    p.u_dependent = true;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Eigenvalue structure at critical and supercritical phase
// ---------------------------------------------------------------------------

// Elementary symmetric polynomials e_0..e_n by the left-to-right update
// e_k += lambda * e_{k-1}; stable for mixed-sign inputs.
inline std::vector<double> elementary_symmetric(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> e(static_cast<std::size_t>(n) + 1, 0.0);
  e[0] = 1.0;
  for (int m = 0; m < n; ++m)
    for (int k = std::min(m + 1, n); k >= 1; --k)
      e[static_cast<std::size_t>(k)] += v[static_cast<std::size_t>(m)] * e[static_cast<std::size_t>(k - 1)];
  return e;
}

// Signed margins for the eigenvalue structure that holds on levels
// theta >= (n-2)*pi/2:
//   margins[0] = lambda_{n-1}           (head positivity)
//   margins[1] = lambda_{n-1}-|lambda_n| (tail domination)
//   margins[2] = lambda_1+(n-1)*lambda_n (trace bound)
//   margins[3..] = sigma_1..sigma_{n-1}
struct EigenLemmaReport {
  bool lambda_positive_head = false;
  bool tail_domination = false;
  bool trace_bound = false;
  std::vector<bool> sigma_nonneg;
  std::vector<double> margins;

  bool all_hold() const {
    if (!(lambda_positive_head && tail_domination && trace_bound)) return false;
    for (bool b : sigma_nonneg)
      if (!b) return false;
    return true;
  }

  double min_margin() const {
    double m = margins.empty() ? 0.0 : margins.front();
    for (double v : margins) m = std::min(m, v);
    return m;
  }
};

inline EigenLemmaReport check_eigen_lemma(const Spectrum& s, double theta,
                                          int n, double tol) {
  if (s.size() != n) throw invalid_input("check_eigen_lemma: dimension mismatch");
  const double actual = phase_of_spectrum(s);
  if (std::abs(actual - theta) > tol)
    throw inconsistent_input("check_eigen_lemma: spectrum phase " +
                             fmt_double(actual) + " does not match theta " +
                             fmt_double(theta));
  if (theta < critical_phase(n) - tol)
    throw inconsistent_input("check_eigen_lemma: theta below critical threshold");

  EigenLemmaReport r;
  r.margins.push_back(s[n - 2]);                        // lambda_{n-1}
  r.margins.push_back(s[n - 2] - std::abs(s[n - 1]));   // lambda_{n-1}-|lambda_n|
  r.margins.push_back(s[0] + (n - 1) * s[n - 1]);       // lambda_1+(n-1)lambda_n
  const std::vector<double> e = elementary_symmetric(s.values());
  for (int k = 1; k <= n - 1; ++k) r.margins.push_back(e[static_cast<std::size_t>(k)]);

  r.lambda_positive_head = r.margins[0] >= -tol;
  r.tail_domination = r.margins[1] >= -tol;
  r.trace_bound = r.margins[2] >= -tol;
  for (int k = 1; k <= n - 1; ++k)
    r.sigma_nonneg.push_back(r.margins[static_cast<std::size_t>(2 + k)] >= -tol);
  return r;
}

// ---------------------------------------------------------------------------
// Level-set sampling
// ---------------------------------------------------------------------------

struct SamplerOptions {
  double log_min = -2.0;  // free coordinates drawn as exp(U[log_min, log_max])
  double log_max = 3.0;
  int retry_budget = 200;
};

// Completes a draw of n-1 positive values to a spectrum on the level
// sum(arctan) = c by inverting the last arctangent. Returns nullopt when the
// residual phase falls outside (-pi/2, pi/2).
inline std::optional<Spectrum> complete_spectrum_on_level(
    std::vector<double> head, double c) {
  double partial = 0.0;
  for (double v : head) {
    if (!std::isfinite(v)) throw invalid_input("complete_spectrum_on_level: non-finite");
    partial += std::atan(v);
  }
  const double rhs = c - partial;
  if (!(std::abs(rhs) < 0.5 * kPi)) return std::nullopt;
  head.push_back(std::tan(rhs));
  return Spectrum(std::move(head));
}

inline Spectrum sample_spectrum_on_level(double c, int n, Rng& rng,
                                         const SamplerOptions& opt = {}) {
  if (n < 2) throw invalid_input("sample_spectrum_on_level: n must be >= 2");
  if (!(std::abs(c) < phase_range_limit(n)))
    throw out_of_range_error("sample_spectrum_on_level: level out of range");
  for (int attempt = 0; attempt < opt.retry_budget; ++attempt) {
    std::vector<double> head(static_cast<std::size_t>(n - 1));
    for (double& v : head) v = std::exp(rng.uniform(opt.log_min, opt.log_max));
    if (auto s = complete_spectrum_on_level(std::move(head), c)) return *s;
  }
  throw sampling_exhausted_error(
      "sample_spectrum_on_level: retry budget exhausted at level " + fmt_double(c));
}

inline Spectrum sample_spectrum_on_level(double c, int n, std::uint64_t seed,
                                         const SamplerOptions& opt = {}) {
  Rng rng(seed);
  return sample_spectrum_on_level(c, n, rng, opt);
}

// Midpoint test of superlevel-set convexity on the level c: samples pairs on
// the level set and returns the minimum of phase(midpoint) - c. Nonnegative
// output certifies convexity on the sample; the guarantee only applies for
// |c| >= (n-2)*pi/2, and calls below that threshold probe sharpness.
inline double check_level_set_convexity(double c, int n, int num_pairs,
                                        std::uint64_t seed,
                                        const SamplerOptions& opt = {}) {
  if (num_pairs < 1) throw invalid_input("check_level_set_convexity: num_pairs >= 1");
  if (!(std::abs(c) < phase_range_limit(n)))
    throw out_of_range_error("check_level_set_convexity: level out of range");
  Rng rng(seed);
  double min_margin = std::numeric_limits<double>::infinity();
  for (int p = 0; p < num_pairs; ++p) {
    Spectrum a = sample_spectrum_on_level(c, n, rng, opt);
    Spectrum b = sample_spectrum_on_level(c, n, rng, opt);
    std::vector<double> mid(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) mid[static_cast<std::size_t>(i)] = 0.5 * (a[i] + b[i]);
    const double margin = phase_of(SymMatrix::diagonal(mid)) - c;
    min_margin = std::min(min_margin, margin);
  }
  return min_margin;
}

}  // namespace lagphase
