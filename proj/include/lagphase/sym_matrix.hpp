#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

#include "lagphase/errors.hpp"

namespace lagphase {

// Symmetric n x n matrix stored as the upper triangle, so symmetry holds by
// construction. This is the container for Hessians and induced metrics.
class SymMatrix {
 public:
  explicit SymMatrix(int dim) : dim_(dim) {
    if (dim < 1) throw invalid_input("SymMatrix: dim must be >= 1");
    upper_.assign(static_cast<std::size_t>(dim) * (dim + 1) / 2, 0.0);
  }

  static SymMatrix identity(int dim) {
    SymMatrix m(dim);
    for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
    return m;
  }

  static SymMatrix diagonal(const std::vector<double>& d) {
    SymMatrix m(static_cast<int>(d.size()));
    for (int i = 0; i < m.dim_; ++i) m.set(i, i, d[static_cast<std::size_t>(i)]);
    return m;
  }

  static SymMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::vector<double>(d));
  }

  // Accepts a matrix that is symmetric up to sym_tol (relative to its largest
  // entry) and stores the symmetric part.
  static SymMatrix from_dense(const Eigen::MatrixXd& a, double sym_tol = 1e-10) {
    if (a.rows() != a.cols() || a.rows() < 1)
      throw invalid_input("SymMatrix::from_dense: matrix must be square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    SymMatrix m(static_cast<int>(a.rows()));
    for (int i = 0; i < m.dim_; ++i)
      for (int j = i; j < m.dim_; ++j) {
        if (std::abs(a(i, j) - a(j, i)) > sym_tol * scale)
          throw invalid_input("SymMatrix::from_dense: matrix is not symmetric");
        m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
      }
    return m;
  }

  int dim() const { return dim_; }

  double operator()(int i, int j) const { return upper_[index(i, j)]; }

  void set(int i, int j, double v) { upper_[index(i, j)] = v; }

  void add(int i, int j, double v) { upper_[index(i, j)] += v; }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd a(dim_, dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = i; j < dim_; ++j) a(i, j) = a(j, i) = (*this)(i, j);
    return a;
  }

  bool finite() const {
    for (double v : upper_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : upper_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::size_t index(int i, int j) const {
    if (i < 0 || j < 0 || i >= dim_ || j >= dim_)
      throw invalid_input("SymMatrix: index out of bounds");
    if (i > j) std::swap(i, j);
    // row-major upper triangle
    return static_cast<std::size_t>(i) * (2 * dim_ - i - 1) / 2 + j;
  }

  int dim_;
  std::vector<double> upper_;
};

// Eigenvalues in non-increasing order, the frame in which the operator
// formulas are stated.
class Spectrum {
 public:
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw invalid_input("Spectrum: empty");
    for (double v : values_)
      if (!std::isfinite(v)) throw invalid_input("Spectrum: non-finite value");
    std::sort(values_.begin(), values_.end(), std::greater<double>());
  }

  Spectrum(std::initializer_list<double> values)
      : Spectrum(std::vector<double>(values)) {}

  // Spectrum of a symmetric matrix via the symmetric eigensolver.
  static Spectrum of(const SymMatrix& m) {
    if (!m.finite()) throw invalid_input("Spectrum::of: non-finite entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.dense(),
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw error("Spectrum::of: eigensolver failed");
    std::vector<double> v(es.eigenvalues().data(),
                          es.eigenvalues().data() + m.dim());
    return Spectrum(std::move(v));
  }

  int size() const { return static_cast<int>(values_.size()); }

  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }

  const std::vector<double>& values() const { return values_; }

  double largest() const { return values_.front(); }
  double smallest() const { return values_.back(); }

 private:
  std::vector<double> values_;
};

}  // namespace lagphase
