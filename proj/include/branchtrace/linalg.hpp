#pragma once

// Minimal dense linear algebra: a row-major matrix, SPD and general solves,
// and extraction of the algebraically largest real eigenvalue.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "branchtrace/error.hpp"

namespace branchtrace {

using Vector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  /// A x
  Vector multiply(std::span<const double> x) const;
  /// Aᵀ x
  Vector multiply_transposed(std::span<const double> x) const;
  /// AᵀA. Zero entries of A are skipped, so banded matrices stored densely
  /// cost O(bandwidth · cols) per row.
  DenseMatrix gram() const;

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value);
  std::size_t pivot;
  double value;
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(std::size_t pivot);
  std::size_t pivot;
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(std::size_t max_iter);
  std::size_t max_iter;
};

/// Solves A x = b for symmetric positive-definite A. Only the lower triangle
/// of A is read.
Vector cholesky_solve(const DenseMatrix& a, std::span<const double> b);

/// LU factorisation with partial pivoting, kept for repeated solves.
class LuFactor {
 public:
  explicit LuFactor(DenseMatrix a);
  Vector solve(std::span<const double> b) const;
  std::size_t size() const { return lu_.rows(); }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

/// Gershgorin disc bounds on the real parts of the spectrum.
double gershgorin_lower(const DenseMatrix& a);
double gershgorin_upper(const DenseMatrix& a);

struct EigenOptions {
  double tol = 1e-10;
  std::size_t max_iter = 200000;
};

struct EigenPair {
  double value = 0.0;
  Vector vector;  // unit 2-norm
  std::size_t iterations = 0;
};

/// Power iteration on J + σI with σ = max(0, -gershgorin_lower(J)) + 1.
/// Stops once successive estimates differ by at most tol·max(1, |λ|) and the
/// geometric tail implied by the last two differences is below the same
/// bound. Throws NoConvergence after max_iter iterations.
EigenPair largest_real_eigenvalue(const DenseMatrix& j, const EigenOptions& opts = {});

/// Inverse iteration with shift s = gershgorin_upper(J) + 1, which lies above
/// every real eigenvalue, so the iteration converges to the algebraically
/// largest one at rate (s - λ₁)/(s - λ₂). Same stopping rule as above. Used
/// for large stiff Jacobians where the shifted power iteration needs O(n²)
/// iterations.
EigenPair largest_real_eigenvalue_inverse(const DenseMatrix& j, const EigenOptions& opts = {});

double norm2(std::span<const double> x);
double norm_inf(std::span<const double> x);

}  // namespace branchtrace
