#include "branchtrace/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "branchtrace/kernels.hpp"

namespace branchtrace {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  DenseMatrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw Error("from_rows: ragged initializer");
    std::copy(row.begin(), row.end(), m.row(i++).begin());
  }
  return m;
}

Vector DenseMatrix::multiply(std::span<const double> x) const {
  Vector y(rows_);
  kernels::active().gemv(data_.data(), rows_, cols_, x.data(), y.data());
  return y;
}

Vector DenseMatrix::multiply_transposed(std::span<const double> x) const {
  Vector y(cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    if (x[r] != 0.0) kernels::axpy(x[r], row(r), y);
  }
  return y;
}

DenseMatrix DenseMatrix::gram() const {
  DenseMatrix g(cols_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto a = row(r);
    std::size_t first = 0;
    while (first < cols_ && a[first] == 0.0) ++first;
    if (first == cols_) continue;
    std::size_t last = cols_ - 1;
    while (a[last] == 0.0) --last;
    for (std::size_t i = first; i <= last; ++i) {
      if (a[i] == 0.0) continue;
      const std::size_t len = last - i + 1;
      kernels::axpy(a[i], a.subspan(i, len), g.row(i).subspan(i, len));
    }
  }
  for (std::size_t i = 0; i < cols_; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

bool DenseMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t p, double v)
    : Error("matrix is not positive definite (pivot " + std::to_string(p) + " = " +
            std::to_string(v) + ")"),
      pivot(p),
      value(v) {}

SingularMatrix::SingularMatrix(std::size_t p)
    : Error("matrix is singular to working precision at pivot " + std::to_string(p)), pivot(p) {}

NoConvergence::NoConvergence(std::size_t n)
    : Error("eigenvalue iteration did not converge in " + std::to_string(n) + " iterations"),
      max_iter(n) {}

Vector cholesky_solve(const DenseMatrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw Error("cholesky_solve: dimension mismatch");
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    auto lj = l.row(j);
    for (std::size_t i = 0; i < j; ++i) {
      auto li = l.row(i);
      lj[i] = (a(j, i) - kernels::dot(lj.first(i), li.first(i))) / li[i];
    }
    const double d = a(j, j) - kernels::dot(lj.first(j), lj.first(j));
    if (!(d > 0.0)) throw NotPositiveDefinite(j, d);
    lj[j] = std::sqrt(d);
  }
  Vector y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (y[i] - kernels::dot(l.row(i).first(i), std::span<const double>(y).first(i))) / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * y[k];
    y[i] = s / l(i, i);
  }
  return y;
}

LuFactor::LuFactor(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
  const std::size_t n = lu_.rows();
  if (lu_.cols() != n) throw Error("LuFactor: matrix must be square");
  for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
  double scale = 0.0;
  for (double v : lu_.data()) scale = std::max(scale, std::fabs(v));
  const double tiny = scale * std::numeric_limits<double>::epsilon() * static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(lu_(i, k)) > std::fabs(lu_(p, k))) p = i;
    if (!(std::fabs(lu_(p, k)) > tiny)) throw SingularMatrix(k);
    if (p != k) {
      std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
      std::swap(perm_[k], perm_[p]);
    }
    const double pivot = lu_(k, k);
    auto tail_k = lu_.row(k).subspan(k + 1);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / pivot;
      lu_(i, k) = f;
      if (f != 0.0) kernels::axpy(-f, tail_k, lu_.row(i).subspan(k + 1));
    }
  }
}

Vector LuFactor::solve(std::span<const double> b) const {
  const std::size_t n = lu_.rows();
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    y[i] -= kernels::dot(lu_.row(i).first(i), std::span<const double>(y).first(i));
  }
  for (std::size_t i = n; i-- > 0;) {
    const double s = kernels::dot(lu_.row(i).subspan(i + 1), std::span<const double>(y).subspan(i + 1));
    y[i] = (y[i] - s) / lu_(i, i);
  }
  return y;
}

namespace {

double off_diagonal_radius(const DenseMatrix& a, std::size_t i) {
  double r = 0.0;
  auto row = a.row(i);
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != i) r += std::fabs(row[j]);
  return r;
}

Vector start_vector(std::size_t n) {
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * std::sin(1.0 + static_cast<double>(i));
  const double s = 1.0 / norm2(v);
  for (double& x : v) x *= s;
  return v;
}

// Tracks successive eigenvalue estimates of a linearly convergent iteration.
class ConvergenceMonitor {
 public:
  ConvergenceMonitor(double tol, double noise_scale) : tol_(tol), noise_scale_(noise_scale) {}

  bool converged(double estimate) {
    const double prev_diff = diff_;
    diff_ = std::fabs(estimate - last_);
    last_ = estimate;
    ++count_;
    if (count_ < 3) return false;
    const double bound = tol_ * std::max(1.0, std::fabs(estimate));
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * noise_scale_;
    if (diff_ <= noise) return true;
    if (diff_ > bound) return false;
    const double q = prev_diff > 0.0 ? diff_ / prev_diff : 0.0;
    if (q >= 1.0) return false;
    return diff_ * q / (1.0 - q) <= bound;
  }

 private:
  double tol_;
  double noise_scale_;
  double last_ = std::numeric_limits<double>::quiet_NaN();
  double diff_ = std::numeric_limits<double>::infinity();
  std::size_t count_ = 0;
};

}  // namespace

double gershgorin_lower(const DenseMatrix& a) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.rows(); ++i) g = std::min(g, a(i, i) - off_diagonal_radius(a, i));
  return g;
}

double gershgorin_upper(const DenseMatrix& a) {
  double g = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.rows(); ++i) g = std::max(g, a(i, i) + off_diagonal_radius(a, i));
  return g;
}

EigenPair largest_real_eigenvalue(const DenseMatrix& j, const EigenOptions& opts) {
  const std::size_t n = j.rows();
  if (j.cols() != n || n == 0) throw Error("largest_real_eigenvalue: matrix must be square");
  const double sigma = std::max(0.0, -gershgorin_lower(j)) + 1.0;
  Vector v = start_vector(n);
  Vector w(n);
  ConvergenceMonitor monitor(opts.tol, sigma + norm_inf(j.data()));
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    kernels::active().gemv(j.data().data(), n, n, v.data(), w.data());
    kernels::axpy(sigma, v, w);  // w = (J + σI) v
    const double shifted = kernels::dot(v, w);
    const double nw = norm2(w);
    if (!(nw > 0.0) || !std::isfinite(nw)) throw NoConvergence(it);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    const double lambda = shifted - sigma;
    if (monitor.converged(lambda)) return {lambda, std::move(v), it};
  }
  throw NoConvergence(opts.max_iter);
}

EigenPair largest_real_eigenvalue_inverse(const DenseMatrix& j, const EigenOptions& opts) {
  const std::size_t n = j.rows();
  if (j.cols() != n || n == 0) throw Error("largest_real_eigenvalue_inverse: matrix must be square");
  const double shift = gershgorin_upper(j) + 1.0;
  DenseMatrix shifted = j;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= shift;
  const LuFactor lu(std::move(shifted));
  Vector v = start_vector(n);
  ConvergenceMonitor monitor(opts.tol, std::fabs(shift) + 1.0);
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Vector w = lu.solve(v);  // (J - sI)⁻¹ v
    const double rq = kernels::dot(v, w);
    const double nw = norm2(w);
    if (!(nw > 0.0) || !std::isfinite(nw) || rq == 0.0) throw NoConvergence(it);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    const double lambda = shift + 1.0 / rq;
    if (monitor.converged(lambda)) {
      // Orient the eigenvector so its largest component is positive.
      const auto big = std::max_element(v.begin(), v.end(),
                                        [](double a, double b) { return std::fabs(a) < std::fabs(b); });
      if (*big < 0.0)
        for (double& x : v) x = -x;
      return {lambda, std::move(v), it};
    }
  }
  throw NoConvergence(opts.max_iter);
}

double norm2(std::span<const double> x) { return std::sqrt(kernels::dot(x, x)); }

double norm_inf(std::span<const double> x) { return kernels::max_abs(x); }

}  // namespace branchtrace
