#include "branchtrace/fd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <numbers>
#include <utility>

namespace branchtrace {

std::size_t fd_unknowns(const Grid& grid) { return grid.interior().size(); }

namespace {

void check_state(const FdState& s) {
  if (s.grid.dim() != s.problem.dim()) throw Error("fd: grid dimension does not match the problem");
  if (s.u.size() != fd_unknowns(s.grid)) throw Error("fd: state has the wrong number of unknowns");
}

}  // namespace

Vector fd_full_values(const FdState& s) {
  check_state(s);
  Vector full(s.grid.all_points().size(), 0.0);
  const auto& idx = s.grid.interior_index();
  for (std::size_t k = 0; k < idx.size(); ++k) full[idx[k]] = s.u[k];
  if (s.problem.equation == Equation::burgers_dirichlet) full[0] = s.mu;
  if (s.problem.equation == Equation::burgers_mixed) full[0] = full[1] + s.grid.h() * s.mu;
  return full;
}

Vector fd_residual(const FdState& s) {
  const Vector full = fd_full_values(s);
  const std::size_t n = s.grid.n();
  const double h = s.grid.h();
  const double ih2 = 1.0 / (h * h);
  Vector r(s.u.size());
  if (s.problem.dim() == 2) {
    const std::size_t m = n + 1;
    std::size_t k = 0;
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 1; j < n; ++j) {
        const double c = full[i * m + j];
        const double lap = (full[(i + 1) * m + j] + full[(i - 1) * m + j] + full[i * m + j + 1] +
                            full[i * m + j - 1] - 4.0 * c) * ih2;
        r[k++] = lap + s.mu * std::exp(c);
      }
    return r;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double um = full[i - 1], uc = full[i], up = full[i + 1];
    const double d2 = (up - 2.0 * uc + um) * ih2;
    if (s.problem.is_bratu())
      r[i - 1] = d2 + s.mu * std::exp(uc);
    else
      r[i - 1] = s.problem.nu * d2 - uc * (up - um) / (2.0 * h);
  }
  return r;
}

DenseMatrix fd_jacobian(const FdState& s) {
  const Vector full = fd_full_values(s);
  const std::size_t n = s.grid.n();
  const double h = s.grid.h();
  const double ih2 = 1.0 / (h * h);
  const std::size_t size = s.u.size();
  DenseMatrix j(size, size);
  if (s.problem.dim() == 2) {
    const std::size_t m = n + 1, w = n - 1;
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t jj = 1; jj < n; ++jj) {
        const std::size_t k = (i - 1) * w + (jj - 1);
        j(k, k) = -4.0 * ih2 + s.mu * std::exp(full[i * m + jj]);
        if (i > 1) j(k, k - w) = ih2;
        if (i + 1 < n) j(k, k + w) = ih2;
        if (jj > 1) j(k, k - 1) = ih2;
        if (jj + 1 < n) j(k, k + 1) = ih2;
      }
    return j;
  }
  const double nu = s.problem.nu;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t k = i - 1;
    const double um = full[i - 1], uc = full[i], up = full[i + 1];
    double left, diag, right;
    if (s.problem.is_bratu()) {
      left = right = ih2;
      diag = -2.0 * ih2 + s.mu * std::exp(uc);
    } else {
      left = nu * ih2 + uc / (2.0 * h);
      right = nu * ih2 - uc / (2.0 * h);
      diag = -2.0 * nu * ih2 - (up - um) / (2.0 * h);
    }
    j(k, k) = diag;
    if (k > 0) j(k, k - 1) = left;
    if (k + 1 < size) j(k, k + 1) = right;
    // u₀ = u₁ + hφ ties the left neighbour of the first row to u₁.
    if (k == 0 && s.problem.equation == Equation::burgers_mixed) j(0, 0) += left;
  }
  return j;
}

Vector fd_param_derivative(const FdState& s) {
  const Vector full = fd_full_values(s);
  Vector d(s.u.size(), 0.0);
  if (s.problem.is_bratu()) {
    const auto& idx = s.grid.interior_index();
    for (std::size_t k = 0; k < idx.size(); ++k) d[k] = std::exp(full[idx[k]]);
    return d;
  }
  const double h = s.grid.h();
  const double left = s.problem.nu / (h * h) + full[1] / (2.0 * h);
  d[0] = s.problem.equation == Equation::burgers_dirichlet ? left : left * h;
  return d;
}

LmOptions fd_default_options() {
  LmOptions o;
  o.f_tol = 1e-10;
  o.step_tol = 1e-13;
  o.max_iter = 200;
  o.damping_init = 1e-3;
  return o;
}

Vector fd_initial_guess(const Problem& p, const Grid& grid, Branch branch) {
  Vector u(fd_unknowns(grid), 0.0);
  if (!p.is_bratu()) {
    // u ≡ 1 reaches the large-c mixed solution; a small constant the other.
    const bool small = p.equation == Equation::burgers_mixed && branch == Branch::lower;
    std::fill(u.begin(), u.end(), small ? 0.1 : 1.0);
    return u;
  }
  if (branch == Branch::lower) return u;
  const auto& pts = grid.interior();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double v = 4.0 * std::sin(std::numbers::pi * pts[k][0]);
    if (p.dim() == 2) v *= std::sin(std::numbers::pi * pts[k][1]);
    u[k] = v;
  }
  return u;
}

FdSolveResult fd_solve(const Problem& p, const Grid& grid, double mu, Vector u_init, const LmOptions& opts) {
  FdState s{p, grid, std::move(u_init), mu};
  check_state(s);
  auto residual = [&](std::span<const double> z) {
    FdState t{p, grid, Vector(z.begin(), z.end()), mu};
    return fd_residual(t);
  };
  auto jacobian = [&](std::span<const double> z) {
    FdState t{p, grid, Vector(z.begin(), z.end()), mu};
    return fd_jacobian(t);
  };
  LmResult res = lm_solve(residual, jacobian, s.u, opts);
  // A step-size stop only counts when the residual is already at round-off
  // level; otherwise LM has stalled, e.g. beyond a fold where no root exists.
  constexpr double stalled = 1e-6;
  if (!res.report.converged() || !(res.report.final_residual_norm <= stalled))
    throw NonConvergence("finite-difference solve did not converge (residual " +
                             std::to_string(res.report.final_residual_norm) + ")",
                         res.report);
  s.u = std::move(res.z);
  return {std::move(s), std::move(res.report)};
}

EigenPair fd_stability_pair(const FdState& s, EigenMethod method, const EigenOptions& opts) {
  const DenseMatrix j = fd_jacobian(s);
  return method == EigenMethod::power ? largest_real_eigenvalue(j, opts) : largest_real_eigenvalue_inverse(j, opts);
}

double fd_stability(const FdState& s, EigenMethod method) { return fd_stability_pair(s, method).value; }

double fd_mse(const FdState& s, Branch branch) {
  const auto& pts = s.grid.interior();
  double acc = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto ex = exact_solution(s.problem, s.mu, branch, pts[k]);
    if (!ex) throw Error("fd_mse: no closed-form solution for this problem and parameter");
    const double e = s.u[k] - *ex;
    acc += e * e;
  }
  return acc / static_cast<double>(pts.size());
}

FdParamSystem::FdParamSystem(Problem p, Grid grid, LmOptions opts)
    : problem_(p), grid_(std::move(grid)), opts_(opts) {
  if (grid_.dim() != problem_.dim()) throw Error("FdParamSystem: grid dimension does not match the problem");
}

std::size_t FdParamSystem::unknowns() const { return fd_unknowns(grid_); }

FdState FdParamSystem::state(std::span<const double> z, double mu) const {
  return {problem_, grid_, Vector(z.begin(), z.end()), mu};
}

Vector FdParamSystem::residual(std::span<const double> z, double mu) const { return fd_residual(state(z, mu)); }

DenseMatrix FdParamSystem::jacobian(std::span<const double> z, double mu) const {
  return fd_jacobian(state(z, mu));
}

Vector FdParamSystem::param_derivative(std::span<const double> z, double mu) const {
  return fd_param_derivative(state(z, mu));
}

SolutionNorms FdParamSystem::norms(std::span<const double> z) const {
  return {norm_inf(z), std::sqrt(interior_cell_volume(grid_)) * norm2(z)};
}

Vector FdParamSystem::norm_gradient(std::span<const double> z, BranchNorm which) const {
  Vector g(z.size(), 0.0);
  if (which == BranchNorm::sup) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < z.size(); ++k)
      if (std::fabs(z[k]) > std::fabs(z[best])) best = k;
    g[best] = z[best] >= 0.0 ? 1.0 : -1.0;
    return g;
  }
  const double l2 = norms(z).l2;
  if (l2 == 0.0) return g;
  const double vol = interior_cell_volume(grid_);
  for (std::size_t k = 0; k < z.size(); ++k) g[k] = vol * z[k] / l2;
  return g;
}

Vector FdParamSystem::solve_fixed(double mu, std::span<const double> z_init) const {
  return fd_solve(problem_, grid_, mu, Vector(z_init.begin(), z_init.end()), opts_).state.u;
}

}  // namespace branchtrace
