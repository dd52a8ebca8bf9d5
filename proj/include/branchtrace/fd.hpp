#pragma once

// Second-order central finite differences on the uniform grid. Unknowns are
// the interior values; boundary values follow from the closure rules
// u₀ = u_n = 0 (Bratu), u₀ = ρ (Dirichlet Burgers), u₀ = u₁ + hφ (mixed
// Burgers), with u_n = 0 in every case.

#include <span>

#include "branchtrace/linalg.hpp"
#include "branchtrace/lm.hpp"
#include "branchtrace/param_system.hpp"
#include "branchtrace/problems.hpp"

namespace branchtrace {

struct FdState {
  Problem problem;
  Grid grid;
  Vector u;  // interior values in grid.interior() order
  double mu = 0.0;
};

std::size_t fd_unknowns(const Grid& grid);

/// Values on grid.all_points(), closures applied.
Vector fd_full_values(const FdState& s);

Vector fd_residual(const FdState& s);
DenseMatrix fd_jacobian(const FdState& s);
/// ∂(fd_residual)/∂μ
Vector fd_param_derivative(const FdState& s);

/// Default LM settings for finite-difference solves.
LmOptions fd_default_options();

/// Zeros for the lower Bratu branch, 4·sin(πx) (times sin(πy) in 2D) for
/// the upper one, and u ≡ 1 for Burgers.
Vector fd_initial_guess(const Problem& p, const Grid& grid, Branch branch);

struct FdSolveResult {
  FdState state;
  LmReport report;
};

/// LM solve of the square FD system. Throws NonConvergence if the iteration
/// limit is hit or LM stops with a residual sup-norm above 1e-6.
FdSolveResult fd_solve(const Problem& p, const Grid& grid, double mu, Vector u_init,
                       const LmOptions& opts = fd_default_options());

enum class EigenMethod { power, inverse };

/// Largest real eigenvalue of the FD Jacobian at s, i.e. of the discrete
/// linearised operator. Inverse iteration by default: the shifted power
/// iteration converges at a rate of roughly 1 − π²h² on these stiff
/// matrices.
EigenPair fd_stability_pair(const FdState& s, EigenMethod method = EigenMethod::inverse,
                            const EigenOptions& opts = {});
double fd_stability(const FdState& s, EigenMethod method = EigenMethod::inverse);

/// Mean squared error against the closed-form solution over interior points.
double fd_mse(const FdState& s, Branch branch);

/// Adapter for the continuation driver.
class FdParamSystem : public ParamSystem {
 public:
  FdParamSystem(Problem p, Grid grid, LmOptions opts = fd_default_options());

  std::size_t unknowns() const override;
  Vector residual(std::span<const double> z, double mu) const override;
  DenseMatrix jacobian(std::span<const double> z, double mu) const override;
  Vector param_derivative(std::span<const double> z, double mu) const override;
  SolutionNorms norms(std::span<const double> z) const override;
  Vector norm_gradient(std::span<const double> z, BranchNorm which) const override;
  Vector solve_fixed(double mu, std::span<const double> z_init) const override;

  const Problem& problem() const { return problem_; }
  const Grid& grid() const { return grid_; }
  FdState state(std::span<const double> z, double mu) const;

 private:
  Problem problem_;
  Grid grid_;
  LmOptions opts_;
};

}  // namespace branchtrace
