#pragma once

// Network formulations solved by Levenberg-Marquardt:
//   nn1  collocation residuals at fixed μ, unknowns = weights
//   nn2  nn1 rows with μ as an extra unknown plus an arclength row
//   nn3  eigenfunction network; λ is eliminated through the Rayleigh quotient
//        and a unit-norm row fixes the scale
//
// Rows of every system: interior residuals in grid.interior() order, then
// √α-weighted boundary rows (omitted for masked networks), then any extra
// rows of the mode.

#include <cstdint>
#include <span>
#include <vector>

#include "branchtrace/fd.hpp"
#include "branchtrace/lm.hpp"
#include "branchtrace/mlp.hpp"
#include "branchtrace/param_system.hpp"
#include "branchtrace/problems.hpp"

namespace branchtrace {

struct NnWeights {
  double alpha = 1.0;  // boundary rows
  double beta = 1.0;   // arclength row
  double gamma = 1.0;  // eigenfunction norm row
};

struct NnSystem {
  Problem problem;
  Grid grid;
  Mlp net;  // architecture, activation and mask; its weights are not used
  NnWeights weights;

  bool has_boundary_rows() const { return net.mask() == BoundaryMask::none; }
  std::size_t rows() const;
};

/// l = 2 hidden layers, q = 5 (1D) or 10 (2D), tanh, weights in (−0.01, 0.01).
/// Bratu is masked; Burgers is not. The output bias picks the branch: 4 for
/// the upper Bratu solution, 1 for Burgers, 0 otherwise.
Mlp default_network(const Problem& p, std::uint64_t seed, Branch branch = Branch::lower,
                    Activation act = Activation::tanh);

struct NnSolveOptions {
  LmOptions lm;
  double accept_tol = 1e-2;  // sup-norm of the final residual
};

NnSolveOptions nn_default_options();

// --- nn1 ---------------------------------------------------------------------

Vector nn1_residual(const NnSystem& sys, std::span<const double> theta, double mu);
DenseMatrix nn1_jacobian(const NnSystem& sys, std::span<const double> theta, double mu);
Vector nn1_param_derivative(const NnSystem& sys, std::span<const double> theta, double mu);

struct NnSolveResult {
  Mlp net;
  LmReport report;
};

/// Throws NonConvergence if the final residual exceeds opts.accept_tol.
NnSolveResult nn1_solve(const NnSystem& sys, double mu, const Mlp& init, const NnSolveOptions& opts = nn_default_options());

struct SeededSolve {
  NnSolveResult result;
  std::uint64_t seed;  // seed of the initialisation that succeeded
  int attempts;
};

/// nn1 from default_network(p, seed + attempt, branch), moving on to the next
/// seed when a solve fails or converges to the other branch (checked for 1D
/// Bratu and mixed Burgers). From a near-constant start the mixed Burgers
/// solve always finds the small-c solution, so its upper branch starts from a
/// network fitted to the FD solution instead.
SeededSolve nn1_solve_branch(const NnSystem& sys, double mu, Branch branch, std::uint64_t seed,
                             const NnSolveOptions& opts = nn_default_options(), int max_retries = 5);

/// Least-squares fit of start's weights to target values on grid.all_points()
/// by a short LM run.
Mlp fit_network(const Mlp& start, const Grid& grid, std::span<const double> target, std::size_t max_iter = 200);

/// Mean squared error of the network against the closed-form solution over
/// interior grid points.
double nn_mse(const Mlp& net, const Problem& p, const Grid& grid, double mu, Branch branch);

// --- nn2 ---------------------------------------------------------------------

/// Adapter for the continuation driver; z is the weight vector.
class NnParamSystem : public ParamSystem {
 public:
  NnParamSystem(NnSystem sys, NnSolveOptions opts = nn_default_options());

  std::size_t unknowns() const override { return sys_.net.size(); }
  Vector residual(std::span<const double> z, double mu) const override;
  DenseMatrix jacobian(std::span<const double> z, double mu) const override;
  Vector param_derivative(std::span<const double> z, double mu) const override;
  SolutionNorms norms(std::span<const double> z) const override;
  Vector norm_gradient(std::span<const double> z, BranchNorm which) const override;
  Vector solve_fixed(double mu, std::span<const double> z_init) const override;
  /// Keeps the last weights and scales the output layer so the norm moves
  /// along the secant. Consecutive corrected weight vectors also drift along
  /// nearly flat directions of the residual, so the plain weight secant can
  /// predict a state far off the branch.
  Vector extrapolate(std::span<const double> last, std::span<const double> before, double tau,
                     BranchNorm which) const override;

  const NnSystem& system() const { return sys_; }
  Mlp network(std::span<const double> z) const;

 private:
  NnSystem sys_;
  NnSolveOptions opts_;
};

/// nn1 rows at μ = θ^μ (the last entry of theta_aug) followed by the
/// √β-weighted arclength row. θ^μ never feeds the network itself.
Vector nn2_residual(const NnSystem& sys, std::span<const double> theta_aug, const ArclengthAnchor& prev);
DenseMatrix nn2_jacobian(const NnSystem& sys, std::span<const double> theta_aug, const ArclengthAnchor& prev);

// --- nn3 ---------------------------------------------------------------------

/// The steady state the eigenproblem linearises about, sampled on
/// grid.all_points().
std::vector<Jet> background_from_network(const Mlp& net, const Grid& grid);
/// Same from a finite-difference state: central differences inside, one-sided
/// at the boundary.
std::vector<Jet> background_from_fd(const FdState& s);

/// sqrt(mean of v² over interior points).
double eigen_norm(const Mlp& v, const Grid& grid);

class NodalSolution : public Error {
 public:
  using Error::Error;
};

struct Nn3Options {
  LmOptions lm;
  double accept_tol = 1e-4;
  int max_retries = 5;
  std::uint64_t seed = 0;
};

Nn3Options nn3_default_options();

Vector nn3_residual(const NnSystem& vsys, std::span<const double> theta, std::span<const Jet> background, double mu);
DenseMatrix nn3_jacobian(const NnSystem& vsys, std::span<const double> theta, std::span<const Jet> background,
                         double mu);

/// Rayleigh quotient of the network v about the background.
double nn3_lambda(const NnSystem& vsys, const Mlp& v, std::span<const Jet> background, double mu);

/// System for the eigenfunction network: masked for Bratu, boundary rows
/// v_x(0) = 0 and v(1) = 0 for mixed Burgers.
NnSystem eigen_system(const Problem& p, const Grid& grid, std::uint64_t seed, const NnWeights& w = {});

/// A network fitted to the nodeless profile sin(πx) (sin(πx)sin(πy) in 2D)
/// for Bratu or cos(πx/2) for mixed Burgers by a short LM run.
Mlp nodeless_init(const NnSystem& vsys, std::uint64_t seed);

struct EigenSolveResult {
  double lambda;
  Mlp v;
  double residual_norm;
  LmReport report;
  int attempts;
};

/// Solves for the dominant eigenfunction, retrying from fresh nodeless
/// initialisations (seed + attempt) when a solve fails or yields a function
/// with a sign change. The returned v is normalised to be positive.
EigenSolveResult nn3_solve(const NnSystem& vsys, double mu, std::span<const Jet> background,
                           const Nn3Options& opts = nn3_default_options());

}  // namespace branchtrace
