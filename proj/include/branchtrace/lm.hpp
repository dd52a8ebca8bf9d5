#pragma once

// Levenberg-Marquardt for square or overdetermined nonlinear systems F(z) = 0
// in the least-squares sense.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "branchtrace/error.hpp"
#include "branchtrace/linalg.hpp"

namespace branchtrace {

enum class Termination { residual_tol, step_tol, gradient_tol, max_iter };
std::string_view to_string(Termination t);

/// How the damping term is scaled: μ_d·I (Levenberg) or
/// μ_d·(diag(JᵀJ) + ε_reg·I) (Marquardt).
enum class DampingScaling { identity, marquardt };

/// How the damping reacts to a trial step. fixed_factors multiplies by
/// damping_down / damping_up; gain_ratio uses the ratio ρ of actual to
/// predicted reduction (μ_d·max(1/3, 1 − (2ρ − 1)³) on success, doubling
/// growth factors on consecutive failures).
enum class DampingUpdate { fixed_factors, gain_ratio };

struct LmOptions {
  double f_tol = 1e-10;      // stop when ‖F‖∞ ≤ f_tol
  double step_tol = 1e-12;   // stop when ‖δ‖₂ ≤ step_tol·(1 + ‖z‖₂)
  double grad_tol = 0.0;     // stop when ‖JᵀF‖∞ ≤ grad_tol; 0 disables
  std::size_t max_iter = 500;
  double damping_init = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double damping_max = 1e12;
  double damping_min = 1e-15;
  DampingScaling scaling = DampingScaling::identity;
  DampingUpdate update = DampingUpdate::fixed_factors;
  double eps_reg = 1e-12;

  void validate() const;
};

struct LmReport {
  std::size_t iterations = 0;  // trial steps, accepted or not
  std::size_t accepted_steps = 0;
  double final_residual_norm = 0.0;  // ‖F‖∞ at the returned point
  double final_residual_l2 = 0.0;
  Termination termination = Termination::max_iter;
  std::vector<double> residual_history;  // ‖F‖₂ at the start and after each accepted step

  bool converged() const { return termination != Termination::max_iter; }
};

struct LmResult {
  Vector z;
  LmReport report;
};

class SingularNormalEquations : public Error {
 public:
  SingularNormalEquations(Vector best, LmReport report);
  Vector best;
  LmReport report;
};

/// A solve that ended without meeting its acceptance criterion.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, LmReport r) : Error(what), report(std::move(r)) {}
  LmReport report;
};

using ResidualFn = std::function<Vector(std::span<const double>)>;
using JacobianFn = std::function<DenseMatrix(std::span<const double>)>;

/// Minimises ‖F(z)‖₂ starting from z0. Steps solve
/// (JᵀJ + μ_d·D)δ = −JᵀF and are accepted only if ‖F‖₂ decreases, so the
/// returned z is always the best iterate seen. Throws SingularNormalEquations
/// once the damping passes damping_max without producing an acceptable step.
LmResult lm_solve(const ResidualFn& residual, const JacobianFn& jacobian, Vector z0, const LmOptions& opts = {});

}  // namespace branchtrace
