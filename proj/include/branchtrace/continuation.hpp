#pragma once

// Pseudo-arclength continuation in the (solution norm, μ) plane with a secant
// predictor and an LM corrector on the augmented system
//   R(z, μ) = 0,   √β·(‖(N(z) − N_prev, μ − μ_prev)‖ − δ) = 0.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "branchtrace/lm.hpp"
#include "branchtrace/param_system.hpp"

namespace branchtrace {

struct ContinuationConfig {
  double delta = 0.05;
  double tau = 1.0;
  std::size_t max_steps = 200;  // total points including the two bootstrap points
  double mu_min = 0.0;          // trace stops once μ leaves [mu_min, mu_max]
  double mu_max = std::numeric_limits<double>::infinity();
  BranchNorm norm = BranchNorm::sup;
  double beta = 1.0;
  LmOptions corrector;
  /// A corrected point is accepted when the sup-norm of the augmented
  /// residual is at most this.
  double accept_tol = 1e-8;

  void validate() const;
};

struct BranchPoint {
  std::size_t index = 0;
  double mu = 0.0;
  double norm_inf = 0.0;
  double norm_2 = 0.0;
  Vector z;
  std::optional<double> lambda_max;
  std::size_t lm_iterations = 0;
  double spacing = 0.0;  // arclength δ this point was corrected at; 0 for the first point
};

enum class StopReason { max_steps, mu_bounds, corrector_failed };
std::string_view to_string(StopReason r);

struct BranchTrace {
  std::vector<BranchPoint> points;
  StopReason stop = StopReason::max_steps;
  double delta = 0.0;  // nominal spacing, from the bootstrap
  std::string message;
};

class BootstrapFailed : public Error {
 public:
  using Error::Error;
};

class CorrectorFailed : public Error {
 public:
  using Error::Error;
};

class NoFold : public Error {
 public:
  using Error::Error;
};

BranchPoint make_point(const ParamSystem& sys, std::size_t index, double mu, Vector z);

struct BootstrapResult {
  BranchPoint first;
  BranchPoint second;
  double delta;  // achieved spacing, used for the rest of the trace
};

/// Solves at μ₁, then at μ₂ = μ₁ + Δμ warm-started from the first solution,
/// adjusting Δμ by up to three secant corrections until the spacing is within
/// 10% of cfg.delta.
BootstrapResult bootstrap(const ParamSystem& sys, double mu1, std::span<const double> z_guess,
                          const ContinuationConfig& cfg);

struct Prediction {
  Vector z;
  double mu;
};

/// (z, μ)_{k−1} + τ·((z, μ)_{k−1} − (z, μ)_{k−2})
Prediction predict(const BranchPoint& last, const BranchPoint& before, double tau);

/// Corrects a prediction onto the branch at distance delta from prev. Throws
/// CorrectorFailed if LM fails or the result misses cfg.accept_tol.
BranchPoint correct(const ParamSystem& sys, const Prediction& guess, const BranchPoint& prev, double delta,
                    const ContinuationConfig& cfg);

using StabilityFn = std::function<std::optional<double>(const BranchPoint&)>;

/// Bootstraps at mu_start and continues until max_steps points, μ leaving its
/// bounds, or a corrector failure that persists after halving δ once. When
/// stability is given every point is annotated with λ_max afterwards.
BranchTrace trace_branch(const ParamSystem& sys, double mu_start, std::span<const double> z_guess,
                         const ContinuationConfig& cfg, const StabilityFn& stability = {});

struct Fold {
  double mu_star;
  std::size_t index;  // branch point nearest the turning point
  double offset;      // vertex position relative to index, in (-1, 1)
};

/// First sign change of consecutive Δμ, refined by the vertex of the
/// parabola through μ at the three points around it.
Fold detect_fold(const std::vector<BranchPoint>& points);
Fold detect_fold(std::span<const double> mu);

/// λ_max at the fold by quadratic interpolation in the point index. Requires
/// the three points around the fold to carry λ_max.
double fold_lambda(const std::vector<BranchPoint>& points, const Fold& fold);

/// CSV with header step,mu,norm_inf,norm_2,max_lambda.
void write_branch_csv(const std::filesystem::path& path, const std::vector<BranchPoint>& points);

}  // namespace branchtrace
