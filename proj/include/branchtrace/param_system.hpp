#pragma once

// A nonlinear system R(z, μ) = 0 with a scalar parameter, as seen by the
// continuation driver. Implemented for grid values (fd) and network weights
// (nnsolve).

#include <cstddef>
#include <span>

#include "branchtrace/linalg.hpp"
#include "branchtrace/problems.hpp"

namespace branchtrace {

enum class BranchNorm { sup, l2 };

/// h^d, the weight of one interior point in the discrete L² norm.
inline double interior_cell_volume(const Grid& g) { return g.dim() == 2 ? g.h() * g.h() : g.h(); }

struct SolutionNorms {
  double sup = 0.0;  // max |u| over interior grid points
  double l2 = 0.0;   // sqrt(h^d Σ u²) over interior grid points
};

class ParamSystem {
 public:
  virtual ~ParamSystem() = default;

  virtual std::size_t unknowns() const = 0;
  virtual Vector residual(std::span<const double> z, double mu) const = 0;
  /// ∂R/∂z
  virtual DenseMatrix jacobian(std::span<const double> z, double mu) const = 0;
  /// ∂R/∂μ
  virtual Vector param_derivative(std::span<const double> z, double mu) const = 0;

  virtual SolutionNorms norms(std::span<const double> z) const = 0;
  /// Gradient of the selected norm w.r.t. z (a subgradient for the sup-norm).
  virtual Vector norm_gradient(std::span<const double> z, BranchNorm which) const = 0;

  /// Solves R(z, μ) = 0 at fixed μ from z_init. Throws on failure.
  virtual Vector solve_fixed(double mu, std::span<const double> z_init) const = 0;

  /// State guess for the predictor: last + τ(last − before).
  virtual Vector extrapolate(std::span<const double> last, std::span<const double> before, double tau,
                             BranchNorm which) const;

  double norm(std::span<const double> z, BranchNorm which) const {
    const auto n = norms(z);
    return which == BranchNorm::sup ? n.sup : n.l2;
  }
};

/// The previous branch point and the spacing the next one must keep from it.
struct ArclengthAnchor {
  double norm = 0.0;
  double mu = 0.0;
  double delta = 0.0;
  double beta = 1.0;
  BranchNorm which = BranchNorm::sup;
};

/// Distance in the (norm, μ) plane between (z, μ) and the anchor.
double arclength_distance(const ParamSystem& sys, std::span<const double> z, double mu, const ArclengthAnchor& a);

/// Augmented residual [R(z, μ); √β(dist − δ)] for x = (z, μ).
Vector arclength_residual(const ParamSystem& sys, std::span<const double> x, const ArclengthAnchor& a);
DenseMatrix arclength_jacobian(const ParamSystem& sys, std::span<const double> x, const ArclengthAnchor& a);

}  // namespace branchtrace
