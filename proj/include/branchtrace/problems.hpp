#pragma once

// Steady-state problem definitions: Bratu in one and two dimensions and the
// viscous Burgers equation with Dirichlet or Neumann-Dirichlet data.
//
// The continuation parameter μ is C for Bratu, ρ = u(0) for Dirichlet
// Burgers and φ = -u_x(0) for mixed Burgers. The viscosity ν is a fixed
// property of the problem.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "branchtrace/error.hpp"
#include "branchtrace/types.hpp"

namespace branchtrace {

enum class Equation { bratu_1d, bratu_2d, burgers_dirichlet, burgers_mixed };

/// Lower = the smaller-norm solution at a given parameter value, upper = the
/// larger. For mixed Burgers this means smaller / larger c.
enum class Branch { lower, upper };

struct Problem {
  Equation equation = Equation::bratu_1d;
  double nu = 0.1;

  int dim() const { return equation == Equation::bratu_2d ? 2 : 1; }
  bool is_bratu() const {
    return equation == Equation::bratu_1d || equation == Equation::bratu_2d;
  }
};

std::string_view to_string(Equation e);
std::string_view to_string(Branch b);

/// Uniform grid on [0,1]^d with n subintervals per axis.
///
/// all_points() is the full tensor grid ((n+1)^d points, x index outer);
/// interior() and boundary() partition it. In 1D the boundary is {0, 1}.
class Grid {
 public:
  Grid(int dim, std::size_t n);

  int dim() const { return dim_; }
  std::size_t n() const { return n_; }
  double h() const { return 1.0 / static_cast<double>(n_); }

  const std::vector<Point>& all_points() const { return all_; }
  const std::vector<Point>& interior() const { return interior_; }
  const std::vector<Point>& boundary() const { return boundary_; }
  /// Positions of interior()/boundary() entries inside all_points().
  const std::vector<std::size_t>& interior_index() const { return interior_index_; }
  const std::vector<std::size_t>& boundary_index() const { return boundary_index_; }

  /// Composite trapezoid weights aligned with all_points().
  const std::vector<double>& trapezoid_weights() const { return weights_; }

 private:
  int dim_;
  std::size_t n_;
  std::vector<Point> all_;
  std::vector<Point> interior_;
  std::vector<Point> boundary_;
  std::vector<std::size_t> interior_index_;
  std::vector<std::size_t> boundary_index_;
  std::vector<double> weights_;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class DegenerateEigenfunction : public Error {
 public:
  using Error::Error;
};

// --- closed-form solutions -------------------------------------------------

/// Root of ω·tanh ω = 1. Both the Bratu fold (in ω) and the mixed Burgers
/// fold (in k = √(2c)/(2ν)) sit at this abscissa.
double fold_abscissa();

/// Critical Bratu load in 1D, 8ω*²/cosh²ω* = 3.513830719...
double bratu1d_critical_load();

/// Peak value u(1/2) of the 1D Bratu solution at the fold. Lower solutions
/// peak below it and upper solutions above it.
double bratu1d_fold_amplitude();

/// Root of cosh ω = 4ω/√(2C) on the requested branch, to 1e-12 absolute.
/// Throws NoRoot for C ≤ 0 or C above the critical load.
double solve_omega(double c, Branch branch);

double bratu1d_exact(double x, double omega);

double rho_of_nu(double nu);
double burgers_dirichlet_exact(double x, double nu);

double burgers_mixed_exact(double x, double nu, double c);
double phi_of_c(double c, double nu);

struct BurgersFold {
  double c;
  double phi;
};
BurgersFold burgers_mixed_fold(double nu);

/// Root c of φ(c) = phi on the requested branch. Throws NoRoot for φ ≤ 0 or
/// φ above the fold value.
double solve_c(double phi, double nu, Branch branch);

/// Closed-form solution at x when one exists: Bratu 1D (any admissible C),
/// Dirichlet Burgers (only at ρ = rho_of_nu(ν)) and mixed Burgers. Returns
/// nullopt otherwise.
std::optional<double> exact_solution(const Problem& p, double mu, Branch branch, const Point& x);

// --- residual functionals --------------------------------------------------

/// A residual value with its partial derivatives w.r.t. the field jet and μ.
struct ResidualPartials {
  double value = 0.0;
  double d_value = 0.0;
  std::array<double, 2> d_grad{};
  std::array<double, 2> d_second{};
  double d_mu = 0.0;
};

double interior_residual(const Problem& p, const Point& x, const Jet& u, double mu);
ResidualPartials interior_residual_partials(const Problem& p, const Point& x, const Jet& u, double mu);

double boundary_residual(const Problem& p, const Point& x, const Jet& u, double mu);
ResidualPartials boundary_residual_partials(const Problem& p, const Point& x, const Jet& u, double mu);

/// Linearisation about u applied to v: Δv + μe^u v (Bratu) or
/// ν v_xx − u v_x − u_x v (Burgers). Partials are w.r.t. the v jet.
ResidualPartials linearized_operator(const Problem& p, const Jet& v, const Jet& u, double mu);

/// Boundary conditions of the eigenproblem: v = 0 (Dirichlet sides),
/// v_x(0) = 0 for mixed Burgers.
ResidualPartials eigen_boundary_partials(const Problem& p, const Point& x, const Jet& v);

// --- quadrature and Rayleigh quotients --------------------------------------

/// Trapezoid approximation of ∫ f g over [0,1]^d; f and g sampled on
/// grid.all_points().
double trapezoid_inner_product(std::span<const double> f, std::span<const double> g, const Grid& grid);

/// ⟨Lv, v⟩ / ⟨v, v⟩ with the trapezoid inner product. Jets sampled on
/// grid.all_points(). Throws DegenerateEigenfunction if ⟨v,v⟩ < 1e-14.
double rayleigh_quotient(const Problem& p, std::span<const Jet> v, std::span<const Jet> u, double mu,
                         const Grid& grid);

// --- asymptotics -------------------------------------------------------------

struct AsymptoticCoeffs {
  double l0;
  double l1;
  double l2;
};

/// Bratu: expansion in ω². Mixed Burgers: expansion in the unit-viscosity c.
AsymptoticCoeffs asymptotic_coefficients(Equation e);

/// Three-term small-amplitude approximation of the largest eigenvalue.
/// Bratu 1D: λ₀ + λ₁ω² + λ₂ω⁴ at ω = solve_omega(mu, branch).
/// Mixed Burgers: ν(λ₀ + λ₁c̃ + λ₂c̃²) where c̃ = c/ν² rescales the physical
/// root c = solve_c(mu, ν, branch) to unit viscosity.
double asymptotic_lambda(const Problem& p, double mu, Branch branch);

}  // namespace branchtrace
