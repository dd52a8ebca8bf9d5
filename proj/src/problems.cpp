#include "branchtrace/problems.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace branchtrace {

std::string_view to_string(Equation e) {
  switch (e) {
    case Equation::bratu_1d: return "bratu1d";
    case Equation::bratu_2d: return "bratu2d";
    case Equation::burgers_dirichlet: return "burgers_dirichlet";
    case Equation::burgers_mixed: return "burgers_mixed";
  }
  return "?";
}

std::string_view to_string(Branch b) { return b == Branch::lower ? "lower" : "upper"; }

Grid::Grid(int dim, std::size_t n) : dim_(dim), n_(n) {
  if (dim != 1 && dim != 2) throw Error("Grid: dimension must be 1 or 2");
  if (n < 2) throw Error("Grid: need at least two subintervals");
  const double h = 1.0 / static_cast<double>(n);
  auto w1 = [&](std::size_t i) { return (i == 0 || i == n) ? 0.5 * h : h; };
  if (dim == 1) {
    for (std::size_t i = 0; i <= n; ++i) {
      all_.push_back({static_cast<double>(i) * h, 0.0});
      weights_.push_back(w1(i));
      const bool edge = i == 0 || i == n;
      (edge ? boundary_index_ : interior_index_).push_back(i);
    }
  } else {
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t j = 0; j <= n; ++j) {
        const std::size_t k = all_.size();
        all_.push_back({static_cast<double>(i) * h, static_cast<double>(j) * h});
        weights_.push_back(w1(i) * w1(j));
        const bool edge = i == 0 || i == n || j == 0 || j == n;
        (edge ? boundary_index_ : interior_index_).push_back(k);
      }
    }
  }
  for (auto k : interior_index_) interior_.push_back(all_[k]);
  for (auto k : boundary_index_) boundary_.push_back(all_[k]);
}

namespace {

// Bisection for a sign change of f on [lo, hi].
double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double flo = f(lo);
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double log_cosh(double a) {
  a = std::fabs(a);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

double sech2(double a) {
  const double s = 1.0 / std::cosh(a);
  return s * s;
}

}  // namespace

double fold_abscissa() {
  static const double w = bisect([](double x) { return x * std::tanh(x) - 1.0; }, 0.5, 2.0, 1e-15);
  return w;
}

double bratu1d_critical_load() {
  const double w = fold_abscissa();
  return 8.0 * w * w * sech2(w);
}

double bratu1d_fold_amplitude() { return 2.0 * log_cosh(fold_abscissa()); }

double solve_omega(double c, Branch branch) {
  if (!(c > 0.0)) throw NoRoot("solve_omega: load must be positive");
  const double k = 4.0 / std::sqrt(2.0 * c);
  auto g = [k](double w) { return std::cosh(w) - k * w; };
  const double ws = fold_abscissa();
  const double gs = g(ws);
  if (gs > 0.0) throw NoRoot("solve_omega: load " + std::to_string(c) + " exceeds the critical value");
  if (gs == 0.0) return ws;
  return branch == Branch::lower ? bisect(g, 1e-8, ws, 1e-13) : bisect(g, ws, 20.0, 1e-13);
}

double bratu1d_exact(double x, double omega) {
  return 2.0 * (log_cosh(omega) - log_cosh(omega * (1.0 - 2.0 * x)));
}

double rho_of_nu(double nu) { return std::tanh(0.5 / nu); }

double burgers_dirichlet_exact(double x, double nu) { return std::tanh((1.0 - x) / (2.0 * nu)); }

double burgers_mixed_exact(double x, double nu, double c) {
  const double a = std::sqrt(2.0 * c);
  return a * std::tanh(a / (2.0 * nu) * (1.0 - x));
}

double phi_of_c(double c, double nu) { return c / nu * sech2(std::sqrt(2.0 * c) / (2.0 * nu)); }

// With k = √(2c)/(2ν), φ = 2νk²sech²k, maximal where k·tanh k = 1.
BurgersFold burgers_mixed_fold(double nu) {
  const double k = fold_abscissa();
  const double c = 2.0 * nu * nu * k * k;
  return {c, phi_of_c(c, nu)};
}

double solve_c(double phi, double nu, Branch branch) {
  if (!(phi > 0.0)) throw NoRoot("solve_c: flux must be positive");
  const auto fold = burgers_mixed_fold(nu);
  if (phi > fold.phi) throw NoRoot("solve_c: flux " + std::to_string(phi) + " exceeds the fold value");
  const double ks = fold_abscissa();
  auto f = [&](double k) { return 2.0 * nu * k * k * sech2(k) - phi; };
  const double k = branch == Branch::lower ? bisect(f, 0.0, ks, 1e-15) : bisect(f, ks, 50.0, 1e-15);
  return 2.0 * nu * nu * k * k;
}

std::optional<double> exact_solution(const Problem& p, double mu, Branch branch, const Point& x) {
  switch (p.equation) {
    case Equation::bratu_1d:
      if (mu == 0.0) return 0.0;
      return bratu1d_exact(x[0], solve_omega(mu, branch));
    case Equation::burgers_dirichlet:
      if (std::fabs(mu - rho_of_nu(p.nu)) > 1e-14) return std::nullopt;
      return burgers_dirichlet_exact(x[0], p.nu);
    case Equation::burgers_mixed:
      return burgers_mixed_exact(x[0], p.nu, solve_c(mu, p.nu, branch));
    case Equation::bratu_2d:
      break;
  }
  return std::nullopt;
}

namespace {

bool at_left(const Point& x) { return x[0] < 0.5 && std::fabs(x[0]) < 1e-12; }

}  // namespace

ResidualPartials interior_residual_partials(const Problem& p, const Point&, const Jet& u, double mu) {
  ResidualPartials r;
  if (p.is_bratu()) {
    const double e = std::exp(u.value);
    r.value = mu * e;
    for (int i = 0; i < p.dim(); ++i) {
      r.value += u.second[i];
      r.d_second[i] = 1.0;
    }
    r.d_value = mu * e;
    r.d_mu = e;
  } else {
    r.value = p.nu * u.second[0] - u.value * u.grad[0];
    r.d_value = -u.grad[0];
    r.d_grad[0] = -u.value;
    r.d_second[0] = p.nu;
  }
  return r;
}

double interior_residual(const Problem& p, const Point& x, const Jet& u, double mu) {
  return interior_residual_partials(p, x, u, mu).value;
}

ResidualPartials boundary_residual_partials(const Problem& p, const Point& x, const Jet& u, double mu) {
  ResidualPartials r;
  r.value = u.value;
  r.d_value = 1.0;
  if (!at_left(x)) return r;
  if (p.equation == Equation::burgers_dirichlet) {
    r.value = u.value - mu;
    r.d_mu = -1.0;
  } else if (p.equation == Equation::burgers_mixed) {
    r = {};
    r.value = u.grad[0] + mu;
    r.d_grad[0] = 1.0;
    r.d_mu = 1.0;
  }
  return r;
}

double boundary_residual(const Problem& p, const Point& x, const Jet& u, double mu) {
  return boundary_residual_partials(p, x, u, mu).value;
}

ResidualPartials linearized_operator(const Problem& p, const Jet& v, const Jet& u, double mu) {
  ResidualPartials r;
  if (p.is_bratu()) {
    const double e = mu * std::exp(u.value);
    r.value = e * v.value;
    for (int i = 0; i < p.dim(); ++i) {
      r.value += v.second[i];
      r.d_second[i] = 1.0;
    }
    r.d_value = e;
  } else {
    r.value = p.nu * v.second[0] - u.value * v.grad[0] - u.grad[0] * v.value;
    r.d_value = -u.grad[0];
    r.d_grad[0] = -u.value;
    r.d_second[0] = p.nu;
  }
  return r;
}

ResidualPartials eigen_boundary_partials(const Problem& p, const Point& x, const Jet& v) {
  ResidualPartials r;
  if (p.equation == Equation::burgers_mixed && at_left(x)) {
    r.value = v.grad[0];
    r.d_grad[0] = 1.0;
  } else {
    r.value = v.value;
    r.d_value = 1.0;
  }
  return r;
}

double trapezoid_inner_product(std::span<const double> f, std::span<const double> g, const Grid& grid) {
  const auto& w = grid.trapezoid_weights();
  if (f.size() != w.size() || g.size() != w.size()) throw Error("trapezoid_inner_product: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * g[i];
  return s;
}

double rayleigh_quotient(const Problem& p, std::span<const Jet> v, std::span<const Jet> u, double mu,
                         const Grid& grid) {
  const auto& w = grid.trapezoid_weights();
  if (v.size() != w.size() || u.size() != w.size()) throw Error("rayleigh_quotient: size mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    num += w[i] * linearized_operator(p, v[i], u[i], mu).value * v[i].value;
    den += w[i] * v[i].value * v[i].value;
  }
  if (den < 1e-14) throw DegenerateEigenfunction("rayleigh_quotient: eigenfunction has vanishing norm");
  return num / den;
}

AsymptoticCoeffs asymptotic_coefficients(Equation e) {
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  switch (e) {
    case Equation::bratu_1d: return {-pi2, 8.0, 16.0 / pi2 - 8.0 / 3.0};
    case Equation::burgers_mixed: return {-pi2 / 4.0, 1.5, -1.0 / 3.0};
    default: throw Error("no small-amplitude expansion for " + std::string(to_string(e)));
  }
}

double asymptotic_lambda(const Problem& p, double mu, Branch branch) {
  const auto k = asymptotic_coefficients(p.equation);
  if (p.equation == Equation::bratu_1d) {
    const double w2 = std::pow(solve_omega(mu, branch), 2);
    return k.l0 + k.l1 * w2 + k.l2 * w2 * w2;
  }
  const double cs = solve_c(mu, p.nu, branch) / (p.nu * p.nu);
  return p.nu * (k.l0 + k.l1 * cs + k.l2 * cs * cs);
}

}  // namespace branchtrace
