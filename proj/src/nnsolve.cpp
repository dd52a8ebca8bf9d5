#include "branchtrace/nnsolve.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

namespace branchtrace {

namespace {

// ∂(residual)/∂θ_k given the residual's partials w.r.t. the field jet and the
// jet's derivative w.r.t. θ_k.
double contract(const ResidualPartials& rp, const Jet& dj, int dim) {
  double s = rp.d_value * dj.value;
  for (int i = 0; i < dim; ++i) s += rp.d_grad[i] * dj.grad[i] + rp.d_second[i] * dj.second[i];
  return s;
}

void check_weights(const NnSystem& sys, std::span<const double> theta) {
  if (theta.size() != sys.net.size()) throw Error("nnsolve: weight vector has the wrong length");
}

}  // namespace

std::size_t NnSystem::rows() const {
  return grid.interior().size() + (has_boundary_rows() ? grid.boundary().size() : 0);
}

Mlp default_network(const Problem& p, std::uint64_t seed, Branch branch, Activation act) {
  const int dim = p.dim();
  const int q = dim == 1 ? 5 : 10;
  BoundaryMask mask = BoundaryMask::none;
  double bias = 1.0;
  if (p.is_bratu()) {
    mask = dim == 1 ? BoundaryMask::sin_pi_x : BoundaryMask::sin_pi_x_sin_pi_y;
    bias = branch == Branch::upper ? 4.0 : 0.0;
  }
  return Mlp::init_random(dim, 2, q, act, mask, seed, 0.01, bias);
}

NnSolveOptions nn_default_options() {
  NnSolveOptions o;
  o.lm.f_tol = 1e-10;
  o.lm.step_tol = 1e-15;
  o.lm.max_iter = 1500;
  o.lm.damping_init = 1.0;
  o.lm.update = DampingUpdate::gain_ratio;
  o.accept_tol = 1e-2;
  return o;
}

Vector nn1_residual(const NnSystem& sys, std::span<const double> theta, double mu) {
  check_weights(sys, theta);
  const Mlp net = sys.net.with_weights(Vector(theta.begin(), theta.end()));
  Vector r;
  r.reserve(sys.rows());
  for (const auto& x : sys.grid.interior())
    r.push_back(interior_residual(sys.problem, x, net.forward_with_input_derivs(x), mu));
  if (sys.has_boundary_rows()) {
    const double sa = std::sqrt(sys.weights.alpha);
    for (const auto& x : sys.grid.boundary())
      r.push_back(sa * boundary_residual(sys.problem, x, net.forward_with_input_derivs(x), mu));
  }
  return r;
}

DenseMatrix nn1_jacobian(const NnSystem& sys, std::span<const double> theta, double mu) {
  check_weights(sys, theta);
  const Mlp net = sys.net.with_weights(Vector(theta.begin(), theta.end()));
  const std::size_t m = theta.size();
  const int dim = sys.problem.dim();
  DenseMatrix j(sys.rows(), m);
  std::vector<Jet> d(m);
  std::size_t row = 0;
  for (const auto& x : sys.grid.interior()) {
    const Jet u = net.weight_sensitivities(x, d);
    const ResidualPartials rp = interior_residual_partials(sys.problem, x, u, mu);
    auto out = j.row(row++);
    for (std::size_t k = 0; k < m; ++k) out[k] = contract(rp, d[k], dim);
  }
  if (sys.has_boundary_rows()) {
    const double sa = std::sqrt(sys.weights.alpha);
    for (const auto& x : sys.grid.boundary()) {
      const Jet u = net.weight_sensitivities(x, d);
      const ResidualPartials rp = boundary_residual_partials(sys.problem, x, u, mu);
      auto out = j.row(row++);
      for (std::size_t k = 0; k < m; ++k) out[k] = sa * contract(rp, d[k], dim);
    }
  }
  return j;
}

Vector nn1_param_derivative(const NnSystem& sys, std::span<const double> theta, double mu) {
  check_weights(sys, theta);
  const Mlp net = sys.net.with_weights(Vector(theta.begin(), theta.end()));
  Vector r;
  r.reserve(sys.rows());
  for (const auto& x : sys.grid.interior())
    r.push_back(interior_residual_partials(sys.problem, x, net.forward_with_input_derivs(x), mu).d_mu);
  if (sys.has_boundary_rows()) {
    const double sa = std::sqrt(sys.weights.alpha);
    for (const auto& x : sys.grid.boundary())
      r.push_back(sa * boundary_residual_partials(sys.problem, x, net.forward_with_input_derivs(x), mu).d_mu);
  }
  return r;
}

NnSolveResult nn1_solve(const NnSystem& sys, double mu, const Mlp& init, const NnSolveOptions& opts) {
  if (init.size() != sys.net.size()) throw Error("nn1_solve: initial network does not match the system");
  auto residual = [&](std::span<const double> z) { return nn1_residual(sys, z, mu); };
  auto jacobian = [&](std::span<const double> z) { return nn1_jacobian(sys, z, mu); };
  Vector w0(init.weights().begin(), init.weights().end());
  LmResult res = lm_solve(residual, jacobian, std::move(w0), opts.lm);
  if (!(res.report.final_residual_norm <= opts.accept_tol))
    throw NonConvergence("network solve did not reach the acceptance tolerance (residual " +
                             std::to_string(res.report.final_residual_norm) + ")",
                         res.report);
  return {init.with_weights(std::move(res.z)), std::move(res.report)};
}

SeededSolve nn1_solve_branch(const NnSystem& sys, double mu, Branch branch, std::uint64_t seed,
                             const NnSolveOptions& opts, int max_retries) {
  std::string failure;
  LmReport last;
  const bool burgers = sys.problem.equation == Equation::burgers_mixed;
  double fold_u0 = 0.0;
  if (burgers) {
    const double c = burgers_mixed_fold(sys.problem.nu).c;
    fold_u0 = burgers_mixed_exact(0.0, sys.problem.nu, c);
  }
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
    try {
      Mlp init = default_network(sys.problem, s, branch, sys.net.activation());
      if (burgers && branch == Branch::upper) {
        const FdSolveResult fd = fd_solve(sys.problem, sys.grid, mu, fd_initial_guess(sys.problem, sys.grid, branch));
        init = fit_network(init, sys.grid, fd_full_values(fd.state));
      }
      NnSolveResult r = nn1_solve(sys, mu, init, opts);
      std::optional<bool> upper;
      if (sys.problem.equation == Equation::bratu_1d) upper = r.net.forward({0.5, 0.0}) > bratu1d_fold_amplitude();
      if (burgers) upper = r.net.forward({0.0, 0.0}) > fold_u0;
      if (upper && *upper != (branch == Branch::upper)) {
        failure = "solve converged to the other branch";
        last = r.report;
        continue;
      }
      return {std::move(r), s, attempt + 1};
    } catch (const NonConvergence& e) {
      failure = e.what();
      last = e.report;
    } catch (const SingularNormalEquations& e) {
      failure = e.what();
      last = e.report;
    }
  }
  throw NonConvergence(failure, last);
}

Mlp fit_network(const Mlp& start, const Grid& grid, std::span<const double> target, std::size_t max_iter) {
  const auto& pts = grid.all_points();
  if (target.size() != pts.size()) throw Error("fit_network: target must cover every grid point");
  auto residual = [&](std::span<const double> z) {
    const Mlp net = start.with_weights(Vector(z.begin(), z.end()));
    Vector r(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) r[i] = net.forward(pts[i]) - target[i];
    return r;
  };
  auto jacobian = [&](std::span<const double> z) {
    const Mlp net = start.with_weights(Vector(z.begin(), z.end()));
    DenseMatrix j(pts.size(), z.size());
    std::vector<Jet> d(z.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      net.weight_sensitivities(pts[i], d);
      for (std::size_t k = 0; k < z.size(); ++k) j(i, k) = d[k].value;
    }
    return j;
  };
  LmOptions o;
  o.max_iter = max_iter;
  o.f_tol = 1e-6;
  o.damping_init = 1.0;
  o.update = DampingUpdate::gain_ratio;
  Vector w0(start.weights().begin(), start.weights().end());
  return start.with_weights(lm_solve(residual, jacobian, std::move(w0), o).z);
}

double nn_mse(const Mlp& net, const Problem& p, const Grid& grid, double mu, Branch branch) {
  double acc = 0.0;
  for (const auto& x : grid.interior()) {
    const auto ex = exact_solution(p, mu, branch, x);
    if (!ex) throw Error("nn_mse: no closed-form solution for this problem and parameter");
    const double e = net.forward(x) - *ex;
    acc += e * e;
  }
  return acc / static_cast<double>(grid.interior().size());
}

// --- nn2 ---------------------------------------------------------------------

NnParamSystem::NnParamSystem(NnSystem sys, NnSolveOptions opts) : sys_(std::move(sys)), opts_(opts) {
  if (sys_.grid.dim() != sys_.problem.dim() || sys_.net.inputs() != sys_.problem.dim())
    throw Error("NnParamSystem: network, grid and problem dimensions disagree");
}

Mlp NnParamSystem::network(std::span<const double> z) const { return sys_.net.with_weights(Vector(z.begin(), z.end())); }

Vector NnParamSystem::residual(std::span<const double> z, double mu) const { return nn1_residual(sys_, z, mu); }

DenseMatrix NnParamSystem::jacobian(std::span<const double> z, double mu) const {
  return nn1_jacobian(sys_, z, mu);
}

Vector NnParamSystem::param_derivative(std::span<const double> z, double mu) const {
  return nn1_param_derivative(sys_, z, mu);
}

Vector NnParamSystem::extrapolate(std::span<const double> last, std::span<const double> before, double tau,
                                  BranchNorm which) const {
  Vector z(last.begin(), last.end());
  const double now = norm(last, which);
  const double target = now + tau * (now - norm(before, which));
  const double scale = target / now;
  if (std::isfinite(scale) && scale > 0.0)
    for (std::size_t k = sys_.net.output_layer_offset(); k < z.size(); ++k) z[k] *= scale;
  return z;
}

SolutionNorms NnParamSystem::norms(std::span<const double> z) const {
  const Mlp net = network(z);
  SolutionNorms out;
  double acc = 0.0;
  for (const auto& x : sys_.grid.interior()) {
    const double u = net.forward(x);
    out.sup = std::max(out.sup, std::fabs(u));
    acc += u * u;
  }
  out.l2 = std::sqrt(interior_cell_volume(sys_.grid) * acc);
  return out;
}

Vector NnParamSystem::norm_gradient(std::span<const double> z, BranchNorm which) const {
  const Mlp net = network(z);
  const auto& pts = sys_.grid.interior();
  Vector g(z.size(), 0.0);
  std::vector<Jet> d(z.size());
  if (which == BranchNorm::sup) {
    std::size_t best = 0;
    double best_abs = -1.0;
    double best_val = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double u = net.forward(pts[i]);
      if (std::fabs(u) > best_abs) {
        best_abs = std::fabs(u);
        best_val = u;
        best = i;
      }
    }
    net.weight_sensitivities(pts[best], d);
    const double sign = best_val >= 0.0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < z.size(); ++k) g[k] = sign * d[k].value;
    return g;
  }
  const double l2 = norms(z).l2;
  if (l2 == 0.0) return g;
  const double scale = interior_cell_volume(sys_.grid) / l2;
  for (const auto& x : pts) {
    const Jet u = net.weight_sensitivities(x, d);
    for (std::size_t k = 0; k < z.size(); ++k) g[k] += scale * u.value * d[k].value;
  }
  return g;
}

Vector NnParamSystem::solve_fixed(double mu, std::span<const double> z_init) const {
  const NnSolveResult res = nn1_solve(sys_, mu, network(z_init), opts_);
  return Vector(res.net.weights().begin(), res.net.weights().end());
}

Vector nn2_residual(const NnSystem& sys, std::span<const double> theta_aug, const ArclengthAnchor& prev) {
  return arclength_residual(NnParamSystem(sys), theta_aug, prev);
}

DenseMatrix nn2_jacobian(const NnSystem& sys, std::span<const double> theta_aug, const ArclengthAnchor& prev) {
  return arclength_jacobian(NnParamSystem(sys), theta_aug, prev);
}

// --- nn3 ---------------------------------------------------------------------

std::vector<Jet> background_from_network(const Mlp& net, const Grid& grid) {
  std::vector<Jet> out;
  out.reserve(grid.all_points().size());
  for (const auto& x : grid.all_points()) out.push_back(net.forward_with_input_derivs(x));
  return out;
}

std::vector<Jet> background_from_fd(const FdState& s) {
  const Vector full = fd_full_values(s);
  const std::size_t n = s.grid.n();
  const double h = s.grid.h();
  const int dim = s.grid.dim();
  const std::size_t stride_x = dim == 2 ? n + 1 : 1;
  std::vector<Jet> out(full.size());
  // Derivatives along one axis at index i (0..n) of a line with given stride.
  auto axis = [&](std::size_t base, std::size_t i, std::size_t stride, double& d1, double& d2) {
    auto at = [&](std::size_t k) { return full[base + k * stride]; };
    if (i == 0) {
      d1 = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      d2 = (at(0) - 2.0 * at(1) + at(2)) / (h * h);
    } else if (i == n) {
      d1 = (3.0 * at(n) - 4.0 * at(n - 1) + at(n - 2)) / (2.0 * h);
      d2 = (at(n) - 2.0 * at(n - 1) + at(n - 2)) / (h * h);
    } else {
      d1 = (at(i + 1) - at(i - 1)) / (2.0 * h);
      d2 = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h);
    }
  };
  for (std::size_t k = 0; k < full.size(); ++k) {
    Jet& j = out[k];
    j.value = full[k];
    const std::size_t i = k / stride_x;
    axis(k - i * stride_x, i, stride_x, j.grad[0], j.second[0]);
    if (dim == 2) {
      const std::size_t jj = k % (n + 1);
      axis(k - jj, jj, 1, j.grad[1], j.second[1]);
    }
  }
  return out;
}

double eigen_norm(const Mlp& v, const Grid& grid) {
  double acc = 0.0;
  for (const auto& x : grid.interior()) acc += std::pow(v.forward(x), 2);
  return std::sqrt(acc / static_cast<double>(grid.interior().size()));
}

Nn3Options nn3_default_options() {
  Nn3Options o;
  o.lm.f_tol = 1e-10;
  o.lm.step_tol = 1e-15;
  o.lm.max_iter = 1500;
  o.lm.damping_init = 1.0;
  o.lm.update = DampingUpdate::gain_ratio;
  o.accept_tol = 1e-4;
  return o;
}

namespace {

struct EigenEval {
  std::vector<Jet> v;           // on all points
  std::vector<ResidualPartials> lv;
  double lambda = 0.0;
  double den = 0.0;
  double norm = 0.0;            // sqrt(mean interior v²)
};

EigenEval evaluate_eigen(const NnSystem& vsys, const Mlp& net, std::span<const Jet> bg, double mu) {
  const auto& pts = vsys.grid.all_points();
  if (bg.size() != pts.size()) throw Error("nn3: background must be sampled on every grid point");
  EigenEval e;
  e.v.reserve(pts.size());
  e.lv.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    e.v.push_back(net.forward_with_input_derivs(pts[i]));
    e.lv.push_back(linearized_operator(vsys.problem, e.v[i], bg[i], mu));
  }
  const auto& w = vsys.grid.trapezoid_weights();
  double num = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    num += w[i] * e.lv[i].value * e.v[i].value;
    e.den += w[i] * e.v[i].value * e.v[i].value;
  }
  if (e.den < 1e-14) throw DegenerateEigenfunction("nn3: eigenfunction has vanishing norm");
  e.lambda = num / e.den;
  double acc = 0.0;
  for (auto k : vsys.grid.interior_index()) acc += e.v[k].value * e.v[k].value;
  e.norm = std::sqrt(acc / static_cast<double>(vsys.grid.interior_index().size()));
  return e;
}

std::size_t eigen_rows(const NnSystem& vsys) { return vsys.rows() + 1; }

}  // namespace

double nn3_lambda(const NnSystem& vsys, const Mlp& v, std::span<const Jet> background, double mu) {
  return evaluate_eigen(vsys, v, background, mu).lambda;
}

Vector nn3_residual(const NnSystem& vsys, std::span<const double> theta, std::span<const Jet> background, double mu) {
  check_weights(vsys, theta);
  const Mlp net = vsys.net.with_weights(Vector(theta.begin(), theta.end()));
  const EigenEval e = evaluate_eigen(vsys, net, background, mu);
  Vector r;
  r.reserve(eigen_rows(vsys));
  for (auto k : vsys.grid.interior_index()) r.push_back(e.lv[k].value - e.lambda * e.v[k].value);
  if (vsys.has_boundary_rows()) {
    const double sa = std::sqrt(vsys.weights.alpha);
    const auto& bidx = vsys.grid.boundary_index();
    for (std::size_t b = 0; b < bidx.size(); ++b)
      r.push_back(sa * eigen_boundary_partials(vsys.problem, vsys.grid.boundary()[b], e.v[bidx[b]]).value);
  }
  r.push_back(std::sqrt(vsys.weights.gamma) * (e.norm - 1.0));
  return r;
}

DenseMatrix nn3_jacobian(const NnSystem& vsys, std::span<const double> theta, std::span<const Jet> background,
                         double mu) {
  check_weights(vsys, theta);
  const Mlp net = vsys.net.with_weights(Vector(theta.begin(), theta.end()));
  const EigenEval e = evaluate_eigen(vsys, net, background, mu);
  const auto& pts = vsys.grid.all_points();
  const auto& w = vsys.grid.trapezoid_weights();
  const std::size_t m = theta.size();
  const int dim = vsys.problem.dim();

  // Per-point derivatives of v and Lv w.r.t. every weight.
  std::vector<double> dv(pts.size() * m), dlv(pts.size() * m);
  std::vector<Jet> d(m);
  Vector dnum(m, 0.0), dden(m, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    net.weight_sensitivities(pts[i], d);
    for (std::size_t k = 0; k < m; ++k) {
      const double a = d[k].value;
      const double b = contract(e.lv[i], d[k], dim);
      dv[i * m + k] = a;
      dlv[i * m + k] = b;
      dnum[k] += w[i] * (b * e.v[i].value + e.lv[i].value * a);
      dden[k] += w[i] * 2.0 * e.v[i].value * a;
    }
  }
  Vector dlambda(m);
  for (std::size_t k = 0; k < m; ++k) dlambda[k] = (dnum[k] - e.lambda * dden[k]) / e.den;

  DenseMatrix j(eigen_rows(vsys), m);
  std::size_t row = 0;
  const auto& iidx = vsys.grid.interior_index();
  for (auto i : iidx) {
    auto out = j.row(row++);
    for (std::size_t k = 0; k < m; ++k)
      out[k] = dlv[i * m + k] - e.lambda * dv[i * m + k] - e.v[i].value * dlambda[k];
  }
  if (vsys.has_boundary_rows()) {
    const double sa = std::sqrt(vsys.weights.alpha);
    const auto& bidx = vsys.grid.boundary_index();
    for (std::size_t b = 0; b < bidx.size(); ++b) {
      const auto& x = vsys.grid.boundary()[b];
      net.weight_sensitivities(x, d);
      const ResidualPartials rp = eigen_boundary_partials(vsys.problem, x, e.v[bidx[b]]);
      auto out = j.row(row++);
      for (std::size_t k = 0; k < m; ++k) out[k] = sa * contract(rp, d[k], dim);
    }
  }
  auto out = j.row(row);
  const double scale = std::sqrt(vsys.weights.gamma) / (static_cast<double>(iidx.size()) * e.norm);
  for (auto i : iidx)
    for (std::size_t k = 0; k < m; ++k) out[k] += scale * e.v[i].value * dv[i * m + k];
  return j;
}

NnSystem eigen_system(const Problem& p, const Grid& grid, std::uint64_t seed, const NnWeights& w) {
  return NnSystem{p, grid, default_network(p, seed), w};
}

Mlp nodeless_init(const NnSystem& vsys, std::uint64_t seed) {
  const Mlp& t = vsys.net;
  const Mlp start = Mlp::init_random(t.inputs(), t.hidden_layers(), t.width(), t.activation(), t.mask(), seed, 0.01, 1.0);
  const bool masked = t.mask() != BoundaryMask::none;
  const auto& pts = vsys.grid.all_points();
  constexpr double pi = std::numbers::pi;
  Vector target(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& x = pts[i];
    if (vsys.problem.is_bratu()) {
      target[i] = std::sin(pi * x[0]) * (vsys.problem.dim() == 2 ? std::sin(pi * x[1]) : 1.0);
    } else {
      target[i] = std::cos(0.5 * pi * x[0]);
    }
  }
  if (masked) return start;  // the mask times a constant already is the profile
  return fit_network(start, vsys.grid, target);
}

EigenSolveResult nn3_solve(const NnSystem& vsys, double mu, std::span<const Jet> background, const Nn3Options& opts) {
  std::string last_failure = "no attempt made";
  bool last_nodal = false;
  LmReport last_report;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    const Mlp init = nodeless_init(vsys, opts.seed + static_cast<std::uint64_t>(attempt));
    auto residual = [&](std::span<const double> z) { return nn3_residual(vsys, z, background, mu); };
    auto jacobian = [&](std::span<const double> z) { return nn3_jacobian(vsys, z, background, mu); };
    LmResult res;
    try {
      res = lm_solve(residual, jacobian, Vector(init.weights().begin(), init.weights().end()), opts.lm);
    } catch (const SingularNormalEquations& e) {
      last_failure = e.what();
      last_report = e.report;
      last_nodal = false;
      continue;
    } catch (const DegenerateEigenfunction& e) {
      last_failure = e.what();
      last_nodal = false;
      continue;
    }
    last_report = res.report;
    if (!(res.report.final_residual_norm <= opts.accept_tol)) {
      last_failure = "eigenfunction solve did not reach the acceptance tolerance (residual " +
                     std::to_string(res.report.final_residual_norm) + ")";
      last_nodal = false;
      continue;
    }
    Mlp v = init.with_weights(std::move(res.z));
    double sum = 0.0;
    for (const auto& x : vsys.grid.interior()) sum += v.forward(x);
    // v is linear in the output layer, so one rescaling fixes both the sign
    // and the unit norm that the norm row only enforces to accept_tol.
    const double scale = (sum < 0.0 ? -1.0 : 1.0) / eigen_norm(v, vsys.grid);
    if (std::isfinite(scale)) {
      Vector w(v.weights().begin(), v.weights().end());
      for (std::size_t k = v.output_layer_offset(); k < w.size(); ++k) w[k] *= scale;
      v = v.with_weights(std::move(w));
    }
    const bool nodal = std::any_of(vsys.grid.interior().begin(), vsys.grid.interior().end(),
                                   [&](const Point& x) { return !(v.forward(x) > 0.0); });
    if (nodal) {
      last_failure = "eigenfunction changes sign inside the domain";
      last_nodal = true;
      continue;
    }
    const double lambda = nn3_lambda(vsys, v, background, mu);
    const double rn = res.report.final_residual_norm;
    return EigenSolveResult{lambda, std::move(v), rn, std::move(res.report), attempt + 1};
  }
  if (last_nodal) throw NodalSolution(last_failure);
  throw NonConvergence(last_failure, last_report);
}

}  // namespace branchtrace
