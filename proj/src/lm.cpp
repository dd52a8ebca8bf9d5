#include "branchtrace/lm.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace branchtrace {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::residual_tol: return "ResidualTol";
    case Termination::step_tol: return "StepTol";
    case Termination::gradient_tol: return "GradientTol";
    case Termination::max_iter: return "MaxIter";
  }
  return "?";
}

void LmOptions::validate() const {
  if (!(f_tol > 0.0 && step_tol > 0.0 && grad_tol >= 0.0 && damping_init > 0.0 && damping_max > damping_init &&
        damping_min > 0.0 && eps_reg > 0.0))
    throw Error("LmOptions: tolerances and damping parameters must be positive");
  if (!(damping_up > 1.0 && damping_down > 0.0 && damping_down < 1.0))
    throw Error("LmOptions: need damping_up > 1 > damping_down > 0");
  if (max_iter == 0) throw Error("LmOptions: max_iter must be positive");
}

SingularNormalEquations::SingularNormalEquations(Vector b, LmReport r)
    : Error("normal equations stayed singular: damping exceeded its maximum"), best(std::move(b)), report(std::move(r)) {}

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LmResult lm_solve(const ResidualFn& residual, const JacobianFn& jacobian, Vector z0, const LmOptions& opts) {
  opts.validate();
  LmResult out;
  Vector& z = out.z;
  LmReport& rep = out.report;
  z = std::move(z0);

  Vector f = residual(z);
  if (!finite(f)) throw Error("lm_solve: residual is not finite at the starting point");
  double fn = norm2(f);
  rep.residual_history.push_back(fn);
  auto finish = [&](Termination t) {
    rep.termination = t;
    rep.final_residual_norm = norm_inf(f);
    rep.final_residual_l2 = fn;
    return out;
  };
  if (norm_inf(f) <= opts.f_tol) return finish(Termination::residual_tol);

  DenseMatrix a;
  Vector g;
  auto linearise = [&] {
    const DenseMatrix j = jacobian(z);
    if (j.rows() != f.size() || j.cols() != z.size()) throw Error("lm_solve: Jacobian has the wrong shape");
    a = j.gram();
    g = j.multiply_transposed(f);
  };
  linearise();
  if (opts.grad_tol > 0.0 && norm_inf(g) <= opts.grad_tol) return finish(Termination::gradient_tol);

  const std::size_t m = z.size();
  double damping = opts.damping_init;
  double growth = 2.0;  // gain_ratio growth factor
  Vector rhs(m);
  Vector trial(m);
  while (rep.iterations < opts.max_iter) {
    ++rep.iterations;
    DenseMatrix sys = a;
    for (std::size_t i = 0; i < m; ++i) {
      sys(i, i) += opts.scaling == DampingScaling::identity ? damping : damping * (a(i, i) + opts.eps_reg);
      rhs[i] = -g[i];
    }
    Vector delta;
    try {
      delta = cholesky_solve(sys, rhs);
    } catch (const NotPositiveDefinite&) {
      damping *= opts.damping_up;
      if (damping > opts.damping_max) throw SingularNormalEquations(z, rep);
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) trial[i] = z[i] + delta[i];
    const bool small_step = norm2(delta) <= opts.step_tol * (1.0 + norm2(z));
    Vector ft = residual(trial);
    const double ftn = finite(ft) ? norm2(ft) : HUGE_VAL;
    if (ftn < fn) {
      if (opts.update == DampingUpdate::gain_ratio) {
        // Predicted reduction of ½‖F‖²: −δᵀg − ½δᵀAδ = ½δᵀ(μ_d·Dδ − g).
        double pred = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = opts.scaling == DampingScaling::identity ? damping : damping * (a(i, i) + opts.eps_reg);
          pred += 0.5 * delta[i] * (d * delta[i] - g[i]);
        }
        const double rho = pred > 0.0 ? 0.5 * (fn * fn - ftn * ftn) / pred : 1.0;
        damping *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        damping = std::max(damping, opts.damping_min);
        growth = 2.0;
      } else {
        damping = std::max(damping * opts.damping_down, opts.damping_min);
      }
      z.swap(trial);
      f = std::move(ft);
      fn = ftn;
      ++rep.accepted_steps;
      rep.residual_history.push_back(fn);
      if (norm_inf(f) <= opts.f_tol) return finish(Termination::residual_tol);
      if (small_step) return finish(Termination::step_tol);
      linearise();
      if (opts.grad_tol > 0.0 && norm_inf(g) <= opts.grad_tol) return finish(Termination::gradient_tol);
    } else {
      // A rejected step already below the resolution of z cannot improve it.
      if (small_step) return finish(Termination::step_tol);
      if (opts.update == DampingUpdate::gain_ratio) {
        damping *= growth;
        growth *= 2.0;
      } else {
        damping *= opts.damping_up;
      }
      if (damping > opts.damping_max) {
        rep.final_residual_norm = norm_inf(f);
        rep.final_residual_l2 = fn;
        throw SingularNormalEquations(z, rep);
      }
    }
  }
  return finish(Termination::max_iter);
}

}  // namespace branchtrace
