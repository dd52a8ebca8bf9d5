#include "branchtrace/continuation.hpp"

#include <cmath>
#include <utility>

#include "branchtrace/io.hpp"

namespace branchtrace {

void ContinuationConfig::validate() const {
  if (!(delta > 0.0)) throw Error("continuation: delta must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("continuation: tau must lie in (0, 1]");
  if (max_steps < 2) throw Error("continuation: max_steps must be at least 2");
  if (!(mu_min < mu_max)) throw Error("continuation: empty parameter range");
  if (!(beta > 0.0 && accept_tol > 0.0)) throw Error("continuation: beta and accept_tol must be positive");
  corrector.validate();
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::max_steps: return "max_steps";
    case StopReason::mu_bounds: return "mu_bounds";
    case StopReason::corrector_failed: return "corrector_failed";
  }
  return "?";
}

BranchPoint make_point(const ParamSystem& sys, std::size_t index, double mu, Vector z) {
  const SolutionNorms n = sys.norms(z);
  BranchPoint p;
  p.index = index;
  p.mu = mu;
  p.norm_inf = n.sup;
  p.norm_2 = n.l2;
  p.z = std::move(z);
  return p;
}

namespace {

double point_norm(const BranchPoint& p, BranchNorm which) { return which == BranchNorm::sup ? p.norm_inf : p.norm_2; }

double spacing(const BranchPoint& a, const BranchPoint& b, BranchNorm which) {
  return std::hypot(point_norm(a, which) - point_norm(b, which), a.mu - b.mu);
}

}  // namespace

BootstrapResult bootstrap(const ParamSystem& sys, double mu1, std::span<const double> z_guess,
                          const ContinuationConfig& cfg) {
  cfg.validate();
  BranchPoint first;
  try {
    first = make_point(sys, 0, mu1, sys.solve_fixed(mu1, z_guess));
  } catch (const Error& e) {
    throw BootstrapFailed(std::string("first bootstrap solve failed: ") + e.what());
  }
  const double delta = cfg.delta;
  double dmu = delta, dmu_prev = 0.0, s_prev = 0.0;
  BranchPoint second;
  for (int attempt = 0; attempt < 4; ++attempt) {
    try {
      second = make_point(sys, 1, mu1 + dmu, sys.solve_fixed(mu1 + dmu, first.z));
    } catch (const Error& e) {
      throw BootstrapFailed(std::string("second bootstrap solve failed: ") + e.what());
    }
    const double s = spacing(first, second, cfg.norm);
    if (std::fabs(s - delta) <= 0.1 * delta || attempt == 3) break;
    const double slope = (s - s_prev) / (dmu - dmu_prev);
    dmu_prev = dmu;
    s_prev = s;
    if (!(slope > 0.0) || !std::isfinite(slope)) break;
    dmu += (delta - s) / slope;
  }
  const double achieved = spacing(first, second, cfg.norm);
  if (std::fabs(achieved - delta) > 0.1 * delta)
    throw BootstrapFailed("bootstrap spacing " + format_double(achieved) + " is not within 10% of delta");
  second.spacing = achieved;
  return {std::move(first), std::move(second), achieved};
}

Prediction predict(const BranchPoint& last, const BranchPoint& before, double tau) {
  if (last.z.size() != before.z.size()) throw Error("predict: points have different sizes");
  Prediction p{last.z, last.mu + tau * (last.mu - before.mu)};
  for (std::size_t i = 0; i < p.z.size(); ++i) p.z[i] += tau * (last.z[i] - before.z[i]);
  return p;
}

BranchPoint correct(const ParamSystem& sys, const Prediction& guess, const BranchPoint& prev, double delta,
                    const ContinuationConfig& cfg) {
  const ArclengthAnchor anchor{point_norm(prev, cfg.norm), prev.mu, delta, cfg.beta, cfg.norm};
  Vector x0 = guess.z;
  x0.push_back(guess.mu);
  auto residual = [&](std::span<const double> x) { return arclength_residual(sys, x, anchor); };
  auto jacobian = [&](std::span<const double> x) { return arclength_jacobian(sys, x, anchor); };
  LmResult res;
  try {
    res = lm_solve(residual, jacobian, std::move(x0), cfg.corrector);
  } catch (const Error& e) {
    throw CorrectorFailed(std::string("corrector failed: ") + e.what());
  }
  if (!(res.report.final_residual_norm <= cfg.accept_tol))
    throw CorrectorFailed("corrector residual " + format_double(res.report.final_residual_norm) +
                          " exceeds the acceptance tolerance");
  const double mu = res.z.back();
  res.z.pop_back();
  BranchPoint p = make_point(sys, prev.index + 1, mu, std::move(res.z));
  p.lm_iterations = res.report.iterations;
  p.spacing = delta;
  return p;
}

BranchTrace trace_branch(const ParamSystem& sys, double mu_start, std::span<const double> z_guess,
                         const ContinuationConfig& cfg, const StabilityFn& stability) {
  BootstrapResult boot = bootstrap(sys, mu_start, z_guess, cfg);
  BranchTrace trace;
  trace.delta = boot.delta;
  trace.points.push_back(std::move(boot.first));
  trace.points.push_back(std::move(boot.second));
  while (true) {
    if (trace.points.size() >= cfg.max_steps) {
      trace.stop = StopReason::max_steps;
      break;
    }
    const BranchPoint& last = trace.points.back();
    const BranchPoint& before = trace.points[trace.points.size() - 2];
    // The secant may span a halved step, so rescale τ to predict the
    // target spacing.
    const double secant = spacing(last, before, cfg.norm);
    // A corrector that lands behind the last point has found the other
    // intersection of the arclength circle with the branch.
    auto step = [&](double delta) {
      const double tau = secant > 0.0 ? cfg.tau * delta / secant : cfg.tau;
      const Prediction guess{sys.extrapolate(last.z, before.z, tau, cfg.norm),
                             last.mu + tau * (last.mu - before.mu)};
      BranchPoint p = correct(sys, guess, last, delta, cfg);
      const double dot = (point_norm(p, cfg.norm) - point_norm(last, cfg.norm)) *
                             (point_norm(last, cfg.norm) - point_norm(before, cfg.norm)) +
                         (p.mu - last.mu) * (last.mu - before.mu);
      if (!(dot > 0.0)) throw CorrectorFailed("corrector reversed the direction of the branch");
      return p;
    };
    // δ stays fixed; a failed step is retried once at δ/2.
    std::optional<BranchPoint> next;
    try {
      next = step(trace.delta);
    } catch (const CorrectorFailed&) {
      try {
        next = step(0.5 * trace.delta);
      } catch (const CorrectorFailed& e) {
        trace.stop = StopReason::corrector_failed;
        trace.message = e.what();
        break;
      }
    }
    if (next->mu < cfg.mu_min || next->mu > cfg.mu_max) {
      trace.stop = StopReason::mu_bounds;
      break;
    }
    trace.points.push_back(std::move(*next));
  }
  if (stability)
    for (auto& p : trace.points) p.lambda_max = stability(p);
  return trace;
}

Fold detect_fold(std::span<const double> mu) {
  for (std::size_t k = 1; k + 1 < mu.size(); ++k) {
    const double d0 = mu[k] - mu[k - 1];
    const double d1 = mu[k + 1] - mu[k];
    if (d0 * d1 < 0.0) {
      const double a = 0.5 * (mu[k - 1] + mu[k + 1] - 2.0 * mu[k]);
      const double b = 0.5 * (mu[k + 1] - mu[k - 1]);
      if (a == 0.0) return {mu[k], k, 0.0};
      return {mu[k] - b * b / (4.0 * a), k, -b / (2.0 * a)};
    }
  }
  throw NoFold("no turning point: the parameter is monotone along the branch");
}

Fold detect_fold(const std::vector<BranchPoint>& points) {
  std::vector<double> mu;
  mu.reserve(points.size());
  for (const auto& p : points) mu.push_back(p.mu);
  return detect_fold(mu);
}

double fold_lambda(const std::vector<BranchPoint>& points, const Fold& fold) {
  const std::size_t k = fold.index;
  if (k == 0 || k + 1 >= points.size()) throw Error("fold_lambda: fold index out of range");
  const auto& a = points[k - 1].lambda_max;
  const auto& b = points[k].lambda_max;
  const auto& c = points[k + 1].lambda_max;
  if (!a || !b || !c) throw Error("fold_lambda: points around the fold lack a stability value");
  const double t = fold.offset;
  // Lagrange basis on the nodes −1, 0, 1.
  return *a * t * (t - 1.0) / 2.0 + *b * (1.0 - t * t) + *c * t * (t + 1.0) / 2.0;
}

void write_branch_csv(const std::filesystem::path& path, const std::vector<BranchPoint>& points) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(points.size());
  for (const auto& p : points)
    rows.push_back({std::to_string(p.index), format_double(p.mu), format_double(p.norm_inf), format_double(p.norm_2),
                    format_optional(p.lambda_max)});
  write_csv(path, {"step", "mu", "norm_inf", "norm_2", "max_lambda"}, rows);
}

}  // namespace branchtrace
