#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "branchtrace/continuation.hpp"
#include "branchtrace/fd.hpp"
#include "branchtrace/io.hpp"
#include "branchtrace/nnsolve.hpp"

using namespace branchtrace;

namespace {

// R(z, μ) = z: a flat branch z = 0 for every μ, norm |z|.
class FlatSystem : public ParamSystem {
 public:
  std::size_t unknowns() const override { return 1; }
  Vector residual(std::span<const double> z, double) const override { return {z[0]}; }
  DenseMatrix jacobian(std::span<const double>, double) const override { return DenseMatrix::identity(1); }
  Vector param_derivative(std::span<const double>, double) const override { return {0.0}; }
  SolutionNorms norms(std::span<const double> z) const override { return {std::fabs(z[0]), std::fabs(z[0])}; }
  Vector norm_gradient(std::span<const double> z, BranchNorm) const override { return {z[0] >= 0 ? 1.0 : -1.0}; }
  Vector solve_fixed(double, std::span<const double>) const override { return {0.0}; }
};

BranchPoint point(double mu, Vector z, double norm = 0.0) {
  BranchPoint p;
  p.mu = mu;
  p.z = std::move(z);
  p.norm_inf = norm;
  return p;
}

double bratu_load(double w) { return 8.0 * w * w / std::pow(std::cosh(w), 2); }
double bratu_peak(double w) { return 2.0 * std::log(std::cosh(w)); }

// The analytic Bratu diagram sampled at arclength spacing d in the
// (peak, C) plane, starting from ω = w0.
std::vector<double> analytic_diagram(double d, double w0) {
  std::vector<double> mu{bratu_load(w0)};
  double w = w0;
  while (w < 3.0) {
    auto dist = [&](double w2) { return std::hypot(bratu_peak(w2) - bratu_peak(w), bratu_load(w2) - bratu_load(w)) - d; };
    double lo = w, hi = w + 1.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (dist(mid) < 0 ? lo : hi) = mid;
    }
    w = 0.5 * (lo + hi);
    mu.push_back(bratu_load(w));
  }
  return mu;
}

ContinuationConfig fd_config(double delta, std::size_t steps) {
  ContinuationConfig c;
  c.delta = delta;
  c.max_steps = steps;
  c.corrector = fd_default_options();
  c.corrector.max_iter = 50;
  return c;
}

}  // namespace

TEST_SUITE("continuation") {
  TEST_CASE("config validation") {
    ContinuationConfig c;
    c.delta = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.tau = 1.5;
    CHECK_THROWS_AS(c.validate(), Error);
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("secant predictor") {
    const auto same = predict(point(1.0, {2.0, 3.0}), point(1.0, {2.0, 3.0}), 1.0);
    CHECK(same.mu == 1.0);
    CHECK(same.z == Vector{2.0, 3.0});

    const auto line = predict(point(1.05, {0.5}), point(1.0, {0.4}), 1.0);
    CHECK(line.mu == doctest::Approx(1.10));
    CHECK(line.z[0] == doctest::Approx(0.6));

    const auto half = predict(point(1.05, {0.5}), point(1.0, {0.4}), 0.5);
    CHECK(half.mu == doctest::Approx(1.075));
    CHECK(half.z[0] == doctest::Approx(0.55));
  }

  TEST_CASE("default state extrapolation is the secant") {
    const FlatSystem sys;
    for (double tau : {1.0, 0.5}) {
      const auto pr = predict(point(1.05, {0.5}), point(1.0, {0.4}), tau);
      const Vector z = sys.extrapolate(Vector{0.5}, Vector{0.4}, tau, BranchNorm::sup);
      CHECK(z[0] == doctest::Approx(pr.z[0]));
    }
  }

  TEST_CASE("arclength distance and residual") {
    const FlatSystem sys;
    const ArclengthAnchor a{0.0, 1.0, 0.05, 4.0, BranchNorm::sup};
    const Vector z{0.03};
    CHECK(arclength_distance(sys, z, 1.04, a) == doctest::Approx(0.05));
    const Vector r = arclength_residual(sys, Vector{0.03, 1.04}, a);
    CHECK(r.size() == 2);
    CHECK(std::fabs(r[1]) <= 1e-15);
    CHECK(arclength_residual(sys, Vector{0.0, 1.0}, a)[1] == doctest::Approx(-2.0 * 0.05));
  }

  TEST_CASE("feasible prediction is accepted as is") {
    const FlatSystem sys;
    ContinuationConfig cfg;
    const BranchPoint prev = make_point(sys, 0, 1.0, {0.0});
    const BranchPoint p = correct(sys, {{0.0}, 1.0 + cfg.delta}, prev, cfg.delta, cfg);
    CHECK(p.mu == doctest::Approx(1.0 + cfg.delta));
    const ArclengthAnchor a{prev.norm_inf, prev.mu, cfg.delta, cfg.beta, cfg.norm};
    CHECK(std::fabs(arclength_residual(sys, Vector{p.z[0], p.mu}, a)[1]) < cfg.corrector.f_tol);
  }

  TEST_CASE("parabolic fold refinement") {
    // μ(k) = 2 − (k − 3.3)²: vertex 2 at k = 3.3.
    std::vector<double> mu;
    for (int k = 0; k < 8; ++k) mu.push_back(2.0 - (k - 3.3) * (k - 3.3));
    const Fold f = detect_fold(mu);
    CHECK(f.mu_star == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.index == 3);
    CHECK(f.offset == doctest::Approx(0.3));

    CHECK_THROWS_AS(detect_fold(std::vector<double>{0.1, 0.2, 0.4, 0.8}), NoFold);
    CHECK_THROWS_AS(detect_fold(std::vector<double>{}), NoFold);
  }

  TEST_CASE("fold of the analytic Bratu diagram") {
    const double exact = bratu1d_critical_load();
    CHECK(std::fabs(detect_fold(analytic_diagram(0.05, 0.01)).mu_star - exact) <= 2e-3);
    // Halving the spacing shrinks the error at least fourfold.
    for (double w0 : {0.01, 0.013, 0.02}) {
      double prev = std::fabs(detect_fold(analytic_diagram(0.1, w0)).mu_star - exact);
      for (double d : {0.05, 0.025}) {
        const double e = std::fabs(detect_fold(analytic_diagram(d, w0)).mu_star - exact);
        CHECK(prev / e >= 3.5);
        prev = e;
      }
    }
  }

  TEST_CASE("fold_lambda interpolates in the point index") {
    std::vector<BranchPoint> pts(5);
    for (int k = 0; k < 5; ++k) pts[k].lambda_max = 1.0 + 2.0 * k - 0.5 * k * k;
    const Fold f{0.0, 2, 0.4};
    const double t = 2.4;
    CHECK(fold_lambda(pts, f) == doctest::Approx(1.0 + 2.0 * t - 0.5 * t * t));
    pts[1].lambda_max.reset();
    CHECK_THROWS_AS(fold_lambda(pts, f), Error);
  }

  TEST_CASE("bootstrap spacing") {
    const FdParamSystem sys({Equation::bratu_1d}, Grid(1, 100));
    const auto cfg = fd_config(0.05, 10);
    const auto b = bootstrap(sys, 0.1, Vector(99, 0.0), cfg);
    const double d = std::hypot(b.second.norm_inf - b.first.norm_inf, b.second.mu - b.first.mu);
    CHECK(std::fabs(d - 0.05) <= 0.005);
    CHECK(b.delta == doctest::Approx(d));
    CHECK(b.first.mu == 0.1);

    const FlatSystem flat;
    const auto fb = bootstrap(flat, 1.0, Vector{0.0}, cfg);
    CHECK(fb.second.mu - fb.first.mu == doctest::Approx(0.05));
  }

  TEST_CASE("warm start beats a cold start") {
    const Problem p{Equation::bratu_1d};
    const NnSystem sys{p, Grid(1, 100), default_network(p, 0), {}};
    // A loose target, so both solves stop on the residual rather than the
    // iteration limit.
    NnSolveOptions o = nn_default_options();
    o.lm.f_tol = 1e-5;
    const auto first = nn1_solve(sys, 0.1, default_network(p, 0), o);
    const auto warm = nn1_solve(sys, 0.15, first.net, o);
    const auto cold = nn1_solve(sys, 0.15, default_network(p, 0), o);
    CHECK(warm.report.termination == Termination::residual_tol);
    CHECK(warm.report.iterations < cold.report.iterations);
  }

  TEST_CASE("FD Bratu branch passes through the fold") {
    const FdParamSystem sys({Equation::bratu_1d}, Grid(1, 100));
    const auto cfg = fd_config(0.05, 200);
    const auto t = trace_branch(sys, 0.1, Vector(99, 0.0), cfg);
    REQUIRE(t.points.size() == 200);
    CHECK(t.stop == StopReason::max_steps);
    const Fold f = detect_fold(t.points);
    CHECK(std::fabs(f.mu_star - 3.5138) <= 2e-3);
    for (std::size_t k = f.index + 1; k < t.points.size(); ++k) CHECK(t.points[k].mu < t.points[k - 1].mu);

    for (std::size_t k = 1; k < t.points.size(); ++k) {
      const auto& a = t.points[k - 1];
      const auto& b = t.points[k];
      CHECK(norm_inf(sys.residual(b.z, b.mu)) <= cfg.accept_tol);
      if (k >= 2) {
        const double spacing = std::hypot(b.norm_inf - a.norm_inf, b.mu - a.mu);
        CHECK(std::fabs(spacing - b.spacing) <= 10 * cfg.accept_tol * (1 + b.spacing));
        CHECK((b.spacing == t.delta || b.spacing == 0.5 * t.delta));
        const auto& c = t.points[k - 2];
        const double dot = (b.norm_inf - a.norm_inf) * (a.norm_inf - c.norm_inf) + (b.mu - a.mu) * (a.mu - c.mu);
        CHECK(dot > 0.0);
      }
    }
  }

  TEST_CASE("FD mixed Burgers branch reaches its flux maximum") {
    const Problem p{Equation::burgers_mixed, 0.1};
    const Grid g(1, 100);
    const FdParamSystem sys(p, g);
    const auto t = trace_branch(sys, 0.01, fd_initial_guess(p, g, Branch::lower), fd_config(0.02, 40));
    CHECK(std::fabs(detect_fold(t.points).mu_star - 0.0878) <= 1e-3);
  }

  TEST_CASE("bounds and stability annotation") {
    const FdParamSystem sys({Equation::bratu_1d}, Grid(1, 40));
    auto cfg = fd_config(0.05, 200);
    cfg.mu_max = 1.0;
    int calls = 0;
    const auto t = trace_branch(sys, 0.1, Vector(39, 0.0), cfg, [&](const BranchPoint& pt) {
      ++calls;
      return std::optional<double>(fd_stability(sys.state(pt.z, pt.mu)));
    });
    CHECK(t.stop == StopReason::mu_bounds);
    CHECK(calls == static_cast<int>(t.points.size()));
    for (const auto& pt : t.points) {
      REQUIRE(pt.lambda_max.has_value());
      CHECK(*pt.lambda_max < 0.0);
    }
  }

  TEST_CASE("NN continuation points satisfy the augmented system") {
    const Problem p{Equation::bratu_1d};
    const NnSystem nsys{p, Grid(1, 100), default_network(p, 0), {}};
    const NnParamSystem sys(nsys);
    ContinuationConfig cfg;
    cfg.delta = 0.05;
    cfg.max_steps = 6;
    cfg.corrector = nn_default_options().lm;
    cfg.corrector.max_iter = 300;
    cfg.accept_tol = 1e-3;
    const auto t = trace_branch(sys, 0.1, nsys.net.weights(), cfg);
    REQUIRE(t.points.size() == 6);
    for (std::size_t k = 2; k < t.points.size(); ++k) {
      const auto& prev = t.points[k - 1];
      Vector aug = t.points[k].z;
      aug.push_back(t.points[k].mu);
      const ArclengthAnchor a{prev.norm_inf, prev.mu, t.points[k].spacing, cfg.beta, cfg.norm};
      CHECK(norm_inf(nn2_residual(nsys, aug, a)) <= cfg.accept_tol);
    }
  }

  TEST_CASE("branch CSV round trip") {
    std::vector<BranchPoint> pts(2);
    pts[0].mu = 0.1;
    pts[0].norm_inf = 0.0125;
    pts[1].index = 1;
    pts[1].mu = 0.15;
    pts[1].lambda_max = -9.5;
    const auto path = std::filesystem::temp_directory_path() / "branchtrace_branch_test.csv";
    write_branch_csv(path, pts);
    const auto t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"step", "mu", "norm_inf", "norm_2", "max_lambda"});
    REQUIRE(t.rows.size() == 2);
    CHECK(std::stod(t.rows[0][t.column("norm_inf")]) == 0.0125);
    CHECK(t.rows[0][t.column("max_lambda")].empty());
    CHECK(std::stod(t.rows[1][t.column("max_lambda")]) == -9.5);
    std::filesystem::remove(path);
  }
}
