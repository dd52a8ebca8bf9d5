#include <doctest.h>

#include <cmath>
#include <random>

#include "branchtrace/lm.hpp"

using namespace branchtrace;

namespace {

struct System {
  ResidualFn f;
  JacobianFn j;
  Vector root;
};

System shifted_scalar() {
  return {[](std::span<const double> z) { return Vector{z[0] - 3.0}; },
          [](std::span<const double>) { return DenseMatrix::from_rows({{1.0}}); },
          {3.0}};
}

System circle_line() {
  const double r = std::sqrt(0.5);
  return {[](std::span<const double> z) { return Vector{z[0] * z[0] + z[1] * z[1] - 1.0, z[0] - z[1]}; },
          [](std::span<const double> z) {
            return DenseMatrix::from_rows({{2 * z[0], 2 * z[1]}, {1.0, -1.0}});
          },
          {r, r}};
}

// Rosenbrock-type square system with root (1, 1).
System rosenbrock() {
  return {[](std::span<const double> z) { return Vector{10.0 * (z[1] - z[0] * z[0]), 1.0 - z[0]}; },
          [](std::span<const double> z) { return DenseMatrix::from_rows({{-20.0 * z[0], 10.0}, {-1.0, 0.0}}); },
          {1.0, 1.0}};
}

void check_strict_decrease(const LmReport& r) {
  for (std::size_t i = 1; i < r.residual_history.size(); ++i) CHECK(r.residual_history[i] < r.residual_history[i - 1]);
  CHECK(r.residual_history.size() == r.accepted_steps + 1);
}

}  // namespace

TEST_SUITE("lm") {
  TEST_CASE("linear scalar equation") {
    const auto s = shifted_scalar();
    const auto res = lm_solve(s.f, s.j, {0.0});
    CHECK(std::fabs(res.z[0] - 3.0) <= 1e-10);
    CHECK(res.report.iterations <= 5);
    CHECK(res.report.converged());
  }

  TEST_CASE("circle meets line") {
    const auto s = circle_line();
    const auto res = lm_solve(s.f, s.j, {1.0, 0.0});
    CHECK(std::fabs(res.z[0] - s.root[0]) <= 1e-10);
    CHECK(std::fabs(res.z[1] - s.root[1]) <= 1e-10);
    check_strict_decrease(res.report);
  }

  TEST_CASE("overdetermined scalar fit is the least-squares solution") {
    const auto res = lm_solve([](std::span<const double> z) { return Vector{z[0] - 1.0, z[0] - 2.0}; },
                              [](std::span<const double>) { return DenseMatrix::from_rows({{1.0}, {1.0}}); }, {0.0});
    CHECK(std::fabs(res.z[0] - 1.5) <= 1e-10);
    CHECK(res.report.final_residual_norm == doctest::Approx(0.5));
  }

  TEST_CASE("overdetermined linear system reaches the normal-equations optimum") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    const std::size_t rows = 12, cols = 4;
    DenseMatrix a(rows, cols);
    for (auto& v : a.data()) v = d(rng);
    Vector b(rows);
    for (auto& v : b) v = d(rng);
    const Vector atb = a.multiply_transposed(b);
    const Vector expect = cholesky_solve(a.gram(), atb);
    LmOptions o;
    o.step_tol = 1e-15;
    const auto res = lm_solve(
        [&](std::span<const double> z) {
          Vector r = a.multiply(z);
          for (std::size_t i = 0; i < rows; ++i) r[i] -= b[i];
          return r;
        },
        [&](std::span<const double>) { return a; }, Vector(cols, 0.0), o);
    // Closer than ~1e-8 the change in ‖F‖₂ drops below rounding, so a
    // decrease-only rule cannot tell the iterates apart.
    for (std::size_t k = 0; k < cols; ++k) CHECK(std::fabs(res.z[k] - expect[k]) <= 1e-7);
    Vector fopt = a.multiply(expect);
    for (std::size_t i = 0; i < rows; ++i) fopt[i] -= b[i];
    CHECK(res.report.residual_history.back() == doctest::Approx(norm2(fopt)).epsilon(1e-14));
    check_strict_decrease(res.report);
  }

  TEST_CASE("consistent overdetermined linear system is solved to 1e-10") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    const std::size_t rows = 12, cols = 4;
    DenseMatrix a(rows, cols);
    for (auto& v : a.data()) v = d(rng);
    const Vector truth{0.3, -0.2, 1.1, 0.5};
    const Vector b = a.multiply(truth);
    LmOptions o;
    o.f_tol = 1e-13;
    const auto res = lm_solve(
        [&](std::span<const double> z) {
          Vector r = a.multiply(z);
          for (std::size_t i = 0; i < rows; ++i) r[i] -= b[i];
          return r;
        },
        [&](std::span<const double>) { return a; }, Vector(cols, 0.0), o);
    for (std::size_t k = 0; k < cols; ++k) CHECK(std::fabs(res.z[k] - truth[k]) <= 1e-10);
    check_strict_decrease(res.report);
  }

  TEST_CASE("fast convergence from nearby starts") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (const auto& s : {shifted_scalar(), circle_line(), rosenbrock()}) {
      for (int trial = 0; trial < 10; ++trial) {
        Vector dir(s.root.size());
        for (auto& v : dir) v = d(rng);
        const double scale = 0.1 * d(rng) / norm2(dir);
        Vector z0 = s.root;
        for (std::size_t k = 0; k < z0.size(); ++k) z0[k] += scale * dir[k];
        for (DampingUpdate u : {DampingUpdate::fixed_factors, DampingUpdate::gain_ratio}) {
          LmOptions o;
          o.f_tol = 1e-10;
          o.update = u;
          const auto res = lm_solve(s.f, s.j, z0, o);
          CHECK(res.report.termination == Termination::residual_tol);
          CHECK(res.report.iterations <= 25);
          check_strict_decrease(res.report);
        }
      }
    }
  }

  TEST_CASE("residual history is strictly decreasing from a far start") {
    const auto s = rosenbrock();
    for (DampingScaling sc : {DampingScaling::identity, DampingScaling::marquardt}) {
      LmOptions o;
      o.scaling = sc;
      o.max_iter = 2000;
      const auto res = lm_solve(s.f, s.j, {-1.2, 1.0}, o);
      check_strict_decrease(res.report);
      CHECK(std::fabs(res.z[0] - 1.0) <= 1e-8);
    }
  }

  TEST_CASE("iteration limit reports max_iter with the best iterate") {
    const auto s = rosenbrock();
    LmOptions o;
    o.max_iter = 3;
    const auto res = lm_solve(s.f, s.j, {-1.2, 1.0}, o);
    CHECK(res.report.termination == Termination::max_iter);
    CHECK_FALSE(res.report.converged());
    CHECK(res.report.iterations == 3);
    CHECK(res.report.residual_history.back() <= res.report.residual_history.front());
  }

  TEST_CASE("invalid options are rejected") {
    LmOptions o;
    o.damping_up = 0.5;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.damping_down = 1.5;
    CHECK_THROWS_AS(o.validate(), Error);
    o = {};
    o.f_tol = -1.0;
    CHECK_THROWS_AS(o.validate(), Error);
  }
}
