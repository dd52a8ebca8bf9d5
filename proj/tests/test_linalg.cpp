#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "branchtrace/linalg.hpp"

using namespace branchtrace;

namespace {

DenseMatrix laplacian(std::size_t m, double h) {
  DenseMatrix a(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    a(i, i) = -2.0 / (h * h);
    if (i > 0) a(i, i - 1) = 1.0 / (h * h);
    if (i + 1 < m) a(i, i + 1) = 1.0 / (h * h);
  }
  return a;
}

double laplacian_top(std::size_t m) {
  const double h = 1.0 / static_cast<double>(m + 1);
  const double s = std::sin(std::numbers::pi * h / 2.0);
  return -4.0 / (h * h) * s * s;
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("cholesky_solve on hand-solvable systems") {
    auto x = cholesky_solve(DenseMatrix::identity(3), std::vector<double>{1, 2, 3});
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    CHECK(x[2] == doctest::Approx(3.0));

    x = cholesky_solve(DenseMatrix::from_rows({{2, 0}, {0, 4}}), std::vector<double>{2, 4});
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(1.0));

    x = cholesky_solve(DenseMatrix::from_rows({{4, 1}, {1, 3}}), std::vector<double>{1, 2});
    CHECK(std::fabs(x[0] - 1.0 / 11.0) <= 1e-12);
    CHECK(std::fabs(x[1] - 7.0 / 11.0) <= 1e-12);
  }

  TEST_CASE("cholesky_solve rejects an indefinite matrix") {
    CHECK_THROWS_AS(cholesky_solve(DenseMatrix::from_rows({{1, 2}, {2, 1}}), std::vector<double>{1, 1}),
                    NotPositiveDefinite);
  }

  TEST_CASE("cholesky round trip on random SPD matrices") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (std::size_t n : {1u, 5u, 37u, 200u}) {
      DenseMatrix b(n, n);
      for (auto& v : b.data()) v = d(rng);
      DenseMatrix a = b.gram();
      for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.1;
      Vector rhs(n);
      for (auto& v : rhs) v = d(rng);
      const Vector x = cholesky_solve(a, rhs);
      const Vector back = a.multiply(x);
      Vector diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = back[i] - rhs[i];
      CHECK(norm_inf(diff) <= 1e-9 * (1.0 + norm_inf(rhs)));
    }
  }

  TEST_CASE("LU solve matches a general nonsymmetric system") {
    const LuFactor lu(DenseMatrix::from_rows({{0, 2, 1}, {1, 1, 0}, {3, 0, 1}}));
    const Vector x = lu.solve(std::vector<double>{5, 3, 4});
    // Solution (1, 2, 1) verified by substitution.
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    CHECK(x[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(LuFactor(DenseMatrix::from_rows({{1, 2}, {2, 4}})), SingularMatrix);
  }

  TEST_CASE("gram and transposed products agree with explicit loops") {
    const DenseMatrix a = DenseMatrix::from_rows({{1, 2}, {0, 3}, {4, 0}});
    const DenseMatrix g = a.gram();
    CHECK(g(0, 0) == 17.0);
    CHECK(g(0, 1) == 2.0);
    CHECK(g(1, 0) == 2.0);
    CHECK(g(1, 1) == 13.0);
    const Vector t = a.multiply_transposed(std::vector<double>{1, 1, 1});
    CHECK(t[0] == 5.0);
    CHECK(t[1] == 5.0);
  }

  TEST_CASE("largest real eigenvalue examples") {
    auto p = largest_real_eigenvalue(DenseMatrix::from_rows({{-1, 0}, {0, -4}}));
    CHECK(p.value == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(std::fabs(std::fabs(p.vector[0]) - 1.0) <= 1e-6);
    CHECK(std::fabs(p.vector[1]) <= 1e-4);

    p = largest_real_eigenvalue(laplacian(4, 0.2));
    CHECK(p.value == doctest::Approx(-9.5492).epsilon(1e-4));

    p = largest_real_eigenvalue(DenseMatrix::from_rows({{0, 1}, {1, 0}}));
    CHECK(p.value == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(norm2(p.vector) == doctest::Approx(1.0));
  }

  TEST_CASE("power and inverse iteration match the Laplacian spectrum") {
    const EigenOptions opts{1e-12, 2000000};
    for (std::size_t m : {10u, 50u, 200u}) {
      CAPTURE(m);
      const double h = 1.0 / static_cast<double>(m + 1);
      const DenseMatrix a = laplacian(m, h);
      const double exact = laplacian_top(m);
      const double tol = 10.0 * opts.tol * std::max(1.0, std::fabs(exact));
      CHECK(std::fabs(largest_real_eigenvalue_inverse(a, opts).value - exact) <= tol);
      if (m <= 50) CHECK(std::fabs(largest_real_eigenvalue(a, opts).value - exact) <= 1e-6 * std::fabs(exact));
    }
  }

  TEST_CASE("Gershgorin shift makes every Laplacian eigenvalue positive") {
    for (std::size_t m : {10u, 50u, 200u}) {
      const double h = 1.0 / static_cast<double>(m + 1);
      const DenseMatrix a = laplacian(m, h);
      const double sigma = std::max(0.0, -gershgorin_lower(a)) + 1.0;
      for (std::size_t k = 1; k <= m; ++k) {
        const double s = std::sin(static_cast<double>(k) * std::numbers::pi * h / 2.0);
        CHECK(sigma - 4.0 / (h * h) * s * s > 0.0);
      }
      CHECK(gershgorin_upper(a) >= laplacian_top(m));
    }
  }

  TEST_CASE("power iteration reports non-convergence") {
    // Nearly equal eigenvalues converge far slower than five iterations allow.
    const DenseMatrix a = DenseMatrix::from_rows({{1, 0.5}, {0.5, 0.9999}});
    CHECK_THROWS_AS(largest_real_eigenvalue(a, EigenOptions{1e-14, 5}), NoConvergence);
  }

  TEST_CASE("norms") {
    const std::vector<double> v{3, -4};
    CHECK(norm2(v) == 5.0);
    CHECK(norm_inf(v) == 4.0);
  }
}
