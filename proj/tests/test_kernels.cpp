#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "branchtrace/kernels.hpp"

using namespace branchtrace::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar kernels on small hand-computed inputs") {
    const KernelTable& s = scalar_table();
    const double x[] = {1.0, -2.0, 3.0};
    const double y[] = {4.0, 5.0, -6.0};
    CHECK(s.dot(x, y, 3) == doctest::Approx(4.0 - 10.0 - 18.0));
    double z[] = {1.0, 1.0, 1.0};
    s.axpy(2.0, x, z, 3);
    CHECK(z[0] == 3.0);
    CHECK(z[1] == -3.0);
    CHECK(z[2] == 7.0);
    CHECK(s.max_abs(y, 3) == 6.0);
    CHECK(s.max_abs(y, 0) == 0.0);
    const double a[] = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    double out[2];
    s.gemv(a, 2, 3, x, out);
    CHECK(out[0] == doctest::Approx(1.0 - 4.0 + 9.0));
    CHECK(out[1] == doctest::Approx(4.0 - 10.0 + 18.0));
  }

  TEST_CASE("avx2 kernels agree with the scalar reference") {
    const KernelTable* v = avx2_table();
    if (v == nullptr) {
      MESSAGE("AVX2 variant unavailable on this machine; equivalence not exercised");
      return;
    }
    const KernelTable& s = scalar_table();
    std::mt19937_64 rng(42);
    // Sizes straddle the 4-lane and unrolled-loop boundaries.
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 99u, 1000u, 4097u}) {
      CAPTURE(n);
      const auto x = random_vector(rng, n);
      const auto y = random_vector(rng, n);
      double mag = 0.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::fabs(x[i] * y[i]);
      CHECK(std::fabs(s.dot(x.data(), y.data(), n) - v->dot(x.data(), y.data(), n)) <= 1e-14 * (1.0 + mag));
      CHECK(s.max_abs(x.data(), n) == v->max_abs(x.data(), n));

      auto ys = y;
      auto yv = y;
      s.axpy(0.7, x.data(), ys.data(), n);
      v->axpy(0.7, x.data(), yv.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(ys[i] - yv[i]) <= 1e-15 * (1.0 + std::fabs(ys[i])));
    }
    for (auto [rows, cols] : {std::pair{1u, 1u}, {3u, 5u}, {17u, 9u}, {99u, 46u}, {64u, 151u}}) {
      const auto a = random_vector(rng, rows * cols);
      const auto x = random_vector(rng, cols);
      std::vector<double> os(rows), ov(rows);
      s.gemv(a.data(), rows, cols, x.data(), os.data());
      v->gemv(a.data(), rows, cols, x.data(), ov.data());
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::fabs(os[i] - ov[i]) <= 1e-13 * (1.0 + std::fabs(os[i])));
    }
  }

  TEST_CASE("active table can be switched and restored") {
    const KernelTable& before = active();
    set_active(scalar_table());
    CHECK(active().name == scalar_table().name);
    const std::vector<double> x{3.0, -4.0};
    CHECK(dot(x, x) == 25.0);
    CHECK(max_abs(x) == 4.0);
    set_active(before);
    CHECK(active().name == before.name);
  }
}
