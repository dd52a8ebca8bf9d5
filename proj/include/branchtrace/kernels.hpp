#pragma once

// Dense double-precision inner loops used by the solvers.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2/FMA
// variant is compiled into its own translation unit and selected at runtime
// when the CPU supports it. The environment variable BRANCHTRACE_KERNELS
// (values "scalar" or "avx2") overrides the automatic choice; an unavailable
// request falls back to scalar.
//
// Variants are not bit-identical: FMA contraction and lane-wise partial sums
// change rounding. tests/test_kernels.cpp bounds the difference.

#include <cstddef>
#include <span>
#include <string_view>

namespace branchtrace::kernels {

struct KernelTable {
  std::string_view name;
  /// sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  /// max_i |x[i]| (0 for n == 0)
  double (*max_abs)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();

/// AVX2/FMA table, or nullptr when it was not compiled in or the CPU lacks
/// the instructions.
const KernelTable* avx2_table();

/// The table every wrapper below dispatches through. Chosen once.
const KernelTable& active();

/// Replace the active table (tests and benchmarking). Not thread-safe with
/// concurrent kernel calls.
void set_active(const KernelTable& table);

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline double max_abs(std::span<const double> x) { return active().max_abs(x.data(), x.size()); }

namespace detail {
const KernelTable* make_avx2_table();
}

}  // namespace branchtrace::kernels
