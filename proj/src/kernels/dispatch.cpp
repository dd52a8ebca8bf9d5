#include <atomic>
#include <cstdlib>
#include <string_view>

#include "branchtrace/kernels.hpp"

namespace branchtrace::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(BRANCHTRACE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* select_default() {
  const KernelTable* avx2 = avx2_table();
  if (const char* env = std::getenv("BRANCHTRACE_KERNELS")) {
    std::string_view want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2 != nullptr) return avx2;
  }
  return avx2 != nullptr ? avx2 : &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{select_default()};
  return current;
}

}  // namespace

const KernelTable* avx2_table() {
#if defined(BRANCHTRACE_HAVE_AVX2)
  static const KernelTable* table = cpu_has_avx2() ? detail::make_avx2_table() : nullptr;
  return table;
#else
  return nullptr;
#endif
}

#if !defined(BRANCHTRACE_HAVE_AVX2)
namespace detail {
const KernelTable* make_avx2_table() { return nullptr; }
}  // namespace detail
#endif

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_relaxed); }

}  // namespace branchtrace::kernels
