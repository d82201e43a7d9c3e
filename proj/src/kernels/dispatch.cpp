#include "lgvmpc/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace lgvmpc::simd {
namespace {

const KernelTable& select() {
  const char* env = std::getenv("LGVMPC_SIMD");
  const std::string_view forced = env ? env : "";
  if (forced == "scalar") return scalar_kernels();
  if (forced == "avx2" && avx2_kernels()) return *avx2_kernels();
  if (forced == "neon" && neon_kernels()) return *neon_kernels();
  if (const KernelTable* t = avx2_kernels()) return *t;
  if (const KernelTable* t = neon_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace lgvmpc::simd
