#include "cyclemon/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <vector>

namespace cyclemon::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
#else
  return false;
#endif
}

const Ops* pick_auto() {
  if (const Ops* t = avx2_ops(); t != nullptr && cpu_has_avx2()) return t;
  if (const Ops* t = neon_ops(); t != nullptr) return t;
  return &scalar_ops();
}

const Ops* resolve(std::string_view name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2") {
    const Ops* t = avx2_ops();
    return (t != nullptr && cpu_has_avx2()) ? t : nullptr;
  }
  if (name == "neon") return neon_ops();
  if (name == "auto") return pick_auto();
  return nullptr;
}

const Ops* initial_table() {
  if (const char* env = std::getenv("CYCLEMON_KERNELS")) {
    if (const Ops* t = resolve(env)) return t;
    // Unknown or unavailable request falls back to auto selection.
  }
  return pick_auto();
}

std::atomic<const Ops*>& slot() {
  static std::atomic<const Ops*> current{initial_table()};
  return current;
}

}  // namespace

const Ops& active() { return *slot().load(std::memory_order_acquire); }

bool set_backend(std::string_view name) {
  const Ops* t = resolve(name);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

std::vector<const Ops*> available() {
  std::vector<const Ops*> out;
  out.push_back(&scalar_ops());
  if (const Ops* t = avx2_ops(); t != nullptr && cpu_has_avx2()) out.push_back(t);
  if (const Ops* t = neon_ops(); t != nullptr) out.push_back(t);
  return out;
}

}  // namespace cyclemon::kernels
