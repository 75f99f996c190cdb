#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "stackcount/kernels.h"
#include "stackcount/util.h"

namespace stackcount::kernels {

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && avx2_table() != nullptr;
#else
  return false;
#endif
}

namespace {

std::atomic<const Table*> g_active{nullptr};
std::atomic<SimdMode> g_mode{SimdMode::scalar};

const Table* resolve(SimdMode m) {
  if (m == SimdMode::avx2) {
    const Table* t = avx2_table();
    if (!t || !avx2_supported()) fail(errc::config, "SIMD mode 'avx2' not supported on this CPU");
    return t;
  }
  return &scalar_table();
}

void init_from_env() {
  const char* env = std::getenv("STACKCOUNT_SIMD");
  std::string v = env ? env : "auto";
  if (v == "auto" || v.empty()) {
    SimdMode m = avx2_supported() ? SimdMode::avx2 : SimdMode::scalar;
    g_active.store(resolve(m));
    g_mode.store(m);
  } else if (v == "scalar") {
    g_active.store(&scalar_table());
    g_mode.store(SimdMode::scalar);
  } else if (v == "avx2") {
    g_active.store(resolve(SimdMode::avx2));
    g_mode.store(SimdMode::avx2);
  } else {
    fail(errc::config, "STACKCOUNT_SIMD must be auto, scalar or avx2 (got '" + v + "')");
  }
}

}  // namespace

const Table& active() {
  const Table* t = g_active.load();
  if (!t) {
    init_from_env();
    t = g_active.load();
  }
  return *t;
}

void set_mode(SimdMode m) {
  g_active.store(resolve(m));
  g_mode.store(m);
}

void set_mode_from_string(const char* name) {
  std::string v = name ? name : "auto";
  if (v == "auto") {
    set_mode(avx2_supported() ? SimdMode::avx2 : SimdMode::scalar);
  } else if (v == "scalar") {
    set_mode(SimdMode::scalar);
  } else if (v == "avx2") {
    set_mode(SimdMode::avx2);
  } else {
    fail(errc::config, "SIMD mode must be auto, scalar or avx2 (got '" + v + "')");
  }
}

SimdMode current_mode() {
  active();  // ensure initialized
  return g_mode.load();
}

}  // namespace stackcount::kernels
