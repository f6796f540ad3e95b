// Backend selection. Default is the best available backend; MGIAD_KERNELS
// or set_backend() can pin a specific one (used by the equivalence tests).

#include "mgiad/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mgiad::kernels {
namespace {

enum class Backend { Auto, Scalar, Avx2 };

Backend g_backend = Backend::Auto;
bool g_env_checked = false;

Backend parse(const char* name) {
  if (std::strcmp(name, "auto") == 0) return Backend::Auto;
  if (std::strcmp(name, "scalar") == 0) return Backend::Scalar;
  if (std::strcmp(name, "avx2") == 0) return Backend::Avx2;
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) +
                              "' (expected auto, scalar or avx2)");
}

void check_env() {
  if (g_env_checked) return;
  g_env_checked = true;
  if (const char* env = std::getenv("MGIAD_KERNELS")) g_backend = parse(env);
}

Backend resolved() {
  check_env();
  if (g_backend == Backend::Auto) return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
  return g_backend;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void set_backend(const char* name) {
  g_env_checked = true;
  Backend b = parse(name);
  if (b == Backend::Avx2 && (!cpu_has_avx2() || avx2_table<float>() == nullptr))
    throw std::invalid_argument("avx2 backend requested but not available on this machine");
  g_backend = b;
}

const char* active_backend_name() {
  return resolved() == Backend::Avx2 ? "avx2" : "scalar";
}

template <typename T>
const KernelTable<T>& active() {
  if (resolved() == Backend::Avx2) {
    const KernelTable<T>* t = avx2_table<T>();
    if (t) return *t;
  }
  return scalar_table<T>();
}

template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace mgiad::kernels
