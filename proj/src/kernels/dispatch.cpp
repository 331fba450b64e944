#include "wcp/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace wcp::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(WCP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  const char* env = std::getenv("WCP_KERNELS");
  if (env && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<int> g_forced{-1};

}  // namespace

std::string_view backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
  if (b == Backend::Scalar) return true;
  static const bool has = cpu_has_avx2();
  return has;
}

Backend active_backend() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Backend>(forced);
  static const Backend detected = detect();
  return detected;
}

void force_backend(std::optional<Backend> b) {
  if (b && !backend_available(*b)) b = Backend::Scalar;
  g_forced.store(b ? static_cast<int>(*b) : -1, std::memory_order_relaxed);
}

void link_geometry(const LinkInputs& in, const LinkOutputs& out) {
#if defined(WCP_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2::link_geometry(in, out);
#endif
  scalar::link_geometry(in, out);
}

void gram_update(std::span<const double> a, std::span<const double> r, int m, int k,
                 std::span<double> h, std::span<double> g) {
#if defined(WCP_HAVE_AVX2)
  if (active_backend() == Backend::Avx2) return avx2::gram_update(a, r, m, k, h, g);
#endif
  scalar::gram_update(a, r, m, k, h, g);
}

}  // namespace wcp::kernels
