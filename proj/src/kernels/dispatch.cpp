#include "pole_expansion.hpp"

#include <cstdlib>
#include <string>

namespace phaseonium::kernels {

bool variant_available(Variant variant) {
  switch (variant) {
    case Variant::baseline:
      return true;
    case Variant::avx2:
#if PHASEONIUM_HAVE_AVX2
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view to_string(Variant variant) {
  return variant == Variant::avx2 ? "avx2" : "baseline";
}

Variant active_variant() {
  static const Variant chosen = [] {
    const char* env = std::getenv("PHASEONIUM_SIMD");
    if (env && std::string(env) == "baseline") return Variant::baseline;
    return variant_available(Variant::avx2) ? Variant::avx2 : Variant::baseline;
  }();
  return chosen;
}

PoleExpansion expand(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs, Variant variant) {
#if PHASEONIUM_HAVE_AVX2
  if (variant == Variant::avx2 && variant_available(Variant::avx2)) return expand_avx2(m, rhs);
#endif
  (void)variant;
  return expand_baseline(m, rhs);
}

PoleExpansion expand(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  return expand(m, rhs, active_variant());
}

}  // namespace phaseonium::kernels
