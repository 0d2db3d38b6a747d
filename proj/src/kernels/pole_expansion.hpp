#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string_view>

namespace phaseonium::kernels {

/// Diagonalization m = V diag(lambda) V^-1 together with c = V^-1 rhs, so that
/// any f(m) rhs = V diag(f(lambda)) c.
struct PoleExpansion {
  Eigen::MatrixXcd vectors;
  Eigen::VectorXcd lambda;
  Eigen::VectorXcd coeff;
  bool ok = false;
};

enum class Variant { baseline, avx2 };

PoleExpansion expand_baseline(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs);
#if PHASEONIUM_HAVE_AVX2
PoleExpansion expand_avx2(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs);
#endif

/// Best variant supported by the running CPU, unless PHASEONIUM_SIMD=baseline.
Variant active_variant();
bool variant_available(Variant variant);
std::string_view to_string(Variant variant);
PoleExpansion expand(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs);
PoleExpansion expand(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs, Variant variant);

}  // namespace phaseonium::kernels
