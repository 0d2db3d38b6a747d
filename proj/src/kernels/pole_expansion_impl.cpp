// Compiled once per instruction-set variant; PHASEONIUM_KERNEL_NAME names the entry point.
#include "pole_expansion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#ifndef PHASEONIUM_KERNEL_NAME
#error "PHASEONIUM_KERNEL_NAME must be defined"
#endif

namespace phaseonium::kernels {

__attribute__((visibility("default"))) PoleExpansion PHASEONIUM_KERNEL_NAME(
    const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  PoleExpansion out;
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) return out;
  out.vectors = es.eigenvectors();
  out.lambda = es.eigenvalues();
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(out.vectors);
  out.coeff = lu.solve(rhs.cast<std::complex<double>>());
  out.ok = out.coeff.allFinite();
  return out;
}

}  // namespace phaseonium::kernels
