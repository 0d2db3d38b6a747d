#pragma once

#include "phaseonium/atom_model.hpp"
#include "phaseonium/comb_field.hpp"
#include "phaseonium/floquet.hpp"

#include <vector>

namespace phaseonium {

struct VelocityNode {
  double v_shift;  // MHz
  double weight;
};

struct VelocityGrid {
  std::vector<VelocityNode> nodes;
  double fwhm = 0.0;  // MHz
};

/// Standard deviation of the Doppler Gaussian with the given FWHM.
double doppler_sigma(double fwhm);

/// Gauss-Hermite nodes for the Gaussian of the given FWHM (MHz).
VelocityGrid velocity_nodes(double fwhm, int n_v);

/// Uniform nodes on [-span, span] sigma with Gaussian weights, normalized to 1.
/// Converges geometrically for integrands whose features are wider than the spacing.
VelocityGrid uniform_nodes(double fwhm, int n_v, double span_sigmas = 6.0);

/// Weighted sum with compensated accumulation.
Complex doppler_average(const std::vector<Complex>& per_node_values, const VelocityGrid& grid);

/// Faddeeva function w(z) = exp(-z^2) erfc(-i z).
Complex faddeeva_w(Complex z);

/// <1 / (v - p)> over the zero-mean Gaussian of standard deviation sigma; p off the real axis.
Complex gaussian_resolvent(Complex p, double sigma);

enum class DopplerMethod {
  exact,       // closed-form average over the pole expansion in v
  quadrature,  // solve per node of a VelocityGrid
};

struct DopplerOptions {
  DopplerMethod method = DopplerMethod::exact;
  /// Quadrature grid; ignored by the exact method.
  VelocityGrid grid;
  FloquetOptions floquet;
  /// Exact method: largest tolerated relative mismatch between the pole expansion and a
  /// direct solve at a probe velocity.
  double expansion_tolerance = 1e-8;
};

struct DopplerAverage {
  FloquetState state;  // velocity-averaged harmonics
  std::vector<Complex> sources;  // per comb line, FieldComb::lines order
  /// Exact method: probe mismatch of the pole expansion; quadrature: 0; -1 when the
  /// exact method fell back to dense uniform quadrature.
  double expansion_error = 0.0;
};

/// Velocity-averaged steady state over a Doppler Gaussian of the given FWHM (MHz).
DopplerAverage doppler_average_state(const LevelScheme& scheme, const FieldComb& comb,
                                     double fwhm, const DopplerOptions& options = {});

}  // namespace phaseonium
