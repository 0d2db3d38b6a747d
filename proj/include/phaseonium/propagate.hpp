#pragma once

#include "phaseonium/atom_model.hpp"
#include "phaseonium/comb_field.hpp"
#include "phaseonium/doppler.hpp"
#include "phaseonium/floquet.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace phaseonium {

struct MediumSpec {
  double tau = 5.8;              // weak-probe optical density at line center
  double fwhm_doppler = 1000.0;  // MHz
  int n_v = 65;                  // nodes for the quadrature route only
  int n_z = 40;
  double cell_length_mm = 10.3;  // informational

  bool operator==(const MediumSpec&) const = default;
};

void validate(const MediumSpec& medium);

struct PropagationOptions {
  DopplerMethod doppler = DopplerMethod::exact;
  FloquetOptions floquet;
  bool record_sources = false;
  double passivity_tolerance = 1e-8;
  int max_halvings = 8;
  /// Called after each accepted step with the current depth.
  std::function<void(double)> progress;
};

struct CouplingCalibration {
  double kappa = 0.0;  // MHz; d Omega / d zeta = i kappa sigma
  Complex chi;         // Doppler-averaged sigma / Omega of the weak probe, 1/MHz
};

/// Coupling constant giving P(zeta) = P(0) exp(-tau zeta) for a weak resonant
/// probe on |2>-|3A>. The same constant serves every line of both channels; the
/// dipole weights enter through the sources.
CouplingCalibration calibrate_coupling(const LevelScheme& scheme, const MediumSpec& medium,
                                       const PropagationOptions& options = {});

struct PropagationTrace {
  std::vector<double> zeta;
  std::vector<CombLine> lines;                // slots, input roles and amplitudes
  std::vector<std::vector<Complex>> fields;   // [position][line], MHz
  std::vector<std::vector<double>> powers;    // [position][line], / total input power
  std::vector<std::vector<Complex>> sources;  // [position][line], if recorded
  double kappa = 0.0;
  int halvings = 0;  // step halvings triggered by the passivity check

  const std::vector<double>& output_powers() const { return powers.back(); }
  /// Index of (channel, n) in lines, or -1.
  int line_index(Channel channel, int n) const;
  /// Output power of a line normalized to the total input power.
  double output_power(Channel channel, int n) const;
  /// Output power of a line over its own input power.
  double transmission(Channel channel, int n) const;
  /// Sum of normalized output powers over one channel.
  double channel_total(Channel channel) const;
};

struct PassivityTally {
  std::uint64_t steps = 0;       // accepted integration steps
  std::uint64_t violations = 0;  // steps that grew the total power beyond tolerance
  double max_growth = 0.0;       // largest relative growth of total power over one accepted step
};

/// Process-wide passivity record over every propagation run.
PassivityTally passivity_tally();
void reset_passivity_tally();

/// Integrates d Omega_n / d zeta = i kappa <sigma_n> through the cell with RK4.
PropagationTrace propagate(const FieldComb& comb_in, const LevelScheme& scheme,
                           const MediumSpec& medium, const IntensityCalibration& cal,
                           const PropagationOptions& options = {});

/// Same, with an already calibrated coupling constant.
PropagationTrace propagate(const FieldComb& comb_in, const LevelScheme& scheme,
                           const MediumSpec& medium, const CouplingCalibration& coupling,
                           const PropagationOptions& options = {});

/// Velocity-averaged sources of every comb line for the given envelopes.
std::vector<Complex> averaged_sources(const FieldComb& comb, const LevelScheme& scheme,
                                      const MediumSpec& medium,
                                      const PropagationOptions& options = {});

}  // namespace phaseonium
