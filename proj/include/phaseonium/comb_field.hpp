#pragma once

#include "phaseonium/atom_model.hpp"

#include <complex>
#include <vector>

namespace phaseonium {

enum class LineRole { input, generated };

struct CombLine {
  Channel channel;
  int n;
  Complex omega_rabi;  // MHz
  LineRole role;

  bool operator==(const CombLine&) const = default;
};

/// Two frequency combs on a grid of the ground splitting. Channel A is anchored
/// on the omega_1 field (n = 0) with omega_2 at n = +1; channel B on omega_3.
struct FieldComb {
  double delta_a = 0.0;  // omega_1 detuning from |2>-|3A>, MHz
  double delta_r = 0.0;  // Raman detuning (omega_2 - omega_1) - omega_12, MHz
  double delta_3 = 0.0;  // omega_3 detuning from |2>-|3B>, MHz
  double spacing_mhz = kGroundSplittingMHz;
  int max_order = 0;
  std::vector<CombLine> lines;  // sorted: A ascending n, then B ascending n

  const CombLine* find(Channel channel, int n) const;
  Complex amplitude(Channel channel, int n) const;
  /// Largest |n| over the stored lines.
  int occupied_order() const;
  /// Sum of |omega|^2 over the lines of one channel, MHz^2.
  double channel_weight(Channel channel) const;

  bool operator==(const FieldComb&) const = default;
};

struct IntensityCalibration {
  double i_sat = 6.26;              // mW/cm^2
  double effective_area = 0.0;      // cm^2; zero selects pi (w/2)^2 with w = 0.8 mm

  bool operator==(const IntensityCalibration&) const = default;
};

/// pi (w/2)^2 for the 0.8 mm beam waist, cm^2.
double default_effective_area();
IntensityCalibration default_calibration();

/// Insert or overwrite a line; keeps the ordering invariant.
FieldComb with_line(FieldComb comb, Channel channel, int n, Complex omega_rabi,
                    LineRole role = LineRole::input);

/// Offset of line (channel, n) from the |2>-|3A> resonance, MHz. The Raman
/// detuning is carried by the solver as a frame detuning, not as a grid shift.
double line_frequency(const FieldComb& comb, Channel channel, int n);

/// Intensity in mW/cm^2 for a beam power in microwatts.
double intensity_from_power(double power_uw, const IntensityCalibration& cal);
double rabi_from_power(double power_uw, const IntensityCalibration& cal, double gamma_e);
/// Inverse of rabi_from_power.
double power_from_rabi(double rabi_mhz, const IntensityCalibration& cal, double gamma_e);

/// Fill every (channel, n) slot with |n| <= max_order; new slots are generated, zero amplitude.
FieldComb extend_comb(const FieldComb& comb, int max_order);

}  // namespace phaseonium
