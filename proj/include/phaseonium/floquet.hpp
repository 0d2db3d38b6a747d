#pragma once

#include "phaseonium/atom_model.hpp"
#include "phaseonium/comb_field.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phaseonium {

enum class FloquetMethod {
  complex_dense,   // reference: all complex harmonics, dense LU
  hermitian_real,  // pairs rho^(-m) = rho^(m)^dagger, real LU of half the size
};

struct FloquetOptions {
  /// Harmonic truncation; defaults to comb.max_order + 2.
  std::optional<int> max_harmonic;
  /// Shifts every excited frame frequency by this many comb steps.
  int excited_frame_offset = 0;
  /// Re-solve at max_harmonic + 2 and require every source to move by < 1e-6 relative.
  bool check_truncation = false;
  FloquetMethod method = FloquetMethod::hermitian_real;
};

/// Rotating-frame record: per-level frame frequency (MHz, relative to |2> and
/// to the |2>-|3A> optical reference) and the harmonic spacing.
struct FloquetFrame {
  std::vector<double> level_mhz;
  double harmonic_spacing_mhz = 0.0;
  int excited_offset = 0;
};

/// rho(t) = sum_m rho^(m) exp(-i m w t) in the rotating frame.
struct FloquetState {
  int max_harmonic = 0;
  int comb_order = 0;
  std::vector<CMatrix> harmonics;  // index m + max_harmonic
  FloquetFrame frame;
  double rcond = 1.0;  // reciprocal condition estimate of the solved system

  const CMatrix& harmonic(int m) const { return harmonics.at(m + max_harmonic); }
  CMatrix& harmonic(int m) { return harmonics.at(m + max_harmonic); }
};

/// First violated state invariant (hermitian pairing rho^(-m) = rho^(m)^dagger, unit
/// trace of rho^(0), traceless higher harmonics, populations in [0, 1]); empty if none.
std::string state_invariant_violation(const FloquetState& state, double tolerance = 1e-9);

struct InvariantTally {
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;
};

/// Process-wide count of solved states checked against state_invariant_violation.
InvariantTally invariant_tally();
void reset_invariant_tally();

/// Periodic steady state of the driven master equation for one velocity class.
FloquetState solve_floquet(const LevelScheme& scheme, const FieldComb& comb, double v_shift,
                           const FloquetOptions& options = {});

/// Coherence radiating into line (channel, n): sum of dipole-weighted optical
/// coherences at the harmonic matching the line. Dimensionless.
Complex radiated_source(const FloquetState& state, const LevelScheme& scheme, Channel channel,
                        int n);

/// Sources for every (channel, n) slot of the comb, in FieldComb::lines order.
std::vector<Complex> radiated_sources(const FloquetState& state, const LevelScheme& scheme,
                                      const FieldComb& comb);

struct TimeDomainOptions {
  std::optional<int> max_harmonic;
  int excited_frame_offset = 0;
};

/// Brute-force oracle: fixed-step RK4 from diag(p_eq) to t_end (us), then
/// projection of the final period onto harmonics.
FloquetState time_domain_reference(const LevelScheme& scheme, const FieldComb& comb,
                                   double v_shift, double t_end, double dt,
                                   const TimeDomainOptions& options = {});

/// Shortest admissible t_end (us) for time_domain_reference.
double minimum_settling_time(const LevelScheme& scheme);

/// Largest admissible dt (us) for time_domain_reference with this drive.
double maximum_time_step(const LevelScheme& scheme, const FieldComb& comb, double v_shift);

}  // namespace phaseonium
