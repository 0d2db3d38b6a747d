#pragma once

#include "phaseonium/atom_model.hpp"
#include "phaseonium/comb_field.hpp"
#include "phaseonium/propagate.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace phaseonium {

struct InputBeam {
  Channel channel;
  int n;
  double power_uw;

  bool operator==(const InputBeam&) const = default;
};

struct CombSpec {
  double delta_a = 0.0;     // MHz
  double delta_r = 0.0;     // MHz
  double delta_3 = 3000.0;  // MHz
  int max_order = 4;
  std::vector<InputBeam> inputs = {
      {Channel::A, 0, 700.0}, {Channel::A, 1, 700.0}, {Channel::B, 0, 700.0}};

  bool operator==(const CombSpec&) const = default;
};

struct SolverSpec {
  std::optional<int> max_harmonic;  // defaults to max_order + 2
  DopplerMethod doppler = DopplerMethod::exact;

  bool operator==(const SolverSpec&) const = default;
};

/// Everything a single propagation run depends on.
struct Experiment {
  SchemeConfig scheme;
  CombSpec comb;
  MediumSpec medium;
  IntensityCalibration calibration = default_calibration();
  SolverSpec solver;

  bool operator==(const Experiment&) const = default;
};

/// Raman detuning scan of the transmission peak: 700 uW per beam, tau = 5.8,
/// omega_3 3 GHz above |2>-|3B>.
Experiment raman_preset();
/// Probe detuning scan: 800 uW per beam, tau = 5.8.
Experiment probe_preset();
/// Optical density scan: 450 uW per beam, omega_3 on the |2>-|4B> resonance.
Experiment density_preset();

void validate(const Experiment& experiment);

/// Input comb with Rabi frequencies from the beam powers, extended to max_order.
FieldComb build_comb(const Experiment& experiment, const LevelScheme& scheme);
PropagationOptions propagation_options(const Experiment& experiment);

/// One propagation run, calibrating the coupling from the medium.
PropagationTrace run_experiment(const Experiment& experiment);

enum class ScanVariable { delta_r, delta_3, tau, power };

const char* to_string(ScanVariable variable);
std::optional<ScanVariable> scan_variable_from_string(const std::string& name);
/// Unit of the grid values: MHz, MHz, 1, uW.
const char* unit_of(ScanVariable variable);

struct ScanSpec {
  ScanVariable variable = ScanVariable::delta_r;
  std::vector<double> grid;
  Experiment fixed;

  bool operator==(const ScanSpec&) const = default;
};

void validate(const ScanSpec& spec);
/// Fixed experiment with the scanned variable set to value.
Experiment experiment_at(const ScanSpec& spec, double value);

struct LineKey {
  Channel channel;
  int n;

  bool operator==(const LineKey&) const = default;
};

struct ScanResult {
  ScanSpec spec;
  std::vector<LineKey> lines;               // A ascending n, then B ascending n
  std::vector<std::vector<double>> powers;  // [point][line], output power in uW
  std::vector<double> total_a;              // uW
  std::vector<double> total_b;              // uW
  std::vector<int> halvings;                // passivity step halvings per point

  int line_index(Channel channel, int n) const;
  /// Output power of one line across the grid, uW.
  std::vector<double> series(Channel channel, int n) const;

  bool operator==(const ScanResult&) const = default;
};

/// Called with the grid index after each finished point; may run on worker threads.
using ScanProgress = std::function<void(std::size_t)>;

/// Number of workers for scans: PHASEONIUM_THREADS if set, else the hardware concurrency.
int worker_count();

/// Runs one propagation per grid point on worker_count() threads; results are in grid order.
ScanResult run_scan(const ScanSpec& spec, const ScanProgress& progress = {});
ScanResult scan_raman(const ScanSpec& spec, const ScanProgress& progress = {});
ScanResult scan_probe(const ScanSpec& spec, const ScanProgress& progress = {});
ScanResult scan_density(const ScanSpec& spec, const ScanProgress& progress = {});

struct ThresholdScan {
  ScanResult result;
  /// Least-squares slope of log(first-order sideband power) against log(input power).
  double log_log_slope = 0.0;
};

ThresholdScan threshold_scan(const ScanSpec& spec, const ScanProgress& progress = {});

/// Summed output of the first-order sidebands A -1, A +2, B -1, B +1, uW.
double first_order_sideband_power(const ScanResult& result, std::size_t point);

struct EitPeak {
  double intensity = 0.0;  // total A input intensity, mW/cm^2
  double center = 0.0;     // MHz
  double halfwidth = 0.0;  // MHz
};

struct EITFit {
  double gamma_fit = 0.0;       // MHz, intercept of halfwidth against intensity
  double slope_c = 0.0;         // MHz per mW/cm^2
  double stark_slope = 0.0;     // kHz per mW/cm^2
  double r_squared = 0.0;       // halfwidth fit
  double stark_r_squared = 0.0;
  std::vector<EitPeak> peaks;
};

/// Total A-channel input intensity of an experiment, mW/cm^2.
double channel_a_intensity(const Experiment& experiment);

/// Transmission peak of the A pump pair in a Raman detuning scan: half width at half
/// maximum above the off-resonant baseline (lower of the two grid ends), by bisection
/// on the piecewise linear interpolant.
EitPeak measure_eit_peak(const ScanResult& raman_scan);

/// Same peak located directly: coarse grid and golden-section search for the centre,
/// then bisection on the detuning for the half level, one propagation per evaluation.
EitPeak bisect_eit_peak(const Experiment& experiment, double search_halfspan_mhz,
                        double baseline_detuning_mhz, double tolerance_mhz);

/// Affine fits of halfwidth and centre against intensity.
EITFit fit_eit_linewidth(const std::vector<EitPeak>& peaks);
EITFit fit_eit_linewidth(const std::vector<ScanResult>& ladder);

struct RabiMatching {
  std::vector<double> zeta;
  /// |g1 g4| / |g2 g3| with g1 = A 0, g2 = A +1, g3 = B 0, g4 = B +1; infinity where
  /// the denominator vanishes.
  std::vector<double> ratio;
  std::vector<double> distance;  // |ratio - 1|
};

RabiMatching rabi_matching_diagnostic(const PropagationTrace& trace);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace phaseonium
