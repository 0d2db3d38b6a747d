#include "phaseonium/propagate.hpp"

#include "phaseonium/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace phaseonium {

namespace {

constexpr double kProbeFraction = 1e-4;
// Saturation parameter of the probe against ground relaxation, Omega^2 / (gamma_g gamma_e).
constexpr double kProbePumping = 1e-4;
constexpr double kLinearityTolerance = 1e-3;

double total_power(const Eigen::VectorXcd& y) { return y.squaredNorm(); }

std::mutex g_passivity_mutex;
PassivityTally g_passivity;

void record_step(double before, double after, double tolerance) {
  const double growth = before > 0.0 ? after / before - 1.0 : 0.0;
  std::lock_guard lock(g_passivity_mutex);
  ++g_passivity.steps;
  if (growth > tolerance) ++g_passivity.violations;
  g_passivity.max_growth = std::max(g_passivity.max_growth, growth);
}

FieldComb with_amplitudes(FieldComb comb, const Eigen::VectorXcd& y) {
  for (std::size_t k = 0; k < comb.lines.size(); ++k) comb.lines[k].omega_rabi = y(k);
  return comb;
}

}  // namespace

PassivityTally passivity_tally() {
  std::lock_guard lock(g_passivity_mutex);
  return g_passivity;
}

void reset_passivity_tally() {
  std::lock_guard lock(g_passivity_mutex);
  g_passivity = {};
}

void validate(const MediumSpec& medium) {
  auto fail = [](const char* field, const std::string& why) {
    throw Error(ErrorKind::DomainError, std::string("medium.") + field + ": " + why);
  };
  if (!(medium.tau >= 0.0) || !std::isfinite(medium.tau)) fail("tau", "must be finite and >= 0");
  if (!(medium.fwhm_doppler >= 0.0) || !std::isfinite(medium.fwhm_doppler))
    fail("fwhm_doppler", "must be finite and >= 0");
  if (medium.n_z < 1) fail("n_z", "must be >= 1");
  if (medium.n_v < 1 || medium.n_v % 2 == 0) fail("n_v", "must be odd and >= 1");
  if (!(medium.cell_length_mm > 0.0)) fail("cell_length_mm", "must be > 0");
}

std::vector<Complex> averaged_sources(const FieldComb& comb, const LevelScheme& scheme,
                                      const MediumSpec& medium,
                                      const PropagationOptions& options) {
  DopplerOptions dopt;
  dopt.method = options.doppler;
  dopt.floquet = options.floquet;
  if (options.doppler == DopplerMethod::quadrature)
    dopt.grid = velocity_nodes(medium.fwhm_doppler, medium.n_v);
  return doppler_average_state(scheme, comb, medium.fwhm_doppler, dopt).sources;
}

CouplingCalibration calibrate_coupling(const LevelScheme& scheme, const MediumSpec& medium,
                                       const PropagationOptions& options) {
  validate(medium);
  const double ground = scheme.gamma_12() + scheme.gamma_t();
  const double omega = std::min(kProbeFraction * scheme.gamma_e(),
                                std::sqrt(kProbePumping * ground * scheme.gamma_e()));
  auto chi_at = [&](double rabi) {
    FieldComb probe;
    probe = with_line(probe, Channel::A, 0, rabi);
    return averaged_sources(probe, scheme, medium, options).front() / rabi;
  };
  CouplingCalibration out;
  out.chi = chi_at(omega);
  const Complex chi_half = chi_at(0.5 * omega);
  if (!(std::abs(out.chi - chi_half) <= kLinearityTolerance * std::abs(out.chi)) || !(out.chi.imag() > 0.0)) {
    std::ostringstream msg;
    msg << "weak-probe response is not linear and absorbing (chi = " << out.chi
        << ", chi at half amplitude = " << chi_half << ")";
    throw Error(ErrorKind::CalibrationDiverged, msg.str());
  }
  out.kappa = medium.tau / (2.0 * out.chi.imag());
  return out;
}

int PropagationTrace::line_index(Channel channel, int n) const {
  for (std::size_t k = 0; k < lines.size(); ++k)
    if (lines[k].channel == channel && lines[k].n == n) return static_cast<int>(k);
  return -1;
}

double PropagationTrace::output_power(Channel channel, int n) const {
  const int k = line_index(channel, n);
  if (k < 0)
    throw Error(ErrorKind::UnknownLine,
                std::string("line ") + to_string(channel) + "_" + std::to_string(n));
  return powers.back()[k];
}

double PropagationTrace::transmission(Channel channel, int n) const {
  const int k = line_index(channel, n);
  if (k < 0)
    throw Error(ErrorKind::UnknownLine,
                std::string("line ") + to_string(channel) + "_" + std::to_string(n));
  const double in = std::norm(fields.front()[k]);
  return in > 0.0 ? std::norm(fields.back()[k]) / in : 0.0;
}

double PropagationTrace::channel_total(Channel channel) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < lines.size(); ++k)
    if (lines[k].channel == channel) sum += powers.back()[k];
  return sum;
}

PropagationTrace propagate(const FieldComb& comb_in, const LevelScheme& scheme,
                           const MediumSpec& medium, const IntensityCalibration& cal,
                           const PropagationOptions& options) {
  (void)rabi_from_power(0.0, cal, scheme.gamma_e());  // validates the calibration
  return propagate(comb_in, scheme, medium, calibrate_coupling(scheme, medium, options),
                   options);
}

PropagationTrace propagate(const FieldComb& comb_in, const LevelScheme& scheme,
                           const MediumSpec& medium, const CouplingCalibration& coupling,
                           const PropagationOptions& options) {
  validate(medium);
  const FieldComb comb = extend_comb(comb_in, comb_in.max_order);
  const int size = static_cast<int>(comb.lines.size());
  const double kappa = coupling.kappa;

  PropagationTrace trace;
  trace.lines = comb.lines;
  trace.kappa = kappa;
  Eigen::VectorXcd y(size);
  for (int k = 0; k < size; ++k) y(k) = comb.lines[k].omega_rabi;
  const double p_in = total_power(y);

  auto sources = [&](const Eigen::VectorXcd& state) {
    const auto s = averaged_sources(with_amplitudes(comb, state), scheme, medium, options);
    return Eigen::Map<const Eigen::VectorXcd>(s.data(), size).eval();
  };
  auto record = [&](double zeta, const Eigen::VectorXcd& state) {
    trace.zeta.push_back(zeta);
    trace.fields.emplace_back(state.data(), state.data() + size);
    std::vector<double> p(size, 0.0);
    if (p_in > 0.0)
      for (int k = 0; k < size; ++k) p[k] = std::norm(state(k)) / p_in;
    trace.powers.push_back(std::move(p));
    if (options.record_sources) {
      const Eigen::VectorXcd s = kappa == 0.0 || p_in == 0.0 ? Eigen::VectorXcd::Zero(size)
                                                             : sources(state);
      trace.sources.emplace_back(s.data(), s.data() + size);
    }
  };

  const Complex ik{0.0, kappa};
  auto rk4 = [&](const Eigen::VectorXcd& y0, double h) {
    const Eigen::VectorXcd k1 = ik * sources(y0);
    const Eigen::VectorXcd k2 = ik * sources(y0 + 0.5 * h * k1);
    const Eigen::VectorXcd k3 = ik * sources(y0 + 0.5 * h * k2);
    const Eigen::VectorXcd k4 = ik * sources(y0 + h * k3);
    return (y0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).eval();
  };

  // Advances by h, halving while the step would create power.
  std::function<Eigen::VectorXcd(const Eigen::VectorXcd&, double, double, int)> advance =
      [&](const Eigen::VectorXcd& y0, double zeta, double h, int depth) -> Eigen::VectorXcd {
    Eigen::VectorXcd y1 = rk4(y0, h);
    const double before = total_power(y0);
    if (total_power(y1) <= before * (1.0 + options.passivity_tolerance)) {
      record_step(before, total_power(y1), options.passivity_tolerance);
      return y1;
    }
    if (depth >= options.max_halvings) {
      record_step(before, total_power(y1), options.passivity_tolerance);
      std::ostringstream msg;
      msg << "total power grows from " << before << " to " << total_power(y1)
          << " MHz^2 at zeta = " << zeta << " after " << depth << " step halvings";
      throw Error(ErrorKind::StepRejected, msg.str());
    }
    ++trace.halvings;
    const Eigen::VectorXcd mid = advance(y0, zeta, 0.5 * h, depth + 1);
    return advance(mid, zeta + 0.5 * h, 0.5 * h, depth + 1);
  };

  record(0.0, y);
  const bool inert = kappa == 0.0 || p_in == 0.0;
  const double h = 1.0 / medium.n_z;
  for (int step = 1; step <= medium.n_z; ++step) {
    const double zeta = (step - 1) * h;
    if (!inert) y = advance(y, zeta, h, 0);
    record(step * h, y);
    if (options.progress) options.progress(step * h);
  }
  return trace;
}

}  // namespace phaseonium
