#include "phaseonium/scenarios.hpp"

#include "phaseonium/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace phaseonium {

namespace {

[[noreturn]] void domain_error(const std::string& path, const std::string& why) {
  throw Error(ErrorKind::DomainError, path + ": " + why);
}

std::string strip_kind(const Error& e) {
  const std::string what = e.what();
  const std::size_t skip = to_string(e.kind()).size() + 2;
  return what.size() >= skip ? what.substr(skip) : what;
}

Experiment with_beam_powers(Experiment experiment, double power_uw) {
  for (auto& beam : experiment.comb.inputs) beam.power_uw = power_uw;
  return experiment;
}

double sum_a_pumps(const ScanResult& result, std::size_t point) {
  double s = 0.0;
  for (int n : {0, 1}) {
    const int k = result.line_index(Channel::A, n);
    if (k >= 0) s += result.powers[point][k];
  }
  return s;
}

// Calls task(i) for i in [0, count) on the scan workers. Rethrows the failure of the
// lowest index so errors do not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, worker_count())));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct PreparedScan {
  LevelScheme scheme;
  CouplingCalibration unit_coupling;  // tau = 1
  PropagationOptions options;
};

PreparedScan prepare(const ScanSpec& spec) {
  validate(spec);
  PreparedScan p{build_level_scheme(spec.fixed.scheme), {}, propagation_options(spec.fixed)};
  MediumSpec unit = spec.fixed.medium;
  unit.tau = 1.0;
  p.unit_coupling = calibrate_coupling(p.scheme, unit, p.options);
  return p;
}

PropagationTrace run_prepared(const PreparedScan& p, const Experiment& experiment) {
  CouplingCalibration coupling = p.unit_coupling;
  coupling.kappa *= experiment.medium.tau;
  return propagate(build_comb(experiment, p.scheme), p.scheme, experiment.medium, coupling,
                   p.options);
}

std::vector<double> output_powers_uw(const PropagationTrace& trace, const Experiment& experiment,
                                     double gamma_e) {
  std::vector<double> out;
  out.reserve(trace.lines.size());
  for (const Complex& omega : trace.fields.back())
    out.push_back(power_from_rabi(std::abs(omega), experiment.calibration, gamma_e));
  return out;
}

}  // namespace

Experiment raman_preset() { return Experiment{}; }

Experiment probe_preset() {
  Experiment e = with_beam_powers(Experiment{}, 800.0);
  return e;
}

Experiment density_preset() {
  Experiment e = with_beam_powers(Experiment{}, 450.0);
  e.comb.delta_3 = -kExcitedSplittingMHz;
  return e;
}

void validate(const Experiment& experiment) {
  try {
    (void)build_level_scheme(experiment.scheme);
  } catch (const Error& e) {
    throw Error(e.kind(), "scheme: " + strip_kind(e));
  }
  const CombSpec& comb = experiment.comb;
  for (auto [name, value] : {std::pair{"delta_a", comb.delta_a}, {"delta_r", comb.delta_r},
                             {"delta_3", comb.delta_3}})
    if (!std::isfinite(value)) domain_error(std::string("comb.") + name, "must be finite");
  if (comb.max_order < 1) domain_error("comb.max_order", "must be >= 1");
  for (std::size_t i = 0; i < comb.inputs.size(); ++i) {
    const InputBeam& beam = comb.inputs[i];
    const std::string path = "comb.inputs[" + std::to_string(i) + "]";
    if (std::abs(beam.n) > comb.max_order)
      domain_error(path + ".n", "exceeds comb.max_order");
    if (!(beam.power_uw >= 0.0) || !std::isfinite(beam.power_uw))
      domain_error(path + ".power_uw", "must be finite and >= 0");
    for (std::size_t j = 0; j < i; ++j)
      if (comb.inputs[j].channel == beam.channel && comb.inputs[j].n == beam.n)
        domain_error(path, "duplicates comb.inputs[" + std::to_string(j) + "]");
  }
  try {
    validate(experiment.medium);
  } catch (const Error& e) {
    throw Error(e.kind(), strip_kind(e));
  }
  const IntensityCalibration& cal = experiment.calibration;
  if (!(cal.i_sat > 0.0) || !std::isfinite(cal.i_sat)) domain_error("calibration.i_sat", "must be > 0");
  if (!(cal.effective_area >= 0.0) || !std::isfinite(cal.effective_area))
    domain_error("calibration.effective_area", "must be > 0 (0 selects the default)");
  if (experiment.solver.max_harmonic && *experiment.solver.max_harmonic < comb.max_order)
    domain_error("solver.max_harmonic", "must be >= comb.max_order");
}

FieldComb build_comb(const Experiment& experiment, const LevelScheme& scheme) {
  FieldComb comb;
  comb.delta_a = experiment.comb.delta_a;
  comb.delta_r = experiment.comb.delta_r;
  comb.delta_3 = experiment.comb.delta_3;
  comb.spacing_mhz = scheme.ground_splitting_mhz();
  for (const InputBeam& beam : experiment.comb.inputs)
    comb = with_line(comb, beam.channel, beam.n,
                     rabi_from_power(beam.power_uw, experiment.calibration, scheme.gamma_e()));
  return extend_comb(comb, experiment.comb.max_order);
}

PropagationOptions propagation_options(const Experiment& experiment) {
  PropagationOptions options;
  options.doppler = experiment.solver.doppler;
  options.floquet.max_harmonic = experiment.solver.max_harmonic;
  return options;
}

PropagationTrace run_experiment(const Experiment& experiment) {
  validate(experiment);
  const LevelScheme scheme = build_level_scheme(experiment.scheme);
  return propagate(build_comb(experiment, scheme), scheme, experiment.medium,
                   experiment.calibration, propagation_options(experiment));
}

const char* to_string(ScanVariable variable) {
  switch (variable) {
    case ScanVariable::delta_r: return "delta_R";
    case ScanVariable::delta_3: return "delta_3";
    case ScanVariable::tau: return "tau";
    case ScanVariable::power: return "power";
  }
  return "?";
}

std::optional<ScanVariable> scan_variable_from_string(const std::string& name) {
  for (auto v : {ScanVariable::delta_r, ScanVariable::delta_3, ScanVariable::tau,
                 ScanVariable::power})
    if (name == to_string(v)) return v;
  return std::nullopt;
}

const char* unit_of(ScanVariable variable) {
  switch (variable) {
    case ScanVariable::delta_r:
    case ScanVariable::delta_3: return "MHz";
    case ScanVariable::tau: return "1";
    case ScanVariable::power: return "uW";
  }
  return "?";
}

void validate(const ScanSpec& spec) {
  if (spec.grid.empty()) domain_error("scan.grid", "must be nonempty");
  const bool up = spec.grid.size() < 2 || spec.grid[1] > spec.grid[0];
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    if (!std::isfinite(spec.grid[i]))
      domain_error("scan.grid[" + std::to_string(i) + "]", "must be finite");
    if (i > 0 && (up ? !(spec.grid[i] > spec.grid[i - 1]) : !(spec.grid[i] < spec.grid[i - 1])))
      domain_error("scan.grid[" + std::to_string(i) + "]", "grid must be strictly monotone");
  }
  validate(spec.fixed);
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    try {
      validate(experiment_at(spec, spec.grid[i]));
    } catch (const Error& e) {
      throw Error(e.kind(), "scan.grid[" + std::to_string(i) + "]: " + strip_kind(e));
    }
  }
}

Experiment experiment_at(const ScanSpec& spec, double value) {
  Experiment e = spec.fixed;
  switch (spec.variable) {
    case ScanVariable::delta_r: e.comb.delta_r = value; break;
    case ScanVariable::delta_3: e.comb.delta_3 = value; break;
    case ScanVariable::tau: e.medium.tau = value; break;
    case ScanVariable::power: e = with_beam_powers(std::move(e), value); break;
  }
  return e;
}

int ScanResult::line_index(Channel channel, int n) const {
  for (std::size_t k = 0; k < lines.size(); ++k)
    if (lines[k].channel == channel && lines[k].n == n) return static_cast<int>(k);
  return -1;
}

std::vector<double> ScanResult::series(Channel channel, int n) const {
  const int k = line_index(channel, n);
  if (k < 0)
    throw Error(ErrorKind::UnknownLine,
                std::string("line ") + to_string(channel) + "_" + std::to_string(n));
  std::vector<double> out;
  for (const auto& row : powers) out.push_back(row[k]);
  return out;
}

int worker_count() {
  if (const char* env = std::getenv("PHASEONIUM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n >= 1) return static_cast<int>(std::min(n, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ScanResult run_scan(const ScanSpec& spec, const ScanProgress& progress) {
  const PreparedScan prepared = prepare(spec);
  const double gamma_e = prepared.scheme.gamma_e();
  const std::size_t count = spec.grid.size();

  ScanResult result;
  result.spec = spec;
  for (const CombLine& line : build_comb(spec.fixed, prepared.scheme).lines)
    result.lines.push_back({line.channel, line.n});
  result.powers.assign(count, {});
  result.total_a.assign(count, 0.0);
  result.total_b.assign(count, 0.0);
  result.halvings.assign(count, 0);

  std::mutex progress_mutex;
  parallel_for(count, [&](std::size_t i) {
    const Experiment experiment = experiment_at(spec, spec.grid[i]);
    PropagationTrace trace;
    try {
      trace = run_prepared(prepared, experiment);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "scan.grid[" << i << "] (" << to_string(spec.variable) << " = " << spec.grid[i]
          << "): " << strip_kind(e);
      throw Error(e.kind(), msg.str());
    }
    result.powers[i] = output_powers_uw(trace, experiment, gamma_e);
    result.halvings[i] = trace.halvings;
    for (std::size_t k = 0; k < result.lines.size(); ++k)
      (result.lines[k].channel == Channel::A ? result.total_a : result.total_b)[i] +=
          result.powers[i][k];
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(i);
    }
  });
  return result;
}

namespace {

void require_variable(const ScanSpec& spec, ScanVariable expected, const char* op) {
  if (spec.variable != expected)
    throw Error(ErrorKind::InvalidArgument, std::string(op) + " needs scan.variable = " +
                                                to_string(expected) + ", got " +
                                                to_string(spec.variable));
}

}  // namespace

ScanResult scan_raman(const ScanSpec& spec, const ScanProgress& progress) {
  require_variable(spec, ScanVariable::delta_r, "scan_raman");
  return run_scan(spec, progress);
}

ScanResult scan_probe(const ScanSpec& spec, const ScanProgress& progress) {
  require_variable(spec, ScanVariable::delta_3, "scan_probe");
  return run_scan(spec, progress);
}

ScanResult scan_density(const ScanSpec& spec, const ScanProgress& progress) {
  require_variable(spec, ScanVariable::tau, "scan_density");
  return run_scan(spec, progress);
}

double first_order_sideband_power(const ScanResult& result, std::size_t point) {
  double s = 0.0;
  for (auto [channel, n] : {std::pair{Channel::A, -1}, {Channel::A, 2}, {Channel::B, -1},
                            {Channel::B, 1}}) {
    const int k = result.line_index(channel, n);
    if (k >= 0) s += result.powers[point][k];
  }
  return s;
}

ThresholdScan threshold_scan(const ScanSpec& spec, const ScanProgress& progress) {
  require_variable(spec, ScanVariable::power, "threshold_scan");
  ThresholdScan out{run_scan(spec, progress), 0.0};
  std::vector<double> x, y;
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    const double p = first_order_sideband_power(out.result, i);
    if (spec.grid[i] > 0.0 && p > 0.0) {
      x.push_back(std::log(spec.grid[i]));
      y.push_back(std::log(p));
    }
  }
  if (x.size() < 2)
    throw Error(ErrorKind::InsufficientPoints,
                "threshold_scan needs two grid points with nonzero power and sidebands");
  out.log_log_slope = fit_line(x, y).slope;
  return out;
}

double channel_a_intensity(const Experiment& experiment) {
  double sum = 0.0;
  for (const InputBeam& beam : experiment.comb.inputs)
    if (beam.channel == Channel::A) sum += intensity_from_power(beam.power_uw, experiment.calibration);
  return sum;
}

EitPeak measure_eit_peak(const ScanResult& scan) {
  require_variable(scan.spec, ScanVariable::delta_r, "measure_eit_peak");
  const auto& x = scan.spec.grid;
  const std::size_t count = x.size();
  if (count < 3)
    throw Error(ErrorKind::InsufficientPoints, "peak detection needs at least 3 grid points");
  std::vector<double> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = sum_a_pumps(scan, i);

  const std::size_t top = std::max_element(s.begin(), s.end()) - s.begin();
  const double baseline = std::min(s.front(), s.back());
  if (top == 0 || top + 1 == count || !(s[top] > baseline))
    throw Error(ErrorKind::NoPeakFound, "A-pair transmission has no interior maximum");
  const double half = baseline + 0.5 * (s[top] - baseline);

  auto crossing = [&](int step) {
    for (int j = static_cast<int>(top); j + step >= 0 && j + step < static_cast<int>(count);
         j += step) {
      const int k = j + step;
      if (s[k] < half) {
        double lo = 0.0, hi = 1.0;  // fraction of the way from j to k
        auto value = [&](double t) { return s[j] + t * (s[k] - s[j]); };
        for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
          const double mid = 0.5 * (lo + hi);
          (value(mid) >= half ? lo : hi) = mid;
        }
        return x[j] + 0.5 * (lo + hi) * (x[k] - x[j]);
      }
    }
    throw Error(ErrorKind::NoPeakFound, "transmission peak does not fall to half height in the scan");
  };
  const double a = crossing(-1), b = crossing(+1);
  EitPeak peak;
  peak.intensity = channel_a_intensity(scan.spec.fixed);
  peak.center = 0.5 * (a + b);
  peak.halfwidth = 0.5 * std::abs(b - a);
  return peak;
}

EitPeak bisect_eit_peak(const Experiment& experiment, double search_halfspan_mhz,
                        double baseline_detuning_mhz, double tolerance_mhz) {
  if (!(search_halfspan_mhz > 0.0) || !(baseline_detuning_mhz > search_halfspan_mhz) ||
      !(tolerance_mhz > 0.0))
    throw Error(ErrorKind::InvalidArgument,
                "bisect_eit_peak needs 0 < search span < baseline detuning and tolerance > 0");
  ScanSpec spec{ScanVariable::delta_r, {0.0}, experiment};
  const PreparedScan prepared = prepare(spec);
  auto transmission = [&](double delta_r) {
    Experiment e = experiment;
    e.comb.delta_r = delta_r;
    const PropagationTrace trace = run_prepared(prepared, e);
    double t = 0.0;
    for (int n : {0, 1}) {
      const int k = trace.line_index(Channel::A, n);
      if (k >= 0) t += std::norm(trace.fields.back()[k]);
    }
    return t;
  };

  // Coarse grid first so a narrow peak on a flat baseline is bracketed.
  constexpr int kCoarse = 33;
  const double step = 2.0 * search_halfspan_mhz / (kCoarse - 1);
  int best = 0;
  double best_t = -1.0;
  for (int i = 0; i < kCoarse; ++i) {
    const double t = transmission(-search_halfspan_mhz + i * step);
    if (t > best_t) best_t = t, best = i;
  }
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = -search_halfspan_mhz + (best - 1) * step, b = a + 2.0 * step;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = transmission(c), fd = transmission(d);
  while (b - a > tolerance_mhz) {
    if (fc >= fd) {
      b = d, d = c, fd = fc;
      c = b - phi * (b - a), fc = transmission(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + phi * (b - a), fd = transmission(d);
    }
  }
  const double center = 0.5 * (a + b);
  const double top = transmission(center);
  const double baseline = std::min(transmission(center - baseline_detuning_mhz),
                                   transmission(center + baseline_detuning_mhz));
  if (!(top > baseline))
    throw Error(ErrorKind::NoPeakFound, "A-pair transmission shows no peak near Raman resonance");
  const double half = baseline + 0.5 * (top - baseline);

  auto edge = [&](double sign) {
    double lo = 0.0, hi = baseline_detuning_mhz;
    if (transmission(center + sign * hi) >= half)
      throw Error(ErrorKind::NoPeakFound, "transmission peak does not fall to half height");
    while (hi - lo > tolerance_mhz) {
      const double mid = 0.5 * (lo + hi);
      (transmission(center + sign * mid) >= half ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double left = edge(-1.0), right = edge(+1.0);
  EitPeak peak;
  peak.intensity = channel_a_intensity(experiment);
  peak.center = center + 0.5 * (right - left);
  peak.halfwidth = 0.5 * (left + right);
  return peak;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw Error(ErrorKind::LengthMismatch, "fit_line: x and y differ in length");
  if (x.size() < 2) throw Error(ErrorKind::InsufficientPoints, "fit_line needs two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientPoints, "fit_line needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

EITFit fit_eit_linewidth(const std::vector<EitPeak>& peaks) {
  if (peaks.size() < 4)
    throw Error(ErrorKind::InsufficientPoints, "EIT linewidth fit needs at least 4 intensities");
  std::vector<double> intensity, width, center;
  for (const EitPeak& p : peaks) {
    intensity.push_back(p.intensity);
    width.push_back(p.halfwidth);
    center.push_back(p.center);
  }
  const auto [lo, hi] = std::minmax_element(intensity.begin(), intensity.end());
  if (!(*lo > 0.0) || !(*hi >= 10.0 * *lo))
    throw Error(ErrorKind::InsufficientPoints, "EIT intensity ladder must span at least one decade");
  const LinearFit w = fit_line(intensity, width);
  const LinearFit s = fit_line(intensity, center);
  EITFit fit;
  fit.gamma_fit = w.intercept;
  fit.slope_c = w.slope;
  fit.r_squared = w.r_squared;
  fit.stark_slope = 1e3 * s.slope;
  fit.stark_r_squared = s.r_squared;
  fit.peaks = peaks;
  return fit;
}

EITFit fit_eit_linewidth(const std::vector<ScanResult>& ladder) {
  std::vector<EitPeak> peaks;
  for (const ScanResult& scan : ladder) peaks.push_back(measure_eit_peak(scan));
  return fit_eit_linewidth(peaks);
}

RabiMatching rabi_matching_diagnostic(const PropagationTrace& trace) {
  const std::pair<Channel, int> quad[4] = {
      {Channel::A, 0}, {Channel::A, 1}, {Channel::B, 0}, {Channel::B, 1}};
  int idx[4];
  for (int q = 0; q < 4; ++q) {
    idx[q] = trace.line_index(quad[q].first, quad[q].second);
    bool any = false;
    if (idx[q] >= 0)
      for (const auto& f : trace.fields) any = any || std::abs(f[idx[q]]) > 0.0;
    if (!any)
      throw Error(ErrorKind::ZeroAmplitude, std::string("line ") + to_string(quad[q].first) +
                                                "_" + std::to_string(quad[q].second) +
                                                " is zero on the whole grid");
  }
  RabiMatching out;
  out.zeta = trace.zeta;
  for (const auto& f : trace.fields) {
    const double num = std::abs(f[idx[0]]) * std::abs(f[idx[3]]);
    const double den = std::abs(f[idx[1]]) * std::abs(f[idx[2]]);
    const double r = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
    out.ratio.push_back(r);
    out.distance.push_back(std::abs(r - 1.0));
  }
  return out;
}

}  // namespace phaseonium
