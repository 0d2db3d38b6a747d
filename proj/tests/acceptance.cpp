#include "phaseonium/doppler.hpp"
#include "phaseonium/floquet.hpp"
#include "phaseonium/propagate.hpp"
#include "phaseonium/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace phaseonium;

namespace {

const std::vector<LineKey> kFirstOrder = {
    {Channel::A, -1}, {Channel::A, 2}, {Channel::B, -1}, {Channel::B, 1}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void log(const std::string& line) {
  std::fprintf(stderr, "  %s\n", line.c_str());
  std::fflush(stderr);
}

double total_input_uw(const Experiment& e) {
  double p = 0.0;
  for (const auto& b : e.comb.inputs) p += b.power_uw;
  return p;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> gamma(5.0, 10.0), omega(2.0, 10.0), phase(0.0, kTwoPi),
      detuning(-30.0, 30.0), velocity(-60.0, 60.0), raman(-0.5, 0.5);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    SchemeConfig cfg;
    cfg.gamma_12 = gamma(rng);
    cfg.gamma_t = cfg.gamma_12;
    const LevelScheme scheme = build_level_scheme(cfg);
    FieldComb comb;
    comb.delta_a = detuning(rng);
    comb.delta_r = raman(rng);
    comb.delta_3 = detuning(rng) - 189.0;
    comb = with_line(comb, Channel::A, 0, std::polar(omega(rng), phase(rng)));
    comb = with_line(comb, Channel::A, 1, std::polar(omega(rng), phase(rng)));
    comb = with_line(comb, Channel::B, 0, std::polar(omega(rng), phase(rng)));
    comb = extend_comb(comb, 1);
    const double v = velocity(rng);
    FloquetOptions fo;
    fo.max_harmonic = 3;
    TimeDomainOptions to;
    to.max_harmonic = 3;
    const FloquetState a = solve_floquet(scheme, comb, v, fo);
    const FloquetState b =
        time_domain_reference(scheme, comb, v, minimum_settling_time(scheme),
                              0.5 * maximum_time_step(scheme, comb, v), to);
    for (int m = -3; m <= 3; ++m)
      worst = std::max(worst, (a.harmonic(m) - b.harmonic(m)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, fmt("20 draws, max |rho_floquet - rho_time| = %.3e (limit 1e-8)", worst)};
}

Outcome beer_law() {
  double worst = 0.0;
  std::string values;
  for (double tau : {0.5, 1.0, 3.0}) {
    Experiment e = raman_preset();
    e.comb.inputs = {{Channel::A, 0, 1e-7}};
    e.comb.max_order = 1;
    e.medium.tau = tau;
    const double t = run_experiment(e).transmission(Channel::A, 0);
    worst = std::max(worst, std::abs(t - std::exp(-tau)));
    values += fmt(" T(%.1f)=%.6f", tau, t);
  }
  return {worst <= 1e-3, fmt("max |T - exp(-tau)| = %.3e (limit 1e-3);", worst) + values};
}

double max_excited_population(const LevelScheme& scheme, const FieldComb& comb, double fwhm) {
  const FloquetState s = doppler_average_state(scheme, comb, fwhm).state;
  double worst = 0.0;
  for (std::size_t k = 0; k < scheme.size(); ++k)
    if (scheme.levels()[k].manifold == Manifold::excited)
      worst = std::max(worst, s.harmonic(0)(k, k).real());
  return worst;
}

Outcome dark_state() {
  Experiment e = raman_preset();
  e.scheme.gamma_12 = 0.0;
  e.scheme.gamma_t = 1e-4;
  e.comb.inputs = {{Channel::A, 0, 700.0}, {Channel::A, 1, 700.0}};
  e.comb.delta_r = 0.0;
  e.medium.tau = 10.0;
  const PropagationTrace t = run_experiment(e);
  const double total = t.channel_total(Channel::A);
  const LevelScheme scheme = build_level_scheme(e.scheme);
  const FieldComb in = build_comb(e, scheme);
  FieldComb out = in;
  out.lines = t.lines;
  for (std::size_t k = 0; k < out.lines.size(); ++k) out.lines[k].omega_rabi = t.fields.back()[k];
  const double excited = std::max(max_excited_population(scheme, in, e.medium.fwhm_doppler),
                                  max_excited_population(scheme, out, e.medium.fwhm_doppler));
  return {total >= 0.999 && excited < 1e-10,
          fmt("total transmission %.6f (need >= 0.999), max excited population %.3e "
              "(need < 1e-10)",
              total, excited)};
}

Outcome eit_linewidth() {
  Experiment base = raman_preset();
  base.comb.inputs = {{Channel::A, 0, 10.0}, {Channel::A, 1, 10.0}};
  base.comb.max_order = 1;
  base.medium.n_z = 20;
  std::vector<EitPeak> peaks;
  std::string widths;
  bool in_band = true;
  for (double p : {10.0, 22.8, 51.9, 118.3, 269.6, 700.0}) {
    Experiment e = base;
    for (auto& b : e.comb.inputs) b.power_uw = p;
    peaks.push_back(bisect_eit_peak(e, 2.0, 20.0, 2e-5));
    const double khz = 1e3 * peaks.back().halfwidth;
    in_band = in_band && khz >= 5.0 && khz <= 400.0;
    widths += fmt(" %.3g", khz);
    log(fmt("C6 %g uW: halfwidth %.4g kHz at %.4g mW/cm^2", p, khz, peaks.back().intensity));
  }
  const EITFit fit = fit_eit_linewidth(peaks);
  const bool intercept_ok = std::abs(fit.gamma_fit - 0.003) <= 0.3 * 0.003;
  return {fit.r_squared > 0.99 && intercept_ok && in_band,
          fmt("r^2 = %.5f (need > 0.99), intercept %.3f kHz (need 3 +- 0.9), slope %.3g "
              "kHz per mW/cm^2, halfwidths [kHz]:",
              fit.r_squared, 1e3 * fit.gamma_fit, 1e3 * fit.slope_c) +
              widths + " (need within [5, 400])"};
}

double pair_transmission(const ScanResult& r, std::size_t i) {
  const double in = 2.0 * r.spec.fixed.comb.inputs.front().power_uw;
  return (r.powers[i][r.line_index(Channel::A, 0)] + r.powers[i][r.line_index(Channel::A, 1)]) /
         in;
}

Outcome raman_band() {
  ScanSpec spec{ScanVariable::delta_r,
                {-5.0, -1.0, -0.3, -0.1, -0.05, 0.0, 0.05, 0.1, 0.3, 1.0, 5.0},
                raman_preset()};
  const ScanResult r = scan_raman(spec);
  std::vector<double> side(spec.grid.size());
  for (std::size_t i = 0; i < side.size(); ++i) side[i] = first_order_sideband_power(r, i);
  const std::size_t peak = std::max_element(side.begin(), side.end()) - side.begin();
  auto at = [&](double d) {
    return static_cast<std::size_t>(std::find(spec.grid.begin(), spec.grid.end(), d) -
                                    spec.grid.begin());
  };
  const double wing = std::max(side[at(-1.0)], side[at(1.0)]) / side[peak];
  const double t_peak = pair_transmission(r, peak);
  const double t_off = std::max(pair_transmission(r, at(-5.0)), pair_transmission(r, at(5.0)));
  return {wing < 0.01 && t_peak >= 2.0 * t_off,
          fmt("sideband at |dR| = 1 MHz is %.3e of peak (need < 1e-2); A-pair transmission "
              "%.4f at peak dR = %g vs %.4f off resonance (ratio %.2f, need >= 2)",
              wing, t_peak, spec.grid[peak], t_off, t_peak / t_off)};
}

int alternating_extrema(const std::vector<double>& y, double prominence) {
  // An extremum counts once the series has moved away from it by the prominence.
  int count = 0, direction = 0;
  double hi = y.front(), lo = y.front();
  for (double v : y) {
    hi = std::max(hi, v), lo = std::min(lo, v);
    if (direction >= 0 && hi - v > prominence) {
      ++count, direction = -1, lo = v;
    } else if (direction <= 0 && v - lo > prominence) {
      ++count, direction = 1, hi = v;
    }
  }
  return count;
}

int correlation_lag(std::vector<double> a, std::vector<double> b) {
  auto centre = [](std::vector<double>& x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    for (double& v : x) v -= m;
  };
  centre(a), centre(b);
  const int n = static_cast<int>(a.size());
  int best = 0;
  double best_c = -INFINITY;
  for (int lag = -n / 2; lag <= n / 2; ++lag) {
    double c = 0.0;
    for (int i = 0; i < n; ++i)
      if (i + lag >= 0 && i + lag < n) c += a[i] * b[i + lag];
    if (c > best_c) best_c = c, best = lag;
  }
  return best;
}

Outcome probe_properties() {
  const Experiment preset = probe_preset();
  Experiment no_b = preset;
  std::erase_if(no_b.comb.inputs, [](const InputBeam& b) { return b.channel == Channel::B; });
  const PropagationTrace ref = run_experiment(no_b);
  const double in_a = 2.0 * preset.comb.inputs.front().power_uw;
  double far = 0.0;
  for (double d3 : {-16000.0, 16000.0}) {
    Experiment e = preset;
    e.comb.delta_3 = d3;
    const PropagationTrace t = run_experiment(e);
    for (int n : {0, 1}) {
      const double a = t.output_power(Channel::A, n) * total_input_uw(e);
      const double b = ref.output_power(Channel::A, n) * in_a;
      far = std::max(far, std::abs(a - b) / b);
    }
    const double ta = t.channel_total(Channel::A) * total_input_uw(e);
    const double tb = ref.channel_total(Channel::A) * in_a;
    far = std::max(far, std::abs(ta - tb) / tb);
  }

  std::vector<double> grid;
  for (int i = 0; i <= 32; ++i) grid.push_back(-4000.0 + 250.0 * i);
  const ScanResult r = scan_probe({ScanVariable::delta_3, grid, preset});
  const auto lower = r.series(Channel::B, -1), upper = r.series(Channel::B, 1);
  auto extrema = [](const std::vector<double>& y) {
    return alternating_extrema(y, 0.01 * *std::max_element(y.begin(), y.end()));
  };
  const int n_lower = extrema(lower), n_upper = extrema(upper);
  const int lag = correlation_lag(lower, upper);

  auto mean_over = [&](Channel c, int n, auto inside) {
    const auto y = r.series(c, n);
    double s = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (inside(grid[i])) s += y[i], ++k;
    return s / k;
  };
  auto near = [](double d) { return d >= -1000.0 && d <= 0.0; };
  auto outer = [](double d) { return std::abs(d) >= 3000.0; };
  const double a0_near = mean_over(Channel::A, 0, near), a0_far = mean_over(Channel::A, 0, outer);
  const double a1_near = mean_over(Channel::A, 1, near), a1_far = mean_over(Channel::A, 1, outer);
  const bool pattern = a0_near > a0_far && a1_near < a1_far;

  return {far < 0.02 && n_lower >= 3 && n_upper >= 3 && lag != 0 && pattern,
          fmt("16 GHz probe changes A outputs by %.3e (need < 2e-2); alternating extrema "
              "B-1 %d, B+1 %d (need >= 3); correlation lag %d grid steps (need != 0); "
              "A0 %.1f -> %.1f uW, A1 %.1f -> %.1f uW far -> near (need A0 up, A1 down)",
              far, n_lower, n_upper, lag, a0_far, a0_near, a1_far, a1_near)};
}

Outcome density_bands() {
  const std::vector<double> grid = {0, 1, 1.5, 2, 2.5, 3, 4, 5, 6, 8, 10, 12, 16, 20};
  const Experiment preset = density_preset();
  const ScanResult r = scan_density({ScanVariable::tau, grid, preset});
  const double beam = preset.comb.inputs.front().power_uw;

  std::string detail;
  bool ok = true;
  std::vector<double> x, pumps_max(grid.size(), 0.0);
  for (const auto& b : preset.comb.inputs) {
    const auto y = r.series(b.channel, b.n);
    std::vector<double> tx, ly;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      pumps_max[i] = std::max(pumps_max[i], y[i]);
      if (grid[i] >= 2.0 && grid[i] <= 8.0) tx.push_back(grid[i]), ly.push_back(std::log(y[i]));
    }
    const double rate = -fit_line(tx, ly).slope;
    ok = ok && rate >= 0.5 && rate <= 1.0;
    detail += fmt("pump %s%+d rate %.3f; ", to_string(b.channel), b.n, rate);
  }
  for (const auto& [c, n] : kFirstOrder) {
    const auto y = r.series(c, n);
    const std::size_t k = std::max_element(y.begin(), y.end()) - y.begin();
    const double conv = y[k] / beam;
    ok = ok && grid[k] >= 1.5 && grid[k] <= 8.0 && conv >= 0.005 && conv <= 0.2;
    detail += fmt("%s%+d max %.2f%% at tau %g; ", to_string(c), n, 100.0 * conv, grid[k]);
  }
  bool crossover = false;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 8.0) continue;
    for (std::size_t k = 0; k < r.lines.size(); ++k) {
      const bool pump =
          std::any_of(preset.comb.inputs.begin(), preset.comb.inputs.end(),
                      [&](const InputBeam& b) { return b.channel == r.lines[k].channel &&
                                                       b.n == r.lines[k].n; });
      if (!pump && r.powers[i][k] > pumps_max[i]) crossover = true;
    }
  }
  ok = ok && crossover;
  return {ok, detail + (crossover ? "a generated line exceeds every pump at large tau"
                                  : "no generated line exceeds every pump at tau >= 8") +
                  " (need rates in [0.5, 1], maxima at tau in [1.5, 8] with 0.5-20%, crossover)"};
}

struct Ladder {
  ThresholdScan scan;
  double beam(std::size_t i) const { return scan.result.spec.grid[i]; }
  double conv(std::size_t i, Channel c, int n) const {
    const int k = scan.result.line_index(c, n);
    return k < 0 ? 0.0 : scan.result.powers[i][k] / beam(i);
  }
};

Outcome threshold(const Ladder& l) {
  const double slope = l.scan.log_log_slope;
  double weakest = INFINITY;
  for (const auto& [c, n] : kFirstOrder)
    weakest = std::min(weakest, l.conv(0, c, n));
  return {std::abs(slope - 1.0) <= 0.3 && weakest > 1e-6,
          fmt("log-log slope %.3f (need 1.0 +- 0.3); weakest first-order conversion at %g uW "
              "%.3e (need > 1e-6)",
              slope, l.beam(0), weakest)};
}

Outcome hierarchy(const Ladder& l) {
  const std::size_t top = l.scan.result.spec.grid.size() - 1;
  bool ok = true;
  std::string detail = fmt("B conversion at %g uW:", l.beam(top));
  for (int n : {-3, -2, -1, 1, 2, 3}) {
    ok = ok && l.conv(top, Channel::B, n) > 1e-6;
    detail += fmt(" %+d:%.1e", n, l.conv(top, Channel::B, n));
  }
  detail += fmt("; at %g uW:", l.beam(0));
  for (int n : {-3, -2, -1, 1, 2, 3}) {
    const double c = l.conv(0, Channel::B, n);
    ok = ok && (std::abs(n) == 1 ? c > 1e-6 : c <= 1e-6);
    detail += fmt(" %+d:%.1e", n, c);
  }
  return {ok, detail + " (need all above 1e-6 at the top, only |n| = 1 at the bottom)"};
}

Outcome convergence() {
  const Experiment base = raman_preset();
  const double p_in = total_input_uw(base);
  auto outputs = [&](const Experiment& e) {
    const PropagationTrace t = run_experiment(e);
    std::vector<double> p(t.output_powers());
    for (double& v : p) v *= p_in;
    return p;
  };
  const auto ref = outputs(base);
  auto change = [&](const Experiment& e) {
    const auto p = outputs(e);
    double worst = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      worst = std::max(worst, std::abs(p[k] - ref[k]) / std::max(std::abs(ref[k]), 1e-6 * p_in));
    return worst;
  };
  Experiment m = base, z = base, v = base;
  m.solver.max_harmonic = 2 * (base.comb.max_order + 2);
  z.medium.n_z = 2 * base.medium.n_z;
  v.medium.n_v = 2 * base.medium.n_v - 1;
  const double dm = change(m), dz = change(z), dv = change(v);
  const double worst = std::max({dm, dz, dv});
  return {worst < 1e-4,
          fmt("relative change: M_rho x2 %.3e, n_z x2 %.3e, n_v x2 %.3e (need < 1e-4, floor "
              "1e-6 of input power)",
              dm, dz, dv)};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  reset_invariant_tally();
  reset_passivity_tally();
  std::vector<Outcome> results(13);
  auto run = [&](int id, const std::function<Outcome()>& f) {
    const auto start = clock::now();
    try {
      results[id] = f();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(clock::now() - start).count();
    results[id].detail += fmt(" [%.0f s]", s);
    log(fmt("criterion %d done: %s", id, results[id].detail.c_str()));
  };

  run(1, oracle_equivalence);
  run(3, beer_law);
  run(4, dark_state);
  run(6, eit_linewidth);
  run(7, raman_band);
  run(8, probe_properties);
  run(9, density_bands);
  Ladder ladder;
  run(10, [&] {
    ladder.scan = threshold_scan(
        {ScanVariable::power, {10.0, 30.0, 100.0, 300.0, 1000.0, 2000.0}, raman_preset()});
    return threshold(ladder);
  });
  run(11, [&] { return hierarchy(ladder); });
  run(12, convergence);

  const InvariantTally inv = invariant_tally();
  results[2] = {inv.checked > 0 && inv.violations == 0,
                fmt("%llu solved states checked, %llu violations",
                    static_cast<unsigned long long>(inv.checked),
                    static_cast<unsigned long long>(inv.violations))};
  const PassivityTally pas = passivity_tally();
  results[5] = {pas.steps > 0 && pas.violations == 0,
                fmt("%llu propagation steps, %llu with power growth above 1e-8, largest "
                    "relative growth %.3e",
                    static_cast<unsigned long long>(pas.steps),
                    static_cast<unsigned long long>(pas.violations), pas.max_growth)};

  const char* names[] = {"",
                         "oracle equivalence",
                         "state invariants",
                         "Beer's law anchor",
                         "dark-state limit",
                         "passivity",
                         "EIT linewidth law",
                         "Raman detuning band",
                         "probe detuning properties",
                         "optical density bands",
                         "threshold and linearity",
                         "sideband hierarchy",
                         "numerical convergence"};
  int failures = 0;
  for (int id = 1; id <= 12; ++id) {
    failures += results[id].pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", results[id].pass ? "PASS" : "FAIL", id, names[id],
                results[id].detail.c_str());
  }
  std::printf("%d of 12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
