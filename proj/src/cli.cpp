#include "phaseonium/cli_io.hpp"
#include "phaseonium/error.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace phaseonium {

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::string format;
  std::string grid;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_grid) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--out", o.out, "output file");
  cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  if (with_grid)
    cmd->add_option("--grid", o.grid, "comma list a,b,c or range start:stop:count");
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size())
      throw Error(ErrorKind::DomainError, "--grid: cannot read number '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(ErrorKind::DomainError, "--grid: expected start:stop:count");
    const double start = number(parts[0]), stop = number(parts[1]);
    const double count = number(parts[2]);
    if (count < 2 || std::floor(count) != count)
      throw Error(ErrorKind::DomainError, "--grid: count must be an integer >= 2");
    for (int i = 0; i < static_cast<int>(count); ++i)
      out.push_back(start + (stop - start) * i / (count - 1));
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  return out;
}

RunConfig load(const CommonOptions& o, const Experiment& preset) {
  RunConfig defaults;
  defaults.experiment = preset;
  RunConfig config = o.config.empty() ? defaults : load_config(o.config, defaults);
  if (!o.out.empty()) config.output.path = o.out;
  if (o.format == "csv") config.output.format = OutputFormat::csv;
  if (o.format == "json") config.output.format = OutputFormat::json;
  return config;
}

std::string default_path(const RunConfig& c, const std::string& stem) {
  if (!c.output.path.empty()) return c.output.path;
  return stem + (c.output.format == OutputFormat::csv ? ".csv" : ".json");
}

ScanSpec resolve_scan(const RunConfig& config, const CommonOptions& o, ScanVariable variable,
                      const std::vector<double>& fallback) {
  ScanSpec spec{variable, fallback, config.experiment};
  if (config.scan) {
    if (config.scan->variable != variable)
      throw Error(ErrorKind::DomainError, std::string("scan.variable: this subcommand scans ") +
                                              to_string(variable));
    spec.grid = config.scan->grid;
  }
  if (!o.grid.empty()) spec.grid = parse_grid(o.grid);
  validate(spec);
  return spec;
}

ScanProgress progress_printer(const char* name, std::size_t total) {
  auto done = std::make_shared<std::atomic<std::size_t>>(0);
  return [name, total, done](std::size_t index) {
    std::fprintf(stderr, "[%s] %zu/%zu done (grid point %zu)\n", name, ++*done, total, index);
  };
}

std::vector<double> range(double start, double stop, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(start + (stop - start) * i / (count - 1));
  return out;
}

int run_scan_command(const char* name, const CommonOptions& o, ScanVariable variable,
                     const Experiment& preset, const std::vector<double>& fallback) {
  const RunConfig config = load(o, preset);
  const ScanSpec spec = resolve_scan(config, o, variable, fallback);
  const std::string path = default_path(config, name);
  const ScanProgress progress = progress_printer(name, spec.grid.size());
  if (variable == ScanVariable::power) {
    const ThresholdScan t = threshold_scan(spec, progress);
    write_scan(t.result, path, config.output.format);
    std::ostringstream fit;
    fit.precision(17);
    fit << "{\n  \"log_log_slope\": " << t.log_log_slope << "\n}\n";
    write_text(path + ".fit.json", fit.str());
    std::fprintf(stderr, "[%s] log-log slope of first-order sidebands: %.6g\n", name,
                 t.log_log_slope);
  } else {
    write_scan(run_scan(spec, progress), path, config.output.format);
  }
  std::fprintf(stderr, "[%s] wrote %s\n", name, path.c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Raman sideband generation in a coherently prepared vapor"};
  app.require_subcommand(1);

  CommonOptions sim_o, raman_o, probe_o, density_o, power_o, fit_o;
  std::string spectrum;
  auto* simulate = app.add_subcommand("simulate", "propagate one configuration through the cell");
  add_common(simulate, sim_o, false);
  simulate->add_option("--spectrum", spectrum, "fold output frequencies: fsr=<MHz>");

  auto* raman = app.add_subcommand("scan-raman", "scan the Raman detuning delta_R (MHz)");
  add_common(raman, raman_o, true);
  auto* probe = app.add_subcommand("scan-probe", "scan the omega_3 detuning delta_3 (MHz)");
  add_common(probe, probe_o, true);
  auto* density = app.add_subcommand("scan-density", "scan the optical density tau");
  add_common(density, density_o, true);
  auto* power = app.add_subcommand("scan-power", "scan the input power per beam (uW)");
  add_common(power, power_o, true);

  auto* fit = app.add_subcommand("fit-eit", "EIT halfwidth against intensity");
  add_common(fit, fit_o, false);
  std::vector<double> fit_powers = {10.0, 20.0, 50.0, 100.0, 300.0, 700.0};
  double fit_span = 2.0, fit_baseline = 20.0, fit_tol = 1e-4;
  fit->add_option("--powers", fit_powers, "input power ladder per beam, uW")->delimiter(',');
  fit->add_option("--span", fit_span, "search half-span for the peak centre, MHz");
  fit->add_option("--baseline", fit_baseline, "detuning of the off-resonant baseline, MHz");
  fit->add_option("--tol", fit_tol, "detuning tolerance, MHz");

  auto* selftest = app.add_subcommand("selftest", "oracle equivalence and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      const RunConfig config = load(sim_o, raman_preset());
      std::optional<double> fsr = config.output.spectrum_fsr_mhz;
      if (!spectrum.empty()) {
        if (spectrum.rfind("fsr=", 0) != 0)
          throw Error(ErrorKind::DomainError, "--spectrum: expected fsr=<MHz>");
        try {
          fsr = std::stod(spectrum.substr(4));
        } catch (const std::exception&) {
          throw Error(ErrorKind::DomainError, "--spectrum: cannot read " + spectrum);
        }
        if (!(*fsr > 0.0)) throw Error(ErrorKind::DomainError, "--spectrum: fsr must be > 0");
      }
      Experiment e = config.experiment;
      validate(e);
      const LevelScheme scheme = build_level_scheme(e.scheme);
      PropagationOptions options = propagation_options(e);
      options.progress = [](double zeta) {
        std::fprintf(stderr, "[simulate] zeta = %.4f\n", zeta);
      };
      const PropagationTrace trace =
          propagate(build_comb(e, scheme), scheme, e.medium, e.calibration, options);
      const std::string path = default_path(config, "trace");
      write_text(path, config.output.format == OutputFormat::csv ? trace_to_csv(trace, e)
                                                                 : trace_to_json(trace, e));
      std::fprintf(stderr, "[simulate] wrote %s\n", path.c_str());
      if (fsr) {
        write_text(path + ".spectrum.csv", spectrum_to_csv(trace, e, *fsr));
        std::fprintf(stderr, "[simulate] wrote %s.spectrum.csv\n", path.c_str());
      }
      return 0;
    }
    if (raman->parsed())
      return run_scan_command("scan-raman", raman_o, ScanVariable::delta_r, raman_preset(),
                              range(-1.0, 1.0, 41));
    if (probe->parsed())
      return run_scan_command("scan-probe", probe_o, ScanVariable::delta_3, probe_preset(),
                              range(-16000.0, 16000.0, 65));
    if (density->parsed())
      return run_scan_command("scan-density", density_o, ScanVariable::tau, density_preset(),
                              range(0.0, 20.0, 21));
    if (power->parsed())
      return run_scan_command("scan-power", power_o, ScanVariable::power, raman_preset(),
                              {10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0});
    if (fit->parsed()) {
      RunConfig config = load(fit_o, raman_preset());
      Experiment base = config.experiment;
      std::erase_if(base.comb.inputs, [](const InputBeam& b) { return b.channel == Channel::B; });
      std::vector<EitPeak> peaks;
      for (double p : fit_powers) {
        Experiment e = base;
        for (auto& b : e.comb.inputs) b.power_uw = p;
        peaks.push_back(bisect_eit_peak(e, fit_span, fit_baseline, fit_tol));
        std::fprintf(stderr, "[fit-eit] %g uW: halfwidth %.6g MHz, centre %.6g MHz\n", p,
                     peaks.back().halfwidth, peaks.back().center);
      }
      const std::string path = config.output.path.empty() ? "eit_fit.json" : config.output.path;
      write_text(path, fit_to_json(fit_eit_linewidth(peaks)));
      std::fprintf(stderr, "[fit-eit] wrote %s\n", path.c_str());
      return 0;
    }
    if (selftest->parsed()) return run_selftest(std::cout) == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return is_numerical(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace phaseonium
