#pragma once

#include "phaseonium/propagate.hpp"
#include "phaseonium/scenarios.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phaseonium {

inline constexpr int kSchemaVersion = 1;

enum class OutputFormat { csv, json };

struct OutputSpec {
  std::string path;  // empty: subcommand default
  OutputFormat format = OutputFormat::csv;
  /// Fold line frequencies modulo this free spectral range in the spectrum file, MHz.
  std::optional<double> spectrum_fsr_mhz;

  bool operator==(const OutputSpec&) const = default;
};

struct ScanSection {
  ScanVariable variable = ScanVariable::delta_r;
  std::vector<double> grid;

  bool operator==(const ScanSection&) const = default;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  Experiment experiment = raman_preset();
  std::optional<ScanSection> scan;
  OutputSpec output;

  bool operator==(const RunConfig&) const = default;
};

/// Parses a JSON run configuration over the given defaults. An empty document yields
/// the defaults. Errors: SyntaxError (line, column), UnknownKey (path), DomainError (path).
RunConfig parse_config(const std::string& text, const RunConfig& defaults = {});
RunConfig load_config(const std::string& path, const RunConfig& defaults = {});
/// Canonical JSON of a configuration; parse_config(config_to_json(c)) == c.
std::string config_to_json(const RunConfig& config);

ScanSpec scan_spec(const RunConfig& config);

/// "A_-1" style column label.
std::string line_label(Channel channel, int n);

std::string scan_to_csv(const ScanResult& result);
std::string scan_to_json(const ScanResult& result);
ScanResult scan_from_json(const std::string& text);
void write_scan(const ScanResult& result, const std::string& path, OutputFormat format);

/// Per-position line powers in uW.
std::string trace_to_csv(const PropagationTrace& trace, const Experiment& experiment);
std::string trace_to_json(const PropagationTrace& trace, const Experiment& experiment);

/// Output lines with absolute and folded frequency, as a spectrum analyzer with the
/// given free spectral range would show them.
std::string spectrum_to_csv(const PropagationTrace& trace, const Experiment& experiment,
                            double fsr_mhz);

std::string fit_to_json(const EITFit& fit);

/// Writes text to path; IoError on failure.
void write_text(const std::string& path, const std::string& text);

/// Oracle-equivalence and invariant checks; one line per check on log. Returns the
/// number of failures.
int run_selftest(std::ostream& log);

/// Command-line entry point. Exit codes: 0 success, 1 invalid input, 2 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace phaseonium
