#include "phaseonium/cli_io.hpp"

#include "phaseonium/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace phaseonium {

namespace {

using nlohmann::json;
using Keys = std::initializer_list<const char*>;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void domain(const std::string& path, const std::string& why) {
  throw Error(ErrorKind::DomainError, path + ": " + why);
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) domain(path.empty() ? "<root>" : path, "expected an object");
}

void check_keys(const json& j, const std::string& path, Keys allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw Error(ErrorKind::UnknownKey, join(path, item.key()));
  }
}

void read(const json& j, const std::string& path, const char* key, double& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number()) domain(join(path, key), "expected a number");
  out = v.get<double>();
}

void read(const json& j, const std::string& path, const char* key, int& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_number_integer()) {
    out = v.get<int>();
    return;
  }
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
      std::abs(v.get<double>()) < 1e9) {
    out = static_cast<int>(v.get<double>());
    return;
  }
  domain(join(path, key), "expected an integer");
}

void read(const json& j, const std::string& path, const char* key, std::string& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_string()) domain(join(path, key), "expected a string");
  out = v.get<std::string>();
}

void read(const json& j, const std::string& path, const char* key, std::optional<double>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read(j, path, key, v);
  out = v;
}

void read(const json& j, const std::string& path, const char* key, std::optional<int>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  int v = 0;
  read(j, path, key, v);
  out = v;
}

void read(const json& j, const std::string& path, const char* key,
          std::map<std::string, double>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string p = join(path, key);
  require_object(v, p);
  out.clear();
  for (const auto& item : v.items()) {
    if (!item.value().is_number()) domain(join(p, item.key()), "expected a number");
    out[item.key()] = item.value().get<double>();
  }
}

Channel parse_channel(const json& v, const std::string& path) {
  if (v.is_string()) {
    if (v.get<std::string>() == "A") return Channel::A;
    if (v.get<std::string>() == "B") return Channel::B;
  }
  domain(path, "expected \"A\" or \"B\"");
}

void read_scheme(const json& j, SchemeConfig& s) {
  const std::string path = "scheme";
  require_object(j, path);
  check_keys(j, path, {"ground_splitting_mhz", "excited_splitting_mhz", "gamma_e", "gamma_12",
                       "gamma_t", "gamma_col", "branching", "p_eq", "weights"});
  read(j, path, "ground_splitting_mhz", s.ground_splitting_mhz);
  read(j, path, "excited_splitting_mhz", s.excited_splitting_mhz);
  read(j, path, "gamma_e", s.gamma_e);
  read(j, path, "gamma_12", s.gamma_12);
  read(j, path, "gamma_t", s.gamma_t);
  read(j, path, "gamma_col", s.gamma_col);
  read(j, path, "branching", s.branching);
  read(j, path, "p_eq", s.p_eq);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    const std::string p = "scheme.weights";
    require_object(w, p);
    check_keys(w, p, {"upper_1", "upper_2", "lower_1", "lower_2"});
    read(w, p, "upper_1", s.weights.upper_1);
    read(w, p, "upper_2", s.weights.upper_2);
    read(w, p, "lower_1", s.weights.lower_1);
    read(w, p, "lower_2", s.weights.lower_2);
  }
}

void read_comb(const json& j, CombSpec& c) {
  const std::string path = "comb";
  require_object(j, path);
  check_keys(j, path, {"delta_a", "delta_r", "delta_3", "max_order", "inputs"});
  read(j, path, "delta_a", c.delta_a);
  read(j, path, "delta_r", c.delta_r);
  read(j, path, "delta_3", c.delta_3);
  read(j, path, "max_order", c.max_order);
  if (j.contains("inputs")) {
    const json& list = j.at("inputs");
    if (!list.is_array()) domain("comb.inputs", "expected an array");
    c.inputs.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = "comb.inputs[" + std::to_string(i) + "]";
      const json& b = list[i];
      require_object(b, p);
      check_keys(b, p, {"channel", "n", "power_uw"});
      for (const char* k : {"channel", "n", "power_uw"})
        if (!b.contains(k)) domain(join(p, k), "missing");
      InputBeam beam{parse_channel(b.at("channel"), join(p, "channel")), 0, 0.0};
      read(b, p, "n", beam.n);
      read(b, p, "power_uw", beam.power_uw);
      c.inputs.push_back(beam);
    }
  }
}

void read_medium(const json& j, MediumSpec& m) {
  const std::string path = "medium";
  require_object(j, path);
  check_keys(j, path, {"tau", "fwhm_doppler", "n_v", "n_z", "cell_length_mm"});
  read(j, path, "tau", m.tau);
  read(j, path, "fwhm_doppler", m.fwhm_doppler);
  read(j, path, "n_v", m.n_v);
  read(j, path, "n_z", m.n_z);
  read(j, path, "cell_length_mm", m.cell_length_mm);
}

void read_calibration(const json& j, IntensityCalibration& c) {
  const std::string path = "calibration";
  require_object(j, path);
  check_keys(j, path, {"i_sat", "effective_area"});
  read(j, path, "i_sat", c.i_sat);
  read(j, path, "effective_area", c.effective_area);
}

void read_solver(const json& j, SolverSpec& s) {
  const std::string path = "solver";
  require_object(j, path);
  check_keys(j, path, {"max_harmonic", "doppler"});
  read(j, path, "max_harmonic", s.max_harmonic);
  if (j.contains("doppler")) {
    std::string m;
    read(j, path, "doppler", m);
    if (m == "exact") s.doppler = DopplerMethod::exact;
    else if (m == "quadrature") s.doppler = DopplerMethod::quadrature;
    else domain("solver.doppler", "expected \"exact\" or \"quadrature\"");
  }
}

void read_scan(const json& j, std::optional<ScanSection>& out) {
  const std::string path = "scan";
  if (j.is_null()) {
    out.reset();
    return;
  }
  require_object(j, path);
  check_keys(j, path, {"variable", "grid", "range"});
  ScanSection s = out.value_or(ScanSection{});
  if (j.contains("variable")) {
    std::string name;
    read(j, path, "variable", name);
    const auto v = scan_variable_from_string(name);
    if (!v) domain("scan.variable", "expected one of delta_R, delta_3, tau, power");
    s.variable = *v;
  }
  if (j.contains("grid") && j.contains("range"))
    domain("scan", "give either grid or range, not both");
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (!g.is_array()) domain("scan.grid", "expected an array");
    s.grid.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].is_number()) domain("scan.grid[" + std::to_string(i) + "]", "expected a number");
      s.grid.push_back(g[i].get<double>());
    }
  }
  if (j.contains("range")) {
    const json& r = j.at("range");
    const std::string p = "scan.range";
    require_object(r, p);
    check_keys(r, p, {"start", "stop", "count"});
    for (const char* k : {"start", "stop", "count"})
      if (!r.contains(k)) domain(join(p, k), "missing");
    double start = 0.0, stop = 0.0;
    int count = 0;
    read(r, p, "start", start);
    read(r, p, "stop", stop);
    read(r, p, "count", count);
    if (count < 1) domain("scan.range.count", "must be >= 1");
    if (count == 1 && start != stop) domain("scan.range.count", "must be >= 2 when start != stop");
    s.grid.clear();
    for (int i = 0; i < count; ++i)
      s.grid.push_back(count == 1 ? start : start + (stop - start) * i / (count - 1));
  }
  out = s;
}

void read_output(const json& j, OutputSpec& o) {
  const std::string path = "output";
  require_object(j, path);
  check_keys(j, path, {"path", "format", "spectrum_fsr_mhz"});
  read(j, path, "path", o.path);
  if (j.contains("format")) {
    std::string f;
    read(j, path, "format", f);
    if (f == "csv") o.format = OutputFormat::csv;
    else if (f == "json") o.format = OutputFormat::json;
    else domain("output.format", "expected \"csv\" or \"json\"");
  }
  read(j, path, "spectrum_fsr_mhz", o.spectrum_fsr_mhz);
  if (o.spectrum_fsr_mhz && !(*o.spectrum_fsr_mhz > 0.0))
    domain("output.spectrum_fsr_mhz", "must be > 0");
}

json experiment_json(const Experiment& e) {
  const SchemeConfig& s = e.scheme;
  json scheme = {{"ground_splitting_mhz", s.ground_splitting_mhz},
                 {"excited_splitting_mhz", s.excited_splitting_mhz},
                 {"gamma_e", s.gamma_e},
                 {"gamma_12", s.gamma_12},
                 {"gamma_t", s.gamma_t ? json(*s.gamma_t) : json(nullptr)},
                 {"gamma_col", s.gamma_col},
                 {"branching", s.branching},
                 {"p_eq", s.p_eq},
                 {"weights",
                  {{"upper_1", s.weights.upper_1},
                   {"upper_2", s.weights.upper_2},
                   {"lower_1", s.weights.lower_1},
                   {"lower_2", s.weights.lower_2}}}};
  json inputs = json::array();
  for (const InputBeam& b : e.comb.inputs)
    inputs.push_back({{"channel", to_string(b.channel)}, {"n", b.n}, {"power_uw", b.power_uw}});
  return {{"scheme", scheme},
          {"comb",
           {{"delta_a", e.comb.delta_a},
            {"delta_r", e.comb.delta_r},
            {"delta_3", e.comb.delta_3},
            {"max_order", e.comb.max_order},
            {"inputs", inputs}}},
          {"medium",
           {{"tau", e.medium.tau},
            {"fwhm_doppler", e.medium.fwhm_doppler},
            {"n_v", e.medium.n_v},
            {"n_z", e.medium.n_z},
            {"cell_length_mm", e.medium.cell_length_mm}}},
          {"calibration",
           {{"i_sat", e.calibration.i_sat}, {"effective_area", e.calibration.effective_area}}},
          {"solver",
           {{"max_harmonic",
             e.solver.max_harmonic ? json(*e.solver.max_harmonic) : json(nullptr)},
            {"doppler", e.solver.doppler == DopplerMethod::exact ? "exact" : "quadrature"}}}};
}

json config_json(const RunConfig& c) {
  json j = experiment_json(c.experiment);
  j["schema_version"] = c.schema_version;
  if (c.scan)
    j["scan"] = {{"variable", to_string(c.scan->variable)}, {"grid", c.scan->grid}};
  json out = {{"path", c.output.path},
              {"format", c.output.format == OutputFormat::csv ? "csv" : "json"}};
  out["spectrum_fsr_mhz"] =
      c.output.spectrum_fsr_mhz ? json(*c.output.spectrum_fsr_mhz) : json(nullptr);
  j["output"] = out;
  return j;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", v);
  return buf;
}

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::vector<double> trace_powers_uw(const std::vector<Complex>& fields, const Experiment& e) {
  const double gamma_e = e.scheme.gamma_e;
  std::vector<double> out;
  for (const Complex& f : fields)
    out.push_back(power_from_rabi(std::abs(f), e.calibration, gamma_e));
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text, const RunConfig& defaults) {
  RunConfig config = defaults;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return config;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream msg;
    msg << "line " << line << ", column " << col << ": " << e.what();
    throw Error(ErrorKind::SyntaxError, msg.str());
  }
  require_object(j, "");
  check_keys(j, "", {"schema_version", "scheme", "comb", "medium", "calibration", "solver",
                     "scan", "output"});
  if (j.contains("schema_version")) {
    read(j, "", "schema_version", config.schema_version);
    if (config.schema_version != kSchemaVersion)
      domain("schema_version", "unsupported version " + std::to_string(config.schema_version) +
                                   ", expected " + std::to_string(kSchemaVersion));
  }
  Experiment& e = config.experiment;
  if (j.contains("scheme")) read_scheme(j.at("scheme"), e.scheme);
  if (j.contains("comb")) read_comb(j.at("comb"), e.comb);
  if (j.contains("medium")) read_medium(j.at("medium"), e.medium);
  if (j.contains("calibration")) read_calibration(j.at("calibration"), e.calibration);
  if (j.contains("solver")) read_solver(j.at("solver"), e.solver);
  if (j.contains("scan")) read_scan(j.at("scan"), config.scan);
  if (j.contains("output")) read_output(j.at("output"), config.output);
  validate(e);
  if (config.scan) validate(scan_spec(config));
  return config;
}

RunConfig load_config(const std::string& path, const RunConfig& defaults) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), defaults);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + std::string(e.what()).substr(to_string(e.kind()).size() + 2));
  }
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

ScanSpec scan_spec(const RunConfig& config) {
  if (!config.scan) throw Error(ErrorKind::DomainError, "scan: section missing");
  return ScanSpec{config.scan->variable, config.scan->grid, config.experiment};
}

std::string line_label(Channel channel, int n) {
  return std::string(to_string(channel)) + "_" + std::to_string(n);
}

std::string scan_to_csv(const ScanResult& r) {
  std::string out = "variable";
  for (const LineKey& l : r.lines) out += "," + line_label(l.channel, l.n);
  out += ",total_A,total_B\n";
  for (std::size_t i = 0; i < r.spec.grid.size(); ++i) {
    out += number(r.spec.grid[i]);
    for (double p : r.powers[i]) out += "," + number(p);
    out += "," + number(r.total_a[i]) + "," + number(r.total_b[i]) + "\n";
  }
  return out;
}

std::string scan_to_json(const ScanResult& r) {
  json lines = json::array();
  for (const LineKey& l : r.lines) lines.push_back(line_label(l.channel, l.n));
  RunConfig c;
  c.experiment = r.spec.fixed;
  c.scan = ScanSection{r.spec.variable, r.spec.grid};
  json config = config_json(c);
  config.erase("output");
  json j = {{"schema_version", kSchemaVersion},
            {"variable", to_string(r.spec.variable)},
            {"unit", unit_of(r.spec.variable)},
            {"power_unit", "uW"},
            {"grid", r.spec.grid},
            {"lines", lines},
            {"powers", r.powers},
            {"total_A", r.total_a},
            {"total_B", r.total_b},
            {"halvings", r.halvings},
            {"config", config}};
  return j.dump(2) + "\n";
}

ScanResult scan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorKind::SyntaxError,
                "line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  try {
    const RunConfig c = parse_config(j.at("config").dump());
    ScanResult r;
    r.spec = scan_spec(c);
    for (const auto& label : j.at("lines")) {
      const std::string s = label.get<std::string>();
      r.lines.push_back({s.at(0) == 'A' ? Channel::A : Channel::B, std::stoi(s.substr(2))});
    }
    r.powers = j.at("powers").get<std::vector<std::vector<double>>>();
    r.total_a = j.at("total_A").get<std::vector<double>>();
    r.total_b = j.at("total_B").get<std::vector<double>>();
    r.halvings = j.at("halvings").get<std::vector<int>>();
    if (r.powers.size() != r.spec.grid.size() || r.total_a.size() != r.spec.grid.size() ||
        r.total_b.size() != r.spec.grid.size() || r.halvings.size() != r.spec.grid.size())
      throw Error(ErrorKind::LengthMismatch, "scan arrays disagree with the grid length");
    for (const auto& row : r.powers)
      if (row.size() != r.lines.size())
        throw Error(ErrorKind::LengthMismatch, "power row disagrees with the line count");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DomainError, std::string("scan file: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

void write_scan(const ScanResult& result, const std::string& path, OutputFormat format) {
  write_text(path, format == OutputFormat::csv ? scan_to_csv(result) : scan_to_json(result));
}

std::string trace_to_csv(const PropagationTrace& trace, const Experiment& experiment) {
  std::string out = "zeta";
  for (const CombLine& l : trace.lines) out += "," + line_label(l.channel, l.n);
  out += "\n";
  for (std::size_t i = 0; i < trace.zeta.size(); ++i) {
    out += number(trace.zeta[i]);
    for (double p : trace_powers_uw(trace.fields[i], experiment)) out += "," + number(p);
    out += "\n";
  }
  return out;
}

std::string trace_to_json(const PropagationTrace& trace, const Experiment& experiment) {
  json lines = json::array();
  for (const CombLine& l : trace.lines) lines.push_back(line_label(l.channel, l.n));
  json powers = json::array(), re = json::array(), im = json::array();
  for (const auto& f : trace.fields) {
    powers.push_back(trace_powers_uw(f, experiment));
    json r = json::array(), i = json::array();
    for (const Complex& z : f) r.push_back(z.real()), i.push_back(z.imag());
    re.push_back(r);
    im.push_back(i);
  }
  RunConfig c;
  c.experiment = experiment;
  json config = config_json(c);
  config.erase("output");
  json j = {{"schema_version", kSchemaVersion},
            {"power_unit", "uW"},
            {"zeta", trace.zeta},
            {"lines", lines},
            {"powers", powers},
            {"omega_re_mhz", re},
            {"omega_im_mhz", im},
            {"kappa_mhz", trace.kappa},
            {"halvings", trace.halvings},
            {"config", config}};
  return j.dump(2) + "\n";
}

std::string spectrum_to_csv(const PropagationTrace& trace, const Experiment& experiment,
                            double fsr_mhz) {
  if (!(fsr_mhz > 0.0)) throw Error(ErrorKind::DomainError, "output.spectrum_fsr_mhz: must be > 0");
  const LevelScheme scheme = build_level_scheme(experiment.scheme);
  const FieldComb comb = build_comb(experiment, scheme);
  const auto powers = trace_powers_uw(trace.fields.back(), experiment);
  std::string out = "# presentation transform: frequencies folded modulo fsr_mhz = " +
                    number(fsr_mhz) + "\n";
  out += "channel,n,frequency_mhz,folded_frequency_mhz,power_uw\n";
  for (std::size_t k = 0; k < trace.lines.size(); ++k) {
    const CombLine& l = trace.lines[k];
    const double f = line_frequency(comb, l.channel, l.n);
    const double folded = f - fsr_mhz * std::floor(f / fsr_mhz);
    out += std::string(to_string(l.channel)) + "," + std::to_string(l.n) + "," + number(f) + "," +
           number(folded) + "," + number(powers[k]) + "\n";
  }
  return out;
}

std::string fit_to_json(const EITFit& fit) {
  json peaks = json::array();
  for (const EitPeak& p : fit.peaks)
    peaks.push_back({{"intensity_mw_cm2", p.intensity},
                     {"center_mhz", p.center},
                     {"halfwidth_mhz", p.halfwidth}});
  json j = {{"schema_version", kSchemaVersion},
            {"gamma_fit_mhz", fit.gamma_fit},
            {"slope_c_mhz_per_mw_cm2", fit.slope_c},
            {"stark_slope_khz_per_mw_cm2", fit.stark_slope},
            {"r_squared", fit.r_squared},
            {"stark_r_squared", fit.stark_r_squared},
            {"peaks", peaks}};
  return j.dump(2) + "\n";
}

}  // namespace phaseonium
