#include "phaseonium/comb_field.hpp"

#include "phaseonium/error.hpp"

#include <algorithm>
#include <cmath>

namespace phaseonium {

namespace {

bool line_less(const CombLine& a, const CombLine& b) {
  if (a.channel != b.channel) return a.channel == Channel::A;
  return a.n < b.n;
}

void validate_calibration(const IntensityCalibration& cal) {
  if (!(cal.i_sat > 0.0) || !(cal.effective_area >= 0.0) || !std::isfinite(cal.i_sat))
    throw Error(ErrorKind::NonpositiveCalibration, "i_sat and effective_area must be > 0");
}

double area(const IntensityCalibration& cal) {
  validate_calibration(cal);
  return cal.effective_area > 0.0 ? cal.effective_area : default_effective_area();
}

}  // namespace

const CombLine* FieldComb::find(Channel channel, int n) const {
  for (const auto& line : lines)
    if (line.channel == channel && line.n == n) return &line;
  return nullptr;
}

Complex FieldComb::amplitude(Channel channel, int n) const {
  const CombLine* line = find(channel, n);
  return line ? line->omega_rabi : Complex{};
}

int FieldComb::occupied_order() const {
  int order = 0;
  for (const auto& line : lines) order = std::max(order, std::abs(line.n));
  return order;
}

double FieldComb::channel_weight(Channel channel) const {
  double sum = 0.0;
  for (const auto& line : lines)
    if (line.channel == channel) sum += std::norm(line.omega_rabi);
  return sum;
}

double default_effective_area() {
  const double radius_cm = 0.04;
  return M_PI * radius_cm * radius_cm;
}

IntensityCalibration default_calibration() {
  return IntensityCalibration{6.26, default_effective_area()};
}

FieldComb with_line(FieldComb comb, Channel channel, int n, Complex omega_rabi, LineRole role) {
  auto it = std::find_if(comb.lines.begin(), comb.lines.end(), [&](const CombLine& l) {
    return l.channel == channel && l.n == n;
  });
  if (it != comb.lines.end()) {
    it->omega_rabi = omega_rabi;
    it->role = role;
  } else {
    comb.lines.push_back({channel, n, omega_rabi, role});
    std::sort(comb.lines.begin(), comb.lines.end(), line_less);
  }
  comb.max_order = std::max(comb.max_order, std::abs(n));
  return comb;
}

double line_frequency(const FieldComb& comb, Channel channel, int n) {
  if (!comb.find(channel, n))
    throw Error(ErrorKind::UnknownLine, std::string("no line ") + to_string(channel) + "_" +
                                            std::to_string(n) + " in comb");
  const double base = channel == Channel::A ? comb.delta_a : comb.delta_3;
  return base + n * comb.spacing_mhz;
}

double intensity_from_power(double power_uw, const IntensityCalibration& cal) {
  if (!(power_uw >= 0.0)) throw Error(ErrorKind::DomainError, "power must be >= 0");
  return 1e-3 * power_uw / area(cal);
}

double rabi_from_power(double power_uw, const IntensityCalibration& cal, double gamma_e) {
  const double intensity = intensity_from_power(power_uw, cal);
  return gamma_e * std::sqrt(intensity / (2.0 * cal.i_sat));
}

double power_from_rabi(double rabi_mhz, const IntensityCalibration& cal, double gamma_e) {
  validate_calibration(cal);
  if (!(gamma_e > 0.0)) throw Error(ErrorKind::NonpositiveCalibration, "gamma_e must be > 0");
  const double ratio = rabi_mhz / gamma_e;
  return 2.0 * cal.i_sat * ratio * ratio * area(cal) * 1e3;
}

FieldComb extend_comb(const FieldComb& comb, int max_order) {
  if (max_order < comb.occupied_order() || max_order < 0)
    throw Error(ErrorKind::ShrinkNotAllowed,
                "cannot extend comb to order " + std::to_string(max_order) +
                    " below existing order " + std::to_string(comb.occupied_order()));
  FieldComb out = comb;
  out.max_order = std::max(comb.max_order, max_order);
  for (Channel c : {Channel::A, Channel::B})
    for (int n = -out.max_order; n <= out.max_order; ++n)
      if (!out.find(c, n)) out.lines.push_back({c, n, Complex{}, LineRole::generated});
  std::sort(out.lines.begin(), out.lines.end(), line_less);
  return out;
}

}  // namespace phaseonium
