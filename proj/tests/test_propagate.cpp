#include "phaseonium/error.hpp"
#include "phaseonium/propagate.hpp"
#include "phaseonium/scenarios.hpp"

#include <doctest.h>

#include <cmath>

using namespace phaseonium;

namespace {

Experiment weak_probe(double tau) {
  Experiment e = raman_preset();
  e.comb.inputs = {{Channel::A, 0, 1e-7}};
  e.comb.max_order = 1;
  e.medium.tau = tau;
  e.medium.n_z = 20;
  return e;
}

}  // namespace

TEST_CASE("zero optical density leaves the comb untouched") {
  Experiment e = raman_preset();
  e.medium.tau = 0.0;
  e.medium.n_z = 3;
  const LevelScheme s = build_level_scheme(e.scheme);
  const FieldComb in = build_comb(e, s);
  const PropagationTrace t = run_experiment(e);
  CHECK(t.kappa == 0.0);
  for (std::size_t k = 0; k < in.lines.size(); ++k)
    CHECK(t.fields.back()[k] == in.lines[k].omega_rabi);
}

TEST_CASE("a weak resonant probe follows Beer's law") {
  const double t1 = run_experiment(weak_probe(1.0)).transmission(Channel::A, 0);
  const double t2 = run_experiment(weak_probe(2.0)).transmission(Channel::A, 0);
  const double t3 = run_experiment(weak_probe(3.0)).transmission(Channel::A, 0);
  CHECK(std::abs(t1 - std::exp(-1.0)) < 1e-3);
  CHECK(std::abs(t3 - std::exp(-3.0)) < 1e-3);
  CHECK(std::log(t2) / std::log(t1) == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("calibration is independent of the optical density per unit tau") {
  const LevelScheme s = build_level_scheme();
  MediumSpec m;
  m.tau = 1.0;
  const CouplingCalibration a = calibrate_coupling(s, m);
  m.tau = 4.0;
  const CouplingCalibration b = calibrate_coupling(s, m);
  CHECK(b.kappa == doctest::Approx(4.0 * a.kappa).epsilon(1e-12));
  CHECK(a.chi.imag() > 0.0);
}

TEST_CASE("invalid media are rejected") {
  MediumSpec m;
  m.n_z = 0;
  CHECK_THROWS_AS(validate(m), Error);
  m = {};
  m.tau = -1.0;
  CHECK_THROWS_AS(validate(m), Error);
  m = {};
  m.n_v = 64;
  CHECK_THROWS_AS(validate(m), Error);
}

TEST_CASE("propagation never amplifies the total comb power") {
  reset_passivity_tally();
  Experiment e = raman_preset();
  e.comb.max_order = 2;
  e.medium.n_z = 10;
  const PropagationTrace t = run_experiment(e);
  for (std::size_t i = 1; i < t.powers.size(); ++i) {
    double before = 0.0, after = 0.0;
    for (double p : t.powers[i - 1]) before += p;
    for (double p : t.powers[i]) after += p;
    CHECK(after <= before * (1.0 + 1e-8));
  }
  const PassivityTally tally = passivity_tally();
  CHECK(tally.steps >= 10);
  CHECK(tally.violations == 0);
}
