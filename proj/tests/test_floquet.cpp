#include "phaseonium/error.hpp"
#include "phaseonium/floquet.hpp"

#include <doctest.h>

#include <random>

using namespace phaseonium;

namespace {

double distance(const FloquetState& a, const FloquetState& b) {
  double d = 0.0;
  for (int m = -a.max_harmonic; m <= a.max_harmonic; ++m)
    d = std::max(d, (a.harmonic(m) - b.harmonic(m)).cwiseAbs().maxCoeff());
  return d;
}

FieldComb lambda_pair(double omega) {
  FieldComb comb;
  comb = with_line(comb, Channel::A, 0, omega);
  comb = with_line(comb, Channel::A, 1, omega);
  return extend_comb(comb, 1);
}

/// Weak single probe on |2>-|3A> with every other transition switched off.
Complex two_level_ratio(double delta_a) {
  SchemeConfig cfg;
  cfg.weights = {0.0, 1.0, 0.0, 0.0};
  const LevelScheme s = build_level_scheme(cfg);
  FieldComb comb;
  comb.delta_a = delta_a;
  const double omega = 1e-4;
  comb = with_line(comb, Channel::A, 0, omega);
  return radiated_source(solve_floquet(s, comb, 0.0), s, Channel::A, 0) / omega;
}

}  // namespace

TEST_CASE("without fields the steady state is the equilibrium") {
  const LevelScheme s = build_level_scheme();
  FieldComb comb;
  comb = with_line(comb, Channel::A, 0, 0.0);
  comb = extend_comb(comb, 2);
  const FloquetState st = solve_floquet(s, comb, 17.0);
  for (int m = -st.max_harmonic; m <= st.max_harmonic; ++m)
    for (Eigen::Index i = 0; i < 6; ++i)
      for (Eigen::Index j = 0; j < 6; ++j) {
        const Complex expect = (m == 0 && i == j) ? Complex{s.p_eq()[i]} : Complex{};
        CHECK(std::abs(st.harmonic(m)(i, j) - expect) < 1e-14);
      }
  for (const Complex& src : radiated_sources(st, s, comb)) CHECK(src == Complex{});
}

TEST_CASE("resonant symmetric lambda pair pumps into the dark state") {
  // Each line also drives the other ground state one splitting off resonance, so the
  // excited population keeps an off-resonant floor of order (omega / splitting)^2.
  SchemeConfig cfg;
  cfg.gamma_12 = 0.0;
  cfg.gamma_t = 1e-6;
  const LevelScheme s = build_level_scheme(cfg);
  const double omega = 0.5;
  const FloquetState st = solve_floquet(s, lambda_pair(omega), 0.0);
  const double floor = std::pow(omega / s.ground_splitting_mhz(), 2);
  for (std::size_t e : s.excited_levels()) CHECK(st.harmonic(0)(e, e).real() < floor);
  // The |1> frame rotates with the comb spacing, so the Raman coherence is static.
  const Complex rho12 = st.harmonic(0)(s.index_of("1"), s.index_of("2"));
  CHECK(std::abs(rho12) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(rho12.real() < 0.0);
  for (const Complex& src : radiated_sources(st, s, lambda_pair(omega)))
    CHECK(std::abs(src) < 1e-4);
}

TEST_CASE("dark-state excited population falls with the square of the drive") {
  SchemeConfig cfg;
  cfg.gamma_12 = 0.0;
  cfg.gamma_t = 1e-6;
  const LevelScheme s = build_level_scheme(cfg);
  auto excited = [&](double omega) {
    return solve_floquet(s, lambda_pair(omega), 0.0).harmonic(0)(2, 2).real();
  };
  CHECK(excited(0.5) / excited(0.25) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("weak probe reproduces the two-level Lorentzian") {
  const double hw = 0.5 * 10.0 + 5.0;
  const Complex at_zero = two_level_ratio(0.0);
  CHECK(at_zero.imag() > 0.0);
  for (double d : {-40.0, -10.0, 3.0, 10.0, 25.0}) {
    const double expect = hw * hw / (hw * hw + d * d);
    CHECK(two_level_ratio(d).imag() / at_zero.imag() == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("real paired solver matches the complex reference") {
  const LevelScheme s = build_level_scheme();
  FieldComb comb = lambda_pair(7.0);
  comb = with_line(comb, Channel::B, 0, Complex{3.0, -1.0});
  comb.delta_3 = -120.0;
  comb.delta_r = 0.07;
  FloquetOptions complex_opt;
  complex_opt.method = FloquetMethod::complex_dense;
  CHECK(distance(solve_floquet(s, comb, -25.0), solve_floquet(s, comb, -25.0, complex_opt)) <
        1e-10);
}

TEST_CASE("harmonic solver agrees with time-domain integration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> omega(2.0, 20.0), detuning(-500.0, 500.0),
      phase(0.0, kTwoPi);
  SchemeConfig cfg;
  cfg.gamma_12 = 6.0;
  cfg.gamma_t = 6.0;
  const LevelScheme s = build_level_scheme(cfg);
  for (int draw = 0; draw < 3; ++draw) {
    FieldComb comb;
    comb.delta_a = detuning(rng);
    comb.delta_3 = detuning(rng);
    comb = with_line(comb, Channel::A, 0, std::polar(omega(rng), phase(rng)));
    comb = with_line(comb, Channel::A, 1, std::polar(omega(rng), phase(rng)));
    comb = with_line(comb, Channel::B, 0, std::polar(omega(rng), phase(rng)));
    comb = extend_comb(comb, 1);
    const double v = detuning(rng);
    FloquetOptions fo;
    fo.max_harmonic = 3;
    TimeDomainOptions to;
    to.max_harmonic = 3;
    const FloquetState a = solve_floquet(s, comb, v, fo);
    const FloquetState b = time_domain_reference(s, comb, v, minimum_settling_time(s),
                                                 0.5 * maximum_time_step(s, comb, v), to);
    CHECK(distance(a, b) < 1e-8);
  }
}

TEST_CASE("time-domain reference without fields stays at equilibrium") {
  const LevelScheme s = build_level_scheme();
  FieldComb comb;
  comb = with_line(comb, Channel::A, 0, 0.0);
  const FloquetState st = time_domain_reference(s, comb, 0.0, minimum_settling_time(s),
                                                maximum_time_step(s, comb, 0.0));
  for (std::size_t k = 0; k < 6; ++k)
    CHECK(std::abs(st.harmonic(0)(k, k) - s.p_eq()[k]) < 1e-12);
}

TEST_CASE("excited frame offset leaves sources unchanged") {
  const LevelScheme s = build_level_scheme();
  FieldComb comb = lambda_pair(4.0);
  comb.delta_a = 30.0;
  FloquetOptions shifted;
  shifted.excited_frame_offset = -1;
  const auto a = radiated_sources(solve_floquet(s, comb, 11.0), s, comb);
  const auto b = radiated_sources(solve_floquet(s, comb, 11.0, shifted), s, comb);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(a[k] - b[k]) < 1e-12);
}

TEST_CASE("solved states satisfy the invariants and broken ones are caught") {
  const LevelScheme s = build_level_scheme();
  FieldComb comb = lambda_pair(9.0);
  comb = with_line(comb, Channel::B, 1, 4.0);
  FloquetState st = solve_floquet(s, comb, 40.0);
  CHECK(state_invariant_violation(st).empty());
  st.harmonic(1)(0, 1) += 1e-3;
  CHECK_FALSE(state_invariant_violation(st).empty());
  st = solve_floquet(s, comb, 40.0);
  st.harmonic(0)(0, 0) += 1e-3;
  CHECK_FALSE(state_invariant_violation(st).empty());
}

TEST_CASE("truncation check accepts a converged solve") {
  const LevelScheme s = build_level_scheme();
  FloquetOptions fo;
  fo.check_truncation = true;
  fo.max_harmonic = 6;
  CHECK_NOTHROW(solve_floquet(s, lambda_pair(2.0), 0.0, fo));
}

TEST_CASE("a ground state without relaxation is rejected") {
  SchemeConfig cfg;
  cfg.gamma_12 = 0.0;
  cfg.gamma_t = 0.0;
  try {
    solve_floquet(build_level_scheme(cfg), lambda_pair(1.0), 0.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DomainError);
  }
}
