#include "phaseonium/doppler.hpp"
#include "phaseonium/error.hpp"

#include "kernels/pole_expansion.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace phaseonium;

namespace {

FieldComb small_comb(double omega) {
  FieldComb comb;
  comb.delta_a = 12.0;
  comb.delta_3 = -150.0;
  comb = with_line(comb, Channel::A, 0, omega);
  comb = with_line(comb, Channel::A, 1, Complex{0.7 * omega, 0.3 * omega});
  comb = with_line(comb, Channel::B, 0, Complex{0.5 * omega, -0.2 * omega});
  return extend_comb(comb, 1);
}

double relative_distance(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double d = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    d = std::max(d, std::abs(a[k] - b[k]));
    scale = std::max(scale, std::abs(b[k]));
  }
  return d / scale;
}

}  // namespace

TEST_CASE("no Doppler width gives a single node") {
  const VelocityGrid g = velocity_nodes(0.0, 1);
  REQUIRE(g.nodes.size() == 1);
  CHECK(g.nodes[0].v_shift == 0.0);
  CHECK(g.nodes[0].weight == 1.0);
}

TEST_CASE("Gauss-Hermite nodes reproduce the Gaussian moments") {
  const VelocityGrid g = velocity_nodes(1000.0, 33);
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& n : g.nodes) w += n.weight, m1 += n.weight * n.v_shift,
                                 m2 += n.weight * n.v_shift * n.v_shift;
  CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m1) < 1e-9);
  CHECK(m2 == doctest::Approx(1000.0 * 1000.0 / (8.0 * std::log(2.0))).epsilon(1e-6));
  CHECK(m2 == doctest::Approx(180337.0).epsilon(1e-5));
}

TEST_CASE("even node counts are rejected") {
  try {
    velocity_nodes(1000.0, 64);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EvenNodeCount);
  }
}

TEST_CASE("averaging a constant or an odd function") {
  const VelocityGrid g = velocity_nodes(1000.0, 65);
  std::vector<Complex> c(g.nodes.size(), Complex{2.5, -1.0}), odd;
  for (const auto& n : g.nodes) odd.push_back(Complex{n.v_shift, std::pow(n.v_shift, 3) * 1e-6});
  CHECK(std::abs(doppler_average(c, g) - Complex{2.5, -1.0}) < 1e-13);
  CHECK(std::abs(doppler_average(odd, g)) < 1e-12 * 1000.0);
  CHECK_THROWS_AS(doppler_average(std::vector<Complex>(3), g), Error);
}

TEST_CASE("Faddeeva function reference values and symmetry") {
  CHECK(std::abs(faddeeva_w({1.0, 1.0}) - Complex{0.30474420525691259, 0.20821893820283162}) <
        1e-13);
  CHECK(std::abs(faddeeva_w({0.0, 2.0}) - Complex{0.25539567631050574, 0.0}) < 1e-13);
  CHECK(std::abs(faddeeva_w({0.0, 0.0}) - 1.0) < 1e-15);
  for (Complex z : {Complex{3.7, 0.2}, Complex{-0.4, 8.0}, Complex{12.0, 0.01}})
    CHECK(std::abs(faddeeva_w(-std::conj(z)) - std::conj(faddeeva_w(z))) < 1e-13);
}

TEST_CASE("Gaussian resolvent matches direct integration of a Lorentzian line") {
  const double sigma = doppler_sigma(1000.0);
  for (Complex p : {Complex{0.0, 10.0}, Complex{350.0, 25.0}, Complex{-90.0, -4.0}}) {
    // Trapezoid over +-12 sigma with spacing far below Im p.
    const int n = 400001;
    const double h = 24.0 * sigma / (n - 1);
    Complex sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = -12.0 * sigma + i * h;
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      sum += w * std::exp(-0.5 * v * v / (sigma * sigma)) / (v - p);
    }
    sum *= h / (std::sqrt(2.0 * M_PI) * sigma);
    CHECK(std::abs(gaussian_resolvent(p, sigma) - sum) < 1e-7 * std::abs(sum));
  }
}

TEST_CASE("exact velocity average matches dense quadrature") {
  const LevelScheme s = build_level_scheme();
  const FieldComb comb = small_comb(6.0);
  const auto exact = doppler_average_state(s, comb, 300.0);
  CHECK(exact.expansion_error >= 0.0);
  CHECK(exact.expansion_error < 1e-8);
  DopplerOptions q;
  q.method = DopplerMethod::quadrature;
  q.grid = uniform_nodes(300.0, 2001);
  CHECK(relative_distance(exact.sources, doppler_average_state(s, comb, 300.0, q).sources) <
        1e-6);
  CHECK(state_invariant_violation(exact.state).empty());
}

TEST_CASE("exact average falls back to quadrature when the expansion check fails") {
  const LevelScheme s = build_level_scheme();
  const FieldComb comb = small_comb(4.0);
  DopplerOptions strict;
  strict.expansion_tolerance = 0.0;
  const auto fallback = doppler_average_state(s, comb, 300.0, strict);
  CHECK(fallback.expansion_error == -1.0);
  CHECK(relative_distance(fallback.sources, doppler_average_state(s, comb, 300.0).sources) <
        1e-6);
}

TEST_CASE("zero Doppler width reduces to the resting atom") {
  const LevelScheme s = build_level_scheme();
  const FieldComb comb = small_comb(3.0);
  const auto avg = doppler_average_state(s, comb, 0.0);
  CHECK(relative_distance(avg.sources, radiated_sources(solve_floquet(s, comb, 0.0), s, comb)) <
        1e-12);
}

TEST_CASE("SIMD pole expansion matches the baseline kernel") {
  using namespace kernels;
  if (!variant_available(Variant::avx2)) return;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int size : {5, 17, 64}) {
    Eigen::MatrixXd m(size, size);
    Eigen::VectorXd rhs(size);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs(i) = g(rng);
    const auto a = expand(m, rhs, Variant::baseline);
    const auto b = expand(m, rhs, Variant::avx2);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    for (Complex z : {Complex{0.3, 1.1}, Complex{-2.0, 0.5}}) {
      const Eigen::VectorXcd ra = a.vectors * (a.coeff.array() / (a.lambda.array() + z)).matrix();
      const Eigen::VectorXcd rb = b.vectors * (b.coeff.array() / (b.lambda.array() + z)).matrix();
      CHECK((ra - rb).norm() < 1e-10 * ra.norm());
    }
  }
}
