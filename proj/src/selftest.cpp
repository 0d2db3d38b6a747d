#include "phaseonium/cli_io.hpp"
#include "phaseonium/doppler.hpp"
#include "phaseonium/error.hpp"
#include "phaseonium/floquet.hpp"

#include "kernels/pole_expansion.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <random>

namespace phaseonium {

namespace {

double max_harmonic_distance(const FloquetState& a, const FloquetState& b) {
  double d = 0.0;
  for (int m = -a.max_harmonic; m <= a.max_harmonic; ++m)
    d = std::max(d, (a.harmonic(m) - b.harmonic(m)).cwiseAbs().maxCoeff());
  return d;
}

FieldComb small_comb(double omega, double delta_r) {
  FieldComb comb;
  comb.delta_a = 12.0;
  comb.delta_r = delta_r;
  comb.delta_3 = -150.0;
  comb = with_line(comb, Channel::A, 0, Complex{omega, 0.0});
  comb = with_line(comb, Channel::A, 1, Complex{0.7 * omega, 0.3 * omega});
  comb = with_line(comb, Channel::B, 0, Complex{0.5 * omega, -0.2 * omega});
  return extend_comb(comb, 1);
}

struct Check {
  const char* name;
  std::function<double()> measure;  // returns the error
  double tolerance;
};

}  // namespace

int run_selftest(std::ostream& log) {
  const std::vector<Check> checks = {
      {"relaxation preserves trace",
       [] {
         const LevelScheme scheme = build_level_scheme();
         std::mt19937_64 rng(7);
         std::normal_distribution<double> g;
         double worst = 0.0;
         for (int t = 0; t < 20; ++t) {
           CMatrix a(scheme.size(), scheme.size());
           for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = Complex{g(rng), g(rng)};
           const CMatrix rho = a + a.adjoint();
           worst = std::max(worst, std::abs(relaxation_apply(scheme, rho).trace()));
         }
         return worst;
       },
       1e-12},
      {"hermitian real solver matches complex reference",
       [] {
         const LevelScheme scheme = build_level_scheme();
         const FieldComb comb = small_comb(6.0, 0.05);
         FloquetOptions real_opt, complex_opt;
         complex_opt.method = FloquetMethod::complex_dense;
         return max_harmonic_distance(solve_floquet(scheme, comb, 35.0, real_opt),
                                      solve_floquet(scheme, comb, 35.0, complex_opt));
       },
       1e-10},
      {"harmonic solver matches time-domain integration",
       [] {
         SchemeConfig cfg;
         cfg.gamma_12 = 8.0;
         cfg.gamma_t = 8.0;
         const LevelScheme scheme = build_level_scheme(cfg);
         const FieldComb comb = small_comb(8.0, 0.0);
         const double t_end = minimum_settling_time(scheme);
         const double dt = 0.5 * maximum_time_step(scheme, comb, 20.0);
         FloquetOptions fo;
         fo.max_harmonic = 3;
         TimeDomainOptions to;
         to.max_harmonic = 3;
         return max_harmonic_distance(solve_floquet(scheme, comb, 20.0, fo),
                                      time_domain_reference(scheme, comb, 20.0, t_end, dt, to));
       },
       1e-8},
      {"frame offset leaves sources unchanged",
       [] {
         const LevelScheme scheme = build_level_scheme();
         const FieldComb comb = small_comb(5.0, 0.0);
         FloquetOptions shifted;
         shifted.excited_frame_offset = 1;
         const auto a = radiated_sources(solve_floquet(scheme, comb, -40.0), scheme, comb);
         const auto b =
             radiated_sources(solve_floquet(scheme, comb, -40.0, shifted), scheme, comb);
         double d = 0.0;
         for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
         return d;
       },
       1e-12},
      {"exact Doppler average matches dense quadrature",
       [] {
         const LevelScheme scheme = build_level_scheme();
         const FieldComb comb = small_comb(6.0, 0.0);
         const double fwhm = 300.0;
         const auto exact = doppler_average_state(scheme, comb, fwhm).sources;
         DopplerOptions q;
         q.method = DopplerMethod::quadrature;
         q.grid = uniform_nodes(fwhm, 2001);
         const auto dense = doppler_average_state(scheme, comb, fwhm, q).sources;
         double d = 0.0, scale = 0.0;
         for (std::size_t k = 0; k < exact.size(); ++k) {
           d = std::max(d, std::abs(exact[k] - dense[k]));
           scale = std::max(scale, std::abs(dense[k]));
         }
         return d / scale;
       },
       1e-6},
      {"Faddeeva function at reference points",
       [] {
         const double a = std::abs(faddeeva_w({1.0, 1.0}) -
                                   Complex{0.30474420525691259, 0.20821893820283162});
         const double b = std::abs(faddeeva_w({0.0, 2.0}) - Complex{0.25539567631050574, 0.0});
         const double c = std::abs(faddeeva_w({0.0, 0.0}) - Complex{1.0, 0.0});
         return std::max({a, b, c});
       },
       1e-13},
      {"SIMD kernel matches baseline",
       [] {
         using namespace kernels;
         if (!variant_available(Variant::avx2)) return 0.0;
         std::mt19937_64 rng(3);
         std::normal_distribution<double> g;
         Eigen::MatrixXd m(40, 40);
         Eigen::VectorXd rhs(40);
         for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
         for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs(i) = g(rng);
         const auto a = expand(m, rhs, Variant::baseline);
         const auto b = expand(m, rhs, Variant::avx2);
         // Compare the reconstructed resolvent action, which is basis independent.
         const Complex z{0.3, 1.1};
         const Eigen::VectorXcd ra =
             a.vectors * (a.coeff.array() / (a.lambda.array() + z)).matrix();
         const Eigen::VectorXcd rb =
             b.vectors * (b.coeff.array() / (b.lambda.array() + z)).matrix();
         return (ra - rb).norm() / ra.norm();
       },
       1e-10},
      {"solved states satisfy invariants",
       [] {
         const LevelScheme scheme = build_level_scheme();
         const FieldComb comb = small_comb(9.0, 0.2);
         const auto why = state_invariant_violation(solve_floquet(scheme, comb, 15.0));
         return why.empty() ? 0.0 : 1.0;
       },
       0.0},
  };

  int failures = 0;
  for (const Check& check : checks) {
    double error = 0.0;
    std::string note;
    try {
      error = check.measure();
    } catch (const std::exception& e) {
      error = INFINITY;
      note = std::string(" (") + e.what() + ")";
    }
    const bool pass = error <= check.tolerance;
    failures += pass ? 0 : 1;
    log << (pass ? "PASS " : "FAIL ") << check.name << ": error " << error << " (tolerance "
        << check.tolerance << ")" << note << "\n";
  }
  return failures;
}

}  // namespace phaseonium
