#include "phaseonium/floquet.hpp"

#include "harmonic_system.hpp"
#include "phaseonium/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

namespace phaseonium {

namespace {

constexpr double kMinRcond = 1e-15;

void require_relaxing_ground(const LevelScheme& scheme) {
  if (!(scheme.gamma_12() + scheme.gamma_t() > 0.0))
    throw Error(ErrorKind::DomainError,
                "gamma_12 + gamma_t must be > 0 for a unique steady state");
}

[[noreturn]] void singular(double rcond) {
  std::ostringstream msg;
  msg << "harmonic system is singular (rcond = " << rcond << ")";
  throw Error(ErrorKind::SingularSystem, msg.str());
}

FloquetState solve_once(const LevelScheme& scheme, const FieldComb& comb, double v_shift,
                        int max_harmonic, const FloquetOptions& options) {
  const detail::HarmonicSystem system(scheme, comb, max_harmonic, options.excited_frame_offset);
  if (options.method == FloquetMethod::complex_dense) {
    CMatrix a;
    Eigen::VectorXcd b;
    system.assemble_complex(v_shift, a, b);
    const Eigen::PartialPivLU<CMatrix> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > kMinRcond)) singular(rcond);
    FloquetState state = system.unpack_complex(lu.solve(b));
    state.rcond = rcond;
    return state;
  }
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  system.assemble_real(v_shift, a, b);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > kMinRcond)) singular(rcond);
  FloquetState state = system.unpack_real(lu.solve(b));
  state.rcond = rcond;
  return state;
}

}  // namespace

std::string state_invariant_violation(const FloquetState& state, double tolerance) {
  std::ostringstream msg;
  const int m_max = state.max_harmonic;
  for (int m = 0; m <= m_max; ++m) {
    const CMatrix& up = state.harmonic(m);
    const CMatrix& down = state.harmonic(-m);
    const double mismatch = (down - up.adjoint()).cwiseAbs().maxCoeff();
    if (!(mismatch <= tolerance)) {
      msg << "rho^(-" << m << ") differs from rho^(" << m << ")^dagger by " << mismatch;
      return msg.str();
    }
    const Complex trace = up.trace();
    const double expected = m == 0 ? 1.0 : 0.0;
    if (!(std::abs(trace - expected) <= tolerance)) {
      msg << "trace of rho^(" << m << ") is " << trace << ", expected " << expected;
      return msg.str();
    }
  }
  const CMatrix& rho0 = state.harmonic(0);
  for (Eigen::Index i = 0; i < rho0.rows(); ++i) {
    const double p = rho0(i, i).real();
    if (!(p >= -tolerance && p <= 1.0 + tolerance)) {
      msg << "population of level " << i << " is " << p;
      return msg.str();
    }
  }
  return {};
}

namespace {

std::atomic<std::uint64_t> g_checked{0};
std::atomic<std::uint64_t> g_violations{0};

}  // namespace

void detail::record_invariants(const FloquetState& state) {
  ++g_checked;
  if (!state_invariant_violation(state).empty()) ++g_violations;
}

InvariantTally invariant_tally() { return {g_checked.load(), g_violations.load()}; }

void reset_invariant_tally() {
  g_checked = 0;
  g_violations = 0;
}

FloquetState solve_floquet(const LevelScheme& scheme, const FieldComb& comb, double v_shift,
                           const FloquetOptions& options) {
  require_relaxing_ground(scheme);
  const int m = options.max_harmonic.value_or(comb.max_order + 2);
  FloquetState state = solve_once(scheme, comb, v_shift, m, options);
  detail::record_invariants(state);
  if (options.check_truncation) {
    const FloquetState wider = solve_once(scheme, comb, v_shift, m + 2, options);
    const auto narrow_src = radiated_sources(state, scheme, comb);
    const auto wide_src = radiated_sources(wider, scheme, comb);
    for (std::size_t s = 0; s < narrow_src.size(); ++s) {
      const double scale = std::max(std::abs(wide_src[s]), 1e-10);
      if (std::abs(narrow_src[s] - wide_src[s]) > 1e-6 * scale) {
        const auto& line = comb.lines[s];
        throw Error(ErrorKind::TruncationNotConverged,
                    std::string("source of line ") + to_string(line.channel) + "_" +
                        std::to_string(line.n) + " moved when raising the truncation to " +
                        std::to_string(m + 2));
      }
    }
  }
  return state;
}

Complex radiated_source(const FloquetState& state, const LevelScheme& scheme, Channel channel,
                        int n) {
  if (std::abs(n) > state.comb_order)
    throw Error(ErrorKind::UnknownLine, std::string("line ") + to_string(channel) + "_" +
                                            std::to_string(n) + " is outside the comb");
  Complex sum{};
  for (const auto& t : scheme.transitions()) {
    if (t.channel != channel) continue;
    const int m = n - scheme.ground_order(t.ground) - state.frame.excited_offset;
    if (std::abs(m) > state.max_harmonic) continue;
    sum += t.weight * state.harmonic(m)(t.excited, t.ground);
  }
  return sum;
}

std::vector<Complex> radiated_sources(const FloquetState& state, const LevelScheme& scheme,
                                      const FieldComb& comb) {
  std::vector<Complex> out;
  out.reserve(comb.lines.size());
  for (const auto& line : comb.lines)
    out.push_back(radiated_source(state, scheme, line.channel, line.n));
  return out;
}

double minimum_settling_time(const LevelScheme& scheme) {
  require_relaxing_ground(scheme);
  return 20.0 / std::min(scheme.gamma_12() + scheme.gamma_t(), scheme.gamma_e());
}

namespace {

double generator_bound(const detail::HarmonicSystem& system, const LevelScheme& scheme,
                       double v_shift) {
  double h_max = 0.0;
  for (int i = 0; i < system.levels(); ++i)
    h_max = std::max(h_max, std::abs(system.energy(i, v_shift)));
  double drive = 0.0;
  int k_max = 0;
  for (const auto& c : system.couplings()) {
    drive += std::abs(c.value);
    k_max = std::max(k_max, std::abs(c.k));
  }
  const double rates = kTwoPi * (scheme.gamma_e() + scheme.gamma_t() + scheme.gamma_12() +
                                 scheme.gamma_col());
  return 2.0 * h_max + k_max * system.omega() + drive + rates;
}

}  // namespace

double maximum_time_step(const LevelScheme& scheme, const FieldComb& comb, double v_shift) {
  const detail::HarmonicSystem system(scheme, comb, comb.max_order, 0);
  return 0.1 / generator_bound(system, scheme, v_shift);
}

FloquetState time_domain_reference(const LevelScheme& scheme, const FieldComb& comb,
                                   double v_shift, double t_end, double dt,
                                   const TimeDomainOptions& options) {
  const int m_out = options.max_harmonic.value_or(comb.max_order + 2);
  const detail::HarmonicSystem system(scheme, comb, m_out, options.excited_frame_offset);
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be > 0");
  const double bound = generator_bound(system, scheme, v_shift);
  if (dt * bound > 0.1) {
    std::ostringstream msg;
    msg << "dt = " << dt << " us exceeds 0.1 / " << bound << " rad/us";
    throw Error(ErrorKind::StepTooLarge, msg.str());
  }
  if (t_end < minimum_settling_time(scheme)) {
    std::ostringstream msg;
    msg << "t_end = " << t_end << " us is below the settling time "
        << minimum_settling_time(scheme) << " us";
    throw Error(ErrorKind::DomainError, msg.str());
  }

  const int n = system.levels();
  const double period = kTwoPi / system.omega();
  const int per_period = static_cast<int>(std::ceil(period / dt - 1e-9));
  const long periods = static_cast<long>(std::ceil(t_end / period - 1e-9));
  const double h = period / per_period;

  // Phasors exp(-i k w t) on the half-step lattice of one period.
  const auto& couplings = system.couplings();
  const int half_steps = 2 * per_period;
  std::vector<Complex> phasor(couplings.size() * half_steps);
  for (int s = 0; s < half_steps; ++s) {
    const double t = 0.5 * h * s;
    for (std::size_t c = 0; c < couplings.size(); ++c)
      phasor[s * couplings.size() + c] =
          couplings[c].value * std::polar(1.0, -couplings[c].k * system.omega() * t);
  }
  std::vector<double> energy(n);
  for (int i = 0; i < n; ++i) energy[i] = system.energy(i, v_shift);
  const auto& relax = system.relaxation();

  using Vec = std::vector<Complex>;
  auto rhs = [&](const Vec& rho, int half_step, Vec& out) {
    const Complex* hv = &phasor[(half_step % half_steps) * couplings.size()];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Complex acc = Complex{0.0, -(energy[i] - energy[j])} * rho[i * n + j];
        for (const auto& r : relax[i * n + j]) acc += r.rate * rho[r.k * n + r.l];
        out[i * n + j] = acc;
      }
    for (std::size_t c = 0; c < couplings.size(); ++c) {
      const int a = couplings[c].row, b = couplings[c].col;
      const Complex mi_h{hv[c].imag(), -hv[c].real()};  // -i H_ab
      for (int j = 0; j < n; ++j) out[a * n + j] += mi_h * rho[b * n + j];
      for (int i = 0; i < n; ++i) out[i * n + b] -= mi_h * rho[i * n + a];
    }
  };

  Vec rho(n * n, Complex{}), k1(n * n), k2(n * n), k3(n * n), k4(n * n), tmp(n * n);
  for (int i = 0; i < n; ++i) rho[i * n + i] = scheme.p_eq()[i];

  FloquetState state;
  state.max_harmonic = m_out;
  state.comb_order = comb.max_order;
  state.frame = system.frame();
  state.harmonics.assign(2 * m_out + 1, CMatrix::Zero(n, n));

  const long total = periods * per_period;
  const long last_start = total - per_period;
  for (long step = 0; step < total; ++step) {
    const int s = static_cast<int>(step % per_period);
    if (step >= last_start) {
      for (int m = -m_out; m <= m_out; ++m) {
        const Complex phase = std::polar(1.0 / per_period, m * system.omega() * h * s);
        auto& target = state.harmonic(m);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) target(i, j) += phase * rho[i * n + j];
      }
    }
    rhs(rho, 2 * s, k1);
    for (int q = 0; q < n * n; ++q) tmp[q] = rho[q] + 0.5 * h * k1[q];
    rhs(tmp, 2 * s + 1, k2);
    for (int q = 0; q < n * n; ++q) tmp[q] = rho[q] + 0.5 * h * k2[q];
    rhs(tmp, 2 * s + 1, k3);
    for (int q = 0; q < n * n; ++q) tmp[q] = rho[q] + h * k3[q];
    rhs(tmp, 2 * s + 2, k4);
    for (int q = 0; q < n * n; ++q)
      rho[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
  }
  return state;
}

}  // namespace phaseonium
