#include "phaseonium/doppler.hpp"

#include "harmonic_system.hpp"
#include "kernels/pole_expansion.hpp"
#include "phaseonium/error.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <optional>
#include <sstream>

namespace phaseonium {

namespace {

constexpr double kSqrtPi = 1.7724538509055160273;

/// Neumaier summation of one real stream.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// Weideman's rational expansion, N = 40 terms.
constexpr int kWeidemanTerms = 40;

struct Weideman {
  std::array<double, kWeidemanTerms> a{};
  double l = 0.0;

  Weideman() {
    const int n = kWeidemanTerms, m = 2 * n, m2 = 2 * m;
    l = std::sqrt(n / std::sqrt(2.0));
    std::vector<double> f(m2, 0.0);
    for (int k = -m + 1; k < m; ++k) {
      const double t = l * std::tan(k * M_PI / (2.0 * m));
      f[k + m] = std::exp(-t * t) * (l * l + t * t);  // f[0] stays 0
    }
    std::vector<double> shifted(m2);
    for (int i = 0; i < m2; ++i) shifted[i] = f[(i + m2 / 2) % m2];
    for (int j = 1; j <= n; ++j) {
      double re = 0.0;
      for (int i = 0; i < m2; ++i) re += shifted[i] * std::cos(2.0 * M_PI * i * j / m2);
      a[n - j] = re / m2;
    }
  }
};

const Weideman& weideman() {
  static const Weideman w;
  return w;
}

Complex faddeeva_upper(Complex z) {
  if (std::abs(z) >= 8.0) {
    Complex r{};
    for (int k = 20; k >= 1; --k) r = (0.5 * k) / (z - r);
    return Complex{0.0, 1.0 / kSqrtPi} / (z - r);
  }
  const auto& w = weideman();
  const Complex iz{-z.imag(), z.real()};
  const Complex zz = (w.l + iz) / (w.l - iz);
  Complex p{};
  for (double c : w.a) p = p * zz + c;
  const Complex d = w.l - iz;
  return 2.0 * p / (d * d) + (1.0 / kSqrtPi) / d;
}

/// <1/(1 + v lambda)> and <v/(1 + v lambda)> over N(0, sigma^2).
std::pair<Complex, Complex> pole_moments(Complex lambda, double sigma) {
  const Complex mu = sigma * lambda;
  if (std::abs(mu) < 0.05) {
    const Complex mu2 = mu * mu;
    Complex f1{1.0}, f2{1.0}, term{1.0};
    double odd = 1.0;  // (2k+1)!!
    for (int k = 1; k <= 12; ++k) {
      term *= mu2;
      const double prev = odd;
      odd *= 2 * k + 1;
      f1 += prev * term;
      f2 += odd * term;
    }
    return {f1, -sigma * mu * f2};
  }
  const Complex p = -1.0 / lambda;
  const Complex z = gaussian_resolvent(p, sigma);
  return {z / lambda, (1.0 + p * z) / lambda};
}

}  // namespace

double doppler_sigma(double fwhm) { return fwhm / std::sqrt(8.0 * std::log(2.0)); }

VelocityGrid velocity_nodes(double fwhm, int n_v) {
  if (!(fwhm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "fwhm must be >= 0");
  if (n_v < 1) throw Error(ErrorKind::InvalidArgument, "n_v must be >= 1");
  if (n_v % 2 == 0)
    throw Error(ErrorKind::EvenNodeCount, "n_v = " + std::to_string(n_v) + " must be odd");
  VelocityGrid grid;
  grid.fwhm = fwhm;
  if (fwhm == 0.0 || n_v == 1) {
    grid.nodes = {{0.0, 1.0}};
    return grid;
  }
  // Golub-Welsch for the physicists' Hermite weight exp(-x^2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n_v, n_v);
  for (int k = 1; k < n_v; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  const double scale = doppler_sigma(fwhm) * std::sqrt(2.0);
  const int half = n_v / 2;
  std::vector<VelocityNode> nodes(n_v);
  for (int k = 0; k <= half; ++k) {
    // Symmetrize the pair (k, n_v - 1 - k) exactly.
    const int kk = n_v - 1 - k;
    const double x = 0.5 * (es.eigenvalues()(kk) - es.eigenvalues()(k));
    const double w =
        0.5 * (std::pow(es.eigenvectors()(0, k), 2) + std::pow(es.eigenvectors()(0, kk), 2));
    nodes[k] = {-x * scale, w};
    nodes[kk] = {x * scale, w};
  }
  nodes[half].v_shift = 0.0;
  CompensatedSum total;
  for (const auto& n : nodes) total.add(n.weight);
  for (auto& n : nodes) n.weight /= total.value();
  grid.nodes = std::move(nodes);
  return grid;
}

VelocityGrid uniform_nodes(double fwhm, int n_v, double span_sigmas) {
  if (!(fwhm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "fwhm must be >= 0");
  if (n_v < 1) throw Error(ErrorKind::InvalidArgument, "n_v must be >= 1");
  if (n_v % 2 == 0)
    throw Error(ErrorKind::EvenNodeCount, "n_v = " + std::to_string(n_v) + " must be odd");
  VelocityGrid grid;
  grid.fwhm = fwhm;
  if (fwhm == 0.0 || n_v == 1) {
    grid.nodes = {{0.0, 1.0}};
    return grid;
  }
  const double sigma = doppler_sigma(fwhm);
  const int half = n_v / 2;
  const double step = span_sigmas * sigma / half;
  std::vector<VelocityNode> nodes(n_v);
  CompensatedSum total;
  for (int k = -half; k <= half; ++k) {
    const double v = k * step;
    const double w = std::exp(-0.5 * (v / sigma) * (v / sigma));
    nodes[k + half] = {v, w};
    total.add(w);
  }
  for (auto& n : nodes) n.weight /= total.value();
  grid.nodes = std::move(nodes);
  return grid;
}

Complex doppler_average(const std::vector<Complex>& values, const VelocityGrid& grid) {
  if (values.size() != grid.nodes.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(values.size()) + " values for " +
                                               std::to_string(grid.nodes.size()) + " nodes");
  CompensatedSum re, im;
  for (std::size_t k = 0; k < values.size(); ++k) {
    re.add(grid.nodes[k].weight * values[k].real());
    im.add(grid.nodes[k].weight * values[k].imag());
  }
  return {re.value(), im.value()};
}

Complex faddeeva_w(Complex z) {
  if (z.imag() >= 0.0) return faddeeva_upper(z);
  // w(z) = 2 exp(-z^2) - w(-z) in the lower half plane.
  return 2.0 * std::exp(-z * z) - faddeeva_upper(-z);
}

Complex gaussian_resolvent(Complex p, double sigma) {
  const double scale = sigma * std::sqrt(2.0);
  const Complex zeta = p / scale;
  if (zeta.imag() >= 0.0) return Complex{0.0, kSqrtPi} * faddeeva_upper(zeta) / scale;
  return std::conj(Complex{0.0, kSqrtPi} * faddeeva_upper(std::conj(zeta)) / scale);
}

namespace {

DopplerAverage average_by_quadrature(const LevelScheme& scheme, const FieldComb& comb,
                                     const DopplerOptions& options) {
  const auto& nodes = options.grid.nodes;
  if (nodes.empty()) throw Error(ErrorKind::InvalidArgument, "empty velocity grid");
  std::vector<FloquetState> states;
  states.reserve(nodes.size());
  for (const auto& node : nodes)
    states.push_back(solve_floquet(scheme, comb, node.v_shift, options.floquet));

  DopplerAverage out;
  out.state = states.front();
  out.state.rcond = 1.0;
  std::vector<Complex> values(nodes.size());
  for (int m = -out.state.max_harmonic; m <= out.state.max_harmonic; ++m) {
    auto& target = out.state.harmonic(m);
    for (Eigen::Index i = 0; i < target.rows(); ++i)
      for (Eigen::Index j = 0; j < target.cols(); ++j) {
        for (std::size_t k = 0; k < nodes.size(); ++k) values[k] = states[k].harmonic(m)(i, j);
        target(i, j) = doppler_average(values, options.grid);
      }
  }
  for (const auto& s : states) out.state.rcond = std::min(out.state.rcond, s.rcond);
  out.sources = radiated_sources(out.state, scheme, comb);
  return out;
}

[[noreturn]] void ill_conditioned(double mismatch) {
  std::ostringstream msg;
  msg << "velocity pole expansion is ill-conditioned (probe mismatch " << mismatch << ")";
  throw Error(ErrorKind::SingularSystem, msg.str());
}

constexpr int kFallbackNodes = 4001;

double probe_velocity(double sigma) { return 0.731 * sigma; }

double relative_mismatch(const Eigen::VectorXd& direct, const Eigen::VectorXd& expanded) {
  const double scale = std::max(direct.cwiseAbs().maxCoeff(), 1e-300);
  return (direct - expanded).cwiseAbs().maxCoeff() / scale;
}

/// Splits the real unknowns into optical coherences O (velocity dependent) and
/// the rest S. Couplings only link O with S, and relaxation keeps S block
/// diagonal with tiny blocks, so S can be eliminated cheaply:
/// (K + v D_O) rho_O = c with K = A_OO - A_OS A_SS^-1 A_SO.
struct SlowElimination {
  std::vector<int> optical, slow;
  Eigen::MatrixXd k;      // r x r
  Eigen::VectorXd c;      // r
  Eigen::MatrixXd x;      // |S| x r, A_SS^-1 A_SO
  Eigen::VectorXd y;      // |S|, A_SS^-1 b_S
};

std::optional<SlowElimination> eliminate_slow(const detail::HarmonicSystem& system,
                                              const std::vector<detail::Triplet>& a,
                                              const Eigen::VectorXd& b) {
  SlowElimination out;
  out.optical = system.velocity_dependent_unknowns();
  const int n = system.real_size();
  std::vector<int> pos(n, -1);
  std::vector<bool> is_optical(n, false);
  for (int k = 0; k < static_cast<int>(out.optical.size()); ++k) {
    pos[out.optical[k]] = k;
    is_optical[out.optical[k]] = true;
  }
  for (int i = 0; i < n; ++i)
    if (!is_optical[i]) {
      pos[i] = static_cast<int>(out.slow.size());
      out.slow.push_back(i);
    }
  const int r = static_cast<int>(out.optical.size());
  const int s = static_cast<int>(out.slow.size());

  // Connected blocks of A_SS.
  std::vector<int> parent(s);
  for (int i = 0; i < s; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  double a_max = 0.0;
  for (const auto& t : a) {
    a_max = std::max(a_max, std::abs(t.value));
    if (!is_optical[t.row] && !is_optical[t.col]) parent[find(pos[t.row])] = find(pos[t.col]);
  }
  std::vector<std::vector<int>> blocks;
  std::vector<int> block_of(s, -1), index_in_block(s);
  for (int i = 0; i < s; ++i) {
    const int root = find(i);
    if (block_of[root] < 0) {
      block_of[root] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    block_of[i] = block_of[root];
    index_in_block[i] = static_cast<int>(blocks[block_of[i]].size());
    blocks[block_of[i]].push_back(i);
  }

  std::vector<Eigen::MatrixXd> a_ss(blocks.size());
  for (std::size_t q = 0; q < blocks.size(); ++q)
    a_ss[q].setZero(blocks[q].size(), blocks[q].size());
  Eigen::MatrixXd a_so = Eigen::MatrixXd::Zero(s, r);
  out.k.setZero(r, r);
  std::vector<Eigen::Triplet<double>> os;
  for (const auto& t : a) {
    const int pr = pos[t.row], pc = pos[t.col];
    if (is_optical[t.row]) {
      if (is_optical[t.col])
        out.k(pr, pc) += t.value;
      else
        os.emplace_back(pr, pc, t.value);
    } else if (is_optical[t.col]) {
      a_so(pr, pc) += t.value;
    } else {
      a_ss[block_of[pr]](index_in_block[pr], index_in_block[pc]) += t.value;
    }
  }

  out.x.resize(s, r);
  out.y.resize(s);
  for (std::size_t q = 0; q < blocks.size(); ++q) {
    const auto& idx = blocks[q];
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a_ss[q]);
    const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(lu.rcond() > 1e-12) || !(pivot > 1e-10 * a_max)) return std::nullopt;
    Eigen::MatrixXd rhs(idx.size(), r + 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      rhs.row(i).head(r) = a_so.row(idx[i]);
      rhs(i, r) = b(out.slow[idx[i]]);
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.x.row(idx[i]) = sol.row(i).head(r);
      out.y(idx[i]) = sol(i, r);
    }
  }
  Eigen::SparseMatrix<double> a_os(r, s);
  a_os.setFromTriplets(os.begin(), os.end());
  out.k -= a_os * out.x;
  out.c = -(a_os * out.y);
  return out;
}

/// Fast route: eigendecomposition of M = D_O^-1 K, rho_O(v) = (v + M)^-1 D_O^-1 c.
std::optional<DopplerAverage> average_eliminated(const detail::HarmonicSystem& system,
                                                 const SlowElimination& red, double sigma,
                                                 const DopplerOptions& options) {
  const int r = static_cast<int>(red.optical.size());
  std::vector<int> opos(system.real_size(), -1);
  for (int k = 0; k < r; ++k) opos[red.optical[k]] = k;
  // D_O has one entry per row and column.
  Eigen::MatrixXd m(r, r), d_o = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd rhs(r);
  for (const auto& t : system.velocity_derivative_real()) {
    const int row = opos[t.row], col = opos[t.col];
    m.row(col) = red.k.row(row) / t.value;
    rhs(col) = red.c(row) / t.value;
    d_o(row, col) = t.value;
  }
  const auto ex = kernels::expand(m, rhs);
  if (!ex.ok) return std::nullopt;
  const Eigen::MatrixXcd& vecs = ex.vectors;
  const Eigen::VectorXcd& lambda = ex.lambda;
  const Eigen::VectorXcd& coeff = ex.coeff;

  const double v_probe = probe_velocity(sigma);
  Eigen::VectorXcd avg_c(r), probe_c(r);
  for (int k = 0; k < r; ++k) {
    avg_c(k) = gaussian_resolvent(-lambda(k), sigma) * coeff(k);
    probe_c(k) = coeff(k) / (v_probe + lambda(k));
  }
  const Eigen::VectorXd direct =
      Eigen::PartialPivLU<Eigen::MatrixXd>(red.k + v_probe * d_o).solve(red.c);
  DopplerAverage out;
  out.expansion_error = relative_mismatch(direct, (vecs * probe_c).real());
  if (!(out.expansion_error <= options.expansion_tolerance)) return std::nullopt;

  const Eigen::VectorXd avg_o = (vecs * avg_c).real();
  const Eigen::VectorXd avg_s = red.y - red.x * avg_o;
  Eigen::VectorXd avg(system.real_size());
  for (int k = 0; k < r; ++k) avg(red.optical[k]) = avg_o(k);
  for (std::size_t k = 0; k < red.slow.size(); ++k) avg(red.slow[k]) = avg_s(k);
  out.state = system.unpack_real(avg);
  return out;
}

/// General route, valid whenever A(0) is regular: rho_O(v) = (I + v Q)^-1 rho0_O
/// with Q = (A(0)^-1 D)_OO.
DopplerAverage average_general(const detail::HarmonicSystem& system,
                               const std::vector<detail::Triplet>& triplets,
                               const Eigen::VectorXd& b, double sigma,
                               const DopplerOptions& options) {
  const int n = system.real_size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : triplets) a(t.row, t.col) += t.value;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15)) {
    std::ostringstream msg;
    msg << "harmonic system is singular at v = 0 (rcond = " << rcond << ")";
    throw Error(ErrorKind::SingularSystem, msg.str());
  }
  const Eigen::VectorXd rho0 = lu.solve(b);

  const auto derivative = system.velocity_derivative_real();
  const std::vector<int> optical = system.velocity_dependent_unknowns();
  const int r = static_cast<int>(optical.size());
  std::vector<int> position(n, -1);
  for (int k = 0; k < r; ++k) position[optical[k]] = k;
  Eigen::MatrixXd d_cols = Eigen::MatrixXd::Zero(n, r);
  for (const auto& t : derivative) d_cols(t.row, position[t.col]) += t.value;
  const Eigen::MatrixXd p = lu.solve(d_cols);
  Eigen::MatrixXd q(r, r);
  Eigen::VectorXd rho0_o(r);
  for (int k = 0; k < r; ++k) {
    q.row(k) = p.row(optical[k]);
    rho0_o(k) = rho0(optical[k]);
  }

  const auto ex = kernels::expand(q, rho0_o);
  if (!ex.ok)
    throw Error(ErrorKind::SingularSystem, "eigendecomposition of the velocity response failed");
  const Eigen::MatrixXcd& vecs = ex.vectors;
  const Eigen::VectorXcd& lambda = ex.lambda;
  const Eigen::VectorXcd& coeff = ex.coeff;

  const double v_probe = probe_velocity(sigma);
  Eigen::VectorXcd c1(r), c2(r), probe_c(r);
  for (int k = 0; k < r; ++k) {
    const auto [f1, f2] = pole_moments(lambda(k), sigma);
    c1(k) = f1 * coeff(k);
    c2(k) = f2 * coeff(k);
    probe_c(k) = coeff(k) / (1.0 + v_probe * lambda(k));
  }
  Eigen::MatrixXd a_probe = a;
  for (const auto& t : derivative) a_probe(t.row, t.col) += v_probe * t.value;
  const Eigen::VectorXd direct = Eigen::PartialPivLU<Eigen::MatrixXd>(a_probe).solve(b);
  Eigen::VectorXd direct_o(r);
  for (int k = 0; k < r; ++k) direct_o(k) = direct(optical[k]);

  DopplerAverage out;
  out.expansion_error = relative_mismatch(direct_o, (vecs * probe_c).real());
  if (!(out.expansion_error <= options.expansion_tolerance)) ill_conditioned(out.expansion_error);

  // <rho> = rho0 - P <v (I + v Q)^-1> rho0_O.
  const Eigen::VectorXd avg_o = (vecs * c1).real();
  Eigen::VectorXd avg = rho0 - p * (vecs * c2).real();
  for (int k = 0; k < r; ++k) avg(optical[k]) = avg_o(k);
  out.state = system.unpack_real(avg);
  out.state.rcond = rcond;
  return out;
}

DopplerAverage average_exactly(const LevelScheme& scheme, const FieldComb& comb, double fwhm,
                               const DopplerOptions& options) {
  if (!(scheme.gamma_12() + scheme.gamma_t() > 0.0))
    throw Error(ErrorKind::DomainError,
                "gamma_12 + gamma_t must be > 0 for a unique steady state");
  const int m = options.floquet.max_harmonic.value_or(comb.max_order + 2);
  const detail::HarmonicSystem system(scheme, comb, m, options.floquet.excited_frame_offset);
  const double sigma = doppler_sigma(fwhm);

  if (sigma == 0.0) {
    FloquetOptions fo = options.floquet;
    fo.check_truncation = false;
    DopplerAverage out;
    out.state = solve_floquet(scheme, comb, 0.0, fo);
    out.sources = radiated_sources(out.state, scheme, comb);
    return out;
  }

  std::vector<detail::Triplet> triplets;
  Eigen::VectorXd b;
  system.assemble_real(0.0, triplets, b);
  std::optional<DopplerAverage> out;
  if (const auto red = eliminate_slow(system, triplets, b))
    out = average_eliminated(system, *red, sigma, options);
  if (!out) {
    try {
      out = average_general(system, triplets, b, sigma, options);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularSystem) throw;
      DopplerOptions dense = options;
      dense.grid = uniform_nodes(fwhm, kFallbackNodes);
      out = average_by_quadrature(scheme, comb, dense);
      out->expansion_error = -1.0;
    }
  }
  detail::record_invariants(out->state);
  out->sources = radiated_sources(out->state, scheme, comb);
  return *out;
}

}  // namespace

DopplerAverage doppler_average_state(const LevelScheme& scheme, const FieldComb& comb,
                                     double fwhm, const DopplerOptions& options) {
  if (!(fwhm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "fwhm must be >= 0");
  if (options.method == DopplerMethod::quadrature)
    return average_by_quadrature(scheme, comb, options);
  return average_exactly(scheme, comb, fwhm, options);
}

}  // namespace phaseonium
