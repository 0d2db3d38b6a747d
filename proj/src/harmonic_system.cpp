#include "harmonic_system.hpp"

#include "phaseonium/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace phaseonium::detail {

namespace {

constexpr Complex kI{0.0, 1.0};

struct RealTarget {
  int re;
  int im;  // -1 for populations of rho^(0)
  bool conj;
};

}  // namespace

HarmonicSystem::HarmonicSystem(const LevelScheme& scheme, const FieldComb& comb,
                               int max_harmonic, int excited_offset)
    : n_(static_cast<int>(scheme.size())), m_(max_harmonic) {
  if (max_harmonic < 0)
    throw Error(ErrorKind::InvalidArgument, "harmonic truncation must be >= 0");
  if (max_harmonic < comb.max_order)
    throw Error(ErrorKind::InvalidArgument,
                "harmonic truncation " + std::to_string(max_harmonic) +
                    " is below the comb order " + std::to_string(comb.max_order));
  comb_order_ = comb.max_order;
  const double spacing = comb.spacing_mhz + comb.delta_r;
  omega_ = kTwoPi * spacing;

  h0_.assign(n_, 0.0);
  dh_.assign(n_, 0.0);
  ground_order_.assign(n_, 0);
  frame_.level_mhz.assign(n_, 0.0);
  frame_.harmonic_spacing_mhz = spacing;
  frame_.excited_offset = excited_offset;
  for (int i = 0; i < n_; ++i) {
    const auto& level = scheme.levels()[i];
    if (scheme.is_ground(i)) {
      const int kg = scheme.ground_order(i);
      ground_order_[i] = kg;
      h0_[i] = kTwoPi * kg * comb.delta_r;
      frame_.level_mhz[i] = -kg * spacing;
    } else {
      const auto channel = scheme.channel_of(i);
      double base = 0.0;
      if (channel) base = *channel == Channel::A ? comb.delta_a : comb.delta_3;
      h0_[i] = kTwoPi * (level.offset_mhz - base) - excited_offset * omega_;
      dh_[i] = -kTwoPi;
      frame_.level_mhz[i] = base + excited_offset * spacing;
    }
  }

  for (const auto& t : scheme.transitions()) {
    for (const auto& line : comb.lines) {
      if (line.channel != t.channel || line.omega_rabi == Complex{}) continue;
      const int k = line.n - scheme.ground_order(t.ground) - excited_offset;
      const Complex value = -0.5 * t.weight * kTwoPi * line.omega_rabi;
      const int e = static_cast<int>(t.excited), g = static_cast<int>(t.ground);
      couplings_.push_back({k, e, g, value});
      couplings_.push_back({-k, g, e, std::conj(value)});
    }
  }
  by_row_.assign(n_, {});
  by_col_.assign(n_, {});
  for (int c = 0; c < static_cast<int>(couplings_.size()); ++c) {
    by_row_[couplings_[c].row].push_back(c);
    by_col_[couplings_[c].col].push_back(c);
  }

  // Relaxation is linear and identical for every harmonic; read it off by probing.
  relax_.assign(n_ * n_, {});
  CMatrix unit = CMatrix::Zero(n_, n_);
  CMatrix out(n_, n_);
  for (int k = 0; k < n_; ++k)
    for (int l = 0; l < n_; ++l) {
      unit(k, l) = 1.0;
      out.setZero();
      relaxation_accumulate(scheme, unit, out);
      unit(k, l) = 0.0;
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          if (out(i, j) != Complex{}) relax_[i * n_ + j].push_back({k, l, out(i, j).real()});
    }

  real_offset_.assign((m_ + 1) * n_ * n_, -1);
  int offset = 0;
  for (int m = 0; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (m == 0 && j < i) continue;
        real_offset_[(m * n_ + i) * n_ + j] = offset;
        offset += (m == 0 && i == j) ? 1 : 2;
      }

  trace_level_ = static_cast<int>(scheme.ground_levels().front());
}

int HarmonicSystem::source_harmonic(int n, int ground) const {
  return n - ground_order_[ground] - frame_.excited_offset;
}

template <class F>
void HarmonicSystem::for_each_term(int m, int i, int j, double v, F&& f) const {
  f(m, i, j, kI * (m * omega_ - (energy(i, v) - energy(j, v))));
  for (const auto& r : relax_[i * n_ + j]) f(m, r.k, r.l, Complex{r.rate, 0.0});
  // -i H rho + i rho H, harmonic m collects H^(k) rho^(m-k).
  for (int c : by_row_[i]) {
    const auto& h = couplings_[c];
    const int mm = m - h.k;
    if (mm < -m_ || mm > m_) continue;
    f(mm, h.col, j, -kI * h.value);
  }
  for (int c : by_col_[j]) {
    const auto& h = couplings_[c];
    const int mm = m - h.k;
    if (mm < -m_ || mm > m_) continue;
    f(mm, i, h.row, kI * h.value);
  }
}

void HarmonicSystem::assemble_complex(double v, CMatrix& a, Eigen::VectorXcd& b) const {
  const int size = complex_size();
  a.setZero(size, size);
  b.setZero(size);
  const int trace_row = complex_index(0, trace_level_, trace_level_);
  for (int m = -m_; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        const int row = complex_index(m, i, j);
        if (row == trace_row) continue;
        for_each_term(m, i, j, v, [&](int mm, int k, int l, Complex c) {
          a(row, complex_index(mm, k, l)) += c;
        });
      }
  for (int l = 0; l < n_; ++l) a(trace_row, complex_index(0, l, l)) = 1.0;
  b(trace_row) = 1.0;
}

void HarmonicSystem::assemble_real(double v, std::vector<Triplet>& a,
                                   Eigen::VectorXd& b) const {
  a.clear();
  b.setZero(real_size());
  auto add = [&](int row, int col, double value) {
    if (value != 0.0) a.push_back({row, col, value});
  };
  auto target = [&](int m, int k, int l) {
    const bool conj = m < 0 || (m == 0 && l < k);
    if (conj) {
      m = -m;
      std::swap(k, l);
    }
    const int re = real_offset(m, k, l);
    return RealTarget{re, (m == 0 && k == l) ? -1 : re + 1, conj};
  };
  for (int m = 0; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (m == 0 && j < i) continue;
        const int re_row = real_offset(m, i, j);
        const bool has_im = !(m == 0 && i == j);
        const bool trace_row = m == 0 && i == trace_level_ && j == trace_level_;
        for_each_term(m, i, j, v, [&](int mm, int k, int l, Complex c) {
          const RealTarget t = target(mm, k, l);
          const double s = t.conj ? -1.0 : 1.0;
          if (!trace_row) {
            add(re_row, t.re, c.real());
            if (t.im >= 0) add(re_row, t.im, -s * c.imag());
          }
          if (has_im) {
            add(re_row + 1, t.re, c.imag());
            if (t.im >= 0) add(re_row + 1, t.im, s * c.real());
          }
        });
      }
  const int trace_row = real_offset(0, trace_level_, trace_level_);
  for (int l = 0; l < n_; ++l) a.push_back({trace_row, real_offset(0, l, l), 1.0});
  b(trace_row) = 1.0;
}

void HarmonicSystem::assemble_real(double v, Eigen::MatrixXd& a, Eigen::VectorXd& b) const {
  std::vector<Triplet> triplets;
  assemble_real(v, triplets, b);
  a.setZero(real_size(), real_size());
  for (const auto& t : triplets) a(t.row, t.col) += t.value;
}

std::vector<Triplet> HarmonicSystem::velocity_derivative_real() const {
  std::vector<Triplet> out;
  for (int m = 0; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (m == 0 && j <= i) continue;
        const double c = -(dh_[i] - dh_[j]);  // coefficient of i*v
        if (c == 0.0) continue;
        const int re = real_offset(m, i, j);
        out.push_back({re, re + 1, -c});
        out.push_back({re + 1, re, c});
      }
  return out;
}

std::vector<int> HarmonicSystem::velocity_dependent_unknowns() const {
  std::vector<int> out;
  for (const auto& t : velocity_derivative_real()) out.push_back(t.col);
  std::sort(out.begin(), out.end());
  return out;
}

FloquetState HarmonicSystem::unpack_complex(const Eigen::VectorXcd& x) const {
  FloquetState state;
  state.max_harmonic = m_;
  state.comb_order = comb_order_;
  state.frame = frame_;
  state.harmonics.assign(2 * m_ + 1, CMatrix::Zero(n_, n_));
  for (int m = -m_; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) state.harmonic(m)(i, j) = x(complex_index(m, i, j));
  return state;
}

FloquetState HarmonicSystem::unpack_real(const Eigen::VectorXd& x) const {
  FloquetState state;
  state.max_harmonic = m_;
  state.comb_order = comb_order_;
  state.frame = frame_;
  state.harmonics.assign(2 * m_ + 1, CMatrix::Zero(n_, n_));
  for (int m = 0; m <= m_; ++m)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (m == 0 && j < i) continue;
        const int re = real_offset(m, i, j);
        const Complex value =
            (m == 0 && i == j) ? Complex{x(re), 0.0} : Complex{x(re), x(re + 1)};
        state.harmonic(m)(i, j) = value;
        state.harmonic(-m)(j, i) = std::conj(value);
      }
  return state;
}

}  // namespace phaseonium::detail
