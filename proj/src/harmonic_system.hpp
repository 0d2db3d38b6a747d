#pragma once

#include "phaseonium/atom_model.hpp"
#include "phaseonium/comb_field.hpp"
#include "phaseonium/floquet.hpp"

#include <Eigen/Dense>

#include <vector>

namespace phaseonium::detail {

/// Adds a solved state to the process-wide invariant tally.
void record_invariants(const FloquetState& state);

/// H^(k)(row, col) in rad/us; H(t) = diag(h) + sum_k H^(k) exp(-i k w t).
struct Coupling {
  int k;
  int row;
  int col;
  Complex value;
};

struct RelaxTerm {
  int k;
  int l;
  double rate;
};

struct Triplet {
  int row;
  int col;
  double value;
};

/// Linear system for the harmonics of the periodic steady state. Complex
/// unknowns are (m, i, j) for |m| <= M. The real form keeps rho^(m) for m > 0
/// and the upper triangle of rho^(0), using rho^(-m) = rho^(m)^dagger.
class HarmonicSystem {
 public:
  HarmonicSystem(const LevelScheme& scheme, const FieldComb& comb, int max_harmonic,
                 int excited_offset);

  int levels() const { return n_; }
  int max_harmonic() const { return m_; }
  double omega() const { return omega_; }
  int complex_size() const { return n_ * n_ * (2 * m_ + 1); }
  int real_size() const { return complex_size(); }
  const std::vector<Coupling>& couplings() const { return couplings_; }
  const std::vector<std::vector<RelaxTerm>>& relaxation() const { return relax_; }
  /// Static frame energy of level i at velocity shift v (MHz), rad/us.
  double energy(int i, double v) const { return h0_[i] + v * dh_[i]; }
  FloquetFrame frame() const { return frame_; }
  int trace_level() const { return trace_level_; }
  /// Harmonic index carrying the coherence that radiates into (channel, n) on ground g.
  int source_harmonic(int n, int ground) const;

  void assemble_complex(double v, CMatrix& a, Eigen::VectorXcd& b) const;
  void assemble_real(double v, Eigen::MatrixXd& a, Eigen::VectorXd& b) const;
  /// Same system as a triplet list (duplicates are to be summed).
  void assemble_real(double v, std::vector<Triplet>& a, Eigen::VectorXd& b) const;
  /// d(assemble_real)/dv as a sparse list; nonzero only on optical coherences.
  std::vector<Triplet> velocity_derivative_real() const;
  /// Real unknowns touched by velocity_derivative_real, ascending.
  std::vector<int> velocity_dependent_unknowns() const;

  FloquetState unpack_complex(const Eigen::VectorXcd& x) const;
  FloquetState unpack_real(const Eigen::VectorXd& x) const;

  int complex_index(int m, int i, int j) const { return ((m + m_) * n_ + i) * n_ + j; }
  /// Offset of the real part of a canonical entry; imaginary part follows unless
  /// the entry is a population of rho^(0).
  int real_offset(int m, int i, int j) const { return real_offset_[(m * n_ + i) * n_ + j]; }

 private:
  template <class F>
  void for_each_term(int m, int i, int j, double v, F&& f) const;

  int n_;
  int m_;
  double omega_;
  std::vector<double> h0_;
  std::vector<double> dh_;
  std::vector<int> ground_order_;
  std::vector<Coupling> couplings_;
  std::vector<std::vector<int>> by_row_, by_col_;
  std::vector<std::vector<RelaxTerm>> relax_;
  std::vector<int> real_offset_;
  int trace_level_;
  FloquetFrame frame_;
  int comb_order_;
};

}  // namespace phaseonium::detail
