#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phaseonium {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Ground hyperfine splitting of the Na 3S1/2 state, MHz.
inline constexpr double kGroundSplittingMHz = 1771.626;
/// Spacing between the two 3P1/2 hyperfine levels, MHz.
inline constexpr double kExcitedSplittingMHz = 189.0;

using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

enum class Manifold { ground, excited };
enum class Channel { A, B };

const char* to_string(Channel channel);

struct Level {
  std::string label;
  Manifold manifold;
  /// Ground levels: offset from |2>. Excited levels: offset from the A-channel upper state.
  double offset_mhz;
};

struct Transition {
  std::size_t excited;
  std::size_t ground;
  Channel channel;
  double weight;
};

/// Relative dipole weights shared by both channel copies of the excited doublet, in
/// units of the two-level transition that defines i_sat. The default folds Zeeman-averaged
/// line strengths and buffer-gas broadening of the saturation into one effective factor.
struct DipoleWeights {
  double upper_1 = 0.2;  // |3> - |1>
  double upper_2 = 0.2;  // |3> - |2>
  double lower_1 = 0.2;  // |4> - |1>
  double lower_2 = 0.2;  // |4> - |2>

  bool operator==(const DipoleWeights&) const = default;
};

/// Knobs of the default six-level disjoint-channel scheme. Rates are ordinary
/// frequencies in MHz.
struct SchemeConfig {
  double ground_splitting_mhz = kGroundSplittingMHz;
  double excited_splitting_mhz = kExcitedSplittingMHz;
  double gamma_e = 10.0;
  double gamma_12 = 0.003;
  std::optional<double> gamma_t;  // defaults to gamma_12
  double gamma_col = 5.0;
  std::map<std::string, double> branching = {{"1", 0.5}, {"2", 0.5}};
  std::map<std::string, double> p_eq = {{"1", 0.375}, {"2", 0.625}};
  DipoleWeights weights;

  bool operator==(const SchemeConfig&) const = default;
};

/// Immutable description of levels, channel-tagged transitions and relaxation.
class LevelScheme {
 public:
  LevelScheme(double ground_splitting_mhz, std::vector<Level> levels,
              std::vector<Transition> transitions, double gamma_e, double gamma_12,
              double gamma_t, double gamma_col, Eigen::MatrixXd branching,
              std::vector<double> p_eq);

  std::size_t size() const { return levels_.size(); }
  const std::vector<Level>& levels() const { return levels_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<std::size_t>& ground_levels() const { return ground_; }
  const std::vector<std::size_t>& excited_levels() const { return excited_; }

  double ground_splitting_mhz() const { return ground_splitting_; }
  double gamma_e() const { return gamma_e_; }
  double gamma_12() const { return gamma_12_; }
  double gamma_t() const { return gamma_t_; }
  double gamma_col() const { return gamma_col_; }
  /// branching(e, g): fraction of decays from excited e landing in ground g.
  const Eigen::MatrixXd& branching() const { return branching_; }
  /// Equilibrium populations indexed by level (zero on excited levels).
  const std::vector<double>& p_eq() const { return p_eq_; }

  bool is_ground(std::size_t i) const { return levels_[i].manifold == Manifold::ground; }
  /// Channel owning an excited level; nullopt for ground levels or isolated excited levels.
  std::optional<Channel> channel_of(std::size_t level) const { return channel_of_[level]; }
  /// Number of comb steps separating a ground level from |2> (1 for |1>).
  int ground_order(std::size_t ground) const { return ground_order_[ground]; }
  std::size_t index_of(const std::string& label) const;
  /// Dipole weight of (excited, ground) on the given channel, zero if absent.
  double weight(std::size_t excited, std::size_t ground, Channel channel) const;

  /// Decay rate (rad/us) of the density-matrix element (i, j), i != j.
  double coherence_rate(std::size_t i, std::size_t j) const;

 private:
  double ground_splitting_;
  std::vector<Level> levels_;
  std::vector<Transition> transitions_;
  double gamma_e_, gamma_12_, gamma_t_, gamma_col_;
  Eigen::MatrixXd branching_;
  std::vector<double> p_eq_;
  std::vector<std::size_t> ground_, excited_;
  std::vector<std::optional<Channel>> channel_of_;
  std::vector<int> ground_order_;
};

/// Default scheme: grounds |1>, |2>; excited |3A>, |4A> (channel A) and
/// |3B>, |4B> (channel B) with identical energies and rates.
LevelScheme build_level_scheme(const SchemeConfig& config = {});

/// Relaxation superoperator applied to rho, in rad/us. Validates shape and hermiticity.
CMatrix relaxation_apply(const LevelScheme& scheme, const CMatrix& rho);

/// Same as relaxation_apply, without validation, accumulating into out.
/// Works on any (not necessarily hermitian) rho, which the harmonic solver needs.
void relaxation_accumulate(const LevelScheme& scheme, const CMatrix& rho, CMatrix& out);

}  // namespace phaseonium
