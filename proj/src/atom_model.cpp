#include "phaseonium/atom_model.hpp"

#include "phaseonium/error.hpp"

#include <cmath>
#include <set>

namespace phaseonium {

const char* to_string(Channel channel) { return channel == Channel::A ? "A" : "B"; }

namespace {

void require_rate(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw Error(ErrorKind::NegativeRate, std::string(name) + " must be finite and >= 0");
}

}  // namespace

LevelScheme::LevelScheme(double ground_splitting_mhz, std::vector<Level> levels,
                         std::vector<Transition> transitions, double gamma_e, double gamma_12,
                         double gamma_t, double gamma_col, Eigen::MatrixXd branching,
                         std::vector<double> p_eq)
    : ground_splitting_(ground_splitting_mhz),
      levels_(std::move(levels)),
      transitions_(std::move(transitions)),
      gamma_e_(gamma_e),
      gamma_12_(gamma_12),
      gamma_t_(gamma_t),
      gamma_col_(gamma_col),
      branching_(std::move(branching)),
      p_eq_(std::move(p_eq)) {
  require_rate(gamma_e_, "gamma_e");
  require_rate(gamma_12_, "gamma_12");
  require_rate(gamma_t_, "gamma_t");
  require_rate(gamma_col_, "gamma_col");
  if (!(ground_splitting_ > 0.0))
    throw Error(ErrorKind::InvalidArgument, "ground splitting must be > 0");

  const std::size_t n = levels_.size();
  std::set<std::string> labels;
  for (const auto& level : levels_)
    if (!labels.insert(level.label).second)
      throw Error(ErrorKind::DuplicateLabel, "level label '" + level.label + "' repeated");

  channel_of_.assign(n, std::nullopt);
  ground_order_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (levels_[i].manifold == Manifold::ground) {
      ground_.push_back(i);
      const double order = -levels_[i].offset_mhz / ground_splitting_;
      const double rounded = std::round(order);
      if (std::abs(order - rounded) > 1e-12 || rounded < 0)
        throw Error(ErrorKind::InvalidArgument,
                    "ground level '" + levels_[i].label +
                        "' must sit a whole number of splittings below |2>");
      ground_order_[i] = static_cast<int>(rounded);
    } else {
      excited_.push_back(i);
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& t : transitions_) {
    if (t.excited >= n || t.ground >= n || levels_[t.excited].manifold != Manifold::excited ||
        levels_[t.ground].manifold != Manifold::ground)
      throw Error(ErrorKind::InvalidArgument, "transition must join an excited and a ground level");
    if (!pairs.insert({t.excited, t.ground}).second)
      throw Error(ErrorKind::ChannelOverlap, "transition " + levels_[t.excited].label + "-" +
                                                 levels_[t.ground].label +
                                                 " assigned more than once");
    auto& owner = channel_of_[t.excited];
    if (owner && *owner != t.channel)
      throw Error(ErrorKind::ChannelOverlap,
                  "excited level '" + levels_[t.excited].label + "' reachable from both channels");
    owner = t.channel;
  }

  if (branching_.rows() != static_cast<Eigen::Index>(n) ||
      branching_.cols() != static_cast<Eigen::Index>(n))
    throw Error(ErrorKind::DimensionMismatch, "branching matrix must be L x L");
  for (std::size_t e : excited_) {
    double sum = 0.0;
    for (std::size_t g = 0; g < n; ++g) {
      const double b = branching_(e, g);
      if (b != 0.0 && levels_[g].manifold != Manifold::ground)
        throw Error(ErrorKind::InvalidArgument, "branching may only feed ground levels");
      if (b < 0.0) throw Error(ErrorKind::BranchingNotNormalized, "negative branching fraction");
      sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error(ErrorKind::BranchingNotNormalized,
                  "branching from '" + levels_[e].label + "' sums to " + std::to_string(sum));
  }

  if (p_eq_.size() != n) throw Error(ErrorKind::DimensionMismatch, "p_eq must have one entry per level");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = p_eq_[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(ErrorKind::DomainError, "p_eq entries must lie in [0, 1]");
    if (p != 0.0 && levels_[i].manifold != Manifold::ground)
      throw Error(ErrorKind::DomainError, "p_eq must vanish on excited levels");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::DomainError, "p_eq must sum to 1");
}

std::size_t LevelScheme::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i].label == label) return i;
  throw Error(ErrorKind::InvalidArgument, "no level labelled '" + label + "'");
}

double LevelScheme::weight(std::size_t excited, std::size_t ground, Channel channel) const {
  for (const auto& t : transitions_)
    if (t.excited == excited && t.ground == ground && t.channel == channel) return t.weight;
  return 0.0;
}

double LevelScheme::coherence_rate(std::size_t i, std::size_t j) const {
  const bool gi = is_ground(i), gj = is_ground(j);
  if (gi && gj) return kTwoPi * gamma_12_;
  if (!gi && !gj) return kTwoPi * (gamma_e_ + gamma_t_);
  return kTwoPi * (0.5 * gamma_e_ + gamma_col_);
}

LevelScheme build_level_scheme(const SchemeConfig& config) {
  std::vector<Level> levels = {
      {"1", Manifold::ground, -config.ground_splitting_mhz},
      {"2", Manifold::ground, 0.0},
      {"3A", Manifold::excited, 0.0},
      {"4A", Manifold::excited, -config.excited_splitting_mhz},
      {"3B", Manifold::excited, 0.0},
      {"4B", Manifold::excited, -config.excited_splitting_mhz},
  };
  const auto& w = config.weights;
  std::vector<Transition> transitions;
  for (Channel c : {Channel::A, Channel::B}) {
    const std::size_t upper = c == Channel::A ? 2 : 4;
    transitions.push_back({upper, 0, c, w.upper_1});
    transitions.push_back({upper, 1, c, w.upper_2});
    transitions.push_back({upper + 1, 0, c, w.lower_1});
    transitions.push_back({upper + 1, 1, c, w.lower_2});
  }

  auto ground_value = [](const std::map<std::string, double>& m, const char* what) {
    for (const auto& [key, value] : m)
      if (key != "1" && key != "2")
        throw Error(ErrorKind::InvalidArgument,
                    std::string(what) + " refers to unknown ground level '" + key + "'");
    auto get = [&](const char* key) {
      auto it = m.find(key);
      return it == m.end() ? 0.0 : it->second;
    };
    return std::pair{get("1"), get("2")};
  };

  const auto [b1, b2] = ground_value(config.branching, "branching");
  Eigen::MatrixXd branching = Eigen::MatrixXd::Zero(6, 6);
  for (std::size_t e = 2; e < 6; ++e) {
    branching(e, 0) = b1;
    branching(e, 1) = b2;
  }
  const auto [p1, p2] = ground_value(config.p_eq, "p_eq");
  std::vector<double> p_eq = {p1, p2, 0.0, 0.0, 0.0, 0.0};

  return LevelScheme(config.ground_splitting_mhz, std::move(levels), std::move(transitions),
                     config.gamma_e, config.gamma_12, config.gamma_t.value_or(config.gamma_12),
                     config.gamma_col, std::move(branching), std::move(p_eq));
}

void relaxation_accumulate(const LevelScheme& scheme, const CMatrix& rho, CMatrix& out) {
  const std::size_t n = scheme.size();
  const double decay = kTwoPi * scheme.gamma_e();
  const double transit = kTwoPi * scheme.gamma_t();
  const Complex trace = rho.trace();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out(i, j) -= scheme.coherence_rate(i, j) * rho(i, j);

  const auto& b = scheme.branching();
  for (std::size_t e : scheme.excited_levels()) {
    out(e, e) -= (decay + transit) * rho(e, e);
    for (std::size_t g : scheme.ground_levels()) out(g, g) += decay * b(e, g) * rho(e, e);
  }
  for (std::size_t g : scheme.ground_levels())
    out(g, g) -= transit * (rho(g, g) - scheme.p_eq()[g] * trace);
}

CMatrix relaxation_apply(const LevelScheme& scheme, const CMatrix& rho) {
  const auto n = static_cast<Eigen::Index>(scheme.size());
  if (rho.rows() != n || rho.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "rho must be " + std::to_string(n) + "x" +
                                                  std::to_string(n));
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorKind::NonHermitianInput, "rho is not hermitian within 1e-10");
  CMatrix out = CMatrix::Zero(n, n);
  relaxation_accumulate(scheme, rho, out);
  return out;
}

}  // namespace phaseonium
