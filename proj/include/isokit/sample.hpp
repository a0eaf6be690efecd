#pragma once

// Seeded Monte Carlo samplers. Every sampler draws from a std::mt19937_64
// obtained from an RngStream, so a (seed, stream) pair fixes the output.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "isokit/error.hpp"
#include "isokit/kernels.hpp"
#include "isokit/model.hpp"

namespace isokit {

using Rng = std::mt19937_64;

/// A (seed, stream) pair naming one reproducible random sequence.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  Rng engine() const {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
  }

  /// An independent stream derived from this one and a tag.
  RngStream child(std::uint64_t tag) const {
    std::uint64_t z = stream + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return {seed, z ^ (z >> 31)};
  }
};

/// Per-state local time L^y = (occupation time at y) / m(y).
struct LocalTimeField {
  Vector values;

  double operator[](std::size_t y) const { return values(static_cast<Eigen::Index>(y)); }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

enum class Termination { killed, absorbed, stopped };

struct PathStep {
  std::size_t state;
  double duration;
};

/// Right-continuous path as a list of visits with holding times.
struct SamplePath {
  std::vector<PathStep> steps;
  Termination cause = Termination::killed;
  double lifetime = 0.0;
};

struct PathSample {
  SamplePath path;
  LocalTimeField field;
};

namespace detail {

/// Exit law of a state: total rate and the distribution over targets, with
/// index n standing for death.
struct ExitLaw {
  double rate = 0.0;
  std::discrete_distribution<std::size_t>::param_type targets;
};

inline ExitLaw make_exit_law(const std::vector<double>& weights) {
  ExitLaw e;
  for (double w : weights) e.rate += w;
  if (e.rate > 0.0) e.targets = std::discrete_distribution<std::size_t>::param_type(weights.begin(), weights.end());
  return e;
}

}  // namespace detail

/// Gillespie sampler for the chain itself.
class PathSampler {
 public:
  explicit PathSampler(const ChainModel& model) : m_(model.mass()) {
    const auto n = model.size();
    for (std::size_t x = 0; x < n; ++x) {
      std::vector<double> w(n + 1, 0.0);
      for (std::size_t y = 0; y < n; ++y)
        if (y != x) w[y] = model.jump_rates()(x, y);
      w[n] = model.kill_rates()(x);
      laws_.push_back(detail::make_exit_law(w));
    }
    recurrent_ = model.recurrent();
  }

  /// Runs from x0 until death; also records the path.
  PathSample sample(std::size_t x0, Rng& rng, bool keep_path = true) const {
    if (recurrent_) throw PreconditionError("sample_path: recurrent model has no finite lifetime");
    if (x0 >= laws_.size()) throw UnknownState("sample_path: x0 out of range");
    const auto n = laws_.size();
    PathSample out;
    Vector occ = Vector::Zero(static_cast<Eigen::Index>(n));
    std::size_t x = x0;
    std::discrete_distribution<std::size_t> pick;
    while (true) {
      const auto& law = laws_[x];
      if (law.rate == 0.0) {
        out.path.cause = Termination::absorbed;
        out.path.lifetime = std::numeric_limits<double>::infinity();
        break;
      }
      const double hold = std::exponential_distribution<double>(law.rate)(rng);
      occ(static_cast<Eigen::Index>(x)) += hold;
      out.path.lifetime += hold;
      if (keep_path) out.path.steps.push_back({x, hold});
      const auto next = pick(rng, law.targets);
      if (next == n) {
        out.path.cause = Termination::killed;
        break;
      }
      x = next;
    }
    out.field.values = occ.cwiseQuotient(m_);
    return out;
  }

 private:
  Vector m_;
  std::vector<detail::ExitLaw> laws_;
  bool recurrent_ = false;
};

inline PathSample sample_path(const ChainModel& model, std::size_t x0, Rng& rng) {
  return PathSampler(model).sample(x0, rng);
}

/// The h-transform with h = u(., y): jumps z -> w at rate q(z,w) h(w)/h(z),
/// death only at y at rate 1/(m(y) u(y,y)). Samples Q^{x,y} / u(x,y).
class BridgeSampler {
 public:
  BridgeSampler(const ChainModel& model, std::size_t y) : m_(model.mass()), y_(y) {
    if (!model.transient()) throw PreconditionError("sample_bridge: model must be transient");
    if (y >= model.size()) throw UnknownState("sample_bridge: y out of range");
    const Matrix u = potential(model).entries;
    h_ = u.col(static_cast<Eigen::Index>(y));
    const auto n = model.size();
    for (std::size_t z = 0; z < n; ++z) {
      std::vector<double> w(n + 1, 0.0);
      const double hz = h_(static_cast<Eigen::Index>(z));
      if (hz > 0.0) {
        for (std::size_t v = 0; v < n; ++v)
          if (v != z) w[v] = model.jump_rates()(z, v) * h_(static_cast<Eigen::Index>(v)) / hz;
        if (z == y) w[n] = 1.0 / (m_(static_cast<Eigen::Index>(y)) * hz);
      }
      laws_.push_back(detail::make_exit_law(w));
    }
  }

  /// Local times of one bridge path from x; the path always ends at y.
  LocalTimeField sample(std::size_t x, Rng& rng) const {
    const auto n = laws_.size();
    if (x >= n) throw UnknownState("sample_bridge: x out of range");
    if (!(h_(static_cast<Eigen::Index>(x)) > 0.0))
      throw PreconditionError("sample_bridge: u(x,y) = 0, y is unreachable from x");
    Vector occ = Vector::Zero(static_cast<Eigen::Index>(n));
    std::discrete_distribution<std::size_t> pick;
    std::size_t z = x;
    while (true) {
      const auto& law = laws_[z];
      occ(static_cast<Eigen::Index>(z)) += std::exponential_distribution<double>(law.rate)(rng);
      const auto next = pick(rng, law.targets);
      if (next == n) break;
      z = next;
    }
    if (z != y_) throw Error("sample_bridge: path ended away from y");
    return {occ.cwiseQuotient(m_)};
  }

 private:
  Vector m_;
  Vector h_;
  std::size_t y_;
  std::vector<detail::ExitLaw> laws_;
};

inline LocalTimeField sample_bridge(const ChainModel& model, std::size_t x, std::size_t y, Rng& rng) {
  return BridgeSampler(model, y).sample(x, rng);
}

struct InverseLtSample {
  LocalTimeField field;
  double lifetime = 0.0;  ///< tau(t)
};

/// Runs the recurrent chain from z0 and stops when L^{z0} reaches t.
class InverseLtSampler {
 public:
  InverseLtSampler(const ChainModel& model, std::size_t z0) : m_(model.mass()), z0_(z0) {
    if (!model.recurrent()) throw PreconditionError("sample_inverse_lt_field: model must be recurrent");
    if (z0 >= model.size()) throw UnknownState("sample_inverse_lt_field: z0 out of range");
    const auto n = model.size();
    for (std::size_t x = 0; x < n; ++x) {
      std::vector<double> w(n + 1, 0.0);
      for (std::size_t y = 0; y < n; ++y)
        if (y != x) w[y] = model.jump_rates()(x, y);
      w[n] = model.kill_rates()(x);
      laws_.push_back(detail::make_exit_law(w));
    }
  }

  InverseLtSample sample(double t, Rng& rng) const {
    if (!(t >= 0.0)) throw PreconditionError("sample_inverse_lt_field: t must be nonnegative");
    const auto n = laws_.size();
    InverseLtSample out;
    Vector occ = Vector::Zero(static_cast<Eigen::Index>(n));
    const auto z = static_cast<Eigen::Index>(z0_);
    const double target = t * m_(z);
    std::discrete_distribution<std::size_t> pick;
    std::size_t x = z0_;
    while (t > 0.0) {
      const auto& law = laws_[x];
      if (law.rate == 0.0) throw Error("sample_inverse_lt_field: chain is stuck");
      const double hold = std::exponential_distribution<double>(law.rate)(rng);
      if (x == z0_ && occ(z) + hold >= target) {
        out.lifetime += target - occ(z);
        occ(z) = target;
        break;
      }
      occ(static_cast<Eigen::Index>(x)) += hold;
      out.lifetime += hold;
      const auto next = pick(rng, law.targets);
      if (next == n) throw Error("sample_inverse_lt_field: path was killed");
      x = next;
    }
    out.field.values = occ.cwiseQuotient(m_);
    out.field.values(z) = t;
    return out;
  }

 private:
  Vector m_;
  std::size_t z0_;
  std::vector<detail::ExitLaw> laws_;
};

inline InverseLtSample sample_inverse_lt_field(const ChainModel& model, std::size_t z0, double t,
                                               Rng& rng) {
  return InverseLtSampler(model, z0).sample(t, rng);
}

inline constexpr double kPsdTolerance = 1e-10;

/// Centered Gaussian field with covariance C via the symmetric square root.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Matrix& c) {
    if (c.rows() != c.cols()) throw PreconditionError("sample_gaussian: covariance must be square");
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > kPsdTolerance * scale)
      throw PreconditionError("sample_gaussian: covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c + c.transpose()));
    Vector ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) < -kPsdTolerance) throw PreconditionError("sample_gaussian: covariance is not PSD");
      ev(i) = std::sqrt(std::max(ev(i), 0.0));
    }
    root_ = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  }

  Vector draw(Rng& rng) const {
    std::normal_distribution<double> nd;
    Vector z(root_.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = nd(rng);
    return root_ * z;
  }

  const Matrix& root() const noexcept { return root_; }

 private:
  Matrix root_;
};

/// `count` draws, one per column.
inline Matrix sample_gaussian(const Matrix& c, std::size_t count, Rng& rng) {
  GaussianSampler g(c);
  Matrix out(c.rows(), static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) out.col(static_cast<Eigen::Index>(j)) = g.draw(rng);
  return out;
}

/// Occupation field of the soup with alpha = k/2: sum of k independent G^2/2.
class HalfIntSoupSampler {
 public:
  HalfIntSoupSampler(const Matrix& u, int half_units) : gauss_(u), k_(half_units) {
    if (half_units < 1) throw PreconditionError("sample_halfint_soup_field: k must be >= 1");
  }

  LocalTimeField draw(Rng& rng) const {
    Vector f = Vector::Zero(gauss_.root().rows());
    for (int i = 0; i < k_; ++i) f += 0.5 * gauss_.draw(rng).array().square().matrix();
    return {f};
  }

 private:
  GaussianSampler gauss_;
  int k_;
};

inline LocalTimeField sample_halfint_soup_field(const Matrix& u, int half_units, Rng& rng) {
  return HalfIntSoupSampler(u, half_units).draw(rng);
}

/// Counts N_i ~ Poisson(intensity * weights_i) on a finite atomic measure.
inline std::vector<long> sample_poisson_functional(const std::vector<double>& weights, double intensity,
                                                   Rng& rng) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity))
    throw PreconditionError("sample_poisson_functional: intensity must be finite and nonnegative");
  std::vector<long> n;
  n.reserve(weights.size());
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw PreconditionError("sample_poisson_functional: atom masses must be finite and nonnegative");
    const double mean = intensity * w;
    n.push_back(mean > 0.0 ? std::poisson_distribution<long>(mean)(rng) : 0L);
  }
  return n;
}

/// Welford mean and variance.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace isokit
