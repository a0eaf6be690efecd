#pragma once

// Random reversible chains for regression sweeps.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "isokit/model.hpp"

namespace isokit {

/// Transient reversible chain on n states, complete graph. Masses in
/// [0.8, 1.25]; jump rates in [0.1, 2] in both directions; kill in [0.2, 1].
template <class Urbg>
ChainModel random_reversible_model(Urbg& rng, std::size_t n) {
  std::uniform_real_distribution<double> mass(0.8, 1.25), kill(0.2, 1.0), unit(0.0, 1.0);
  std::vector<std::string> names;
  Vector m(static_cast<Eigen::Index>(n)), k(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("s" + std::to_string(i));
    m(static_cast<Eigen::Index>(i)) = mass(rng);
  }
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    for (Eigen::Index y = x + 1; y < q.rows(); ++y) {
      // q(y,x) = q(x,y)/r keeps m(x)q(x,y) = m(y)q(y,x); the range keeps both in [0.1, 2].
      const double r = m(y) / m(x);
      const double lo = 0.1 * std::max(1.0, r), hi = 2.0 * std::min(1.0, r);
      q(x, y) = lo + (hi - lo) * unit(rng);
      q(y, x) = q(x, y) / r;
    }
  }
  for (Eigen::Index i = 0; i < k.size(); ++i) k(i) = kill(rng);
  return ChainModel(names, m, q, k, true, false);
}

/// Recurrent reversible chain on a cycle of n states, built from symmetric
/// conductances c(x, x+1) in [0.5, 2]: q(x,y) = c(x,y)/m(x).
template <class Urbg>
ChainModel random_recurrent_cycle(Urbg& rng, std::size_t n) {
  std::uniform_real_distribution<double> mass(0.8, 1.25), cond(0.5, 2.0);
  std::vector<std::string> names;
  const auto nn = static_cast<Eigen::Index>(n);
  Vector m(nn);
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("c" + std::to_string(i));
    m(static_cast<Eigen::Index>(i)) = mass(rng);
  }
  Matrix q = Matrix::Zero(nn, nn);
  for (Eigen::Index x = 0; x < nn; ++x) {
    const Eigen::Index y = (x + 1) % nn;
    const double c = cond(rng);
    q(x, y) += c / m(x);
    q(y, x) += c / m(y);
  }
  return ChainModel(names, m, q, Vector::Zero(nn), true, true);
}

}  // namespace isokit
