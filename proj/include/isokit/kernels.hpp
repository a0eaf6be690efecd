#pragma once

// Transition densities and potential kernels of a finite chain.
//
// Every kernel is a density with respect to the reference measure m, so the
// column for state y carries a factor 1/m(y). With M = diag(m):
//   u^alpha        = (alpha I - Q)^{-1} M^{-1}
//   u_{T0}         = (-Q restricted to S \ {z0})^{-1} M^{-1}, zero-padded at z0
//   u_{tau(lambda)} = u_{T0} + mean(lambda)

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "isokit/error.hpp"
#include "isokit/model.hpp"

namespace isokit {

enum class KernelKind { alpha_potential, potential, killed_at, tau_potential };

inline const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::alpha_potential: return "alpha_potential";
    case KernelKind::potential: return "potential";
    case KernelKind::killed_at: return "killed_at";
    case KernelKind::tau_potential: return "tau_potential";
  }
  return "?";
}

/// A square kernel over the states of a model, together with how it was built.
struct Kernel {
  Matrix entries;
  KernelKind kind = KernelKind::potential;
  double parameter = 0.0;            ///< alpha for alpha_potential, clock mean for tau_potential
  std::optional<std::size_t> z0;     ///< distinguished state of killed_at / tau_potential
  std::vector<std::string> states;   ///< state identifiers of the source model

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries.rows()); }
  double operator()(std::size_t x, std::size_t y) const { return entries(x, y); }

  /// Kernel with the same metadata-free shape, useful for tests on raw matrices.
  static Kernel from_matrix(Matrix m, KernelKind kind = KernelKind::potential) {
    Kernel k;
    k.entries = std::move(m);
    k.kind = kind;
    for (Eigen::Index i = 0; i < k.entries.rows(); ++i) k.states.push_back(std::to_string(i));
    return k;
  }
};

inline constexpr double kKernelAbsTol = 1e-10;
inline constexpr double kKernelRelTol = 1e-8;

/// exp(tQ). Uses the symmetric similarity M^{1/2} Q M^{-1/2} when detailed
/// balance holds, Pade scaling-and-squaring otherwise.
inline Matrix generator_exponential(const ChainModel& model, double t) {
  const Matrix& q = model.generator().matrix();
  if (check_symmetry(model).pass) {
    const Vector sq = model.mass().array().sqrt();
    const Vector isq = sq.cwiseInverse();
    Matrix s = sq.asDiagonal() * q * isq.asDiagonal();
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector ev = (t * es.eigenvalues().array()).exp();
    return isq.asDiagonal() * es.eigenvectors() * ev.asDiagonal() *
           es.eigenvectors().transpose() * sq.asDiagonal();
  }
  return (t * q).exp();
}

/// p_t(x,y), the density of X_t with respect to m under P^x.
inline Matrix transition_density(const ChainModel& model, double t) {
  if (!(t >= 0.0)) throw PreconditionError("transition_density: t must be nonnegative");
  return generator_exponential(model, t) * model.mass().cwiseInverse().asDiagonal();
}

/// u^alpha(x,y) = int_0^inf e^{-alpha t} p_t(x,y) dt.
inline Kernel alpha_potential(const ChainModel& model, double alpha) {
  if (!(alpha >= 0.0)) throw PreconditionError("alpha_potential: alpha must be nonnegative");
  if (alpha == 0.0 && model.recurrent())
    throw PreconditionError("0-potential of a recurrent model is infinite");
  const auto n = static_cast<Eigen::Index>(model.size());
  const Matrix a = alpha * Matrix::Identity(n, n) - model.generator().matrix();
  Kernel k;
  k.entries = a.fullPivLu().solve(Matrix(model.mass().cwiseInverse().asDiagonal()));
  k.kind = alpha == 0.0 ? KernelKind::potential : KernelKind::alpha_potential;
  k.parameter = alpha;
  k.states = model.states();
  return k;
}

/// u = u^0 of a transient model.
inline Kernel potential(const ChainModel& model) { return alpha_potential(model, 0.0); }

/// Green function of the chain killed on first hitting z0, u_{T0}(x,y) = E^x L^y_{T0}.
inline Kernel killed_potential(const ChainModel& model, std::size_t z0) {
  const auto n = static_cast<Eigen::Index>(model.size());
  if (z0 >= model.size()) throw UnknownState("killed_potential: z0 out of range");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != static_cast<Eigen::Index>(z0)) keep.push_back(i);
  const auto r = static_cast<Eigen::Index>(keep.size());

  Matrix qr(r, r);
  Vector inv_m(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    inv_m(i) = 1.0 / model.mass()(keep[i]);
    for (Eigen::Index j = 0; j < r; ++j) qr(i, j) = model.generator()(keep[i], keep[j]);
  }
  if (r > 0 && !(spectral_abscissa(qr) < -kTransienceThreshold))
    throw PreconditionError("killed_potential: some state cannot reach '" + model.state_name(z0) +
                            "'");

  Kernel k;
  k.entries = Matrix::Zero(n, n);
  if (r > 0) {
    const Matrix g = (-qr).fullPivLu().solve(Matrix(inv_m.asDiagonal()));
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < r; ++j) k.entries(keep[i], keep[j]) = g(i, j);
  }
  k.kind = KernelKind::killed_at;
  k.z0 = z0;
  k.states = model.states();
  return k;
}

/// u^alpha(x,y) - u^alpha(x,z0)u^alpha(z0,y)/u^alpha(z0,z0) at a small alpha;
/// converges to u_{T0} as alpha -> 0.
inline Kernel killed_potential_limit(const ChainModel& model, std::size_t z0, double alpha = 1e-8) {
  if (!(alpha > 0.0)) throw PreconditionError("killed_potential_limit: alpha must be positive");
  const Kernel ua = alpha_potential(model, alpha);
  const auto z = static_cast<Eigen::Index>(z0);
  Kernel k;
  k.entries = ua.entries - ua.entries.col(z) * ua.entries.row(z) / ua.entries(z, z);
  k.kind = KernelKind::killed_at;
  k.z0 = z0;
  k.states = model.states();
  return k;
}

/// Potential of the chain killed at tau(lambda), lambda exponential with the given mean.
inline Kernel tau_potential(const Kernel& killed, double clock_mean) {
  if (killed.kind != KernelKind::killed_at || !killed.z0)
    throw PreconditionError("tau_potential needs a killed_at kernel");
  if (!(clock_mean > 0.0)) throw PreconditionError("tau_potential: clock mean must be positive");
  Kernel k = killed;
  k.entries.array() += clock_mean;
  k.kind = KernelKind::tau_potential;
  k.parameter = clock_mean;
  return k;
}

/// Closed forms for standard Brownian motion on the line.
struct BrownianOracles {
  double u_alpha;        ///< e^{-sqrt(2 alpha)|x-y|} / sqrt(2 alpha)
  double u_killed;       ///< (|x| + |y|) - |x - y|, the potential killed at 0
  double inverse_lt_lt;  ///< E^0 e^{-beta tau(t)} = e^{-t sqrt(2 beta)}
};

inline BrownianOracles bm_oracles(double alpha, double x, double y, double t, double beta) {
  if (!(alpha > 0.0)) throw PreconditionError("bm_oracles: alpha must be positive");
  if (!(beta > 0.0)) throw PreconditionError("bm_oracles: beta must be positive");
  if (!(t >= 0.0)) throw PreconditionError("bm_oracles: t must be nonnegative");
  const double r = std::sqrt(2.0 * alpha);
  return {std::exp(-r * std::abs(x - y)) / r, (std::abs(x) + std::abs(y)) - std::abs(x - y),
          std::exp(-t * std::sqrt(2.0 * beta))};
}

/// P^{z0}(e^{-beta tau(t)}) = e^{-t / u^beta(z0,z0)}.
inline double inverse_lt_laplace(const ChainModel& model, std::size_t z0, double beta, double t) {
  if (!(beta > 0.0)) throw PreconditionError("inverse_lt_laplace: beta must be positive");
  if (!(t >= 0.0)) throw PreconditionError("inverse_lt_laplace: t must be nonnegative");
  if (z0 >= model.size()) throw UnknownState("inverse_lt_laplace: z0 out of range");
  const auto z = static_cast<Eigen::Index>(z0);
  return std::exp(-t / alpha_potential(model, beta).entries(z, z));
}

/// Row-major CSV with a header of state identifiers and a leading label column.
inline void write_kernel_csv(std::ostream& os, const Kernel& k) {
  const auto prec = os.precision(17);
  os << "state";
  for (const auto& s : k.states) os << ',' << s;
  os << '\n';
  for (Eigen::Index i = 0; i < k.entries.rows(); ++i) {
    os << k.states[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k.entries.cols(); ++j) os << ',' << k.entries(i, j);
    os << '\n';
  }
  os.precision(prec);
}

}  // namespace isokit
