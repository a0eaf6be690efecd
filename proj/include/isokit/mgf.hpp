#pragma once

// Determinant and resolvent forms of the Laplace functionals, each with a
// Neumann-series twin. With Lambda = diag(lambda) and
// Cbar = (I - C Lambda)^{-1} C:
//   E exp(sum lambda_j u_j G_j + lambda_j G_j^2 / 2) = det(I - Lambda C)^{-1/2} exp(u' Lambda Cbar Lambda u / 2)
//   Q^{x1,x2}(exp sum lambda_j L^{x_j}) = Cbar(x1, x2)
//   P^{x1}(exp sum lambda_j L^{x_j}) = 1 + (Cbar lambda)(x1)
//   E^{z0} exp(sum lambda_j L^{x_j}_{tau(t)}) = exp(t 1' Lambda (I - C0 Lambda)^{-1} 1)

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "isokit/error.hpp"
#include "isokit/kernels.hpp"
#include "isokit/moments.hpp"

namespace isokit {

inline constexpr double kLoadMargin = 1.0 - 1e-6;
inline constexpr double kSeriesTolerance = 1e-13;
inline constexpr int kMaxSeriesTerms = 100000;

/// Per-state weights lambda_j.
struct DiagonalLoad {
  Vector lambda;

  DiagonalLoad() = default;
  explicit DiagonalLoad(Vector l) : lambda(std::move(l)) {}

  Matrix matrix() const { return lambda.asDiagonal(); }
  DiagonalLoad scaled(double d) const { return DiagonalLoad(d * lambda); }
  Eigen::Index size() const { return lambda.size(); }
};

inline double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Spectral radius of C Lambda; throws ConvergenceError outside the margin.
inline double check_load(const Matrix& c, const DiagonalLoad& load) {
  if (load.size() != c.rows()) throw PreconditionError("load length does not match the kernel");
  const double rho = spectral_radius(c * load.matrix());
  if (!(rho < kLoadMargin))
    throw ConvergenceError("spectral radius of C*Lambda is " + std::to_string(rho) + ", needs < 1",
                           rho);
  return rho;
}

/// (I - C Lambda)^{-1} C.
inline Matrix cbar(const Matrix& c, const DiagonalLoad& load) {
  check_load(c, load);
  const auto n = c.rows();
  return (Matrix::Identity(n, n) - c * load.matrix()).partialPivLu().solve(c);
}

namespace detail {

/// Infinity-norm, which is submultiplicative.
inline double inf_norm(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

/// Sums term_0 + term_1 + ..., term_{k+1} = step(term_k), until the tail is negligible.
/// With q = ||A|| < 1 the tail after term k is bounded by ||term_k|| q / (1 - q);
/// otherwise fall back to requiring small consecutive terms.
template <class T, class Step>
T neumann_sum(T term, double q, Step&& step) {
  T sum = term;
  int small = 0;
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    term = step(term);
    sum += term;
    const double tn = term.cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, static_cast<double>(sum.cwiseAbs().maxCoeff()));
    if (q < 1.0) {
      if (tn * q / (1.0 - q) < kSeriesTolerance * scale) return sum;
    } else if (tn < kSeriesTolerance * scale) {
      if (++small >= 8) return sum;
    } else {
      small = 0;
    }
  }
  throw ConvergenceError("series did not converge", q);
}

}  // namespace detail

/// sum_{k >= 0} (C Lambda)^k C.
inline Matrix cbar_series(const Matrix& c, const DiagonalLoad& load) {
  check_load(c, load);
  const Matrix a = c * load.matrix();
  return detail::neumann_sum(Matrix(c), detail::inf_norm(a), [&](const Matrix& t) { return Matrix(a * t); });
}

/// det(I - Lambda C)^{-1/2} exp(u' Lambda Cbar Lambda u / 2).
inline double gauss_square_mgf(const Matrix& c, const DiagonalLoad& load, const Vector& u) {
  check_load(c, load);
  const auto n = c.rows();
  const Matrix l = load.matrix();
  const double det = (Matrix::Identity(n, n) - l * c).partialPivLu().determinant();
  if (!(det > 0.0)) throw ConvergenceError("det(I - Lambda C) is not positive", 1.0);
  const Vector lu = l * u;
  const double quad = lu.dot(cbar(c, load) * lu);
  return std::exp(0.5 * quad) / std::sqrt(det);
}

inline double gauss_square_mgf(const Matrix& c, const DiagonalLoad& load) {
  return gauss_square_mgf(c, load, Vector::Zero(c.rows()));
}

/// E exp(sum lambda_j (G_j + u_j)^2 / 2).
inline double shifted_square_mgf(const Matrix& c, const DiagonalLoad& load, const Vector& u) {
  return gauss_square_mgf(c, load, u) * std::exp(0.5 * u.dot(load.lambda.cwiseProduct(u)));
}

/// (1/2) sum_k tr((C Lambda)^k) / k, the series for -(1/2) log det(I - Lambda C).
inline double log_det_series(const Matrix& c, const DiagonalLoad& load) {
  const double rho = check_load(c, load);
  const Matrix a = c * load.matrix();
  Matrix p = a;
  double sum = 0.0;
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    const double term = p.trace() / k;
    sum += term;
    if (std::pow(rho, k) / (1.0 - rho) * a.rows() < kSeriesTolerance) return 0.5 * sum;
    p = p * a;
  }
  throw ConvergenceError("log-det series did not converge", rho);
}

/// Visits every multi-index n over the support of lambda with |n| <= degree,
/// passing the point list (state j repeated n_j times) and prod lambda^n / n!.
template <class F>
void for_each_load_monomial(const DiagonalLoad& load, int degree, F&& f) {
  std::vector<std::size_t> support;
  for (Eigen::Index j = 0; j < load.size(); ++j)
    if (load.lambda(j) != 0.0) support.push_back(static_cast<std::size_t>(j));
  Points pts;
  auto rec = [&](auto&& self, std::size_t i, int left, double w) -> void {
    if (i == support.size()) {
      f(std::as_const(pts), w);
      return;
    }
    const double l = load.lambda(static_cast<Eigen::Index>(support[i]));
    const auto mark = pts.size();
    double wk = w;
    for (int k = 0; k <= left; ++k) {
      if (k > 0) {
        pts.push_back(support[i]);
        wk *= l / k;
      }
      self(self, i + 1, left - k, wk);
    }
    pts.resize(mark);
  };
  rec(rec, 0, degree, 1.0);
}

/// Taylor series of E exp(sum lambda_j G_j^2 / 2) through total degree `degree`,
/// from the Gaussian square moments.
inline double gauss_square_mgf_series(const Matrix& c, const DiagonalLoad& load, int degree) {
  double sum = 0.0;
  for_each_load_monomial(load, degree, [&](const Points& pts, double w) {
    sum += w * gauss_square_moment(c, pts);
  });
  return sum;
}

// ---------------------------------------------------------------------------
// Bridge and start measures
// ---------------------------------------------------------------------------

inline double bridge_mgf(const Matrix& c, const DiagonalLoad& load, std::size_t x1, std::size_t x2) {
  detail::check_points(c, std::array{x1, x2});
  return cbar(c, load)(static_cast<Eigen::Index>(x1), static_cast<Eigen::Index>(x2));
}

inline double bridge_mgf_series(const Matrix& c, const DiagonalLoad& load, std::size_t x1,
                                std::size_t x2) {
  detail::check_points(c, std::array{x1, x2});
  return cbar_series(c, load)(static_cast<Eigen::Index>(x1), static_cast<Eigen::Index>(x2));
}

/// Taylor series of the bridge functional from the bridge moments.
inline double bridge_mgf_moment_series(const Matrix& c, const DiagonalLoad& load, std::size_t x1,
                                       std::size_t x2, int degree) {
  double sum = 0.0;
  for_each_load_monomial(load, degree, [&](const Points& pts, double w) {
    sum += w * lt_moment_bridge(c, x1, x2, pts);
  });
  return sum;
}

/// 1 + sum_j (sum_{k>=1} (C Lambda)^k)_{x1, j}, via the resolvent.
inline double start_mgf(const Matrix& c, const DiagonalLoad& load, std::size_t x1) {
  detail::check_points(c, std::array{x1});
  return 1.0 + (cbar(c, load) * load.lambda)(static_cast<Eigen::Index>(x1));
}

/// The same functional summed as a Neumann series.
inline double start_mgf_series(const Matrix& c, const DiagonalLoad& load, std::size_t x1) {
  detail::check_points(c, std::array{x1});
  check_load(c, load);
  const Matrix a = c * load.matrix();
  const Vector first = a * Vector::Ones(c.rows());
  const Vector s = detail::neumann_sum(first, detail::inf_norm(a), [&](const Vector& t) { return Vector(a * t); });
  return 1.0 + s(static_cast<Eigen::Index>(x1));
}

/// Taylor series of the start functional from the local time moments under P^{x1}.
inline double start_mgf_moment_series(const Matrix& c, const DiagonalLoad& load, std::size_t x1,
                                      int degree) {
  double sum = 0.0;
  for_each_load_monomial(load, degree, [&](const Points& pts, double w) {
    sum += w * lt_moment_start(c, x1, pts);
  });
  return sum;
}

// ---------------------------------------------------------------------------
// Inverse local time, excursions, interlacements
// ---------------------------------------------------------------------------

/// exp(t 1' Lambda (I - C0 Lambda)^{-1} 1).
inline double rayknight_mgf(const Kernel& u_t0, const DiagonalLoad& load, double t) {
  const Matrix& c0 = u_t0.entries;
  check_load(c0, load);
  const auto n = c0.rows();
  const Vector r = (Matrix::Identity(n, n) - c0 * load.matrix()).partialPivLu().solve(Vector::Ones(n));
  return std::exp(t * load.lambda.dot(r));
}

/// h(k) = 1' Lambda (C0 Lambda)^{k-1} 1 for k = 1.. until the tail is negligible.
inline std::vector<double> h_series(const Matrix& c0, const DiagonalLoad& load) {
  check_load(c0, load);
  const Matrix a = c0 * load.matrix();
  const double q = detail::inf_norm(a);
  std::vector<double> h;
  Vector v = Vector::Ones(c0.rows());
  int small = 0;
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    h.push_back(load.lambda.dot(v));
    const double vn = v.cwiseAbs().maxCoeff() * load.lambda.cwiseAbs().sum();
    if (q < 1.0) {
      if (vn * q / (1.0 - q) < kSeriesTolerance) return h;
    } else if (vn < kSeriesTolerance) {
      if (++small >= 8) return h;
    } else {
      small = 0;
    }
    v = a * v;
  }
  throw ConvergenceError("h series did not converge", q);
}

/// exp(t sum_j h(j)).
inline double rayknight_mgf_series(const Kernel& u_t0, const DiagonalLoad& load, double t) {
  double s = 0.0;
  for (double h : h_series(u_t0.entries, load)) s += h;
  return std::exp(t * s);
}

/// E exp(sum lambda (eta + sqrt(2t))^2 / 2) / E exp(sum lambda eta^2 / 2), eta with covariance u_{T0}.
inline double rayknight_gaussian_ratio(const Kernel& u_t0, const DiagonalLoad& load, double t) {
  const Matrix& c0 = u_t0.entries;
  const Vector shift = Vector::Constant(c0.rows(), std::sqrt(2.0 * t));
  return shifted_square_mgf(c0, load, shift) / gauss_square_mgf(c0, load);
}

/// n(exp(delta int L dnu) - 1) = sum_{n >= 1} delta^n h(n).
inline double excursion_mgf_exponent(const Kernel& u_t0, const DiagonalLoad& load, double delta) {
  if (delta == 0.0) return 0.0;
  double s = 0.0;
  for (double h : h_series(u_t0.entries, load.scaled(delta))) s += h;
  return s;
}

/// The two sides of the interlacement identity in Laplace form.
struct MgfPair {
  double lhs;
  double rhs;
};

/// lhs: Gaussian ratio of E exp(delta(:G^2:(nu)/2 + sqrt(2t) G(nu) + t|nu|)) over
/// E exp(delta :G^2:(nu)/2) by determinants; rhs: exp(t sum_n delta^n int prod u dnu^n).
inline MgfPair interlacement_mgf_check(const Matrix& u, const Vector& nu, double t, double delta) {
  if (nu.size() != u.rows()) throw UnknownState("measure length does not match the kernel");
  const DiagonalLoad load(delta * nu);
  check_load(u, load);
  const double centering = std::exp(-0.5 * delta * nu.dot(u.diagonal()));
  const Vector shift = Vector::Constant(u.rows(), std::sqrt(2.0 * t));
  const double num = std::exp(delta * t * nu.sum()) * centering * gauss_square_mgf(u, load, shift);
  const double den = centering * gauss_square_mgf(u, load);
  double s = 0.0;
  for (double h : h_series(u, load)) s += h;
  return {num / den, std::exp(t * s)};
}

}  // namespace isokit
