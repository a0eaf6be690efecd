#pragma once

// Moment engines. Each side of each isomorphism has its own engine:
//   Gaussian products            pairing enumeration (Isserlis)
//   Gaussian squares             set partitions of cycles, weight cy/2
//   local times under P^x, Q^xy  permutation chains on the potential kernel
//   loop measure / soup          cycles, partitions of cycles, alpha-permanents
//   inverse local time, excursions  free chains on the killed kernel
//   interlacements               chains and cycles integrated against measures
//
// Points are state indices; repeated points are distinct factors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isokit/combinat.hpp"
#include "isokit/error.hpp"
#include "isokit/kernels.hpp"

namespace isokit {

/// A point list plus the extra parameters some engines need.
struct MomentRequest {
  Points points;
  std::optional<std::pair<std::size_t, std::size_t>> endpoints;
  std::optional<double> shift;
  std::optional<double> level;
  std::vector<Vector> measures;
};

inline constexpr std::size_t kMaxPermutationPoints = 9;
inline constexpr std::size_t kMaxInterlacementMeasures = 8;

// ---------------------------------------------------------------------------
// Gaussian side
// ---------------------------------------------------------------------------

/// E prod G_{x_i} for a centered Gaussian field with covariance C.
inline double gauss_moment(const Matrix& c, PointSpan points) {
  detail::check_points(c, points);
  detail::check_cap(points.size(), kMaxPairingPoints, "gauss_moment");
  if (points.size() % 2 == 1) return 0.0;
  double total = 0.0;
  for (const auto& p : detail::pairing_table(points.size())) {
    double prod = 1.0;
    for (auto [i, j] : p.pairs) {
      prod *= c(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      if (prod == 0.0) break;
    }
    total += prod;
  }
  return total;
}

/// E prod G_{x_i}^2 / 2 as a sum over partitions of products of cy/2.
inline double gauss_square_moment(const Matrix& c, PointSpan points) {
  detail::check_points(c, points);
  detail::check_cap(points.size(), kMaxPartitionPoints, "gauss_square_moment");
  return partition_sum(points.size(),
                       [&](Mask b) { return 0.5 * cycle_value(c, subset(points, b)); });
}

/// E G_a G_b prod G_{x_i}^2 / 2, by pairing enumeration of the full product.
inline double gauss_pair_square_moment(const Matrix& c, std::size_t a, std::size_t b, PointSpan points) {
  if (2 * points.size() + 2 > kMaxPairingPoints)
    throw CapExceeded("gauss_pair_square_moment: at most 5 squared points");
  Points all{a, b};
  for (auto x : points) {
    all.push_back(x);
    all.push_back(x);
  }
  return std::ldexp(gauss_moment(c, all), -static_cast<int>(points.size()));
}

/// The same moment as a sum over subsets A of ch(A; a, b) E prod_{not A} G^2/2.
inline double gauss_pair_square_moment_chains(const Matrix& c, std::size_t a, std::size_t b,
                                              PointSpan points) {
  const auto n = points.size();
  detail::check_cap(n, kMaxPermutationPoints, "gauss_pair_square_moment_chains");
  const Mask full = n == 0 ? 0 : (Mask{1} << n) - 1;
  double total = 0.0;
  for (Mask a_mask = 0; a_mask <= full; ++a_mask) {
    total += chain_value(c, a, b, subset(points, a_mask)) *
             gauss_square_moment(c, subset(points, full ^ a_mask));
    if (a_mask == full) break;
  }
  return total;
}

/// E prod (G_{x_i} + s)^2 / 2: partitions whose blocks weigh cy/2 + (s^2/2) ch.
inline double shifted_square_moment(const Matrix& c, double s, PointSpan points) {
  detail::check_points(c, points);
  detail::check_cap(points.size(), kMaxPartitionPoints, "shifted_square_moment");
  const double w = 0.5 * s * s;
  return partition_sum(points.size(), [&](Mask b) {
    const auto block = subset(points, b);
    return 0.5 * cycle_value(c, block) + w * free_chain_value(c, block);
  });
}

/// One term of a Gaussian polynomial: coeff * prod G_{vars}.
struct Monomial {
  double coeff = 1.0;
  Points vars;
};

/// A factor of a product, as a sum of monomials.
using GaussFactor = std::vector<Monomial>;

/// E prod_f (sum of monomials of f), by expanding the product and applying
/// the pairing formula to every resulting monomial.
inline double gaussian_polynomial_moment(const Matrix& c, const std::vector<GaussFactor>& factors) {
  double total = 0.0;
  Points vars;
  auto rec = [&](auto&& self, std::size_t f, double coeff) -> void {
    if (coeff == 0.0) return;
    if (f == factors.size()) {
      if (vars.size() % 2 == 0) total += coeff * gauss_moment(c, vars);
      return;
    }
    for (const auto& mono : factors[f]) {
      const auto mark = vars.size();
      vars.insert(vars.end(), mono.vars.begin(), mono.vars.end());
      self(self, f + 1, coeff * mono.coeff);
      vars.resize(mark);
    }
  };
  rec(rec, 0, 1.0);
  return total;
}

/// (G_x + s)^2 / 2 expanded into monomials.
inline GaussFactor shifted_square_factor(std::size_t x, double s) {
  return {{0.5, {x, x}}, {s, {x}}, {0.5 * s * s, {}}};
}

/// E prod_l G_{y_l} prod_i (G_{x_i} + s)^2 / 2 by expansion.
inline double shifted_square_moment_expansion(const Matrix& c, double s, PointSpan points,
                                              PointSpan linear = {}) {
  std::vector<GaussFactor> factors;
  for (auto y : linear) factors.push_back({{1.0, {y}}});
  for (auto x : points) factors.push_back(shifted_square_factor(x, s));
  return gaussian_polynomial_moment(c, factors);
}

// ---------------------------------------------------------------------------
// Local times of the chain, the bridge measure and the loop measure
// ---------------------------------------------------------------------------

/// E^x prod L^{x_i}_inf = sum over orders of u(x, x_p1) u(x_p1, x_p2) ... u(x_p(n-1), x_pn).
inline double lt_moment_start(const Matrix& u, std::size_t x, PointSpan points) {
  detail::check_points(u, points);
  detail::check_points(u, std::array{x});
  const auto n = points.size();
  detail::check_cap(n, kMaxPermutationPoints, "lt_moment_start");
  if (n == 0) return 1.0;
  double total = 0.0;
  for_each_permutation(n, [&](const std::vector<int>& p) {
    double prod = u(x, points[p[0]]);
    for (std::size_t i = 0; i + 1 < n && prod != 0.0; ++i) prod *= u(points[p[i]], points[p[i + 1]]);
    total += prod;
  });
  return total;
}

/// Q^{x,y} prod L^{x_i}; the empty product is the total mass u(x, y).
inline double lt_moment_bridge(const Matrix& u, std::size_t x, std::size_t y, PointSpan points) {
  detail::check_cap(points.size(), kMaxPermutationPoints, "lt_moment_bridge");
  return chain_value(u, x, y, points);
}

/// mu(prod L^{x_j}) = cy over the whole point list.
inline double loop_measure_moment(const Matrix& u, PointSpan points) {
  detail::check_cap(points.size(), kMaxPermutationPoints, "loop_measure_moment");
  return cycle_value(u, points);
}

/// Loop measure moment as (1/k) times the sum over all k! orders around the circle.
inline double loop_measure_moment_perm(const Matrix& u, PointSpan points) {
  detail::check_points(u, points);
  const auto k = points.size();
  detail::check_cap(k, kMaxPermutationPoints, "loop_measure_moment_perm");
  if (k == 0) throw PreconditionError("loop_measure_moment_perm: empty point list");
  double total = 0.0;
  for_each_permutation(k, [&](const std::vector<int>& p) {
    double prod = 1.0;
    for (std::size_t i = 0; i < k; ++i) prod *= u(points[p[i]], points[p[(i + 1) % k]]);
    total += prod;
  });
  return total / static_cast<double>(k);
}

/// E prod Lhat^{x_i} for the soup of intensity alpha * mu: partitions, blocks weigh alpha cy.
inline double soup_field_moment(const Matrix& u, double alpha, PointSpan points) {
  detail::check_points(u, points);
  detail::check_cap(points.size(), kMaxPermanentPoints, "soup_field_moment");
  return partition_sum(points.size(),
                       [&](Mask b) { return alpha * cycle_value(u, subset(points, b)); });
}

/// The same moment as an alpha-permanent.
inline double soup_field_moment_permanent(const Matrix& u, double alpha, PointSpan points) {
  return alpha_permanent(u, points, alpha);
}

// ---------------------------------------------------------------------------
// Inverse local time and excursions
// ---------------------------------------------------------------------------

namespace detail {

inline void require_killed(const Kernel& k, const char* what) {
  if (k.kind != KernelKind::killed_at || !k.z0)
    throw PreconditionError(std::string(what) + " needs a killed_at kernel");
}

}  // namespace detail

/// Coefficients c_m of E^{z0} prod L^{x_i}_{tau(t)} = sum_m c_m t^m, where c_m
/// sums over partitions into m blocks the product of free chains on u_{T0}.
inline std::vector<double> rayknight_lhs_coefficients(const Kernel& u_t0, PointSpan points) {
  detail::require_killed(u_t0, "rayknight_lhs_coefficients");
  detail::check_points(u_t0.entries, points);
  const auto n = points.size();
  detail::check_cap(n, kMaxPermanentPoints, "rayknight_lhs_coefficients");
  std::vector<double> coeff(n + 1, 0.0);
  for (const auto& part : enum_partitions(n)) {
    double prod = 1.0;
    for (const auto& block : part.blocks) {
      Points pts;
      for (int i : block) pts.push_back(points[static_cast<std::size_t>(i)]);
      prod *= free_chain_value(u_t0.entries, pts);
      if (prod == 0.0) break;
    }
    coeff[part.blocks.size()] += prod;
  }
  return coeff;
}

/// E^{z0} prod L^{x_i}_{tau(t)}.
inline double rayknight_lhs_moment(const Kernel& u_t0, double t, PointSpan points) {
  const auto c = rayknight_lhs_coefficients(u_t0, points);
  double v = 0.0;
  for (std::size_t m = c.size(); m-- > 0;) v = v * t + c[m];
  return v;
}

/// n(prod L^{y_j}) under the excursion measure from z0; 1 for a single point.
inline double excursion_moment(const Kernel& u_t0, PointSpan points) {
  detail::require_killed(u_t0, "excursion_moment");
  for (auto p : points)
    if (p == *u_t0.z0) throw PreconditionError("excursion_moment: point equals the killed state");
  if (points.empty()) throw PreconditionError("excursion_moment: empty point list");
  return free_chain_value(u_t0.entries, points);
}

/// Moments of the Poisson process of excursions with intensity t n:
/// partitions, blocks weigh t n(prod over block).
inline double excursion_poisson_moment(const Kernel& u_t0, double t, PointSpan points) {
  detail::check_cap(points.size(), kMaxPermanentPoints, "excursion_poisson_moment");
  return partition_sum(points.size(),
                       [&](Mask b) { return t * excursion_moment(u_t0, subset(points, b)); });
}

// ---------------------------------------------------------------------------
// Interlacements: functionals integrated against measures nu_1..nu_k
// ---------------------------------------------------------------------------

namespace detail {

inline void check_measures(const Matrix& u, const std::vector<Vector>& nu, std::size_t cap) {
  check_cap(nu.size(), cap, "interlacement");
  for (const auto& v : nu)
    if (v.size() != u.rows()) throw UnknownState("measure length does not match the kernel");
}

/// ch(B, nu): sum over orders of the integrated chain; |nu_i| for a singleton.
inline double chain_nu(const Matrix& u, const std::vector<Vector>& nu, const std::vector<int>& block) {
  const auto k = block.size();
  if (k == 1) return nu[static_cast<std::size_t>(block[0])].sum();
  std::vector<int> order(block);
  std::sort(order.begin(), order.end());
  double total = 0.0;
  do {
    Vector v = nu[static_cast<std::size_t>(order[0])];
    for (std::size_t j = 1; j < k; ++j)
      v = (u.transpose() * v).cwiseProduct(nu[static_cast<std::size_t>(order[j])]);
    total += v.sum();
  } while (std::next_permutation(order.begin(), order.end()));
  return total;
}

/// cy(A, nu): sum over cyclic orders of tr(D_a1 U D_a2 U ... D_ak U).
inline double cycle_nu(const Matrix& u, const std::vector<Vector>& nu, const std::vector<int>& block) {
  const auto k = block.size();
  std::vector<int> rest(block.begin() + 1, block.end());
  std::sort(rest.begin(), rest.end());
  double total = 0.0;
  do {
    Matrix m = nu[static_cast<std::size_t>(block[0])].asDiagonal() * u;
    for (std::size_t j = 0; j + 1 < k; ++j)
      m = m * nu[static_cast<std::size_t>(rest[j])].asDiagonal() * u;
    total += m.trace();
  } while (std::next_permutation(rest.begin(), rest.end()));
  return total;
}

inline std::vector<int> mask_indices(Mask b) {
  std::vector<int> out;
  for (int i = 0; b; ++i, b >>= 1)
    if (b & 1) out.push_back(i);
  return out;
}

}  // namespace detail

/// P_m prod L(nu_j) for the interlacement intensity measure.
inline double interlacement_moment(const Matrix& u, const std::vector<Vector>& nu) {
  detail::check_measures(u, nu, kMaxInterlacementMeasures);
  if (nu.empty()) throw PreconditionError("interlacement_moment: no measures");
  std::vector<int> all(nu.size());
  std::iota(all.begin(), all.end(), 0);
  return detail::chain_nu(u, nu, all);
}

/// E prod :G^2:(nu_i) / 2, blocks of size at least two weigh cy(A, nu)/2.
inline double wick_square_moment(const Matrix& u, const std::vector<Vector>& nu) {
  detail::check_measures(u, nu, kMaxInterlacementMeasures);
  return partition_sum(nu.size(), [&](Mask b) {
    const auto idx = detail::mask_indices(b);
    return idx.size() < 2 ? 0.0 : 0.5 * detail::cycle_nu(u, nu, idx);
  });
}

/// E prod (:G^2:(nu_i)/2 + sqrt(2t) G(nu_i) + t|nu_i|): cycle blocks (size >= 2)
/// weigh cy/2, chain blocks weigh t ch.
inline double interlacement_gaussian_moment(const Matrix& u, double t, const std::vector<Vector>& nu) {
  detail::check_measures(u, nu, kMaxInterlacementMeasures);
  return partition_sum(nu.size(), [&](Mask b) {
    const auto idx = detail::mask_indices(b);
    const double cyc = idx.size() < 2 ? 0.0 : 0.5 * detail::cycle_nu(u, nu, idx);
    return cyc + t * detail::chain_nu(u, nu, idx);
  });
}

/// Moments of the interlacement occupation field at level t: partitions,
/// blocks weigh t ch(B, nu).
inline double interlacement_poisson_moment(const Matrix& u, double t, const std::vector<Vector>& nu) {
  detail::check_measures(u, nu, kMaxInterlacementMeasures);
  return partition_sum(nu.size(), [&](Mask b) {
    return t * detail::chain_nu(u, nu, detail::mask_indices(b));
  });
}

/// The Gaussian side by expanding every factor over states and pairing.
inline double interlacement_gaussian_moment_expansion(const Matrix& u, double t,
                                                      const std::vector<Vector>& nu) {
  detail::check_measures(u, nu, kMaxInterlacementMeasures);
  const double r = std::sqrt(2.0 * t);
  std::vector<GaussFactor> factors;
  for (const auto& v : nu) {
    GaussFactor f;
    double constant = 0.0;
    for (Eigen::Index x = 0; x < v.size(); ++x) {
      if (v(x) == 0.0) continue;
      const auto xs = static_cast<std::size_t>(x);
      f.push_back({0.5 * v(x), {xs, xs}});
      f.push_back({r * v(x), {xs}});
      constant += v(x) * (t - 0.5 * u(x, x));
    }
    f.push_back({constant, {}});
    factors.push_back(std::move(f));
  }
  return gaussian_polynomial_moment(u, factors);
}

}  // namespace isokit
