#pragma once

// Pairings, set partitions, permutations and cyclic permutations, and the
// kernel functionals built on them:
//   cy(A)        sum over cyclic orders of K(a1,a2)K(a2,a3)...K(ak,a1)
//   ch(A; a, b)  sum over orders of K(a,a1)K(a1,a2)...K(ak,b)
//   ch(B)        sum over orders of K(b1,b2)...K(b(k-1),bk), 1 for a singleton
//   perm_alpha   sum over permutations of alpha^{#cycles} prod K(x_i, x_pi(i))
//
// Points are state indices and may repeat: every formula works at the level
// of index positions, and only evaluates the kernel on the states at the end.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "isokit/error.hpp"

namespace isokit {

using Points = std::vector<std::size_t>;
using PointSpan = std::span<const std::size_t>;

inline constexpr std::size_t kMaxPairingPoints = 12;
inline constexpr std::size_t kMaxPartitionPoints = 10;
inline constexpr std::size_t kMaxPermanentPoints = 9;

/// A perfect matching of the index set [0, n).
struct Pairing {
  std::vector<std::pair<int, int>> pairs;
};

/// Blocks of a set partition, each sorted, blocks ordered by least element.
struct SetPartition {
  std::vector<std::vector<int>> blocks;
};

/// A cyclic arrangement, stored starting from its least element.
struct CyclicPerm {
  std::vector<int> order;

  /// Rotates `arrangement` so it starts at its least element.
  static CyclicPerm canonical(std::vector<int> arrangement) {
    auto it = std::min_element(arrangement.begin(), arrangement.end());
    std::rotate(arrangement.begin(), it, arrangement.end());
    return CyclicPerm{std::move(arrangement)};
  }

  friend bool operator==(const CyclicPerm&, const CyclicPerm&) = default;
};

namespace detail {

inline void check_points(const Eigen::MatrixXd& k, PointSpan points) {
  for (auto p : points)
    if (p >= static_cast<std::size_t>(k.rows()))
      throw UnknownState("point index " + std::to_string(p) + " is not a state of the kernel");
}

inline void check_cap(std::size_t n, std::size_t cap, const char* what) {
  if (n > cap)
    throw CapExceeded(std::string(what) + ": " + std::to_string(n) + " points exceeds the cap of " +
                      std::to_string(cap));
}

inline void build_pairings(std::vector<int>& rest, std::vector<std::pair<int, int>>& cur,
                           std::vector<Pairing>& out) {
  if (rest.empty()) {
    out.push_back(Pairing{cur});
    return;
  }
  const int first = rest.front();
  for (std::size_t i = 1; i < rest.size(); ++i) {
    const int partner = rest[i];
    std::vector<int> next;
    next.reserve(rest.size() - 2);
    for (std::size_t j = 1; j < rest.size(); ++j)
      if (j != i) next.push_back(rest[j]);
    cur.emplace_back(first, partner);
    build_pairings(next, cur, out);
    cur.pop_back();
  }
}

inline const std::vector<Pairing>& pairing_table(std::size_t n) {
  static const auto table = [] {
    std::array<std::vector<Pairing>, kMaxPairingPoints + 1> t;
    for (std::size_t m = 0; m <= kMaxPairingPoints; m += 2) {
      std::vector<int> idx(m);
      std::iota(idx.begin(), idx.end(), 0);
      std::vector<std::pair<int, int>> cur;
      build_pairings(idx, cur, t[m]);
    }
    return t;
  }();
  return table[n];
}

}  // namespace detail

/// All pairings of [0, n); empty for odd n, one empty pairing for n = 0.
inline std::vector<Pairing> enum_pairings(std::size_t n) {
  detail::check_cap(n, kMaxPairingPoints, "enum_pairings");
  if (n % 2 == 1) return {};
  return detail::pairing_table(n);
}

/// Set partitions of [0, n) whose blocks all have at least `min_block` elements.
inline std::vector<SetPartition> enum_partitions(std::size_t n, std::size_t min_block = 1) {
  detail::check_cap(n, kMaxPartitionPoints, "enum_partitions");
  std::vector<SetPartition> out;
  // Restricted growth strings: a[i] <= 1 + max(a[0..i-1]).
  std::vector<int> a(n, 0);
  auto emit = [&] {
    int nb = n == 0 ? 0 : *std::max_element(a.begin(), a.end()) + 1;
    SetPartition p;
    p.blocks.resize(static_cast<std::size_t>(nb));
    for (std::size_t i = 0; i < n; ++i) p.blocks[static_cast<std::size_t>(a[i])].push_back(static_cast<int>(i));
    for (const auto& b : p.blocks)
      if (b.size() < min_block) return;
    out.push_back(std::move(p));
  };
  if (n == 0) {
    out.push_back(SetPartition{});
    return out;
  }
  std::vector<int> mx(n, 0);  // mx[i] = max(a[0..i-1])
  while (true) {
    emit();
    // Increment the rightmost position that can grow.
    std::size_t i = n;
    while (i-- > 1) {
      const int limit = mx[i] + 1;
      if (a[i] < limit) break;
    }
    if (i == 0) break;
    ++a[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      mx[j] = std::max(mx[j - 1], a[j - 1]);
    }
  }
  return out;
}

/// Set partitions of an explicit index list.
inline std::vector<SetPartition> enum_partitions(const std::vector<int>& indices,
                                                 std::size_t min_block = 1) {
  auto parts = enum_partitions(indices.size(), min_block);
  for (auto& p : parts)
    for (auto& b : p.blocks)
      for (auto& i : b) i = indices[static_cast<std::size_t>(i)];
  return parts;
}

/// The (k-1)! cyclic permutations of [0, k), each starting at 0.
inline std::vector<CyclicPerm> enum_cyclic_perms(std::size_t k) {
  std::vector<CyclicPerm> out;
  if (k == 0) return out;
  std::vector<int> rest(k - 1);
  std::iota(rest.begin(), rest.end(), 1);
  do {
    std::vector<int> order{0};
    order.insert(order.end(), rest.begin(), rest.end());
    out.push_back(CyclicPerm{std::move(order)});
  } while (std::next_permutation(rest.begin(), rest.end()));
  return out;
}

/// Calls f(perm) for every permutation of [0, k) in lexicographic order.
template <class F>
void for_each_permutation(std::size_t k, F&& f) {
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    f(std::as_const(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
}

/// Number of cycles of a permutation given in one-line notation.
inline int cycle_count(const std::vector<int>& perm) {
  std::vector<char> seen(perm.size(), 0);
  int c = 0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (seen[i]) continue;
    ++c;
    for (auto j = i; !seen[j]; j = static_cast<std::size_t>(perm[j])) seen[j] = 1;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Kernel functionals
// ---------------------------------------------------------------------------

/// cy(block): sum over the (k-1)! cyclic orders of the block.
inline double cycle_value(const Eigen::MatrixXd& k, PointSpan block) {
  detail::check_points(k, block);
  const auto n = block.size();
  if (n == 0) throw PreconditionError("cycle_value: empty block");
  if (n == 1) return k(block[0], block[0]);
  std::vector<int> rest(n - 1);
  std::iota(rest.begin(), rest.end(), 1);
  double total = 0.0;
  do {
    double prod = k(block[0], block[rest[0]]);
    for (std::size_t i = 0; i + 1 < rest.size(); ++i) prod *= k(block[rest[i]], block[rest[i + 1]]);
    prod *= k(block[rest.back()], block[0]);
    total += prod;
  } while (std::next_permutation(rest.begin(), rest.end()));
  return total;
}

/// ch(interior; a, b): sum over orders of the interior points of the chain a -> ... -> b.
inline double chain_value(const Eigen::MatrixXd& k, std::size_t a, std::size_t b, PointSpan interior) {
  detail::check_points(k, interior);
  detail::check_points(k, std::array{a, b});
  const auto n = interior.size();
  if (n == 0) return k(a, b);
  double total = 0.0;
  for_each_permutation(n, [&](const std::vector<int>& p) {
    double prod = k(a, interior[p[0]]);
    for (std::size_t i = 0; i + 1 < n; ++i) prod *= k(interior[p[i]], interior[p[i + 1]]);
    total += prod * k(interior[p[n - 1]], b);
  });
  return total;
}

/// ch(block): oriented chains through the block with no endpoints; 1 for a singleton.
inline double free_chain_value(const Eigen::MatrixXd& k, PointSpan block) {
  detail::check_points(k, block);
  const auto n = block.size();
  if (n == 0) throw PreconditionError("free_chain_value: empty block");
  if (n == 1) return 1.0;
  double total = 0.0;
  for_each_permutation(n, [&](const std::vector<int>& p) {
    double prod = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) prod *= k(block[p[i]], block[p[i + 1]]);
    total += prod;
  });
  return total;
}

/// alpha-permanent: sum over permutations of alpha^{c(pi)} prod_i K(x_i, x_pi(i)).
/// alpha = 1 is the permanent; alpha = -1 gives (-1)^n det.
inline double alpha_permanent(const Eigen::MatrixXd& k, PointSpan points, double alpha) {
  detail::check_points(k, points);
  detail::check_cap(points.size(), kMaxPermanentPoints, "alpha_permanent");
  const auto n = points.size();
  if (n == 0) return 1.0;
  double total = 0.0;
  for_each_permutation(n, [&](const std::vector<int>& p) {
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) prod *= k(points[i], points[static_cast<std::size_t>(p[i])]);
    if (prod != 0.0) total += std::pow(alpha, cycle_count(p)) * prod;
  });
  return total;
}

// ---------------------------------------------------------------------------
// Subset machinery shared by the moment engines
// ---------------------------------------------------------------------------

using Mask = std::uint32_t;

/// Points selected by the bits of `mask`, in index order.
inline Points subset(PointSpan points, Mask mask) {
  Points out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (mask & (Mask{1} << i)) out.push_back(points[i]);
  return out;
}

/// Sum over set partitions of [0, n) of the product of block weights, where
/// weight(mask) gives the weight of the block `mask`. Computed by the
/// recursion over the block containing the lowest remaining index.
template <class Weight>
double partition_sum(std::size_t n, Weight&& weight) {
  const Mask full = n == 0 ? 0 : (Mask{1} << n) - 1;
  std::vector<double> w(std::size_t{full} + 1, 0.0);
  for (Mask b = 1; b <= full; ++b) w[b] = weight(b);
  std::vector<double> dp(std::size_t{full} + 1, 0.0);
  dp[0] = 1.0;
  for (Mask mask = 1; mask <= full; ++mask) {
    const Mask low = mask & (~mask + 1);
    const Mask rest = mask ^ low;
    double acc = 0.0;
    // Enumerate submasks s of rest; the block is s | low.
    for (Mask s = rest;; s = (s - 1) & rest) {
      const Mask block = s | low;
      if (w[block] != 0.0) acc += w[block] * dp[mask ^ block];
      if (s == 0) break;
    }
    dp[mask] = acc;
  }
  return dp[full];
}

}  // namespace isokit
