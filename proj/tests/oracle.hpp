#pragma once

// Brute-force reference implementations for the tests. Nothing here calls
// into the isokit enumerators: pairings, permutations and set partitions are
// generated again from scratch, as plainly as possible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Pts = std::vector<std::size_t>;

/// Isserlis by recursion: pair the first point with every other point.
inline double isserlis(const Mat& c, Pts pts) {
  if (pts.empty()) return 1.0;
  if (pts.size() % 2) return 0.0;
  const auto first = pts.front();
  double total = 0.0;
  for (std::size_t j = 1; j < pts.size(); ++j) {
    Pts rest;
    for (std::size_t k = 1; k < pts.size(); ++k)
      if (k != j) rest.push_back(pts[k]);
    total += c(first, pts[j]) * isserlis(c, rest);
  }
  return total;
}

/// E prod of factors, each factor a list of (coeff, vars) terms, expanded fully.
struct Term {
  double coeff;
  Pts vars;
};

inline double expand(const Mat& c, const std::vector<std::vector<Term>>& factors) {
  std::function<double(std::size_t, double, Pts)> go = [&](std::size_t f, double coeff, Pts vars) {
    if (f == factors.size()) return coeff * isserlis(c, vars);
    double s = 0.0;
    for (const auto& t : factors[f]) {
      Pts v = vars;
      v.insert(v.end(), t.vars.begin(), t.vars.end());
      s += go(f + 1, coeff * t.coeff, v);
    }
    return s;
  };
  return go(0, 1.0, {});
}

/// E prod G_{x}^2/2 through Isserlis on the doubled list.
inline double squares(const Mat& c, const Pts& pts) {
  Pts d;
  for (auto x : pts) d.insert(d.end(), {x, x});
  return std::ldexp(isserlis(c, d), -static_cast<int>(pts.size()));
}

/// E prod (G_x + s)^2/2.
inline double shifted_squares(const Mat& c, double s, const Pts& pts, const Pts& linear = {}) {
  std::vector<std::vector<Term>> f;
  for (auto y : linear) f.push_back({{1.0, {y}}});
  for (auto x : pts) f.push_back({{0.5, {x, x}}, {s, {x}}, {0.5 * s * s, {}}});
  return expand(c, f);
}

inline int cycles_of(const std::vector<int>& p) {
  std::vector<bool> seen(p.size(), false);
  int c = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (seen[i]) continue;
    ++c;
    for (auto j = i; !seen[j]; j = static_cast<std::size_t>(p[j])) seen[j] = true;
  }
  return c;
}

/// sum over permutations of alpha^{cycles} prod K(x_i, x_{pi(i)}).
inline double permanent(const Mat& k, const Pts& pts, double alpha) {
  std::vector<int> p(pts.size());
  std::iota(p.begin(), p.end(), 0);
  double total = 0.0;
  do {
    double prod = std::pow(alpha, cycles_of(p));
    for (std::size_t i = 0; i < pts.size(); ++i) prod *= k(pts[i], pts[static_cast<std::size_t>(p[i])]);
    total += prod;
  } while (std::next_permutation(p.begin(), p.end()));
  return total;
}

/// sum over orderings of u(x, y_p1) u(y_p1, y_p2) ...
inline double start_chain(const Mat& u, std::size_t x, const Pts& pts) {
  if (pts.empty()) return 1.0;
  std::vector<std::size_t> p(pts.size());
  std::iota(p.begin(), p.end(), 0);
  double total = 0.0;
  do {
    double prod = u(x, pts[p[0]]);
    for (std::size_t i = 1; i < p.size(); ++i) prod *= u(pts[p[i - 1]], pts[p[i]]);
    total += prod;
  } while (std::next_permutation(p.begin(), p.end()));
  return total;
}

/// sum over orderings of u(a, y_p1) ... u(y_pn, b).
inline double bridge_chain(const Mat& u, std::size_t a, std::size_t b, const Pts& pts) {
  if (pts.empty()) return u(a, b);
  std::vector<std::size_t> p(pts.size());
  std::iota(p.begin(), p.end(), 0);
  double total = 0.0;
  do {
    double prod = u(a, pts[p[0]]);
    for (std::size_t i = 1; i < p.size(); ++i) prod *= u(pts[p[i - 1]], pts[p[i]]);
    total += prod * u(pts[p.back()], b);
  } while (std::next_permutation(p.begin(), p.end()));
  return total;
}

/// Every set partition of {0..n-1}, by inserting element i into an existing
/// block or a new one.
inline std::vector<std::vector<std::vector<std::size_t>>> partitions(std::size_t n) {
  std::vector<std::vector<std::vector<std::size_t>>> out;
  std::vector<std::vector<std::size_t>> cur;
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (std::size_t b = 0; b < cur.size(); ++b) {
      cur[b].push_back(i);
      go(i + 1);
      cur[b].pop_back();
    }
    cur.push_back({i});
    go(i + 1);
    cur.pop_back();
  };
  go(0);
  return out;
}

/// sum over cyclic orders (first element fixed) of the product around the circle.
inline double cycle(const Mat& k, const Pts& block) {
  if (block.size() == 1) return k(block[0], block[0]);
  Pts rest(block.begin() + 1, block.end());
  std::vector<std::size_t> p(rest.size());
  std::iota(p.begin(), p.end(), 0);
  double total = 0.0;
  do {
    double prod = k(block[0], rest[p[0]]);
    for (std::size_t i = 1; i < p.size(); ++i) prod *= k(rest[p[i - 1]], rest[p[i]]);
    total += prod * k(rest[p.back()], block[0]);
  } while (std::next_permutation(p.begin(), p.end()));
  return total;
}

/// Soup field moment: partitions with blocks weighing alpha cy.
inline double soup(const Mat& u, double alpha, const Pts& pts) {
  double total = 0.0;
  for (const auto& part : partitions(pts.size())) {
    double prod = 1.0;
    for (const auto& b : part) {
      Pts blk;
      for (auto i : b) blk.push_back(pts[i]);
      prod *= alpha * cycle(u, blk);
    }
    total += prod;
  }
  return total;
}

/// Dense inverse by Gauss-Jordan with partial pivoting.
inline Mat inverse(Mat a) {
  const auto n = a.rows();
  Mat inv = Mat::Identity(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index piv = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    a.row(col).swap(a.row(piv));
    inv.row(col).swap(inv.row(piv));
    const double d = a(col, col);
    a.row(col) /= d;
    inv.row(col) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      a.row(r) -= f * a.row(col);
      inv.row(r) -= f * inv.row(col);
    }
  }
  return inv;
}

}  // namespace oracle
