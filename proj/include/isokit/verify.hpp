#pragma once

// Theorem harness. Each identity is checked by pairing engines that share
// nothing below the combinatorial primitives: permutation/partition moments
// against pairing expansions, resolvents against Neumann series, analytic
// values against seeded Monte Carlo.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "isokit/combinat.hpp"
#include "isokit/error.hpp"
#include "isokit/kernels.hpp"
#include "isokit/mgf.hpp"
#include "isokit/model.hpp"
#include "isokit/moments.hpp"
#include "isokit/sample.hpp"

#ifndef ISOKIT_VERSION
#define ISOKIT_VERSION "0.0.0"
#endif

namespace isokit {

inline constexpr const char* kReportSchema = "isokit-report/1";
inline constexpr const char* kVersion = ISOKIT_VERSION;

struct Tolerance {
  double abs = 1e-10;
  double rel = 1e-8;
  double mc_sigmas = 3.0;
};

struct VerificationReport {
  std::string identity;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double tol_abs = 0.0;
  double tol_rel = 0.0;
  std::optional<double> mc_se;
  bool pass = false;
  double runtime_ms = 0.0;
  std::size_t cases = 1;
  std::string note;
};

namespace detail {

inline double rel_error(double lhs, double rhs) {
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
}

/// Collects exact comparisons for one report, keeping the worst case.
class ExactAccumulator {
 public:
  ExactAccumulator(std::string identity, nlohmann::ordered_json params, const Tolerance& tol)
      : start_(std::chrono::steady_clock::now()) {
    r_.identity = std::move(identity);
    r_.params = std::move(params);
    r_.tol_abs = tol.abs;
    r_.tol_rel = tol.rel;
    r_.pass = true;
    r_.cases = 0;
  }

  void add(double lhs, double rhs) {
    const double a = std::abs(lhs - rhs);
    const double rel = rel_error(lhs, rhs);
    const bool ok = std::isfinite(lhs) && std::isfinite(rhs) && (a <= r_.tol_abs || rel <= r_.tol_rel);
    const double badness = ok ? std::min(a / r_.tol_abs, rel / std::max(r_.tol_rel, 1e-300))
                              : std::numeric_limits<double>::infinity();
    if (r_.cases == 0 || badness > worst_ || (badness == worst_ && a > r_.abs_err)) {
      worst_ = badness;
      r_.lhs = lhs;
      r_.rhs = rhs;
      r_.abs_err = a;
      r_.rel_err = rel;
    }
    r_.pass = r_.pass && ok;
    ++r_.cases;
  }

  VerificationReport finish() {
    r_.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    if (r_.cases == 0) r_.note = "no cases";
    return r_;
  }

 private:
  VerificationReport r_;
  double worst_ = 0.0;
  std::chrono::steady_clock::time_point start_;
};

inline std::vector<Points> multisets_rec(const std::vector<std::size_t>& pool, std::size_t order) {
  std::vector<Points> out;
  Points cur;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (cur.size() == order) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = from; i < pool.size(); ++i) {
      cur.push_back(pool[i]);
      self(self, i);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

inline std::vector<std::size_t> all_states(std::size_t n, std::optional<std::size_t> except = {}) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!except || i != *except) out.push_back(i);
  return out;
}

/// Sum over A subset of [0, n) of f(A) g(complement of A).
template <class F, class G>
double subset_convolution(PointSpan points, F&& f, G&& g) {
  const auto n = points.size();
  const Mask full = n == 0 ? 0 : (Mask{1} << n) - 1;
  double total = 0.0;
  for (Mask a = 0;; ++a) {
    total += f(subset(points, a)) * g(subset(points, full ^ a));
    if (a == full) break;
  }
  return total;
}

inline nlohmann::ordered_json points_json(const ChainModel& model, PointSpan pts) {
  auto arr = nlohmann::ordered_json::array();
  for (auto p : pts) arr.push_back(model.state_name(p));
  return arr;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

/// Uniform load c * 1 (optionally zero at one state) with spectral radius rho against c.
inline DiagonalLoad uniform_load(const Matrix& c, double rho, std::optional<std::size_t> zero_at = {}) {
  Vector l = Vector::Ones(c.rows());
  if (zero_at) l(static_cast<Eigen::Index>(*zero_at)) = 0.0;
  const double r = spectral_radius(c * l.asDiagonal());
  return DiagonalLoad(r > 0.0 ? Vector(l * (rho / r)) : l);
}

}  // namespace detail

/// Report for a Monte Carlo estimate against a reference (analytic, or a
/// second estimate with its own standard error).
inline VerificationReport mc_report(std::string identity, nlohmann::ordered_json params,
                                    const RunningStats& lhs, double rhs, double rhs_se,
                                    const Tolerance& tol) {
  VerificationReport r;
  r.identity = std::move(identity);
  r.params = std::move(params);
  r.lhs = lhs.mean();
  r.rhs = rhs;
  r.abs_err = std::abs(r.lhs - r.rhs);
  r.rel_err = detail::rel_error(r.lhs, r.rhs);
  r.mc_se = std::sqrt(lhs.standard_error() * lhs.standard_error() + rhs_se * rhs_se);
  r.tol_abs = tol.mc_sigmas * *r.mc_se;
  r.tol_rel = 0.0;
  r.params["trials"] = lhs.count();
  r.pass = std::isfinite(r.lhs) && r.abs_err <= r.tol_abs;
  return r;
}

inline VerificationReport mc_report(std::string identity, nlohmann::ordered_json params,
                                    const RunningStats& lhs, double rhs, const Tolerance& tol) {
  return mc_report(std::move(identity), std::move(params), lhs, rhs, 0.0, tol);
}

inline VerificationReport exact_report(std::string identity, nlohmann::ordered_json params, double lhs,
                                       double rhs, const Tolerance& tol) {
  detail::ExactAccumulator acc(std::move(identity), std::move(params), tol);
  acc.add(lhs, rhs);
  return acc.finish();
}

struct McOptions {
  std::size_t trials = 0;
  RngStream rng;
};

// ---------------------------------------------------------------------------
// Dynkin
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_dynkin(const ChainModel& model, std::size_t x, std::size_t y,
                                                     int max_order, const Tolerance& tol = {},
                                                     const McOptions& mc = {}) {
  detail::require(model.symmetric() && model.transient(), "dynkin: needs a symmetric transient model");
  detail::require(max_order >= 0 && 2 * max_order + 2 <= static_cast<int>(kMaxPairingPoints),
                  "dynkin: order must be in [0, 5]");
  const Matrix u = potential(model).entries;
  const auto pool = detail::all_states(model.size());
  std::vector<VerificationReport> out;
  const auto base = [&] {
    nlohmann::ordered_json p;
    p["x"] = model.state_name(x);
    p["y"] = model.state_name(y);
    return p;
  };

  for (int k = 0; k <= max_order; ++k) {
    auto p = base();
    p["order"] = k;
    detail::ExactAccumulator acc("dynkin.moments", p, tol);
    for (const auto& pts : detail::multisets_rec(pool, static_cast<std::size_t>(k))) {
      const double lhs = detail::subset_convolution(
          pts, [&](const Points& a) { return lt_moment_bridge(u, x, y, a); },
          [&](const Points& b) { return gauss_square_moment(u, b); });
      acc.add(lhs, gauss_pair_square_moment(u, x, y, pts));
    }
    out.push_back(acc.finish());
  }

  {
    const auto load = detail::uniform_load(u, 0.3);
    auto p = base();
    p["rho"] = 0.3;
    out.push_back(exact_report("dynkin.mgf", p, bridge_mgf(u, load, x, y), bridge_mgf_series(u, load, x, y), tol));
  }
  {
    const auto load = detail::uniform_load(u, 0.02);
    auto p = base();
    p["rho"] = 0.02;
    p["degree"] = 7;
    out.push_back(exact_report("dynkin.mgf_moments", p, bridge_mgf(u, load, x, y),
                               bridge_mgf_moment_series(u, load, x, y, 7), tol));
  }

  if (mc.trials > 0) {
    // Bridge sampler against Q^{x,y} moments normalized by the total mass.
    const BridgeSampler bridge(model, y);
    Rng rng = mc.rng.child(1).engine();
    const auto n = model.size();
    std::vector<RunningStats> first(n), second(n);
    for (std::size_t i = 0; i < mc.trials; ++i) {
      const auto f = bridge.sample(x, rng);
      for (std::size_t z = 0; z < n; ++z) {
        first[z].add(f[z]);
        second[z].add(f[z] * f[z]);
      }
    }
    const double mass = u(x, y);
    for (std::size_t z = 0; z < n; ++z) {
      auto p = base();
      p["z"] = model.state_name(z);
      p["order"] = 1;
      out.push_back(mc_report("dynkin.bridge_mc", p, first[z], lt_moment_bridge(u, x, y, Points{z}) / mass, tol));
      p["order"] = 2;
      out.push_back(mc_report("dynkin.bridge_mc", p, second[z], lt_moment_bridge(u, x, y, Points{z, z}) / mass, tol));
    }

    // Exponential law of L^x under P^x.
    const PathSampler paths(model);
    Rng rng2 = mc.rng.child(2).engine();
    RunningStats m1, m2;
    for (std::size_t i = 0; i < mc.trials; ++i) {
      const double l = paths.sample(x, rng2, false).field[x];
      m1.add(l);
      m2.add(l * l);
    }
    nlohmann::ordered_json p;
    p["x"] = model.state_name(x);
    p["order"] = 1;
    out.push_back(mc_report("dynkin.exponential_law", p, m1, lt_moment_start(u, x, Points{x}), tol));
    p["order"] = 2;
    out.push_back(mc_report("dynkin.exponential_law", p, m2, lt_moment_start(u, x, Points{x, x}), tol));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Eisenbaum
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_eisenbaum(const ChainModel& model, std::size_t x, double s,
                                                        int max_order, const Tolerance& tol = {}) {
  detail::require(model.symmetric() && model.transient(), "eisenbaum: needs a symmetric transient model");
  detail::require(s != 0.0, "eisenbaum: s must be nonzero");
  detail::require(max_order >= 0 && max_order <= 5, "eisenbaum: order must be in [0, 5]");
  const Matrix u = potential(model).entries;
  const auto pool = detail::all_states(model.size());
  std::vector<VerificationReport> out;
  for (int k = 0; k <= max_order; ++k) {
    nlohmann::ordered_json p;
    p["x"] = model.state_name(x);
    p["s"] = s;
    p["order"] = k;
    detail::ExactAccumulator acc("eisenbaum.moments", p, tol);
    for (const auto& pts : detail::multisets_rec(pool, static_cast<std::size_t>(k))) {
      const double lhs = detail::subset_convolution(
          pts, [&](const Points& a) { return lt_moment_start(u, x, a); },
          [&](const Points& b) { return shifted_square_moment(u, s, b); });
      const Points lin{x};
      const double rhs = shifted_square_moment_expansion(u, s, pts) +
                         shifted_square_moment_expansion(u, s, pts, lin) / s;
      acc.add(lhs, rhs);
    }
    out.push_back(acc.finish());
  }
  nlohmann::ordered_json p;
  p["x"] = model.state_name(x);
  p["rho"] = 0.3;
  const auto load = detail::uniform_load(u, 0.3);
  out.push_back(exact_report("eisenbaum.mgf", p, start_mgf(u, load, x), start_mgf_series(u, load, x), tol));
  const auto small = detail::uniform_load(u, 0.02);
  p["rho"] = 0.02;
  p["degree"] = 7;
  out.push_back(exact_report("eisenbaum.mgf_moments", p, start_mgf(u, small, x),
                             start_mgf_moment_series(u, small, x, 7), tol));
  return out;
}

// ---------------------------------------------------------------------------
// Generalized second Ray-Knight theorem
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_rayknight(const ChainModel& model, std::size_t z0, double t,
                                                        int max_order, const Tolerance& tol = {},
                                                        const McOptions& mc = {}) {
  detail::require(model.symmetric() && model.recurrent(), "rayknight: needs a symmetric recurrent model");
  detail::require(t >= 0.0, "rayknight: t must be nonnegative");
  detail::require(max_order >= 0 && max_order <= 6, "rayknight: order must be in [0, 6]");
  const Kernel ut0 = killed_potential(model, z0);
  const Matrix& c0 = ut0.entries;
  const double s = std::sqrt(2.0 * t);
  const auto pool = detail::all_states(model.size());
  const auto away = detail::all_states(model.size(), z0);
  std::vector<VerificationReport> out;
  const auto base = [&] {
    nlohmann::ordered_json p;
    p["z0"] = model.state_name(z0);
    p["t"] = t;
    return p;
  };

  for (int k = 0; k <= max_order; ++k) {
    auto p = base();
    p["order"] = k;
    detail::ExactAccumulator moments("rayknight.moments", p, tol);
    detail::ExactAccumulator expansion("rayknight.gaussian_expansion", p, tol);
    detail::ExactAccumulator excursions("rayknight.excursion_moments", p, tol);
    detail::ExactAccumulator tau("rayknight.tau_lambda", p, tol);
    const Kernel utau = tau_potential(ut0, 1.0);
    for (const auto& pts : detail::multisets_rec(pool, static_cast<std::size_t>(k))) {
      const double lhs = detail::subset_convolution(
          pts, [&](const Points& a) { return rayknight_lhs_moment(ut0, t, a); },
          [&](const Points& b) { return gauss_square_moment(c0, b); });
      const double rhs = shifted_square_moment(c0, s, pts);
      moments.add(lhs, rhs);
      expansion.add(rhs, shifted_square_moment_expansion(c0, s, pts));
      // Exponential clock of mean a: sum_m c_m a^m m! is the P^{z0} moment under u_tau.
      const auto c = rayknight_lhs_coefficients(ut0, pts);
      double laplace = 0.0, fact = 1.0;
      for (std::size_t m = 0; m < c.size(); ++m) {
        if (m > 0) fact *= static_cast<double>(m);
        laplace += c[m] * fact;
      }
      tau.add(laplace, lt_moment_start(utau.entries, z0, pts));
    }
    for (const auto& pts : detail::multisets_rec(away, static_cast<std::size_t>(k)))
      excursions.add(rayknight_lhs_moment(ut0, t, pts), excursion_poisson_moment(ut0, t, pts));
    out.push_back(moments.finish());
    out.push_back(expansion.finish());
    out.push_back(excursions.finish());
    out.push_back(tau.finish());
  }

  {
    const auto load = detail::uniform_load(c0, 0.3, z0);
    auto p = base();
    p["rho"] = 0.3;
    const double resolvent = rayknight_mgf(ut0, load, t);
    out.push_back(exact_report("rayknight.mgf", p, resolvent, rayknight_mgf_series(ut0, load, t), tol));
    out.push_back(exact_report("rayknight.gaussian_ratio", p, resolvent, rayknight_gaussian_ratio(ut0, load, t), tol));
    out.push_back(exact_report("rayknight.excursion", p, std::exp(t * excursion_mgf_exponent(ut0, load, 1.0)),
                               resolvent, tol));
  }
  {
    // Exponent assembled from excursion moments: sum over monomials lambda^n/n! n(prod L).
    const auto load = detail::uniform_load(c0, 0.02, z0);
    double exponent = 0.0;
    for_each_load_monomial(load, 7, [&](const Points& pts, double w) {
      if (!pts.empty()) exponent += w * excursion_moment(ut0, pts);
    });
    auto p = base();
    p["rho"] = 0.02;
    p["degree"] = 7;
    out.push_back(exact_report("rayknight.excursion_assembly", p, std::exp(t * exponent),
                               rayknight_mgf(ut0, load, t), tol));
  }
  {
    const Kernel lim = killed_potential_limit(model, z0, 1e-8);
    auto p = base();
    p["alpha"] = 1e-8;
    Tolerance loose = tol;
    loose.abs = 1e-6;
    loose.rel = 0.0;
    detail::ExactAccumulator acc("rayknight.killed_limit", p, loose);
    for (Eigen::Index i = 0; i < c0.rows(); ++i)
      for (Eigen::Index j = 0; j < c0.cols(); ++j) acc.add(c0(i, j), lim.entries(i, j));
    out.push_back(acc.finish());
  }

  if (mc.trials > 0) {
    const InverseLtSampler sampler(model, z0);
    const GaussianSampler eta(c0);
    Rng rng = mc.rng.child(3).engine();
    const auto n = model.size();
    const auto load = detail::uniform_load(c0, 0.1);
    const double beta = 1.0;
    std::vector<RunningStats> first(n);
    std::vector<std::vector<RunningStats>> second(n, std::vector<RunningStats>(n));
    RunningStats lhs_fun, rhs_fun, laplace;
    for (std::size_t i = 0; i < mc.trials; ++i) {
      const auto smp = sampler.sample(t, rng);
      const Vector& l = smp.field.values;
      for (std::size_t a = 0; a < n; ++a) {
        first[a].add(l(static_cast<Eigen::Index>(a)));
        for (std::size_t b = a; b < n; ++b)
          second[a][b].add(l(static_cast<Eigen::Index>(a)) * l(static_cast<Eigen::Index>(b)));
      }
      const Vector e1 = eta.draw(rng);
      const Vector e2 = eta.draw(rng);
      lhs_fun.add(std::exp(load.lambda.dot(l + 0.5 * e1.cwiseProduct(e1))));
      const Vector sh = e2.array() + s;
      rhs_fun.add(std::exp(0.5 * load.lambda.dot(sh.cwiseProduct(sh))));
      laplace.add(std::exp(-beta * smp.lifetime));
    }
    for (auto a : away) {
      auto p = base();
      p["x"] = model.state_name(a);
      out.push_back(mc_report("rayknight.mc_moment1", p, first[a], rayknight_lhs_moment(ut0, t, Points{a}), tol));
      for (auto b : away) {
        if (b < a) continue;
        auto q = base();
        q["x"] = model.state_name(a);
        q["y"] = model.state_name(b);
        out.push_back(
            mc_report("rayknight.mc_moment2", q, second[a][b], rayknight_lhs_moment(ut0, t, Points{a, b}), tol));
      }
    }
    auto p = base();
    p["rho"] = 0.1;
    out.push_back(mc_report("rayknight.mc_functional", p, lhs_fun, rhs_fun.mean(), rhs_fun.standard_error(), tol));
    auto q = base();
    q["beta"] = beta;
    out.push_back(mc_report("rayknight.mc_laplace", q, laplace, inverse_lt_laplace(model, z0, beta, t), tol));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loop soup
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_soup_isomorphism(const ChainModel& model, double alpha,
                                                               std::size_t x0, int max_order,
                                                               const Tolerance& tol = {}) {
  detail::require(model.transient(), "soup: needs a transient model");
  detail::require(alpha > 0.0, "soup: alpha must be positive");
  detail::require(max_order >= 0 && max_order + 1 <= static_cast<int>(kMaxPermanentPoints),
                  "soup: order must be in [0, 8]");
  const Matrix u = potential(model).entries;
  const auto pool = detail::all_states(model.size());
  std::vector<VerificationReport> out;
  for (int k = 0; k <= max_order; ++k) {
    nlohmann::ordered_json p;
    p["alpha"] = alpha;
    p["x0"] = model.state_name(x0);
    p["order"] = k;
    detail::ExactAccumulator iso("soup.isomorphism", p, tol);
    detail::ExactAccumulator routes("soup.permanent_vs_partitions", p, tol);
    for (const auto& pts : detail::multisets_rec(pool, static_cast<std::size_t>(k))) {
      Points with{x0};
      with.insert(with.end(), pts.begin(), pts.end());
      const double lhs = soup_field_moment_permanent(u, alpha, with);
      const double rhs = alpha * detail::subset_convolution(
                                     pts, [&](const Points& a) { return lt_moment_bridge(u, x0, x0, a); },
                                     [&](const Points& b) { return soup_field_moment(u, alpha, b); });
      iso.add(lhs, rhs);
      routes.add(lhs, soup_field_moment(u, alpha, with));
    }
    out.push_back(iso.finish());
    out.push_back(routes.finish());
  }
  nlohmann::ordered_json p;
  p["alpha"] = alpha;
  p["x0"] = model.state_name(x0);
  detail::ExactAccumulator cov("soup.covariance", p, tol);
  for (auto y : pool) {
    const double mean_x = soup_field_moment(u, alpha, Points{x0});
    const double mean_y = soup_field_moment(u, alpha, Points{y});
    cov.add(mean_x, alpha * u(x0, x0));
    cov.add(soup_field_moment(u, alpha, Points{x0, y}) - mean_x * mean_y, alpha * u(x0, y) * u(y, x0));
  }
  out.push_back(cov.finish());
  return out;
}

// ---------------------------------------------------------------------------
// Permanental field against Gaussian squares
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_permanental_gaussian_pairing(const ChainModel& model, std::size_t x,
                                                                           std::size_t y, int max_total,
                                                                           const Tolerance& tol = {},
                                                                           const McOptions& mc = {}) {
  detail::require(model.transient(), "permanental: needs a transient model");
  detail::require(max_total >= 1 && max_total <= 6, "permanental: total order must be in [1, 6]");
  const Matrix u = potential(model).entries;
  const double prod = u(x, y) * u(y, x);
  nlohmann::ordered_json base;
  base["x"] = model.state_name(x);
  base["y"] = model.state_name(y);
  base["alpha"] = 0.5;
  std::vector<VerificationReport> out;
  if (prod < 0.0) {
    VerificationReport r;
    r.identity = "permanental.covx";
    r.params = base;
    r.pass = false;
    r.note = "u(x,y)u(y,x) < 0: no Gaussian pairing";
    out.push_back(r);
    return out;
  }
  Matrix cov(2, 2);
  cov << u(x, x), std::sqrt(prod), std::sqrt(prod), u(y, y);
  for (int total = 1; total <= max_total; ++total) {
    auto p = base;
    p["order"] = total;
    detail::ExactAccumulator acc("permanental.covx", p, tol);
    for (int j = 0; j <= total; ++j) {
      Points pts, doubled;
      for (int i = 0; i < j; ++i) pts.push_back(x), doubled.insert(doubled.end(), {0, 0});
      for (int i = j; i < total; ++i) pts.push_back(y), doubled.insert(doubled.end(), {1, 1});
      acc.add(alpha_permanent(u, pts, 0.5), std::ldexp(gauss_moment(cov, doubled), -total));
    }
    out.push_back(acc.finish());
  }
  if (mc.trials > 0 && model.symmetric()) {
    const HalfIntSoupSampler soup(u, 1);
    Rng rng = mc.rng.child(4).engine();
    RunningStats fx, fy, fxx, fxy, fyy;
    for (std::size_t i = 0; i < mc.trials; ++i) {
      const auto f = soup.draw(rng);
      fx.add(f[x]);
      fy.add(f[y]);
      fxx.add(f[x] * f[x]);
      fxy.add(f[x] * f[y]);
      fyy.add(f[y] * f[y]);
    }
    const auto rep = [&](const char* which, const RunningStats& st, Points pts) {
      auto p = base;
      p["moment"] = which;
      out.push_back(mc_report("permanental.mc", p, st, alpha_permanent(u, pts, 0.5), tol));
    };
    rep("x", fx, {x});
    rep("y", fy, {y});
    rep("xx", fxx, {x, x});
    rep("xy", fxy, {x, y});
    rep("yy", fyy, {y, y});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interlacements
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_interlacement(const ChainModel& model, const Vector& nu, double t,
                                                            double delta, int max_order = 3,
                                                            const Tolerance& tol = {}) {
  detail::require(model.symmetric() && model.transient(), "interlacement: needs a symmetric transient model");
  detail::require(t >= 0.0, "interlacement: t must be nonnegative");
  detail::require(max_order >= 1 && max_order <= 4, "interlacement: order must be in [1, 4]");
  if (nu.size() != static_cast<Eigen::Index>(model.size()))
    throw PreconditionError("interlacement: measure length does not match the model");
  const Matrix u = potential(model).entries;
  std::vector<VerificationReport> out;
  nlohmann::ordered_json p;
  p["t"] = t;
  p["delta"] = delta;
  p["nu"] = std::vector<double>(nu.data(), nu.data() + nu.size());
  const auto pair = interlacement_mgf_check(u, nu, t, delta);
  out.push_back(exact_report("interlacement.mgf", p, pair.lhs, pair.rhs, tol));

  // Measures drawn from the point masses and nu itself.
  std::vector<Vector> family;
  for (Eigen::Index i = 0; i < nu.size(); ++i) family.push_back(Vector::Unit(nu.size(), i));
  family.push_back(nu);
  const auto idx = detail::all_states(family.size());
  for (int k = 1; k <= max_order; ++k) {
    auto q = p;
    q.erase("delta");
    q["order"] = k;
    detail::ExactAccumulator moments("interlacement.moments", q, tol);
    detail::ExactAccumulator expansion("interlacement.gaussian_expansion", q, tol);
    for (const auto& pick : detail::multisets_rec(idx, static_cast<std::size_t>(k))) {
      std::vector<Vector> measures;
      for (auto i : pick) measures.push_back(family[i]);
      const auto n = measures.size();
      const Mask full = (Mask{1} << n) - 1;
      double lhs = 0.0;
      for (Mask a = 0;; ++a) {
        std::vector<Vector> in, rest;
        for (std::size_t i = 0; i < n; ++i) ((a >> i) & 1 ? in : rest).push_back(measures[i]);
        lhs += interlacement_poisson_moment(u, t, in) * wick_square_moment(u, rest);
        if (a == full) break;
      }
      const double rhs = interlacement_gaussian_moment(u, t, measures);
      moments.add(lhs, rhs);
      expansion.add(rhs, interlacement_gaussian_moment_expansion(u, t, measures));
    }
    out.push_back(moments.finish());
    out.push_back(expansion.finish());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Determinant MGF of Gaussian squares
// ---------------------------------------------------------------------------

/// Closed-form MGF of sum lambda G^2/2 against its Taylor series of moments
/// (relative tolerance only) and against a Monte Carlo mean. The load is
/// uniform, scaled to spectral radius rho; samples = 0 skips the MC check.
inline std::vector<VerificationReport> verify_mgf_master(const Matrix& c, double rho, int degree,
                                                         std::size_t samples, const RngStream& stream,
                                                         double rel_tol = 1e-6, const Tolerance& tol = {}) {
  detail::require(rho > 0.0 && rho < 1.0, "mgf: spectral radius must be in (0, 1)");
  const auto load = detail::uniform_load(c, rho);
  const double exact = gauss_square_mgf(c, load);
  nlohmann::ordered_json p;
  p["rho"] = rho;
  p["degree"] = degree;
  Tolerance taylor;
  taylor.abs = 0.0;
  taylor.rel = rel_tol;
  std::vector<VerificationReport> out;
  out.push_back(exact_report("mgf.taylor", p, gauss_square_mgf_series(c, load, degree), exact, taylor));
  if (samples > 0) {
    const GaussianSampler g(c);
    Rng rng = stream.child(6).engine();
    RunningStats st;
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = g.draw(rng);
      st.add(std::exp(0.5 * load.lambda.dot(x.cwiseProduct(x))));
    }
    p.erase("degree");
    out.push_back(mc_report("mgf.mc", p, st, exact, tol));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poisson process facts on a finite atomic intensity
// ---------------------------------------------------------------------------

struct PoissonIntensity {
  std::vector<double> masses{1.0, 0.5};
  double alpha = 1.0;
};

inline std::vector<VerificationReport> verify_poisson_facts(const PoissonIntensity& mu, std::size_t samples,
                                                            const RngStream& stream, const Tolerance& tol = {}) {
  detail::require(samples > 1, "poisson: needs at least two samples");
  const auto n = mu.masses.size();
  detail::require(n == 2, "poisson: the checks use two atoms");
  const std::vector<double> f{0.5, 0.2}, f1{1.0, 0.5}, f2{0.3, 1.0}, pf{1.0, 2.0}, g{0.2, -0.1};
  const auto nf = [](const std::vector<long>& c, const std::vector<double>& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += h[i] * static_cast<double>(c[i]);
    return s;
  };
  const auto mu_of = [&](auto&& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += h(i) * mu.masses[i];
    return s;
  };
  Rng rng = stream.child(5).engine();
  RunningStats master, moment, palm;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto c = sample_poisson_functional(mu.masses, mu.alpha, rng);
    master.add(std::exp(nf(c, f)));
    moment.add(nf(c, f1) * nf(c, f2));
    palm.add(nf(c, pf) * std::exp(nf(c, g)));
  }
  const double a = mu.alpha;
  const double master_rhs = std::exp(a * mu_of([&](std::size_t i) { return std::expm1(f[i]); }));
  const double moment_rhs = a * mu_of([&](std::size_t i) { return f1[i] * f2[i]; }) +
                            a * a * mu_of([&](std::size_t i) { return f1[i]; }) * mu_of([&](std::size_t i) { return f2[i]; });
  const double laplace_g = std::exp(a * mu_of([&](std::size_t i) { return std::expm1(g[i]); }));
  const double palm_rhs = a * mu_of([&](std::size_t i) { return pf[i] * std::exp(g[i]); }) * laplace_g;
  nlohmann::ordered_json p;
  p["alpha"] = a;
  p["masses"] = mu.masses;
  std::vector<VerificationReport> out;
  out.push_back(mc_report("poisson.master", p, master, master_rhs, tol));
  out.push_back(mc_report("poisson.moment2", p, moment, moment_rhs, tol));
  out.push_back(mc_report("poisson.palm", p, palm, palm_rhs, tol));
  return out;
}

// ---------------------------------------------------------------------------
// Brownian closed forms
// ---------------------------------------------------------------------------

inline std::vector<VerificationReport> verify_brownian_oracles(const Tolerance& tol = {}) {
  std::vector<VerificationReport> out;
  const auto o = bm_oracles(0.5, 0.0, 0.0, 1.0, 2.0);
  nlohmann::ordered_json p;
  p["alpha"] = 0.5;
  out.push_back(exact_report("brownian.u_alpha_diagonal", p, o.u_alpha, 1.0, tol));
  const auto k = bm_oracles(0.5, 1.0, 2.0, 1.0, 2.0);
  nlohmann::ordered_json q;
  q["x"] = 1.0;
  q["y"] = 2.0;
  out.push_back(exact_report("brownian.u_killed", q, k.u_killed, 2.0, tol));
  nlohmann::ordered_json r;
  r["beta"] = 2.0;
  r["t"] = 1.0;
  out.push_back(exact_report("brownian.inverse_lt", r, o.inverse_lt_lt, std::exp(-2.0), tol));
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a, used to fingerprint model files in report footers.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

struct ReportMeta {
  std::uint64_t seed = 0;
  std::string model_hash;  ///< "fnv1a:<hex>"
};

inline nlohmann::ordered_json to_json(const VerificationReport& r, bool timing = false) {
  nlohmann::ordered_json j;
  j["identity"] = r.identity;
  j["params"] = r.params;
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["abs_err"] = r.abs_err;
  j["rel_err"] = r.rel_err;
  j["tol_abs"] = r.tol_abs;
  j["tol_rel"] = r.tol_rel;
  j["mc_se"] = r.mc_se ? nlohmann::ordered_json(*r.mc_se) : nlohmann::ordered_json(nullptr);
  j["cases"] = r.cases;
  j["pass"] = r.pass;
  if (!r.note.empty()) j["note"] = r.note;
  if (timing) j["runtime_ms"] = r.runtime_ms;
  return j;
}

/// {"schema", "reports": [...], "meta": {...}}; meta comes last as the footer.
inline nlohmann::ordered_json reports_to_json(const std::vector<VerificationReport>& reports,
                                              const ReportMeta& meta, bool timing = false) {
  nlohmann::ordered_json doc;
  doc["schema"] = kReportSchema;
  doc["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) doc["reports"].push_back(to_json(r, timing));
  nlohmann::ordered_json m;
  m["tool"] = "isokit";
  m["version"] = kVersion;
  m["seed"] = meta.seed;
  m["model"] = meta.model_hash;
  doc["meta"] = m;
  return doc;
}

inline std::string footer_line(const ReportMeta& meta) {
  return "# isokit " + std::string(kVersion) + " seed=" + std::to_string(meta.seed) + " model=" + meta.model_hash;
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_reports_csv(std::ostream& os, const std::vector<VerificationReport>& reports,
                              const ReportMeta& meta) {
  const auto prec = os.precision(17);
  os << "identity,params,lhs,rhs,abs_err,rel_err,mc_se,pass\n";
  for (const auto& r : reports) {
    os << r.identity << ',' << csv_quote(r.params.dump()) << ',' << r.lhs << ',' << r.rhs << ',' << r.abs_err
       << ',' << r.rel_err << ',';
    if (r.mc_se) os << *r.mc_se;
    os << ',' << (r.pass ? "true" : "false") << '\n';
  }
  os << footer_line(meta) << '\n';
  os.precision(prec);
}

// ---------------------------------------------------------------------------
// Job planning and execution
// ---------------------------------------------------------------------------

using Job = std::function<std::vector<VerificationReport>()>;

/// Runs jobs on up to `threads` workers; output order is the job order, then
/// stably sorted by identity name, so it does not depend on the thread count.
inline std::vector<VerificationReport> run_jobs(const std::vector<Job>& jobs, unsigned threads = 1) {
  std::vector<std::vector<VerificationReport>> results(jobs.size());
  threads = std::max(1u, threads);
  if (threads == 1 || jobs.size() < 2) {
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i]();
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> workers;
    for (unsigned w = 0; w < std::min<std::size_t>(threads, jobs.size()); ++w)
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) results[i] = jobs[i]();
      }));
    for (auto& f : workers) f.get();
  }
  std::vector<VerificationReport> out;
  for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const VerificationReport& a, const VerificationReport& b) { return a.identity < b.identity; });
  return out;
}

inline const std::vector<std::string>& identity_names() {
  static const std::vector<std::string> names{"dynkin", "eisenbaum",     "rayknight", "soup",
                                              "permanental", "interlacement", "poisson", "all"};
  return names;
}

/// Settings for one `verify` run. Unset states mean "every state" (or every pair).
struct RunConfig {
  std::string identity = "all";
  std::optional<std::size_t> x, y, z0, x0;
  int order = 3;
  std::optional<double> t;
  std::optional<double> s;
  std::optional<double> alpha;
  std::optional<Vector> nu;
  double delta = 0.2;
  std::size_t trials = 0;
  std::size_t poisson_samples = 1000000;
  std::uint64_t seed = 0;
  Tolerance tol;
};

/// Identities that apply to a model when `all` is requested.
inline std::vector<std::string> applicable_identities(const ChainModel& model) {
  std::vector<std::string> out;
  if (model.recurrent()) {
    if (model.symmetric()) out.push_back("rayknight");
  } else if (model.symmetric()) {
    out = {"dynkin", "eisenbaum", "soup", "permanental", "interlacement"};
  } else {
    out = {"soup", "permanental"};
  }
  out.push_back("poisson");
  return out;
}

inline std::vector<Job> plan_verification(const ChainModel& model, const RunConfig& cfg) {
  const auto& names = identity_names();
  if (std::find(names.begin(), names.end(), cfg.identity) == names.end())
    throw PreconditionError("unknown identity '" + cfg.identity + "'");
  const auto applicable = applicable_identities(model);
  if (cfg.identity != "all" && std::find(applicable.begin(), applicable.end(), cfg.identity) == applicable.end())
    throw PreconditionError("identity '" + cfg.identity + "' does not apply to this model");
  const std::vector<std::string> ids = cfg.identity == "all" ? applicable : std::vector<std::string>{cfg.identity};
  const auto states = detail::all_states(model.size());
  const auto one_or_all = [&](const std::optional<std::size_t>& v) {
    return v ? std::vector<std::size_t>{*v} : states;
  };
  std::vector<Job> jobs;
  std::uint64_t tag = 0;
  const auto stream = [&] { return RngStream{cfg.seed, 0}.child(tag++); };
  const ChainModel* m = &model;
  const Tolerance tol = cfg.tol;

  for (const auto& id : ids) {
    if (id == "dynkin") {
      for (auto x : one_or_all(cfg.x))
        for (auto y : one_or_all(cfg.y)) {
          if (!cfg.x && !cfg.y && y < x) continue;
          const McOptions mc{cfg.trials, stream()};
          jobs.push_back([=] { return verify_dynkin(*m, x, y, cfg.order, tol, mc); });
        }
    } else if (id == "eisenbaum") {
      const std::vector<double> ss = cfg.s ? std::vector<double>{*cfg.s} : std::vector<double>{0.5, 1.0, 2.0};
      for (auto x : one_or_all(cfg.x))
        for (double s : ss) jobs.push_back([=] { return verify_eisenbaum(*m, x, s, cfg.order, tol); });
    } else if (id == "rayknight") {
      const std::size_t z0 = cfg.z0.value_or(0);
      const McOptions mc{cfg.trials, stream()};
      const double t = cfg.t.value_or(1.0);
      jobs.push_back([=] { return verify_rayknight(*m, z0, t, cfg.order, tol, mc); });
    } else if (id == "soup") {
      const std::vector<double> as =
          cfg.alpha ? std::vector<double>{*cfg.alpha} : std::vector<double>{0.5, 1.0, 2.5};
      for (auto x0 : one_or_all(cfg.x0))
        for (double a : as) jobs.push_back([=] { return verify_soup_isomorphism(*m, a, x0, cfg.order, tol); });
    } else if (id == "permanental") {
      const int total = std::min(6, std::max(1, 2 * cfg.order));
      for (auto x : one_or_all(cfg.x))
        for (auto y : one_or_all(cfg.y)) {
          if (!cfg.x && !cfg.y && y <= x) continue;
          const McOptions mc{cfg.trials, stream()};
          jobs.push_back([=] { return verify_permanental_gaussian_pairing(*m, x, y, total, tol, mc); });
        }
    } else if (id == "interlacement") {
      const Vector nu = cfg.nu.value_or(Vector::Ones(static_cast<Eigen::Index>(model.size())));
      const double t = cfg.t.value_or(0.5);
      const int order = std::min(cfg.order, 3);
      jobs.push_back([=] { return verify_interlacement(*m, nu, t, cfg.delta, order, tol); });
    } else if (id == "poisson") {
      const auto st = stream();
      const std::size_t n = cfg.poisson_samples;
      jobs.push_back([=] { return verify_poisson_facts(PoissonIntensity{}, n, st, tol); });
    }
  }
  if (jobs.empty()) throw PreconditionError("no verification applies with these settings");
  return jobs;
}

}  // namespace isokit
