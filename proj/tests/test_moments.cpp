#include "common.hpp"

#include "oracle.hpp"

using namespace isokit;

namespace {

Matrix k2u() { return potential(fixture("k2.json")).entries; }

std::vector<Points> multisets(std::size_t n_states, std::size_t order) {
  std::vector<Points> out;
  Points cur;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (cur.size() == order) {
      out.push_back(cur);
      return;
    }
    for (std::size_t i = from; i < n_states; ++i) {
      cur.push_back(i);
      self(self, i);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

}  // namespace

TEST_CASE("Gaussian moments against Isserlis") {
  const Matrix u = k2u();
  CHECK_THAT(gauss_moment(u, Points{0, 0}), near(2.0 / 3.0));
  CHECK_THAT(gauss_moment(u, Points{0, 0, 0, 0}), near(3.0 * 4.0 / 9.0));
  CHECK(gauss_moment(u, Points{0, 1, 1}) == 0.0);
  auto rng = test_rng(41);
  const Matrix c = potential(random_reversible_model(rng, 4)).entries;
  for (std::size_t k = 0; k <= 6; k += 2)
    for (const auto& pts : multisets(4, k)) CHECK_THAT(gauss_moment(c, pts), near(oracle::isserlis(c, pts), 1e-12));
}

TEST_CASE("Gaussian square moments") {
  const Matrix u = k2u();
  // E (G_a^2/2)^2 = 3 u(a,a)^2 / 4.
  CHECK_THAT(gauss_square_moment(u, Points{0, 0}), near(1.0 / 3.0));
  CHECK_THAT(gauss_square_moment(u, Points{0}), near(1.0 / 3.0));
  CHECK(gauss_square_moment(u, Points{}) == 1.0);
  auto rng = test_rng(43);
  const Matrix c = potential(random_reversible_model(rng, 3)).entries;
  for (std::size_t k = 0; k <= 4; ++k)
    for (const auto& pts : multisets(3, k))
      CHECK_THAT(gauss_square_moment(c, pts), near(oracle::squares(c, pts), 1e-12));
}

TEST_CASE("pair-square moment: pairings against chains") {
  auto rng = test_rng(47);
  const Matrix c = potential(random_reversible_model(rng, 3)).entries;
  for (std::size_t k = 0; k <= 4; ++k)
    for (const auto& pts : multisets(3, k))
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = a; b < 3; ++b) {
          const double pairing = gauss_pair_square_moment(c, a, b, pts);
          const double tol = 1e-12 * std::max(1.0, std::abs(pairing));
          CHECK_THAT(pairing, near(gauss_pair_square_moment_chains(c, a, b, pts), tol));
          Points lin{a, b};
          CHECK_THAT(pairing, near(oracle::shifted_squares(c, 0.0, pts, lin), tol));
        }
  CHECK_THROWS_AS(gauss_pair_square_moment(c, 0, 0, Points{0, 0, 0, 0, 0, 0}), CapExceeded);
}

TEST_CASE("shifted square moments") {
  auto rng = test_rng(53);
  const Matrix c = potential(random_reversible_model(rng, 3)).entries;
  for (double s : {0.0, 0.5, 1.3})
    for (std::size_t k = 0; k <= 3; ++k)
      for (const auto& pts : multisets(3, k)) {
        const double ref = oracle::shifted_squares(c, s, pts);
        CHECK_THAT(shifted_square_moment(c, s, pts), near(ref, 1e-12));
        CHECK_THAT(shifted_square_moment_expansion(c, s, pts), near(ref, 1e-12));
      }
  // s = 0 reduces to the centered squares.
  CHECK_THAT(shifted_square_moment(c, 0.0, Points{0, 1, 1}), near(gauss_square_moment(c, Points{0, 1, 1}), 1e-14));
}

TEST_CASE("local time moments") {
  const Matrix u = k2u();
  // Exponential law: E^a (L^a)^n = n! u(a,a)^n.
  CHECK_THAT(lt_moment_start(u, 0, Points{0}), near(2.0 / 3.0));
  CHECK_THAT(lt_moment_start(u, 0, Points{0, 0}), near(8.0 / 9.0));
  CHECK_THAT(lt_moment_start(u, 0, Points{0, 0, 0}), near(6.0 * 8.0 / 27.0));
  CHECK(lt_moment_start(u, 1, Points{}) == 1.0);
  // Empty product: total mass of the bridge measure.
  CHECK_THAT(lt_moment_bridge(u, 0, 1, Points{}), near(1.0 / 3.0));
  auto rng = test_rng(59);
  const Matrix c = potential(random_reversible_model(rng, 4)).entries;
  for (std::size_t k = 1; k <= 4; ++k)
    for (const auto& pts : multisets(4, k)) {
      CHECK_THAT(lt_moment_start(c, 2, pts), near(oracle::start_chain(c, 2, pts), 1e-12));
      CHECK_THAT(lt_moment_bridge(c, 1, 3, pts), near(oracle::bridge_chain(c, 1, 3, pts), 1e-12));
    }
  // Start moments are bridge moments summed over the end point with weight m.
  const auto model = random_reversible_model(rng, 3);
  const Matrix w = potential(model).entries;
  const Points pts{0, 2};
  double via_bridge = 0.0;
  for (std::size_t y = 0; y < 3; ++y)
    via_bridge += model.mass()(static_cast<Eigen::Index>(y)) * model.kill_rates()(static_cast<Eigen::Index>(y)) *
                  lt_moment_bridge(w, 1, y, pts);
  CHECK_THAT(via_bridge, near(lt_moment_start(w, 1, pts), 1e-12));
}

TEST_CASE("loop measure and soup moments") {
  const Matrix u = k2u();
  CHECK_THAT(loop_measure_moment(u, Points{0, 1}), near(1.0 / 9.0));
  CHECK_THAT(soup_field_moment(u, 0.5, Points{0, 1}), near(1.0 / 6.0));
  CHECK_THAT(soup_field_moment(u, 2.5, Points{0}), near(2.5 * 2.0 / 3.0));
  auto rng = test_rng(61);
  const Matrix c = potential(fixture("nonsym3.json")).entries;
  for (std::size_t k = 1; k <= 5; ++k)
    for (const auto& pts : multisets(3, k)) {
      CHECK_THAT(loop_measure_moment(c, pts), near(loop_measure_moment_perm(c, pts), 1e-12));
      for (double alpha : {0.5, 1.0, 2.5}) {
        const double perm = soup_field_moment_permanent(c, alpha, pts);
        CHECK_THAT(soup_field_moment(c, alpha, pts), near(perm, 1e-12));
        CHECK_THAT(perm, near(oracle::permanent(c, pts, alpha), 1e-12));
      }
    }
  // Symmetric, alpha = 1/2: the soup field has the law of G^2/2.
  const Matrix s = potential(random_reversible_model(rng, 3)).entries;
  for (const auto& pts : multisets(3, 3))
    CHECK_THAT(soup_field_moment(s, 0.5, pts), near(gauss_square_moment(s, pts), 1e-12));
}

TEST_CASE("inverse local time and excursion moments on C3") {
  const auto c3 = fixture("c3.json");
  const Kernel k = killed_potential(c3, 0);
  // E^0 L^1 L^2 at tau(1) = 1 + n(L^1 L^2) = 1 + 2/3.
  CHECK_THAT(rayknight_lhs_moment(k, 1.0, Points{1, 2}), near(5.0 / 3.0));
  CHECK_THAT(excursion_moment(k, Points{1, 2}), near(2.0 / 3.0));
  CHECK(excursion_moment(k, Points{1}) == 1.0);
  CHECK_THROWS_AS(excursion_moment(k, Points{0}), PreconditionError);
  CHECK_THROWS_AS(excursion_moment(k, Points{}), PreconditionError);
  CHECK_THROWS_AS(rayknight_lhs_moment(potential(fixture("k2.json")), 1.0, Points{0}), PreconditionError);
  // t = 0: no excursions.
  CHECK(rayknight_lhs_moment(k, 0.0, Points{1, 2}) == 0.0);
  // L^{z0}_{tau(t)} = t.
  CHECK_THAT(rayknight_lhs_moment(k, 1.5, Points{0, 0}), near(2.25));
  auto rng = test_rng(67);
  const auto cyc = random_recurrent_cycle(rng, 5);
  const Kernel kc = killed_potential(cyc, 2);
  for (std::size_t n = 1; n <= 4; ++n)
    for (const auto& pts : multisets(5, n)) {
      if (std::find(pts.begin(), pts.end(), std::size_t{2}) != pts.end()) continue;
      CHECK_THAT(rayknight_lhs_moment(kc, 0.7, pts), near(excursion_poisson_moment(kc, 0.7, pts), 1e-12));
    }
}

TEST_CASE("interlacement moments") {
  const Matrix u = k2u();
  const Vector da = Vector::Unit(2, 0), db = Vector::Unit(2, 1);
  // E[(G_a^2 - u_aa)(G_b^2 - u_bb)] / 4 = 2 u(a,b)^2 / 4 = 1/18.
  CHECK_THAT(wick_square_moment(u, {da, db}), near(1.0 / 18.0));
  CHECK_THAT(wick_square_moment(u, {da, db}), near((oracle::isserlis(u, {0, 0, 1, 1}) - u(0, 0) * u(1, 1)) / 4.0));
  CHECK(wick_square_moment(u, {da}) == 0.0);
  CHECK_THAT(interlacement_moment(u, {da}), near(1.0));
  CHECK_THAT(interlacement_moment(u, {da, db}), near(2.0 / 3.0));
  auto rng = test_rng(71);
  const Matrix c = potential(random_reversible_model(rng, 3)).entries;
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<Vector> nu;
  for (int i = 0; i < 4; ++i) nu.push_back(Vector::NullaryExpr(3, [&] { return d(rng); }));
  for (double t : {0.0, 0.5, 2.0})
    for (std::size_t k = 1; k <= 4; ++k) {
      std::vector<Vector> sub(nu.begin(), nu.begin() + static_cast<long>(k));
      CHECK_THAT(interlacement_gaussian_moment(c, t, sub),
                 near(interlacement_gaussian_moment_expansion(c, t, sub), 1e-12));
    }
  CHECK_THROWS_AS(interlacement_moment(u, {Vector::Ones(3)}), UnknownState);
}
