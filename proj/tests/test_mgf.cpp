#include "common.hpp"

#include "oracle.hpp"

using namespace isokit;

namespace {

DiagonalLoad scaled_load(const Matrix& c, double rho, Vector dir) {
  const double r = spectral_radius(c * dir.asDiagonal());
  return DiagonalLoad(dir * (rho / r));
}

}  // namespace

TEST_CASE("single state: 1/sqrt(1 - c lambda) and the exponential law") {
  Matrix c(1, 1);
  c << 0.8;
  const DiagonalLoad load(Vector::Constant(1, 0.5));
  CHECK_THAT(gauss_square_mgf(c, load), near(1.0 / std::sqrt(1.0 - 0.4), 1e-14));
  // E^x e^{lambda L^x} = 1/(1 - c lambda).
  CHECK_THAT(start_mgf(c, load, 0), near(1.0 / (1.0 - 0.4), 1e-14));
  CHECK_THAT(bridge_mgf(c, load, 0, 0), near(0.8 / (1.0 - 0.4), 1e-14));
}

TEST_CASE("load checks") {
  const Matrix c = potential(fixture("k2.json")).entries;
  CHECK_THROWS_AS(gauss_square_mgf(c, DiagonalLoad(Vector::Constant(2, 1.0))), ConvergenceError);
  CHECK_THROWS_AS(gauss_square_mgf(c, DiagonalLoad(Vector::Constant(3, 0.1))), PreconditionError);
  try {
    cbar(c, DiagonalLoad(Vector::Constant(2, 2.0)));
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK_THAT(e.spectral_radius(), near(2.0, 1e-12));
  }
  CHECK_THAT(check_load(c, DiagonalLoad(Vector::Constant(2, 0.5))), near(0.5, 1e-14));
}

TEST_CASE("determinant and resolvent against Neumann series") {
  auto rng = test_rng(101);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const auto model = random_reversible_model(rng, 3 + static_cast<std::size_t>(i % 3));
    const Matrix c = potential(model).entries;
    const Vector dir = Vector::NullaryExpr(c.rows(), [&] { return d(rng); });
    const auto load = scaled_load(c, 0.4, dir);
    const Matrix lc = c * load.matrix();
    CHECK_THAT(std::log(gauss_square_mgf(c, load)), near(log_det_series(c, load), 1e-12));
    CHECK((cbar(c, load) - cbar_series(c, load)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(gauss_square_mgf(c, load), near(1.0 / std::sqrt((Matrix::Identity(c.rows(), c.rows()) - lc).determinant()), 1e-12));
    for (std::size_t x = 0; x < model.size(); ++x) CHECK_THAT(start_mgf(c, load, x), near(start_mgf_series(c, load, x), 1e-12));
  }
}

TEST_CASE("moment Taylor series converge to the closed forms") {
  auto rng = test_rng(103);
  const Matrix c = potential(random_reversible_model(rng, 3)).entries;
  const auto load = scaled_load(c, 0.02, Vector::Ones(3));
  CHECK_THAT(gauss_square_mgf_series(c, load, 8), near(gauss_square_mgf(c, load), 1e-12));
  CHECK_THAT(bridge_mgf_moment_series(c, load, 0, 2, 8), near(bridge_mgf(c, load, 0, 2), 1e-12));
  CHECK_THAT(start_mgf_moment_series(c, load, 1, 8), near(start_mgf(c, load, 1), 1e-12));
  // Truncation error shrinks with the degree.
  const auto big = scaled_load(c, 0.5, Vector::Ones(3));
  const double exact = gauss_square_mgf(c, big);
  double prev = 1.0;
  for (int deg = 2; deg <= 8; deg += 2) {
    const double err = std::abs(gauss_square_mgf_series(c, big, deg) - exact);
    CHECK(err < prev);
    prev = err;
  }
  std::size_t monomials = 0;
  for_each_load_monomial(DiagonalLoad(Vector::Ones(3)), 2, [&](const Points&, double) { ++monomials; });
  CHECK(monomials == 10);
}

TEST_CASE("shifted MGF against the expansion moments") {
  const Matrix c = potential(fixture("k2.json")).entries;
  const auto load = scaled_load(c, 0.03, Vector::Ones(2));
  const Vector s = Vector::Constant(2, 0.7);
  double series = 0.0;
  for_each_load_monomial(load, 8, [&](const Points& pts, double w) {
    series += w * oracle::shifted_squares(c, 0.7, pts);
  });
  CHECK_THAT(shifted_square_mgf(c, load, s), near(series, 1e-12));
}

TEST_CASE("Ray-Knight MGF routes agree") {
  const auto c3 = fixture("c3.json");
  const Kernel k = killed_potential(c3, 0);
  Vector l(3);
  l << 0.0, 0.2, 0.15;
  const DiagonalLoad load(l);
  for (double t : {0.0, 0.5, 1.0, 3.0}) {
    const double r = rayknight_mgf(k, load, t);
    CHECK_THAT(rayknight_mgf_series(k, load, t), near(r, 1e-12 * r));
    CHECK_THAT(rayknight_gaussian_ratio(k, load, t), near(r, 1e-12 * r));
    CHECK_THAT(std::exp(t * excursion_mgf_exponent(k, load, 1.0)), near(r, 1e-12 * r));
  }
  const auto h = h_series(k.entries, load);
  REQUIRE(h.size() > 2);
  CHECK_THAT(h[0], near(0.35, 1e-15));
  CHECK(excursion_mgf_exponent(k, load, 0.0) == 0.0);
}

TEST_CASE("interlacement MGF identity") {
  for (const char* name : {"k2.json", "p4.json"}) {
    const Matrix u = potential(fixture(name)).entries;
    const Vector nu = Vector::Ones(u.rows());
    for (double t : {0.0, 0.5, 2.0}) {
      const auto p = interlacement_mgf_check(u, nu, t, 0.2);
      CHECK_THAT(p.lhs, near(p.rhs, 1e-10));
    }
  }
  const auto t0 = interlacement_mgf_check(potential(fixture("k2.json")).entries, Vector::Ones(2), 0.0, 0.2);
  CHECK_THAT(t0.lhs, near(1.0, 1e-14));
  CHECK_THROWS_AS(interlacement_mgf_check(potential(fixture("k2.json")).entries, Vector::Ones(2), 0.5, 5.0),
                  ConvergenceError);
}
