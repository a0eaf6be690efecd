#include "common.hpp"

using namespace isokit;

TEST_CASE("streams are reproducible and distinct") {
  const RngStream s{7, 0};
  auto a = s.engine(), b = s.engine();
  CHECK(a() == b());
  auto c = s.child(1).engine(), d = s.child(2).engine();
  CHECK(c() != d());
  CHECK(s.child(1).stream == s.child(1).stream);
  CHECK(RngStream{8, 0}.engine()() != RngStream{7, 0}.engine()());
}

TEST_CASE("path sampler: determinism and additivity") {
  const auto k2 = fixture("k2.json");
  Rng r1 = RngStream{1, 0}.engine(), r2 = RngStream{1, 0}.engine();
  const PathSampler s(k2);
  for (int i = 0; i < 50; ++i) {
    const auto a = s.sample(0, r1);
    const auto b = s.sample(0, r2);
    CHECK(a.field.values == b.field.values);
    // Local time is the sum of the holding times of the visits, over m.
    Vector occ = Vector::Zero(2);
    double life = 0.0;
    for (const auto& st : a.path.steps) {
      occ(static_cast<Eigen::Index>(st.state)) += st.duration;
      life += st.duration;
    }
    CHECK((occ.cwiseQuotient(k2.mass()) - a.field.values).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THAT(life, near(a.path.lifetime, 1e-12));
    CHECK(a.path.cause == Termination::killed);
    CHECK(a.path.steps.front().state == 0);
  }
  Rng r = RngStream{1, 0}.engine();
  CHECK_THROWS_AS(PathSampler(fixture("c3.json")).sample(0, r), PreconditionError);
}

TEST_CASE("exponential law of L^a on K2") {
  const auto k2 = fixture("k2.json");
  Rng r = RngStream{2, 0}.engine();
  RunningStats m1, m2;
  const PathSampler s(k2);
  for (int i = 0; i < 40000; ++i) {
    const double l = s.sample(0, r, false).field[0];
    m1.add(l);
    m2.add(l * l);
  }
  CHECK(std::abs(m1.mean() - 2.0 / 3.0) < 4 * m1.standard_error());
  CHECK(std::abs(m2.mean() - 8.0 / 9.0) < 4 * m2.standard_error());
}

TEST_CASE("bridge sampler ends at y and matches bridge moments") {
  const auto p4 = fixture("p4.json");
  const Matrix u = potential(p4).entries;
  const BridgeSampler s(p4, 2);
  Rng r = RngStream{3, 0}.engine();
  RunningStats m;
  for (int i = 0; i < 40000; ++i) m.add(s.sample(0, r)[1]);
  const double expected = lt_moment_bridge(u, 0, 2, Points{1}) / u(0, 2);
  CHECK(std::abs(m.mean() - expected) < 4 * m.standard_error());
  CHECK_THROWS_AS(BridgeSampler(fixture("c3.json"), 0), PreconditionError);
}

TEST_CASE("inverse local time sampler stops exactly at level t") {
  const auto c3 = fixture("c3.json");
  const InverseLtSampler s(c3, 0);
  Rng r = RngStream{4, 0}.engine();
  RunningStats lap;
  for (int i = 0; i < 20000; ++i) {
    const auto smp = s.sample(1.0, r);
    CHECK(smp.field[0] == 1.0);
    CHECK(smp.lifetime >= smp.field.values.sum() - 1e-12);
    CHECK_THAT(smp.lifetime, near(smp.field.values.dot(c3.mass()), 1e-9));
    lap.add(std::exp(-smp.lifetime));
  }
  CHECK(std::abs(lap.mean() - inverse_lt_laplace(c3, 0, 1.0, 1.0)) < 4 * lap.standard_error());
  const auto zero = s.sample(0.0, r);
  CHECK(zero.lifetime == 0.0);
  CHECK(zero.field.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(InverseLtSampler(fixture("k2.json"), 0), PreconditionError);
}

TEST_CASE("Gaussian sampler covariance") {
  const Matrix c = potential(fixture("p4.json")).entries;
  const GaussianSampler g(c);
  CHECK((g.root() * g.root() - c).cwiseAbs().maxCoeff() < 1e-12);
  Rng r = RngStream{5, 0}.engine();
  const Matrix x = sample_gaussian(c, 20000, r);
  const Matrix emp = x * x.transpose() / 20000.0;
  CHECK((emp - c).cwiseAbs().maxCoeff() < 0.06);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(GaussianSampler(bad), PreconditionError);
  bad << 1, 0, 0.5, 1;
  CHECK_THROWS_AS(GaussianSampler(bad), PreconditionError);
}

TEST_CASE("half-integer soup field") {
  const Matrix u = potential(fixture("k2.json")).entries;
  Rng r = RngStream{6, 0}.engine();
  RunningStats m;
  const HalfIntSoupSampler s(u, 3);
  for (int i = 0; i < 40000; ++i) m.add(s.draw(r)[0]);
  CHECK(std::abs(m.mean() - 1.5 * u(0, 0)) < 4 * m.standard_error());
  CHECK_THROWS_AS(HalfIntSoupSampler(u, 0), PreconditionError);
}

TEST_CASE("Poisson counts and running statistics") {
  Rng r = RngStream{9, 0}.engine();
  RunningStats a;
  for (int i = 0; i < 20000; ++i) a.add(static_cast<double>(sample_poisson_functional({1.0, 0.5}, 2.0, r)[1]));
  CHECK(std::abs(a.mean() - 1.0) < 4 * a.standard_error());
  CHECK_THAT(a.variance(), near(1.0, 0.05));
  CHECK(sample_poisson_functional({0.0}, 1.0, r)[0] == 0);
  CHECK_THROWS_AS(sample_poisson_functional({-1.0}, 1.0, r), PreconditionError);
  RunningStats s;
  for (double x : {1.0, 2.0, 4.0}) s.add(x);
  CHECK_THAT(s.mean(), near(7.0 / 3.0));
  CHECK_THAT(s.variance(), near(7.0 / 3.0));
  CHECK(s.count() == 3);
}
