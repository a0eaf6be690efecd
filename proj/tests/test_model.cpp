#include "common.hpp"

#include <cstdio>
#include <fstream>

using namespace isokit;

TEST_CASE("K2 fixture assembles the generator") {
  const auto k2 = fixture("k2.json");
  REQUIRE(k2.size() == 2);
  CHECK(k2.state_name(0) == "a");
  CHECK(k2.index_of("b") == 1);
  const Matrix q = k2.generator().matrix();
  Matrix expected(2, 2);
  expected << -2, 1, 1, -2;
  CHECK(q.isApprox(expected, 0.0));
  CHECK(k2.symmetric());
  CHECK(k2.transient());
  CHECK(k2.total_rate(0) == 2.0);
}

TEST_CASE("C3 fixture is accepted as recurrent") {
  const auto c3 = fixture("c3.json");
  CHECK(c3.recurrent());
  CHECK_THAT(c3.generator().spectral_abscissa(), near(0.0, 1e-10));
  CHECK(c3.generator().matrix().rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("validation errors") {
  const std::string head = R"({"schema":"isokit-model/1","states":["a","b"],)";
  const std::string jumps = R"("jump_rates":[{"from":"a","to":"b","rate":1},{"from":"b","to":"a","rate":1}],)";
  const std::string kill = R"("kill_rates":{"a":1,"b":1})";
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":0,"b":1},)" + jumps + kill + "}"), ValidationError);
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1,"b":1},)" + jumps + R"("kill_rates":{"a":-1})" + "}"),
                  ValidationError);
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1,"b":1},)" +
                              R"("jump_rates":[{"from":"a","to":"b","rate":2},{"from":"b","to":"a","rate":1}],)" +
                              kill + R"(,"symmetric":true})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_model(std::string("{not json")), ParseError);
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1,"b":1},)" + jumps + kill + R"(,"extra":1})"), ParseError);
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1},)" + jumps + kill + "}"), ParseError);
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1,"b":1},)" + R"("jump_rates":[{"from":"a","to":"c","rate":1}],)" +
                              kill + "}"),
                  ParseError);
  // Conservative chain not flagged recurrent.
  CHECK_THROWS_AS(parse_model(head + R"("m":{"a":1,"b":1},)" + jumps + R"("kill_rates":{}})"), ValidationError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ParseError);
}

TEST_CASE("check_symmetry examples") {
  Vector m(2);
  Matrix q(2, 2);
  m << 1, 1;
  q << -2, 2, 1, -1;
  auto r = check_symmetry(m, q);
  CHECK(r.max_deviation == 1.0);
  CHECK_FALSE(r.pass);
  m << 1, 2;
  r = check_symmetry(m, q);
  CHECK(r.max_deviation == 0.0);
  CHECK(r.pass);
  CHECK(check_symmetry(fixture("k2.json")).max_deviation == 0.0);
  CHECK_FALSE(check_symmetry(fixture("nonsym3.json")).pass);
}

TEST_CASE("save and load round-trip the fixtures") {
  for (const char* name : {"k2.json", "c3.json", "nonsym3.json", "p4.json"}) {
    const auto a = fixture(name);
    const std::string path = std::string("roundtrip_") + name;
    save_model(a, path);
    const auto b = load_model(path);
    std::remove(path.c_str());
    CHECK(b.states() == a.states());
    CHECK(b.mass() == a.mass());
    CHECK(b.jump_rates() == a.jump_rates());
    CHECK(b.kill_rates() == a.kill_rates());
    CHECK(b.symmetric() == a.symmetric());
    CHECK(b.recurrent() == a.recurrent());
    CHECK(to_json(b) == to_json(a));
  }
}

TEST_CASE("transient models have negative spectral abscissa") {
  auto rng = test_rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto m = random_reversible_model(rng, 3 + static_cast<std::size_t>(i % 3));
    CHECK(m.generator().spectral_abscissa() < -1e-10);
    CHECK(check_symmetry(m).pass);
    const Matrix& q = m.generator().matrix();
    CHECK(q.rowwise().sum().maxCoeff() <= 0.0);
  }
  for (std::size_t n = 3; n <= 6; ++n) {
    const auto c = random_recurrent_cycle(rng, n);
    CHECK_THAT(c.generator().spectral_abscissa(), near(0.0, 1e-10));
  }
}
