#include <catch_amalgamated.hpp>

#include "crsphere/io.hpp"

#include <random>

using namespace crsphere;

TEST_CASE("sphere function JSON round trip") {
  SECTION("exact scalars as num/den strings") {
    SphereFunctionQ u = SphereFunctionQ::zero(2, 8);
    u.at(0, 4)[1] = RationalComplex(Rational(3, 7), Rational(-2, 5));
    u.at(2, 2)[0] = RationalComplex(Rational(1), Rational(0));
    json j = to_json(u);
    CHECK(j["blocks"][0]["re"][1].get<std::string>() == "3/7");
    auto back = sphere_function_from_json<RationalComplex>(j);
    CHECK(equal_up_to_zero_blocks(u, back));
  }

  SECTION("float scalars as numbers") {
    SphereFunctionD u = SphereFunctionD::zero(0, 6);
    u.at(1, 1)[2] = {0.25, -1.5};
    json j = to_json(u);
    auto back = sphere_function_from_json<std::complex<double>>(j);
    CHECK(l2_norm(back - u) == 0.0);
  }

  SECTION("bad block size is rejected") {
    json j = {{"weight", 0},
              {"truncation", 4},
              {"blocks", {{{"p", 1}, {"q", 1}, {"re", {1.0}}, {"im", {0.0}}}}}};
    CHECK_THROWS_AS(sphere_function_from_json<std::complex<double>>(j), ParseError);
  }
}

TEST_CASE("series JSON round trip") {
  auto phidot = SphereFunctionQ::basis_element(0, 4, 2, RationalComplex(Rational(1, 64)), 2, 8);
  auto series = be_series(phidot, Rational(-1), 3, 8);
  json j = to_json(series);
  auto back = series_from_json<RationalComplex>(j);
  REQUIRE(back.f.size() == series.f.size());
  for (size_t k = 0; k < series.f.size(); ++k)
    CHECK(equal_up_to_zero_blocks(series.f[k], back.f[k]));
  CHECK(back.lambda == series.lambda);
}

TEST_CASE("polynomial parser") {
  PolyQ z = PolyQ::z(), w = PolyQ::w();

  CHECK(parse_polynomial("z*conj(z)") == z * z.conjugated());
  CHECK(parse_polynomial("0").empty());
  CHECK(parse_polynomial("3/4 * z^2 - w") == z * z * RationalComplex(Rational(3, 4)) - w);
  CHECK(parse_polynomial("conj(z*w)") == (z * w).conjugated());
  CHECK(parse_polynomial("i*z") == z * RationalComplex::i());
  CHECK(parse_polynomial("-z + z").empty());
  CHECK(parse_polynomial("(z + w)^2") == z * z + z * w + z * w + w * w);

  SECTION("errors carry a position") {
    CHECK_THROWS_MATCHES(parse_polynomial("z + "), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("1:5")));
    CHECK_THROWS_AS(parse_polynomial("z ^ x"), ParseError);
    CHECK_THROWS_AS(parse_polynomial("z u"), ParseError);
  }
}

TEST_CASE("decompose of parsed fixture matches the harmonics example") {
  PolyQ p = parse_polynomial("z*conj(z)");
  auto f = harmonic_decompose(p, 0, 6);
  REQUIRE(f.blocks.size() == 2);
  CHECK(f.at(0, 0)[0] == RationalComplex(Rational(1, 2)));
}

TEST_CASE("block operator golden dump") {
  auto op = materialize<RationalComplex>(StandardOp::Z1bar, 2);
  json j = to_json(op);
  CHECK(j["dp"] == 1);
  CHECK(j["dq"] == -1);
  // H_{1,1} block: scalar -(p+1) q = -2 on the diagonal
  bool found = false;
  for (const auto& b : j["blocks"])
    if (b["p"] == 1 && b["q"] == 1) {
      found = true;
      CHECK(b["matrix"][0][0][0].get<std::string>() == "-2/1");
      CHECK(b["matrix"][0][1][0].get<std::string>() == "0/1");
    }
  CHECK(found);
}

TEST_CASE("manifest hashing is deterministic") {
  json config{{"N", 8}, {"K", 5}, {"lambda", -1.0}};
  CHECK(fnv1a_hex(config.dump()) == fnv1a_hex(config.dump()));
  json other{{"N", 9}, {"K", 5}, {"lambda", -1.0}};
  CHECK(fnv1a_hex(config.dump()) != fnv1a_hex(other.dump()));
}

TEST_CASE("operator dump matches the committed golden file") {
  auto op = materialize<RationalComplex>(StandardOp::Z1bar, 4);
  json fresh = to_json(op);
  json golden = read_json_file(std::string(CRSPHERE_TEST_DIR) + "/golden/z1bar_N4.json");
  CHECK(fresh == golden);
}
