#include <catch_amalgamated.hpp>

#include "crsphere/quadrature.hpp"

#include <atomic>
#include <random>
#include <thread>

using namespace crsphere;

namespace {

SphereFunctionQ random_function(std::mt19937& rng, int max_degree, int weight, int truncation,
                                int blocks = 4) {
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> val(-4, 4);
  SphereFunctionQ f = SphereFunctionQ::zero(weight, truncation);
  for (int b = 0; b < blocks; ++b) {
    int d = deg(rng);
    std::uniform_int_distribution<int> pick(0, d);
    int p = pick(rng), q = d - p;
    auto& coeffs = f.at(p, q);
    for (auto& c : coeffs)
      c = RationalComplex(Rational(val(rng)), Rational(val(rng), 2));
  }
  f.prune();
  return f;
}

}  // namespace

TEST_CASE("canonical basis contents") {
  const auto& b20 = HarmonicTable::block(2, 0);
  PolyQ z = PolyQ::z(), w = PolyQ::w();
  REQUIRE(b20.basis.size() == 3);
  CHECK(b20.basis[0] == w * w);
  CHECK(b20.basis[1] == z * w);
  CHECK(b20.basis[2] == z * z);

  // antiholomorphic blocks are scalar multiples of conjugate monomials
  const auto& b03 = HarmonicTable::block(0, 3);
  REQUIRE(b03.basis.size() == 4);
  for (int a = 0; a <= 3; ++a) {
    PolyQ mono = PolyQ::constant(RationalComplex(1));
    for (int i = 0; i < 3 - a; ++i) mono = mono * PolyQ::zbar();
    for (int i = 0; i < a; ++i) mono = mono * PolyQ::wbar();
    RationalComplex lead = b03.basis[a].inner(mono) / mono.inner(mono);
    CHECK(!(lead == RationalComplex(0)));
    CHECK(b03.basis[a] == mono * lead);
  }
}

TEST_CASE("basis is harmonic with diagonal Gram") {
  for (int p = 0; p <= 5; ++p)
    for (int q = 0; p + q <= 5; ++q) {
      const auto& data = HarmonicTable::block(p, q);
      REQUIRE(static_cast<int>(data.basis.size()) == p + q + 1);
      for (size_t a = 0; a < data.basis.size(); ++a) {
        CHECK(data.basis[a].laplacian().empty());
        CHECK(data.basis[a].bidegree() == std::pair<int, int>{p, q});
        CHECK(data.gram[a] > 0);
        for (size_t b = a + 1; b < data.basis.size(); ++b)
          CHECK(data.basis[a].inner(data.basis[b]) == RationalComplex(0));
      }
    }
}

TEST_CASE("inner product values") {
  auto z = SphereFunctionQ::basis_element(1, 0, 1, RationalComplex(1), 0, 4);
  CHECK(inner_product(z, z) == RationalComplex(Rational(1, 2)));

  auto z2 = SphereFunctionQ::basis_element(2, 0, 2, RationalComplex(1), 0, 4);
  CHECK(inner_product(z2, z2) == RationalComplex(Rational(1, 3)));

  // distinct blocks are orthogonal
  CHECK(inner_product(z, z2) == RationalComplex(0));

  std::mt19937 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto u = random_function(rng, 5, 0, 8);
    auto v = random_function(rng, 5, 0, 8);
    CHECK(inner_product(u, v) == conj(inner_product(v, u)));
    if (!u.is_zero()) CHECK(l2_norm2(u) > 0);
  }
}

TEST_CASE("conjugation is an exact involution exchanging (p,q) and (q,p)") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    auto u = random_function(rng, 5, 2, 8);
    auto cc = conj_function(conj_function(u));
    CHECK(equal_up_to_zero_blocks(u, cc));
    // isometry
    CHECK(l2_norm2(u) == l2_norm2(conj_function(u)));
    for (const auto& [pq, coeffs] : conj_function(u).blocks) {
      if (!u.find(pq.second, pq.first))
        CHECK(SphereFunctionQ{0, 0, false, {{pq, coeffs}}}.is_zero());
    }
  }
}

TEST_CASE("harmonic_decompose matches hand examples") {
  PolyQ z = PolyQ::z(), w = PolyQ::w(), zb = PolyQ::zbar(), wb = PolyQ::wbar();

  auto f = harmonic_decompose(z * zb, 0, 6);
  REQUIRE(f.blocks.size() == 2);
  // H_{0,0} part is 1/2
  CHECK(f.at(0, 0)[0] == RationalComplex(Rational(1, 2)));
  // H_{1,1} part is (|z|^2 - |w|^2)/2 = e_{1,1,1} / 2 with e_{1,1,1} = |w|^2 - |z|^2
  CHECK(f.at(1, 1)[1] == RationalComplex(Rational(-1, 2)));

  auto g = harmonic_decompose(z.times_r2(), 0, 6);
  REQUIRE(g.blocks.size() == 1);
  CHECK(g.at(1, 0)[1] == RationalComplex(1));

  auto zero = harmonic_decompose(PolyQ{}, 0, 6);
  CHECK(zero.blocks.empty());
}

TEST_CASE("multiply basics") {
  auto one = SphereFunctionQ::basis_element(0, 0, 0, RationalComplex(1), 0, 8);
  auto z = SphereFunctionQ::basis_element(1, 0, 1, RationalComplex(1), 0, 8);
  auto zb = SphereFunctionQ::basis_element(0, 1, 0, RationalComplex(-1), 0, 8);  // e_{0,1,0} = -zbar

  SECTION("identity") {
    std::mt19937 rng(3);
    auto u = random_function(rng, 5, 2, 8);
    CHECK(equal_up_to_zero_blocks(multiply(u, one, 8), u));
  }

  SECTION("z * zbar matches harmonic_decompose") {
    auto prod = multiply(z, zb, 8);
    auto expect = harmonic_decompose(PolyQ::z() * PolyQ::zbar(), 0, 8);
    CHECK(equal_up_to_zero_blocks(prod, expect));
    CHECK_FALSE(prod.truncation_loss);
  }

  SECTION("weights add; commutative; bilinear") {
    std::mt19937 rng(5);
    auto u = random_function(rng, 3, 2, 10, 2);
    auto v = random_function(rng, 3, 0, 10, 2);
    auto uv = multiply(u, v, 10);
    CHECK(uv.weight == 2);
    CHECK(equal_up_to_zero_blocks(uv, multiply(v, u, 10)));
    auto w2 = random_function(rng, 3, 0, 10, 2);
    auto lhs = multiply(u, v + w2, 10);
    auto rhs = multiply(u, v, 10) + multiply(u, w2, 10);
    CHECK(equal_up_to_zero_blocks(lhs, rhs));
  }

  SECTION("associativity for small degrees") {
    std::mt19937 rng(9);
    auto a = random_function(rng, 2, 0, 12, 2);
    auto b = random_function(rng, 2, 0, 12, 2);
    auto c = random_function(rng, 2, 0, 12, 2);
    auto l = multiply(multiply(a, b, 12), c, 12);
    auto r = multiply(a, multiply(b, c, 12), 12);
    CHECK(equal_up_to_zero_blocks(l, r));
    CHECK_FALSE(l.truncation_loss);
  }

  SECTION("truncation loss flag") {
    auto z4 = SphereFunctionQ::basis_element(4, 0, 4, RationalComplex(1), 0, 4);
    auto prod = multiply(z4, z4, 4);
    CHECK(prod.truncation_loss);
    CHECK(prod.blocks.empty());
  }
}

TEST_CASE("decomposed blocks are harmonic after reassembly") {
  std::mt19937 rng(13);
  auto u = random_function(rng, 4, 0, 8, 3);
  auto v = random_function(rng, 4, 0, 8, 3);
  auto uv = multiply(u, v, 8);
  for (const auto& [pq, coeffs] : uv.blocks) {
    PolyQ poly = block_polynomial(pq.first, pq.second, coeffs);
    CHECK(poly.laplacian().empty());
  }
}

TEST_CASE("multiply agrees with the pointwise grid product") {
  std::mt19937 rng(17);
  auto u = to_float(random_function(rng, 3, 0, 8, 2));
  auto v = to_float(random_function(rng, 3, 0, 8, 2));
  auto uv = multiply(u, v, 8, 1e-14);
  // grid with exactness beyond deg(u) + deg(v)
  auto grid = QuadratureGrid::for_degree(14);
  auto uv_vals = evaluate_grid(uv, grid);
  auto u_vals = evaluate_grid(u, grid);
  auto v_vals = evaluate_grid(v, grid);
  double worst = 0.0;
  for (size_t i = 0; i < uv_vals.size(); ++i)
    worst = std::max(worst, std::abs(uv_vals[i] - u_vals[i] * v_vals[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("point evaluation basics") {
  auto one = SphereFunctionQ::basis_element(0, 0, 0, RationalComplex(1), 0, 2);
  CHECK(std::abs(evaluate(one, 0.7, 1.3, 0.4) - 1.0) < 1e-15);
  // z = 1 at (alpha, beta, s) = (0, 0, 0)
  auto z = SphereFunctionQ::basis_element(1, 0, 1, RationalComplex(1), 0, 2);
  CHECK(std::abs(evaluate(z, 0.0, 0.0, 0.0) - 1.0) < 1e-15);
}

TEST_CASE("table caches are shareable across threads") {
  std::vector<std::thread> workers;
  std::atomic<bool> ok{true};
  for (int t = 0; t < 4; ++t)
    workers.emplace_back([&, t] {
      std::mt19937 rng(100 + t);
      auto u = random_function(rng, 4, 0, 10, 2);
      auto v = random_function(rng, 4, 0, 10, 2);
      auto uv = multiply(u, v, 10);
      auto vu = multiply(v, u, 10);
      if (!equal_up_to_zero_blocks(uv, vu)) ok = false;
    });
  for (auto& w : workers) w.join();
  CHECK(ok);
}
