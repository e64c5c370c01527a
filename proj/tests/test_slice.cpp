#include <catch_amalgamated.hpp>

#include "crsphere/slice.hpp"

#include <random>

using namespace crsphere;

namespace {

SphereFunctionQ random_tensor(std::mt19937& rng, int N, int blocks = 6) {
  std::uniform_int_distribution<int> deg(0, N);
  std::uniform_int_distribution<int> val(-3, 3);
  SphereFunctionQ f = SphereFunctionQ::zero(2, N);
  for (int b = 0; b < blocks; ++b) {
    int d = deg(rng);
    std::uniform_int_distribution<int> pick(0, d);
    int p = pick(rng);
    auto& c = f.at(p, d - p);
    for (auto& x : c) x = RationalComplex(Rational(val(rng), 4), Rational(val(rng), 4));
  }
  f.prune();
  return f;
}

bool is_real(const SphereFunctionQ& g) {
  return equal_up_to_zero_blocks(g, conj_function(g));
}

bool in_be_prime(const SphereFunctionQ& u) {
  for (const auto& [pq, coeffs] : u.blocks) {
    auto [p, q] = pq;
    bool zero = true;
    for (const auto& c : coeffs)
      if (!(c == RationalComplex(0))) zero = false;
    if (zero) continue;
    if (q < p + 4) return false;
    if (q == p + 4)
      for (const auto& d : critical_diagonal_defect(p, coeffs))
        if (!(d == RationalComplex(0))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("slice decomposition structure and exact reconstruction") {
  std::mt19937 rng(401);
  for (int trial = 0; trial < 10; ++trial) {
    auto phidot = random_tensor(rng, 10);
    auto d = slice_decompose(phidot);

    CHECK(d.residual_norm == 0.0);
    auto recon = d.be_prime + gauge_image(d.g) + d.perp;
    CHECK(equal_up_to_zero_blocks(recon, phidot));

    CHECK(is_real(d.g));
    CHECK(project(d.perp, Region::QGe2).is_zero());
    CHECK(in_be_prime(d.be_prime));
  }
}

TEST_CASE("slice examples") {
  const int N = 10;

  SECTION("perp-supported input passes through") {
    auto phidot = SphereFunctionQ::basis_element(3, 1, 2, RationalComplex(2), 2, N);
    auto d = slice_decompose(phidot);
    CHECK(d.be_prime.is_zero());
    CHECK(d.g.is_zero());
    CHECK(equal_up_to_zero_blocks(d.perp, phidot));
  }

  SECTION("gauge round trip recovers the potential") {
    // real g supported away from p,q in {0,1} and off the diagonal pairing
    SphereFunctionQ g0 = SphereFunctionQ::zero(0, N);
    auto& c = g0.at(4, 2);
    for (auto& x : c) x = RationalComplex(Rational(1, 3), Rational(-1, 2));
    g0 += conj_function(g0);
    // add a real S^1-invariant diagonal piece
    SphereFunctionQ gd = SphereFunctionQ::zero(0, N);
    gd.at(3, 3)[2] = RationalComplex(Rational(1, 5));
    gd += conj_function(gd);
    g0 += gd;
    g0.prune();
    REQUIRE(is_real(g0));

    auto phidot = gauge_image(g0);
    auto d = slice_decompose(phidot);
    CHECK(d.be_prime.is_zero());
    CHECK(d.perp.is_zero());
    CHECK(equal_up_to_zero_blocks(gauge_image(d.g), phidot));
  }

  SECTION("strictly-above-diagonal input with no below-diagonal partner") {
    auto phidot = SphereFunctionQ::basis_element(0, 6, 3, RationalComplex(1), 2, N);
    // (0,6): q > p+4 and the coupled partner block (q-4, p+4) = (2, 4) is absent
    auto d = slice_decompose(phidot);
    CHECK(d.g.is_zero());
    CHECK(d.perp.is_zero());
    CHECK(equal_up_to_zero_blocks(d.be_prime, phidot));
  }
}

TEST_CASE("direct-sum consistency: components re-decompose to themselves") {
  std::mt19937 rng(407);
  auto phidot = random_tensor(rng, 10);
  auto d = slice_decompose(phidot);

  auto d_be = slice_decompose(d.be_prime);
  CHECK(equal_up_to_zero_blocks(d_be.be_prime, d.be_prime));
  CHECK(d_be.g.is_zero());
  CHECK(d_be.perp.is_zero());

  auto pi = gauge_image(d.g);
  auto d_pi = slice_decompose(pi);
  CHECK(d_pi.be_prime.is_zero());
  CHECK(equal_up_to_zero_blocks(gauge_image(d_pi.g), pi));
  CHECK(d_pi.perp.is_zero());

  auto d_perp = slice_decompose(d.perp);
  CHECK(d_perp.be_prime.is_zero());
  CHECK(d_perp.g.is_zero());
  CHECK(equal_up_to_zero_blocks(d_perp.perp, d.perp));
}

TEST_CASE("oblique projection") {
  std::mt19937 rng(409);

  SECTION("kills perp input and is idempotent") {
    auto perp = SphereFunctionQ::basis_element(5, 0, 1, RationalComplex(3), 2, 10);
    CHECK(oblique_Pi(perp).is_zero());
    for (int trial = 0; trial < 5; ++trial) {
      auto u = random_tensor(rng, 8);
      auto once = oblique_Pi(u);
      CHECK(equal_up_to_zero_blocks(oblique_Pi(once), once));
    }
  }

  SECTION("empirical norms are finite and reported") {
    for (int s : {0, 2, 4}) {
      double norm = oblique_Pi_norm_estimate(8, s, 24, 99);
      CHECK(norm > 0.0);
      CHECK(std::isfinite(norm));
    }
  }
}

TEST_CASE("cone report") {
  const int N = 10;

  SECTION("zero is in every cone") {
    auto r = cone_report(SphereFunctionQ::zero(2, N));
    CHECK(r.in_D0);
    CHECK(r.in_BE);
    CHECK(r.in_BE_prime);
    CHECK(r.in_CD);
    CHECK(r.in_CD_prime);
  }

  SECTION("H_{0,4} basis element: BE, and BE-prime iff defect vanishes") {
    auto phi = SphereFunctionQ::basis_element(0, 4, 2, RationalComplex(1), 2, N);
    auto r = cone_report(phi);
    CHECK(r.in_BE);
    CHECK(r.in_CD);
    REQUIRE(r.reality_defects.size() == 1);
    bool defect_zero = r.reality_defects[0].second == 0.0;
    CHECK(r.in_BE_prime == defect_zero);
    // the projection onto BE-prime has zero defect and stays in the cone
    auto rp = cone_report(project(phi, Region::BEPrime));
    CHECK(rp.in_BE_prime);
  }

  SECTION("H_{3,3} basis element is in no cone except D_0") {
    auto phi = SphereFunctionQ::basis_element(3, 3, 0, RationalComplex(1), 2, N);
    auto r = cone_report(phi);
    CHECK(r.in_D0);
    CHECK_FALSE(r.in_BE);
    CHECK_FALSE(r.in_CD);
    CHECK(r.offending_BE == std::vector<BlockKey>{{3, 3}});
  }
}
