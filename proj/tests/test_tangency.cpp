#include <catch_amalgamated.hpp>

#include "crsphere/tangency.hpp"

#include <random>

using namespace crsphere;

namespace {

SphereFunctionQ random_blocks(std::mt19937& rng, const std::vector<BlockKey>& support, int weight,
                              int truncation, int denom = 8) {
  std::uniform_int_distribution<int> val(-2, 2);
  SphereFunctionQ f = SphereFunctionQ::zero(weight, truncation);
  for (auto [p, q] : support) {
    auto& c = f.at(p, q);
    for (auto& x : c) x = RationalComplex(Rational(val(rng), denom), Rational(val(rng), denom));
  }
  f.prune();
  return f;
}

// Support predicate: every nonzero block satisfies pred(p, q).
template <class S, class Pred>
bool support_satisfies(const SphereFunction<S>& u, Pred pred, double tol = 0.0) {
  for (const auto& [pq, coeffs] : u.blocks) {
    bool zero = true;
    for (const auto& c : coeffs)
      if (!scalar_traits<S>::is_zero(c, tol)) zero = false;
    if (!zero && !pred(pq.first, pq.second)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("apply_L basics") {
  const int N = 10;
  std::mt19937 rng(61);
  auto f = random_blocks(rng, {{2, 2}, {3, 1}, {0, 0}}, 0, N);
  auto zero_phi = SphereFunctionQ::zero(2, N);
  CHECK(apply_L(zero_phi, f, N).is_zero());

  auto phi = random_blocks(rng, {{0, 4}, {2, 3}}, 2, N);
  auto one = SphereFunctionQ::basis_element(0, 0, 0, RationalComplex(1), 0, N);
  auto lf = apply_L(phi, one, N);
  auto expect = -(apply_nabla0(phi) * RationalComplex::i());
  CHECK(equal_up_to_zero_blocks(lf, expect));
}

TEST_CASE("Burns-Epstein cone closure of L (support bookkeeping)") {
  const int N = 12;
  std::mt19937 rng(67);
  for (int trial = 0; trial < 4; ++trial) {
    auto phi = random_blocks(rng, {{0, 4}, {1, 5}, {0, 6}}, 2, N);
    auto h = random_blocks(rng, {{0, 4}, {0, 5}, {1, 6}}, 2, N);  // in D_BE
    auto f = apply_Z1bar(apply_Z1bar(h));  // f in (Z1bar)^2 D_BE
    f.weight = 0;
    auto lf = apply_L(phi, f, N);
    CHECK(support_satisfies(lf, [](int p, int q) { return q >= p + 4; }));
  }
}

TEST_CASE("formal series on zero input") {
  auto zero = SphereFunctionQ::zero(2, 8);
  auto series = formal_series(zero, 4, 8);
  for (const auto& fk : series.f) CHECK(fk.is_zero());
  for (const auto& pk : series.phi) CHECK(pk.is_zero());
}

TEST_CASE("formal series rejects non-embeddable data") {
  auto bad = SphereFunctionQ::basis_element(2, 1, 0, RationalComplex(1), 2, 8);
  CHECK_THROWS_AS(formal_series(bad, 3, 8), NotInfinitesimallyEmbeddable);
}

TEST_CASE("formal series: polynomial residual vanishes exactly") {
  const int N = 10, K = 4;
  std::mt19937 rng(71);
  auto phidot = random_blocks(rng, {{2, 2}, {1, 3}, {0, 2}}, 2, N, 16);
  auto series = formal_series(phidot, K, N);

  // orthogonality: f^(k) has no blocks with p in {0,1}
  for (const auto& fk : series.f) CHECK(project(fk, Region::PIn01).is_zero());
  // phi^(k) for k >= 2 lives in q in {0,1}
  for (int k = 2; k < static_cast<int>(series.phi.size()); ++k)
    CHECK(project(series.phi[k], Region::QGe2).is_zero());

  auto residuals = tangency_residual_series(series);
  for (const auto& r : residuals) CHECK(r.is_zero());

  SECTION("deterministic pipeline") {
    auto again = formal_series(phidot, K, N);
    for (int k = 0; k <= K; ++k) CHECK(equal_up_to_zero_blocks(series.f[k], again.f[k]));
  }
}

TEST_CASE("formal series on H_{2,2} input has nonzero second-order deformation") {
  const int N = 10;
  auto phidot = SphereFunctionQ::basis_element(2, 2, 1, RationalComplex(Rational(1, 4)), 2, N);
  auto series = formal_series(phidot, 2, N);

  // direct-computation oracle: phi^(2) = P2(L^(1) f^(0)) / 2
  auto f0 = solve_Z1_squared(phidot);
  SphereFunctionQ l1f0 = multiply(phidot, apply_Z1_Z1bar_sym(f0), N);
  l1f0 += multiply(apply_Z1(phidot), apply_Z1bar(f0), N);
  l1f0 -= multiply(apply_Z1bar(phidot), apply_Z1(f0), N);
  l1f0 -= multiply(apply_nabla0(phidot), f0, N) * RationalComplex::i();
  auto expect = project(l1f0, Region::QIn01) * RationalComplex(Rational(1, 2));

  CHECK(equal_up_to_zero_blocks(series.phi[2], expect));
  CHECK_FALSE(series.phi[2].is_zero());
}

TEST_CASE("BE series") {
  const int N = 12, K = 6;
  std::mt19937 rng(73);
  auto phidot = random_blocks(rng, {{0, 4}, {1, 5}, {0, 6}}, 2, N, 32);

  SECTION("lambda = 0 agrees with the general recursion, which keeps phi linear") {
    auto be = be_series(phidot, Rational(0), K, N);
    auto general = formal_series(phidot, K, N);
    for (int k = 0; k <= K; ++k) CHECK(equal_up_to_zero_blocks(be.f[k], general.f[k]));
    for (int k = 2; k < static_cast<int>(general.phi.size()); ++k)
      CHECK(general.phi[k].is_zero());
  }

  SECTION("potential coefficients stay in (Z1bar)^2 D_BE") {
    auto be = be_series(phidot, Rational(-1), K, N);
    for (const auto& fk : be.f)
      CHECK(support_satisfies(fk, [](int p, int q) { return p >= 2 && q >= p; }));
  }

  SECTION("series residual vanishes exactly (lambda folded in)") {
    auto be = be_series(phidot, Rational(-1), K, N);
    auto residuals = tangency_residual_series(be);
    for (const auto& r : residuals) CHECK(r.is_zero());
  }

  SECTION("rejects non-BE input") {
    auto bad = SphereFunctionQ::basis_element(2, 2, 0, RationalComplex(1), 2, N);
    CHECK_THROWS_AS(be_series(bad, Rational(0), 2, N), NotBurnsEpstein);
  }
}

TEST_CASE("strict-sign certificate") {
  const int N = 8;
  auto phidot = SphereFunctionQ::basis_element(0, 4, 2, RationalComplex(Rational(1, 100)), 2, N);
  auto be = be_series(phidot, Rational(-1), 10, N);
  auto grid = QuadratureGrid::for_degree(2 * N + 4);
  SpectralTransform t(grid, N);
  certify_sign(be, t);
  CHECK(be.sign_certified);
  CHECK(be.sign == -1);
  CHECK(be.sign_min > 0.5);
}

TEST_CASE("radius estimate") {
  const int N = 8, s = 10;
  auto zero = SphereFunctionQ::zero(2, N);
  auto r0 = radius_estimate(zero, s, N);
  CHECK(std::isinf(r0.radius));
  CHECK(r0.Cs * r0.Cs > r0.C * (5.0 * r0.Cs + 1.0));

  auto phidot = SphereFunctionQ::basis_element(0, 4, 1, RationalComplex(Rational(1, 50)), 2, N);
  auto r1 = radius_estimate(phidot, s, N);
  auto r3 = radius_estimate(phidot * RationalComplex(3), s, N);
  CHECK(r3.radius == Catch::Approx(r1.radius / 3.0));

  SECTION("norm growth bound against the series") {
    auto be = be_series(phidot, Rational(0), 8, N);
    double base = r1.Cs * r1.norm_s;
    for (int k = 0; k < static_cast<int>(be.fs_norms.size()); ++k) {
      double bound = std::pow(base, k + 1);
      CHECK(be.fs_norms[k] <= bound * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("pseudohermitian and polynomial residual forms agree on the grid") {
  // Both forms reproject an intermediate first-derivative; run the transform
  // at a degree high enough that the nonpolynomial 1/sqrt(1-|phi|^2) tail is
  // below the comparison tolerance for low-degree small phi.
  const int N = 16;
  auto grid = QuadratureGrid::for_degree(2 * N + 8);
  SpectralTransform t(grid, N);

  SphereFunctionD phi = SphereFunctionD::zero(2, N);
  phi.at(1, 1)[0] = {0.02, -0.006};
  phi.at(0, 2)[1] = {0.0, 0.015};
  SphereFunctionD phidot = SphereFunctionD::zero(2, N);
  phidot.at(1, 2)[0] = {0.02, 0.01};
  SphereFunctionD f = SphereFunctionD::zero(0, N);
  f.at(2, 2)[1] = {0.3, -0.1};
  f.at(0, 0)[0] = {-1.0, 0.0};

  auto ph = tangency_residual_grid(phi, phidot, f, t);

  // polynomial form: (Z~)^2 f - (Z1bar phi)(Z~ f) - i (D0 phi) f - phidot,
  // with Z~ = Z1 + phi Z1bar (unnormalized frame)
  auto phi_v = t.evaluate(phi);
  auto z1f = t.evaluate(apply_Z1(f));
  auto z1bf = t.evaluate(apply_Z1bar(f));
  std::vector<std::complex<double>> ztf(phi_v.size());
  for (size_t i = 0; i < ztf.size(); ++i) ztf[i] = z1f[i] + phi_v[i] * z1bf[i];
  auto h = t.project(ztf, 1);
  auto z1h = t.evaluate(apply_Z1(h));
  auto z1bh = t.evaluate(apply_Z1bar(h));
  auto z1b_phi = t.evaluate(apply_Z1bar(phi));
  auto n0_phi = t.evaluate(apply_nabla0(phi));
  auto fv = t.evaluate(f);
  auto pd = t.evaluate(phidot);
  const std::complex<double> I(0.0, 1.0);
  for (size_t i = 0; i < ztf.size(); i += 37) {
    std::complex<double> poly = (z1h[i] + phi_v[i] * z1bh[i]) - z1b_phi[i] * ztf[i] -
                                I * n0_phi[i] * fv[i] - pd[i];
    std::complex<double> scaled = (1.0 - std::norm(phi_v[i])) * ph[i];
    CHECK(std::abs(poly - scaled) < 1e-9);
  }
}

TEST_CASE("evolve_general") {
  const int N = 6;
  auto grid = QuadratureGrid::for_degree(4 * N + 4);
  SpectralTransform t(grid, N);
  EvolveOptions opts;
  opts.dt = 5e-3;
  opts.t_end = 0.2;
  opts.sample_every = 10;

  SECTION("preconditions") {
    SphereFunctionD ok = SphereFunctionD::zero(2, N);
    ok.at(2, 2)[0] = {0.01, 0.0};
    CHECK_THROWS_AS(evolve_general(ok, +1.0, N, t, opts), std::invalid_argument);
    SphereFunctionD bad = SphereFunctionD::zero(2, N);
    bad.at(3, 1)[0] = {0.01, 0.0};
    CHECK_THROWS_AS(evolve_general(bad, -1.0, N, t, opts), NotInfinitesimallyEmbeddable);
    EvolveOptions big = opts;
    big.dt = 100.0;
    CHECK_THROWS_AS(evolve_general(ok, -1.0, N, t, big), StepRejected);
  }

  SECTION("BE input stays on the ray t phidot and matches the analytic series") {
    // N large enough that phi^2 is exactly representable, so the truncated
    // exact recursion and the pseudospectral products coincide
    const int N8 = 8;
    auto grid8 = QuadratureGrid::for_degree(4 * N8 + 4);
    SpectralTransform t8(grid8, N8);
    SphereFunctionD phidot = SphereFunctionD::zero(2, N8);
    phidot.at(0, 4)[2] = {0.002, 0.001};
    auto traj = evolve_general(phidot, -1.0, N8, t8, opts);
    auto series = be_series(to_float_any(phidot), -1.0, 12, N8);
    for (size_t i = 0; i < traj.times.size(); ++i) {
      double tt = traj.times[i];
      SphereFunctionD ray = phidot;
      ray *= std::complex<double>(tt, 0.0);
      CHECK(l2_norm(traj.phi[i] - ray) < 1e-10);
      // f from the series
      SphereFunctionD fs = SphereFunctionD::zero(0, N8);
      double tp = 1.0;
      for (int k = 0; k <= series.K; ++k) {
        SphereFunctionD term = series.f[k];
        term *= std::complex<double>(tp, 0.0);
        fs += term;
        tp *= tt;
      }
      fs.at(0, 0)[0] += -1.0;
      CHECK(l2_norm(traj.f[i] - fs) < 1e-8);
    }
  }

  SECTION("psi = O(t^2) for an H_{2,2} input") {
    SphereFunctionD phidot = SphereFunctionD::zero(2, N);
    phidot.at(2, 2)[1] = {0.01, 0.0};
    EvolveOptions o2 = opts;
    o2.dt = 2e-3;
    o2.t_end = 0.128;
    o2.sample_every = 1;
    auto traj = evolve_general(phidot, -1.0, N, t, o2);
    // psi(t) = phi(t) - t*phidot; fit log-log slope over a dyadic ladder
    auto psi_norm = [&](size_t idx) {
      SphereFunctionD ray = phidot;
      ray *= std::complex<double>(traj.times[idx], 0.0);
      return l2_norm(traj.phi[idx] - ray);
    };
    std::vector<double> ts, ns;
    for (size_t i = 0; i < traj.times.size(); ++i) {
      double tt = traj.times[i];
      for (double target : {0.016, 0.032, 0.064, 0.128})
        if (std::abs(tt - target) < 1e-12) {
          ts.push_back(tt);
          ns.push_back(psi_norm(i));
        }
    }
    REQUIRE(ts.size() == 4);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
      double slope = std::log(ns[i + 1] / ns[i]) / std::log(ts[i + 1] / ts[i]);
      CHECK(slope > 1.9);
      CHECK(slope < 2.3);
    }
  }

  SECTION("Taylor match: finite differences reproduce series coefficients") {
    SphereFunctionD phidot = SphereFunctionD::zero(2, N);
    phidot.at(2, 2)[0] = {0.008, 0.004};
    EvolveOptions o2 = opts;
    o2.dt = 1e-3;
    o2.t_end = 0.02;
    o2.sample_every = 10;  // samples at 0, 0.01, 0.02
    auto traj = evolve_general(phidot, -1.0, N, t, o2);
    auto series = formal_series(to_float_any(phidot), 2, N, 1e-14);
    REQUIRE(traj.times.size() == 3);
    double h = traj.times[1];
    // second-order finite difference of phi extracts 2 phi^(2)
    SphereFunctionD dd = traj.phi[2] - traj.phi[1] * std::complex<double>(2.0, 0.0) + traj.phi[0];
    dd *= std::complex<double>(1.0 / (h * h), 0.0);
    SphereFunctionD expect = series.phi[2];
    expect *= std::complex<double>(2.0, 0.0);
    CHECK(l2_norm(dd - expect) < 20.0 * h * l2_norm(expect) + 1e-10);
    // f at t = 0 matches f^(0) + lambda
    SphereFunctionD f0 = series.f[0];
    f0.at(0, 0)[0] += -1.0;
    CHECK(l2_norm(traj.f[0] - f0) < 1e-9);
  }

  SECTION("energy decay at rate >= 3|lambda| with seeded P2 data") {
    SphereFunctionD phidot = SphereFunctionD::zero(2, N);
    SphereFunctionD psi0 = SphereFunctionD::zero(2, N);
    psi0.at(1, 1)[0] = {0.05, 0.02};  // q = 1 block, rate lambda (p - q + 4) = 4 lambda
    psi0.at(3, 0)[2] = {0.0, 0.03};   // q = 0 block, rate 7 lambda
    EvolveOptions o2 = opts;
    o2.initial_psi = psi0;
    o2.t_end = 0.1;
    o2.dt = 1e-3;
    double lambda = -2.0;
    auto traj = evolve_general(phidot, lambda, N, t, o2);
    for (size_t i = 1; i < traj.times.size(); ++i) {
      double tt = traj.times[i];
      double bound = l2_norm(psi0) * std::exp(3.0 * lambda * tt) * (1.0 + 1e-9);
      CHECK(l2_norm(traj.phi[i]) <= bound);  // phidot = 0, so phi == psi
    }
  }
}

TEST_CASE("exponential map") {
  const int N = 6;
  auto grid = QuadratureGrid::for_degree(4 * N + 4);
  SpectralTransform t(grid, N);
  EvolveOptions opts;
  opts.dt = 5e-3;

  SECTION("zero maps to zero") {
    auto out = exponential_map(SphereFunctionD::zero(2, N), -1.0, N, t, opts);
    CHECK(out.is_zero(1e-13));
  }

  SECTION("BE directions are fixed rays") {
    SphereFunctionD phidot = SphereFunctionD::zero(2, N);
    phidot.at(0, 4)[1] = {0.003, -0.001};
    auto out = exponential_map(phidot, -1.0, N, t, opts);
    CHECK(l2_norm(out - phidot) < 1e-9);
  }

  SECTION("derivative at zero is the identity") {
    SphereFunctionD dir = SphereFunctionD::zero(2, N);
    dir.at(2, 2)[2] = {0.5, 0.25};
    double eps = 1e-3;
    SphereFunctionD scaled = dir;
    scaled *= std::complex<double>(eps, 0.0);
    auto out = exponential_map(scaled, -1.0, N, t, opts);
    // (exp(eps v) - eps v)/eps -> 0
    SphereFunctionD diff = out - scaled;
    CHECK(l2_norm(diff) / eps < 20.0 * eps + 10.0 * opts.dt);
  }
}
