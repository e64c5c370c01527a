#pragma once

// The acceptance suite: eight property-based criteria with exact or
// toleranced checks, each reporting one pass/fail line. Tolerances and
// thresholds are pinned here; the exact criteria run in rational arithmetic
// with zero tolerance.

#include <chrono>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crsphere/flow.hpp"
#include "crsphere/slice.hpp"
#include "crsphere/tangency.hpp"

namespace crsphere {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace acceptance {

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << what;
    }
  }
  void note(const std::string& what) {
    if (detail.tellp() > 0) detail << "; ";
    detail << what;
  }
};

inline SphereFunctionQ seeded_tensor(std::mt19937& rng, int max_degree, int min_q, int blocks,
                                     int N, int denom) {
  std::uniform_int_distribution<int> val(-2, 2);
  SphereFunctionQ f = SphereFunctionQ::zero(2, N);
  for (int b = 0; b < blocks; ++b) {
    std::uniform_int_distribution<int> deg(min_q, max_degree);
    int d = deg(rng);
    std::uniform_int_distribution<int> qpick(min_q, d);
    int q = qpick(rng);
    auto& c = f.at(d - q, q);
    for (auto& x : c) x = RationalComplex(Rational(val(rng), denom), Rational(val(rng), denom));
  }
  f.prune();
  return f;
}

inline SphereFunctionQ seeded_be_tensor(std::mt19937& rng, int blocks, int N, int denom) {
  static const std::vector<BlockKey> cone = {{0, 4}, {0, 5}, {0, 6}, {1, 5}, {1, 6}};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(cone.size()) - 1);
  std::uniform_int_distribution<int> val(-2, 2);
  SphereFunctionQ f = SphereFunctionQ::zero(2, N);
  for (int b = 0; b < blocks; ++b) {
    auto [p, q] = cone[pick(rng)];
    auto& c = f.at(p, q);
    for (auto& x : c) x = RationalComplex(Rational(val(rng), denom), Rational(val(rng), denom));
  }
  f.prune();
  return f;
}

// 1. Spectral identity suite (exact, p+q <= 12): dimensions by the Laplacian
// null-space oracle, T eigenvalues, Z1 bijectivity, sublaplacian eigenvalues,
// kernel/image of (Z1)^2. Zero tolerance.
inline Check criterion1() {
  Check c;
  const int D = 12;
  for (int p = 0; p + 0 <= D; ++p)
    for (int q = 0; p + q <= D; ++q) {
      const auto& data = HarmonicTable::block(p, q);

      // dimension: count of basis elements, their exact independence
      // (diagonal Gram with positive entries), and the ambient null-space
      // dimension bound: dim ker(Delta) <= monomials - rank(images) is
      // certified by producing p+q+1 independent harmonic polynomials and
      // checking Delta annihilates them; the converse bound is the classical
      // decomposition P = sum r^{2k} H_k, exercised via harmonic_parts on
      // every monomial of the block's bidegree.
      c.require(static_cast<int>(data.basis.size()) == p + q + 1, "basis count");
      for (size_t a = 0; a < data.basis.size(); ++a) {
        c.require(data.basis[a].laplacian().empty(), "basis harmonicity");
        c.require(data.gram[a] > 0, "Gram positivity");
      }
      if (p + q <= 6) {
        // exhaustive null-space oracle on the monomial space (small blocks)
        int monomials = (p + 1) * (q + 1);
        int harmonic = 0;
        for (int a = 0; a <= p; ++a)
          for (int b = 0; b <= q; ++b) {
            PolyQ mono = PolyQ::monomial({a, b, p - a, q - b}, RationalComplex(1));
            auto parts = harmonic_parts_bihomogeneous(mono);
            (void)parts;
          }
        // rank of Delta on monomials equals monomials - (p+q+1)
        std::vector<PolyQ> images;
        std::map<Monomial, int> index;
        for (int a = 0; a <= p; ++a)
          for (int b = 0; b <= q; ++b) {
            PolyQ mono = PolyQ::monomial({a, b, p - a, q - b}, RationalComplex(1));
            images.push_back(mono.laplacian());
            for (const auto& [m, coef] : images.back().terms())
              index.emplace(m, static_cast<int>(index.size()));
          }
        std::vector<std::vector<Rational>> cols(images.size(),
                                                std::vector<Rational>(index.size(), 0));
        for (size_t i = 0; i < images.size(); ++i)
          for (const auto& [m, coef] : images[i].terms()) cols[i][index.at(m)] = coef.re;
        int rank = 0;
        {
          auto m = cols;
          size_t row = 0;
          for (size_t col = 0; col < index.size() && row < m.size(); ++col) {
            size_t pivot = row;
            while (pivot < m.size() && m[pivot][col] == 0) ++pivot;
            if (pivot == m.size()) continue;
            std::swap(m[pivot], m[row]);
            for (size_t r = 0; r < m.size(); ++r) {
              if (r == row || m[r][col] == 0) continue;
              Rational f = m[r][col] / m[row][col];
              for (size_t cc = col; cc < index.size(); ++cc) m[r][cc] -= f * m[row][cc];
            }
            ++row;
            ++rank;
          }
        }
        harmonic = monomials - rank;
        c.require(harmonic == p + q + 1, "null-space dimension at (" + std::to_string(p) + "," +
                                             std::to_string(q) + ")");
      }

      for (size_t a = 0; a < data.basis.size(); ++a) {
        const PolyQ& e = data.basis[a];
        // T eigenvalue i(p-q), symbolically
        c.require(e.field_T() == e * (RationalComplex::i() * RationalComplex(p - q)),
                  "T eigenvalue");
        // Z1 bijectivity for p >= 1 (nonzero orthogonal images), zero on p = 0
        PolyQ z1e = e.field_Z1();
        if (p == 0)
          c.require(z1e.empty(), "Z1 vanishing on H_{0,q}");
        else
          c.require(!(z1e.inner(z1e) == RationalComplex(0)), "Z1 image nonzero");
        // sublaplacian eigenvalue 2pq + p + q, symbolically
        PolyQ sub = -(e.field_Z1bar().field_Z1() + e.field_Z1().field_Z1bar());
        c.require(sub == e * RationalComplex(sublaplacian_eigenvalue(p, q)),
                  "sublaplacian eigenvalue");
        // kernel of (Z1)^2 is exactly p in {0,1}
        PolyQ z2e = z1e.field_Z1();
        c.require(z2e.empty() == (p <= 1), "(Z1)^2 kernel");
      }
      if (p >= 1) {
        // orthogonality of the images certifies bijectivity blockwise
        for (size_t a = 0; a < data.basis.size(); ++a)
          for (size_t b = a + 1; b < data.basis.size(); ++b)
            c.require(data.basis[a].field_Z1().inner(data.basis[b].field_Z1()) ==
                          RationalComplex(0),
                      "Z1 image orthogonality");
      }
      // image of (Z1)^2 is exactly q >= 2: exact solve round trip
      if (q >= 2 && p + q <= 10) {
        for (int a = 0; a <= p + q; ++a) {
          auto g = SphereFunctionQ::basis_element(p, q, a, RationalComplex(1), 0, D);
          auto u = solve_Z1_squared(g);
          c.require(equal_up_to_zero_blocks(apply_Z1(apply_Z1(u)), g), "(Z1)^2 solve round trip");
          c.require(project(u, Region::PIn01).is_zero(), "solution orthogonality");
        }
      }
    }
  return c;
}

// 2. Tangency residual (exact): 20 seeded phidot in D_0 with support p+q <= 6,
// formal_series to K = 5, polynomial residual exactly zero through t^5, and
// exact f-orthogonality.
inline Check criterion2() {
  Check c;
  const int N = 10, K = 5;
  std::mt19937 rng(20240502);
  for (int trial = 0; trial < 20 && c.pass; ++trial) {
    auto phidot = seeded_tensor(rng, 6, 2, 3, N, 16);
    auto series = formal_series(phidot, K, N);
    for (const auto& fk : series.f)
      c.require(project(fk, Region::PIn01).is_zero(),
                "f orthogonality, fixture " + std::to_string(trial));
    auto residuals = tangency_residual_series(series);
    for (int k = 0; k <= K; ++k)
      c.require(residuals[k].is_zero(), "residual order " + std::to_string(k) + ", fixture " +
                                            std::to_string(trial));
  }
  return c;
}

// 3. Burns-Epstein invariance (exact): phi^{(k)} = 0 for k >= 2 and f~^{(k)}
// supported in the image of (Z1bar)^2 D_BE (p >= 2, q >= p).
inline Check criterion3_impl(std::vector<SphereFunctionQ>& fixtures,
                             std::vector<TangencySeries<RationalComplex>>& series_out) {
  Check c;
  const int N = 12, K = 10;
  std::mt19937 rng(20240503);
  for (int trial = 0; trial < 20; ++trial) {
    auto phidot = seeded_be_tensor(rng, 2, N, 64);
    fixtures.push_back(phidot);
    auto general = formal_series(phidot, K, N);
    for (int k = 2; k < static_cast<int>(general.phi.size()); ++k)
      c.require(general.phi[k].is_zero(),
                "phi^(" + std::to_string(k) + ") nonzero, fixture " + std::to_string(trial));
    for (const auto& fk : general.f) {
      for (const auto& [pq, coeffs] : fk.blocks) {
        bool zero = true;
        for (const auto& x : coeffs)
          if (!(x == RationalComplex(0))) zero = false;
        if (!zero)
          c.require(pq.first >= 2 && pq.second >= pq.first,
                    "f support outside (Z1bar)^2 D_BE, fixture " + std::to_string(trial));
      }
    }
    series_out.push_back(std::move(general));
    if (!c.pass) break;
  }
  return c;
}

// 4. Norm-growth bound with the empirical solver constant: for k <= 10,
// ||f^(k)||_10 <= (C_s ||phidot||_10)^{k+1}; failures are allowed only when
// the defining recursion estimate for C is itself violated by the data, and
// the defining inequality of C_s is always asserted.
inline Check criterion4(const std::vector<SphereFunctionQ>& fixtures,
                        const std::vector<TangencySeries<RationalComplex>>& series) {
  Check c;
  const int N = 12, s = 10;
  for (size_t i = 0; i < fixtures.size(); ++i) {
    auto est = radius_estimate(fixtures[i], s, N);
    c.require(est.Cs * est.Cs > est.C * (5.0 * est.Cs + 1.0),
              "series constant inequality, fixture " + std::to_string(i));
    const auto& norms = series[i].fs_norms;
    double n = est.norm_s;
    for (size_t k = 0; k < norms.size(); ++k) {
      double bound = std::pow(est.Cs * n, k + 1);
      if (norms[k] <= bound * (1.0 + 1e-12)) continue;
      // allowed only if the empirical C violated its defining estimate here
      double recursion = 0.0;
      if (k == 0)
        recursion = est.C * n;
      else if (k == 1)
        recursion = est.C * 5.0 * n * norms[0];
      else
        recursion = est.C * (5.0 * n * norms[k - 1] + n * n * norms[k - 2]);
      bool c_violated = norms[k] > recursion * (1.0 + 1e-12);
      c.require(c_violated, "norm bound failed at k = " + std::to_string(k) + " without a C" +
                                " violation, fixture " + std::to_string(i));
      if (c_violated)
        c.note("C violated at k = " + std::to_string(k) + ", fixture " + std::to_string(i) +
               " (allowed)");
    }
  }
  return c;
}

// 5. Strict-sign certificate: lambda = -1, fixtures scaled to the smallness
// radius_estimate prescribes for R > 2; min_t min_grid |Re f_t| > 0 with one
// sign on [0, 1].
inline Check criterion5(const std::vector<SphereFunctionQ>& fixtures) {
  Check c;
  const int N = 12, s = 10;
  auto grid = QuadratureGrid::for_degree(2 * N + 4);
  SpectralTransform tr(grid, N);
  double worst_min = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < fixtures.size(); ++i) {
    auto est = radius_estimate(fixtures[i], s, N);
    if (est.norm_s == 0.0) continue;
    double eps = 1.0 / (2.0 * est.Cs);  // targets radius > 2
    double scale = 0.9 * eps / est.norm_s;
    SphereFunctionD phidot = to_float(fixtures[i]);
    phidot *= std::complex<double>(scale, 0.0);
    auto series = be_series(phidot, -1.0, 30, N, 1e-15);
    certify_sign(series, tr, 1.0, 21, 0.0);
    c.require(series.sign_certified && series.sign == -1,
              "sign certificate failed, fixture " + std::to_string(i));
    worst_min = std::min(worst_min, series.sign_min);
    if (!c.pass) break;
  }
  std::ostringstream os;
  os << "min |Re f| over fixtures = " << worst_min;
  c.note(os.str());
  return c;
}

// 6. Cross-solver agreement at N = 12, dt = 1e-3, plus psi = O(t^2).
inline Check criterion6() {
  Check c;
  const int N = 12;
  auto grid = QuadratureGrid::for_degree(4 * N + 4);
  SpectralTransform tr(grid, N);

  // BE input: L2-normalized middle basis element of H_{0,4}, amplitude 0.01
  const auto& h04 = HarmonicTable::block(0, 4);
  SphereFunctionD phidot = SphereFunctionD::zero(2, N);
  phidot.at(0, 4)[2] = 0.01 / std::sqrt(h04.gram_d[2]);

  EvolveOptions opts;
  opts.dt = 1e-3;
  opts.t_end = 1.0;
  opts.sample_every = 100;
  auto traj = evolve_general(phidot, -1.0, N, tr, opts);
  auto series = be_series(phidot, -1.0, 14, N, 1e-15);

  double worst_phi = 0.0, worst_f = 0.0;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    double t = traj.times[i];
    SphereFunctionD ray = phidot;
    ray *= std::complex<double>(t, 0.0);
    worst_phi = std::max(worst_phi, l2_norm(traj.phi[i] - ray));
    SphereFunctionD fs = SphereFunctionD::zero(0, N);
    double tp = 1.0;
    for (int k = 0; k <= series.K; ++k) {
      SphereFunctionD term = series.f[k];
      term *= std::complex<double>(tp, 0.0);
      fs += term;
      tp *= t;
    }
    fs.at(0, 0)[0] += -1.0;
    worst_f = std::max(worst_f, l2_norm(traj.f[i] - fs));
  }
  {
    std::ostringstream os;
    os << "max ||phi - t phidot|| = " << worst_phi << ", max ||f diff|| = " << worst_f;
    c.note(os.str());
  }
  c.require(worst_phi <= 1e-8, "phi ray deviation exceeds 1e-8");
  c.require(worst_f <= 1e-6, "f mismatch exceeds 1e-6");

  // psi = O(t^2): log-log slope >= 1.9 on t in [1e-3, 1e-1] for H_{2,2} input
  const auto& h22 = HarmonicTable::block(2, 2);
  SphereFunctionD phidot2 = SphereFunctionD::zero(2, N);
  phidot2.at(2, 2)[2] = 0.01 / std::sqrt(h22.gram_d[2]);
  EvolveOptions o2;
  o2.dt = 1e-3;
  o2.t_end = 0.1;
  o2.sample_every = 1;
  auto traj2 = evolve_general(phidot2, -1.0, N, tr, o2);
  std::vector<double> lx, ly;
  for (size_t i = 0; i < traj2.times.size(); ++i) {
    double t = traj2.times[i];
    if (t < 1e-3 - 1e-12 || t > 0.1 + 1e-12) continue;
    SphereFunctionD ray = phidot2;
    ray *= std::complex<double>(t, 0.0);
    double n = l2_norm(traj2.phi[i] - ray);
    if (n > 0) {
      lx.push_back(std::log(t));
      ly.push_back(std::log(n));
    }
  }
  double slope = 0.0;
  {
    double mx = 0, my = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= lx.size();
    my /= ly.size();
    double num = 0, den = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
      num += (lx[i] - mx) * (ly[i] - my);
      den += (lx[i] - mx) * (lx[i] - mx);
    }
    slope = num / den;
  }
  {
    std::ostringstream os;
    os << "psi log-log slope = " << slope;
    c.note(os.str());
  }
  c.require(slope >= 1.9, "psi slope below 1.9");
  return c;
}

// 7. Embedding certification: the H_{0,4} benchmark at N = 12, dt = 1e-3;
// t = 0 velocity against the variational-field oracle to 1e-10, final CR
// residual <= 1e-6, refinement (dt/2, N+4) improves by >= 4x.
inline Check criterion7() {
  Check c;
  auto run = [&](int N, double dt) {
    auto grid = QuadratureGrid::for_degree(2 * N + 4);
    SpectralTransform tr(grid, N);
    const auto& h04 = HarmonicTable::block(0, 4);
    SphereFunctionD phidot = SphereFunctionD::zero(2, N);
    phidot.at(0, 4)[2] = 0.01 / std::sqrt(h04.gram_d[2]);
    auto series = be_series(phidot, -1.0, 14, N, 1e-15);
    certify_sign(series, tr, 1.0, 21, 0.0);
    FlowSource src = FlowSource::from_series(series);

    if (N == 12) {
      auto state = identity_state(N);
      auto vel = flow_velocity(state, src.f(0.0), src.phi(0.0), tr);
      auto got1 = tr.evaluate(vel[0]);
      auto got2 = tr.evaluate(vel[1]);
      auto oracle = velocity_oracle_t0(src.f(0.0), grid, tr);
      double worst = 0.0;
      for (size_t i = 0; i < got1.size(); ++i) {
        worst = std::max(worst, std::abs(got1[i] - oracle[0][i]));
        worst = std::max(worst, std::abs(got2[i] - oracle[1][i]));
      }
      std::ostringstream os;
      os << "t=0 velocity oracle gap = " << worst;
      c.note(os.str());
      c.require(worst <= 1e-10, "t = 0 velocity oracle mismatch");
    }

    FlowOptions opts;
    opts.dt = dt;
    opts.t_end = 1.0;
    opts.sample_every = 100;
    auto result = integrate(src, N, tr, opts);
    return result.samples.back().cr_residual;
  };
  double base = run(12, 1e-3);
  {
    std::ostringstream os;
    os << "final cr_residual = " << base;
    c.note(os.str());
  }
  c.require(base <= 1e-6, "final CR residual exceeds 1e-6");
  double fine = run(16, 5e-4);
  {
    std::ostringstream os;
    os << "refined cr_residual = " << fine << " (factor " << base / fine << ")";
    c.note(os.str());
  }
  c.require(fine * 4.0 <= base, "refinement gained less than 4x");
  return c;
}

// 8. Slice round trip (exact): 50 seeded phidot with p+q <= 10: exact
// reconstruction, idempotent components, zero reality defect of be_prime.
inline Check criterion8() {
  Check c;
  const int N = 10;
  std::mt19937 rng(20240508);
  for (int trial = 0; trial < 50 && c.pass; ++trial) {
    auto phidot = seeded_tensor(rng, N, 0, 5, N, 8);
    auto d = slice_decompose(phidot);
    auto recon = d.be_prime + gauge_image(d.g) + d.perp;
    c.require(equal_up_to_zero_blocks(recon, phidot),
              "reconstruction, fixture " + std::to_string(trial));
    c.require(equal_up_to_zero_blocks(d.g, conj_function(d.g)),
              "g reality, fixture " + std::to_string(trial));
    // BE-prime reality defect of be_prime is exactly zero
    for (const auto& [pq, coeffs] : d.be_prime.blocks) {
      auto [p, q] = pq;
      c.require(q >= p + 4 || SphereFunctionQ{0, 0, false, {{pq, coeffs}}}.is_zero(),
                "be_prime support, fixture " + std::to_string(trial));
      if (q == p + 4)
        for (const auto& x : critical_diagonal_defect(p, coeffs))
          c.require(x == RationalComplex(0), "reality defect, fixture " + std::to_string(trial));
    }
    // idempotence of the three components
    auto d_be = slice_decompose(d.be_prime);
    c.require(equal_up_to_zero_blocks(d_be.be_prime, d.be_prime) && d_be.g.is_zero() &&
                  d_be.perp.is_zero(),
              "be_prime idempotence, fixture " + std::to_string(trial));
    auto pi = gauge_image(d.g);
    auto d_pi = slice_decompose(pi);
    c.require(d_pi.be_prime.is_zero() && d_pi.perp.is_zero() &&
                  equal_up_to_zero_blocks(gauge_image(d_pi.g), pi),
              "gauge idempotence, fixture " + std::to_string(trial));
    auto d_perp = slice_decompose(d.perp);
    c.require(equal_up_to_zero_blocks(d_perp.perp, d.perp) && d_perp.g.is_zero() &&
                  d_perp.be_prime.is_zero(),
              "perp idempotence, fixture " + std::to_string(trial));
  }
  return c;
}

}  // namespace acceptance

inline std::vector<CriterionResult> run_acceptance(std::ostream* progress = nullptr) {
  using Clock = std::chrono::steady_clock;
  std::vector<CriterionResult> results;
  std::vector<SphereFunctionQ> be_fixtures;
  std::vector<TangencySeries<RationalComplex>> be_series_list;

  auto run = [&](int index, const std::string& name,
                 const std::function<acceptance::Check()>& fn) {
    auto start = Clock::now();
    acceptance::Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.pass = false;
      c.note(std::string("exception: ") + e.what());
    }
    CriterionResult r;
    r.index = index;
    r.name = name;
    r.pass = c.pass;
    r.detail = c.detail.str();
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (progress) {
      (*progress) << (r.pass ? "PASS" : "FAIL") << " criterion " << r.index << ": " << r.name
                  << " (" << r.seconds << " s)";
      if (!r.detail.empty()) (*progress) << " -- " << r.detail;
      (*progress) << "\n" << std::flush;
    }
    results.push_back(std::move(r));
  };

  run(1, "spectral identities (exact, p+q <= 12)", acceptance::criterion1);
  run(2, "tangency residual vanishes exactly (K = 5)", acceptance::criterion2);
  run(3, "Burns-Epstein invariance (exact)", [&] {
    return acceptance::criterion3_impl(be_fixtures, be_series_list);
  });
  run(4, "norm-growth bound with empirical constant", [&] {
    return acceptance::criterion4(be_fixtures, be_series_list);
  });
  run(5, "strict-sign certificate (lambda = -1)", [&] {
    return acceptance::criterion5(be_fixtures);
  });
  run(6, "cross-solver agreement and psi = O(t^2)", acceptance::criterion6);
  run(7, "embedding certification benchmark", acceptance::criterion7);
  run(8, "slice round trip (exact)", acceptance::criterion8);
  return results;
}

}  // namespace crsphere
