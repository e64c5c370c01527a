#pragma once

// Linearized slice decomposition of weight-2 deformation tensors:
//   D = D'_BE  +  i (Z1)^2 (real functions)  +  D_0-perp,
// a direct sum on the truncated space. Blocks with q in {0,1} form the
// perp part; blocks with 2 <= q <= p+3 are pure gauge and determine g below
// the diagonal; reality of g couples them to blocks strictly above the
// diagonal; critical-diagonal blocks (p, p+4) split against the reality
// condition Im((Z1bar)^2 phi) = 0 through a positive scalar solve.

#include <random>
#include <string>
#include <vector>

#include "crsphere/operators.hpp"

namespace crsphere {

template <class S>
struct SliceDecomposition {
  SphereFunction<S> be_prime;  // weight 2, in D'_BE
  SphereFunction<S> g;         // weight 0, real: conj(g) = g
  SphereFunction<S> perp;      // weight 2, blocks q in {0,1}
  double residual_norm = 0.0;  // reconstruction defect (exactly 0 in rational mode)
};

// i (Z1)^2 g for the gauge part.
template <class S>
SphereFunction<S> gauge_image(const SphereFunction<S>& g) {
  SphereFunction<S> out = apply_Z1(apply_Z1(g));
  out *= scalar_traits<S>::imag_unit();
  out.weight = 2;
  return out;
}

template <class S>
SliceDecomposition<S> slice_decompose(const SphereFunction<S>& phidot, double tol = 0.0) {
  using Traits = scalar_traits<S>;
  if (phidot.weight != 2) throw OperatorError("slice_decompose expects a weight-2 tensor");
  const int N = phidot.truncation;

  SliceDecomposition<S> out;
  out.perp = project(phidot, Region::QIn01);

  // gauge potential from the blocks strictly below the critical diagonal
  SphereFunction<S> g_low = SphereFunction<S>::zero(0, N);
  for (const auto& [pq, coeffs] : phidot.blocks) {
    auto [p, q] = pq;
    if (q < 2 || q > p + 3) continue;
    std::vector<S> gc(coeffs.size());
    S minus_i = -Traits::imag_unit();
    for (size_t a = 0; a < coeffs.size(); ++a) gc[a] = minus_i * coeffs[a];
    g_low.add_block(p + 2, q - 2, gc);
  }
  SphereFunction<S> g = g_low + conj_function(g_low);

  // critical diagonal: solve the real scalar system per block
  for (const auto& [pq, coeffs] : phidot.blocks) {
    auto [p, q] = pq;
    if (q != p + 4) continue;
    g.add_block(p + 2, p + 2, critical_diagonal_reality_g(p, coeffs));
  }
  g.prune(tol);
  out.g = g;

  SphereFunction<S> pi = gauge_image(g);
  out.be_prime = phidot - pi - out.perp;
  out.be_prime.prune(tol);
  out.perp.prune(tol);

  SphereFunction<S> recon = out.be_prime + pi + out.perp;
  out.residual_norm = l2_norm(recon - phidot);
  return out;
}

// Oblique projection onto i (Z1)^2 (real functions).
template <class S>
SphereFunction<S> oblique_Pi(const SphereFunction<S>& phidot, double tol = 0.0) {
  return gauge_image(slice_decompose(phidot, tol).g);
}

// Empirical FS-operator-norm of the oblique projection on the truncation,
// sampled over seeded random unit vectors (a lower bound by construction).
inline double oblique_Pi_norm_estimate(int N, int s, int samples = 64, unsigned seed = 1234) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  double best = 0.0;
  for (int trial = 0; trial < samples; ++trial) {
    SphereFunctionD u = SphereFunctionD::zero(2, N);
    std::uniform_int_distribution<int> deg(0, N);
    for (int b = 0; b < 6; ++b) {
      int d = deg(rng);
      std::uniform_int_distribution<int> pick(0, d);
      int p = pick(rng);
      auto& c = u.at(p, d - p);
      for (auto& x : c) x = {val(rng), val(rng)};
    }
    double nu = fs_norm(u, s);
    if (nu == 0.0) continue;
    best = std::max(best, fs_norm(oblique_Pi(u, 1e-14), s) / nu);
  }
  return best;
}

struct ConeReport {
  bool in_D0 = false;
  bool in_BE = false;
  bool in_BE_prime = false;
  bool in_CD = false;
  bool in_CD_prime = false;
  std::vector<BlockKey> offending_D0, offending_BE, offending_CD;
  // per critical-diagonal block: p and the L2 norm of Im((Z1bar)^2 phi_{p,p+4})
  std::vector<std::pair<int, double>> reality_defects;
};

template <class S>
ConeReport cone_report(const SphereFunction<S>& phi, double tol = 0.0) {
  if (phi.weight != 2) throw OperatorError("cone_report expects a weight-2 tensor");
  ConeReport r;
  auto nonzero = [&](const std::vector<S>& coeffs) {
    for (const auto& c : coeffs)
      if (!scalar_traits<S>::is_zero(c, tol)) return true;
    return false;
  };
  double defect_total = 0.0;
  for (const auto& [pq, coeffs] : phi.blocks) {
    auto [p, q] = pq;
    if (!nonzero(coeffs)) continue;
    if (!region_keeps(Region::QGe2, p, q)) r.offending_D0.push_back(pq);
    if (!region_keeps(Region::BE, p, q)) r.offending_BE.push_back(pq);
    if (!region_keeps(Region::CD, p, q)) r.offending_CD.push_back(pq);
    if (q == p + 4) {
      auto defect = critical_diagonal_defect(p, coeffs);
      double norm = std::sqrt(scalar_traits<S>::real_to_double(block_norm2(p + 2, p + 2, defect)));
      r.reality_defects.emplace_back(p, norm);
      defect_total += norm;
    }
  }
  r.in_D0 = r.offending_D0.empty();
  r.in_BE = r.offending_BE.empty();
  r.in_CD = r.offending_CD.empty();
  r.in_BE_prime = r.in_BE && defect_total <= tol;
  r.in_CD_prime = r.in_CD && defect_total <= tol;
  return r;
}

}  // namespace crsphere
