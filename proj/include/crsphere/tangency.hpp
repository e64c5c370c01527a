#pragma once

// Solvers for the tangency equation on S^3: the second-order operator L_phi,
// the formal power-series recursion, the Burns-Epstein lambda-series with its
// strict-sign certificate, convergence-radius estimates, and the parabolic
// solver for general infinitesimally embeddable data (split elliptic /
// stiff-diagonal system with an exponential integrator).

#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crsphere/operators.hpp"

namespace crsphere {

struct NotInfinitesimallyEmbeddable : OperatorError {
  using OperatorError::OperatorError;
};
struct NotBurnsEpstein : OperatorError {
  using OperatorError::OperatorError;
};
struct FixedPointDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepRejected : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SignLost : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// L_phi f = phi (D1 Dbar + Dbar D1) f + phi^2 Dbar^2 f + (D1 phi) Dbar f
//           - (Dbar phi) D1 f - i (D0 phi) f.
template <class S>
SphereFunction<S> apply_L(const SphereFunction<S>& phi, const SphereFunction<S>& f, int N,
                          double tol = 0.0) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> result = multiply(phi, apply_Z1_Z1bar_sym(f), N, tol);
  result += multiply(multiply(phi, phi, N, tol), apply_Z1bar(apply_Z1bar(f)), N, tol);
  result += multiply(apply_Z1(phi), apply_Z1bar(f), N, tol);
  result -= multiply(apply_Z1bar(phi), apply_Z1(f), N, tol);
  result -= multiply(apply_nabla0(phi), f, N, tol) * Traits::imag_unit();
  return result;
}

// Cache of derived series data used when assembling sum_j L^{(j)} f^{(k-j)}.
template <class S>
struct LSumCache {
  std::vector<SphereFunction<S>> dsym_f, d2b_f, z1_f, z1b_f;
  std::vector<SphereFunction<S>> z1_phi, z1b_phi, n0_phi;
  std::map<std::pair<int, int>, SphereFunction<S>> phi_pair;

  void extend_f(const std::vector<SphereFunction<S>>& f) {
    for (size_t k = dsym_f.size(); k < f.size(); ++k) {
      dsym_f.push_back(apply_Z1_Z1bar_sym(f[k]));
      d2b_f.push_back(apply_Z1bar(apply_Z1bar(f[k])));
      z1_f.push_back(apply_Z1(f[k]));
      z1b_f.push_back(apply_Z1bar(f[k]));
    }
  }
  void extend_phi(const std::vector<SphereFunction<S>>& phi) {
    for (size_t j = z1_phi.size(); j < phi.size(); ++j) {
      z1_phi.push_back(apply_Z1(phi[j]));
      z1b_phi.push_back(apply_Z1bar(phi[j]));
      n0_phi.push_back(apply_nabla0(phi[j]));
    }
  }
  const SphereFunction<S>& pair(const std::vector<SphereFunction<S>>& phi, int j, int l, int N,
                                double tol) {
    if (j > l) std::swap(j, l);
    auto key = std::pair{j, l};
    auto it = phi_pair.find(key);
    if (it == phi_pair.end())
      it = phi_pair.emplace(key, multiply(phi[j], phi[l], N, tol)).first;
    return it->second;
  }

  // sum over j + l = r of phi^{(j)} phi^{(l)}, cached per r
  const SphereFunction<S>& pair_sum(const std::vector<SphereFunction<S>>& phi, int r, int N,
                                    double tol) {
    auto it = phi_pair_sum.find(r);
    if (it == phi_pair_sum.end()) {
      SphereFunction<S> total = SphereFunction<S>::zero(4, N);
      for (int j = 1; j < r; ++j) {
        int l = r - j;
        if (j >= static_cast<int>(phi.size()) || l >= static_cast<int>(phi.size())) continue;
        total += pair(phi, j, l, N, tol);
      }
      it = phi_pair_sum.emplace(r, std::move(total)).first;
    }
    return it->second;
  }

  std::map<int, SphereFunction<S>> phi_pair_sum;
};

// sum_{j=1}^{k} L^{(j)} f^{(k-j)} for series phi (index j >= 1; phi[0] unused)
// and f (index from 0). Out-of-range coefficients are zero.
template <class S>
SphereFunction<S> series_L_sum(const std::vector<SphereFunction<S>>& phi,
                               const std::vector<SphereFunction<S>>& f, int k, int N, double tol,
                               LSumCache<S>& cache) {
  using Traits = scalar_traits<S>;
  cache.extend_f(f);
  cache.extend_phi(phi);
  int weight = 2;
  SphereFunction<S> total = SphereFunction<S>::zero(weight, N);
  for (int j = 1; j <= k; ++j) {
    int m = k - j;
    if (j >= static_cast<int>(phi.size()) || m >= static_cast<int>(f.size())) continue;
    total += multiply(phi[j], cache.dsym_f[m], N, tol);
    total += multiply(cache.z1_phi[j], cache.z1b_f[m], N, tol);
    total -= multiply(cache.z1b_phi[j], cache.z1_f[m], N, tol);
    total -= multiply(cache.n0_phi[j], f[m], N, tol) * Traits::imag_unit();
  }
  for (int r = 2; r <= k; ++r) {
    int m = k - r;
    if (m >= static_cast<int>(f.size())) continue;
    const auto& pr = cache.pair_sum(phi, r, N, tol);
    if (!pr.blocks.empty()) total += multiply(pr, cache.d2b_f[m], N, tol);
  }
  return total;
}

// Coefficient lists of the formal solution. f stores f-tilde (lambda is kept
// separately and belongs to the (0,0) block of the order-0 coefficient);
// phi[k] is the t^k deformation coefficient, phi[0] unused.
template <class S>
struct TangencySeries {
  using R = typename scalar_traits<S>::real_type;

  int K = 0;
  int truncation = 0;
  R lambda = scalar_traits<S>::real_zero();
  std::vector<SphereFunction<S>> f;    // 0..K
  std::vector<SphereFunction<S>> phi;  // 1..K+1 ([0] zero placeholder)
  std::vector<double> fs_norms;        // ||f[k]||_s
  int norm_order = 10;
  double radius = std::numeric_limits<double>::infinity();
  double solver_constant = 0.0;  // C
  double series_constant = 0.0;  // C_s
  double sign_min = 0.0;         // min_t min_grid |Re(lambda + f_t)|
  int sign = 0;                  // +1 / -1 when certified, 0 otherwise
  bool sign_certified = false;

  // full order-k potential coefficient (lambda folded into k = 0)
  SphereFunction<S> f_total(int k) const {
    SphereFunction<S> out = f[k];
    if (k == 0) {
      auto& blk = out.at(0, 0);
      blk[0] += scalar_traits<S>::from_real(lambda);
    }
    return out;
  }

  std::vector<SphereFunction<S>> f_total_list() const {
    std::vector<SphereFunction<S>> out;
    out.reserve(f.size());
    for (int k = 0; k < static_cast<int>(f.size()); ++k) out.push_back(f_total(k));
    return out;
  }
};

namespace detail {

template <class S>
void require_weight2(const SphereFunction<S>& phidot, const char* who) {
  if (phidot.weight != 2) throw OperatorError(std::string(who) + ": expected a weight-2 tensor");
}

template <class S>
std::vector<BlockKey> offending_blocks(const SphereFunction<S>& u, Region region, double tol) {
  std::vector<BlockKey> bad;
  for (const auto& [pq, coeffs] : u.blocks) {
    if (region_keeps(region, pq.first, pq.second)) continue;
    for (const auto& c : coeffs)
      if (!scalar_traits<S>::is_zero(c, tol)) {
        bad.push_back(pq);
        break;
      }
  }
  return bad;
}

inline std::string block_list(const std::vector<BlockKey>& blocks) {
  std::string s;
  for (auto [p, q] : blocks)
    s += "(" + std::to_string(p) + "," + std::to_string(q) + ") ";
  return s;
}

}  // namespace detail

// The recursion of the formal solution: f^{(0)} solves (D1)^2 f = phidot; at
// each order the L-sum splits into A_k (q >= 2, absorbed by f^{(k)}) and B_k
// (q in {0,1}, absorbed by phi^{(k+1)} = B_k / (k+1)).
template <class S>
TangencySeries<S> formal_series(const SphereFunction<S>& phidot, int K, int N, double tol = 0.0) {
  using Traits = scalar_traits<S>;
  detail::require_weight2(phidot, "formal_series");
  auto bad = detail::offending_blocks(phidot, Region::QGe2, tol);
  if (!bad.empty())
    throw NotInfinitesimallyEmbeddable(
        "formal_series: phidot has components outside the image of (Z1)^2 in blocks " +
        detail::block_list(bad));

  TangencySeries<S> series;
  series.K = K;
  series.truncation = N;
  series.phi.assign(2, SphereFunction<S>::zero(2, N));
  series.phi[1] = project(phidot, Region::QGe2);
  series.phi[1].prune(tol);
  series.f.push_back(solve_Z1_squared(series.phi[1], tol));

  LSumCache<S> cache;
  for (int k = 1; k <= K; ++k) {
    SphereFunction<S> sum = series_L_sum(series.phi, series.f, k, N, tol, cache);
    SphereFunction<S> a = project(sum, Region::QGe2);
    SphereFunction<S> b = project(sum, Region::QIn01);
    series.f.push_back(solve_Z1_squared(-a, tol));
    b *= Traits::one() / Traits::from_int(k + 1);
    b.prune(tol);
    series.phi.push_back(std::move(b));
  }
  for (auto& fk : series.f) {
    fk.prune(tol);
    series.fs_norms.push_back(fs_norm(fk, series.norm_order));
  }
  return series;
}

// Empirical solver constant: the operator norm of solve_Z1_squared from
// FS^{s-2} to FS^{s} on the truncated space (the two-derivative gain of the
// exact block inversion), in closed form over the diagonal Gram.
inline double solver_constant(int s, int N) {
  double best = 0.0;
  for (int p = 0; p <= N; ++p)
    for (int q = 2; p + q <= N; ++q) {
      const auto& src = HarmonicTable::block(p, q);
      const auto& dst = HarmonicTable::block(p + 2, q - 2);
      double wsrc = 1.0 + sublaplacian_eigenvalue(p, q);
      double wdst = 1.0 + sublaplacian_eigenvalue(p + 2, q - 2);
      for (int a = 0; a <= p + q; ++a) {
        double ratio = std::pow(wdst, s) * dst.gram_d[a] /
                       (std::pow(wsrc, s - 2) * src.gram_d[a]);
        best = std::max(best, ratio);
      }
    }
  return std::sqrt(best);
}

struct RadiusEstimate {
  double C = 0.0;       // solver constant
  double Cs = 0.0;      // series constant with Cs^2 > C (5 Cs + 1)
  double radius = std::numeric_limits<double>::infinity();
  double norm_s = 0.0;  // ||phidot||_s
};

template <class S>
RadiusEstimate radius_estimate(const SphereFunction<S>& phidot, int s, int N) {
  RadiusEstimate r;
  r.C = solver_constant(s, N);
  r.Cs = 0.5 * (5.0 * r.C + std::sqrt(25.0 * r.C * r.C + 4.0 * r.C)) * (1.0 + 1e-9);
  if (!(r.Cs * r.Cs > r.C * (5.0 * r.Cs + 1.0)))
    throw std::logic_error("series constant fails its defining inequality");
  r.norm_s = fs_norm(phidot, s);
  if (r.norm_s > 0.0) r.radius = 1.0 / (r.Cs * r.norm_s);
  return r;
}

// Burns-Epstein analytic series: phi(t) = t phidot with phidot in D_BE, and
// f_t = lambda + sum f~^{(k)} t^k solving
//   (D1)^2 f~ + L_{t phidot} f~ = phidot + i t lambda D0 phidot.
// Every right-hand side must stay in the image of (Z1)^2; a violation means
// the input was not Burns-Epstein.
template <class S>
TangencySeries<S> be_series(const SphereFunction<S>& phidot,
                            typename scalar_traits<S>::real_type lambda, int K, int N,
                            double tol = 0.0) {
  using Traits = scalar_traits<S>;
  detail::require_weight2(phidot, "be_series");
  auto bad = detail::offending_blocks(phidot, Region::BE, tol);
  if (!bad.empty())
    throw NotBurnsEpstein("be_series: phidot has components below the diagonal in blocks " +
                          detail::block_list(bad));

  TangencySeries<S> series;
  series.K = K;
  series.truncation = N;
  series.lambda = lambda;
  series.phi.assign(2, SphereFunction<S>::zero(2, N));
  series.phi[1] = project(phidot, Region::BE);
  series.phi[1].prune(tol);
  series.f.push_back(solve_Z1_squared(series.phi[1], tol));

  LSumCache<S> cache;
  for (int k = 1; k <= K; ++k) {
    SphereFunction<S> rhs = -series_L_sum(series.phi, series.f, k, N, tol, cache);
    if (k == 1) {
      SphereFunction<S> drift = apply_nabla0(series.phi[1]);
      drift *= Traits::imag_unit() * Traits::from_real(lambda);
      rhs += drift;
    }
    auto stray = detail::offending_blocks(rhs, Region::QGe2, tol);
    if (!stray.empty())
      throw NotBurnsEpstein("be_series: order " + std::to_string(k) +
                            " right-hand side left the cone in blocks " +
                            detail::block_list(stray));
    rhs = project(rhs, Region::QGe2);
    series.f.push_back(solve_Z1_squared(rhs, tol));
    series.phi.push_back(SphereFunction<S>::zero(2, N));  // phi^{(k+1)} = 0 in the cone
  }
  for (auto& fk : series.f) {
    fk.prune(tol);
    series.fs_norms.push_back(fs_norm(fk, series.norm_order));
  }
  return series;
}

// Exact coefficient residual of the tangency equation in its polynomial form:
// R_k = (D1)^2 f^{(k)} + sum_j L^{(j)} f^{(k-j)} - (k+1) phi^{(k+1)},
// evaluated on the full potential (lambda folded into order zero).
template <class S>
std::vector<SphereFunction<S>> tangency_residual_series(const TangencySeries<S>& series,
                                                        double tol = 0.0) {
  using Traits = scalar_traits<S>;
  const int N = series.truncation;
  auto f = series.f_total_list();
  LSumCache<S> cache;
  std::vector<SphereFunction<S>> residuals;
  for (int k = 0; k <= series.K; ++k) {
    SphereFunction<S> r = apply_Z1(apply_Z1(f[k]));
    r += series_L_sum(series.phi, f, k, N, tol, cache);
    if (k + 1 < static_cast<int>(series.phi.size())) {
      SphereFunction<S> drift = series.phi[k + 1];
      drift *= Traits::from_int(k + 1);
      r -= drift;
    }
    r.prune(tol);
    residuals.push_back(std::move(r));
  }
  return residuals;
}

// ------------------------------------------------------------------
// Grid-side evaluation helpers (float path).

// Values of phi-derived quantities reused across evaluations at one time.
struct PhiGridValues {
  std::vector<std::complex<double>> phi, phi2, z1, z1b, n0;
  double sup_abs = 0.0;

  static PhiGridValues make(const SphereFunctionD& phi_fn, const SpectralTransform& t) {
    PhiGridValues v;
    v.phi = t.evaluate(phi_fn);
    v.z1 = t.evaluate(apply_Z1(phi_fn));
    v.z1b = t.evaluate(apply_Z1bar(phi_fn));
    v.n0 = t.evaluate(apply_nabla0(phi_fn));
    v.phi2.resize(v.phi.size());
    for (size_t i = 0; i < v.phi.size(); ++i) {
      v.phi2[i] = v.phi[i] * v.phi[i];
      v.sup_abs = std::max(v.sup_abs, std::abs(v.phi[i]));
    }
    return v;
  }
};

// Pseudospectral L_phi f: derivatives in coefficient space, products on the
// grid, result projected back to degree N (exact for polynomial data when the
// grid integrates degree 4N).
inline SphereFunctionD apply_L_grid(const PhiGridValues& pv, const SphereFunctionD& f,
                                    const SpectralTransform& t) {
  const std::complex<double> I(0.0, 1.0);
  auto dsym = t.evaluate(apply_Z1_Z1bar_sym(f));
  auto d2b = t.evaluate(apply_Z1bar(apply_Z1bar(f)));
  auto z1f = t.evaluate(apply_Z1(f));
  auto z1bf = t.evaluate(apply_Z1bar(f));
  auto fv = t.evaluate(f);
  std::vector<std::complex<double>> vals(fv.size());
  for (size_t i = 0; i < fv.size(); ++i)
    vals[i] = pv.phi[i] * dsym[i] + pv.phi2[i] * d2b[i] + pv.z1[i] * z1bf[i] -
              pv.z1b[i] * z1f[i] - I * pv.n0[i] * fv[i];
  return t.project(vals, 2 + f.weight);
}

// Pointwise tangency residual in pseudohermitian form on the grid:
//   D^t_1 D^t_1 f + i A_11(t) f - phidot / (1 - |phi|^2).
inline std::vector<std::complex<double>> tangency_residual_grid(
    const SphereFunctionD& phi, const SphereFunctionD& phidot, const SphereFunctionD& f,
    const SpectralTransform& t, double margin = 1e-6) {
  const std::complex<double> I(0.0, 1.0);
  auto dd = deformed_data(phi, t, margin);
  auto phi_v = t.evaluate(phi);
  auto phidot_v = t.evaluate(phidot);
  auto z1f = t.evaluate(apply_Z1(f));
  auto z1bf = t.evaluate(apply_Z1bar(f));
  auto fv = t.evaluate(f);
  const size_t n = fv.size();
  std::vector<std::complex<double>> ztf(n);
  for (size_t i = 0; i < n; ++i)
    ztf[i] = (z1f[i] + phi_v[i] * z1bf[i]) / std::sqrt(1.0 - std::norm(phi_v[i]));
  SphereFunctionD h = t.project(ztf, 1);
  auto z1h = t.evaluate(apply_Z1(h));
  auto z1bh = t.evaluate(apply_Z1bar(h));
  std::vector<std::complex<double>> res(n);
  for (size_t i = 0; i < n; ++i) {
    double one_m = 1.0 - std::norm(phi_v[i]);
    std::complex<double> ztzt = (z1h[i] + phi_v[i] * z1bh[i]) / std::sqrt(one_m);
    res[i] = ztzt - dd.omega1[i] * ztf[i] + I * dd.torsion[i] * fv[i] - phidot_v[i] / one_m;
  }
  return res;
}

// ------------------------------------------------------------------
// Parabolic solver for general infinitesimally embeddable data. The split
// system is
//   (D1)^2 f~ + P1(L_phi f~) - i lambda D0 (P1 phi) = phidot,
//   P1 phi' = phidot                       (so P1 phi = t phidot),
//   (d/dt + i lambda D0) P2 phi = P2(L_phi f~),
// where on the P2 blocks (q in {0,1}) the diagonal rates lambda (p - q + 4)
// are strictly stabilizing for lambda < 0. The elliptic equation is solved by
// fixed-point iteration, the stiff diagonal by an exponential integrator.

struct EvolveOptions {
  double t_end = 1.0;
  double dt = 1e-3;
  int sample_every = 10;
  double fixed_point_tol = 1e-12;
  int fixed_point_max_iters = 60;
  double smallness_threshold = 0.5;  // L2 bound on phidot
  double max_rate_dt = 20.0;         // reject |lambda (p-q+4)| dt beyond this
  enum class Integrator { ExpEuler, ETD2RK } integrator = Integrator::ETD2RK;
  int norm_order = 10;
  std::optional<SphereFunctionD> initial_psi;  // testing hook; defaults to zero
};

struct Trajectory {
  double lambda = 0.0;
  double dt = 0.0;
  int truncation = 0;
  double fixed_point_tol = 0.0;
  std::vector<double> times;
  std::vector<SphereFunctionD> f;    // lambda + f~ at sample times
  std::vector<SphereFunctionD> phi;  // t phidot + psi at sample times
  double max_contraction = 0.0;      // worst observed fixed-point ratio
};

namespace detail {

inline double phi1(double x) {
  return std::abs(x) < 1e-5 ? 1.0 + 0.5 * x + x * x / 6.0 : std::expm1(x) / x;
}
inline double phi2(double x) {
  return std::abs(x) < 1e-4 ? 0.5 + x / 6.0 + x * x / 24.0 : (std::expm1(x) - x) / (x * x);
}

struct EllipticSolution {
  SphereFunctionD f;
  SphereFunctionD forcing;  // P2 L_phi f, the stiff-diagonal drive
};

struct EvolveWorkspace {
  const SphereFunctionD& phidot;
  const SpectralTransform& transform;
  double lambda;
  SphereFunctionD n0_phidot;

  SphereFunctionD phi_at(double t, const SphereFunctionD& psi) const {
    SphereFunctionD phi = phidot;
    phi *= std::complex<double>(t, 0.0);
    phi += psi;
    return phi;
  }

  SphereFunctionD rhs0_at(double t) const {
    SphereFunctionD rhs0 = phidot;
    SphereFunctionD drift = n0_phidot;
    drift *= std::complex<double>(0.0, lambda * t);
    rhs0 += drift;
    return rhs0;
  }

  // Fixed-point solve of the elliptic equation at one time slice:
  //   f <- solve_Z1_squared(rhs0 - P1 (L_phi f)).
  // The returned forcing reuses the last computed L (within tolerance of f).
  EllipticSolution solve_f(double t, const PhiGridValues& pv, SphereFunctionD guess,
                           const EvolveOptions& opts, double& contraction) const {
    if (pv.sup_abs >= 1.0) throw DeformationTooLarge("evolve: sup|phi| reached 1");
    SphereFunctionD rhs0 = rhs0_at(t);
    SphereFunctionD f = std::move(guess);
    SphereFunctionD lf;
    double prev_delta = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.fixed_point_max_iters; ++iter) {
      lf = apply_L_grid(pv, f, transform);
      SphereFunctionD rhs = rhs0 - project(lf, Region::QGe2);
      rhs.prune(0.0);
      SphereFunctionD next = solve_Z1_squared(rhs, opts.fixed_point_tol);
      double delta = l2_norm(next - f);
      f = std::move(next);
      if (delta <= opts.fixed_point_tol)
        return {std::move(f), project(lf, Region::QIn01)};
      if (iter > 1 && delta > prev_delta && delta > 1e3 * opts.fixed_point_tol)
        throw FixedPointDiverged("evolve: fixed-point iteration diverged at t = " +
                                 std::to_string(t));
      if (prev_delta > 0 && std::isfinite(prev_delta))
        contraction = std::max(contraction, delta / prev_delta);
      prev_delta = delta;
    }
    throw FixedPointDiverged("evolve: fixed-point iteration did not converge at t = " +
                             std::to_string(t));
  }
};

// One exponential-integrator update of the P2 blocks: rates a = lambda(p-q+4).
inline SphereFunctionD exp_step(const SphereFunctionD& psi, const SphereFunctionD& g, double dt,
                                double lambda) {
  SphereFunctionD out = SphereFunctionD::zero(psi.weight, psi.truncation);
  auto keys = psi.blocks;
  for (const auto& [pq, coeffs] : g.blocks)
    keys.try_emplace(pq, std::vector<std::complex<double>>(coeffs.size(), 0.0));
  for (const auto& [pq, _] : keys) {
    auto [p, q] = pq;
    double a = lambda * (p - q + 4);
    double e = std::exp(a * dt);
    double p1 = detail::phi1(a * dt);
    const auto* pc = psi.find(p, q);
    const auto* gc = g.find(p, q);
    std::vector<std::complex<double>> blk(block_dim(p, q), 0.0);
    for (int i = 0; i < block_dim(p, q); ++i) {
      std::complex<double> v = pc ? (*pc)[i] : 0.0;
      std::complex<double> gv = gc ? (*gc)[i] : 0.0;
      blk[i] = e * v + dt * p1 * gv;
    }
    out.add_block(p, q, blk);
  }
  out.prune(0.0);
  return out;
}

// Second-order correction psi += dt phi2(a dt) (g_new - g_old).
inline void etd2_correct(SphereFunctionD& psi, const SphereFunctionD& g_old,
                         const SphereFunctionD& g_new, double dt, double lambda) {
  SphereFunctionD diff = g_new - g_old;
  for (auto& [pq, coeffs] : diff.blocks) {
    double a = lambda * (pq.first - pq.second + 4);
    double p2 = detail::phi2(a * dt);
    for (auto& c : coeffs) c *= dt * p2;
  }
  psi += diff;
  psi.prune(0.0);
}

}  // namespace detail

// Time-steps the split system. phi(t) = t phidot + psi(t) with psi in the
// q in {0,1} blocks and psi(t) = O(t^2); f_t = lambda + f~_t.
inline Trajectory evolve_general(const SphereFunctionD& phidot, double lambda, int N,
                                 const SpectralTransform& transform,
                                 const EvolveOptions& opts = {}) {
  detail::require_weight2(phidot, "evolve_general");
  if (!(lambda < 0.0)) throw std::invalid_argument("evolve_general: lambda must be negative");
  auto bad = detail::offending_blocks(phidot, Region::QGe2, opts.fixed_point_tol);
  if (!bad.empty())
    throw NotInfinitesimallyEmbeddable("evolve_general: phidot not in D_0, blocks " +
                                       detail::block_list(bad));
  if (l2_norm(phidot) > opts.smallness_threshold)
    throw std::invalid_argument("evolve_general: ||phidot|| exceeds the smallness threshold");
  double max_rate = std::abs(lambda) * (N + 4);
  if (max_rate * opts.dt > opts.max_rate_dt)
    throw StepRejected("evolve_general: rate " + std::to_string(max_rate) +
                       " incompatible with dt " + std::to_string(opts.dt));

  detail::EvolveWorkspace ws{phidot, transform, lambda, apply_nabla0(phidot)};

  Trajectory traj;
  traj.lambda = lambda;
  traj.dt = opts.dt;
  traj.truncation = N;
  traj.fixed_point_tol = opts.fixed_point_tol;

  SphereFunctionD psi =
      opts.initial_psi ? project(*opts.initial_psi, Region::QIn01) : SphereFunctionD::zero(2, N);
  double contraction = 0.0;
  PhiGridValues pv = PhiGridValues::make(ws.phi_at(0.0, psi), transform);
  detail::EllipticSolution sol =
      ws.solve_f(0.0, pv, SphereFunctionD::zero(0, N), opts, contraction);
  SphereFunctionD f_prev = sol.f;

  auto record = [&](double t) {
    traj.times.push_back(t);
    SphereFunctionD ftot = sol.f;
    ftot.at(0, 0)[0] += lambda;
    traj.f.push_back(std::move(ftot));
    traj.phi.push_back(ws.phi_at(t, psi));
  };
  record(0.0);

  const long steps = std::max<long>(std::lround(opts.t_end / opts.dt), opts.t_end > 0 ? 1 : 0);
  double t = 0.0;
  for (long n = 0; n < steps; ++n) {
    double t_next = (n + 1 == steps) ? opts.t_end : t + opts.dt;
    double h = t_next - t;  // only the final step may differ from dt
    // linear extrapolation warm start for the elliptic solve
    SphereFunctionD guess = sol.f;
    guess *= std::complex<double>(2.0, 0.0);
    guess -= f_prev;
    f_prev = sol.f;

    SphereFunctionD psi_pred = detail::exp_step(psi, sol.forcing, h, lambda);
    if (opts.integrator == EvolveOptions::Integrator::ETD2RK) {
      PhiGridValues pv_pred = PhiGridValues::make(ws.phi_at(t_next, psi_pred), transform);
      detail::EllipticSolution pred = ws.solve_f(t_next, pv_pred, guess, opts, contraction);
      detail::etd2_correct(psi_pred, sol.forcing, pred.forcing, h, lambda);
      psi = std::move(psi_pred);
      pv = PhiGridValues::make(ws.phi_at(t_next, psi), transform);
      sol = ws.solve_f(t_next, pv, std::move(pred.f), opts, contraction);
    } else {
      psi = std::move(psi_pred);
      pv = PhiGridValues::make(ws.phi_at(t_next, psi), transform);
      sol = ws.solve_f(t_next, pv, std::move(guess), opts, contraction);
    }
    t = t_next;
    if ((n + 1) % opts.sample_every == 0 || n + 1 == steps) record(t);
  }
  traj.max_contraction = contraction;
  return traj;
}

// Time-one map of the canonical family; identity at linear order.
inline SphereFunctionD exponential_map(const SphereFunctionD& phidot, double lambda, int N,
                                       const SpectralTransform& transform,
                                       EvolveOptions opts = {}) {
  opts.t_end = 1.0;
  Trajectory traj = evolve_general(phidot, lambda, N, transform, opts);
  return traj.phi.back();
}

// Strict-sign certificate for a series: min over sampled t in [0, t_end] of
// the grid minimum of |Re f_t|, with sign consistency.
template <class S>
void certify_sign(TangencySeries<S>& series, const SpectralTransform& t, double t_end = 1.0,
                  int t_samples = 21, double margin = 0.0) {
  std::vector<std::vector<std::complex<double>>> coeff_values;
  for (int k = 0; k <= series.K; ++k) coeff_values.push_back(t.evaluate(to_float_any(series.f[k])));
  double lambda = scalar_traits<S>::real_to_double(series.lambda);
  double min_abs = std::numeric_limits<double>::infinity();
  int sign = 0;
  bool consistent = true;
  for (int it = 0; it < t_samples; ++it) {
    double tt = t_end * it / (t_samples - 1);
    for (size_t i = 0; i < coeff_values[0].size(); ++i) {
      std::complex<double> v = lambda;
      double tp = 1.0;
      for (int k = 0; k <= series.K; ++k) {
        v += tp * coeff_values[k][i];
        tp *= tt;
      }
      double re = v.real();
      int s = re > 0 ? 1 : (re < 0 ? -1 : 0);
      if (sign == 0) sign = s;
      if (s == 0 || s != sign) consistent = false;
      min_abs = std::min(min_abs, std::abs(re));
    }
  }
  series.sign_min = min_abs;
  series.sign = consistent ? sign : 0;
  series.sign_certified = consistent && min_abs > margin;
}

}  // namespace crsphere
