#pragma once

// Pseudospectral integration of the embedding transport system: given a
// family (f_t, phi_t) solving the tangency equation with Re f_t of strict
// sign, advance the map Psi_t : S^3 -> C^2 (coordinate components Psi1, Psi2)
// and the conformal log-factor gamma_t by
//   d Psi^a/dt = (i/2) f T Psi^a
//                - (1/2) [ (Zt_bar f)(Zt Psi^a) + conj(Zt_bar f)(Zt_bar Psi^a) ],
//   d gamma/dt = -Re( kappa0 f - (i/2) T f + (Zt gamma)(Zt_bar f)
//                      - (Zt_bar gamma)(Zt f) - i (T gamma) f ),
// where Zt = (Z1 + phi Z1bar)/sqrt(1 - |phi|^2). Spatial derivatives are
// spectral, nonlinear factors pointwise on the grid, the result re-projected
// to degree N. The t = 0 velocity is checked against the variational-field
// oracle in the tests (and in the acceptance suite).

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crsphere/tangency.hpp"

namespace crsphere {

// Transverse curvature of the unit sphere: solve for the (1,0) field
// xi = a d/dz + b d/dw and kappa in
//   xi rho = 1,   xi -| d(d^c rho) = i kappa dbar(rho)
// with rho = 1 - |z|^2 - |w|^2 (positive on the strictly pseudoconvex side;
// this orientation restricts d^c rho to the standard contact form). The
// contraction gives a + kappa z = 0, b + kappa w = 0, and xi rho = 1 closes
// the 3x3 complex linear system, solved generically here.
inline double transverse_curvature_oracle(std::complex<double> z, std::complex<double> w) {
  using C = std::complex<double>;
  std::array<std::array<C, 4>, 3> m = {{
      {-std::conj(z), -std::conj(w), C(0.0), C(1.0)},  // xi rho = 1
      {C(1.0), C(0.0), z, C(0.0)},                     // a + kappa z = 0
      {C(0.0), C(1.0), w, C(0.0)},                     // b + kappa w = 0
  }};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    std::swap(m[col], m[pivot]);
    if (std::abs(m[col][col]) < 1e-14)
      throw std::runtime_error("transverse curvature system is singular");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      C f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  C kappa = m[2][3] / m[2][2];
  if (std::abs(kappa.imag()) > 1e-12)
    throw std::runtime_error("transverse curvature came out non-real");
  return kappa.real();
}

// Transverse curvature of the round sphere; constant, established by the
// oracle above (asserted in the test suite).
inline double kappa0() { return 1.0; }

struct EmbeddingState {
  double t = 0.0;
  SphereFunctionD psi1, psi2;  // coordinate components of Psi_t
  SphereFunctionD gamma;       // conformal log-factor, real
  int truncation = 0;
};

inline EmbeddingState identity_state(int N) {
  EmbeddingState s;
  s.truncation = N;
  s.psi1 = SphereFunctionD::basis_element(1, 0, 1, {1.0, 0.0}, 0, N);  // z
  s.psi2 = SphereFunctionD::basis_element(1, 0, 0, {1.0, 0.0}, 0, N);  // w
  s.gamma = SphereFunctionD::zero(0, N);
  return s;
}

// Supplies (f_t, phi_t) to the integrator. The transport law consumes the
// realization potential 2 conj(f_t), where f_t is the tangency potential of
// the series/trajectory: with Z1 = wbar d/dz - zbar d/dw, the variational
// field built from 2 conj(f) is the unique one whose flow realizes the
// family phi(t) paired with f_t by the tangency recursion (checked at t = 0
// by the first-order identity and along the run by the CR residual).
struct FlowSource {
  std::function<SphereFunctionD(double)> f;  // realization potential
  std::function<SphereFunctionD(double)> phi;
  bool sign_certified = false;
  double sign_min = 0.0;

  static SphereFunctionD realization_potential(const SphereFunctionD& f_tangency) {
    SphereFunctionD out = conj_function(f_tangency);
    out *= std::complex<double>(2.0, 0.0);
    return out;
  }

  template <class S>
  static FlowSource from_series(const TangencySeries<S>& series) {
    FlowSource src;
    std::vector<SphereFunctionD> fc, pc;
    for (const auto& fk : series.f) fc.push_back(to_float_any(fk));
    for (const auto& pk : series.phi) pc.push_back(to_float_any(pk));
    double lambda = scalar_traits<S>::real_to_double(series.lambda);
    int N = series.truncation;
    src.f = [fc, lambda, N](double t) {
      SphereFunctionD out = SphereFunctionD::zero(0, N);
      double tp = 1.0;
      for (const auto& fk : fc) {
        SphereFunctionD term = fk;
        term *= std::complex<double>(tp, 0.0);
        out += term;
        tp *= t;
      }
      out.at(0, 0)[0] += lambda;
      return realization_potential(out);
    };
    src.phi = [pc, N](double t) {
      SphereFunctionD out = SphereFunctionD::zero(2, N);
      double tp = t;  // phi starts at order 1
      for (size_t k = 1; k < pc.size(); ++k) {
        SphereFunctionD term = pc[k];
        term *= std::complex<double>(tp, 0.0);
        out += term;
        tp *= t;
      }
      return out;
    };
    src.sign_certified = series.sign_certified;
    src.sign_min = series.sign_min;
    return src;
  }

  // Piecewise-linear interpolation of trajectory samples.
  static FlowSource from_trajectory(const Trajectory& traj) {
    FlowSource src;
    auto interp = [traj](const std::vector<SphereFunctionD>& samples, double t) {
      const auto& times = traj.times;
      if (t <= times.front()) return samples.front();
      if (t >= times.back()) return samples.back();
      size_t hi = 1;
      while (times[hi] < t) ++hi;
      double u = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
      SphereFunctionD a = samples[hi - 1];
      a *= std::complex<double>(1.0 - u, 0.0);
      SphereFunctionD b = samples[hi];
      b *= std::complex<double>(u, 0.0);
      return a + b;
    };
    src.f = [traj, interp](double t) { return realization_potential(interp(traj.f, t)); };
    src.phi = [traj, interp](double t) { return interp(traj.phi, t); };
    return src;
  }
};

struct FlowOptions {
  double dt = 1e-3;
  double t_end = 1.0;
  int sample_every = 50;
  double deformation_margin = 1e-6;
  double sign_margin = 0.0;
  bool require_certificate = true;
  // halve dt when the residual at a sample exceeds growth_factor times the
  // previous sample's residual; levels below the floor are ignored
  bool adaptive = true;
  double residual_growth_factor = 16.0;
  double residual_floor = 1e-7;
  int max_halvings = 3;
};

struct FlowSample {
  double t = 0.0;
  double cr_residual = 0.0;
  double min_re_f = 0.0;
  double gamma_norm = 0.0;
  double gamma_imag = 0.0;
  double radius_mean = 0.0, radius_min = 0.0, radius_max = 0.0;
};

struct FlowResult {
  std::vector<EmbeddingState> states;
  std::vector<FlowSample> samples;
  double dt_final = 0.0;
  int halvings = 0;
};

namespace detail {

struct StateValues {
  std::vector<std::complex<double>> zt_psi1, ztb_psi1, t_psi1;
  std::vector<std::complex<double>> zt_psi2, ztb_psi2, t_psi2;
  std::vector<std::complex<double>> psi1_conj_defect, psi2_conj_defect;  // Zt(conj Psi^a)
};

}  // namespace detail

// Velocity of (Psi1, Psi2, gamma) under the transport law at one time slice.
inline std::array<SphereFunctionD, 3> flow_velocity(const EmbeddingState& state,
                                                    const SphereFunctionD& f,
                                                    const SphereFunctionD& phi,
                                                    const SpectralTransform& tr,
                                                    double margin = 1e-6,
                                                    double* min_re_f = nullptr) {
  using C = std::complex<double>;
  const C I(0.0, 1.0);
  auto phi_v = tr.evaluate(phi);
  auto fv = tr.evaluate(f);
  auto z1f = tr.evaluate(apply_Z1(f));
  auto z1bf = tr.evaluate(apply_Z1bar(f));
  auto tf = tr.evaluate(apply_T(f));
  auto z1g = tr.evaluate(apply_Z1(state.gamma));
  auto z1bg = tr.evaluate(apply_Z1bar(state.gamma));
  auto tg = tr.evaluate(apply_T(state.gamma));
  const size_t n = fv.size();
  std::vector<C> d1(n), d2(n), dg(n);
  double min_re = std::numeric_limits<double>::infinity();

  auto component = [&](const SphereFunctionD& psi, std::vector<C>& out) {
    auto z1p = tr.evaluate(apply_Z1(psi));
    auto z1bp = tr.evaluate(apply_Z1bar(psi));
    auto tp = tr.evaluate(apply_T(psi));
    for (size_t i = 0; i < n; ++i) {
      double one_m = 1.0 - std::norm(phi_v[i]);
      if (one_m <= margin)
        throw DeformationTooLarge("flow: 1 - |phi|^2 fell below the margin");
      double isq = 1.0 / std::sqrt(one_m);
      C ztb_f = (z1bf[i] + std::conj(phi_v[i]) * z1f[i]) * isq;
      C zt_p = (z1p[i] + phi_v[i] * z1bp[i]) * isq;
      C ztb_p = (z1bp[i] + std::conj(phi_v[i]) * z1p[i]) * isq;
      out[i] = 0.5 * I * fv[i] * tp[i] - 0.5 * (ztb_f * zt_p + std::conj(ztb_f) * ztb_p);
    }
  };
  component(state.psi1, d1);
  component(state.psi2, d2);
  for (size_t i = 0; i < n; ++i) {
    double one_m = 1.0 - std::norm(phi_v[i]);
    double isq = 1.0 / std::sqrt(one_m);
    C zt_f = (z1f[i] + phi_v[i] * z1bf[i]) * isq;
    C ztb_f = (z1bf[i] + std::conj(phi_v[i]) * z1f[i]) * isq;
    C zt_g = (z1g[i] + phi_v[i] * z1bg[i]) * isq;
    C ztb_g = (z1bg[i] + std::conj(phi_v[i]) * z1g[i]) * isq;
    C inner = kappa0() * fv[i] - 0.5 * I * tf[i] + zt_g * ztb_f - ztb_g * zt_f - I * tg[i] * fv[i];
    dg[i] = -inner.real();
    min_re = std::min(min_re, std::abs(fv[i].real()));
  }
  if (min_re_f) *min_re_f = min_re;
  return {tr.project(d1, 0), tr.project(d2, 0), tr.project(dg, 0)};
}

// Maximum over the grid of the Euclidean length of (Zt conj Psi^1,
// Zt conj Psi^2); zero exactly when Psi realizes the deformed CR structure,
// and invariant under constant unitary rotations of the target.
inline double cr_residual(const EmbeddingState& state, const SphereFunctionD& phi,
                          const SpectralTransform& tr, double margin = 1e-6) {
  using C = std::complex<double>;
  auto phi_v = tr.evaluate(phi);
  std::vector<double> norm2(phi_v.size(), 0.0);
  for (const SphereFunctionD* psi : {&state.psi1, &state.psi2}) {
    auto z1p = tr.evaluate(apply_Z1(*psi));
    auto z1bp = tr.evaluate(apply_Z1bar(*psi));
    for (size_t i = 0; i < phi_v.size(); ++i) {
      double one_m = 1.0 - std::norm(phi_v[i]);
      if (one_m <= margin) throw DeformationTooLarge("cr_residual: |phi| too large");
      // Zt(conj Psi) = (Z1 conj Psi + phi Z1bar conj Psi)/sqrt(1-|phi|^2)
      //              = (conj(Z1bar Psi) + phi conj(Z1 Psi))/sqrt(1-|phi|^2)
      C v = (std::conj(z1bp[i]) + phi_v[i] * std::conj(z1p[i])) / std::sqrt(one_m);
      norm2[i] += std::norm(v);
    }
  }
  double worst = 0.0;
  for (double n2 : norm2) worst = std::max(worst, n2);
  return std::sqrt(worst);
}

// Independent oracle for the t = 0 velocity: the variational field
//   Re( (1/2) f (JT + iT) - (grad^1 f) Z1 )
// evaluated on coordinates by the closed-form field actions
//   (JT + iT) z = -2z, (JT - iT) z = 0, Z1 z = wbar, Z1bar z = 0 (same for w).
inline std::array<std::vector<std::complex<double>>, 2> velocity_oracle_t0(
    const SphereFunctionD& f, const QuadratureGrid& grid, const SpectralTransform& tr) {
  using C = std::complex<double>;
  auto fv = tr.evaluate(f);
  auto z1bf = tr.evaluate(apply_Z1bar(f));
  std::array<std::vector<C>, 2> out;
  out[0].resize(fv.size());
  out[1].resize(fv.size());
  for (int i = 0; i < grid.na; ++i)
    for (int j = 0; j < grid.nb; ++j)
      for (int k = 0; k < grid.nu; ++k) {
        size_t idx = grid.index(i, j, k);
        C z = grid.z(i, k), w = grid.w(j, k);
        // V(zeta) = 1/2 [ (1/2) f (JT+iT)zeta - (Z1bar f) Z1 zeta
        //               + (1/2) conj(f) (JT-iT)zeta - conj(Z1bar f) Z1bar zeta ]
        out[0][idx] = 0.5 * (0.5 * fv[idx] * (-2.0 * z) - z1bf[idx] * std::conj(w));
        out[1][idx] = 0.5 * (0.5 * fv[idx] * (-2.0 * w) - z1bf[idx] * (-std::conj(z)));
      }
  return out;
}

// Embedding proxy: minimum over sampled node pairs of |Psi(x)-Psi(y)| divided
// by the S^3 geodesic distance of x, y.
inline double injectivity_proxy(const EmbeddingState& state, const QuadratureGrid& grid,
                                const SpectralTransform& tr, int stride = 7) {
  auto v1 = tr.evaluate(state.psi1);
  auto v2 = tr.evaluate(state.psi2);
  std::vector<size_t> picks;
  std::vector<std::array<std::complex<double>, 2>> pts;
  for (int i = 0; i < grid.na; i += stride)
    for (int j = 0; j < grid.nb; j += stride)
      for (int k = 0; k < grid.nu; ++k) {
        picks.push_back(grid.index(i, j, k));
        pts.push_back({grid.z(i, k), grid.w(j, k)});
      }
  double worst = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < picks.size(); ++a)
    for (size_t b = a + 1; b < picks.size(); ++b) {
      double dot = std::real(std::conj(pts[a][0]) * pts[b][0] + std::conj(pts[a][1]) * pts[b][1]);
      double dist = std::acos(std::clamp(dot, -1.0, 1.0));
      if (dist < 1e-8) continue;
      double image = std::abs(std::complex<double>(v1[picks[a]] - v1[picks[b]])) ;
      image = std::hypot(image, std::abs(v2[picks[a]] - v2[picks[b]]));
      worst = std::min(worst, image / dist);
    }
  return worst;
}

// One explicit Heun (RK2) step of the transport system.
inline EmbeddingState flow_step(const EmbeddingState& state, const FlowSource& src, double dt,
                                const SpectralTransform& tr, const FlowOptions& opts = {}) {
  auto add_scaled = [](const EmbeddingState& base, const std::array<SphereFunctionD, 3>& vel,
                       double c, double t_new) {
    EmbeddingState out = base;
    out.t = t_new;
    SphereFunctionD d1 = vel[0];
    d1 *= std::complex<double>(c, 0.0);
    out.psi1 += d1;
    SphereFunctionD d2 = vel[1];
    d2 *= std::complex<double>(c, 0.0);
    out.psi2 += d2;
    SphereFunctionD dg = vel[2];
    dg *= std::complex<double>(c, 0.0);
    out.gamma += dg;
    return out;
  };
  auto k1 = flow_velocity(state, src.f(state.t), src.phi(state.t), tr, opts.deformation_margin);
  EmbeddingState mid = add_scaled(state, k1, dt, state.t + dt);
  auto k2 = flow_velocity(mid, src.f(mid.t), src.phi(mid.t), tr, opts.deformation_margin);
  EmbeddingState out = state;
  out.t = state.t + dt;
  for (int c = 0; c < 3; ++c) {
    SphereFunctionD d = k1[c] + k2[c];
    d *= std::complex<double>(0.5 * dt, 0.0);
    (c == 0 ? out.psi1 : c == 1 ? out.psi2 : out.gamma) += d;
  }
  return out;
}

inline FlowResult integrate(const FlowSource& src, int N, const SpectralTransform& tr,
                            const FlowOptions& opts = {}) {
  if (opts.require_certificate && !src.sign_certified)
    throw SignLost("integrate: source carries no strict-sign certificate");

  FlowResult result;
  EmbeddingState state = identity_state(N);
  double dt = opts.dt;
  result.dt_final = dt;

  auto sample = [&](const EmbeddingState& s) {
    FlowSample row;
    row.t = s.t;
    SphereFunctionD phi = src.phi(s.t);
    row.cr_residual = cr_residual(s, phi, tr, opts.deformation_margin);
    auto fv = tr.evaluate(src.f(s.t));
    double min_re = std::numeric_limits<double>::infinity();
    for (auto& v : fv) min_re = std::min(min_re, std::abs(v.real()));
    row.min_re_f = min_re;
    row.gamma_norm = l2_norm(s.gamma);
    row.gamma_imag = l2_norm(s.gamma - conj_function(s.gamma)) / 2.0;
    auto v1 = tr.evaluate(s.psi1);
    auto v2 = tr.evaluate(s.psi2);
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0, rsum = 0.0;
    for (size_t i = 0; i < v1.size(); ++i) {
      double r = std::hypot(std::abs(v1[i]), std::abs(v2[i]));
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
      rsum += r;
    }
    row.radius_mean = rsum / v1.size();
    row.radius_min = rmin;
    row.radius_max = rmax;
    result.samples.push_back(row);
    result.states.push_back(s);
    return row;
  };

  FlowSample last = sample(state);
  if (last.min_re_f <= opts.sign_margin)
    throw SignLost("integrate: Re f_t lost its strict sign at t = 0");

  // hard iteration guard; each step advances by min(dt, remaining time) > 0
  long guard = (std::lround(opts.t_end / dt) + 16) * (1L << opts.max_halvings);
  long since_sample = 0;
  while (state.t < opts.t_end - 1e-15 && guard-- > 0) {
    double step_dt = std::min(dt, opts.t_end - state.t);
    state = flow_step(state, src, step_dt, tr, opts);
    ++since_sample;
    if (since_sample >= opts.sample_every || state.t >= opts.t_end - 1e-15) {
      since_sample = 0;
      FlowSample row = sample(state);
      if (row.min_re_f <= opts.sign_margin)
        throw SignLost("integrate: Re f_t lost its strict sign at t = " + std::to_string(state.t));
      if (opts.adaptive && row.cr_residual > opts.residual_growth_factor *
                                                std::max(last.cr_residual, opts.residual_floor)) {
        if (result.halvings >= opts.max_halvings)
          throw StepRejected("integrate: residual kept growing after " +
                             std::to_string(result.halvings) + " dt halvings");
        dt *= 0.5;
        ++result.halvings;
        result.dt_final = dt;
      }
      last = row;
    }
  }
  return result;
}

}  // namespace crsphere
