#pragma once

// The differential operators on bigraded harmonics as exact block operators.
// In the canonical basis: Z1 shifts (p,q) -> (p-1,q+1) with identity matrix
// (zero on p = 0), Z1bar shifts (p,q) -> (p+1,q-1) acting by -(p+1)q (zero on
// q = 0), T is diagonal i(p-q), and nabla_0 = T + 2i*weight. These closed
// forms are checked against symbolic differentiation in the test suite.

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crsphere/harmonics.hpp"
#include "crsphere/quadrature.hpp"

namespace crsphere {

struct OperatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotInImage : OperatorError {
  using OperatorError::OperatorError;
};
struct DeformationTooLarge : OperatorError {
  using OperatorError::OperatorError;
};

template <class S>
SphereFunction<S> apply_Z1(const SphereFunction<S>& u) {
  SphereFunction<S> r = SphereFunction<S>::zero(u.weight, u.truncation);
  r.truncation_loss = u.truncation_loss;
  for (const auto& [pq, coeffs] : u.blocks) {
    auto [p, q] = pq;
    if (p == 0) continue;
    r.add_block(p - 1, q + 1, coeffs);
  }
  return r;
}

template <class S>
SphereFunction<S> apply_Z1bar(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = SphereFunction<S>::zero(u.weight, u.truncation);
  r.truncation_loss = u.truncation_loss;
  for (const auto& [pq, coeffs] : u.blocks) {
    auto [p, q] = pq;
    if (q == 0) continue;
    S factor = Traits::from_int(-static_cast<long>(p + 1) * q);
    std::vector<S> out(coeffs.size());
    for (size_t a = 0; a < coeffs.size(); ++a) out[a] = factor * coeffs[a];
    r.add_block(p + 1, q - 1, out);
  }
  return r;
}

template <class S>
SphereFunction<S> apply_T(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = u;
  for (auto& [pq, coeffs] : r.blocks) {
    S factor = Traits::imag_unit() * Traits::from_int(pq.first - pq.second);
    for (auto& c : coeffs) c *= factor;
  }
  return r;
}

// nabla_0 = T + 2i * weight: the Reeb covariant derivative with the connection
// correction for `weight` covariant frame indices (omega_1^1(T) = -2i).
template <class S>
SphereFunction<S> apply_nabla0(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = u;
  for (auto& [pq, coeffs] : r.blocks) {
    S factor = Traits::imag_unit() * Traits::from_int(pq.first - pq.second + 2L * u.weight);
    for (auto& c : coeffs) c *= factor;
  }
  return r;
}

template <class S>
SphereFunction<S> apply_sublaplacian(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = u;
  for (auto& [pq, coeffs] : r.blocks) {
    S factor = Traits::from_int(sublaplacian_eigenvalue(pq.first, pq.second));
    for (auto& c : coeffs) c *= factor;
  }
  return r;
}

// Composition eigenvalues on H_{p,q}: Z1 Z1bar = -q(p+1), Z1bar Z1 = -p(q+1).
template <class S>
SphereFunction<S> apply_Z1_Z1bar_sym(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = u;
  for (auto& [pq, coeffs] : r.blocks) {
    S factor = Traits::from_int(-sublaplacian_eigenvalue(pq.first, pq.second));
    for (auto& c : coeffs) c *= factor;
  }
  return r;
}

// Unique u with (Z1)^2 u = g and no components in H_{p,q} for p in {0,1}.
// Requires P2 g = 0 (no blocks with q in {0,1}); in the canonical basis the
// (Z1)^2 block matrix H_{p+2,q-2} -> H_{p,q} is the identity.
template <class S>
SphereFunction<S> solve_Z1_squared(const SphereFunction<S>& g, double tol = 0.0) {
  SphereFunction<S> r = SphereFunction<S>::zero(g.weight, g.truncation);
  r.truncation_loss = g.truncation_loss;
  for (const auto& [pq, coeffs] : g.blocks) {
    auto [p, q] = pq;
    if (q <= 1) {
      bool zero = true;
      for (const auto& c : coeffs)
        if (!scalar_traits<S>::is_zero(c, tol)) {
          zero = false;
          break;
        }
      if (!zero)
        throw NotInImage("solve_Z1_squared: right-hand side has H_{p," + std::to_string(q) +
                         "} components");
      continue;
    }
    r.add_block(p + 2, q - 2, coeffs);
  }
  return r;
}

enum class Region { QGe2, QIn01, PIn01, BE, BEPrime, CD, CDPrime };

inline bool region_keeps(Region region, int p, int q) {
  switch (region) {
    case Region::QGe2: return q >= 2;
    case Region::QIn01: return q <= 1;
    case Region::PIn01: return p <= 1;
    case Region::BE:
    case Region::BEPrime: return q >= p + 4;
    case Region::CD:
    case Region::CDPrime: return q == p + 4;
  }
  return false;
}

// Imaginary part of (Z1bar)^2 phi_{p,p+4} as a self-conjugate element of
// H_{p+2,p+2}; the critical-diagonal reality defect.
template <class S>
std::vector<S> critical_diagonal_defect(int p, const std::vector<S>& coeffs) {
  using Traits = scalar_traits<S>;
  const long scale = static_cast<long>(p + 1) * (p + 2) * (p + 3) * (p + 4);
  const int n = p + 2;
  const auto& data = HarmonicTable::block(n, n);
  std::vector<S> v(coeffs.size());
  for (size_t a = 0; a < coeffs.size(); ++a) v[a] = Traits::from_int(scale) * coeffs[a];
  // Im(v) = (v - conj(v)) / 2i as functions on S^3
  std::vector<S> d(v.size());
  S half_over_i = Traits::one() / (Traits::from_int(2) * Traits::imag_unit());
  for (size_t a = 0; a < v.size(); ++a) {
    S conj_part = scalar_from_rational<S>(data.conj_coef[v.size() - 1 - a]) *
                  Traits::conjugate(v[v.size() - 1 - a]);
    d[a] = (v[a] - conj_part) * half_over_i;
  }
  return d;
}

// Critical-diagonal reality projection: phi_{p,p+4} minus i (Z1)^2 g where g
// is the real S^1-invariant solution of Re((Z1bar)^2 (Z1)^2 g) = defect. The
// operator (Z1bar)^2 (Z1)^2 is the positive scalar (p+1)(p+2)(p+3)(p+4) on
// H_{p+2,p+2}, so g = defect / scale.
template <class S>
std::vector<S> critical_diagonal_reality_g(int p, const std::vector<S>& coeffs) {
  using Traits = scalar_traits<S>;
  const long scale = static_cast<long>(p + 1) * (p + 2) * (p + 3) * (p + 4);
  std::vector<S> g = critical_diagonal_defect(p, coeffs);
  S inv = Traits::one() / Traits::from_int(scale);
  for (auto& c : g) c *= inv;
  return g;
}

template <class S>
SphereFunction<S> project(const SphereFunction<S>& u, Region region) {
  using Traits = scalar_traits<S>;
  if ((region == Region::BEPrime || region == Region::CDPrime) && u.weight != 2)
    throw OperatorError("reality-aware projections require weight 2");
  SphereFunction<S> r = SphereFunction<S>::zero(u.weight, u.truncation);
  r.truncation_loss = u.truncation_loss;
  for (const auto& [pq, coeffs] : u.blocks) {
    auto [p, q] = pq;
    if (!region_keeps(region, p, q)) continue;
    if ((region == Region::BEPrime || region == Region::CDPrime) && q == p + 4) {
      std::vector<S> g = critical_diagonal_reality_g(p, coeffs);
      std::vector<S> out(coeffs.size());
      for (size_t a = 0; a < coeffs.size(); ++a)
        out[a] = coeffs[a] - Traits::imag_unit() * g[a];
      r.add_block(p, q, out);
    } else {
      r.add_block(p, q, coeffs);
    }
  }
  return r;
}

// Folland-Stein norm squared: sum over blocks of (1 + 2pq + p + q)^s * |u_{p,q}|_{L2}^2.
template <class S>
typename scalar_traits<S>::real_type fs_norm2(const SphereFunction<S>& u, int s) {
  using Traits = scalar_traits<S>;
  if (s < 0) throw std::invalid_argument("fs_norm: order must be nonnegative");
  typename Traits::real_type total = Traits::real_zero();
  for (const auto& [pq, coeffs] : u.blocks) {
    typename Traits::real_type w = Traits::real_from_int(1 + sublaplacian_eigenvalue(pq.first, pq.second));
    typename Traits::real_type ws = Traits::real_from_int(1);
    for (int i = 0; i < s; ++i) ws *= w;
    total += ws * block_norm2(pq.first, pq.second, coeffs);
  }
  return total;
}

template <class S>
double fs_norm(const SphereFunction<S>& u, int s) {
  return std::sqrt(scalar_traits<S>::real_to_double(fs_norm2(u, s)));
}

// ------------------------------------------------------------------
// Generic block-operator representation (used for serialization, golden
// files, and composition tests; the fast paths above are the closed forms).

template <class S>
struct BlockOperator {
  int dp = 0, dq = 0;
  int weight_delta = 0;
  // source (p,q) -> dense matrix, rows indexed by target basis, cols by source
  std::map<BlockKey, std::vector<std::vector<S>>> matrices;

  SphereFunction<S> apply(const SphereFunction<S>& u) const {
    using Traits = scalar_traits<S>;
    SphereFunction<S> r = SphereFunction<S>::zero(u.weight + weight_delta, u.truncation);
    for (const auto& [pq, coeffs] : u.blocks) {
      auto it = matrices.find(pq);
      if (it == matrices.end()) continue;
      const auto& m = it->second;
      int tp = pq.first + dp, tq = pq.second + dq;
      if (tp < 0 || tq < 0) continue;
      std::vector<S> out(block_dim(tp, tq), Traits::zero());
      for (size_t row = 0; row < m.size(); ++row)
        for (size_t col = 0; col < coeffs.size(); ++col) out[row] += m[row][col] * coeffs[col];
      r.add_block(tp, tq, out);
    }
    return r;
  }
};

// outer(inner(u)): shifts add, matrices multiply.
template <class S>
BlockOperator<S> compose(const BlockOperator<S>& outer, const BlockOperator<S>& inner) {
  using Traits = scalar_traits<S>;
  BlockOperator<S> r;
  r.dp = outer.dp + inner.dp;
  r.dq = outer.dq + inner.dq;
  r.weight_delta = outer.weight_delta + inner.weight_delta;
  for (const auto& [pq, mi] : inner.matrices) {
    int mp = pq.first + inner.dp, mq = pq.second + inner.dq;
    if (mp < 0 || mq < 0) continue;
    auto it = outer.matrices.find({mp, mq});
    if (it == outer.matrices.end()) continue;
    const auto& mo = it->second;
    std::vector<std::vector<S>> m(mo.size(), std::vector<S>(mi[0].size(), Traits::zero()));
    for (size_t i = 0; i < mo.size(); ++i)
      for (size_t k = 0; k < mi.size(); ++k)
        for (size_t j = 0; j < mi[0].size(); ++j) m[i][j] += mo[i][k] * mi[k][j];
    r.matrices.emplace(pq, std::move(m));
  }
  return r;
}

enum class StandardOp { Z1, Z1bar, T, Nabla0Weight2 };

template <class S>
BlockOperator<S> materialize(StandardOp op, int N) {
  using Traits = scalar_traits<S>;
  BlockOperator<S> r;
  switch (op) {
    case StandardOp::Z1: r.dp = -1; r.dq = 1; break;
    case StandardOp::Z1bar: r.dp = 1; r.dq = -1; break;
    default: break;
  }
  for (int p = 0; p <= N; ++p)
    for (int q = 0; p + q <= N; ++q) {
      int dim = block_dim(p, q);
      int tp = p + r.dp, tq = q + r.dq;
      if (tp < 0 || tq < 0) continue;
      std::vector<std::vector<S>> m(block_dim(tp, tq), std::vector<S>(dim, Traits::zero()));
      S diag;
      switch (op) {
        case StandardOp::Z1: diag = (p == 0) ? Traits::zero() : Traits::one(); break;
        case StandardOp::Z1bar:
          diag = Traits::from_int(q == 0 ? 0 : -static_cast<long>(p + 1) * q);
          break;
        case StandardOp::T: diag = Traits::imag_unit() * Traits::from_int(p - q); break;
        case StandardOp::Nabla0Weight2:
          diag = Traits::imag_unit() * Traits::from_int(p - q + 4);
          break;
      }
      if (op == StandardOp::Z1 && p == 0) continue;
      if (op == StandardOp::Z1bar && q == 0) continue;
      for (int a = 0; a < dim; ++a) m[a][a] = diag;
      r.matrices.emplace(BlockKey{p, q}, std::move(m));
    }
  return r;
}

// ------------------------------------------------------------------
// Deformed pseudohermitian data for a deformation tensor phi (weight 2),
// evaluated pointwise on a grid with derivatives taken spectrally:
//   omega_1^1_1(t), omega_1^1_0(t) and the torsion A_11(t) = -phi_{11,0}/(1-|phi|^2).

struct DeformedData {
  std::vector<std::complex<double>> omega1;   // omega_1^1_1
  std::vector<std::complex<double>> omega0;   // omega_1^1_0
  std::vector<std::complex<double>> torsion;  // A_11 grid values
  SphereFunctionD torsion_fn;                 // grid_project of A_11, weight 2
  double sup_phi = 0.0;
};

inline DeformedData deformed_data(const SphereFunctionD& phi, const SpectralTransform& transform,
                                  double margin = 1e-6) {
  using C = std::complex<double>;
  if (phi.weight != 2) throw OperatorError("deformed_data expects a weight-2 tensor");
  DeformedData out;
  const auto phi_v = transform.evaluate(phi);
  const auto z1_phi = transform.evaluate(apply_Z1(phi));
  const auto z1b_phi = transform.evaluate(apply_Z1bar(phi));
  const auto n0_phi = transform.evaluate(apply_nabla0(phi));
  const std::size_t n = phi_v.size();
  out.omega1.resize(n);
  out.omega0.resize(n);
  out.torsion.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.sup_phi = std::max(out.sup_phi, std::abs(phi_v[i]));
  if (out.sup_phi >= 1.0 - margin)
    throw DeformationTooLarge("sup|phi| = " + std::to_string(out.sup_phi));
  for (std::size_t i = 0; i < n; ++i) {
    C u = phi_v[i];
    C ub = std::conj(u);
    double a2 = std::norm(u);
    double one_m = 1.0 - a2;
    // conj-tensor derivatives via the intertwining conj(Z1bar f) = Z1 conj(f)
    C z1_conj = std::conj(z1b_phi[i]);   // Z1 of conj(phi)
    C z1b_conj = std::conj(z1_phi[i]);   // Z1bar of conj(phi)
    out.omega1[i] = (2.0 * z1b_phi[i] + u * z1_conj + ub * z1_phi[i] + u * u * z1b_conj -
                     a2 * z1b_phi[i]) /
                    (2.0 * one_m * std::sqrt(one_m));
    out.omega0[i] = C(0.0, -2.0) + (u * std::conj(n0_phi[i]) - ub * n0_phi[i]) / (2.0 * one_m);
    out.torsion[i] = -n0_phi[i] / one_m;
  }
  out.torsion_fn = transform.project(out.torsion, 2);
  return out;
}

}  // namespace crsphere
