#pragma once

// Bigraded spherical harmonics on S^3. The canonical basis of H_{p,q} is
// e_{p,q,a} = (Z1)^q (z^a w^{p+q-a}), a = 0..p+q, with integer coefficients.
// Distinct basis elements carry distinct torus charges, so the exact Gram
// matrix of a block is diagonal and conjugation maps e_{p,q,a} to a rational
// multiple of e_{q,p,p+q-a}. Both facts are recomputed and verified here.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crsphere/polynomial.hpp"
#include "crsphere/scalar.hpp"

namespace crsphere {

using BlockKey = std::pair<int, int>;  // (p, q)

inline int block_dim(int p, int q) { return p + q + 1; }

template <class S>
S scalar_from_rational(const Rational& r) {
  if constexpr (scalar_traits<S>::exact)
    return RationalComplex(r);
  else
    return std::complex<double>(r.get_d(), 0.0);
}

template <class S>
typename scalar_traits<S>::real_type real_from_rational(const Rational& r) {
  if constexpr (scalar_traits<S>::exact)
    return r;
  else
    return r.get_d();
}

// Sublaplacian eigenvalue of -(Z1 Z1bar + Z1bar Z1) on H_{p,q}.
inline long sublaplacian_eigenvalue(int p, int q) {
  return 2L * p * q + p + q;
}

struct HarmonicBlockData {
  int p = 0, q = 0;
  std::vector<PolyQ> basis;          // canonical basis polynomials, integer coeffs
  std::vector<Rational> gram;        // diagonal of the exact Gram matrix
  std::vector<Rational> conj_coef;   // conj(e_{p,q,a}) = conj_coef[a] * e_{q,p,p+q-a}
  std::vector<double> gram_d;
  std::vector<PolyD> basis_d;
};

class HarmonicTable {
 public:
  static const HarmonicBlockData& block(int p, int q) {
    if (p < 0 || q < 0) throw std::invalid_argument("negative block index");
    static HarmonicTable table;
    std::lock_guard<std::mutex> lock(table.mutex_);
    auto key = BlockKey{p, q};
    auto it = table.cache_.find(key);
    if (it != table.cache_.end()) return *it->second;
    auto data = std::make_unique<HarmonicBlockData>(build(p, q, table));
    auto* ptr = data.get();
    table.cache_.emplace(key, std::move(data));
    return *ptr;
  }

 private:
  HarmonicTable() = default;

  static std::vector<PolyQ> build_basis(int p, int q) {
    std::vector<PolyQ> basis;
    basis.reserve(p + q + 1);
    for (int a = 0; a <= p + q; ++a) {
      PolyQ e = PolyQ::constant(RationalComplex(1));
      for (int i = 0; i < a; ++i) e = e * PolyQ::z();
      for (int i = 0; i < p + q - a; ++i) e = e * PolyQ::w();
      for (int i = 0; i < q; ++i) e = e.field_Z1();
      basis.push_back(std::move(e));
    }
    return basis;
  }

  static HarmonicBlockData build(int p, int q, HarmonicTable& table) {
    HarmonicBlockData d;
    d.p = p;
    d.q = q;
    d.basis = build_basis(p, q);
    d.gram.resize(d.basis.size());
    d.gram_d.resize(d.basis.size());
    d.basis_d.resize(d.basis.size());
    for (size_t a = 0; a < d.basis.size(); ++a) {
      RationalComplex g = d.basis[a].inner(d.basis[a]);
      if (g.im != 0 || g.re <= 0) throw std::logic_error("harmonic basis Gram defect");
      d.gram[a] = g.re;
      d.gram_d[a] = g.re.get_d();
      d.basis_d[a] = d.basis[a].template convert<std::complex<double>>();
    }
    // Conjugation sends the block to (q, p); coefficients verified exactly.
    std::vector<PolyQ> target = (p == q) ? d.basis : build_basis(q, p);
    std::vector<Rational> target_gram(target.size());
    for (size_t b = 0; b < target.size(); ++b) {
      if (p == q)
        target_gram[b] = d.gram[b];
      else
        target_gram[b] = target[b].inner(target[b]).re;
    }
    d.conj_coef.resize(d.basis.size());
    for (size_t a = 0; a < d.basis.size(); ++a) {
      size_t bidx = d.basis.size() - 1 - a;  // p + q - a
      PolyQ ce = d.basis[a].conjugated();
      RationalComplex coef = ce.inner(target[bidx]) / RationalComplex(target_gram[bidx]);
      if (coef.im != 0) throw std::logic_error("conjugation coefficient not real");
      if (!(ce - target[bidx] * coef).empty())
        throw std::logic_error("conjugation is not basis-diagonal");
      d.conj_coef[a] = coef.re;
    }
    (void)table;
    return d;
  }

  std::mutex mutex_;
  std::map<BlockKey, std::unique_ptr<HarmonicBlockData>> cache_;
};

// Finitely supported bigraded harmonic expansion of a function or tensor on
// S^3. `weight` counts covariant frame indices (0 for functions, 2 for
// deformation tensors). Zero blocks may be present or absent.
template <class S>
struct SphereFunction {
  using Traits = scalar_traits<S>;

  int weight = 0;
  int truncation = 0;
  bool truncation_loss = false;
  std::map<BlockKey, std::vector<S>> blocks;

  static SphereFunction zero(int weight, int truncation) {
    SphereFunction f;
    f.weight = weight;
    f.truncation = truncation;
    return f;
  }

  // Single basis element c * e_{p,q,a}.
  static SphereFunction basis_element(int p, int q, int a, S c, int weight, int truncation) {
    SphereFunction f = zero(weight, truncation);
    std::vector<S> coeffs(block_dim(p, q), Traits::zero());
    coeffs[a] = std::move(c);
    f.blocks.emplace(BlockKey{p, q}, std::move(coeffs));
    return f;
  }

  std::vector<S>* find(int p, int q) {
    auto it = blocks.find({p, q});
    return it == blocks.end() ? nullptr : &it->second;
  }
  const std::vector<S>* find(int p, int q) const {
    auto it = blocks.find({p, q});
    return it == blocks.end() ? nullptr : &it->second;
  }

  std::vector<S>& at(int p, int q) {
    auto it = blocks.find({p, q});
    if (it == blocks.end()) {
      auto [ins, ok] =
          blocks.emplace(BlockKey{p, q}, std::vector<S>(block_dim(p, q), Traits::zero()));
      it = ins;
    }
    return it->second;
  }

  void add_block(int p, int q, const std::vector<S>& coeffs) {
    auto& dst = at(p, q);
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += coeffs[i];
  }

  void prune(double tol = 0.0) {
    for (auto it = blocks.begin(); it != blocks.end();) {
      bool zero = true;
      for (const auto& c : it->second)
        if (!Traits::is_zero(c, tol)) {
          zero = false;
          break;
        }
      it = zero ? blocks.erase(it) : std::next(it);
    }
  }

  bool is_zero(double tol = 0.0) const {
    for (const auto& [pq, coeffs] : blocks)
      for (const auto& c : coeffs)
        if (!Traits::is_zero(c, tol)) return false;
    return true;
  }

  SphereFunction& operator+=(const SphereFunction& o) {
    for (const auto& [pq, coeffs] : o.blocks) add_block(pq.first, pq.second, coeffs);
    truncation_loss = truncation_loss || o.truncation_loss;
    return *this;
  }
  SphereFunction& operator-=(const SphereFunction& o) {
    for (const auto& [pq, coeffs] : o.blocks) {
      auto& dst = at(pq.first, pq.second);
      for (size_t i = 0; i < dst.size(); ++i) dst[i] -= coeffs[i];
    }
    truncation_loss = truncation_loss || o.truncation_loss;
    return *this;
  }
  friend SphereFunction operator+(SphereFunction a, const SphereFunction& b) { return a += b; }
  friend SphereFunction operator-(SphereFunction a, const SphereFunction& b) { return a -= b; }
  friend SphereFunction operator-(SphereFunction a) {
    for (auto& [pq, coeffs] : a.blocks)
      for (auto& c : coeffs) c = -c;
    return a;
  }

  SphereFunction& operator*=(const S& s) {
    for (auto& [pq, coeffs] : blocks)
      for (auto& c : coeffs) c *= s;
    return *this;
  }
  friend SphereFunction operator*(SphereFunction a, const S& s) { return a *= s; }
  friend SphereFunction operator*(const S& s, SphereFunction a) { return a *= s; }
};

using SphereFunctionQ = SphereFunction<RationalComplex>;
using SphereFunctionD = SphereFunction<std::complex<double>>;

// Equality up to zero blocks (exact scalars).
template <class S>
bool equal_up_to_zero_blocks(const SphereFunction<S>& u, const SphereFunction<S>& v,
                             double tol = 0.0) {
  SphereFunction<S> d = u;
  d -= v;
  return d.is_zero(tol);
}

template <class S>
SphereFunction<S> conj_function(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  SphereFunction<S> r = SphereFunction<S>::zero(u.weight, u.truncation);
  r.truncation_loss = u.truncation_loss;
  for (const auto& [pq, coeffs] : u.blocks) {
    auto [p, q] = pq;
    const auto& data = HarmonicTable::block(p, q);
    std::vector<S> out(coeffs.size(), Traits::zero());
    for (size_t a = 0; a < coeffs.size(); ++a) {
      S gamma = scalar_from_rational<S>(data.conj_coef[a]);
      out[coeffs.size() - 1 - a] = gamma * Traits::conjugate(coeffs[a]);
    }
    r.blocks.emplace(BlockKey{q, p}, std::move(out));
  }
  return r;
}

// L2 inner product <u, v> = integral of u * conj(v); blockwise diagonal Gram.
template <class S>
S inner_product(const SphereFunction<S>& u, const SphereFunction<S>& v) {
  using Traits = scalar_traits<S>;
  S total = Traits::zero();
  for (const auto& [pq, uc] : u.blocks) {
    const auto* vc = v.find(pq.first, pq.second);
    if (!vc) continue;
    const auto& data = HarmonicTable::block(pq.first, pq.second);
    for (size_t a = 0; a < uc.size(); ++a) {
      S g = scalar_from_rational<S>(data.gram[a]);
      total += uc[a] * Traits::conjugate((*vc)[a]) * g;
    }
  }
  return total;
}

template <class S>
typename scalar_traits<S>::real_type block_norm2(int p, int q, const std::vector<S>& coeffs) {
  using Traits = scalar_traits<S>;
  const auto& data = HarmonicTable::block(p, q);
  typename Traits::real_type total = Traits::real_zero();
  for (size_t a = 0; a < coeffs.size(); ++a)
    total += Traits::abs_squared(coeffs[a]) * real_from_rational<S>(data.gram[a]);
  return total;
}

template <class S>
typename scalar_traits<S>::real_type l2_norm2(const SphereFunction<S>& u) {
  using Traits = scalar_traits<S>;
  typename Traits::real_type total = Traits::real_zero();
  for (const auto& [pq, coeffs] : u.blocks)
    total += block_norm2(pq.first, pq.second, coeffs);
  return total;
}

template <class S>
double l2_norm(const SphereFunction<S>& u) {
  return std::sqrt(scalar_traits<S>::real_to_double(l2_norm2(u)));
}

// Reassemble the polynomial representative of one block.
template <class S>
BiPoly<S> block_polynomial(int p, int q, const std::vector<S>& coeffs) {
  const auto& data = HarmonicTable::block(p, q);
  BiPoly<S> poly;
  for (size_t a = 0; a < coeffs.size(); ++a) {
    if (scalar_traits<S>::is_zero(coeffs[a], 0.0)) continue;
    if constexpr (scalar_traits<S>::exact)
      poly += data.basis[a] * coeffs[a];
    else
      poly += data.basis_d[a] * coeffs[a];
  }
  return poly;
}

// Coordinates of a harmonic bidegree-(p,q) polynomial in the canonical basis.
// e_{p,q,a} carries the torus charge (a - q, p - a), so terms of h pair with
// exactly one basis element; bucket them by charge before the inner products.
template <class S>
std::vector<S> project_onto_block(int p, int q, const BiPoly<S>& h) {
  using Traits = scalar_traits<S>;
  const auto& data = HarmonicTable::block(p, q);
  std::vector<S> coeffs(block_dim(p, q), Traits::zero());
  std::vector<BiPoly<S>> buckets(block_dim(p, q));
  for (const auto& [m, c] : h.terms()) {
    int a = (m.a - m.b) + q;
    if (a >= 0 && a <= p + q) buckets[a].add_term(m, c);
  }
  for (int a = 0; a <= p + q; ++a) {
    if (buckets[a].empty()) continue;
    S num;
    if constexpr (Traits::exact)
      num = buckets[a].inner(data.basis[a]);
    else
      num = buckets[a].inner(data.basis_d[a]);
    coeffs[a] = num / scalar_from_rational<S>(data.gram[a]);
  }
  return coeffs;
}

// Harmonic decomposition of an ambient polynomial restricted to S^3.
template <class S>
SphereFunction<S> harmonic_decompose(const BiPoly<S>& poly, int weight, int truncation,
                                     double tol = 0.0) {
  SphereFunction<S> f = SphereFunction<S>::zero(weight, truncation);
  for (auto& [pq, h] : harmonic_parts(poly)) {
    if (pq.first + pq.second > truncation) {
      if (!h.empty()) f.truncation_loss = true;
      continue;
    }
    f.add_block(pq.first, pq.second, project_onto_block(pq.first, pq.second, h));
  }
  f.prune(tol);
  return f;
}

// Pointwise product on S^3, harmonic-decomposed, blocks above N dropped
// (TruncationLoss flagged when a dropped block is nonzero at tolerance tol).
template <class S>
SphereFunction<S> multiply(const SphereFunction<S>& u, const SphereFunction<S>& v, int N,
                           double tol = 0.0) {
  SphereFunction<S> r = SphereFunction<S>::zero(u.weight + v.weight, N);
  r.truncation_loss = u.truncation_loss || v.truncation_loss;
  std::map<BlockKey, BiPoly<S>> upolys, vpolys;
  for (const auto& [pq, coeffs] : u.blocks)
    upolys[pq] = block_polynomial(pq.first, pq.second, coeffs);
  for (const auto& [pq, coeffs] : v.blocks)
    vpolys[pq] = block_polynomial(pq.first, pq.second, coeffs);
  for (const auto& [pu, up] : upolys) {
    if (up.empty()) continue;
    for (const auto& [pv, vp] : vpolys) {
      if (vp.empty()) continue;
      BiPoly<S> prod = up * vp;
      if (prod.empty()) continue;
      for (auto& [pq, h] : harmonic_parts_bihomogeneous(prod)) {
        if (pq.first + pq.second > N) {
          for (const auto& [m, c] : h.terms())
            if (!scalar_traits<S>::is_zero(c, tol)) {
              r.truncation_loss = true;
              break;
            }
          continue;
        }
        r.add_block(pq.first, pq.second, project_onto_block(pq.first, pq.second, h));
      }
    }
  }
  r.prune(tol);
  return r;
}

template <class S>
SphereFunction<S> multiply(const SphereFunction<S>& u, const SphereFunction<S>& v) {
  return multiply(u, v, std::max(u.truncation, v.truncation));
}

inline const SphereFunctionD& to_float_any(const SphereFunctionD& u) { return u; }

inline SphereFunctionD to_float(const SphereFunctionQ& u) {
  SphereFunctionD r = SphereFunctionD::zero(u.weight, u.truncation);
  r.truncation_loss = u.truncation_loss;
  for (const auto& [pq, coeffs] : u.blocks) {
    std::vector<std::complex<double>> out(coeffs.size());
    for (size_t a = 0; a < coeffs.size(); ++a) out[a] = to_complex(coeffs[a]);
    r.blocks.emplace(pq, std::move(out));
  }
  return r;
}

inline SphereFunctionD to_float_any(const SphereFunctionQ& u) { return to_float(u); }

// Point evaluation in Hopf coordinates z = e^{i alpha} cos s, w = e^{i beta} sin s.
template <class S>
std::complex<double> evaluate(const SphereFunction<S>& u, double alpha, double beta, double s) {
  std::complex<double> z = std::polar(std::cos(s), alpha);
  std::complex<double> w = std::polar(std::sin(s), beta);
  std::complex<double> total = 0.0;
  for (const auto& [pq, coeffs] : u.blocks) {
    const auto& data = HarmonicTable::block(pq.first, pq.second);
    for (size_t a = 0; a < coeffs.size(); ++a) {
      auto c = scalar_traits<S>::to_std(coeffs[a]);
      if (c == std::complex<double>(0.0)) continue;
      total += c * data.basis_d[a].evaluate(z, w);
    }
  }
  return total;
}

}  // namespace crsphere
