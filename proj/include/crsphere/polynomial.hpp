#pragma once

// Polynomial algebra on C^2 in the variables z, zbar, w, wbar, used to build
// the bigraded spherical-harmonic bases and as the symbolic oracle in tests.
// Includes the tangent fields Z1, Z1bar, the Reeb field T, the ambient
// Laplacian, normalized S^3 monomial integrals, and harmonic decomposition.

#include <array>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

#include "crsphere/scalar.hpp"

namespace crsphere {

struct Monomial {
  int a = 0, b = 0, c = 0, d = 0;  // z^a zbar^b w^c wbar^d
  friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

// Normalized integral over S^3 of z^a zbar^a w^c wbar^c (total measure 1).
// Unbalanced monomials integrate to zero. Equals 1 / ((a+c+1) * C(a+c, a)).
template <class R>
R monomial_integral(int a, int c);

template <>
inline Rational monomial_integral<Rational>(int a, int c) {
  static std::map<std::pair<int, int>, Rational> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto [it, inserted] = cache.try_emplace({a, c});
  if (inserted)
    it->second = factorial_rational(a) * factorial_rational(c) / factorial_rational(a + c + 1);
  return it->second;
}

template <>
inline double monomial_integral<double>(int a, int c) {
  double v = 1.0 / (a + c + 1);
  // divide by C(a+c, a) incrementally to stay in range
  for (int i = 1; i <= a; ++i) v *= static_cast<double>(i) / (c + i);
  return v;
}

template <class S>
class BiPoly {
 public:
  using Traits = scalar_traits<S>;
  using Terms = std::map<Monomial, S>;

  BiPoly() = default;

  static BiPoly monomial(Monomial m, S coef) {
    BiPoly p;
    if (!Traits::is_zero(coef, 0.0)) p.terms_.emplace(m, std::move(coef));
    return p;
  }
  static BiPoly constant(S c) { return monomial({0, 0, 0, 0}, std::move(c)); }
  static BiPoly z() { return monomial({1, 0, 0, 0}, Traits::one()); }
  static BiPoly zbar() { return monomial({0, 1, 0, 0}, Traits::one()); }
  static BiPoly w() { return monomial({0, 0, 1, 0}, Traits::one()); }
  static BiPoly wbar() { return monomial({0, 0, 0, 1}, Traits::one()); }

  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  void add_term(const Monomial& m, const S& coef) {
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      if (!Traits::is_zero(coef, 0.0)) terms_.emplace(m, coef);
    } else {
      it->second += coef;
      if (Traits::is_zero(it->second, 0.0)) terms_.erase(it);
    }
  }

  BiPoly& operator+=(const BiPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  BiPoly& operator-=(const BiPoly& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  friend BiPoly operator+(BiPoly a, const BiPoly& b) { return a += b; }
  friend BiPoly operator-(BiPoly a, const BiPoly& b) { return a -= b; }
  friend BiPoly operator-(const BiPoly& a) {
    BiPoly r;
    for (const auto& [m, c] : a.terms_) r.terms_.emplace(m, -c);
    return r;
  }
  friend BiPoly operator*(const BiPoly& a, const BiPoly& b) {
    BiPoly r;
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_)
        r.add_term({ma.a + mb.a, ma.b + mb.b, ma.c + mb.c, ma.d + mb.d}, ca * cb);
    return r;
  }
  BiPoly& operator*=(const S& s) {
    if (Traits::is_zero(s, 0.0)) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }
  friend BiPoly operator*(BiPoly a, const S& s) { return a *= s; }
  friend BiPoly operator*(const S& s, BiPoly a) { return a *= s; }
  friend bool operator==(const BiPoly& a, const BiPoly& b) { return a.terms_ == b.terms_; }

  BiPoly conjugated() const {
    BiPoly r;
    for (const auto& [m, c] : terms_)
      r.terms_.emplace(Monomial{m.b, m.a, m.d, m.c}, Traits::conjugate(c));
    return r;
  }

  enum class Var { Z, ZBar, W, WBar };

  BiPoly derivative(Var v) const {
    BiPoly r;
    for (const auto& [m, c] : terms_) {
      Monomial n = m;
      int e = 0;
      switch (v) {
        case Var::Z: e = m.a; --n.a; break;
        case Var::ZBar: e = m.b; --n.b; break;
        case Var::W: e = m.c; --n.c; break;
        case Var::WBar: e = m.d; --n.d; break;
      }
      if (e > 0) r.add_term(n, c * Traits::from_int(e));
    }
    return r;
  }

  // Z1 = wbar d/dz - zbar d/dw; tangent to every sphere |z|^2+|w|^2 = r^2.
  BiPoly field_Z1() const {
    return wbar() * derivative(Var::Z) - zbar() * derivative(Var::W);
  }
  BiPoly field_Z1bar() const {
    return w() * derivative(Var::ZBar) - z() * derivative(Var::WBar);
  }
  // Reeb field T = i(z d/dz + w d/dw - zbar d/dzbar - wbar d/dwbar).
  BiPoly field_T() const {
    BiPoly r = z() * derivative(Var::Z) + w() * derivative(Var::W) -
               zbar() * derivative(Var::ZBar) - wbar() * derivative(Var::WBar);
    return r * Traits::imag_unit();
  }
  // Ambient Laplacian 4(d2/dz dzbar + d2/dw dwbar).
  BiPoly laplacian() const {
    BiPoly r = derivative(Var::Z).derivative(Var::ZBar) +
               derivative(Var::W).derivative(Var::WBar);
    return r * Traits::from_int(4);
  }
  BiPoly times_r2() const {
    BiPoly r2 = z() * zbar() + w() * wbar();
    return (*this) * r2;
  }

  // Bidegree (holomorphic, antiholomorphic); requires bihomogeneity.
  std::pair<int, int> bidegree() const {
    if (terms_.empty()) return {0, 0};
    auto it = terms_.begin();
    int m = it->first.a + it->first.c, n = it->first.b + it->first.d;
    for (const auto& [mo, c] : terms_)
      if (mo.a + mo.c != m || mo.b + mo.d != n)
        throw std::invalid_argument("polynomial is not bihomogeneous");
    return {m, n};
  }

  std::map<std::pair<int, int>, BiPoly> bihomogeneous_parts() const {
    std::map<std::pair<int, int>, BiPoly> parts;
    for (const auto& [m, c] : terms_)
      parts[{m.a + m.c, m.b + m.d}].add_term(m, c);
    return parts;
  }

  // Normalized S^3 integral of the polynomial.
  S integral() const {
    S total = Traits::zero();
    for (const auto& [m, c] : terms_)
      if (m.a == m.b && m.c == m.d)
        total += c * Traits::from_real(
                         monomial_integral<typename Traits::real_type>(m.a, m.c));
    return total;
  }

  // L2(S^3) inner product: integral of this * conj(other).
  S inner(const BiPoly& other) const {
    S total = Traits::zero();
    for (const auto& [ma, ca] : terms_)
      for (const auto& [mb, cb] : other.terms_) {
        // conj(other) term has exponents (b, a, d, c)
        int A = ma.a + mb.b, B = ma.b + mb.a, C = ma.c + mb.d, D = ma.d + mb.c;
        if (A == B && C == D)
          total += ca * Traits::conjugate(cb) *
                   Traits::from_real(monomial_integral<typename Traits::real_type>(A, C));
      }
    return total;
  }

  std::complex<double> evaluate(std::complex<double> zv, std::complex<double> wv) const {
    std::complex<double> total = 0.0;
    std::complex<double> zc = std::conj(zv), wc = std::conj(wv);
    for (const auto& [m, c] : terms_) {
      std::complex<double> v = Traits::to_std(c);
      for (int i = 0; i < m.a; ++i) v *= zv;
      for (int i = 0; i < m.b; ++i) v *= zc;
      for (int i = 0; i < m.c; ++i) v *= wv;
      for (int i = 0; i < m.d; ++i) v *= wc;
      total += v;
    }
    return total;
  }

  template <class S2>
  BiPoly<S2> convert() const {
    BiPoly<S2> r;
    for (const auto& [m, c] : terms_) {
      std::complex<double> v = Traits::to_std(c);
      r.add_term(m, S2(v));
    }
    return r;
  }

 private:
  Terms terms_;
};

using PolyQ = BiPoly<RationalComplex>;
using PolyD = BiPoly<std::complex<double>>;

// Harmonic decomposition of a bihomogeneous polynomial of bidegree (m, n):
// P = sum_k r^{2k} H_k with H_k harmonic of bidegree (m-k, n-k). Uses
// Delta(r^{2k} H_{a,b}) = 4k(a+b+k+1) r^{2(k-1)} H_{a,b}. On the sphere the
// r^{2k} factors drop, giving the block decomposition.
template <class S>
std::map<std::pair<int, int>, BiPoly<S>> harmonic_parts_bihomogeneous(const BiPoly<S>& poly) {
  using Traits = scalar_traits<S>;
  std::map<std::pair<int, int>, BiPoly<S>> out;
  if (poly.empty()) return out;
  auto [m, n] = poly.bidegree();
  if (m == 0 || n == 0) {
    out[{m, n}] = poly;
    return out;
  }
  BiPoly<S> lap = poly.laplacian();
  auto sub = harmonic_parts_bihomogeneous(lap);  // parts of bidegree (m-1-j, n-1-j)
  // H_{j+1} = G_j / (4 (j+1) (m+n-j))
  std::map<int, BiPoly<S>> h;  // k -> H_k
  for (auto& [deg, g] : sub) {
    int j = (m - 1) - deg.first;
    S denom = Traits::from_int(4L * (j + 1) * (m + n - j));
    h[j + 1] = g * (Traits::one() / denom);
  }
  BiPoly<S> h0 = poly;
  for (auto& [k, hk] : h) {
    BiPoly<S> t = hk;
    for (int i = 0; i < k; ++i) t = t.times_r2();
    h0 -= t;
  }
  if (!h0.empty()) out[{m, n}] = h0;
  for (auto& [k, hk] : h)
    if (!hk.empty()) out[{m - k, n - k}] = hk;
  return out;
}

// Harmonic decomposition of an arbitrary polynomial, bihomogeneous piece by
// piece. Distinct pieces can land on the same block; contributions add.
template <class S>
std::map<std::pair<int, int>, BiPoly<S>> harmonic_parts(const BiPoly<S>& poly) {
  std::map<std::pair<int, int>, BiPoly<S>> out;
  for (const auto& [deg, part] : poly.bihomogeneous_parts()) {
    for (auto& [pq, h] : harmonic_parts_bihomogeneous(part)) {
      auto it = out.find(pq);
      if (it == out.end())
        out.emplace(pq, h);
      else
        it->second += h;
    }
  }
  for (auto it = out.begin(); it != out.end();)
    it = it->second.empty() ? out.erase(it) : std::next(it);
  return out;
}

}  // namespace crsphere
