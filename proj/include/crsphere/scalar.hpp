#pragma once

// Scalar backends for the spectral toolkit: an exact rational-complex type
// (GMP rationals) and double-precision complex, behind one trait interface.

#include <gmpxx.h>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace crsphere {

using Rational = mpq_class;

inline double to_double(const Rational& r) { return r.get_d(); }

inline Rational rational_from_string(const std::string& s) {
  try {
    Rational r(s, 10);
    r.canonicalize();
    return r;
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("bad rational literal: '" + s + "'");
  }
}

// Serialized as "num/den" even when den == 1, so readers never need to guess.
inline std::string to_fraction_string(const Rational& r) {
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

inline Rational factorial_rational(int n) {
  Rational r(1);
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Complex number with exact rational real/imaginary parts.
struct RationalComplex {
  Rational re, im;

  RationalComplex() : re(0), im(0) {}
  RationalComplex(long r) : re(r), im(0) {}  // NOLINT(google-explicit-constructor)
  RationalComplex(const Rational& r) : re(r), im(0) {}  // NOLINT
  RationalComplex(Rational r, Rational i) : re(std::move(r)), im(std::move(i)) {}

  static RationalComplex i() { return RationalComplex(Rational(0), Rational(1)); }

  RationalComplex& operator+=(const RationalComplex& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  RationalComplex& operator-=(const RationalComplex& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  RationalComplex& operator*=(const RationalComplex& o) {
    Rational r = re * o.re - im * o.im;
    im = re * o.im + im * o.re;
    re = r;
    return *this;
  }
  RationalComplex& operator/=(const RationalComplex& o) {
    Rational d = o.re * o.re + o.im * o.im;
    if (d == 0) throw std::domain_error("RationalComplex division by zero");
    Rational r = (re * o.re + im * o.im) / d;
    im = (im * o.re - re * o.im) / d;
    re = r;
    return *this;
  }

  friend RationalComplex operator+(RationalComplex a, const RationalComplex& b) { return a += b; }
  friend RationalComplex operator-(RationalComplex a, const RationalComplex& b) { return a -= b; }
  friend RationalComplex operator*(RationalComplex a, const RationalComplex& b) { return a *= b; }
  friend RationalComplex operator/(RationalComplex a, const RationalComplex& b) { return a /= b; }
  friend RationalComplex operator-(const RationalComplex& a) {
    return RationalComplex(-a.re, -a.im);
  }
  friend bool operator==(const RationalComplex& a, const RationalComplex& b) {
    return a.re == b.re && a.im == b.im;
  }
  friend bool operator!=(const RationalComplex& a, const RationalComplex& b) { return !(a == b); }
};

inline RationalComplex conj(const RationalComplex& x) { return RationalComplex(x.re, -x.im); }
inline Rational abs2(const RationalComplex& x) { return x.re * x.re + x.im * x.im; }
inline std::complex<double> to_complex(const RationalComplex& x) {
  return {x.re.get_d(), x.im.get_d()};
}

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<RationalComplex> {
  static constexpr bool exact = true;
  using real_type = Rational;

  static RationalComplex zero() { return {}; }
  static RationalComplex one() { return RationalComplex(1); }
  static RationalComplex imag_unit() { return RationalComplex::i(); }
  static RationalComplex conjugate(const RationalComplex& x) { return conj(x); }
  static real_type abs_squared(const RationalComplex& x) { return abs2(x); }
  static real_type real(const RationalComplex& x) { return x.re; }
  static real_type imag(const RationalComplex& x) { return x.im; }
  static bool is_zero(const RationalComplex& x, double /*tol*/ = 0.0) {
    return x.re == 0 && x.im == 0;
  }
  static std::complex<double> to_std(const RationalComplex& x) { return to_complex(x); }
  static RationalComplex from_int(long n) { return RationalComplex(n); }
  static RationalComplex from_real(const real_type& r) { return RationalComplex(r); }
  static real_type real_zero() { return Rational(0); }
  static real_type real_from_int(long n) { return Rational(n); }
  static double real_to_double(const real_type& r) { return r.get_d(); }
};

template <>
struct scalar_traits<std::complex<double>> {
  static constexpr bool exact = false;
  using real_type = double;

  static std::complex<double> zero() { return {0.0, 0.0}; }
  static std::complex<double> one() { return {1.0, 0.0}; }
  static std::complex<double> imag_unit() { return {0.0, 1.0}; }
  static std::complex<double> conjugate(const std::complex<double>& x) { return std::conj(x); }
  static real_type abs_squared(const std::complex<double>& x) { return std::norm(x); }
  static real_type real(const std::complex<double>& x) { return x.real(); }
  static real_type imag(const std::complex<double>& x) { return x.imag(); }
  static bool is_zero(const std::complex<double>& x, double tol = 1e-12) {
    return std::abs(x) <= tol;
  }
  static std::complex<double> to_std(const std::complex<double>& x) { return x; }
  static std::complex<double> from_int(long n) { return {static_cast<double>(n), 0.0}; }
  static std::complex<double> from_real(double r) { return {r, 0.0}; }
  static real_type real_zero() { return 0.0; }
  static real_type real_from_int(long n) { return static_cast<double>(n); }
  static double real_to_double(double r) { return r; }
};

// Default tolerances. Call sites take these as parameters; the values here are
// the single place defaults live.
struct Tolerances {
  double zero = 1e-12;           // scalar comparison-to-zero in float mode
  double fixed_point = 1e-12;    // fixed-point iteration convergence
  double deformation_margin = 1e-6;  // require sup|phi| <= 1 - margin
  double sign_margin = 0.0;      // strict-sign certificate margin
};

}  // namespace crsphere
