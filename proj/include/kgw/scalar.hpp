#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>

namespace kgw {

// Exact scalar used by the algebraic layer. All rank/equality decisions in
// exact mode are made with this type; the lattice layer works in double.
using Rat = boost::multiprecision::mpq_rational;

inline std::string to_string(const Rat& q) { return q.str(); }

inline std::string to_string(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline Rat rat_from_string(const std::string& s) { return Rat(s); }

// Complex numbers over an arbitrary commutative scalar. std::complex is only
// specified for the builtin floating types, so we carry our own.
template <class T>
struct Cx {
  T re{};
  T im{};

  Cx() = default;
  Cx(int r) : re(r), im(0) {}
  Cx(T r) : re(std::move(r)), im(0) {}
  Cx(T r, T i) : re(std::move(r)), im(std::move(i)) {}

  friend Cx operator+(const Cx& a, const Cx& b) { return {T(a.re + b.re), T(a.im + b.im)}; }
  friend Cx operator-(const Cx& a, const Cx& b) { return {T(a.re - b.re), T(a.im - b.im)}; }
  friend Cx operator-(const Cx& a) { return {T(-a.re), T(-a.im)}; }
  friend Cx operator*(const Cx& a, const Cx& b) {
    return {T(a.re * b.re - a.im * b.im), T(a.re * b.im + a.im * b.re)};
  }
  Cx& operator+=(const Cx& b) {
    re += b.re;
    im += b.im;
    return *this;
  }
  Cx& operator-=(const Cx& b) {
    re -= b.re;
    im -= b.im;
    return *this;
  }
  Cx& operator*=(const Cx& b) { return *this = *this * b; }
  friend Cx operator/(const Cx& a, const Cx& b) {
    T d = b.re * b.re + b.im * b.im;
    return {T((a.re * b.re + a.im * b.im) / d), T((a.im * b.re - a.re * b.im) / d)};
  }
  friend bool operator==(const Cx& a, const Cx& b) { return a.re == b.re && a.im == b.im; }
  friend bool operator!=(const Cx& a, const Cx& b) { return !(a == b); }
};

template <class T>
Cx<T> conj(const Cx<T>& z) {
  return {z.re, T(-z.im)};
}

using CRat = Cx<Rat>;
using CDouble = Cx<double>;

// Uniform access to ring operations the templated algebra needs.
template <class S>
struct scalar_traits;

template <>
struct scalar_traits<Rat> {
  static constexpr bool exact = true;
  static Rat zero() { return Rat(0); }
  static Rat one() { return Rat(1); }
  static bool is_zero(const Rat& x) { return x == 0; }
  static Rat conj(const Rat& x) { return x; }
  static double to_double(const Rat& x) { return x.template convert_to<double>(); }
  static double abs2(const Rat& x) {
    double d = to_double(x);
    return d * d;
  }
  static Rat from_int(long n) { return Rat(n); }
};

template <>
struct scalar_traits<double> {
  static constexpr bool exact = false;
  static double zero() { return 0.0; }
  static double one() { return 1.0; }
  static bool is_zero(double x) { return x == 0.0; }
  static double conj(double x) { return x; }
  static double to_double(double x) { return x; }
  static double abs2(double x) { return x * x; }
  static double from_int(long n) { return double(n); }
};

template <class T>
struct scalar_traits<Cx<T>> {
  using base = scalar_traits<T>;
  static constexpr bool exact = base::exact;
  static Cx<T> zero() { return {}; }
  static Cx<T> one() { return {base::one(), base::zero()}; }
  static bool is_zero(const Cx<T>& z) { return base::is_zero(z.re) && base::is_zero(z.im); }
  static Cx<T> conj(const Cx<T>& z) { return kgw::conj(z); }
  static double to_double(const Cx<T>& z) { return base::to_double(z.re); }
  static double abs2(const Cx<T>& z) { return base::abs2(z.re) + base::abs2(z.im); }
  static Cx<T> from_int(long n) { return {base::from_int(n), base::zero()}; }
};

// Zero test honouring the scalar mode: exact scalars compare exactly, floating
// scalars against the supplied tolerance.
template <class S>
bool near_zero(const S& x, double tol) {
  if constexpr (scalar_traits<S>::exact)
    return scalar_traits<S>::is_zero(x);
  else
    return scalar_traits<S>::abs2(x) <= tol * tol;
}

}  // namespace kgw
