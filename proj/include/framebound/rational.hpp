#pragma once

// Exact rational scalar used for lattice membership and annihilator bookkeeping.
// 64-bit numerator/denominator with 128-bit intermediates; overflow throws.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <compare>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace framebound {

class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT(implicit)
  Rational(std::int64_t n, std::int64_t d) { assign(n, d); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  explicit operator double() const { return to_double(); }

  bool is_integer() const { return den_ == 1; }
  bool is_zero() const { return num_ == 0; }

  /// Nearest-integer floor, exact.
  std::int64_t floor() const {
    std::int64_t q = num_ / den_;
    if ((num_ % den_ != 0) && (num_ < 0)) --q;
    return q;
  }

  /// Best rational approximation of x with |x - p/q| <= tol, denominators up to max_den.
  /// Throws std::domain_error when no such approximation exists.
  static Rational from_double(double x, double tol = 1e-12, std::int64_t max_den = 1'000'000'000) {
    if (!std::isfinite(x)) throw std::domain_error("non-finite value has no rational form");
    // Continued-fraction convergents.
    long double v = x;
    __int128 h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    for (int it = 0; it < 64; ++it) {
      long double a = std::floor(v);
      __int128 ai = static_cast<__int128>(a);
      __int128 h2 = ai * h1 + h0;
      __int128 k2 = ai * k1 + k0;
      if (k2 > max_den) break;
      h0 = h1; h1 = h2; k0 = k1; k1 = k2;
      if (std::fabs(static_cast<long double>(h1) / static_cast<long double>(k1) - x) <= tol)
        return Rational(static_cast<std::int64_t>(h1), static_cast<std::int64_t>(k1));
      long double frac = v - a;
      if (frac == 0) break;
      v = 1.0L / frac;
    }
    throw std::domain_error("value " + std::to_string(x) + " has no small rational form");
  }

  /// Parses "p", "p/q" or a decimal literal ("0.25").
  static Rational parse(std::string_view text);

  Rational operator-() const { return from128(-static_cast<__int128>(num_), den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from128(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                   static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from128(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return from128(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    return l <=> r;
  }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    os << r.num_;
    if (r.den_ != 1) os << '/' << r.den_;
    return os;
  }
  std::string str() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

 private:
  static Rational from128(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("rational with zero denominator");
    if (d < 0) { n = -n; d = -d; }
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    constexpr __int128 lim = static_cast<__int128>(INT64_MAX);
    if (n > lim || n < -lim || d > lim) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }
  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) { __int128 t = a % b; a = b; b = t; }
    return a == 0 ? 1 : a;
  }
  void assign(std::int64_t n, std::int64_t d) { *this = from128(n, d); }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational abs(const Rational& r) { return r < Rational(0) ? -r : r; }

}  // namespace framebound

namespace Eigen {
template <>
struct NumTraits<framebound::Rational> : GenericNumTraits<framebound::Rational> {
  using Real = framebound::Rational;
  using NonInteger = framebound::Rational;
  using Literal = framebound::Rational;
  using Nested = framebound::Rational;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 8,
    MulCost = 8
  };
  static inline int digits10() { return 0; }
};
}  // namespace Eigen
