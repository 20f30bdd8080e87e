#pragma once

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace topocb {

/// Exact rational number with a distinguished +infinity value.
///
/// All finite values are kept in canonical form (gcd 1, positive
/// denominator). Infinity absorbs addition and multiplication by positive
/// values and dominates every finite value in comparisons. Infinity is only
/// produced where set distances degenerate (distance to the empty set); the
/// engine never divides by it or multiplies it by zero.
class Rational {
 public:
  Rational() : q_(0) {}
  Rational(long n) : q_(n) {}
  Rational(long n, long d) {
    if (d == 0) throw std::invalid_argument("rational with zero denominator");
    q_ = mpq_class(n, d);
    q_.canonicalize();
  }
  explicit Rational(const mpq_class& q) : q_(q) { q_.canonicalize(); }
  explicit Rational(const mpz_class& n) : q_(n) {}

  static Rational infinity() {
    Rational r;
    r.inf_ = true;
    return r;
  }

  /// Parses "p/q" or a bare integer string. Throws std::invalid_argument on
  /// anything else (decimals, zero denominators, junk).
  static Rational parse(const std::string& text);

  bool isInfinite() const { return inf_; }
  bool isZero() const { return !inf_ && q_ == 0; }
  int sign() const { return inf_ ? 1 : sgn(q_); }

  const mpq_class& value() const {
    if (inf_) throw std::logic_error("value() on infinite rational");
    return q_;
  }
  mpz_class numerator() const { return value().get_num(); }
  mpz_class denominator() const { return value().get_den(); }

  Rational operator+(const Rational& o) const {
    if (inf_ || o.inf_) return infinity();
    return Rational(q_ + o.q_);
  }
  Rational operator-(const Rational& o) const {
    if (inf_ || o.inf_) throw std::logic_error("subtraction with infinity");
    return Rational(q_ - o.q_);
  }
  Rational operator*(const Rational& o) const {
    if (inf_ || o.inf_) {
      if (sign() <= 0 || o.sign() <= 0)
        throw std::logic_error("infinite product with non-positive factor");
      return infinity();
    }
    return Rational(q_ * o.q_);
  }
  Rational operator/(const Rational& o) const {
    if (inf_ || o.inf_) throw std::logic_error("division with infinity");
    if (o.q_ == 0) throw std::invalid_argument("division by zero");
    return Rational(q_ / o.q_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }
  Rational& operator*=(const Rational& o) { return *this = *this * o; }
  Rational& operator/=(const Rational& o) { return *this = *this / o; }

  bool operator==(const Rational& o) const {
    if (inf_ != o.inf_) return false;
    return inf_ || q_ == o.q_;
  }
  bool operator!=(const Rational& o) const { return !(*this == o); }
  bool operator<(const Rational& o) const {
    if (inf_) return false;
    if (o.inf_) return true;
    return q_ < o.q_;
  }
  bool operator<=(const Rational& o) const { return !(o < *this); }
  bool operator>(const Rational& o) const { return o < *this; }
  bool operator>=(const Rational& o) const { return !(*this < o); }

  /// Canonical text form: "p/q", or "p" when the denominator is 1. Infinity
  /// renders as "inf".
  std::string str() const;

 private:
  mpq_class q_;
  bool inf_ = false;
};

inline Rational min(const Rational& a, const Rational& b) { return a < b ? a : b; }
inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

/// 2^-n as an exact rational, n >= 0.
Rational pow2inv(int n);

}  // namespace topocb
