#pragma once

// Exact scalar arithmetic: rationals over 64-bit integers (overflow-checked
// through 128-bit intermediates) and rational functions of the formal
// dimension variable N.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace confinv {

// Error with a stable machine-readable code plus a human message.
struct Error : std::runtime_error {
  std::string code;
  Error(std::string c, const std::string& msg)
      : std::runtime_error(c + ": " + msg), code(std::move(c)) {}
};

class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t n) : num_(n), den_(1) {}  // NOLINT: implicit on purpose
  Rational(std::int64_t n, std::int64_t d);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  int sign() const { return num_ > 0 ? 1 : (num_ < 0 ? -1 : 0); }

  Rational operator-() const;
  Rational& operator+=(const Rational& o);
  Rational& operator-=(const Rational& o);
  Rational& operator*=(const Rational& o);
  Rational& operator/=(const Rational& o);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b);

  double to_double() const { return double(num_) / double(den_); }
  std::string str() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
  void reduce();
};

// Polynomial in N with rational coefficients, stored constant term first.
// Trailing zero coefficients are trimmed; the zero polynomial has empty
// storage and degree -1.
class PolyN {
 public:
  PolyN() = default;
  PolyN(Rational c) { if (!c.is_zero()) c_ = {c}; }  // NOLINT
  PolyN(std::int64_t c) : PolyN(Rational(c)) {}      // NOLINT
  explicit PolyN(std::vector<Rational> coeffs) : c_(std::move(coeffs)) { trim(); }

  static PolyN variable();                 // the polynomial N
  static PolyN linear(Rational a, Rational b);  // a + b*N

  int degree() const { return int(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  const std::vector<Rational>& coeffs() const { return c_; }
  Rational coeff(int k) const {
    return k >= 0 && k < int(c_.size()) ? c_[k] : Rational(0);
  }
  Rational leading() const { return c_.empty() ? Rational(0) : c_.back(); }

  PolyN operator-() const;
  friend PolyN operator+(const PolyN& a, const PolyN& b);
  friend PolyN operator-(const PolyN& a, const PolyN& b);
  friend PolyN operator*(const PolyN& a, const PolyN& b);
  friend bool operator==(const PolyN& a, const PolyN& b) { return a.c_ == b.c_; }
  friend bool operator!=(const PolyN& a, const PolyN& b) { return !(a == b); }

  // Division with remainder; divisor must be nonzero.
  static void divmod(const PolyN& a, const PolyN& b, PolyN& q, PolyN& r);

  Rational eval(Rational x) const;
  std::string str() const;  // e.g. "N^2 - 3*N + 2"

 private:
  std::vector<Rational> c_;
  void trim();
};

// Reduced fraction of two PolyN: gcd(num, den) = 1, den has integer
// coefficients with content 1 and positive leading coefficient. The overall
// rational content sits in the numerator.
class RationalFnN {
 public:
  RationalFnN() : num_(0), den_(1) {}
  RationalFnN(PolyN n) : num_(std::move(n)), den_(1) {}  // NOLINT
  RationalFnN(std::int64_t c) : num_(Rational(c)), den_(1) {}  // NOLINT
  RationalFnN(Rational c) : num_(c), den_(1) {}           // NOLINT
  RationalFnN(PolyN n, PolyN d);

  const PolyN& num() const { return num_; }
  const PolyN& den() const { return den_; }

  bool is_zero() const { return num_.is_zero(); }
  // degree of the rational function: deg num - deg den (zero -> INT_MIN/2).
  int degree() const;
  // coefficient ratio of the leading powers; the N->infinity scale factor.
  Rational leading() const;

  RationalFnN operator-() const;
  friend RationalFnN operator+(const RationalFnN& a, const RationalFnN& b);
  friend RationalFnN operator-(const RationalFnN& a, const RationalFnN& b);
  friend RationalFnN operator*(const RationalFnN& a, const RationalFnN& b);
  friend RationalFnN operator/(const RationalFnN& a, const RationalFnN& b);
  friend bool operator==(const RationalFnN& a, const RationalFnN& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const RationalFnN& a, const RationalFnN& b) {
    return !(a == b);
  }

  Rational eval(Rational n) const;  // throws Error("PoleAtN") on zero den
  std::string str() const;

 private:
  PolyN num_, den_;
  void reduce();
};

PolyN poly_gcd(PolyN a, PolyN b);  // monic gcd, or zero if both zero

}  // namespace confinv
