#include "confinv/rational.hpp"

#include <numeric>
#include <sstream>

namespace confinv {

namespace {

using i64 = std::int64_t;
using i128 = __int128;

i64 checked(i128 v) {
  if (v > i128(INT64_MAX) || v < i128(INT64_MIN))
    throw Error("Overflow", "rational arithmetic exceeds 64-bit range");
  return i64(v);
}

i64 gcd64(i64 a, i64 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  return std::gcd(a, b);
}

}  // namespace

Rational::Rational(i64 n, i64 d) : num_(n), den_(d) {
  if (d == 0) throw Error("DivideByZero", "rational with zero denominator");
  reduce();
}

void Rational::reduce() {
  if (den_ < 0) { num_ = -num_; den_ = -den_; }
  if (num_ == 0) { den_ = 1; return; }
  i64 g = gcd64(num_, den_);
  num_ /= g;
  den_ /= g;
}

Rational Rational::operator-() const {
  Rational r;
  r.num_ = -num_;
  r.den_ = den_;
  return r;
}

Rational& Rational::operator+=(const Rational& o) {
  i128 n = i128(num_) * o.den_ + i128(o.num_) * den_;
  i128 d = i128(den_) * o.den_;
  // reduce in 128 bits before the range check so transient magnitudes shrink
  i128 x = n < 0 ? -n : n, y = d;
  while (y) { i128 t = x % y; x = y; y = t; }
  if (x == 0) x = 1;
  Rational r;
  r.num_ = checked(n / x);
  r.den_ = checked(d / x);
  r.reduce();
  *this = r;
  return *this;
}

Rational& Rational::operator-=(const Rational& o) { return *this += -o; }

Rational& Rational::operator*=(const Rational& o) {
  i64 g1 = gcd64(num_, o.den_);
  i64 g2 = gcd64(o.num_, den_);
  i128 n = i128(num_ / g1) * (o.num_ / g2);
  i128 d = i128(den_ / g2) * (o.den_ / g1);
  Rational r;
  r.num_ = checked(n);
  r.den_ = checked(d);
  r.reduce();
  *this = r;
  return *this;
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.num_ == 0) throw Error("DivideByZero", "division by zero rational");
  Rational inv;
  inv.num_ = o.den_;
  inv.den_ = o.num_;
  inv.reduce();
  return *this *= inv;
}

bool operator<(const Rational& a, const Rational& b) {
  return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

// ---- PolyN ----

void PolyN::trim() {
  while (!c_.empty() && c_.back().is_zero()) c_.pop_back();
}

PolyN PolyN::variable() {
  return PolyN(std::vector<Rational>{Rational(0), Rational(1)});
}

PolyN PolyN::linear(Rational a, Rational b) {
  return PolyN(std::vector<Rational>{a, b});
}

PolyN PolyN::operator-() const {
  PolyN r = *this;
  for (auto& c : r.c_) c = -c;
  return r;
}

PolyN operator+(const PolyN& a, const PolyN& b) {
  std::vector<Rational> c(std::max(a.c_.size(), b.c_.size()));
  for (size_t i = 0; i < c.size(); ++i) {
    if (i < a.c_.size()) c[i] += a.c_[i];
    if (i < b.c_.size()) c[i] += b.c_[i];
  }
  return PolyN(std::move(c));
}

PolyN operator-(const PolyN& a, const PolyN& b) { return a + (-b); }

PolyN operator*(const PolyN& a, const PolyN& b) {
  if (a.is_zero() || b.is_zero()) return PolyN();
  std::vector<Rational> c(a.c_.size() + b.c_.size() - 1);
  for (size_t i = 0; i < a.c_.size(); ++i)
    for (size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
  return PolyN(std::move(c));
}

void PolyN::divmod(const PolyN& a, const PolyN& b, PolyN& q, PolyN& r) {
  if (b.is_zero()) throw Error("DivideByZero", "polynomial division by zero");
  q = PolyN();
  r = a;
  while (!r.is_zero() && r.degree() >= b.degree()) {
    int k = r.degree() - b.degree();
    Rational f = r.leading() / b.leading();
    std::vector<Rational> mono(k + 1);
    mono[k] = f;
    PolyN m(std::move(mono));
    q = q + m;
    r = r - m * b;
  }
}

Rational PolyN::eval(Rational x) const {
  Rational acc(0);
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::string PolyN::str() const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (int k = degree(); k >= 0; --k) {
    Rational c = coeff(k);
    if (c.is_zero()) continue;
    if (!first) os << (c.sign() > 0 ? " + " : " - ");
    else if (c.sign() < 0) os << "-";
    Rational a = c.sign() < 0 ? -c : c;
    bool unit = a.is_one() && k > 0;
    if (!unit) os << a.str();
    if (k > 0) {
      if (!unit) os << "*";
      os << "N";
      if (k > 1) os << "^" << k;
    }
    first = false;
  }
  return os.str();
}

PolyN poly_gcd(PolyN a, PolyN b) {
  while (!b.is_zero()) {
    PolyN q, r;
    PolyN::divmod(a, b, q, r);
    a = b;
    b = r;
  }
  if (a.is_zero()) return a;
  // make monic
  Rational inv = Rational(1) / a.leading();
  std::vector<Rational> c = a.coeffs();
  for (auto& x : c) x *= inv;
  return PolyN(std::move(c));
}

// ---- RationalFnN ----

RationalFnN::RationalFnN(PolyN n, PolyN d) : num_(std::move(n)), den_(std::move(d)) {
  if (den_.is_zero()) throw Error("DivideByZero", "rational function with zero denominator");
  reduce();
}

void RationalFnN::reduce() {
  if (num_.is_zero()) { den_ = PolyN(Rational(1)); return; }
  PolyN g = poly_gcd(num_, den_);
  if (g.degree() > 0) {
    PolyN q, r;
    PolyN::divmod(num_, g, q, r);
    num_ = q;
    PolyN::divmod(den_, g, q, r);
    den_ = q;
  }
  // scale: den integer, content 1, positive leading
  std::int64_t lcm = 1;
  for (const auto& c : den_.coeffs()) lcm = std::lcm(lcm, c.den());
  std::int64_t g2 = 0;
  for (const auto& c : den_.coeffs()) {
    std::int64_t v = c.num() * (lcm / c.den());
    g2 = std::gcd(g2, v < 0 ? -v : v);
  }
  Rational scale(lcm, g2 == 0 ? 1 : g2);
  if (den_.leading().sign() * scale.sign() < 0) scale = -scale;
  std::vector<Rational> dn = den_.coeffs(), nm = num_.coeffs();
  for (auto& c : dn) c *= scale;
  for (auto& c : nm) c *= scale;
  den_ = PolyN(std::move(dn));
  num_ = PolyN(std::move(nm));
}

int RationalFnN::degree() const {
  if (num_.is_zero()) return INT32_MIN / 2;
  return num_.degree() - den_.degree();
}

Rational RationalFnN::leading() const {
  if (num_.is_zero()) return Rational(0);
  return num_.leading() / den_.leading();
}

RationalFnN RationalFnN::operator-() const {
  RationalFnN r = *this;
  r.num_ = -r.num_;
  return r;
}

RationalFnN operator+(const RationalFnN& a, const RationalFnN& b) {
  return RationalFnN(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
}

RationalFnN operator-(const RationalFnN& a, const RationalFnN& b) { return a + (-b); }

RationalFnN operator*(const RationalFnN& a, const RationalFnN& b) {
  return RationalFnN(a.num_ * b.num_, a.den_ * b.den_);
}

RationalFnN operator/(const RationalFnN& a, const RationalFnN& b) {
  if (b.is_zero()) throw Error("DivideByZero", "division by zero rational function");
  return RationalFnN(a.num_ * b.den_, a.den_ * b.num_);
}

Rational RationalFnN::eval(Rational n) const {
  Rational d = den_.eval(n);
  if (d.is_zero()) throw Error("PoleAtN", "rational function has a pole at N=" + n.str());
  return num_.eval(n) / d;
}

std::string RationalFnN::str() const {
  if (den_ == PolyN(Rational(1))) return num_.str();
  return "(" + num_.str() + ")/(" + den_.str() + ")";
}

}  // namespace confinv
