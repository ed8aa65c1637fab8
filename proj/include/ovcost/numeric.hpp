#pragma once

#include <gmpxx.h>
#include <mpfr.h>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ovc {

using Rational = mpq_class;

// A string over a finite alphabet {0, ..., size-1}. Used for both source
// strings and code-symbol strings.
using Word = std::vector<int>;

// Parses a decimal literal ("0.25", "2", "1e-3", "-0.5") into an exact
// rational. Throws InvalidInput on malformed text.
Rational parse_decimal(std::string_view text);

// Exact rational value of a finite double.
Rational rational_from_double(double v);

double to_double(const Rational& q);

// Digits "0110" <-> {0,1,1,0}. Only valid for alphabets of size <= 10.
std::string word_to_digits(std::span<const int> w);
Word digits_to_word(std::string_view digits);

// Fixed-point formatting with a given number of decimals; "-0" is normalized.
std::string format_fixed(double v, int decimals);
// Shortest round-trip representation used in CSV output.
std::string format_real(double v);

// Binary floating point with a per-value precision, backed by MPFR. All
// binary operations round to nearest and produce a result carrying the larger
// of the operand precisions.
class BigFloat {
 public:
  explicit BigFloat(mpfr_prec_t bits = 128);
  BigFloat(double v, mpfr_prec_t bits);
  BigFloat(const Rational& q, mpfr_prec_t bits);
  BigFloat(long v, mpfr_prec_t bits);

  BigFloat(const BigFloat& other);
  BigFloat(BigFloat&& other) noexcept;
  BigFloat& operator=(const BigFloat& other);
  BigFloat& operator=(BigFloat&& other) noexcept;
  ~BigFloat();

  mpfr_prec_t precision() const { return mpfr_get_prec(v_); }
  mpfr_srcptr get() const { return v_; }
  mpfr_ptr get() { return v_; }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  // Exact: every finite binary float is a dyadic rational.
  Rational to_rational() const;
  int sign() const { return mpfr_sgn(v_); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }

  BigFloat& operator+=(const BigFloat& o);
  BigFloat& operator-=(const BigFloat& o);
  BigFloat& operator*=(const BigFloat& o);
  BigFloat& operator/=(const BigFloat& o);

  friend BigFloat operator+(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator-(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator*(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator/(const BigFloat& a, const BigFloat& b);
  friend BigFloat operator-(const BigFloat& a);

  friend int compare(const BigFloat& a, const BigFloat& b) { return mpfr_cmp(a.v_, b.v_); }
  friend bool operator<(const BigFloat& a, const BigFloat& b) { return compare(a, b) < 0; }
  friend bool operator<=(const BigFloat& a, const BigFloat& b) { return compare(a, b) <= 0; }
  friend bool operator>(const BigFloat& a, const BigFloat& b) { return compare(a, b) > 0; }
  friend bool operator>=(const BigFloat& a, const BigFloat& b) { return compare(a, b) >= 0; }
  friend bool operator==(const BigFloat& a, const BigFloat& b) { return compare(a, b) == 0; }

  friend BigFloat abs(const BigFloat& a);
  friend BigFloat exp(const BigFloat& a);
  friend BigFloat log(const BigFloat& a);
  // 2^e scaling, exact.
  friend BigFloat ldexp(const BigFloat& a, long e);

 private:
  mpfr_t v_;
};

// K^x evaluated at the precision of x.
BigFloat pow_base(int K, const BigFloat& x);

}  // namespace ovc
