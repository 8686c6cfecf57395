#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace toricmirror {

using Int = boost::multiprecision::mpz_int;
using Rat = boost::multiprecision::mpq_rational;

inline Int rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline Int rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

/* floor/ceil as Int; mpz division in GMP truncates, so adjust by sign. */
inline Int int_floor_div(const Int& a, const Int& b) {
  Int q = a / b, r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

inline Int rat_floor(const Rat& r) { return int_floor_div(rat_num(r), rat_den(r)); }
inline Int rat_ceil(const Rat& r) { return -rat_floor(-r); }

/* fractional part in [0,1) */
inline Rat rat_fract(const Rat& r) { return r - Rat(rat_floor(r)); }

inline bool rat_is_integer(const Rat& r) { return rat_den(r) == 1; }

inline long rat_to_long(const Rat& r) {
  if (!rat_is_integer(r)) throw std::invalid_argument("rat_to_long: not an integer");
  return static_cast<long>(rat_num(r));
}

inline Rat rat_pow(const Rat& base, long e) {
  if (e == 0) return Rat(1);
  Rat b = e > 0 ? base : Rat(1) / base;
  long n = e > 0 ? e : -e;
  Rat acc(1);
  while (n > 0) {
    if (n & 1) acc *= b;
    b *= b;
    n >>= 1;
  }
  return acc;
}

inline Int int_factorial(long n) {
  Int acc(1);
  for (long i = 2; i <= n; ++i) acc *= i;
  return acc;
}

inline Int int_binomial(long n, long k) {
  if (k < 0 || k > n) return Int(0);
  Int acc(1);
  for (long i = 0; i < k; ++i) {
    acc *= (n - i);
    acc /= (i + 1);
  }
  return acc;
}

inline Int int_lcm(const Int& a, const Int& b) {
  if (a == 0 || b == 0) return Int(0);
  return boost::multiprecision::abs(a / boost::multiprecision::gcd(a, b) * b);
}

/* Bernoulli numbers with B_1 = -1/2, i.e. the expansion of t/(e^t - 1). */
inline std::vector<Rat> bernoulli_numbers(long kmax) {
  std::vector<Rat> B(static_cast<size_t>(kmax) + 1, Rat(0));
  B[0] = 1;
  for (long k = 1; k <= kmax; ++k) {
    Rat s(0);
    for (long j = 0; j < k; ++j) s += Rat(int_binomial(k + 1, j)) * B[static_cast<size_t>(j)];
    B[static_cast<size_t>(k)] = -s / Rat(k + 1);
  }
  return B;
}

/* B_k(h) for the generating function t e^{ht}/(e^t - 1). */
inline Rat bernoulli_polynomial(long k, const Rat& h) {
  static thread_local std::vector<Rat> cache = bernoulli_numbers(2);
  if (static_cast<long>(cache.size()) <= k) cache = bernoulli_numbers(k + 8);
  Rat acc(0);
  for (long j = 0; j <= k; ++j)
    acc += Rat(int_binomial(k, j)) * cache[static_cast<size_t>(j)] * rat_pow(h, k - j);
  return acc;
}

inline std::string rat_to_string(const Rat& r) {
  std::string s = rat_num(r).str();
  if (rat_den(r) != 1) s += "/" + rat_den(r).str();
  return s;
}

}  // namespace toricmirror
