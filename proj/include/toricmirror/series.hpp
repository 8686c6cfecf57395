#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "toricmirror/rational.hpp"

namespace toricmirror {

/* Monomial exponent in the deformation variables: Novikov classes (in a fixed
 * lattice basis), divisor-direction parameters t_i, and twisted-sector y_k. */
struct SeriesKey {
  std::vector<Int> qexp;
  std::vector<int> texp;
  std::vector<int> yexp;

  bool operator==(const SeriesKey& o) const {
    return qexp == o.qexp && texp == o.texp && yexp == o.yexp;
  }
  bool operator!=(const SeriesKey& o) const { return !(*this == o); }
  bool operator<(const SeriesKey& o) const {
    if (qexp != o.qexp) return qexp < o.qexp;
    if (texp != o.texp) return texp < o.texp;
    return yexp < o.yexp;
  }

  SeriesKey operator+(const SeriesKey& o) const {
    if (qexp.size() != o.qexp.size() || texp.size() != o.texp.size() ||
        yexp.size() != o.yexp.size())
      throw std::invalid_argument("SeriesKey: shape mismatch");
    SeriesKey r = *this;
    for (size_t i = 0; i < r.qexp.size(); ++i) r.qexp[i] += o.qexp[i];
    for (size_t i = 0; i < r.texp.size(); ++i) r.texp[i] += o.texp[i];
    for (size_t i = 0; i < r.yexp.size(); ++i) r.yexp[i] += o.yexp[i];
    return r;
  }

  bool is_origin() const {
    for (auto& q : qexp)
      if (q != 0) return false;
    for (int t : texp)
      if (t != 0) return false;
    for (int y : yexp)
      if (y != 0) return false;
    return true;
  }

  long torder() const { return std::accumulate(texp.begin(), texp.end(), 0L); }
  long yorder() const { return std::accumulate(yexp.begin(), yexp.end(), 0L); }

  static SeriesKey origin(size_t nq, size_t nt, size_t ny) {
    return SeriesKey{std::vector<Int>(nq, Int(0)), std::vector<int>(nt, 0),
                     std::vector<int>(ny, 0)};
  }
};

/* Truncation profile. `ample` is an integral functional on Novikov exponents
 * that is positive on every nonzero effective class; qorder(key) is the degree
 * it assigns. */
struct Profile {
  long qdeg = 0;
  long tord = 0;
  long yord = 0;
  std::vector<Int> ample;

  long qorder(const SeriesKey& k) const {
    if (k.qexp.size() != ample.size())
      throw std::invalid_argument("Profile: Novikov shape mismatch");
    Int s(0);
    for (size_t i = 0; i < ample.size(); ++i) s += ample[i] * k.qexp[i];
    if (s < 0 || s > Int(1) << 40) throw std::invalid_argument("Profile: degree out of range");
    return static_cast<long>(s);
  }
  long shell(const SeriesKey& k) const { return qorder(k) + k.torder() + k.yorder(); }
  bool within(const SeriesKey& k) const {
    return qorder(k) <= qdeg && k.torder() <= tord && k.yorder() <= yord;
  }
};

namespace series_detail {
template <typename C>
auto coeff_is_zero(const C& c, int) -> decltype(c.is_zero()) {
  return c.is_zero();
}
template <typename C>
bool coeff_is_zero(const C& c, long) {
  return c == C(0);
}
template <typename C>
bool coeff_is_zero(const C& c) {
  return coeff_is_zero(c, 0);
}
}  // namespace series_detail

/* Truncated formal series with coefficients in C, supported within a profile. */
template <typename C>
class TruncSeries {
 public:
  TruncSeries() = default;
  explicit TruncSeries(Profile profile) : profile_(std::move(profile)) {}

  const Profile& profile() const { return profile_; }
  const std::map<SeriesKey, C>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add(const SeriesKey& k, const C& c) {
    if (!profile_.within(k) || series_detail::coeff_is_zero(c)) return;
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(k, c);
    } else {
      it->second = it->second + c;
      if (series_detail::coeff_is_zero(it->second)) terms_.erase(it);
    }
  }
  void set(const SeriesKey& k, const C& c) {
    terms_.erase(k);
    add(k, c);
  }
  const C* coefficient(const SeriesKey& k) const {
    auto it = terms_.find(k);
    return it == terms_.end() ? nullptr : &it->second;
  }

  TruncSeries operator-() const {
    TruncSeries r(profile_);
    for (auto& [k, c] : terms_) r.terms_.emplace(k, -c);
    return r;
  }
  TruncSeries& operator+=(const TruncSeries& o) {
    for (auto& [k, c] : o.terms_) add(k, c);
    return *this;
  }
  TruncSeries& operator-=(const TruncSeries& o) {
    for (auto& [k, c] : o.terms_) add(k, -c);
    return *this;
  }
  friend TruncSeries operator+(TruncSeries a, const TruncSeries& b) { return a += b; }
  friend TruncSeries operator-(TruncSeries a, const TruncSeries& b) { return a -= b; }

  friend TruncSeries operator*(const TruncSeries& a, const TruncSeries& b) {
    TruncSeries r(a.profile_);
    for (auto& [ka, ca] : a.terms_)
      for (auto& [kb, cb] : b.terms_) {
        SeriesKey k = ka + kb;
        if (!r.profile_.within(k)) continue;
        r.add(k, ca * cb);
      }
    return r;
  }
  TruncSeries& operator*=(const TruncSeries& o) { return *this = *this * o; }

  TruncSeries scaled(const C& c) const {
    TruncSeries r(profile_);
    for (auto& [k, v] : terms_) r.add(k, v * c);
    return r;
  }

  template <typename F>
  auto transform(F fn) const -> TruncSeries<decltype(fn(std::declval<const C&>()))> {
    using D = decltype(fn(std::declval<const C&>()));
    TruncSeries<D> r(profile_);
    for (auto& [k, v] : terms_) r.add(k, fn(v));
    return r;
  }

  /* Restrict to a (smaller) profile. */
  TruncSeries truncated(const Profile& p) const {
    TruncSeries r(p);
    for (auto& [k, v] : terms_) r.add(k, v);
    return r;
  }

  bool operator==(const TruncSeries& o) const { return terms_ == o.terms_; }
  bool operator!=(const TruncSeries& o) const { return !(*this == o); }

 private:
  Profile profile_;
  std::map<SeriesKey, C> terms_;
};

template <typename C>
TruncSeries<C> series_mul(const TruncSeries<C>& a, const TruncSeries<C>& b) {
  return a * b;
}

/* exp of a series with no constant term; make_const embeds Rat into C.
 * Key shape (nq, nt, ny) must match the argument's keys. */
template <typename C, typename MakeConst>
TruncSeries<C> series_exp(const TruncSeries<C>& arg, size_t nq, size_t nt, size_t ny,
                          MakeConst make_const) {
  for (auto& [k, c] : arg.terms())
    if (k.is_origin()) throw std::invalid_argument("series_exp: constant term present");
  const Profile& p = arg.profile();
  TruncSeries<C> result(p);
  result.add(SeriesKey::origin(nq, nt, ny), make_const(Rat(1)));
  TruncSeries<C> power = result;
  long max_shell = p.qdeg + p.tord + p.yord;
  Rat factorial(1);
  for (long n = 1; n <= max_shell; ++n) {
    power = power * arg;
    if (power.is_zero()) break;
    factorial *= Rat(n);
    result += power.scaled(make_const(Rat(1) / factorial));
  }
  return result;
}

}  // namespace toricmirror
