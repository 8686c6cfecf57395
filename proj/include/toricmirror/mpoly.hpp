#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "toricmirror/rational.hpp"

namespace toricmirror {

/* Sparse polynomial in a fixed number of commuting variables over Rat.
 * Invariant: no zero coefficients are stored. */
class MPoly {
 public:
  using Expo = std::vector<int>;

  MPoly() : nvars_(0) {}
  explicit MPoly(int nvars) : nvars_(nvars) {}

  static MPoly constant(int nvars, const Rat& c) {
    MPoly p(nvars);
    if (c != 0) p.terms_[Expo(static_cast<size_t>(nvars), 0)] = c;
    return p;
  }
  static MPoly variable(int nvars, int i, const Rat& c = Rat(1)) {
    MPoly p(nvars);
    if (c != 0) {
      Expo e(static_cast<size_t>(nvars), 0);
      e[static_cast<size_t>(i)] = 1;
      p.terms_[e] = c;
    }
    return p;
  }
  static MPoly monomial(int nvars, const Expo& e, const Rat& c) {
    MPoly p(nvars);
    if (c != 0) p.terms_[e] = c;
    return p;
  }

  int nvars() const { return nvars_; }
  bool is_zero() const { return terms_.empty(); }
  const std::map<Expo, Rat>& terms() const { return terms_; }

  bool is_constant() const {
    if (terms_.empty()) return true;
    return terms_.size() == 1 && total_degree() == 0;
  }
  Rat constant_value() const {
    if (terms_.empty()) return Rat(0);
    if (!is_constant()) throw std::invalid_argument("MPoly: not constant");
    return terms_.begin()->second;
  }

  long total_degree() const {
    long d = -1;
    for (auto& [e, c] : terms_) {
      long s = 0;
      for (int x : e) s += x;
      d = std::max(d, s);
    }
    return d;
  }

  void add_term(const Expo& e, const Rat& c) {
    if (c == 0) return;
    auto it = terms_.find(e);
    if (it == terms_.end()) {
      terms_[e] = c;
    } else {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  MPoly operator-() const {
    MPoly r(nvars_);
    for (auto& [e, c] : terms_) r.terms_[e] = -c;
    return r;
  }
  MPoly& operator+=(const MPoly& o) {
    check_vars(o);
    for (auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  MPoly& operator-=(const MPoly& o) {
    check_vars(o);
    for (auto& [e, c] : o.terms_) add_term(e, -c);
    return *this;
  }
  friend MPoly operator+(MPoly a, const MPoly& b) { return a += b; }
  friend MPoly operator-(MPoly a, const MPoly& b) { return a -= b; }

  friend MPoly operator*(const MPoly& a, const MPoly& b) {
    a.check_vars(b);
    MPoly r(a.nvars_);
    for (auto& [ea, ca] : a.terms_)
      for (auto& [eb, cb] : b.terms_) {
        Expo e = ea;
        for (size_t i = 0; i < e.size(); ++i) e[i] += eb[i];
        r.add_term(e, ca * cb);
      }
    return r;
  }
  MPoly& operator*=(const MPoly& o) { return *this = *this * o; }
  MPoly& operator*=(const Rat& c) {
    if (c == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [e, v] : terms_) v *= c;
    return *this;
  }
  friend MPoly operator*(MPoly a, const Rat& c) { return a *= c; }
  friend MPoly operator*(const Rat& c, MPoly a) { return a *= c; }

  bool operator==(const MPoly& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }
  bool operator!=(const MPoly& o) const { return !(*this == o); }
  bool operator<(const MPoly& o) const {
    if (nvars_ != o.nvars_) return nvars_ < o.nvars_;
    return terms_ < o.terms_;
  }

  /* Exact division: returns quotient iff d divides *this in Rat[x]. */
  std::optional<MPoly> divided_by(const MPoly& d) const {
    check_vars(d);
    if (d.is_zero()) throw std::invalid_argument("MPoly: division by zero");
    MPoly q(nvars_), r = *this;
    auto lt = d.terms_.rbegin();
    while (!r.is_zero()) {
      auto rt = r.terms_.rbegin();
      Expo e = rt->first;
      for (size_t i = 0; i < e.size(); ++i) {
        e[i] -= lt->first[i];
        if (e[i] < 0) return std::nullopt;
      }
      Rat c = rt->second / lt->second;
      q.add_term(e, c);
      r -= MPoly::monomial(nvars_, e, c) * d;
    }
    return q;
  }

  /* gcd of all exponent vectors (the largest monomial dividing every term). */
  Expo monomial_content() const {
    Expo m(static_cast<size_t>(nvars_), 0);
    bool first = true;
    for (auto& [e, c] : terms_) {
      if (first) {
        m = e;
        first = false;
      } else {
        for (size_t i = 0; i < m.size(); ++i) m[i] = std::min(m[i], e[i]);
      }
    }
    if (first) std::fill(m.begin(), m.end(), 0);
    return m;
  }

  /* Rational content: gcd of numerators / lcm of denominators, signed by the
   * lexicographically-leading coefficient so the primitive part is canonical. */
  Rat rational_content() const {
    if (is_zero()) return Rat(0);
    Int g(0), l(1);
    for (auto& [e, c] : terms_) {
      g = boost::multiprecision::gcd(g, rat_num(c));
      l = int_lcm(l, rat_den(c));
    }
    Rat content = Rat(boost::multiprecision::abs(g)) / Rat(l);
    if (terms_.rbegin()->second < 0) content = -content;
    return content;
  }

  MPoly primitive_part() const {
    if (is_zero()) return *this;
    Rat c = rational_content();
    MPoly r = *this;
    for (auto& [e, v] : r.terms_) v /= c;
    return r;
  }

  /* The single variable this polynomial depends on, if at most one. */
  std::optional<int> single_variable() const {
    int var = -1;
    for (auto& [e, c] : terms_)
      for (size_t i = 0; i < e.size(); ++i)
        if (e[i] != 0) {
          if (var == -1) var = static_cast<int>(i);
          else if (var != static_cast<int>(i)) return std::nullopt;
        }
    return var;  // -1 means constant
  }

  long degree_in(int var) const {
    long d = -1;
    for (auto& [e, c] : terms_) d = std::max<long>(d, e[static_cast<size_t>(var)]);
    return d;
  }

  MPoly derivative(int var) const {
    MPoly r(nvars_);
    for (auto& [e, c] : terms_) {
      int k = e[static_cast<size_t>(var)];
      if (k == 0) continue;
      Expo e2 = e;
      e2[static_cast<size_t>(var)] -= 1;
      r.add_term(e2, c * Rat(k));
    }
    return r;
  }

  /* Substitute each variable by the given polynomial (all over the same ring). */
  MPoly substitute(const std::vector<MPoly>& images) const {
    if (images.size() != static_cast<size_t>(nvars_))
      throw std::invalid_argument("MPoly::substitute: arity mismatch");
    int out_vars = images.empty() ? 0 : images[0].nvars();
    MPoly r(out_vars);
    for (auto& [e, c] : terms_) {
      MPoly term = MPoly::constant(out_vars, c);
      for (size_t i = 0; i < e.size(); ++i)
        for (int k = 0; k < e[i]; ++k) term *= images[i];
      r += term;
    }
    return r;
  }

  Rat evaluate(const std::vector<Rat>& point) const {
    if (point.size() != static_cast<size_t>(nvars_))
      throw std::invalid_argument("MPoly::evaluate: arity mismatch");
    Rat r(0);
    for (auto& [e, c] : terms_) {
      Rat t = c;
      for (size_t i = 0; i < e.size(); ++i) t *= rat_pow(point[i], e[i]);
      r += t;
    }
    return r;
  }

  bool is_homogeneous(long deg) const {
    for (auto& [e, c] : terms_) {
      long s = 0;
      for (int x : e) s += x;
      if (s != deg) return false;
    }
    return true;
  }

  /* Decomposition into total-degree homogeneous components, keyed by degree. */
  std::map<long, MPoly> homogeneous_components() const {
    std::map<long, MPoly> out;
    for (auto& [e, c] : terms_) {
      long s = 0;
      for (int x : e) s += x;
      auto it = out.find(s);
      if (it == out.end()) it = out.emplace(s, MPoly(nvars_)).first;
      it->second.add_term(e, c);
    }
    return out;
  }

  std::string to_string(const std::vector<std::string>& names) const {
    if (is_zero()) return "0";
    std::string s;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto& [e, c] = *it;
      std::string term;
      bool unit_coeff = (c == 1 || c == -1);
      bool has_vars = false;
      for (size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (has_vars) term += "*";
        term += names[i];
        if (e[i] != 1) term += "^" + std::to_string(e[i]);
        has_vars = true;
      }
      std::string coeff;
      if (!has_vars || !unit_coeff) {
        coeff = rat_to_string(c < 0 ? -c : c);
        if (has_vars) coeff += "*";
      }
      s += (c < 0 ? "-" : (s.empty() ? "" : "+")) + coeff + term;
    }
    return s;
  }

 private:
  void check_vars(const MPoly& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("MPoly: variable count mismatch");
  }

  int nvars_;
  std::map<Expo, Rat> terms_;
};

/* gcd helper: sound but deliberately partial — always returns an exact common
 * divisor, not necessarily the greatest one in hard multivariate cases. */
inline MPoly mpoly_gcd(const MPoly& a, const MPoly& b) {
  if (a.is_zero()) return b.primitive_part();
  if (b.is_zero()) return a.primitive_part();
  int n = a.nvars();

  MPoly::Expo mono = a.monomial_content();
  {
    MPoly::Expo mb = b.monomial_content();
    for (size_t i = 0; i < mono.size(); ++i) mono[i] = std::min(mono[i], mb[i]);
  }
  MPoly m = MPoly::monomial(n, mono, Rat(1));
  MPoly pa = *a.divided_by(m), pb = *b.divided_by(m);
  pa = pa.primitive_part();
  pb = pb.primitive_part();

  auto va = pa.single_variable(), vb = pb.single_variable();
  if (va && vb && (*va == -1 || *vb == -1 || *va == *vb)) {
    int var = *va == -1 ? *vb : *va;
    if (var == -1) return m;
    MPoly x = pa, y = pb;
    while (!y.is_zero()) {
      // univariate remainder in `var` over Rat
      MPoly r = x;
      long dy = y.degree_in(var);
      Rat lc;
      MPoly::Expo ley(static_cast<size_t>(n), 0);
      ley[static_cast<size_t>(var)] = static_cast<int>(dy);
      for (auto& [e, c] : y.terms())
        if (e == ley) lc = c;
      while (!r.is_zero() && r.degree_in(var) >= dy) {
        long dr = r.degree_in(var);
        Rat rc;
        MPoly::Expo ler(static_cast<size_t>(n), 0);
        ler[static_cast<size_t>(var)] = static_cast<int>(dr);
        for (auto& [e, c] : r.terms())
          if (e == ler) rc = c;
        MPoly::Expo shift(static_cast<size_t>(n), 0);
        shift[static_cast<size_t>(var)] = static_cast<int>(dr - dy);
        r -= MPoly::monomial(n, shift, rc / lc) * y;
      }
      x = y;
      y = r;
    }
    return m * x.primitive_part();
  }

  if (auto q = pb.divided_by(pa)) return m * pa;
  if (auto q = pa.divided_by(pb)) return m * pb;
  return m;
}

/* Element of the fraction field of Rat[chi_1..chi_n]; kept lazily normalized,
 * equality decided by cross-multiplication. */
class EquivScalar {
 public:
  EquivScalar() : num_(0), den_(0) {}
  explicit EquivScalar(int nvars)
      : num_(MPoly(nvars)), den_(MPoly::constant(nvars, Rat(1))) {}
  EquivScalar(MPoly num, MPoly den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw std::invalid_argument("EquivScalar: zero denominator");
    reduce();
  }
  explicit EquivScalar(const MPoly& num)
      : num_(num), den_(MPoly::constant(num.nvars(), Rat(1))) {}
  static EquivScalar constant(int nvars, const Rat& c) {
    return EquivScalar(MPoly::constant(nvars, c));
  }

  const MPoly& num() const { return num_; }
  const MPoly& den() const { return den_; }
  int nvars() const { return num_.nvars(); }
  bool is_zero() const { return num_.is_zero(); }

  bool operator==(const EquivScalar& o) const { return (num_ * o.den_) == (o.num_ * den_); }
  bool operator!=(const EquivScalar& o) const { return !(*this == o); }

  EquivScalar operator-() const { return raw(-num_, den_); }
  friend EquivScalar operator+(const EquivScalar& a, const EquivScalar& b) {
    if (a.den_ == b.den_) return EquivScalar(a.num_ + b.num_, a.den_);
    return EquivScalar(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend EquivScalar operator-(const EquivScalar& a, const EquivScalar& b) {
    if (a.den_ == b.den_) return EquivScalar(a.num_ - b.num_, a.den_);
    return EquivScalar(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
  }
  friend EquivScalar operator*(const EquivScalar& a, const EquivScalar& b) {
    return EquivScalar(a.num_ * b.num_, a.den_ * b.den_);
  }
  friend EquivScalar operator/(const EquivScalar& a, const EquivScalar& b) {
    if (b.is_zero()) throw std::invalid_argument("EquivScalar: division by zero");
    return EquivScalar(a.num_ * b.den_, a.den_ * b.num_);
  }
  EquivScalar& operator+=(const EquivScalar& o) { return *this = *this + o; }
  EquivScalar& operator-=(const EquivScalar& o) { return *this = *this - o; }
  EquivScalar& operator*=(const EquivScalar& o) { return *this = *this * o; }
  EquivScalar& operator/=(const EquivScalar& o) { return *this = *this / o; }

  /* True (with the reduced polynomial) iff the fraction is a polynomial. */
  std::optional<MPoly> as_polynomial() const { return num_.divided_by(den_); }

  bool is_constant() const {
    auto p = as_polynomial();
    return p && p->is_constant();
  }
  Rat constant_value() const {
    auto p = as_polynomial();
    if (!p || !p->is_constant()) throw std::invalid_argument("EquivScalar: not constant");
    return p->constant_value();
  }

  Rat evaluate(const std::vector<Rat>& point) const {
    Rat d = den_.evaluate(point);
    if (d == 0) throw std::invalid_argument("EquivScalar: denominator vanishes at point");
    return num_.evaluate(point) / d;
  }

  std::string to_string(const std::vector<std::string>& names) const {
    if (num_.is_zero()) return "0";
    if (den_.is_constant() && den_.constant_value() == 1) return num_.to_string(names);
    return "(" + num_.to_string(names) + ")/(" + den_.to_string(names) + ")";
  }

 private:
  static EquivScalar raw(MPoly n, MPoly d) {
    EquivScalar s;
    s.num_ = std::move(n);
    s.den_ = std::move(d);
    return s;
  }
  void reduce() {
    if (num_.is_zero()) {
      den_ = MPoly::constant(den_.nvars(), Rat(1));
      return;
    }
    MPoly g = mpoly_gcd(num_, den_);
    if (!(g.is_constant() && g.constant_value() == 1)) {
      num_ = *num_.divided_by(g);
      den_ = *den_.divided_by(g);
    }
    Rat c = den_.rational_content();
    num_ *= Rat(1) / c;
    den_ *= Rat(1) / c;
  }

  MPoly num_, den_;
};

}  // namespace toricmirror
