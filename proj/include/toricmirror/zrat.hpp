#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "toricmirror/mpoly.hpp"
#include "toricmirror/rational.hpp"

namespace toricmirror {

/* Polynomial in z with MPoly coefficients. Invariant: no zero coefficients. */
class ZPoly {
 public:
  ZPoly() : nvars_(0) {}
  explicit ZPoly(int nvars) : nvars_(nvars) {}

  static ZPoly constant(int nvars, const Rat& c) {
    return from_mpoly(MPoly::constant(nvars, c));
  }
  static ZPoly from_mpoly(const MPoly& p) {
    ZPoly r(p.nvars());
    if (!p.is_zero()) r.coeffs_[0] = p;
    return r;
  }
  static ZPoly z_power(int nvars, long k, const Rat& c = Rat(1)) {
    ZPoly r(nvars);
    if (c != 0) r.coeffs_[k] = MPoly::constant(nvars, c);
    return r;
  }
  static ZPoly term(long k, const MPoly& p) {
    ZPoly r(p.nvars());
    if (!p.is_zero()) r.coeffs_[k] = p;
    return r;
  }

  int nvars() const { return nvars_; }
  bool is_zero() const { return coeffs_.empty(); }
  const std::map<long, MPoly>& coeffs() const { return coeffs_; }

  long degree() const { return coeffs_.empty() ? -1 : coeffs_.rbegin()->first; }
  long low_degree() const { return coeffs_.empty() ? 0 : coeffs_.begin()->first; }
  MPoly coefficient(long k) const {
    auto it = coeffs_.find(k);
    return it == coeffs_.end() ? MPoly(nvars_) : it->second;
  }
  MPoly leading() const {
    if (coeffs_.empty()) return MPoly(nvars_);
    return coeffs_.rbegin()->second;
  }

  void add_term(long k, const MPoly& p) {
    if (p.is_zero()) return;
    auto it = coeffs_.find(k);
    if (it == coeffs_.end()) {
      coeffs_[k] = p;
    } else {
      it->second += p;
      if (it->second.is_zero()) coeffs_.erase(it);
    }
  }

  ZPoly operator-() const {
    ZPoly r(nvars_);
    for (auto& [k, p] : coeffs_) r.coeffs_[k] = -p;
    return r;
  }
  ZPoly& operator+=(const ZPoly& o) {
    check_vars(o);
    for (auto& [k, p] : o.coeffs_) add_term(k, p);
    return *this;
  }
  ZPoly& operator-=(const ZPoly& o) {
    check_vars(o);
    for (auto& [k, p] : o.coeffs_) add_term(k, -p);
    return *this;
  }
  friend ZPoly operator+(ZPoly a, const ZPoly& b) { return a += b; }
  friend ZPoly operator-(ZPoly a, const ZPoly& b) { return a -= b; }
  friend ZPoly operator*(const ZPoly& a, const ZPoly& b) {
    a.check_vars(b);
    ZPoly r(a.nvars_);
    for (auto& [ka, pa] : a.coeffs_)
      for (auto& [kb, pb] : b.coeffs_) r.add_term(ka + kb, pa * pb);
    return r;
  }
  ZPoly& operator*=(const ZPoly& o) { return *this = *this * o; }
  friend ZPoly operator*(const ZPoly& a, const MPoly& p) { return a * ZPoly::from_mpoly(p); }
  friend ZPoly operator*(const MPoly& p, const ZPoly& a) { return a * ZPoly::from_mpoly(p); }
  ZPoly& operator*=(const Rat& c) {
    if (c == 0) {
      coeffs_.clear();
      return *this;
    }
    for (auto& [k, p] : coeffs_) p *= c;
    return *this;
  }
  friend ZPoly operator*(ZPoly a, const Rat& c) { return a *= c; }
  friend ZPoly operator*(const Rat& c, ZPoly a) { return a *= c; }

  bool operator==(const ZPoly& o) const { return nvars_ == o.nvars_ && coeffs_ == o.coeffs_; }
  bool operator!=(const ZPoly& o) const { return !(*this == o); }

  ZPoly shifted(long k) const {
    ZPoly r(nvars_);
    for (auto& [d, p] : coeffs_) r.coeffs_[d + k] = p;
    return r;
  }

  /* z -> -z */
  ZPoly negate_z() const {
    ZPoly r(nvars_);
    for (auto& [k, p] : coeffs_) r.coeffs_[k] = (k % 2 == 0) ? p : -p;
    return r;
  }

  ZPoly derivative_z() const {
    ZPoly r(nvars_);
    for (auto& [k, p] : coeffs_) {
      if (k == 0) continue;
      r.add_term(k - 1, p * Rat(k));
    }
    return r;
  }

  /* Apply an MPoly substitution to every coefficient. */
  ZPoly substitute_chi(const std::vector<MPoly>& images) const {
    int out_vars = images.empty() ? 0 : images[0].nvars();
    ZPoly r(out_vars);
    for (auto& [k, p] : coeffs_) r.add_term(k, p.substitute(images));
    return r;
  }

  ZPoly evaluate_chi(const std::vector<Rat>& point) const {
    ZPoly r(0);
    for (auto& [k, p] : coeffs_) r.add_term(k, MPoly::constant(0, p.evaluate(point)));
    return r;
  }

  /* Grading with z and every chi of weight one. */
  long max_weight() const {
    long w = 0;
    bool any = false;
    for (auto& [k, p] : coeffs_) {
      long pw = k + p.total_degree();
      w = any ? std::max(w, pw) : pw;
      any = true;
    }
    if (!any) throw std::invalid_argument("ZPoly::max_weight on zero");
    return w;
  }
  ZPoly weight_component(long w) const {
    ZPoly r(nvars_);
    for (auto& [k, p] : coeffs_) {
      auto comps = p.homogeneous_components();
      auto it = comps.find(w - k);
      if (it != comps.end()) r.add_term(k, it->second);
    }
    return r;
  }
  bool is_weight_homogeneous(long w) const { return *this == weight_component(w); }

  /* gcd of the rational contents of all coefficients (sign from leading). */
  Rat rational_content() const {
    if (is_zero()) return Rat(0);
    Int g(0), l(1);
    for (auto& [k, p] : coeffs_)
      for (auto& [e, c] : p.terms()) {
        g = boost::multiprecision::gcd(g, rat_num(c));
        l = int_lcm(l, rat_den(c));
      }
    Rat content = Rat(boost::multiprecision::abs(g)) / Rat(l);
    if (leading().rational_content() < 0) content = -content;
    return content;
  }

  /* Best-effort common MPoly divisor of all coefficients. */
  MPoly mpoly_content() const {
    MPoly g(nvars_);
    for (auto& [k, p] : coeffs_) {
      g = mpoly_gcd(g, p);
      if (g.is_constant()) break;
    }
    if (g.is_zero()) return MPoly::constant(nvars_, Rat(1));
    return g;
  }

  std::optional<ZPoly> divided_by_mpoly(const MPoly& d) const {
    ZPoly r(nvars_);
    for (auto& [k, p] : coeffs_) {
      auto q = p.divided_by(d);
      if (!q) return std::nullopt;
      r.add_term(k, *q);
    }
    return r;
  }

  std::string to_string(const std::vector<std::string>& names) const {
    if (is_zero()) return "0";
    std::string s;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) {
      const auto& [k, p] = *it;
      if (!s.empty()) s += " + ";
      std::string zs = k == 0 ? "" : (k == 1 ? "z" : "z^" + std::to_string(k));
      bool one = p.is_constant() && p.constant_value() == 1;
      if (zs.empty()) s += "(" + p.to_string(names) + ")";
      else if (one) s += zs;
      else s += "(" + p.to_string(names) + ")*" + zs;
    }
    return s;
  }

 private:
  void check_vars(const ZPoly& o) const {
    if (nvars_ != o.nvars_) throw std::invalid_argument("ZPoly: variable count mismatch");
  }

  int nvars_;
  std::map<long, MPoly> coeffs_;
};

/* Pseudo-division in z: returns (q, r, c) with c * num = q * den + r and
 * deg_z r < deg_z den; c is a power of the leading coefficient of den. */
struct ZPseudoDiv {
  ZPoly quotient;
  ZPoly remainder;
  MPoly scale;
};

inline ZPseudoDiv zpoly_pseudo_divide(const ZPoly& num, const ZPoly& den) {
  if (den.is_zero()) throw std::invalid_argument("zpoly_pseudo_divide: zero divisor");
  int n = num.nvars();
  long dd = den.degree();
  MPoly lc = den.leading();
  ZPoly q(n), r = num;
  MPoly scale = MPoly::constant(n, Rat(1));
  while (!r.is_zero() && r.degree() >= dd) {
    long dr = r.degree();
    MPoly rc = r.leading();
    // scale everything so the next reduction is exact
    q *= ZPoly::from_mpoly(lc);
    r *= ZPoly::from_mpoly(lc);
    scale *= lc;
    q.add_term(dr - dd, rc);
    r -= ZPoly::term(dr - dd, rc) * den;
    if (!r.is_zero() && r.degree() >= dr)
      throw std::logic_error("zpoly_pseudo_divide: no progress");
  }
  return {q, r, scale};
}

/* Certificate that two z-polynomials share no z-factor: evaluate chi at a
 * point over Z/p keeping both leading coefficients alive.  The image of any
 * common divisor divides the univariate gcd, so a degree-zero image gcd rules
 * out a positive-degree common divisor exactly.  Returns false when no good
 * evaluation point is found; callers then fall back to the PRS. */
namespace zgcd_probe {

constexpr long kPrime = 1000000007L;

inline long mod_of(const Int& v) {
  long r = static_cast<long>(v % kPrime);
  return r < 0 ? r + kPrime : r;
}
inline long mod_mul(long a, long b) {
  return static_cast<long>(static_cast<unsigned __int128>(a) *
                           static_cast<unsigned long long>(b) % kPrime);
}
inline long mod_pow(long b, long e) {
  long r = 1;
  while (e > 0) {
    if (e & 1) r = mod_mul(r, b);
    b = mod_mul(b, b);
    e >>= 1;
  }
  return r;
}
inline long mod_inv(long a) { return mod_pow(a, kPrime - 2); }

inline std::optional<long> eval_mpoly(const MPoly& p, const std::vector<long>& pt) {
  long acc = 0;
  for (auto& [e, c] : p.terms()) {
    long d = mod_of(rat_den(c));
    if (d == 0) return std::nullopt;
    long t = mod_mul(mod_of(rat_num(c)), mod_inv(d));
    for (size_t i = 0; i < e.size(); ++i)
      if (e[i] != 0) t = mod_mul(t, mod_pow(pt[i], e[i]));
    acc = (acc + t) % kPrime;
  }
  return acc;
}

/* Dense coefficient image, indexed from low_degree; trailing zeros trimmed. */
inline std::optional<std::vector<long>> eval_zpoly(const ZPoly& p, const std::vector<long>& pt) {
  long lo = p.low_degree();
  std::vector<long> v(static_cast<size_t>(p.degree() - lo) + 1, 0);
  for (auto& [k, c] : p.coeffs()) {
    auto e = eval_mpoly(c, pt);
    if (!e) return std::nullopt;
    v[static_cast<size_t>(k - lo)] = *e;
  }
  while (!v.empty() && v.back() == 0) v.pop_back();
  return v;
}

inline long univar_gcd_degree(std::vector<long> a, std::vector<long> b) {
  while (!b.empty()) {
    long db = static_cast<long>(b.size()) - 1;
    long inv = mod_inv(b.back());
    while (static_cast<long>(a.size()) - 1 >= db && !a.empty()) {
      long da = static_cast<long>(a.size()) - 1;
      long f = mod_mul(a.back(), inv);
      for (long i = 0; i <= db; ++i) {
        long& t = a[static_cast<size_t>(da - db + i)];
        t = ((t - mod_mul(f, b[static_cast<size_t>(i)])) % kPrime + kPrime) % kPrime;
      }
      while (!a.empty() && a.back() == 0) a.pop_back();
    }
    std::swap(a, b);
  }
  return static_cast<long>(a.size()) - 1;
}

/* True certifies that gcd(a, b) has z-degree zero.  Requires at least one of
 * the two to have a nonzero constant z-coefficient, so a bare power of z can
 * never hide inside the gcd. */
inline bool certified_coprime(const ZPoly& a, const ZPoly& b) {
  if (a.is_zero() || b.is_zero()) return false;
  if (a.low_degree() > 0 && b.low_degree() > 0) return false;
  int n = a.nvars();
  unsigned long long seed = 0x9e3779b97f4a7c15ULL;
  for (int attempt = 0; attempt < 6; ++attempt) {
    std::vector<long> pt(static_cast<size_t>(n));
    for (auto& x : pt) {
      seed = seed * 6364136223846793005ULL + 1442695040888963407ULL;
      x = static_cast<long>(seed % static_cast<unsigned long long>(kPrime - 3)) + 2;
    }
    auto va = eval_zpoly(a, pt);
    auto vb = eval_zpoly(b, pt);
    if (!va || !vb) continue;
    if (static_cast<long>(va->size()) - 1 != a.degree() - a.low_degree()) continue;
    if (static_cast<long>(vb->size()) - 1 != b.degree() - b.low_degree()) continue;
    return univar_gcd_degree(*va, *vb) == 0;
  }
  return false;
}

}  // namespace zgcd_probe

/* Primitive-PRS common divisor in z; exact common divisor (possibly partial
 * in its MPoly content). */
inline ZPoly zpoly_gcd_z(const ZPoly& a, const ZPoly& b) {
  if (zgcd_probe::certified_coprime(a, b))
    return ZPoly::constant(a.nvars(), Rat(1));
  auto strip = [&](const ZPoly& p) {
    if (p.is_zero()) return p;
    ZPoly q = p.shifted(-p.low_degree());
    MPoly c = q.mpoly_content();
    auto d = q.divided_by_mpoly(c);
    ZPoly r = *d;
    Rat rc = r.rational_content();
    return r * (Rat(1) / rc);
  };
  ZPoly x = strip(a), y = strip(b);
  if (x.is_zero()) return y;
  if (y.is_zero()) return x;
  if (x.degree() < y.degree()) std::swap(x, y);
  while (!y.is_zero()) {
    // fraction-free remainder, content-stripped after every elimination step
    // so coefficient growth never compounds; the gcd survives up to content,
    // which this routine only promises partially anyway
    long dd = y.degree();
    MPoly lc = y.leading();
    ZPoly r = x;
    while (!r.is_zero() && r.degree() >= dd) {
      long dr = r.degree();
      MPoly rc = r.leading();
      r = r * ZPoly::from_mpoly(lc) - ZPoly::term(dr - dd, rc) * y;
      if (!r.is_zero() && r.degree() >= dr)
        throw std::logic_error("zpoly_gcd_z: no progress");
      r = strip(r);
    }
    x = y;
    y = r;
  }
  return x;
}

/* Rational function in z over the chi-fraction field, stored num/den. */
class ZRat {
 public:
  ZRat() : num_(0), den_(0) {}
  explicit ZRat(int nvars)
      : num_(ZPoly(nvars)), den_(ZPoly::constant(nvars, Rat(1))) {}
  explicit ZRat(ZPoly num)
      : num_(std::move(num)), den_(ZPoly::constant(num_.nvars(), Rat(1))) {}
  ZRat(ZPoly num, ZPoly den) : num_(std::move(num)), den_(std::move(den)) {
    if (den_.is_zero()) throw std::invalid_argument("ZRat: zero denominator");
    reduce();
  }
  static ZRat from_scalar(const EquivScalar& s) {
    return ZRat(ZPoly::from_mpoly(s.num()), ZPoly::from_mpoly(s.den()));
  }
  static ZRat constant(int nvars, const Rat& c) {
    return ZRat(ZPoly::constant(nvars, c));
  }

  const ZPoly& num() const { return num_; }
  const ZPoly& den() const { return den_; }
  int nvars() const { return num_.nvars(); }
  bool is_zero() const { return num_.is_zero(); }

  bool operator==(const ZRat& o) const { return (num_ * o.den_) == (o.num_ * den_); }
  bool operator!=(const ZRat& o) const { return !(*this == o); }

  ZRat operator-() const { return raw(-num_, den_); }
  /* Sum over the den lcm (z power peeled, common z-free factor divided out)
   * so the final reduction faces near-coprime inputs. */
  friend ZRat operator+(const ZRat& a, const ZRat& b) {
    if (a.den_ == b.den_) return ZRat(a.num_ + b.num_, a.den_);
    if (!a.den_.is_zero() && !b.den_.is_zero()) {
      long va = a.den_.low_degree(), vb = b.den_.low_degree();
      ZPoly da = a.den_.shifted(-va), db = b.den_.shifted(-vb);
      ZPoly g = zpoly_gcd_z(da, db);
      ZPoly qa = da, qb = db;
      bool split = true;
      if (g.degree() > 0) {
        auto ea = try_exact_quotient(da, g);
        auto eb = try_exact_quotient(db, g);
        if (ea && eb) {
          qa = *ea;
          qb = *eb;
        } else {
          split = false;
        }
      }
      if (split && (g.degree() > 0 || va != 0 || vb != 0)) {
        long vm = std::max(va, vb);
        ZPoly num = a.num_.shifted(vm - va) * qb + b.num_.shifted(vm - vb) * qa;
        return ZRat(num, (da * qb).shifted(vm));
      }
    }
    return ZRat(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend ZRat operator-(const ZRat& a, const ZRat& b) { return a + (-b); }
  friend ZRat operator*(const ZRat& a, const ZRat& b) {
    ZPoly an = a.num_, ad = a.den_, bn = b.num_, bd = b.den_;
    cross_cancel(an, bd);
    cross_cancel(bn, ad);
    return ZRat(an * bn, ad * bd);
  }
  friend ZRat operator/(const ZRat& a, const ZRat& b) {
    if (b.is_zero()) throw std::invalid_argument("ZRat: division by zero");
    ZPoly an = a.num_, ad = a.den_, bn = b.den_, bd = b.num_;
    cross_cancel(an, bd);
    cross_cancel(bn, ad);
    return ZRat(an * bn, ad * bd);
  }
  ZRat& operator+=(const ZRat& o) { return *this = *this + o; }
  ZRat& operator-=(const ZRat& o) { return *this = *this - o; }
  ZRat& operator*=(const ZRat& o) { return *this = *this * o; }
  ZRat& operator/=(const ZRat& o) { return *this = *this / o; }

  ZRat negate_z() const { return raw(num_.negate_z(), den_.negate_z()); }
  ZRat substitute_chi(const std::vector<MPoly>& images) const {
    return ZRat(num_.substitute_chi(images), den_.substitute_chi(images));
  }

  bool is_z_polynomial() const { return den_.degree() == 0 && den_.low_degree() == 0; }
  bool is_z_proper() const { return num_.is_zero() || num_.degree() < den_.degree(); }

  /* The fraction as a z-free scalar, when it is one. */
  std::optional<EquivScalar> as_scalar() const {
    if (num_.degree() <= 0 && den_.degree() <= 0)
      return EquivScalar(num_.coefficient(0), den_.coefficient(0));
    auto q = try_exact_quotient(num_, den_);
    if (q && q->degree() <= 0)
      return EquivScalar(q->coefficient(0), MPoly::constant(nvars(), Rat(1)));
    return std::nullopt;
  }

  /* Weight homogeneity (z and chi of weight 1, fraction of weight w):
   * num_p * den == num * den_{p-w} for every graded piece. */
  bool is_weight_homogeneous(long w) const {
    if (num_.is_zero()) return true;
    long pmax = num_.max_weight();
    for (long p = 0; p <= pmax; ++p) {
      ZPoly lhs = num_.weight_component(p) * den_;
      ZPoly rhs = p - w < 0 ? ZPoly(nvars()) : num_ * den_.weight_component(p - w);
      if (lhs != rhs) return false;
    }
    return true;
  }
  std::optional<long> homogeneous_weight() const {
    if (num_.is_zero()) return std::nullopt;
    long w = num_.max_weight() - den_.max_weight();
    return is_weight_homogeneous(w) ? std::optional<long>(w) : std::nullopt;
  }

  std::string to_string(const std::vector<std::string>& names) const {
    if (num_.is_zero()) return "0";
    if (den_ == ZPoly::constant(nvars(), Rat(1))) return num_.to_string(names);
    return "(" + num_.to_string(names) + ") / (" + den_.to_string(names) + ")";
  }

 private:
  static ZRat raw(ZPoly n, ZPoly d) {
    ZRat r;
    r.num_ = std::move(n);
    r.den_ = std::move(d);
    return r;
  }

  /* Divide the pair by their common z-factor when one is found. */
  static void cross_cancel(ZPoly& x, ZPoly& y) {
    if (x.is_zero() || y.is_zero()) return;
    ZPoly g = zpoly_gcd_z(x, y);
    if (g.degree() <= 0) return;
    auto qx = try_exact_quotient(x, g);
    auto qy = try_exact_quotient(y, g);
    if (qx && qy) {
      x = *qx;
      y = *qy;
    }
  }

  /* Quotient with MPoly coefficients if den divides num exactly.  Classical
   * division with exact coefficient division at every step; no pseudo-division
   * scale factors, so coefficients never grow past the answer. */
  static std::optional<ZPoly> try_exact_quotient(const ZPoly& num, const ZPoly& den) {
    if (num.is_zero()) return ZPoly(num.nvars());
    if (den.is_zero()) return std::nullopt;
    long dd = den.degree();
    const MPoly lc = den.leading();
    ZPoly q(num.nvars()), r = num;
    while (!r.is_zero() && r.degree() >= dd) {
      auto c = r.leading().divided_by(lc);
      if (!c) return std::nullopt;
      long sh = r.degree() - dd;
      q.add_term(sh, *c);
      r -= ZPoly::term(sh, *c) * den;
      if (!r.is_zero() && r.degree() >= sh + dd) return std::nullopt;
    }
    if (!r.is_zero()) return std::nullopt;
    return q;
  }

  void reduce() {
    if (num_.is_zero()) {
      den_ = ZPoly::constant(nvars(), Rat(1));
      return;
    }
    // common z power
    long v = std::min(num_.low_degree(), den_.low_degree());
    if (v != 0) {
      num_ = num_.shifted(-v);
      den_ = den_.shifted(-v);
    }
    // z-polynomial common divisor
    ZPoly g = zpoly_gcd_z(num_, den_);
    if (g.degree() > 0) {
      auto qn = try_exact_quotient(num_, g);
      auto qd = try_exact_quotient(den_, g);
      if (qn && qd) {
        num_ = *qn;
        den_ = *qd;
      }
    }
    // common MPoly content
    MPoly cn = num_.mpoly_content(), cd = den_.mpoly_content();
    MPoly c = mpoly_gcd(cn, cd);
    if (!(c.is_constant())) {
      num_ = *num_.divided_by_mpoly(c);
      den_ = *den_.divided_by_mpoly(c);
    }
    Rat rc = den_.rational_content();
    num_ *= Rat(1) / rc;
    den_ *= Rat(1) / rc;
  }

  ZPoly num_, den_;
};

/* r = polynomial part + proper part, exactly. */
inline std::pair<ZRat, ZRat> zrat_split(const ZRat& r) {
  int n = r.nvars();
  if (r.is_z_proper()) return {ZRat(n), r};
  auto pd = zpoly_pseudo_divide(r.num(), r.den());
  ZRat pol(pd.quotient, ZPoly::from_mpoly(pd.scale));
  ZRat prop(pd.remainder, ZPoly::from_mpoly(pd.scale) * r.den());
  return {pol, prop};
}

/* Laurent expansion at z = 0 up to and including z^order; keys are exponents. */
inline std::map<long, EquivScalar> zrat_expand_at_zero(const ZRat& r, long order) {
  std::map<long, EquivScalar> out;
  if (r.is_zero()) return out;
  int n = r.nvars();
  long v = r.den().low_degree();
  ZPoly dt = r.den().shifted(-v);  // dt(0) != 0
  MPoly d0 = dt.coefficient(0);
  // invert dt as a power series with EquivScalar coefficients
  long lowest = r.num().low_degree() - v;
  long need = order - lowest;
  if (need < 0) return out;
  std::vector<EquivScalar> inv(static_cast<size_t>(need) + 1, EquivScalar(n));
  EquivScalar d0inv = EquivScalar(MPoly::constant(n, Rat(1)), d0);
  inv[0] = d0inv;
  for (long k = 1; k <= need; ++k) {
    EquivScalar s(n);
    for (long j = 1; j <= k; ++j) {
      MPoly dj = dt.coefficient(j);
      if (dj.is_zero()) continue;
      s += EquivScalar(dj) * inv[static_cast<size_t>(k - j)];
    }
    inv[static_cast<size_t>(k)] = -(d0inv * s);
  }
  for (long e = lowest; e <= order; ++e) {
    EquivScalar c(n);
    for (auto& [k, p] : r.num().coeffs()) {
      long idx = e + v - k;
      if (idx < 0 || idx > need) continue;
      c += EquivScalar(p) * inv[static_cast<size_t>(idx)];
    }
    if (!c.is_zero()) out[e] = c;
  }
  return out;
}

/* Value at z = 0; throws if the expansion has negative z exponents. */
inline EquivScalar zrat_at_zero(const ZRat& r) {
  auto ex = zrat_expand_at_zero(r, 0);
  for (auto& [e, c] : ex)
    if (e < 0) throw std::invalid_argument("zrat_at_zero: pole at z = 0");
  auto it = ex.find(0);
  return it == ex.end() ? EquivScalar(r.nvars()) : it->second;
}

/* lim_{z->inf} z * r for z-proper r. */
inline EquivScalar zrat_limit_z_times_at_infinity(const ZRat& r) {
  if (!r.is_z_proper())
    throw std::invalid_argument("zrat_limit_z_times_at_infinity: not proper");
  if (r.is_zero()) return EquivScalar(r.nvars());
  if (r.num().degree() + 1 < r.den().degree()) return EquivScalar(r.nvars());
  return EquivScalar(r.num().leading(), r.den().leading());
}

}  // namespace toricmirror
