#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "curves.hpp"
#include "kmatrix.hpp"
#include "stackyfan.hpp"
#include "zrat.hpp"

namespace toricmirror {

/*
 * The fan module.  Elements are finite sums  sum_k  c_k(z, chi, y, q) 1_k
 * over k in N cap |Sigma|, with exact rational-function coefficients in
 *   chi_1..chi_n   equivariant parameters,
 *   y_1..y_g       one variable per extra deformation direction,
 *   q_1..q_r       one variable per basis vector of Lambda.
 * The ray directions carry no variables (their deformation coordinates are
 * normalized away); curve classes are exponents of the q variables.
 */

struct DModContext {
  StackyFan fan;
  FanSequences seq;
  MoriData mori;
  std::vector<Rat> pl_certificate;
  std::vector<std::vector<Int>> gdirs;  // deformation directions beyond the rays
  std::vector<std::vector<Int>> sdirs;  // rays first, then gdirs (normalized)
  std::vector<std::vector<Rat>> spsi;   // global Psi of each direction, length m
  std::vector<Rat> smass;               // |l| = sum_i Psi_i(l)
  int nchi = 0, ny = 0, nq = 0;

  int nvars() const { return nchi + ny + nq; }
  int yvar(int g) const { return nchi + g; }
  int qvar(int j) const { return nchi + ny + j; }

  std::vector<std::string> var_names() const {
    std::vector<std::string> names;
    for (int t = 0; t < nchi; ++t) names.push_back("chi" + std::to_string(t + 1));
    for (int g = 0; g < ny; ++g) names.push_back("y" + std::to_string(g + 1));
    for (int j = 0; j < nq; ++j) names.push_back(nq == 1 ? "Q" : "Q" + std::to_string(j + 1));
    return names;
  }
};

/* Box representatives other than the identity, the default extra directions. */
inline std::vector<std::vector<Int>> default_directions(const StackyFan& f) {
  std::vector<std::vector<Int>> out;
  for (const auto& v : box(f))
    if (!f.N.is_zero(v.k)) out.push_back(v.k);
  return out;
}

inline DModContext build_dmod(const StackyFan& f,
                              const std::vector<std::vector<Int>>& extra_dirs) {
  auto rep = validate(f);
  if (!rep.ok) throw std::invalid_argument("build_dmod: fan failed validation");
  DModContext ctx;
  ctx.fan = f;
  ctx.seq = build_sequences(f);
  ctx.pl_certificate = rep.pl_certificate;
  ctx.mori = build_mori(f, ctx.seq, rep.pl_certificate);
  std::set<std::vector<Int>> seen;
  for (int i = 0; i < f.m(); ++i) seen.insert(f.N.normalize(f.b[static_cast<size_t>(i)]));
  for (const auto& d : extra_dirs) {
    auto dn = f.N.normalize(d);
    if (f.N.is_zero(dn)) throw std::invalid_argument("build_dmod: zero deformation direction");
    if (!seen.insert(dn).second) continue;
    ctx.gdirs.push_back(dn);
  }
  for (int i = 0; i < f.m(); ++i) ctx.sdirs.push_back(f.N.normalize(f.b[static_cast<size_t>(i)]));
  for (const auto& d : ctx.gdirs) ctx.sdirs.push_back(d);
  for (const auto& l : ctx.sdirs) {
    auto sig = find_containing_cone(f, l);
    if (!sig) throw std::invalid_argument("build_dmod: direction outside the support");
    auto p = psi(f, l, *sig);
    ctx.spsi.push_back(*p);
    Rat mass(0);
    for (const auto& x : *p) mass += x;
    ctx.smass.push_back(mass);
  }
  ctx.nchi = f.n();
  ctx.ny = static_cast<int>(ctx.gdirs.size());
  ctx.nq = ctx.seq.lambda.rank();
  return ctx;
}

inline DModContext build_dmod_default(const StackyFan& f) {
  return build_dmod(f, default_directions(f));
}

struct DModElement {
  std::map<std::vector<Int>, ZRat> terms;

  void add(const std::vector<Int>& k, const ZRat& c) {
    if (c.is_zero()) return;
    auto it = terms.find(k);
    if (it == terms.end()) {
      terms.emplace(k, c);
      return;
    }
    it->second = it->second + c;
    if (it->second.is_zero()) terms.erase(it);
  }
  const ZRat* at(const std::vector<Int>& k) const {
    auto it = terms.find(k);
    return it == terms.end() ? nullptr : &it->second;
  }
  bool is_zero() const { return terms.empty(); }

  friend DModElement operator+(const DModElement& a, const DModElement& b) {
    DModElement r = a;
    for (const auto& [k, c] : b.terms) r.add(k, c);
    return r;
  }
  friend DModElement operator-(const DModElement& a, const DModElement& b) {
    DModElement r = a;
    for (const auto& [k, c] : b.terms) r.add(k, -c);
    return r;
  }
  DModElement scaled(const ZRat& s) const {
    DModElement r;
    for (const auto& [k, c] : terms) r.add(k, c * s);
    return r;
  }
  bool operator==(const DModElement& o) const { return (*this - o).is_zero(); }
};

inline DModElement unit_element(const DModContext& ctx, const std::vector<Int>& k) {
  auto kn = ctx.fan.N.normalize(k);
  if (!find_containing_cone(ctx.fan, kn))
    throw std::invalid_argument("unit_element: k outside the support");
  DModElement e;
  e.add(kn, ZRat::constant(ctx.nvars(), Rat(1)));
  return e;
}

namespace dmod_detail {

inline ZRat zrat_var(const DModContext& ctx, int var) {
  return ZRat(ZPoly::from_mpoly(MPoly::variable(ctx.nvars(), var)));
}
inline ZRat zrat_z(const DModContext& ctx) {
  return ZRat(ZPoly::z_power(ctx.nvars(), 1));
}
inline ZRat zrat_qmono(const DModContext& ctx, const std::vector<Int>& coords) {
  MPoly::Expo e(static_cast<size_t>(ctx.nvars()), 0);
  for (int j = 0; j < ctx.nq; ++j) {
    if (coords[static_cast<size_t>(j)] > 1000000 || coords[static_cast<size_t>(j)] < -1000000)
      throw std::runtime_error("zrat_qmono: exponent too large");
    e[static_cast<size_t>(ctx.qvar(j))] = static_cast<int>(coords[static_cast<size_t>(j)]);
  }
  return ZRat(ZPoly::from_mpoly(MPoly::monomial(ctx.nvars(), e, Rat(1))));
}

inline ZPoly zpoly_derivative_var(const ZPoly& p, int var) {
  ZPoly r(p.nvars());
  for (const auto& [k, c] : p.coeffs()) r.add_term(k, c.derivative(var));
  return r;
}
inline ZRat zrat_derivative_var(const ZRat& c, int var) {
  ZPoly dn = zpoly_derivative_var(c.num(), var);
  ZPoly dd = zpoly_derivative_var(c.den(), var);
  return ZRat(dn * c.den() - c.num() * dd, c.den() * c.den());
}

/* Termwise scaling of each monomial by the weighted sum of its exponents. */
inline MPoly mpoly_weight_scale(const MPoly& p, const std::vector<Rat>& w) {
  MPoly r(p.nvars());
  for (const auto& [e, c] : p.terms()) {
    Rat s(0);
    for (size_t i = 0; i < e.size(); ++i)
      if (e[i] != 0) s += w[i] * Rat(e[i]);
    if (s != 0) r = r + MPoly::monomial(p.nvars(), e, c * s);
  }
  return r;
}
inline ZPoly zpoly_weight_scale(const ZPoly& p, const std::vector<Rat>& w) {
  ZPoly r(p.nvars());
  for (const auto& [k, c] : p.coeffs()) r.add_term(k, mpoly_weight_scale(c, w));
  return r;
}
/* The derivation with D(v_i) = w_i v_i, extended to fractions. */
inline ZRat zrat_weight_derivation(const ZRat& c, const std::vector<Rat>& w) {
  ZPoly dn = zpoly_weight_scale(c.num(), w);
  ZPoly dd = zpoly_weight_scale(c.den(), w);
  return ZRat(dn * c.den() - c.num() * dd, c.den() * c.den());
}

inline Rat chi_pair(const DModContext& ctx, const std::vector<Rat>& chi,
                    const std::vector<Int>& k) {
  auto kb = ctx.fan.N.free_image(ctx.fan.N.normalize(k));
  Rat s(0);
  for (size_t t = 0; t < kb.size(); ++t) s += chi[t] * Rat(kb[t]);
  return s;
}

}  // namespace dmod_detail

/* Multiplication operators on coefficients. */
inline DModElement q_mult(const DModContext& ctx, const std::vector<Int>& coords,
                          const DModElement& e) {
  return e.scaled(dmod_detail::zrat_qmono(ctx, coords));
}
inline DModElement y_mult(const DModContext& ctx, int g, const DModElement& e) {
  return e.scaled(dmod_detail::zrat_var(ctx, ctx.yvar(g)));
}
inline DModElement z_mult(const DModContext& ctx, const DModElement& e) {
  return e.scaled(dmod_detail::zrat_z(ctx));
}
inline DModElement scalar_mult(const DModContext& ctx, const Rat& c, const DModElement& e) {
  return e.scaled(ZRat::constant(ctx.nvars(), c));
}

/*
 * z theta_i: on a unit,
 *   z theta_i 1_k = z Psi_i(k) 1_k + sum_{l in S} Psi_i(l) y_l q^{d(k,l)} 1_{k+l}
 * with y_l present only for the extra directions; on coefficients it acts by
 * the derivation  z * sum_j (basis_j)_i q_j d/dq_j  through the commutator
 * with the Novikov variables.
 */
inline DModElement theta_action(const DModContext& ctx, int i, const DModElement& e) {
  std::vector<Rat> w(static_cast<size_t>(ctx.nvars()), Rat(0));
  for (int j = 0; j < ctx.nq; ++j)
    w[static_cast<size_t>(ctx.qvar(j))] = curves_detail::lambda_entry(ctx.seq.lambda, i, j);
  DModElement out;
  for (const auto& [k, c] : e.terms) {
    out.add(k, dmod_detail::zrat_weight_derivation(c, w) * dmod_detail::zrat_z(ctx));
    auto sig = find_containing_cone(ctx.fan, k);
    auto pk = psi(ctx.fan, k, *sig);
    Rat pik = (*pk)[static_cast<size_t>(i)];
    if (pik != 0) out.add(k, c * dmod_detail::zrat_z(ctx) * ZRat::constant(ctx.nvars(), pik));
    for (size_t s = 0; s < ctx.sdirs.size(); ++s) {
      Rat pil = ctx.spsi[s][static_cast<size_t>(i)];
      if (pil == 0) continue;
      auto kl = ctx.fan.N.add(k, ctx.sdirs[s]);
      auto d = dclass(ctx.fan, ctx.seq, k, ctx.sdirs[s]);
      ZRat coeff = c * ZRat::constant(ctx.nvars(), pil) * dmod_detail::zrat_qmono(ctx, d);
      if (static_cast<int>(s) >= ctx.fan.m())
        coeff = coeff * dmod_detail::zrat_var(ctx, ctx.yvar(static_cast<int>(s) - ctx.fan.m()));
      out.add(ctx.fan.N.normalize(kl), coeff);
    }
  }
  return out;
}

/* z d/dy_l for an extra direction: Leibniz term plus the shift by l. */
inline DModElement partial_action(const DModContext& ctx, int g, const DModElement& e) {
  const auto& l = ctx.gdirs[static_cast<size_t>(g)];
  DModElement out;
  for (const auto& [k, c] : e.terms) {
    out.add(k, dmod_detail::zrat_derivative_var(c, ctx.yvar(g)) * dmod_detail::zrat_z(ctx));
    auto d = dclass(ctx.fan, ctx.seq, k, l);
    out.add(ctx.fan.N.normalize(ctx.fan.N.add(k, l)), c * dmod_detail::zrat_qmono(ctx, d));
  }
  return out;
}

/*
 * Action of an equivariant parameter chi in M_Q:
 *   chi . 1_k = z <chi, k> 1_k + sum_{l in S} <chi, l> y_l q^{d(k,l)} 1_{k+l}.
 * It commutes with the Novikov variables.
 */
inline DModElement chi_action(const DModContext& ctx, const std::vector<Rat>& chi,
                              const DModElement& e) {
  DModElement out;
  for (const auto& [k, c] : e.terms) {
    Rat ck = dmod_detail::chi_pair(ctx, chi, k);
    if (ck != 0) out.add(k, c * dmod_detail::zrat_z(ctx) * ZRat::constant(ctx.nvars(), ck));
    for (size_t s = 0; s < ctx.sdirs.size(); ++s) {
      Rat cl = dmod_detail::chi_pair(ctx, chi, ctx.sdirs[s]);
      if (cl == 0) continue;
      auto kl = ctx.fan.N.add(k, ctx.sdirs[s]);
      auto d = dclass(ctx.fan, ctx.seq, k, ctx.sdirs[s]);
      ZRat coeff = c * ZRat::constant(ctx.nvars(), cl) * dmod_detail::zrat_qmono(ctx, d);
      if (static_cast<int>(s) >= ctx.fan.m())
        coeff = coeff * dmod_detail::zrat_var(ctx, ctx.yvar(static_cast<int>(s) - ctx.fan.m()));
      out.add(ctx.fan.N.normalize(kl), coeff);
    }
  }
  return out;
}

/*
 * Operator words.  Products apply right to left; powers and sums as usual.
 * Atoms: zT<i> (z theta_i), zP<g> (z d/dy_g), y<g>, chi<t>, Q or Q(c1,..,cr),
 * z, and rational constants.
 */
struct DWord;
using DWordPtr = std::shared_ptr<DWord>;

struct DWord {
  enum class Kind { Sum, Prod, Pow, Theta, Partial, YVar, ChiOp, QMono, ZVar, Const } kind;
  std::vector<DWordPtr> kids;
  std::vector<int> signs;  // parallel to kids for Sum
  long power = 1;
  int index = 0;
  std::vector<Int> qexp;
  Rat value;

  static DWordPtr mk(Kind k) {
    auto p = std::make_shared<DWord>();
    p->kind = k;
    return p;
  }
};

inline DModElement apply_operator(const DModContext& ctx, const DWordPtr& w,
                                  const DModElement& e) {
  switch (w->kind) {
    case DWord::Kind::Sum: {
      DModElement out;
      for (size_t i = 0; i < w->kids.size(); ++i) {
        DModElement part = apply_operator(ctx, w->kids[i], e);
        out = w->signs[i] >= 0 ? out + part : out - part;
      }
      return out;
    }
    case DWord::Kind::Prod: {
      DModElement cur = e;
      for (auto it = w->kids.rbegin(); it != w->kids.rend(); ++it)
        cur = apply_operator(ctx, *it, cur);
      return cur;
    }
    case DWord::Kind::Pow: {
      DModElement cur = e;
      for (long t = 0; t < w->power; ++t) cur = apply_operator(ctx, w->kids[0], cur);
      return cur;
    }
    case DWord::Kind::Theta:
      return theta_action(ctx, w->index, e);
    case DWord::Kind::Partial:
      return partial_action(ctx, w->index, e);
    case DWord::Kind::YVar:
      return y_mult(ctx, w->index, e);
    case DWord::Kind::ChiOp: {
      std::vector<Rat> chi(static_cast<size_t>(ctx.fan.n()), Rat(0));
      chi[static_cast<size_t>(w->index)] = Rat(1);
      return chi_action(ctx, chi, e);
    }
    case DWord::Kind::QMono:
      return q_mult(ctx, w->qexp, e);
    case DWord::Kind::ZVar:
      return z_mult(ctx, e);
    case DWord::Kind::Const:
      return scalar_mult(ctx, w->value, e);
  }
  throw std::logic_error("apply_operator: bad node");
}

namespace dmod_detail {

struct Parser {
  const DModContext& ctx;
  std::string s;
  size_t pos = 0;

  explicit Parser(const DModContext& c, std::string str) : ctx(c), s(std::move(str)) {}

  void skip() {
    while (pos < s.size() && isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("operator parse error at position " + std::to_string(pos) +
                                ": " + what);
  }

  long integer() {
    skip();
    size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    while (pos < s.size() && isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) fail("expected integer");
    return std::stol(s.substr(start, pos - start));
  }

  DWordPtr expr() {
    skip();
    auto node = DWord::mk(DWord::Kind::Sum);
    int sign = 1;
    if (eat('-')) sign = -1;
    node->kids.push_back(term());
    node->signs.push_back(sign);
    while (true) {
      skip();
      if (eat('+')) sign = 1;
      else if (eat('-')) sign = -1;
      else break;
      node->kids.push_back(term());
      node->signs.push_back(sign);
    }
    if (node->kids.size() == 1 && node->signs[0] == 1) return node->kids[0];
    return node;
  }

  DWordPtr term() {
    auto node = DWord::mk(DWord::Kind::Prod);
    node->kids.push_back(factor());
    while (true) {
      skip();
      if (eat('*')) node->kids.push_back(factor());
      else break;
    }
    if (node->kids.size() == 1) return node->kids[0];
    return node;
  }

  DWordPtr factor() {
    auto base = primary();
    skip();
    if (eat('^')) {
      long p = integer();
      if (p < 0) fail("negative power");
      auto node = DWord::mk(DWord::Kind::Pow);
      node->kids.push_back(base);
      node->power = p;
      if (p == 0) {
        auto one = DWord::mk(DWord::Kind::Const);
        one->value = Rat(1);
        return one;
      }
      return node;
    }
    return base;
  }

  bool match_word(const std::string& w) {
    skip();
    if (s.compare(pos, w.size(), w) == 0) {
      pos += w.size();
      return true;
    }
    return false;
  }

  DWordPtr primary() {
    skip();
    if (eat('(')) {
      auto e = expr();
      if (!eat(')')) fail("expected )");
      return e;
    }
    if (pos >= s.size()) fail("unexpected end");
    char c = s[pos];
    if (isdigit(static_cast<unsigned char>(c))) {
      long num = integer();
      auto node = DWord::mk(DWord::Kind::Const);
      if (eat('/')) {
        long den = integer();
        if (den == 0) fail("zero denominator");
        node->value = Rat(num) / Rat(den);
      } else {
        node->value = Rat(num);
      }
      return node;
    }
    if (match_word("zT")) {
      long i = integer();
      if (i < 1 || i > ctx.fan.m()) fail("theta index out of range");
      auto node = DWord::mk(DWord::Kind::Theta);
      node->index = static_cast<int>(i - 1);
      return node;
    }
    if (match_word("zP")) {
      long g = integer();
      if (g < 1 || g > ctx.ny) fail("partial index out of range");
      auto node = DWord::mk(DWord::Kind::Partial);
      node->index = static_cast<int>(g - 1);
      return node;
    }
    if (match_word("chi")) {
      long t = integer();
      if (t < 1 || t > ctx.fan.n()) fail("chi index out of range");
      auto node = DWord::mk(DWord::Kind::ChiOp);
      node->index = static_cast<int>(t - 1);
      return node;
    }
    if (match_word("y")) {
      long g = integer();
      if (g < 1 || g > ctx.ny) fail("y index out of range");
      auto node = DWord::mk(DWord::Kind::YVar);
      node->index = static_cast<int>(g - 1);
      return node;
    }
    if (match_word("Q")) {
      auto node = DWord::mk(DWord::Kind::QMono);
      skip();
      if (eat('(')) {
        for (int j = 0; j < ctx.nq; ++j) {
          if (j > 0 && !eat(',')) fail("expected ,");
          node->qexp.push_back(Int(integer()));
        }
        if (!eat(')')) fail("expected )");
      } else {
        if (ctx.nq != 1) fail("bare Q needs rank-one Lambda");
        node->qexp.push_back(Int(1));
      }
      return node;
    }
    if (match_word("z")) {
      return DWord::mk(DWord::Kind::ZVar);
    }
    fail("unknown atom");
  }
};

}  // namespace dmod_detail

inline DWordPtr parse_operator(const DModContext& ctx, const std::string& str) {
  dmod_detail::Parser p(ctx, str);
  auto node = p.expr();
  p.skip();
  if (p.pos != p.s.size()) p.fail("trailing input");
  return node;
}

/*
 * A relation: a sum of operator words applied to units that must vanish.
 * The string form "word :: unit(c1,..,cd)" uses the coordinates of N.
 */
struct FanRelation {
  std::string name;
  std::vector<std::pair<DWordPtr, std::vector<Int>>> parts;
};

inline DModElement relation_value(const DModContext& ctx, const FanRelation& rel) {
  DModElement out;
  for (const auto& [op, base] : rel.parts)
    out = out + apply_operator(ctx, op, unit_element(ctx, base));
  return out;
}

inline bool verify_relation(const DModContext& ctx, const FanRelation& rel) {
  return relation_value(ctx, rel).is_zero();
}

inline FanRelation parse_relation(const DModContext& ctx, const std::string& str) {
  auto sep = str.find("::");
  if (sep == std::string::npos)
    throw std::invalid_argument("relation needs the form 'word :: unit(...)'");
  FanRelation rel;
  rel.name = str;
  auto op = parse_operator(ctx, str.substr(0, sep));
  std::string rhs = str.substr(sep + 2);
  auto lp = rhs.find('(');
  auto rp = rhs.rfind(')');
  if (rhs.find("unit") == std::string::npos || lp == std::string::npos || rp == std::string::npos)
    throw std::invalid_argument("relation target must be unit(...)");
  std::vector<Int> k;
  std::string inner = rhs.substr(lp + 1, rp - lp - 1);
  std::stringstream ss(inner);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.find_first_not_of(" \t") == std::string::npos) continue;
    k.push_back(Int(std::stol(tok)));
  }
  if (static_cast<int>(k.size()) != ctx.fan.N.dim())
    throw std::invalid_argument("unit coordinate count mismatch");
  rel.parts.emplace_back(op, ctx.fan.N.normalize(k));
  return rel;
}

namespace dmod_detail {

/* factor  z theta_i - z*shift - sum_{l in G} Psi_i(l) z y_l d/dy_l */
inline DWordPtr theta_shift_factor(const DModContext& ctx, int i, const Rat& shift) {
  auto sum = DWord::mk(DWord::Kind::Sum);
  auto th = DWord::mk(DWord::Kind::Theta);
  th->index = i;
  sum->kids.push_back(th);
  sum->signs.push_back(1);
  if (shift != 0) {
    auto prod = DWord::mk(DWord::Kind::Prod);
    auto cst = DWord::mk(DWord::Kind::Const);
    cst->value = shift;
    prod->kids.push_back(cst);
    prod->kids.push_back(DWord::mk(DWord::Kind::ZVar));
    sum->kids.push_back(prod);
    sum->signs.push_back(-1);
  }
  for (int g = 0; g < ctx.ny; ++g) {
    Rat pil = ctx.spsi[static_cast<size_t>(ctx.fan.m() + g)][static_cast<size_t>(i)];
    if (pil == 0) continue;
    auto prod = DWord::mk(DWord::Kind::Prod);
    auto cst = DWord::mk(DWord::Kind::Const);
    cst->value = pil;
    prod->kids.push_back(cst);
    auto yv = DWord::mk(DWord::Kind::YVar);
    yv->index = g;
    prod->kids.push_back(yv);
    auto pa = DWord::mk(DWord::Kind::Partial);
    pa->index = g;
    prod->kids.push_back(pa);
    sum->kids.push_back(prod);
    sum->signs.push_back(-1);
  }
  if (sum->kids.size() == 1) return sum->kids[0];
  return sum;
}

struct Decomposition {
  std::vector<Int> base;       // k1
  std::vector<int> a;          // exponents over S (rays then gdirs)
  std::vector<Int> total;      // k1 + sum a_l l, normalized
  std::vector<Rat> w;          // sum a_l Psi(l) + Psi(k1) in Q^m
};

inline std::string decomposition_label(const Decomposition& d) {
  std::ostringstream os;
  os << "k=(";
  for (size_t i = 0; i < d.base.size(); ++i) os << (i ? "," : "") << d.base[i];
  os << ") a=(";
  for (size_t i = 0; i < d.a.size(); ++i) os << (i ? "," : "") << d.a[i];
  os << ")";
  return os.str();
}

/* The one-sided word of a reduced relation for a decomposition and a shift. */
inline DWordPtr decomposition_word(const DModContext& ctx, const Decomposition& dec,
                                   const std::vector<Int>& dshift) {
  auto prod = DWord::mk(DWord::Kind::Prod);
  bool ntq = false;
  for (const auto& x : dshift)
    if (x != 0) ntq = true;
  if (ntq) {
    auto q = DWord::mk(DWord::Kind::QMono);
    q->qexp = dshift;
    prod->kids.push_back(q);
  }
  for (int g = 0; g < ctx.ny; ++g) {
    int a = dec.a[static_cast<size_t>(ctx.fan.m() + g)];
    for (int t = 0; t < a; ++t) {
      auto pa = DWord::mk(DWord::Kind::Partial);
      pa->index = g;
      prod->kids.push_back(pa);
    }
  }
  auto sig = find_containing_cone(ctx.fan, dec.base);
  auto pk = psi(ctx.fan, dec.base, *sig);
  for (int i = 0; i < ctx.fan.m(); ++i) {
    int a = dec.a[static_cast<size_t>(i)];
    for (int nu = 0; nu < a; ++nu)
      prod->kids.push_back(theta_shift_factor(ctx, i, Rat(nu) + (*pk)[static_cast<size_t>(i)]));
  }
  if (prod->kids.empty()) {
    auto one = DWord::mk(DWord::Kind::Const);
    one->value = Rat(1);
    return one;
  }
  if (prod->kids.size() == 1) return prod->kids[0];
  return prod;
}

}  // namespace dmod_detail

/*
 * Generating relations up to a total order bound: for every pair of
 * decompositions k1 + sum a_l l = k2 + sum a'_l l with matching class data,
 * the words
 *   Q^{d1} prod (z d/dy)^{a}  prod_nu (z theta - shifts)  1_{k1}
 * agree for the two sides once d1, d2 in the effective cone absorb the
 * difference of the Q^m masses.
 */
inline std::vector<FanRelation> gkz_relations(const DModContext& ctx,
                                              const std::vector<std::vector<Int>>& gens,
                                              int order_bound) {
  using dmod_detail::Decomposition;
  std::vector<Decomposition> all;
  const int ns = static_cast<int>(ctx.sdirs.size());
  for (const auto& k1 : gens) {
    auto kn = ctx.fan.N.normalize(k1);
    auto sig = find_containing_cone(ctx.fan, kn);
    if (!sig) throw std::invalid_argument("gkz_relations: generator outside the support");
    auto pk = psi(ctx.fan, kn, *sig);
    std::vector<int> a(static_cast<size_t>(ns), 0);
    std::function<void(int, int)> rec = [&](int s, int used) {
      if (s == ns) {
        Decomposition dec;
        dec.base = kn;
        dec.a = a;
        std::vector<Int> tot = kn;
        std::vector<Rat> w(pk->begin(), pk->end());
        for (int t = 0; t < ns; ++t) {
          for (int rep = 0; rep < a[static_cast<size_t>(t)]; ++rep)
            tot = ctx.fan.N.add(tot, ctx.sdirs[static_cast<size_t>(t)]);
          for (int i = 0; i < ctx.fan.m(); ++i)
            w[static_cast<size_t>(i)] += Rat(a[static_cast<size_t>(t)]) * ctx.spsi[static_cast<size_t>(t)][static_cast<size_t>(i)];
        }
        dec.total = ctx.fan.N.normalize(tot);
        dec.w = w;
        all.push_back(dec);
        return;
      }
      for (int v = 0; used + v <= order_bound; ++v) {
        a[static_cast<size_t>(s)] = v;
        rec(s + 1, used + v);
      }
      a[static_cast<size_t>(s)] = 0;
    };
    rec(0, 0);
  }

  std::map<std::vector<Int>, std::vector<size_t>> groups;
  for (size_t i = 0; i < all.size(); ++i) groups[all[i].total].push_back(i);

  // small pool of effective classes for absorbing two-sided shifts
  Int pool_bound(0);
  for (const auto& x : ctx.mori.ample) pool_bound += (x < 0 ? Int(-x) : x);
  pool_bound *= Int(2 * std::max(order_bound, 1));
  auto pool = enumerate_effective(ctx.fan, ctx.mori, pool_bound);

  std::vector<FanRelation> out;
  for (const auto& [tot, idxs] : groups) {
    for (size_t p = 0; p < idxs.size(); ++p)
      for (size_t q = p + 1; q < idxs.size(); ++q) {
        const auto& d1 = all[idxs[p]];
        const auto& d2 = all[idxs[q]];
        std::vector<Rat> delta(d1.w.size());
        for (size_t i = 0; i < delta.size(); ++i) delta[i] = d1.w[i] - d2.w[i];
        auto dl = ctx.seq.lambda.coordinates(delta);
        if (!dl) throw std::runtime_error("gkz_relations: mass difference not in Lambda");
        std::vector<Int> s1(static_cast<size_t>(ctx.nq), Int(0)), s2 = *dl;
        bool ok = is_effective(ctx.fan, ctx.mori, s2);
        if (!ok) {
          std::vector<Int> md = *dl;
          for (auto& x : md) x = -x;
          if (is_effective(ctx.fan, ctx.mori, md)) {
            s1 = md;
            s2.assign(static_cast<size_t>(ctx.nq), Int(0));
            ok = true;
          } else {
            for (const auto& e : pool) {
              std::vector<Int> cand(e);
              for (int j = 0; j < ctx.nq; ++j) cand[static_cast<size_t>(j)] += (*dl)[static_cast<size_t>(j)];
              if (is_effective(ctx.fan, ctx.mori, cand)) {
                s1 = e;
                s2 = cand;
                ok = true;
                break;
              }
            }
          }
        }
        if (!ok) continue;
        FanRelation rel;
        rel.name = dmod_detail::decomposition_label(d1) + " ~ " + dmod_detail::decomposition_label(d2);
        rel.parts.emplace_back(dmod_detail::decomposition_word(ctx, d1, s1), d1.base);
        auto rhs = dmod_detail::decomposition_word(ctx, d2, s2);
        auto neg = DWord::mk(DWord::Kind::Prod);
        auto m1 = DWord::mk(DWord::Kind::Const);
        m1->value = Rat(-1);
        neg->kids.push_back(m1);
        neg->kids.push_back(rhs);
        rel.parts.emplace_back(neg, d2.base);
        out.push_back(rel);
      }
  }
  return out;
}

/*
 * Coverage check for a generator set: inside every maximal cone, each point
 * with Psi mass below the bound must be reachable from some generator by
 * steps among the directions lying in that cone.
 */
inline bool generators_check(const DModContext& ctx, const std::vector<std::vector<Int>>& gens,
                             const Rat& mass_bound) {
  for (const auto& sigma : ctx.fan.cones) {
    std::set<int> in(sigma.begin(), sigma.end());
    std::vector<std::vector<Int>> steps;
    for (size_t s = 0; s < ctx.sdirs.size(); ++s) {
      bool inside = true;
      for (int i = 0; i < ctx.fan.m(); ++i)
        if (ctx.spsi[s][static_cast<size_t>(i)] != 0 && !in.count(i)) inside = false;
      if (inside) steps.push_back(ctx.sdirs[s]);
    }
    std::set<std::vector<Int>> genset;
    for (const auto& g : gens) {
      auto gn = ctx.fan.N.normalize(g);
      // only generators supported inside sigma may seed this chart
      auto sig = find_containing_cone(ctx.fan, gn);
      if (!sig) continue;
      bool inside = true;
      auto pg = psi(ctx.fan, gn, *sig);
      for (int i = 0; i < ctx.fan.m(); ++i)
        if ((*pg)[static_cast<size_t>(i)] != 0 && !in.count(i)) inside = false;
      if (inside) genset.insert(gn);
    }
    for (const auto& k : cone_lattice_points(ctx.fan, sigma, mass_bound)) {
      // reachability: k - sum steps hits a generator
      std::set<std::vector<Int>> visited;
      std::vector<std::vector<Int>> stack{k};
      bool found = false;
      while (!stack.empty() && !found) {
        auto cur = stack.back();
        stack.pop_back();
        if (!visited.insert(cur).second) continue;
        if (genset.count(cur)) {
          found = true;
          break;
        }
        for (const auto& l : steps) {
          auto prev = ctx.fan.N.normalize(ctx.fan.N.add(cur, ctx.fan.N.neg(l)));
          // stay inside the cone
          auto sig = find_containing_cone(ctx.fan, prev);
          if (!sig) continue;
          auto pp = psi(ctx.fan, prev, *sig);
          bool inside = true;
          for (int i = 0; i < ctx.fan.m(); ++i)
            if ((*pp)[static_cast<size_t>(i)] != 0 && !in.count(i)) inside = false;
          if (inside) stack.push_back(prev);
        }
      }
      if (!found) return false;
    }
  }
  return true;
}

/*
 * Weight grading: deg 1_k = |k|, deg z = deg chi = 1, deg y_l = 1 - |l|,
 * deg q_j = c1 . basis_j.  Returns the common degree if homogeneous.
 */
namespace dmod_detail {

inline std::vector<Rat> grading_weights(const DModContext& ctx) {
  std::vector<Rat> w(static_cast<size_t>(ctx.nvars()), Rat(0));
  for (int t = 0; t < ctx.nchi; ++t) w[static_cast<size_t>(t)] = Rat(1);
  for (int g = 0; g < ctx.ny; ++g)
    w[static_cast<size_t>(ctx.yvar(g))] = Rat(1) - ctx.smass[static_cast<size_t>(ctx.fan.m() + g)];
  for (int j = 0; j < ctx.nq; ++j) {
    Rat c1(0);
    for (int i = 0; i < ctx.fan.m(); ++i) c1 += curves_detail::lambda_entry(ctx.seq.lambda, i, j);
    w[static_cast<size_t>(ctx.qvar(j))] = c1;
  }
  return w;
}

inline std::optional<Rat> mpoly_weighted_degree(const MPoly& p, const std::vector<Rat>& w,
                                                const Rat& zshift) {
  std::optional<Rat> deg;
  for (const auto& [e, c] : p.terms()) {
    (void)c;
    Rat d = zshift;
    for (size_t i = 0; i < e.size(); ++i)
      if (e[i] != 0) d += w[i] * Rat(e[i]);
    if (!deg) deg = d;
    else if (*deg != d) return std::nullopt;
  }
  return deg;  // nullopt only for the zero polynomial handled by caller
}

inline std::optional<Rat> zpoly_weighted_degree(const ZPoly& p, const std::vector<Rat>& w) {
  std::optional<Rat> deg;
  for (const auto& [k, c] : p.coeffs()) {
    auto d = mpoly_weighted_degree(c, w, Rat(k));
    if (!d) return std::nullopt;
    if (!deg) deg = d;
    else if (*deg != *d) return std::nullopt;
  }
  return deg;
}

}  // namespace dmod_detail

inline std::optional<Rat> grading_degree(const DModContext& ctx, const DModElement& e) {
  if (e.is_zero()) return Rat(0);
  auto w = dmod_detail::grading_weights(ctx);
  std::optional<Rat> deg;
  for (const auto& [k, c] : e.terms) {
    auto sig = find_containing_cone(ctx.fan, k);
    auto pk = psi(ctx.fan, k, *sig);
    Rat mass(0);
    for (const auto& x : *pk) mass += x;
    auto dn = dmod_detail::zpoly_weighted_degree(c.num(), w);
    auto dd = dmod_detail::zpoly_weighted_degree(c.den(), w);
    if (!dn || !dd) return std::nullopt;
    Rat d = mass + *dn - *dd;
    if (!deg) deg = d;
    else if (*deg != d) return std::nullopt;
  }
  return deg;
}

/*
 * Rewriting a unit over a basis of units: the scalar chi_t multiplication
 * agrees with the chi action, which ties each unit to its S neighbours.
 * Rounds of these identities form a linear system over the rational function
 * field; solved unknowns yield the expansions.
 */
using UnitExpansion = std::map<std::vector<Int>, std::map<std::vector<Int>, ZRat>>;

inline UnitExpansion unit_rewrite(const DModContext& ctx,
                                  const std::vector<std::vector<Int>>& targets,
                                  const std::vector<std::vector<Int>>& basis,
                                  int max_rounds = 4) {
  std::set<std::vector<Int>> basis_set;
  for (const auto& b : basis) basis_set.insert(ctx.fan.N.normalize(b));
  std::set<std::vector<Int>> need;
  UnitExpansion result;
  for (const auto& t : targets) {
    auto tn = ctx.fan.N.normalize(t);
    if (basis_set.count(tn)) {
      result[tn][tn] = ZRat::constant(ctx.nvars(), Rat(1));
    } else {
      need.insert(tn);
    }
  }
  if (need.empty()) return result;

  std::set<std::vector<Int>> region = basis_set;
  for (const auto& t : need) region.insert(t);

  for (int round = 0; round < max_rounds; ++round) {
    // assemble the chi identities at every unit of the region
    struct Eq {
      std::map<std::vector<Int>, ZRat> lhs;  // over all units
    };
    std::vector<Eq> eqs;
    std::set<std::vector<Int>> units = region;
    for (const auto& kp : region) {
      if (!find_containing_cone(ctx.fan, kp)) continue;
      for (int t = 0; t < ctx.fan.n(); ++t) {
        Eq eq;
        std::vector<Rat> chi(static_cast<size_t>(ctx.fan.n()), Rat(0));
        chi[static_cast<size_t>(t)] = Rat(1);
        ZRat head = dmod_detail::zrat_var(ctx, t) -
                    dmod_detail::zrat_z(ctx) *
                        ZRat::constant(ctx.nvars(), dmod_detail::chi_pair(ctx, chi, kp));
        eq.lhs[kp] = head;
        for (size_t s = 0; s < ctx.sdirs.size(); ++s) {
          Rat cl = dmod_detail::chi_pair(ctx, chi, ctx.sdirs[s]);
          if (cl == 0) continue;
          auto kl = ctx.fan.N.normalize(ctx.fan.N.add(kp, ctx.sdirs[s]));
          auto d = dclass(ctx.fan, ctx.seq, kp, ctx.sdirs[s]);
          ZRat coeff = ZRat::constant(ctx.nvars(), -cl) * dmod_detail::zrat_qmono(ctx, d);
          if (static_cast<int>(s) >= ctx.fan.m())
            coeff = coeff * dmod_detail::zrat_var(ctx, ctx.yvar(static_cast<int>(s) - ctx.fan.m()));
          auto it = eq.lhs.find(kl);
          if (it == eq.lhs.end()) eq.lhs[kl] = coeff;
          else it->second = it->second + coeff;
          units.insert(kl);
        }
        eqs.push_back(std::move(eq));
      }
    }
    // unknowns: units outside the basis
    std::vector<std::vector<Int>> unk;
    for (const auto& u : units)
      if (!basis_set.count(u)) unk.push_back(u);
    std::map<std::vector<Int>, int> unk_idx;
    for (size_t i = 0; i < unk.size(); ++i) unk_idx[unk[i]] = static_cast<int>(i);
    std::vector<std::vector<Int>> bas(basis_set.begin(), basis_set.end());
    std::map<std::vector<Int>, int> bas_idx;
    for (size_t i = 0; i < bas.size(); ++i) bas_idx[bas[i]] = static_cast<int>(i);

    if (!unk.empty() && !eqs.empty()) {
      const int nunk = static_cast<int>(unk.size());
      std::vector<std::map<int, ZRat>> rows(eqs.size());
      for (size_t e = 0; e < eqs.size(); ++e)
        for (const auto& [u, c] : eqs[e].lhs) {
          auto iu = unk_idx.find(u);
          // known units move to the right-hand side
          if (iu != unk_idx.end()) rows[e][iu->second] = c;
          else rows[e][nunk + bas_idx[u]] = -c;
        }
      std::vector<int> pivot_row(static_cast<size_t>(nunk), -1);
      std::vector<bool> used(rows.size(), false);
      auto entry_size = [](const ZRat& v) {
        size_t t = 0;
        for (const auto& [k, p] : v.num().coeffs()) t += p.terms().size();
        for (const auto& [k, p] : v.den().coeffs()) t += p.terms().size();
        return t;
      };
      while (true) {
        // pivot on the smallest entry, tie-broken by least fill-in
        std::map<int, int> col_count;
        for (size_t r = 0; r < rows.size(); ++r) {
          if (used[r]) continue;
          for (const auto& [c, v] : rows[r])
            if (c < nunk) ++col_count[c];
        }
        int br = -1, bc = -1;
        size_t bsize = 0, bfill = 0;
        for (size_t r = 0; r < rows.size(); ++r) {
          if (used[r]) continue;
          size_t live = 0;
          for (const auto& [c, v] : rows[r])
            if (c < nunk) ++live;
          if (live == 0) continue;
          for (const auto& [c, v] : rows[r]) {
            if (c >= nunk) continue;
            size_t sz = entry_size(v);
            size_t fill = (live - 1) * static_cast<size_t>(col_count[c] - 1);
            if (br < 0 || sz < bsize || (sz == bsize && fill < bfill)) {
              br = static_cast<int>(r);
              bc = c;
              bsize = sz;
              bfill = fill;
            }
          }
        }
        if (br < 0) break;
        const ZRat piv = rows[static_cast<size_t>(br)].at(bc);
        for (size_t r = 0; r < rows.size(); ++r) {
          if (static_cast<int>(r) == br) continue;
          auto it = rows[r].find(bc);
          if (it == rows[r].end()) continue;
          ZRat f = it->second / piv;
          rows[r].erase(it);
          for (const auto& [c, v] : rows[static_cast<size_t>(br)]) {
            if (c == bc) continue;
            auto jt = rows[r].find(c);
            if (jt == rows[r].end()) {
              ZRat nv = -(f * v);
              if (!nv.is_zero()) rows[r].emplace(c, std::move(nv));
            } else {
              jt->second = jt->second - f * v;
              if (jt->second.is_zero()) rows[r].erase(jt);
            }
          }
        }
        used[static_cast<size_t>(br)] = true;
        pivot_row[static_cast<size_t>(bc)] = br;
      }
      // a pivot row whose only unknown is its pivot determines that unit
      for (int c = 0; c < nunk; ++c) {
        int r = pivot_row[static_cast<size_t>(c)];
        if (r < 0) continue;
        const auto& u = unk[static_cast<size_t>(c)];
        if (!need.count(u)) continue;
        bool clean = true;
        for (const auto& [cc, v] : rows[static_cast<size_t>(r)])
          if (cc < nunk && cc != c) clean = false;
        if (!clean) continue;
        const ZRat& lead = rows[static_cast<size_t>(r)].at(c);
        std::map<std::vector<Int>, ZRat> expansion;
        for (const auto& [cc, v] : rows[static_cast<size_t>(r)]) {
          if (cc < nunk) continue;
          ZRat x = v / lead;
          if (!x.is_zero()) expansion[bas[static_cast<size_t>(cc - nunk)]] = x;
        }
        result[u] = expansion;
        need.erase(u);
      }
    }
    if (need.empty()) return result;
    region = units;
  }
  throw std::runtime_error("unit_rewrite: expansion not found within the round limit");
}

/* Expand a module element over a unit basis; coefficients are ZRat. */
inline std::optional<std::vector<ZRat>> element_in_basis(const DModContext& ctx,
                                                         const DModElement& e,
                                                         const std::vector<std::vector<Int>>& basis,
                                                         int max_rounds = 4) {
  std::vector<std::vector<Int>> targets;
  for (const auto& [k, c] : e.terms) {
    (void)c;
    targets.push_back(k);
  }
  UnitExpansion exp;
  try {
    exp = unit_rewrite(ctx, targets, basis, max_rounds);
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
  std::vector<ZRat> out(basis.size(), ZRat::constant(ctx.nvars(), Rat(0)));
  std::map<std::vector<Int>, int> bidx;
  for (size_t i = 0; i < basis.size(); ++i) bidx[ctx.fan.N.normalize(basis[i])] = static_cast<int>(i);
  for (const auto& [k, c] : e.terms)
    for (const auto& [b, x] : exp.at(k)) out[static_cast<size_t>(bidx.at(b))] += c * x;
  return out;
}

/* Matrix of an operator word in a unit basis (columns are images). */
inline KMatrix<ZRat> matrix_of_operator(const DModContext& ctx, const DWordPtr& op,
                                        const std::vector<std::vector<Int>>& basis,
                                        int max_rounds = 4) {
  const ZRat zero = ZRat::constant(ctx.nvars(), Rat(0));
  KMatrix<ZRat> mat(static_cast<int>(basis.size()), static_cast<int>(basis.size()), zero);
  for (size_t j = 0; j < basis.size(); ++j) {
    auto img = apply_operator(ctx, op, unit_element(ctx, basis[j]));
    auto coords = element_in_basis(ctx, img, basis, max_rounds);
    if (!coords) throw std::runtime_error("matrix_of_operator: image not expandable");
    for (size_t i = 0; i < basis.size(); ++i) mat.at(static_cast<int>(i), static_cast<int>(j)) = (*coords)[i];
  }
  return mat;
}

inline std::string element_to_string(const DModContext& ctx, const DModElement& e) {
  if (e.is_zero()) return "0";
  auto names = ctx.var_names();
  std::string s;
  for (const auto& [k, c] : e.terms) {
    if (!s.empty()) s += " + ";
    s += "[" + c.to_string(names) + "] unit(";
    for (size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + k[i].str();
    s += ")";
  }
  return s;
}

}  // namespace toricmirror
