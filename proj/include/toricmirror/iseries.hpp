#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chenruan.hpp"
#include "fandmod.hpp"
#include "series.hpp"

namespace toricmirror {

/*
 * Hypergeometric index sets and the fixed-point expansion of the mirror
 * sections.  loc_series(k) expands the section attached to k as a truncated
 * series in the Novikov variables, the divisor parameters t_i and the extra
 * deformation parameters y_l, with localized-class coefficients.  The ray
 * coordinates y_i = e^{t_i} are expanded at t = 0; rational powers y_i^{c}
 * become e^{c t_i} and stay exact.
 */

struct MirrorSetup {
  DModContext ctx;
  LocalizationFrame frame;
  std::vector<int> sigma0;      // splitting cone for the lambda classes
  Profile profile;              // default truncation
  std::vector<Rat> chi_values;  // empty: keep the equivariant parameters symbolic

  const StackyFan& fan() const { return ctx.fan; }
  int m() const { return ctx.fan.m(); }
  int nchi() const { return ctx.fan.n(); }
  int ng() const { return static_cast<int>(ctx.gdirs.size()); }
  int qrank() const { return ctx.mori.lambda.rank(); }
};

inline Profile make_profile(const MirrorSetup& s, long qdeg, long tord, long yord) {
  Profile p;
  p.qdeg = qdeg;
  p.tord = tord;
  p.yord = yord;
  p.ample = s.ctx.mori.ample;
  return p;
}

inline MirrorSetup build_setup(const StackyFan& f,
                               const std::vector<std::vector<Int>>& extra_dirs) {
  MirrorSetup s;
  s.ctx = build_dmod(f, extra_dirs);
  s.frame = build_frame(f);
  s.sigma0 = f.cones.front();
  s.profile = make_profile(s, 2, 2, 2);
  return s;
}

inline MirrorSetup build_setup_default(const StackyFan& f) {
  return build_setup(f, default_directions(f));
}

/* One index of the hypergeometric sum attached to k: the ray exponents, the
 * extra-direction exponents, and the derived curve class and sector. */
struct HypIndex {
  std::vector<Rat> lam;   // length m
  std::vector<Int> lamG;  // one exponent per extra direction
  std::vector<Int> d;     // curve class, lattice-basis coordinates
  BoxElement v;           // sector of the summand
};

namespace iseries_detail {

inline std::vector<Int> zero_vec(int len) { return std::vector<Int>(static_cast<size_t>(len), Int(0)); }

/* All tuples in Z_{>=0}^len with entry sum <= bound. */
inline std::vector<std::vector<Int>> bounded_tuples(int len, long bound) {
  std::vector<std::vector<Int>> out;
  std::vector<Int> cur(static_cast<size_t>(len), Int(0));
  std::function<void(int, long)> rec = [&](int pos, long left) {
    if (pos == len) {
      out.push_back(cur);
      return;
    }
    for (long v = 0; v <= left; ++v) {
      cur[static_cast<size_t>(pos)] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, bound);
  return out;
}

inline std::vector<std::vector<int>> bounded_tuples_int(int len, long bound) {
  std::vector<std::vector<int>> out;
  for (const auto& t : bounded_tuples(len, bound)) {
    std::vector<int> u(t.size());
    for (size_t i = 0; i < t.size(); ++i) u[i] = static_cast<int>(t[i]);
    out.push_back(u);
  }
  return out;
}

/* u + c z over the chi variables. */
inline ZRat weight_shift(const MPoly& u, const Rat& c) {
  ZPoly p = ZPoly::from_mpoly(u);
  if (c != 0) p += ZPoly::term(1, MPoly::constant(u.nvars(), c));
  return ZRat(p);
}

inline ZRat one_over_z_power(int nvars, long a, const Rat& scale) {
  return ZRat(ZPoly::constant(nvars, scale), ZPoly::z_power(nvars, a));
}

/* z d/dz as the Euler operator on the z powers. */
inline ZPoly zpoly_theta_z(const ZPoly& p) {
  ZPoly r(p.nvars());
  for (const auto& [k, c] : p.coeffs())
    if (k != 0) r.add_term(k, c * Rat(k));
  return r;
}

inline ZRat zrat_theta_z(const ZRat& v) {
  return ZRat(zpoly_theta_z(v.num()) * v.den() - v.num() * zpoly_theta_z(v.den()),
              v.den() * v.den());
}

inline Rat rat_sum(const std::vector<Rat>& v) {
  Rat s(0);
  for (const auto& x : v) s += x;
  return s;
}

}  // namespace iseries_detail

/* Global psi coordinates of k; throws off the support. */
inline std::vector<Rat> support_psi(const MirrorSetup& s, const std::vector<Int>& k) {
  auto sig = find_containing_cone(s.fan(), k);
  if (!sig) throw std::invalid_argument("support_psi: k outside the support");
  auto p = psi(s.fan(), k, *sig);
  if (!p) throw std::runtime_error("support_psi: coordinate solve failed");
  return *p;
}

/*
 * Index enumeration.  Effective curve classes within the profile degree and
 * nonnegative extra-direction exponents within the y order determine the ray
 * exponents; an index survives when its fractional rays span a cone and the
 * free images balance.
 */
inline std::vector<HypIndex> enumerate_K(const MirrorSetup& s, const std::vector<Int>& k,
                                         const Profile& p) {
  const StackyFan& f = s.fan();
  const int m = f.m(), ng = s.ng(), dim = f.N.dim();
  std::vector<HypIndex> out;
  auto psik = support_psi(s, k);
  auto classes = enumerate_effective(f, s.ctx.mori, Int(p.qdeg));
  auto tuples = iseries_detail::bounded_tuples(ng, p.yord);
  for (const auto& d : classes) {
    auto dqm = s.ctx.mori.lambda.from_coordinates(d);
    for (const auto& lamG : tuples) {
      HypIndex x;
      x.d = d;
      x.lamG = lamG;
      x.lam.assign(static_cast<size_t>(m), Rat(0));
      for (int i = 0; i < m; ++i) {
        Rat li = dqm[static_cast<size_t>(i)] - psik[static_cast<size_t>(i)];
        for (int g = 0; g < ng; ++g)
          li -= Rat(lamG[static_cast<size_t>(g)]) *
                s.ctx.spsi[static_cast<size_t>(m + g)][static_cast<size_t>(i)];
        x.lam[static_cast<size_t>(i)] = li;
      }
      std::vector<int> frac;
      for (int i = 0; i < m; ++i)
        if (!rat_is_integer(x.lam[static_cast<size_t>(i)])) frac.push_back(i);
      bool spans = false;
      for (const auto& c : f.cones)
        if (std::includes(c.begin(), c.end(), frac.begin(), frac.end())) spans = true;
      if (!spans) continue;
      // balance of the free images
      auto kbar = f.N.free_image(k);
      std::vector<Rat> bal;
      bal.reserve(kbar.size());
      for (const auto& t : kbar) bal.push_back(Rat(t));
      for (int i = 0; i < m; ++i) {
        auto bb = f.bbar(i);
        for (int t = 0; t < f.n(); ++t)
          bal[static_cast<size_t>(t)] += x.lam[static_cast<size_t>(i)] * Rat(bb[static_cast<size_t>(t)]);
      }
      for (int g = 0; g < ng; ++g) {
        auto lb = f.N.free_image(s.ctx.gdirs[static_cast<size_t>(g)]);
        for (int t = 0; t < f.n(); ++t)
          bal[static_cast<size_t>(t)] += Rat(lamG[static_cast<size_t>(g)]) * Rat(lb[static_cast<size_t>(t)]);
      }
      bool balanced = true;
      for (const auto& v : bal)
        if (v != 0) balanced = false;
      if (!balanced) continue;
      // sector of the summand
      std::vector<Int> v(k.begin(), k.end());
      v.resize(static_cast<size_t>(dim), Int(0));
      for (int i = 0; i < m; ++i) {
        Int ce = rat_ceil(x.lam[static_cast<size_t>(i)]);
        for (int t = 0; t < dim; ++t)
          v[static_cast<size_t>(t)] += ce * f.b[static_cast<size_t>(i)][static_cast<size_t>(t)];
      }
      for (int g = 0; g < ng; ++g)
        for (int t = 0; t < dim; ++t)
          v[static_cast<size_t>(t)] +=
              lamG[static_cast<size_t>(g)] * s.ctx.gdirs[static_cast<size_t>(g)][static_cast<size_t>(t)];
      x.v.k = f.N.normalize(v);
      x.v.sigma = frac;
      x.v.psi.assign(static_cast<size_t>(m), Rat(0));
      for (int i : frac)
        x.v.psi[static_cast<size_t>(i)] =
            Rat(rat_ceil(x.lam[static_cast<size_t>(i)])) - x.lam[static_cast<size_t>(i)];
      out.push_back(std::move(x));
    }
  }
  return out;
}

/*
 * The telescoped weight factor of one index, restricted to the fixed points.
 * Positive ray exponents contribute reciprocal factors (u_i + cz) over the
 * fractional ladder 0 < c <= lam_i, negative ones direct factors over
 * lam_i < c <= 0; extra directions carry 1/(a! z^a).  An entry appears at a
 * fixed point only when its cone contains the sector's minimal cone, and a
 * direct factor with c = 0 kills the entry off the ray's star.
 */
inline LocalizedClass hyp_factor(const MirrorSetup& s, const HypIndex& x) {
  const StackyFan& f = s.fan();
  const int n = f.n(), m = f.m(), ng = s.ng();
  LocalizedClass out;
  auto vn = f.N.normalize(x.v.k);
  for (size_t ci = 0; ci < f.cones.size(); ++ci) {
    const auto& cone = f.cones[ci];
    if (!std::includes(cone.begin(), cone.end(), x.v.sigma.begin(), x.v.sigma.end())) continue;
    const auto& fp = s.frame.fixed[ci];
    ZRat val = ZRat::constant(n, Rat(1));
    bool dead = false;
    for (int i = 0; i < m && !dead; ++i) {
      const Rat& li = x.lam[static_cast<size_t>(i)];
      const MPoly& u = fp.u[static_cast<size_t>(i)];
      if (li > 0) {
        Int steps = rat_ceil(li);
        for (Int j(0); j < steps; ++j) {
          Rat c = li - Rat(j);
          if (c == 0) throw std::logic_error("hyp_factor: zero shift in a denominator");
          val = val / iseries_detail::weight_shift(u, c);
        }
      } else if (li < 0) {
        Int steps = rat_floor(-li);
        for (Int j(1); j <= steps; ++j) {
          Rat c = li + Rat(j);
          ZRat fac = iseries_detail::weight_shift(u, c);
          if (fac.is_zero()) {
            dead = true;
            break;
          }
          val = val * fac;
        }
      }
    }
    for (int g = 0; g < ng && !dead; ++g) {
      const Int& a = x.lamG[static_cast<size_t>(g)];
      if (a > 0) {
        long al = static_cast<long>(a);
        val = val * iseries_detail::one_over_z_power(n, al, Rat(1) / Rat(int_factorial(al)));
      } else if (a < 0) {
        dead = true;  // the ladder through c = 0 vanishes
      }
    }
    if (dead || val.is_zero()) continue;
    out.add({static_cast<int>(ci), vn}, val);
  }
  return out;
}

/* Truncated series with localized-class coefficients. */
using LocSeries = TruncSeries<LocalizedClass>;

/*
 * Full expansion of the section attached to k.  Each index contributes its
 * weight factor on the key (d, 0, lamG), spread over the t orders by the
 * combined exponential exp(sum_i (lam_i + u_i/z) t_i) taken per fixed point.
 */
inline LocSeries loc_series(const MirrorSetup& s, const std::vector<Int>& k, const Profile& p) {
  const StackyFan& f = s.fan();
  const int n = f.n(), m = f.m();
  LocSeries out(p);
  auto tlist = iseries_detail::bounded_tuples_int(m, p.tord);
  for (const auto& x : enumerate_K(s, k, p)) {
    LocalizedClass h = hyp_factor(s, x);
    if (h.is_zero()) continue;
    for (const auto& a : tlist) {
      Rat afact(1);
      for (int i = 0; i < m; ++i)
        afact *= Rat(int_factorial(a[static_cast<size_t>(i)]));
      LocalizedClass c;
      for (const auto& [sk, v] : h.entries) {
        const auto& fp = s.frame.fixed[static_cast<size_t>(sk.first)];
        ZRat w = v;
        for (int i = 0; i < m; ++i) {
          int e = a[static_cast<size_t>(i)];
          if (e == 0) continue;
          // lam_i + u_i/z  =  (lam_i z + u_i)/z
          ZPoly num = ZPoly::from_mpoly(fp.u[static_cast<size_t>(i)]);
          const Rat& li = x.lam[static_cast<size_t>(i)];
          if (li != 0) num += ZPoly::term(1, MPoly::constant(n, li));
          ZRat base(num, ZPoly::z_power(n, 1));
          for (int rep = 0; rep < e; ++rep) w = w * base;
        }
        c.add(sk, w * ZRat::constant(n, Rat(1) / afact));
      }
      SeriesKey key{x.d, a, std::vector<int>()};
      key.yexp.reserve(x.lamG.size());
      for (const auto& b : x.lamG) key.yexp.push_back(static_cast<int>(b));
      out.add(key, c);
    }
  }
  return out;
}

/* Constant term of the expansion in closed form: the ladder of k's own psi
 * coordinates on the sector of its box reduction.  Leading term phi_k. */
inline LocalizedClass loc_zero(const MirrorSetup& s, const std::vector<Int>& k) {
  const StackyFan& f = s.fan();
  auto sig = find_containing_cone(f, k);
  if (!sig) throw std::invalid_argument("loc_zero: k outside the support");
  auto red = box_reduce(f, k, *sig);
  if (!red) throw std::runtime_error("loc_zero: reduction failed");
  auto psik = support_psi(s, k);
  HypIndex x;
  x.lam.reserve(psik.size());
  for (const auto& c : psik) x.lam.push_back(-c);
  x.lamG = iseries_detail::zero_vec(s.ng());
  x.d = iseries_detail::zero_vec(s.qrank());
  x.v = red->v;
  return hyp_factor(s, x);
}

inline LocSeries series_scale(const LocSeries& s, const ZRat& c) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) r.add(k, v.scaled(c));
  return r;
}

/* The extended series of the unit section, normalized by one power of z. */
inline LocSeries ifunction(const MirrorSetup& s, const Profile& p) {
  const int dim = s.fan().N.dim(), n = s.fan().n();
  auto L = loc_series(s, iseries_detail::zero_vec(dim), p);
  return series_scale(L, ZRat(ZPoly::z_power(n, 1)));
}

/* ---- series operations used by the differential-equation checks ---- */

inline LocSeries series_qshift(const LocSeries& s, const std::vector<Int>& delta) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    SeriesKey k2 = k;
    for (size_t j = 0; j < k2.qexp.size(); ++j) k2.qexp[j] += delta[j];
    r.add(k2, v);
  }
  return r;
}

inline LocSeries series_yshift(const LocSeries& s, int g) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    SeriesKey k2 = k;
    k2.yexp[static_cast<size_t>(g)] += 1;
    r.add(k2, v);
  }
  return r;
}

inline LocSeries series_tderiv(const LocSeries& s, int i) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    int e = k.texp[static_cast<size_t>(i)];
    if (e == 0) continue;
    SeriesKey k2 = k;
    k2.texp[static_cast<size_t>(i)] = e - 1;
    r.add(k2, v.scaled(ZRat::constant(v.entries.begin()->second.nvars(), Rat(e))));
  }
  return r;
}

inline LocSeries series_yderiv(const LocSeries& s, int g) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    int e = k.yexp[static_cast<size_t>(g)];
    if (e == 0) continue;
    SeriesKey k2 = k;
    k2.yexp[static_cast<size_t>(g)] = e - 1;
    r.add(k2, v.scaled(ZRat::constant(v.entries.begin()->second.nvars(), Rat(e))));
  }
  return r;
}

/* Multiply by the expanded exp(sign * t_i). */
inline LocSeries series_mul_exp_t(const LocSeries& s, int i, int sign) {
  const Profile& p = s.profile();
  LocSeries r(p);
  for (long j = 0; j <= p.tord; ++j) {
    Rat c = rat_pow(Rat(sign), j) / Rat(int_factorial(j));
    for (const auto& [k, v] : s.terms()) {
      SeriesKey k2 = k;
      k2.texp[static_cast<size_t>(i)] += static_cast<int>(j);
      if (!p.within(k2)) continue;
      int n = v.entries.begin()->second.nvars();
      r.add(k2, v.scaled(ZRat::constant(n, c)));
    }
  }
  return r;
}

/* Scale each coefficient by a function of the series key. */
inline LocSeries series_key_scale(const LocSeries& s,
                                  const std::function<Rat(const SeriesKey&)>& w) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    Rat c = w(k);
    if (c == 0) continue;
    int n = v.entries.begin()->second.nvars();
    r.add(k, v.scaled(ZRat::constant(n, c)));
  }
  return r;
}

/* Apply a map to every fixed-point entry. */
inline LocSeries series_entry_map(const LocSeries& s,
                                  const std::function<ZRat(const SectorKey&, const ZRat&)>& fn) {
  LocSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    LocalizedClass c;
    for (const auto& [sk, e] : v.entries) c.add(sk, fn(sk, e));
    r.add(k, c);
  }
  return r;
}

inline std::string series_key_to_string(const SeriesKey& k) {
  std::ostringstream os;
  auto list = [&os](const char* tag, auto const& v) {
    os << tag << "(";
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ")";
  };
  list("q", k.qexp);
  os << " ";
  list("t", k.texp);
  os << " ";
  list("y", k.yexp);
  return os.str();
}

struct OdeReport {
  bool ok = true;
  int checks = 0;
  std::string first_violation;
};

namespace iseries_detail {

inline void ode_compare(OdeReport& rep, const LocSeries& lhs, const LocSeries& rhs,
                        const Profile& cmp, const std::string& label) {
  if (!rep.ok) return;
  LocSeries diff = lhs.truncated(cmp);
  diff -= rhs.truncated(cmp);
  if (diff.is_zero()) {
    ++rep.checks;
    return;
  }
  rep.ok = false;
  rep.first_violation = label + " at " + series_key_to_string(diff.terms().begin()->first);
}

}  // namespace iseries_detail

/*
 * Differential equations of the expansion, checked coefficient by coefficient
 * on the window {0} union S:
 *   - the Novikov derivative in each lattice-basis direction against the
 *     connection action (lambda-class scaling plus the weighted shift sum),
 *   - the derivative in each direction of S against the shifted section,
 *   - the grading identity against the Euler and sector-age operators.
 */
inline OdeReport verify_loc_ode(const MirrorSetup& s, const Profile& p) {
  const StackyFan& f = s.fan();
  const int n = f.n(), m = f.m(), ng = s.ng(), rank = s.qrank(), dim = f.N.dim();
  OdeReport rep;

  std::vector<std::vector<Int>> window;
  window.push_back(iseries_detail::zero_vec(dim));
  for (const auto& l : s.ctx.sdirs) window.push_back(l);

  std::map<std::vector<Int>, LocSeries> cache;
  auto loc = [&](const std::vector<Int>& k) -> const LocSeries& {
    auto kn = f.N.normalize(k);
    auto it = cache.find(kn);
    if (it == cache.end()) it = cache.emplace(kn, loc_series(s, kn, p)).first;
    return it->second;
  };
  auto add_vec = [&](const std::vector<Int>& a, const std::vector<Int>& b) {
    std::vector<Int> r(a.begin(), a.end());
    r.resize(static_cast<size_t>(dim), Int(0));
    for (int t = 0; t < dim; ++t) r[static_cast<size_t>(t)] += b[static_cast<size_t>(t)];
    return f.N.normalize(r);
  };
  const ZRat inv_z = iseries_detail::one_over_z_power(n, 1, Rat(1));

  // lambda classes of the directions and the per-cone weight lifts
  std::vector<std::vector<Int>> dir_lambda;
  for (const auto& l : s.ctx.sdirs) dir_lambda.push_back(lambda_class(f, s.ctx.seq, l, s.sigma0));
  std::vector<std::vector<ZRat>> xihat(static_cast<size_t>(rank));
  for (int j = 0; j < rank; ++j) {
    for (size_t ci = 0; ci < f.cones.size(); ++ci) {
      MPoly acc(n);
      for (int i = 0; i < m; ++i) {
        const Int& w = dir_lambda[static_cast<size_t>(i)][static_cast<size_t>(j)];
        if (w != 0) acc += s.frame.fixed[ci].u[static_cast<size_t>(i)] * MPoly::constant(n, Rat(w));
      }
      xihat[static_cast<size_t>(j)].push_back(ZRat(ZPoly::from_mpoly(acc), ZPoly::z_power(n, 1)));
    }
  }

  // sector ages per fixed point
  std::map<std::vector<Int>, Rat> sector_age;
  for (const auto& bx : box(f)) sector_age[f.N.normalize(bx.k)] = bx.age();

  for (const auto& k0 : window) {
    auto k = f.N.normalize(k0);
    const LocSeries& base = loc(k);
    auto lamk = lambda_class(f, s.ctx.seq, k, s.sigma0);

    // Novikov directions
    for (int j = 0; j < rank && rep.ok; ++j) {
      LocSeries lhs = series_scale(base, ZRat::constant(n, Rat(lamk[static_cast<size_t>(j)])));
      for (size_t si = 0; si < s.ctx.sdirs.size(); ++si) {
        const Int& coef = dir_lambda[si][static_cast<size_t>(j)];
        if (coef == 0) continue;
        const auto& l = s.ctx.sdirs[si];
        auto d = dclass(f, s.ctx.seq, k, l);
        if (!is_effective(f, s.ctx.mori, d))
          throw std::runtime_error("verify_loc_ode: connection shift class not effective");
        LocSeries term = series_qshift(loc(add_vec(k, l)), d);
        term = series_scale(term, inv_z * ZRat::constant(n, Rat(coef)));
        if (static_cast<int>(si) < m)
          term = series_mul_exp_t(term, static_cast<int>(si), 1);
        else
          term = series_yshift(term, static_cast<int>(si) - m);
        lhs += term;
      }
      LocSeries rhs = series_key_scale(base, [&](const SeriesKey& key) {
        return Rat(key.qexp[static_cast<size_t>(j)]);
      });
      rhs += series_entry_map(base, [&](const SectorKey& sk, const ZRat& e) {
        return e * xihat[static_cast<size_t>(j)][static_cast<size_t>(sk.first)];
      });
      iseries_detail::ode_compare(rep, lhs, rhs, p, "novikov direction " + std::to_string(j + 1));
    }

    // directions of S
    for (size_t si = 0; si < s.ctx.sdirs.size() && rep.ok; ++si) {
      const auto& l = s.ctx.sdirs[si];
      auto d = dclass(f, s.ctx.seq, k, l);
      if (!is_effective(f, s.ctx.mori, d))
        throw std::runtime_error("verify_loc_ode: connection shift class not effective");
      LocSeries lhs = series_scale(series_qshift(loc(add_vec(k, l)), d), inv_z);
      Profile cmp = p;
      LocSeries rhs(p);
      if (static_cast<int>(si) < m) {
        rhs = series_mul_exp_t(series_tderiv(base, static_cast<int>(si)), static_cast<int>(si), -1);
        cmp.tord = p.tord - 1;
      } else {
        rhs = series_yderiv(base, static_cast<int>(si) - m);
        cmp.yord = p.yord - 1;
      }
      iseries_detail::ode_compare(rep, lhs, rhs, cmp,
                                  "deformation direction " + std::to_string(si + 1));
    }

    // grading
    if (rep.ok) {
      Rat mass = iseries_detail::rat_sum(support_psi(s, k));
      LocSeries lhs = series_scale(base, ZRat::constant(n, mass));
      LocSeries rhs = series_entry_map(base, [&](const SectorKey&, const ZRat& e) {
        std::vector<Rat> ones(static_cast<size_t>(n), Rat(1));
        return iseries_detail::zrat_theta_z(e) + dmod_detail::zrat_weight_derivation(e, ones);
      });
      rhs += series_key_scale(base, [&](const SeriesKey& key) {
        Rat w = c1_degree(s.ctx.seq, key.qexp);
        for (int g = 0; g < ng; ++g)
          w += (Rat(1) - s.ctx.smass[static_cast<size_t>(m + g)]) *
               Rat(key.yexp[static_cast<size_t>(g)]);
        return w;
      });
      rhs += series_entry_map(base, [&](const SectorKey& sk, const ZRat& e) {
        return e * ZRat::constant(n, sector_age.at(sk.second));
      });
      iseries_detail::ode_compare(rep, lhs, rhs, p, "grading");
    }
    if (!rep.ok) {
      rep.first_violation += " of the section at k = (";
      for (size_t t = 0; t < k.size(); ++t)
        rep.first_violation += (t ? "," : "") + k[t].str();
      rep.first_violation += ")";
      break;
    }
  }
  return rep;
}

/* Specialize the equivariant parameters to rational values. */
inline ZRat chi_specialize(const std::vector<Rat>& values, const ZRat& v) {
  const int n = v.nvars();
  if (static_cast<int>(values.size()) != n)
    throw std::invalid_argument("chi_specialize: value count mismatch");
  std::vector<MPoly> images;
  images.reserve(values.size());
  for (const auto& c : values) images.push_back(MPoly::constant(n, c));
  ZPoly den = v.den().substitute_chi(images);
  if (den.is_zero()) throw std::invalid_argument("chi_specialize: denominator vanishes");
  return ZRat(v.num().substitute_chi(images), den);
}

}  // namespace toricmirror
