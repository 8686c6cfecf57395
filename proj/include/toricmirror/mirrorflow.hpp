#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iseries.hpp"
#include "kmatrix.hpp"

namespace toricmirror {

/*
 * Factorization of the section matrix and everything downstream of it.
 *
 * A basis of lattice points is selected so that the restrictions of their
 * leading classes span the localized frame.  The coordinate matrix L of the
 * expanded sections then factors as L = M * Y with M = I + (terms proper in
 * z) and Y z-polynomial, key by key in the deformation variables.  M gives
 * the mirror map through its unit column; Y conjugates the shift action into
 * connection matrices that are independent of z, which is where the product
 * structure is read off.  The pairing of sections is computed from the
 * localization data directly and compared against its z = 0 transport.
 */

using ZMat = KMatrix<ZRat>;
using MatSeries = TruncSeries<ZMat>;
using ScalSeries = TruncSeries<ZRat>;

namespace mirror_detail {

inline ZRat zr_const(int n, const Rat& c) { return ZRat::constant(n, c); }
inline ZRat zr_zero(int n) { return ZRat(n); }
inline ZRat zr_one(int n) { return ZRat::constant(n, Rat(1)); }
inline ZRat zr_z(int n, const Rat& c = Rat(1)) { return ZRat(ZPoly::z_power(n, 1, c)); }

inline ZMat zmat(int r, int c, int n) { return ZMat(r, c, zr_zero(n)); }
inline ZMat zmat_id(int N, int n) { return ZMat::identity(N, zr_zero(n), zr_one(n)); }

inline ZMat zmat_scaled(const ZMat& m, const ZRat& c) {
  ZMat r = m;
  for (int i = 0; i < r.rows(); ++i)
    for (int j = 0; j < r.cols(); ++j) r.at(i, j) = r.at(i, j) * c;
  return r;
}

inline ZMat zmat_transpose(const ZMat& m, int n) {
  ZMat r(m.cols(), m.rows(), zr_zero(n));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r.at(j, i) = m.at(i, j);
  return r;
}

inline ZMat zmat_entry_map(const ZMat& m, const std::function<ZRat(const ZRat&)>& fn) {
  ZMat r = m;
  for (int i = 0; i < r.rows(); ++i)
    for (int j = 0; j < r.cols(); ++j) r.at(i, j) = fn(r.at(i, j));
  return r;
}

inline bool zrat_z_free(const ZRat& f) {
  if (f.is_zero()) return true;
  return f.num().degree() == 0 && f.num().low_degree() == 0 && f.den().degree() == 0 &&
         f.den().low_degree() == 0;
}

/* Split into a z-polynomial part (denominator free of z) and a z-proper
 * remainder; the two pieces are exact and sum back to the input. */
inline std::pair<ZRat, ZRat> zrat_split_z(const ZRat& f) {
  const int n = f.nvars();
  if (f.is_zero() || f.is_z_polynomial()) return {f, zr_zero(n)};
  if (f.is_z_proper()) return {zr_zero(n), f};
  auto pd = zpoly_pseudo_divide(f.num(), f.den());
  ZRat poly(pd.quotient, ZPoly::from_mpoly(pd.scale));
  ZRat proper = f - poly;
  if (!proper.is_z_proper()) throw std::logic_error("zrat_split_z: remainder not proper");
  return {poly, proper};
}

/* Coefficient of 1/z in the expansion of a z-proper fraction at infinity. */
inline ZRat zrat_infinity_residue(const ZRat& f) {
  const int n = f.nvars();
  if (f.is_zero()) return zr_zero(n);
  if (!f.is_z_proper()) throw std::invalid_argument("zrat_infinity_residue: not proper");
  long dn = f.num().degree(), dd = f.den().degree();
  if (dn < dd - 1) return zr_zero(n);
  return ZRat(ZPoly::from_mpoly(f.num().coefficient(dn)),
              ZPoly::from_mpoly(f.den().coefficient(dd)));
}

/* Value at z = 0; the reduced denominator must not vanish there. */
inline ZRat zrat_at_z0(const ZRat& f) {
  const int n = f.nvars();
  if (f.is_zero()) return zr_zero(n);
  if (f.den().low_degree() > 0) throw std::runtime_error("zrat_at_z0: pole at z = 0");
  if (f.num().low_degree() > 0) return zr_zero(n);
  return ZRat(ZPoly::from_mpoly(f.num().coefficient(0)),
              ZPoly::from_mpoly(f.den().coefficient(0)));
}

inline ZMat mat_at(const MatSeries& s, const SeriesKey& k, int rows, int cols, int n) {
  const ZMat* p = s.coefficient(k);
  return p ? *p : zmat(rows, cols, n);
}

inline SeriesKey key_sub(const SeriesKey& a, const SeriesKey& b) {
  SeriesKey r = a;
  for (size_t i = 0; i < r.qexp.size(); ++i) r.qexp[i] -= b.qexp[i];
  for (size_t i = 0; i < r.texp.size(); ++i) r.texp[i] -= b.texp[i];
  for (size_t i = 0; i < r.yexp.size(); ++i) r.yexp[i] -= b.yexp[i];
  return r;
}

inline MatSeries mat_series_qshift(const MatSeries& s, const std::vector<Int>& delta) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    SeriesKey k2 = k;
    for (size_t j = 0; j < k2.qexp.size(); ++j) k2.qexp[j] += delta[j];
    r.add(k2, v);
  }
  return r;
}

inline MatSeries mat_series_yshift(const MatSeries& s, int g) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    SeriesKey k2 = k;
    k2.yexp[static_cast<size_t>(g)] += 1;
    r.add(k2, v);
  }
  return r;
}

inline MatSeries mat_series_tderiv(const MatSeries& s, int i, int n) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    int e = k.texp[static_cast<size_t>(i)];
    if (e == 0) continue;
    SeriesKey k2 = k;
    k2.texp[static_cast<size_t>(i)] = e - 1;
    r.add(k2, zmat_scaled(v, zr_const(n, Rat(e))));
  }
  return r;
}

inline MatSeries mat_series_yderiv(const MatSeries& s, int g, int n) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    int e = k.yexp[static_cast<size_t>(g)];
    if (e == 0) continue;
    SeriesKey k2 = k;
    k2.yexp[static_cast<size_t>(g)] = e - 1;
    r.add(k2, zmat_scaled(v, zr_const(n, Rat(e))));
  }
  return r;
}

inline MatSeries mat_series_qscale(const MatSeries& s, int j, int n) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) {
    const Int& e = k.qexp[static_cast<size_t>(j)];
    if (e == 0) continue;
    r.add(k, zmat_scaled(v, zr_const(n, Rat(e))));
  }
  return r;
}

inline MatSeries mat_series_scalar(const MatSeries& s, const ScalSeries& c) {
  MatSeries r(s.profile());
  for (const auto& [k1, v] : s.terms())
    for (const auto& [k2, f] : c.terms()) r.add(k1 + k2, zmat_scaled(v, f));
  return r;
}

inline ScalSeries exp_t_series(const Profile& p, int n, int nq, int nt, int ny, int i,
                               int sign) {
  ScalSeries r(p);
  for (long j = 0; j <= p.tord; ++j) {
    SeriesKey k = SeriesKey::origin(static_cast<size_t>(nq), static_cast<size_t>(nt),
                                    static_cast<size_t>(ny));
    k.texp[static_cast<size_t>(i)] = static_cast<int>(j);
    r.add(k, zr_const(n, rat_pow(Rat(sign), j) / Rat(int_factorial(j))));
  }
  return r;
}

/* X with A * X = B, the origin coefficient of A being invertible. */
inline MatSeries solve_left(const MatSeries& a, const MatSeries& b, const ZMat& a0inv,
                            const std::vector<SeriesKey>& keys, int rows, int cols, int n) {
  MatSeries x(b.profile());
  for (const auto& key : keys) {
    ZMat rhs = mat_at(b, key, rows, cols, n);
    for (const auto& [ka, va] : a.terms()) {
      if (ka.is_origin()) continue;
      const ZMat* xa = x.coefficient(key_sub(key, ka));
      if (xa) rhs = rhs - va * (*xa);
    }
    x.set(key, a0inv * rhs);
  }
  return x;
}

/* X with X * A = B, the origin coefficient of A being invertible. */
inline MatSeries solve_right(const MatSeries& a, const MatSeries& b, const ZMat& a0inv,
                             const std::vector<SeriesKey>& keys, int rows, int cols, int n) {
  MatSeries x(b.profile());
  for (const auto& key : keys) {
    ZMat rhs = mat_at(b, key, rows, cols, n);
    for (const auto& [ka, va] : a.terms()) {
      if (ka.is_origin()) continue;
      const ZMat* xa = x.coefficient(key_sub(key, ka));
      if (xa) rhs = rhs - (*xa) * va;
    }
    x.set(key, rhs * a0inv);
  }
  return x;
}

inline void series_compare(OdeReport& rep, const MatSeries& lhs, const MatSeries& rhs,
                           const Profile& cmp, const std::string& label) {
  if (!rep.ok) return;
  MatSeries diff = lhs.truncated(cmp);
  diff -= rhs.truncated(cmp);
  if (diff.is_zero()) {
    ++rep.checks;
    return;
  }
  rep.ok = false;
  rep.first_violation = label + " at " + series_key_to_string(diff.terms().begin()->first);
}

}  // namespace mirror_detail

/* ---- basis selection ---- */

struct MirrorBasis {
  std::vector<std::vector<Int>> points;   // normalized lattice points, unit first
  std::vector<SectorKey> rows;            // restriction rows: (cone, box element)
  std::vector<LocalizedClass> tclasses;   // leading class of each point
  std::vector<Rat> mass;                  // psi mass |k_i|
  std::vector<BoxElement> vpart;          // box reduction of each point
  ZMat t0, t0inv;                         // z-free restriction matrix and inverse
  int unit = -1;                          // column of the zero point

  int size() const { return static_cast<int>(points.size()); }
};

/* One row per box element of each maximal cone, in fan order. */
inline std::vector<SectorKey> basis_rows(const LocalizationFrame& fr) {
  std::vector<SectorKey> rows;
  for (size_t ci = 0; ci < fr.fixed.size(); ++ci)
    for (const auto& bx : fr.fixed[ci].box)
      rows.emplace_back(static_cast<int>(ci), fr.fan.N.normalize(bx.k));
  return rows;
}

inline std::vector<ZRat> restriction_vector(const LocalizationFrame& fr,
                                            const std::vector<SectorKey>& rows,
                                            const LocalizedClass& c) {
  std::vector<ZRat> v;
  v.reserve(rows.size());
  for (const auto& r : rows) {
    const ZRat* e = c.at(r);
    v.push_back(e ? *e : mirror_detail::zr_zero(fr.nvars));
  }
  return v;
}

namespace mirror_detail {

/* Candidate order: sector age, then psi mass, then absolute coordinates,
 * then reverse lexicographic on the coordinates themselves. */
struct BasisCandidate {
  std::vector<Int> k;
  Rat age;
  Rat mass;
  std::vector<Int> abscoord;

  bool operator<(const BasisCandidate& o) const {
    if (age != o.age) return age < o.age;
    if (mass != o.mass) return mass < o.mass;
    if (abscoord != o.abscoord) return abscoord < o.abscoord;
    return o.k < k;
  }
};

}  // namespace mirror_detail

/*
 * Greedy basis search.  Lattice points of the support are swept in candidate
 * order and kept whenever the restriction vector of their leading class grows
 * the span; the sweep widens the mass cap until the frame is filled.
 */
inline MirrorBasis select_basis(const MirrorSetup& s) {
  const StackyFan& f = s.fan();
  const LocalizationFrame& fr = s.frame;
  const int n = fr.nvars;
  MirrorBasis basis;
  basis.rows = basis_rows(fr);
  const int N = static_cast<int>(basis.rows.size());
  if (N == 0) throw std::runtime_error("select_basis: empty frame");

  for (long cap = 1; cap <= 40; ++cap) {
    std::set<std::vector<Int>> seen;
    std::vector<mirror_detail::BasisCandidate> cands;
    for (const auto& sigma : f.cones)
      for (const auto& k : cone_lattice_points(f, sigma, Rat(cap))) {
        auto kn = f.N.normalize(k);
        if (!seen.insert(kn).second) continue;
        auto sig = find_containing_cone(f, kn);
        auto red = box_reduce(f, kn, *sig);
        if (!red) continue;
        mirror_detail::BasisCandidate c;
        c.k = kn;
        c.age = red->v.age();
        c.mass = iseries_detail::rat_sum(support_psi(s, kn));
        for (const auto& x : kn) c.abscoord.push_back(boost::multiprecision::abs(x));
        cands.push_back(std::move(c));
      }
    std::sort(cands.begin(), cands.end());

    std::vector<std::vector<Int>> points;
    std::vector<std::vector<ZRat>> echelon;  // reduced independent rows
    std::vector<int> pivots;
    for (const auto& c : cands) {
      if (static_cast<int>(points.size()) == N) break;
      auto v = restriction_vector(fr, basis.rows, phi_class(fr, c.k));
      // eliminate against the rows kept so far
      for (size_t r = 0; r < echelon.size(); ++r) {
        const ZRat& lead = v[static_cast<size_t>(pivots[r])];
        if (lead.is_zero()) continue;
        ZRat factor = lead / echelon[r][static_cast<size_t>(pivots[r])];
        for (int j = 0; j < N; ++j)
          v[static_cast<size_t>(j)] =
              v[static_cast<size_t>(j)] - factor * echelon[r][static_cast<size_t>(j)];
      }
      int pivot = -1;
      for (int j = 0; j < N; ++j)
        if (!v[static_cast<size_t>(j)].is_zero()) {
          pivot = j;
          break;
        }
      if (pivot < 0) continue;
      points.push_back(c.k);
      echelon.push_back(std::move(v));
      pivots.push_back(pivot);
    }
    if (static_cast<int>(points.size()) < N) continue;

    basis.points = points;
    basis.t0 = mirror_detail::zmat(N, N, n);
    for (int i = 0; i < N; ++i) {
      const auto& k = basis.points[static_cast<size_t>(i)];
      if (f.N.is_zero(k)) basis.unit = i;
      auto sig = find_containing_cone(f, k);
      auto red = box_reduce(f, k, *sig);
      basis.vpart.push_back(red->v);
      basis.mass.push_back(iseries_detail::rat_sum(support_psi(s, k)));
      basis.tclasses.push_back(phi_class(fr, k));
      auto col = restriction_vector(fr, basis.rows, basis.tclasses.back());
      for (int j = 0; j < N; ++j) basis.t0.at(j, i) = col[static_cast<size_t>(j)];
    }
    if (basis.unit < 0) throw std::runtime_error("select_basis: unit not selected");
    auto inv = basis.t0.inverse(mirror_detail::zr_one(n));
    if (!inv) throw std::runtime_error("select_basis: restriction matrix not invertible");
    basis.t0inv = *inv;
    return basis;
  }
  throw std::runtime_error("select_basis: frame not filled within the mass cap");
}

/* Matrix of classical product with a fixed class, in basis coordinates. */
inline ZMat classical_mult_matrix(const MirrorSetup& s, const MirrorBasis& basis,
                                  const LocalizedClass& cls) {
  const int N = basis.size(), n = s.frame.nvars;
  ZMat m = mirror_detail::zmat(N, N, n);
  for (int i = 0; i < N; ++i) {
    auto prod = cr_product(s.frame, cls, basis.tclasses[static_cast<size_t>(i)]);
    auto col = basis.t0inv.apply(restriction_vector(s.frame, basis.rows, prod));
    for (int j = 0; j < N; ++j) m.at(j, i) = col[static_cast<size_t>(j)];
  }
  return m;
}

/* ---- factorization ---- */

struct MirrorFlow {
  MirrorSetup setup;
  Profile profile;
  MirrorBasis basis;
  std::vector<SeriesKey> keys;       // profile keys, ordered by shell
  std::vector<LocSeries> sections;   // expanded sections of the basis points
  MatSeries L, M, Y;                 // L = M * Y
  MatSeries tau;                     // mirror map coordinates, one column
  ZMat y0inv;                        // inverse of the origin coefficient of Y
  std::map<std::vector<Int>, MatSeries> expansions;

  const StackyFan& fan() const { return setup.fan(); }
  int size() const { return basis.size(); }
  int nvars() const { return setup.frame.nvars; }
  int ndirs() const { return setup.qrank() + setup.m() + setup.ng(); }
  SeriesKey origin_key() const {
    return SeriesKey::origin(setup.ctx.mori.ample.size(), static_cast<size_t>(setup.m()),
                             static_cast<size_t>(setup.ng()));
  }
};

/* All keys supported by the profile, by total shell then lexicographically. */
inline std::vector<SeriesKey> profile_keys(const MirrorSetup& s, const Profile& p) {
  std::vector<SeriesKey> keys;
  auto classes = enumerate_effective(s.fan(), s.ctx.mori, Int(p.qdeg));
  auto ts = iseries_detail::bounded_tuples_int(s.m(), p.tord);
  auto ys = iseries_detail::bounded_tuples_int(s.ng(), p.yord);
  for (const auto& d : classes)
    for (const auto& t : ts)
      for (const auto& y : ys) keys.push_back(SeriesKey{d, t, y});
  std::sort(keys.begin(), keys.end(), [&p](const SeriesKey& a, const SeriesKey& b) {
    long sa = p.shell(a), sb = p.shell(b);
    if (sa != sb) return sa < sb;
    return a < b;
  });
  return keys;
}

/* Coordinates of an expanded section against the selected basis. */
inline MatSeries loc_coordinates(const MirrorFlow& flow, const LocSeries& ls) {
  const int N = flow.size(), n = flow.nvars();
  MatSeries r(flow.profile);
  for (const auto& [k, c] : ls.terms()) {
    auto coords =
        flow.basis.t0inv.apply(restriction_vector(flow.setup.frame, flow.basis.rows, c));
    ZMat col = mirror_detail::zmat(N, 1, n);
    for (int j = 0; j < N; ++j) col.at(j, 0) = coords[static_cast<size_t>(j)];
    r.add(k, col);
  }
  return r;
}

/*
 * Key-by-key factorization L = M * Y.  At the origin M = I and Y = L_0; at
 * each later key the residual splits uniquely into a z-proper piece (times
 * Y_0, absorbed by M) and a z-polynomial piece (absorbed by Y).
 */
inline MirrorFlow build_mirror(const MirrorSetup& s, const Profile& p) {
  MirrorFlow flow;
  flow.setup = s;
  flow.profile = p;
  flow.basis = select_basis(s);
  flow.keys = profile_keys(s, p);
  const int N = flow.basis.size(), n = flow.nvars();

  std::map<SeriesKey, ZMat> lterms;
  for (int i = 0; i < N; ++i) {
    flow.sections.push_back(loc_series(s, flow.basis.points[static_cast<size_t>(i)], p));
    MatSeries col = loc_coordinates(flow, flow.sections.back());
    for (const auto& [k, v] : col.terms()) {
      auto it = lterms.find(k);
      if (it == lterms.end()) it = lterms.emplace(k, mirror_detail::zmat(N, N, n)).first;
      for (int j = 0; j < N; ++j) it->second.at(j, i) = v.at(j, 0);
    }
  }
  flow.L = MatSeries(p);
  for (const auto& [k, v] : lterms) flow.L.add(k, v);

  SeriesKey origin = SeriesKey::origin(s.ctx.mori.ample.size(),
                                       static_cast<size_t>(s.m()), static_cast<size_t>(s.ng()));
  const ZMat* l0 = flow.L.coefficient(origin);
  if (!l0) throw std::runtime_error("build_mirror: section matrix singular at the origin");
  ZMat y0 = *l0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (!y0.at(i, j).is_z_polynomial())
        throw std::runtime_error("build_mirror: origin block not z-polynomial");
  auto y0inv = y0.inverse(mirror_detail::zr_one(n));
  if (!y0inv) throw std::runtime_error("build_mirror: origin block not invertible");
  flow.y0inv = *y0inv;

  flow.M = MatSeries(p);
  flow.Y = MatSeries(p);
  flow.M.add(origin, mirror_detail::zmat_id(N, n));
  flow.Y.add(origin, y0);
  flow.tau = MatSeries(p);

  for (const auto& key : flow.keys) {
    if (key.is_origin()) continue;
    ZMat r = mirror_detail::mat_at(flow.L, key, N, N, n);
    for (const auto& [km, vm] : flow.M.terms()) {
      if (km.is_origin()) continue;
      const ZMat* ym = flow.Y.coefficient(mirror_detail::key_sub(key, km));
      if (ym) r = r - vm * (*ym);
    }
    ZMat a = r * (*y0inv);
    ZMat mk = mirror_detail::zmat(N, N, n), pk = mk;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        auto [poly, proper] = mirror_detail::zrat_split_z(a.at(i, j));
        pk.at(i, j) = poly;
        mk.at(i, j) = proper;
      }
    flow.M.add(key, mk);
    flow.Y.add(key, pk * y0);

    ZMat tk = mirror_detail::zmat(N, 1, n);
    for (int j = 0; j < N; ++j)
      tk.at(j, 0) = mirror_detail::zrat_infinity_residue(mk.at(j, flow.basis.unit));
    flow.tau.add(key, tk);
  }
  return flow;
}

/* Mirror map coordinates against the selected basis. */
inline const MatSeries& mirror_map(const MirrorFlow& flow) { return flow.tau; }

/* Expansion of the section of k over the basis sections: c with L c = Loc. */
inline const MatSeries& expand_in_basis(MirrorFlow& flow, const std::vector<Int>& k) {
  auto kn = flow.fan().N.normalize(k);
  auto it = flow.expansions.find(kn);
  if (it != flow.expansions.end()) return it->second;
  const int N = flow.size(), n = flow.nvars();
  MatSeries v = loc_coordinates(flow, loc_series(flow.setup, kn, flow.profile));
  MatSeries w = mirror_detail::solve_left(flow.M, v, mirror_detail::zmat_id(N, n), flow.keys,
                                          N, 1, n);
  MatSeries c = mirror_detail::solve_left(flow.Y, w, flow.y0inv, flow.keys, N, 1, n);
  return flow.expansions.emplace(kn, std::move(c)).first->second;
}

/* ---- connection matrices ---- */

/* Direction bookkeeping: Novikov directions first, then rays, then the extra
 * deformation directions. */
inline int dir_qcount(const MirrorFlow& flow) { return flow.setup.qrank(); }
inline bool dir_is_q(const MirrorFlow& flow, int dir) { return dir < dir_qcount(flow); }
inline bool dir_is_t(const MirrorFlow& flow, int dir) {
  return dir >= dir_qcount(flow) && dir < dir_qcount(flow) + flow.setup.m();
}
inline bool dir_is_y(const MirrorFlow& flow, int dir) {
  return dir >= dir_qcount(flow) + flow.setup.m() && dir < flow.ndirs();
}

/* Derivative along a direction: q_j d/dq_j, d/dt_i or d/dy_g. */
inline MatSeries dir_derivative(const MirrorFlow& flow, const MatSeries& s, int dir) {
  const int n = flow.nvars(), m = flow.setup.m(), r = dir_qcount(flow);
  if (dir_is_q(flow, dir)) return mirror_detail::mat_series_qscale(s, dir, n);
  if (dir_is_t(flow, dir)) return mirror_detail::mat_series_tderiv(s, dir - r, n);
  return mirror_detail::mat_series_yderiv(s, dir - r - m, n);
}

/* Profile on which results touched by the direction's derivative are valid. */
inline Profile dir_profile(const MirrorFlow& flow, int dir) {
  Profile p = flow.profile;
  if (dir_is_t(flow, dir)) p.tord = std::max(0L, p.tord - 1);
  if (dir_is_y(flow, dir)) p.yord = std::max(0L, p.yord - 1);
  return p;
}

/*
 * Shift action along a direction on the basis sections, in the coordinates of
 * the factorization: column j collects the expansions of k_j moved by each
 * direction, weighted as in the differential equations of the sections.
 */
inline MatSeries gm_matrix(MirrorFlow& flow, int dir) {
  const MirrorSetup& s = flow.setup;
  const StackyFan& f = s.fan();
  const int N = flow.size(), n = flow.nvars(), m = s.m(), r = dir_qcount(flow);
  const int nq = static_cast<int>(s.ctx.mori.ample.size()), ng = s.ng();

  auto add_vec = [&](const std::vector<Int>& a, const std::vector<Int>& b) {
    std::vector<Int> out(a.begin(), a.end());
    out.resize(static_cast<size_t>(f.N.dim()), Int(0));
    for (int t = 0; t < f.N.dim(); ++t) out[static_cast<size_t>(t)] += b[static_cast<size_t>(t)];
    return f.N.normalize(out);
  };
  /* Expansion of k_j moved by direction si, Novikov-shifted.  Ray moves carry
     the exponential of their coordinate; the sector re-grading applies only
     inside the Novikov combination. */
  auto shifted_expansion = [&](int j, size_t si, bool regrade) {
    const auto& kj = flow.basis.points[static_cast<size_t>(j)];
    const auto& l = s.ctx.sdirs[si];
    auto d = dclass(f, s.ctx.seq, kj, l);
    if (!is_effective(f, s.ctx.mori, d))
      throw std::runtime_error("gm_matrix: shift class not effective");
    MatSeries c = mirror_detail::mat_series_qshift(expand_in_basis(flow, add_vec(kj, l)), d);
    if (static_cast<int>(si) < m)
      c = mirror_detail::mat_series_scalar(
          c, mirror_detail::exp_t_series(flow.profile, n, nq, m, ng, static_cast<int>(si), 1));
    else if (regrade)
      c = mirror_detail::mat_series_yshift(c, static_cast<int>(si) - m);
    return c;
  };

  std::map<SeriesKey, ZMat> terms;
  auto add_col = [&](int j, const MatSeries& col, const Rat& scale) {
    if (scale == 0) return;
    for (const auto& [k, v] : col.terms()) {
      auto it = terms.find(k);
      if (it == terms.end()) it = terms.emplace(k, mirror_detail::zmat(N, N, n)).first;
      for (int i = 0; i < N; ++i)
        it->second.at(i, j) = it->second.at(i, j) + v.at(i, 0) * mirror_detail::zr_const(n, scale);
    }
  };

  if (dir_is_q(flow, dir)) {
    SeriesKey origin = SeriesKey::origin(static_cast<size_t>(nq), static_cast<size_t>(m),
                                         static_cast<size_t>(ng));
    ZMat diag = mirror_detail::zmat(N, N, n);
    for (int j = 0; j < N; ++j) {
      auto lamk = lambda_class(f, s.ctx.seq, flow.basis.points[static_cast<size_t>(j)], s.sigma0);
      diag.at(j, j) = mirror_detail::zr_z(n, Rat(lamk[static_cast<size_t>(dir)]));
      for (size_t si = 0; si < s.ctx.sdirs.size(); ++si) {
        auto laml = lambda_class(f, s.ctx.seq, s.ctx.sdirs[si], s.sigma0);
        const Int& w = laml[static_cast<size_t>(dir)];
        if (w != 0) add_col(j, shifted_expansion(j, si, true), Rat(w));
      }
    }
    auto it = terms.find(origin);
    if (it == terms.end()) it = terms.emplace(origin, mirror_detail::zmat(N, N, n)).first;
    it->second = it->second + diag;
  } else {
    size_t si = static_cast<size_t>(dir - r);
    for (int j = 0; j < N; ++j) add_col(j, shifted_expansion(j, si, false), Rat(1));
  }

  MatSeries b(flow.profile);
  for (const auto& [k, v] : terms) b.add(k, v);
  return b;
}

/*
 * Connection matrix in the factored coordinates:
 *   A_dir = Y B_dir Y^{-1} - z (D_dir Y) Y^{-1},
 * solved as A_dir * Y = Y B_dir - z D_dir Y.  Entries must close up free of
 * z; anything else is a hard failure.  Results along a ray or extra direction
 * are valid one order lower in that variable.
 */
inline MatSeries quantum_connection(MirrorFlow& flow, int dir) {
  const int N = flow.size(), n = flow.nvars();
  MatSeries b = gm_matrix(flow, dir);
  MatSeries w = flow.Y * b;
  MatSeries dy = dir_derivative(flow, flow.Y, dir);
  for (const auto& [k, v] : dy.terms())
    w.add(k, -mirror_detail::zmat_scaled(v, mirror_detail::zr_z(n)));
  MatSeries a = mirror_detail::solve_right(flow.Y, w, flow.y0inv, flow.keys, N, N, n);
  a = a.truncated(dir_profile(flow, dir));
  for (const auto& [k, v] : a.terms())
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        if (!mirror_detail::zrat_z_free(v.at(i, j)))
          throw std::runtime_error("quantum_connection: entry depends on z at " +
                                   series_key_to_string(k));
  return a;
}

/* ---- products ---- */

/* Class of the section of k in the factored frame: (M^{-1} Loc)|_{z=0}. */
inline MatSeries flat_class(MirrorFlow& flow, const std::vector<Int>& k) {
  const int N = flow.size(), n = flow.nvars();
  MatSeries v = loc_coordinates(flow, loc_series(flow.setup, flow.fan().N.normalize(k),
                                                 flow.profile));
  MatSeries w = mirror_detail::solve_left(flow.M, v, mirror_detail::zmat_id(N, n), flow.keys,
                                          N, 1, n);
  MatSeries r(flow.profile);
  for (const auto& [key, c] : w.terms())
    r.add(key, mirror_detail::zmat_entry_map(
                   c, [](const ZRat& f) { return mirror_detail::zrat_at_z0(f); }));
  return r;
}

/* Common validity profile of the product structure. */
inline Profile star_profile(const MirrorFlow& flow) {
  Profile p = flow.profile;
  if (p.tord > 0) --p.tord;
  if (p.yord > 0) --p.yord;
  return p;
}

/*
 * Frame for reading products off the connection: the unit class and iterated
 * connection applications A_{d1}...A_{dk} of it, closed until the origin
 * heads span.  The product matrix of any class is then the matching
 * combination of the same operator words.
 */
struct StarFrame {
  Profile profile;                 // star profile
  MatSeries unit;                  // flat class of the zero point
  std::vector<MatSeries> ops;      // per frame column, its operator word as a matrix series
  MatSeries frame;                 // selected columns as one matrix series
  ZMat frame0inv;                  // inverse of the origin coefficient
};

inline StarFrame star_frame(MirrorFlow& flow) {
  const int N = flow.size(), n = flow.nvars();
  StarFrame sf;
  sf.profile = star_profile(flow);
  sf.unit = flat_class(flow, flow.fan().N.zero()).truncated(sf.profile);
  std::vector<MatSeries> conn;
  for (int dir = 0; dir < flow.ndirs(); ++dir) {
    if (dir_is_q(flow, dir)) continue;
    if (dir_is_t(flow, dir) && flow.profile.tord < 1) continue;
    if (dir_is_y(flow, dir) && flow.profile.yord < 1) continue;
    conn.push_back(quantum_connection(flow, dir).truncated(sf.profile));
  }

  SeriesKey origin = flow.origin_key();
  std::vector<std::vector<ZRat>> echelon;
  std::vector<int> pivots;
  std::vector<MatSeries> cols, selected_ops;
  auto try_add = [&](const MatSeries& col, const MatSeries& op) {
    ZMat head = mirror_detail::mat_at(col, origin, N, 1, n);
    std::vector<ZRat> v;
    for (int j = 0; j < N; ++j) v.push_back(head.at(j, 0));
    for (size_t rr = 0; rr < echelon.size(); ++rr) {
      const ZRat& lead = v[static_cast<size_t>(pivots[rr])];
      if (lead.is_zero()) continue;
      ZRat factor = lead / echelon[rr][static_cast<size_t>(pivots[rr])];
      for (int j = 0; j < N; ++j)
        v[static_cast<size_t>(j)] =
            v[static_cast<size_t>(j)] - factor * echelon[rr][static_cast<size_t>(j)];
    }
    int pivot = -1;
    for (int j = 0; j < N; ++j)
      if (!v[static_cast<size_t>(j)].is_zero()) {
        pivot = j;
        break;
      }
    if (pivot < 0) return false;
    echelon.push_back(std::move(v));
    pivots.push_back(pivot);
    cols.push_back(col);
    selected_ops.push_back(op);
    return true;
  };

  // identity series for the unit column's operator
  MatSeries id_op(sf.profile);
  id_op.add(origin, mirror_detail::zmat_id(N, n));
  try_add(sf.unit, id_op);
  // breadth-first closure: apply each connection to every accepted column
  for (size_t at = 0; at < cols.size() && static_cast<int>(cols.size()) < N; ++at) {
    for (const auto& c : conn) {
      if (static_cast<int>(cols.size()) >= N) break;
      MatSeries col = (c * cols[at]).truncated(sf.profile);
      MatSeries op = (c * selected_ops[at]).truncated(sf.profile);
      try_add(col, op);
    }
  }
  if (static_cast<int>(cols.size()) < N)
    throw std::runtime_error("star_frame: tangent frame does not span");

  sf.ops = std::move(selected_ops);
  sf.frame = MatSeries(sf.profile);
  std::map<SeriesKey, ZMat> terms;
  for (int c = 0; c < N; ++c) {
    for (const auto& [k, v] : cols[static_cast<size_t>(c)].terms()) {
      auto it = terms.find(k);
      if (it == terms.end()) it = terms.emplace(k, mirror_detail::zmat(N, N, n)).first;
      for (int j = 0; j < N; ++j) it->second.at(j, c) = v.at(j, 0);
    }
  }
  for (const auto& [k, v] : terms) sf.frame.add(k, v);
  auto inv = mirror_detail::mat_at(sf.frame, origin, N, N, n).inverse(mirror_detail::zr_one(n));
  if (!inv) throw std::runtime_error("star_frame: leading frame block not invertible");
  sf.frame0inv = *inv;
  return sf;
}

/* Product matrix of a class given in frame coordinates. */
inline MatSeries star_matrix(const MirrorFlow& flow, const StarFrame& sf, const MatSeries& cls) {
  const int N = flow.size(), n = flow.nvars();
  std::vector<SeriesKey> keys;
  for (const auto& k : flow.keys)
    if (sf.profile.within(k)) keys.push_back(k);
  MatSeries s = mirror_detail::solve_left(sf.frame, cls.truncated(sf.profile), sf.frame0inv,
                                          keys, N, 1, n);
  MatSeries out(sf.profile);
  for (int c = 0; c < N; ++c) {
    ScalSeries coeff(sf.profile);
    for (const auto& [k, v] : s.terms()) coeff.add(k, v.at(c, 0));
    if (coeff.is_zero()) continue;
    out += mirror_detail::mat_series_scalar(sf.ops[static_cast<size_t>(c)], coeff);
  }
  return out;
}

/* Product of the classes of two lattice points. */
inline MatSeries quantum_product(MirrorFlow& flow, const StarFrame& sf,
                                 const std::vector<Int>& k, const std::vector<Int>& l) {
  MatSeries pk = flat_class(flow, k).truncated(sf.profile);
  MatSeries pl = flat_class(flow, l).truncated(sf.profile);
  return (star_matrix(flow, sf, pk) * pl).truncated(sf.profile);
}

/* k * l against the Novikov-shifted class of k + l. */
inline OdeReport transport_check(MirrorFlow& flow, const StarFrame& sf,
                                 const std::vector<Int>& k, const std::vector<Int>& l) {
  OdeReport rep;
  const StackyFan& f = flow.fan();
  auto d = dclass(f, flow.setup.ctx.seq, k, l);
  std::vector<Int> kl(k.begin(), k.end());
  for (int t = 0; t < f.N.dim(); ++t) kl[static_cast<size_t>(t)] += l[static_cast<size_t>(t)];
  MatSeries lhs = quantum_product(flow, sf, k, l);
  MatSeries rhs = mirror_detail::mat_series_qshift(
      flat_class(flow, kl).truncated(sf.profile), d);
  mirror_detail::series_compare(rep, lhs, rhs, sf.profile, "transport");
  return rep;
}

/* ---- structural checks ---- */

/*
 * Grading.  With z and every chi of weight one, a coefficient of the
 * factors at a key carries the weight of the key plus the mass difference of
 * its basis slots; the mirror map column is concentrated in weight one.
 */
inline OdeReport euler_grading_check(const MirrorFlow& flow) {
  OdeReport rep;
  const MirrorSetup& s = flow.setup;
  const int n = flow.nvars(), m = s.m(), ng = s.ng();
  std::vector<Rat> ones(static_cast<size_t>(n), Rat(1));
  auto key_weight = [&](const SeriesKey& k) {
    Rat w = c1_degree(s.ctx.seq, k.qexp);
    for (int i = 0; i < m; ++i)
      w += (Rat(1) - s.ctx.smass[static_cast<size_t>(i)]) * Rat(k.texp[static_cast<size_t>(i)]);
    for (int g = 0; g < ng; ++g)
      w += (Rat(1) - s.ctx.smass[static_cast<size_t>(m + g)]) *
           Rat(k.yexp[static_cast<size_t>(g)]);
    return w;
  };
  auto euler = [&](const ZRat& f) {
    return iseries_detail::zrat_theta_z(f) + dmod_detail::zrat_weight_derivation(f, ones);
  };
  auto check_series = [&](const MatSeries& x, const std::string& label, bool col_is_unit) {
    for (const auto& [key, v] : x.terms()) {
      if (!rep.ok) return;
      Rat w = key_weight(key);
      for (int j = 0; j < v.rows(); ++j)
        for (int i = 0; i < v.cols(); ++i) {
          const ZRat& f = v.at(j, i);
          if (f.is_zero()) continue;
          Rat target = (col_is_unit ? Rat(1) : flow.basis.mass[static_cast<size_t>(i)]) -
                       flow.basis.mass[static_cast<size_t>(j)] - w;
          ZRat diff = euler(f) - f * mirror_detail::zr_const(n, target);
          if (!diff.is_zero()) {
            rep.ok = false;
            rep.first_violation = label + " at " + series_key_to_string(key);
            return;
          }
          ++rep.checks;
        }
    }
  };
  check_series(flow.Y, "grading of the polynomial factor", false);
  check_series(flow.M, "grading of the proper factor", false);
  check_series(flow.tau, "grading of the mirror map", true);
  return rep;
}

/*
 * Phase labels.  For every generator of the stacky Picard group the factors
 * are eigenvector matrices: a key acts by its pairing with the generator, a
 * basis slot by the age of its sector, a column by the age of its point.
 * Every nonzero coefficient must close the congruence mod 1.
 */
inline OdeReport galois_check(const MirrorFlow& flow) {
  OdeReport rep;
  const MirrorSetup& s = flow.setup;
  const StackyFan& f = s.fan();
  const int N = flow.size(), m = s.m(), ng = s.ng();
  const int nq = static_cast<int>(s.ctx.mori.ample.size());
  GaleDual gd = gale_dual(f);
  auto pic = picard_stack(f, gd, s.ctx.seq.lambda);

  for (int gen = 0; gen < pic.group.dim(); ++gen) {
    std::vector<Int> xi;
    for (int i = 0; i < pic.lift.rows(); ++i) xi.push_back(pic.lift.at(i, gen));

    std::vector<Rat> qpair;
    for (int a = 0; a < nq; ++a) {
      std::vector<Int> e(static_cast<size_t>(nq), Int(0));
      e[static_cast<size_t>(a)] = 1;
      qpair.push_back(lambda_pairing(f, gd, xi, s.ctx.seq.lambda.from_coordinates(e)));
    }
    std::vector<Rat> spair;
    for (size_t si = 0; si < s.ctx.sdirs.size(); ++si) {
      ExtGenerator g;
      g.c = s.ctx.spsi[si];
      g.k = f.N.normalize(s.ctx.sdirs[si]);
      spair.push_back(age_pairing(f, gd, xi, g));
      if (static_cast<int>(si) < m && mod_one(spair.back()) != 0) {
        rep.ok = false;
        rep.first_violation = "ray phase not integral";
        return rep;
      }
    }
    std::vector<Rat> rowp, colp;
    for (int j = 0; j < N; ++j) {
      ExtGenerator g;
      g.c = flow.basis.vpart[static_cast<size_t>(j)].psi;
      g.k = f.N.normalize(flow.basis.vpart[static_cast<size_t>(j)].k);
      rowp.push_back(age_pairing(f, gd, xi, g));
      ExtGenerator h;
      h.c = support_psi(s, flow.basis.points[static_cast<size_t>(j)]);
      h.k = flow.basis.points[static_cast<size_t>(j)];
      colp.push_back(age_pairing(f, gd, xi, h));
    }
    auto key_phase = [&](const SeriesKey& k) {
      Rat p(0);
      for (int a = 0; a < nq; ++a) p += Rat(k.qexp[static_cast<size_t>(a)]) * qpair[static_cast<size_t>(a)];
      for (int i = 0; i < m; ++i) p -= Rat(k.texp[static_cast<size_t>(i)]) * spair[static_cast<size_t>(i)];
      for (int g = 0; g < ng; ++g)
        p -= Rat(k.yexp[static_cast<size_t>(g)]) * spair[static_cast<size_t>(m + g)];
      return p;
    };
    auto check_series = [&](const MatSeries& x, const std::string& label, int mode) {
      for (const auto& [key, v] : x.terms()) {
        if (!rep.ok) return;
        Rat kp = key_phase(key);
        for (int j = 0; j < v.rows(); ++j)
          for (int i = 0; i < v.cols(); ++i) {
            if (v.at(j, i).is_zero()) continue;
            Rat phase = kp + rowp[static_cast<size_t>(j)];
            if (mode == 0) phase -= colp[static_cast<size_t>(i)];
            if (mode == 1) phase -= rowp[static_cast<size_t>(i)];
            if (mod_one(phase) != 0) {
              rep.ok = false;
              rep.first_violation = label + " at " + series_key_to_string(key);
              return;
            }
            ++rep.checks;
          }
      }
    };
    check_series(flow.Y, "phase of the polynomial factor", 0);
    check_series(flow.M, "phase of the proper factor", 1);
    check_series(flow.tau, "phase of the mirror map", 2);
    if (!rep.ok) return rep;
  }
  return rep;
}

/* Mixed-derivative and commutator flatness of the connection matrices. */
inline OdeReport flatness_check(MirrorFlow& flow) {
  OdeReport rep;
  std::vector<MatSeries> conn;
  for (int d = 0; d < flow.ndirs(); ++d) conn.push_back(quantum_connection(flow, d));
  for (int a = 0; a < flow.ndirs() && rep.ok; ++a)
    for (int b = a + 1; b < flow.ndirs() && rep.ok; ++b) {
      Profile cmp = flow.profile;
      long tdrop = (dir_is_t(flow, a) ? 1 : 0) + (dir_is_t(flow, b) ? 1 : 0);
      long ydrop = (dir_is_y(flow, a) ? 1 : 0) + (dir_is_y(flow, b) ? 1 : 0);
      cmp.tord = std::max(0L, cmp.tord - tdrop);
      cmp.yord = std::max(0L, cmp.yord - ydrop);
      auto label = [&](const char* what) {
        return std::string(what) + " of directions " + std::to_string(a + 1) + "," +
               std::to_string(b + 1);
      };
      mirror_detail::series_compare(rep, dir_derivative(flow, conn[static_cast<size_t>(b)], a),
                                    dir_derivative(flow, conn[static_cast<size_t>(a)], b), cmp,
                                    label("mixed derivative"));
      mirror_detail::series_compare(rep, conn[static_cast<size_t>(a)] * conn[static_cast<size_t>(b)],
                                    conn[static_cast<size_t>(b)] * conn[static_cast<size_t>(a)],
                                    cmp, label("commutator"));
    }
  return rep;
}

/* ---- pairings ---- */

/*
 * Pairing of the expanded sections with z flipped in the first slot.  Each
 * coefficient must close up with no z in the denominator (the weight
 * denominators of a noncompact support stay); a z-pole is a hard failure.
 */
inline MatSeries higher_residue_pairing(const MirrorFlow& flow) {
  const int N = flow.size(), n = flow.nvars();
  const LocalizationFrame& fr = flow.setup.frame;
  std::map<SeriesKey, ZMat> terms;
  for (int i = 0; i < N; ++i) {
    LocSeries flipped = series_entry_map(flow.sections[static_cast<size_t>(i)],
                                         [](const SectorKey&, const ZRat& e) { return e.negate_z(); });
    for (int j = 0; j < N; ++j)
      for (const auto& [k1, c1] : flipped.terms())
        for (const auto& [k2, c2] : flow.sections[static_cast<size_t>(j)].terms()) {
          SeriesKey k = k1 + k2;
          if (!flow.profile.within(k)) continue;
          ZRat val = ab_pairing(fr, c1, c2);
          if (val.is_zero()) continue;
          auto it = terms.find(k);
          if (it == terms.end()) it = terms.emplace(k, mirror_detail::zmat(N, N, n)).first;
          it->second.at(i, j) = it->second.at(i, j) + val;
        }
  }
  MatSeries p(flow.profile);
  for (const auto& [k, v] : terms) p.add(k, v);
  for (const auto& [k, v] : p.terms())
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const ZRat& f = v.at(i, j);
        if (f.is_zero()) continue;
        if (f.den().degree() != 0 || f.den().low_degree() != 0)
          throw std::runtime_error("higher_residue_pairing: z left in a denominator at " +
                                   series_key_to_string(k));
      }
  return p;
}

/* Pairing of the leading classes of the basis. */
inline ZMat pairing_gram(const MirrorFlow& flow) {
  const int N = flow.size(), n = flow.nvars();
  ZMat g = mirror_detail::zmat(N, N, n);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      g.at(a, b) = ab_pairing(flow.setup.frame, flow.basis.tclasses[static_cast<size_t>(a)],
                              flow.basis.tclasses[static_cast<size_t>(b)]);
  return g;
}

/* Symmetry under z -> -z with transposition, and transport through the
 * polynomial factor onto the constant pairing of the leading classes. */
inline OdeReport pairing_checks(const MirrorFlow& flow, const MatSeries& p) {
  OdeReport rep;
  const int n = flow.nvars();
  MatSeries flipped(flow.profile);
  for (const auto& [k, v] : p.terms())
    flipped.add(k, mirror_detail::zmat_transpose(
                       mirror_detail::zmat_entry_map(
                           v, [](const ZRat& f) { return f.negate_z(); }),
                       n));
  mirror_detail::series_compare(rep, p, flipped, flow.profile, "pairing symmetry");

  MatSeries yflip(flow.profile);
  for (const auto& [k, v] : flow.Y.terms())
    yflip.add(k, mirror_detail::zmat_transpose(
                     mirror_detail::zmat_entry_map(
                         v, [](const ZRat& f) { return f.negate_z(); }),
                     n));
  MatSeries gram(flow.profile);
  gram.add(flow.origin_key(), pairing_gram(flow));
  mirror_detail::series_compare(rep, p, yflip * gram * flow.Y, flow.profile,
                                "pairing transport");
  return rep;
}

/* ---- asymptotic expansion factors ---- */

/*
 * Exponential factor of the stationary expansion at one sector of a fixed
 * point.  The square-root weight prefactor stays formal; the coefficients
 * collect 1/|N(sigma)| times the z-expansion of
 *   exp(-sum_{k>=2} B_k(psi_i) / (k(k-1)) (z/u_i)^{k-1})
 * over the rays of the cone.
 */
struct BernoulliDelta {
  int cone = 0;
  BoxElement v;
  std::vector<ZRat> coeff;  // z-power coefficients, constant term first
};

inline BernoulliDelta bernoulli_delta(const LocalizationFrame& fr, int cone,
                                      const BoxElement& v, long order) {
  const int n = fr.nvars;
  const FixedPointData& fp = fr.at_cone(cone);
  BernoulliDelta d;
  d.cone = cone;
  d.v = v;
  std::vector<ZRat> arg(static_cast<size_t>(order) + 1, mirror_detail::zr_zero(n));
  for (int i : fp.sigma) {
    Rat h(0);
    if (i < static_cast<int>(v.psi.size())) h = v.psi[static_cast<size_t>(i)];
    MPoly upow = MPoly::constant(n, Rat(1));
    for (long k = 1; k <= order; ++k) {
      upow = upow * fp.u[static_cast<size_t>(i)];
      Rat c = -bernoulli_polynomial(k + 1, h) / (Rat(k + 1) * Rat(k));
      arg[static_cast<size_t>(k)] =
          arg[static_cast<size_t>(k)] + ZRat(ZPoly::constant(n, c), ZPoly::from_mpoly(upow));
    }
  }
  // exp through its differential recursion
  d.coeff.assign(static_cast<size_t>(order) + 1, mirror_detail::zr_zero(n));
  d.coeff[0] = mirror_detail::zr_const(n, Rat(1) / Rat(fp.group_order));
  for (long p = 1; p <= order; ++p) {
    ZRat acc = mirror_detail::zr_zero(n);
    for (long j = 1; j <= p; ++j)
      acc = acc + mirror_detail::zr_const(n, Rat(j)) * arg[static_cast<size_t>(j)] *
                      d.coeff[static_cast<size_t>(p - j)];
    d.coeff[static_cast<size_t>(p)] = acc * mirror_detail::zr_const(n, Rat(1) / Rat(p));
  }
  return d;
}

/* ---- the nonequivariant limit ---- */

namespace mirror_detail {

inline long zpoly_min_chi_degree(const ZPoly& p) {
  long v = 0;
  bool any = false;
  for (const auto& [k, c] : p.coeffs())
    for (const auto& [e, r] : c.terms()) {
      long d = 0;
      for (int x : e) d += x;
      v = any ? std::min(v, d) : d;
      any = true;
    }
  if (!any) throw std::invalid_argument("zpoly_min_chi_degree: zero");
  return v;
}

inline ZPoly zpoly_divide_chi_power(const ZPoly& p, long v) {
  if (v == 0) return p;
  ZPoly r(p.nvars());
  for (const auto& [k, c] : p.coeffs()) {
    MPoly q(p.nvars());
    for (const auto& [e, x] : c.terms()) {
      auto e2 = e;
      long left = v;
      for (size_t t = 0; t < e2.size() && left > 0; ++t) {
        int take = static_cast<int>(std::min<long>(left, e2[t]));
        e2[t] -= take;
        left -= take;
      }
      if (left > 0) throw std::logic_error("zpoly_divide_chi_power: valuation too small");
      q.add_term(e2, x);
    }
    r.add_term(k, q);
  }
  return r;
}

}  // namespace mirror_detail

/*
 * Limit of an equivariant fraction along the line chi = s * line, s -> 0.
 * The substitution concentrates the parameters in one variable; the common
 * power of s cancels and the value at s = 0 remains.  A surviving pole means
 * the input has no limit along this line.
 */
inline ZRat nonequivariant_limit(const ZRat& f, const std::vector<Rat>& line) {
  if (f.is_zero()) return ZRat(ZPoly(1));
  if (static_cast<int>(line.size()) != f.nvars())
    throw std::invalid_argument("nonequivariant_limit: line shape");
  std::vector<MPoly> images;
  images.reserve(line.size());
  for (const auto& c : line) images.push_back(MPoly::variable(1, 0, c));
  ZPoly num = f.num().substitute_chi(images);
  ZPoly den = f.den().substitute_chi(images);
  if (den.is_zero()) throw std::runtime_error("nonequivariant_limit: denominator vanishes");
  if (num.is_zero()) return ZRat(ZPoly(1));
  long v = std::min(mirror_detail::zpoly_min_chi_degree(num),
                    mirror_detail::zpoly_min_chi_degree(den));
  // the single-variable monomial order makes the shared power exact
  num = mirror_detail::zpoly_divide_chi_power(num, v);
  den = mirror_detail::zpoly_divide_chi_power(den, v);
  std::vector<MPoly> at0{MPoly::constant(1, Rat(0))};
  ZPoly num0 = num.substitute_chi(at0);
  ZPoly den0 = den.substitute_chi(at0);
  if (den0.is_zero()) throw std::runtime_error("nonequivariant_limit: pole along the line");
  return ZRat(num0, den0);
}

inline std::vector<Rat> default_limit_line(int n) {
  std::vector<Rat> line;
  for (int i = 0; i < n; ++i) line.push_back(Rat(i + 1));
  return line;
}

inline ZMat nonequivariant_limit(const ZMat& m, const std::vector<Rat>& line) {
  ZMat r(m.rows(), m.cols(), mirror_detail::zr_zero(1));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r.at(i, j) = nonequivariant_limit(m.at(i, j), line);
  return r;
}

inline MatSeries nonequivariant_limit(const MatSeries& s, const std::vector<Rat>& line) {
  MatSeries r(s.profile());
  for (const auto& [k, v] : s.terms()) r.add(k, nonequivariant_limit(v, line));
  return r;
}

}  // namespace toricmirror
