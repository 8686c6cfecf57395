#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "toricmirror/abelian.hpp"
#include "toricmirror/intmatrix.hpp"
#include "toricmirror/lp.hpp"
#include "toricmirror/mpoly.hpp"
#include "toricmirror/rational.hpp"

namespace toricmirror {

/* Stacky fan: a finitely generated N, ray generators b_i in N, and the
 * maximal cones of a simplicial fan in N x R, given by ray index sets. */
struct StackyFan {
  std::string name;
  FgAbGroup N;
  std::vector<std::vector<Int>> b;      // m elements of N
  std::vector<std::vector<int>> cones;  // maximal cones, sorted ray indices

  int m() const { return static_cast<int>(b.size()); }
  int n() const { return N.free_rank; }

  std::vector<Int> bbar(int i) const { return N.free_image(b[static_cast<size_t>(i)]); }

  /* Columns are bbar_j for j in sigma. */
  QMatrix cone_matrix(const std::vector<int>& sigma) const {
    QMatrix mtx(n(), static_cast<int>(sigma.size()));
    for (size_t j = 0; j < sigma.size(); ++j) {
      auto col = bbar(sigma[j]);
      for (int i = 0; i < n(); ++i) mtx.at(i, static_cast<int>(j)) = Rat(col[static_cast<size_t>(i)]);
    }
    return mtx;
  }

  /* Coordinates of x in the ray basis of sigma, if x lies in its span. */
  std::optional<std::vector<Rat>> cone_coords(const std::vector<int>& sigma,
                                              const std::vector<Rat>& x) const {
    QMatrix mtx = cone_matrix(sigma);
    auto c = mtx.solve(x);
    if (!c) return std::nullopt;
    auto back = mtx.apply(*c);
    if (back != x) return std::nullopt;
    return c;
  }
};

/* Box element: k in N whose free image lies in the unit parallelepiped of its
 * minimal cone. psi has length m and is supported on sigma. */
struct BoxElement {
  std::vector<Int> k;
  std::vector<int> sigma;  // minimal cone of k
  std::vector<Rat> psi;    // fractional coordinates, psi_i in [0,1)

  Rat age() const {
    Rat a(0);
    for (auto& p : psi) a += p;
    return a;
  }
  bool operator<(const BoxElement& o) const { return k < o.k; }
  bool operator==(const BoxElement& o) const { return k == o.k; }
};

/* Localization data at a maximal cone: dual-basis weights u_i (zero for rays
 * outside the cone) and the order of the local isotropy group. */
struct FixedPointData {
  std::vector<int> sigma;
  std::vector<MPoly> u;  // length m, linear in the chi variables
  Int group_order = 1;
  std::vector<BoxElement> box;  // box elements supported on faces of sigma
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::pair<std::string, bool>> checks;
  std::vector<std::string> messages;
  std::vector<Rat> pl_certificate;  // strictly convex support values, when found

  void record(const std::string& check, bool passed, const std::string& msg = "") {
    checks.emplace_back(check, passed);
    if (!passed) {
      ok = false;
      if (!msg.empty()) messages.push_back(check + ": " + msg);
    }
  }
};

namespace fan_detail {

inline std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline std::vector<int> common_rays(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/* Does sigma cap tau stick out of the cone on their common rays? */
inline bool pair_violates_fan_condition(const StackyFan& f, const std::vector<int>& sigma,
                                        const std::vector<int>& tau) {
  auto common = common_rays(sigma, tau);
  int ns = static_cast<int>(sigma.size()), nt = static_cast<int>(tau.size());
  for (size_t pick = 0; pick < sigma.size(); ++pick) {
    int i0 = sigma[pick];
    if (std::binary_search(common.begin(), common.end(), i0)) continue;
    // feasibility of: R_sigma c = R_tau d, c >= 0, d >= 0, c_pick >= 1
    LinIneqSystem sys(ns + nt);
    for (int row = 0; row < f.n(); ++row) {
      std::vector<Rat> eq(static_cast<size_t>(ns + nt), Rat(0));
      for (int j = 0; j < ns; ++j)
        eq[static_cast<size_t>(j)] = Rat(f.bbar(sigma[static_cast<size_t>(j)])[static_cast<size_t>(row)]);
      for (int j = 0; j < nt; ++j)
        eq[static_cast<size_t>(ns + j)] = -Rat(f.bbar(tau[static_cast<size_t>(j)])[static_cast<size_t>(row)]);
      sys.add_eq(eq, Rat(0));
    }
    for (int j = 0; j < ns + nt; ++j) {
      std::vector<Rat> row(static_cast<size_t>(ns + nt), Rat(0));
      row[static_cast<size_t>(j)] = Rat(-1);
      sys.add(row, Rat(0));  // -x_j <= 0
    }
    std::vector<Rat> strict(static_cast<size_t>(ns + nt), Rat(0));
    strict[pick] = Rat(-1);
    sys.add(strict, Rat(-1));  // c_pick >= 1
    if (lp_feasible(sys)) return true;
  }
  return false;
}

}  // namespace fan_detail

/* Full structural validation; also certifies semi-projectivity by producing a
 * strictly convex support function on the rays. */
inline ValidationReport validate(const StackyFan& f) {
  ValidationReport rep;
  int m = f.m(), n = f.n();

  bool shapes = true;
  for (auto& bi : f.b)
    if (static_cast<int>(bi.size()) != f.N.dim()) shapes = false;
  for (auto& c : f.cones) {
    if (!std::is_sorted(c.begin(), c.end())) shapes = false;
    for (int i : c)
      if (i < 0 || i >= m) shapes = false;
    if (fan_detail::sorted_unique(c).size() != c.size()) shapes = false;
  }
  if (f.cones.empty()) shapes = false;
  rep.record("shapes", shapes, "ray/cone data malformed");
  if (!shapes) return rep;

  bool rays_nonzero = true;
  for (int i = 0; i < m; ++i) {
    auto bb = f.bbar(i);
    bool zero = true;
    for (auto& x : bb) zero = zero && x == 0;
    if (zero) rays_nonzero = false;
  }
  rep.record("rays_have_infinite_order", rays_nonzero, "some bbar_i = 0");

  bool rays_distinct = true;
  for (int i = 0; i < m && rays_distinct; ++i)
    for (int j = i + 1; j < m && rays_distinct; ++j) {
      // same ray iff bbar_i and bbar_j are positive multiples of each other
      auto bi = f.bbar(i), bj = f.bbar(j);
      Rat ratio(0);
      bool multiple = true, ratio_set = false;
      for (int t = 0; t < n; ++t) {
        const Int &x = bi[static_cast<size_t>(t)], &y = bj[static_cast<size_t>(t)];
        if (x == 0 && y == 0) continue;
        if (x == 0 || y == 0) {
          multiple = false;
          break;
        }
        Rat r = Rat(x) / Rat(y);
        if (!ratio_set) {
          ratio = r;
          ratio_set = true;
        } else if (r != ratio) {
          multiple = false;
          break;
        }
      }
      if (multiple && ratio_set && ratio > 0) rays_distinct = false;
    }
  rep.record("rays_distinct", rays_distinct, "two rays span the same half-line");

  bool covered = true;
  {
    std::set<int> used;
    for (auto& c : f.cones) used.insert(c.begin(), c.end());
    for (int i = 0; i < m; ++i) covered = covered && used.count(i) > 0;
  }
  rep.record("every_ray_in_a_cone", covered, "unused ray index");

  bool simplicial = true;
  for (auto& c : f.cones)
    if (f.cone_matrix(c).rank() != static_cast<int>(c.size())) simplicial = false;
  rep.record("simplicial", simplicial, "cone rays linearly dependent");
  if (!simplicial) return rep;

  bool maximal = true;
  for (size_t a = 0; a < f.cones.size(); ++a)
    for (size_t b2 = 0; b2 < f.cones.size(); ++b2) {
      if (a == b2) continue;
      if (std::includes(f.cones[b2].begin(), f.cones[b2].end(), f.cones[a].begin(),
                        f.cones[a].end()))
        maximal = false;
    }
  rep.record("cones_maximal", maximal, "listed cone is a face of another");

  bool fan_cond = true;
  for (size_t a = 0; a < f.cones.size() && fan_cond; ++a)
    for (size_t b2 = a + 1; b2 < f.cones.size() && fan_cond; ++b2)
      if (fan_detail::pair_violates_fan_condition(f, f.cones[a], f.cones[b2])) fan_cond = false;
  rep.record("cones_intersect_in_faces", fan_cond, "two cones overlap beyond a common face");
  if (!fan_cond || !maximal) return rep;

  bool full_dim = true;
  for (auto& c : f.cones)
    if (static_cast<int>(c.size()) != n) full_dim = false;
  rep.record("maximal_cones_full_dimensional", full_dim, "cone dimension below rank of N");
  if (!full_dim) return rep;

  /* Convex support: every boundary facet hyperplane must have all rays on the
   * cone side. Facet of sigma opposite ray j has inward normal = row of the
   * inverse ray matrix. */
  bool convex = true;
  {
    std::map<std::vector<int>, int> facet_count;
    for (auto& c : f.cones)
      for (size_t drop = 0; drop < c.size(); ++drop) {
        std::vector<int> facet;
        for (size_t t = 0; t < c.size(); ++t)
          if (t != drop) facet.push_back(c[t]);
        facet_count[facet] += 1;
      }
    for (auto& [facet, count] : facet_count) {
      if (count > 2) {
        convex = false;
        break;
      }
      if (count == 2) continue;  // interior wall
      // find the cone owning this boundary facet and its inward normal
      for (auto& c : f.cones) {
        if (!std::includes(c.begin(), c.end(), facet.begin(), facet.end())) continue;
        int drop = -1;
        for (size_t t = 0; t < c.size(); ++t)
          if (!std::binary_search(facet.begin(), facet.end(), c[t])) drop = static_cast<int>(t);
        if (drop == -1) continue;
        auto inv = f.cone_matrix(c).inverse();
        if (!inv) {
          convex = false;
          break;
        }
        for (int i = 0; i < m && convex; ++i) {
          Rat dot(0);
          auto bb = f.bbar(i);
          for (int t = 0; t < n; ++t) dot += inv->at(drop, t) * Rat(bb[static_cast<size_t>(t)]);
          if (dot < 0) convex = false;
        }
        break;
      }
      if (!convex) break;
    }
  }
  rep.record("support_convex", convex, "a ray crosses a boundary facet hyperplane");

  /* Strictly convex support function: values v_i on rays with
   * sum_i c_i(b_r) v_i <= v_r - 1 for every maximal sigma and ray r outside. */
  bool strict_ok = true;
  {
    LinIneqSystem sys(m);
    for (auto& c : f.cones) {
      auto inv = f.cone_matrix(c).inverse();
      for (int r = 0; r < m; ++r) {
        if (std::binary_search(c.begin(), c.end(), r)) continue;
        auto bb = f.bbar(r);
        std::vector<Rat> coords(static_cast<size_t>(n), Rat(0));
        for (int i = 0; i < n; ++i)
          for (int t = 0; t < n; ++t) coords[static_cast<size_t>(i)] += inv->at(i, t) * Rat(bb[static_cast<size_t>(t)]);
        std::vector<Rat> row(static_cast<size_t>(m), Rat(0));
        for (size_t j = 0; j < c.size(); ++j) row[static_cast<size_t>(c[j])] += coords[j];
        row[static_cast<size_t>(r)] -= 1;
        sys.add(row, Rat(-1));
      }
    }
    auto sol = lp_feasible_point(sys);
    if (sol) rep.pl_certificate = *sol;
    else strict_ok = false;
  }
  rep.record("strictly_convex_support_function", strict_ok,
             "no strictly convex piecewise linear function exists");

  return rep;
}

/* Fractional coordinates of k over sigma: solves kbar = sum c_i bbar_i.
 * Returns a length-m vector supported on sigma. */
inline std::optional<std::vector<Rat>> psi(const StackyFan& f, const std::vector<Int>& k,
                                           const std::vector<int>& sigma) {
  auto kbar = f.N.free_image(k);
  std::vector<Rat> x(kbar.size());
  for (size_t i = 0; i < kbar.size(); ++i) x[i] = Rat(kbar[i]);
  auto c = f.cone_coords(sigma, x);
  if (!c) return std::nullopt;
  std::vector<Rat> out(static_cast<size_t>(f.m()), Rat(0));
  for (size_t j = 0; j < sigma.size(); ++j) out[static_cast<size_t>(sigma[j])] = (*c)[j];
  return out;
}

/* First maximal cone whose closed span contains kbar with nonnegative
 * coordinates. */
inline std::optional<std::vector<int>> find_containing_cone(const StackyFan& f,
                                                            const std::vector<Int>& k) {
  for (auto& c : f.cones) {
    auto p = psi(f, k, c);
    if (!p) continue;
    bool nonneg = true;
    for (auto& x : *p) nonneg = nonneg && x >= 0;
    if (nonneg) return c;
  }
  return std::nullopt;
}

/* Box reduction of k over sigma: v = k - sum floor(c_i) b_i together with the
 * floor vector, so that k = v + sum floors_i b_i and v is a box element. */
struct BoxReduction {
  BoxElement v;
  std::vector<Int> floors;  // length m, supported on sigma
};

inline std::optional<BoxReduction> box_reduce(const StackyFan& f, const std::vector<Int>& k,
                                              const std::vector<int>& sigma) {
  auto p = psi(f, k, sigma);
  if (!p) return std::nullopt;
  BoxReduction out;
  out.floors.assign(static_cast<size_t>(f.m()), Int(0));
  std::vector<Int> v = k;
  std::vector<Rat> frac(static_cast<size_t>(f.m()), Rat(0));
  for (int i : sigma) {
    Int fl = rat_floor((*p)[static_cast<size_t>(i)]);
    out.floors[static_cast<size_t>(i)] = fl;
    frac[static_cast<size_t>(i)] = rat_fract((*p)[static_cast<size_t>(i)]);
    for (size_t t = 0; t < v.size(); ++t) v[t] -= fl * f.b[static_cast<size_t>(i)][t];
  }
  v = f.N.normalize(v);
  std::vector<int> support;
  for (int i : sigma)
    if (frac[static_cast<size_t>(i)] != 0) support.push_back(i);
  out.v = BoxElement{v, support, frac};
  return out;
}

/* All box elements whose minimal cone is a face of the given maximal cone. */
inline std::vector<BoxElement> box_of_cone(const StackyFan& f, const std::vector<int>& sigma) {
  int n = f.n();
  // bounding box of the half-open parallelepiped spanned by bbar_i, i in sigma
  std::vector<Int> lo(static_cast<size_t>(n), Int(0)), hi(static_cast<size_t>(n), Int(0));
  for (int i : sigma) {
    auto bb = f.bbar(i);
    for (int t = 0; t < n; ++t) {
      if (bb[static_cast<size_t>(t)] < 0) lo[static_cast<size_t>(t)] += bb[static_cast<size_t>(t)];
      else hi[static_cast<size_t>(t)] += bb[static_cast<size_t>(t)];
    }
  }
  std::vector<std::vector<Int>> points;  // free parts with coords in [0,1)
  std::vector<std::vector<Rat>> fracs;
  std::vector<Int> cursor(static_cast<size_t>(n));
  auto scan = [&](auto&& self, int depth) -> void {
    if (depth == n) {
      std::vector<Rat> x(static_cast<size_t>(n));
      for (int t = 0; t < n; ++t) x[static_cast<size_t>(t)] = Rat(cursor[static_cast<size_t>(t)]);
      auto c = f.cone_coords(sigma, x);
      if (!c) return;
      for (auto& ci : *c)
        if (ci < 0 || ci >= 1) return;
      points.push_back(cursor);
      std::vector<Rat> fr(static_cast<size_t>(f.m()), Rat(0));
      for (size_t j = 0; j < sigma.size(); ++j) fr[static_cast<size_t>(sigma[j])] = (*c)[j];
      fracs.push_back(fr);
      return;
    }
    for (Int v = lo[static_cast<size_t>(depth)]; v <= hi[static_cast<size_t>(depth)]; ++v) {
      cursor[static_cast<size_t>(depth)] = v;
      self(self, depth + 1);
    }
  };
  scan(scan, 0);

  std::vector<BoxElement> out;
  auto torsion = f.N.torsion_elements();
  for (size_t p = 0; p < points.size(); ++p)
    for (auto& t : torsion) {
      std::vector<Int> k(static_cast<size_t>(f.N.dim()), Int(0));
      for (int i = 0; i < n; ++i) k[static_cast<size_t>(i)] = points[p][static_cast<size_t>(i)];
      for (int i = n; i < f.N.dim(); ++i) k[static_cast<size_t>(i)] = t[static_cast<size_t>(i)];
      std::vector<int> support;
      for (int i : sigma)
        if (fracs[p][static_cast<size_t>(i)] != 0) support.push_back(i);
      out.push_back(BoxElement{f.N.normalize(k), support, fracs[p]});
    }
  std::sort(out.begin(), out.end());
  return out;
}

/* Union of the boxes of all maximal cones. */
inline std::vector<BoxElement> box(const StackyFan& f) {
  std::vector<BoxElement> out;
  for (auto& c : f.cones)
    for (auto& v : box_of_cone(f, c))
      if (!std::binary_search(out.begin(), out.end(), v)) {
        out.push_back(v);
        std::sort(out.begin(), out.end());
      }
  return out;
}

/* The box element inverse to v: the reduction of -v over its minimal cone. */
inline BoxElement inv_box(const StackyFan& f, const BoxElement& v) {
  std::vector<Int> neg = f.N.neg(v.k);
  auto red = box_reduce(f, neg, v.sigma);
  if (!red) throw std::invalid_argument("inv_box: reduction failed");
  return red->v;
}

/* Localization data at a maximal cone. */
inline FixedPointData fixed_point_weights(const StackyFan& f, const std::vector<int>& sigma) {
  FixedPointData out;
  out.sigma = sigma;
  int n = f.n();
  auto inv = f.cone_matrix(sigma).inverse();
  if (!inv || static_cast<int>(sigma.size()) != n)
    throw std::invalid_argument("fixed_point_weights: cone not full-dimensional");
  out.u.assign(static_cast<size_t>(f.m()), MPoly(n));
  for (size_t j = 0; j < sigma.size(); ++j) {
    MPoly w(n);
    for (int t = 0; t < n; ++t) w += MPoly::variable(n, t, inv->at(static_cast<int>(j), t));
    out.u[static_cast<size_t>(sigma[j])] = w;
  }
  // order of N / <b_j : j in sigma>
  IntMatrix rel = f.N.relation_matrix();
  IntMatrix cols(f.N.dim(), rel.cols() + n);
  for (int i = 0; i < f.N.dim(); ++i) {
    for (int j = 0; j < rel.cols(); ++j) cols.at(i, j) = rel.at(i, j);
    for (size_t j = 0; j < sigma.size(); ++j)
      cols.at(i, rel.cols() + static_cast<int>(j)) = f.b[static_cast<size_t>(sigma[j])][static_cast<size_t>(i)];
  }
  auto q = standardize_quotient(f.N.dim(), cols);
  if (!q.group.is_finite())
    throw std::invalid_argument("fixed_point_weights: local group infinite");
  out.group_order = q.group.order();
  out.box = box_of_cone(f, sigma);
  return out;
}

}  // namespace toricmirror
