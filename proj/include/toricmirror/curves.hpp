#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "abelian.hpp"
#include "intmatrix.hpp"
#include "lp.hpp"
#include "rational.hpp"
#include "stackyfan.hpp"

namespace toricmirror {

/*
 * The extension group for a stacky fan sits in
 *   0 -> Lambda -> Ext -> N -> 0
 * where Ext is the subgroup of Q^m (+) N generated by (e_i, b_i) for the rays
 * and (Psi(v), v) for the box elements v.  Lambda is the kernel of the
 * projection to N; it is the lattice of curve-class exponents.
 */

struct ExtGenerator {
  std::vector<Rat> c;  // Q^m component
  std::vector<Int> k;  // N component (normalized coordinates)
};

struct FanSequences {
  std::vector<ExtGenerator> gens;   // (e_i, b_i) for i < m, then box generators
  StandardizedQuotient abstract_ext;  // Ext as abstract group, quotient of Z^gens
  QLattice lambda;                  // Lambda inside Q^m
};

inline FanSequences build_sequences(const StackyFan& f) {
  const int m = f.m();
  const int dim = f.N.dim();
  FanSequences seq;
  for (int i = 0; i < m; ++i) {
    ExtGenerator g;
    g.c.assign(static_cast<size_t>(m), Rat(0));
    g.c[static_cast<size_t>(i)] = Rat(1);
    g.k = f.N.normalize(f.b[static_cast<size_t>(i)]);
    seq.gens.push_back(g);
  }
  for (const auto& v : box(f)) {
    if (f.N.is_zero(v.k)) continue;
    ExtGenerator g;
    g.c.assign(v.psi.begin(), v.psi.end());
    g.k = v.k;
    seq.gens.push_back(g);
  }
  const int g = static_cast<int>(seq.gens.size());

  // Relations among the generators: x in Z^g with sum x_i c_i = 0 in Q^m and
  // sum x_i k_i = 0 in N.  Scale the Q^m rows to a common denominator and
  // absorb the torsion of N through its relation matrix.
  Int den(1);
  for (const auto& gen : seq.gens)
    for (const auto& c : gen.c) den = int_lcm(den, rat_den(c));
  IntMatrix reln = f.N.relation_matrix();
  const int t = reln.cols();
  IntMatrix stack(m + dim, g + t);
  for (int j = 0; j < g; ++j) {
    for (int i = 0; i < m; ++i) {
      Rat s = seq.gens[static_cast<size_t>(j)].c[static_cast<size_t>(i)] * Rat(den);
      stack.at(i, j) = rat_num(s);
    }
    for (int i = 0; i < dim; ++i)
      stack.at(m + i, j) = seq.gens[static_cast<size_t>(j)].k[static_cast<size_t>(i)];
  }
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < dim; ++i) stack.at(m + i, g + j) = reln.at(i, j);
  auto ker = int_kernel(stack);
  IntMatrix rels(g, static_cast<int>(ker.size()));
  for (size_t j = 0; j < ker.size(); ++j)
    for (int i = 0; i < g; ++i) rels.at(i, static_cast<int>(j)) = ker[j][static_cast<size_t>(i)];
  seq.abstract_ext = standardize_quotient(g, rels);

  // Lambda: combinations whose N component vanishes.
  IntMatrix nstack(dim, g + t);
  for (int j = 0; j < g; ++j)
    for (int i = 0; i < dim; ++i)
      nstack.at(i, j) = seq.gens[static_cast<size_t>(j)].k[static_cast<size_t>(i)];
  for (int j = 0; j < t; ++j)
    for (int i = 0; i < dim; ++i) nstack.at(i, g + j) = reln.at(i, j);
  auto nker = int_kernel(nstack);
  IntMatrix xmat(g, static_cast<int>(nker.size()));
  for (size_t j = 0; j < nker.size(); ++j)
    for (int i = 0; i < g; ++i) xmat.at(i, static_cast<int>(j)) = nker[j][static_cast<size_t>(i)];
  IntMatrix xbasis = column_lattice_basis(xmat);
  std::vector<std::vector<Rat>> lgens;
  for (int j = 0; j < xbasis.cols(); ++j) {
    std::vector<Rat> c(static_cast<size_t>(m), Rat(0));
    for (int i = 0; i < g; ++i)
      for (int a = 0; a < m; ++a)
        c[static_cast<size_t>(a)] += Rat(xbasis.at(i, j)) * seq.gens[static_cast<size_t>(i)].c[static_cast<size_t>(a)];
    lgens.push_back(c);
  }
  seq.lambda = QLattice::from_generators(m, lgens);
  return seq;
}

/* Coordinates of kbar over the rays of a full-dimensional cone, any sign. */
inline std::vector<Rat> cone_chart_coords(const StackyFan& f, const std::vector<int>& sigma,
                                          const std::vector<Int>& k) {
  if (static_cast<int>(sigma.size()) != f.n())
    throw std::invalid_argument("cone_chart_coords: cone is not full-dimensional");
  auto kbar = f.N.free_image(f.N.normalize(k));
  std::vector<Rat> rhs(kbar.size());
  for (size_t i = 0; i < kbar.size(); ++i) rhs[i] = Rat(kbar[i]);
  auto sol = f.cone_matrix(sigma).solve(rhs);
  if (!sol) throw std::runtime_error("cone_chart_coords: singular cone matrix");
  return *sol;
}

/*
 * lambda_class(k): the curve class of k relative to the chart cone sigma0,
 *   lambda(k) = Psi(k) - c^{sigma0}(k)  in Q^m,
 * returned in Lambda coordinates.  It is supported on the complement of
 * sigma0 in the Psi positions, hence effective.
 */
inline std::vector<Int> lambda_class(const StackyFan& f, const FanSequences& seq,
                                     const std::vector<Int>& k, const std::vector<int>& sigma0) {
  auto sig = find_containing_cone(f, k);
  if (!sig) throw std::invalid_argument("lambda_class: k outside the support");
  auto p = psi(f, k, *sig);
  auto cc = cone_chart_coords(f, sigma0, k);
  std::vector<Rat> lam(p->begin(), p->end());
  for (size_t j = 0; j < sigma0.size(); ++j)
    lam[static_cast<size_t>(sigma0[j])] -= cc[j];
  auto coords = seq.lambda.coordinates(lam);
  if (!coords) throw std::runtime_error("lambda_class: class not in Lambda");
  return *coords;
}

/* d(k1,k2) = Psi(k1) + Psi(k2) - Psi(k1+k2) in Lambda coordinates. */
inline std::vector<Int> dclass(const StackyFan& f, const FanSequences& seq,
                               const std::vector<Int>& k1, const std::vector<Int>& k2) {
  auto s1 = find_containing_cone(f, k1);
  auto s2 = find_containing_cone(f, k2);
  auto ks = f.N.add(k1, k2);
  auto s12 = find_containing_cone(f, ks);
  if (!s1 || !s2 || !s12) throw std::invalid_argument("dclass: element outside the support");
  auto p1 = psi(f, k1, *s1);
  auto p2 = psi(f, k2, *s2);
  auto p12 = psi(f, ks, *s12);
  std::vector<Rat> d(static_cast<size_t>(f.m()));
  for (int i = 0; i < f.m(); ++i)
    d[static_cast<size_t>(i)] = (*p1)[static_cast<size_t>(i)] + (*p2)[static_cast<size_t>(i)] -
                                (*p12)[static_cast<size_t>(i)];
  auto coords = seq.lambda.coordinates(d);
  if (!coords) throw std::runtime_error("dclass: class not in Lambda");
  return *coords;
}

/* First Chern degree of a class: sum of its Q^m coordinates. */
inline Rat c1_degree(const FanSequences& seq, const std::vector<Int>& coords) {
  auto v = seq.lambda.from_coordinates(coords);
  Rat s(0);
  for (const auto& x : v) s += x;
  return s;
}

/*
 * Mori data.  The effective cone is the union over maximal cones sigma of
 *   C_sigma = { lambda in Lambda_R : lambda_i >= 0 for i not in sigma },
 * summed; membership is a linear feasibility problem.  The ample functional
 * comes from the strict convexity certificate of the support function.
 */
struct MoriData {
  QLattice lambda;
  std::vector<Int> ample;                 // integral, positive on effective classes != 0
  std::vector<std::vector<Int>> rays;     // extreme rays, primitive Lambda coordinates
};

namespace curves_detail {

/* Rows of the Lambda basis seen in Q^m: coordinate i of basis vector j. */
inline Rat lambda_entry(const QLattice& L, int i, int j) {
  return Rat(L.basis.at(i, j)) / Rat(L.denom);
}

/*
 * Feasibility of lambda = sum over maximal cones of nonnegative-on-complement
 * pieces, all expressed in Lambda coordinates (r variables per cone).
 */
inline bool effective_membership(const StackyFan& f, const QLattice& L,
                                 const std::vector<Rat>& target_coords) {
  const int r = L.rank();
  if (r == 0) return true;  // only the zero class, caller checked lattice membership
  const int nc = static_cast<int>(f.cones.size());
  LinIneqSystem sys(r * nc);
  // piece constraints: for cone c and i not in sigma_c, (sum_j t^c_j basis_j)_i >= 0
  for (int c = 0; c < nc; ++c) {
    std::set<int> in(f.cones[static_cast<size_t>(c)].begin(), f.cones[static_cast<size_t>(c)].end());
    for (int i = 0; i < f.m(); ++i) {
      if (in.count(i)) continue;
      std::vector<Rat> row(static_cast<size_t>(r * nc), Rat(0));
      for (int j = 0; j < r; ++j) row[static_cast<size_t>(c * r + j)] = -lambda_entry(L, i, j);
      sys.add(row, Rat(0));
    }
  }
  // sum of pieces equals the target, coordinatewise in Lambda coordinates
  for (int j = 0; j < r; ++j) {
    std::vector<Rat> row(static_cast<size_t>(r * nc), Rat(0));
    for (int c = 0; c < nc; ++c) row[static_cast<size_t>(c * r + j)] = Rat(1);
    sys.add_eq(row, target_coords[static_cast<size_t>(j)]);
  }
  return lp_feasible(sys);
}

}  // namespace curves_detail

inline bool is_effective(const StackyFan& f, const MoriData& mori, const std::vector<Int>& coords) {
  std::vector<Rat> t(coords.size());
  for (size_t j = 0; j < coords.size(); ++j) t[j] = Rat(coords[j]);
  return curves_detail::effective_membership(f, mori.lambda, t);
}

inline MoriData build_mori(const StackyFan& f, const FanSequences& seq,
                           const std::vector<Rat>& pl_certificate) {
  MoriData mori;
  mori.lambda = seq.lambda;
  const int r = seq.lambda.rank();
  const int m = f.m();
  if (static_cast<int>(pl_certificate.size()) != m)
    throw std::invalid_argument("build_mori: certificate length");

  // s(lambda) = sum_i v_i lambda_i on the Lambda basis, scaled integral.
  std::vector<Rat> s(static_cast<size_t>(r), Rat(0));
  Int den(1);
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < m; ++i)
      s[static_cast<size_t>(j)] += pl_certificate[static_cast<size_t>(i)] *
                                   curves_detail::lambda_entry(seq.lambda, i, j);
    den = int_lcm(den, rat_den(s[static_cast<size_t>(j)]));
  }
  mori.ample.resize(static_cast<size_t>(r));
  for (int j = 0; j < r; ++j) mori.ample[static_cast<size_t>(j)] = rat_num(s[static_cast<size_t>(j)] * Rat(den));

  // Extreme rays: candidates are the edges of the per-cone pieces.
  std::vector<std::vector<Rat>> cands;
  for (const auto& sigma : f.cones) {
    std::set<int> in(sigma.begin(), sigma.end());
    std::vector<std::vector<Rat>> rows;  // inequality rows A t >= 0 in Lambda coords
    for (int i = 0; i < m; ++i) {
      if (in.count(i)) continue;
      std::vector<Rat> row(static_cast<size_t>(r));
      for (int j = 0; j < r; ++j) row[static_cast<size_t>(j)] = curves_detail::lambda_entry(seq.lambda, i, j);
      rows.push_back(row);
    }
    if (r == 0) continue;
    // choose r-1 rows to be active; direction spans their nullspace
    std::vector<int> pick(static_cast<size_t>(std::max(0, r - 1)));
    std::vector<int> idx;
    for (size_t i = 0; i < rows.size(); ++i) idx.push_back(static_cast<int>(i));
    std::vector<std::vector<int>> subsets;
    std::vector<int> cur;
    std::function<void(size_t)> rec = [&](size_t start) {
      if (static_cast<int>(cur.size()) == r - 1) {
        subsets.push_back(cur);
        return;
      }
      for (size_t i = start; i < idx.size(); ++i) {
        cur.push_back(idx[i]);
        rec(i + 1);
        cur.pop_back();
      }
    };
    rec(0);
    for (const auto& sub : subsets) {
      QMatrix a(static_cast<int>(sub.size()), r);
      for (size_t p = 0; p < sub.size(); ++p)
        for (int j = 0; j < r; ++j) a.at(static_cast<int>(p), j) = rows[static_cast<size_t>(sub[p])][static_cast<size_t>(j)];
      auto ns = a.nullspace();
      if (ns.size() != 1) continue;
      for (int sign = -1; sign <= 1; sign += 2) {
        std::vector<Rat> dir(static_cast<size_t>(r));
        bool nonzero = false;
        for (int j = 0; j < r; ++j) {
          dir[static_cast<size_t>(j)] = Rat(sign) * ns[0][static_cast<size_t>(j)];
          if (dir[static_cast<size_t>(j)] != 0) nonzero = true;
        }
        if (!nonzero) continue;
        bool ok = true;
        for (const auto& row : rows) {
          Rat v(0);
          for (int j = 0; j < r; ++j) v += row[static_cast<size_t>(j)] * dir[static_cast<size_t>(j)];
          if (v < 0) {
            ok = false;
            break;
          }
        }
        if (ok) cands.push_back(dir);
      }
    }
  }
  // normalize candidates to primitive integer coordinate vectors, dedup
  std::set<std::vector<Int>> prim;
  for (const auto& dir : cands) {
    Int d(1);
    for (const auto& x : dir) d = int_lcm(d, rat_den(x));
    std::vector<Int> v(dir.size());
    Int g(0);
    for (size_t j = 0; j < dir.size(); ++j) {
      v[j] = rat_num(dir[j] * Rat(d));
      g = boost::multiprecision::gcd(g, v[j] < 0 ? Int(-v[j]) : v[j]);
    }
    if (g == 0) continue;
    for (auto& x : v) x /= g;
    prim.insert(v);
  }
  // keep a ray only if it is not a nonnegative combination of the others
  std::vector<std::vector<Int>> rays(prim.begin(), prim.end());
  std::vector<std::vector<Int>> extreme;
  for (size_t a = 0; a < rays.size(); ++a) {
    std::vector<std::vector<Int>> others;
    for (size_t b = 0; b < rays.size(); ++b)
      if (b != a) others.push_back(rays[b]);
    bool redundant = false;
    if (!others.empty()) {
      LinIneqSystem sys(static_cast<int>(others.size()));
      for (size_t b = 0; b < others.size(); ++b) {
        std::vector<Rat> row(others.size(), Rat(0));
        row[b] = Rat(-1);
        sys.add(row, Rat(0));  // coefficients >= 0
      }
      for (int j = 0; j < r; ++j) {
        std::vector<Rat> row(others.size());
        for (size_t b = 0; b < others.size(); ++b) row[b] = Rat(others[b][static_cast<size_t>(j)]);
        sys.add_eq(row, Rat(rays[a][static_cast<size_t>(j)]));
      }
      redundant = lp_feasible(sys);
    }
    if (!redundant) extreme.push_back(rays[a]);
  }
  mori.rays = extreme;
  return mori;
}

/* All effective classes with ample degree <= maxdeg, sorted by (degree, lex). */
inline std::vector<std::vector<Int>> enumerate_effective(const StackyFan& f, const MoriData& mori,
                                                         const Int& maxdeg) {
  const int r = mori.lambda.rank();
  if (maxdeg < 0) return {};
  if (r == 0) return {std::vector<Int>{}};

  // bounding box from the decomposition LP with the degree cap
  const int nc = static_cast<int>(f.cones.size());
  LinIneqSystem sys(r + r * nc);
  for (int c = 0; c < nc; ++c) {
    std::set<int> in(f.cones[static_cast<size_t>(c)].begin(), f.cones[static_cast<size_t>(c)].end());
    for (int i = 0; i < f.m(); ++i) {
      if (in.count(i)) continue;
      std::vector<Rat> row(static_cast<size_t>(r + r * nc), Rat(0));
      for (int j = 0; j < r; ++j)
        row[static_cast<size_t>(r + c * r + j)] = -curves_detail::lambda_entry(mori.lambda, i, j);
      sys.add(row, Rat(0));
    }
  }
  for (int j = 0; j < r; ++j) {
    std::vector<Rat> row(static_cast<size_t>(r + r * nc), Rat(0));
    row[static_cast<size_t>(j)] = Rat(-1);
    for (int c = 0; c < nc; ++c) row[static_cast<size_t>(r + c * r + j)] = Rat(1);
    sys.add_eq(row, Rat(0));
  }
  {
    std::vector<Rat> row(static_cast<size_t>(r + r * nc), Rat(0));
    for (int j = 0; j < r; ++j) row[static_cast<size_t>(j)] = Rat(mori.ample[static_cast<size_t>(j)]);
    sys.add(row, Rat(maxdeg));
  }
  std::vector<std::pair<Int, Int>> bounds;
  for (int j = 0; j < r; ++j) {
    auto [lo, hi] = lp_range(sys, j);
    if (!lo || !hi) throw std::runtime_error("enumerate_effective: unbounded degree slice");
    bounds.emplace_back(rat_ceil(*lo), rat_floor(*hi));
  }
  std::vector<std::vector<Int>> out;
  std::vector<Int> cur(static_cast<size_t>(r));
  std::function<void(int)> rec = [&](int j) {
    if (j == r) {
      Int deg(0);
      for (int t = 0; t < r; ++t) deg += mori.ample[static_cast<size_t>(t)] * cur[static_cast<size_t>(t)];
      if (deg > maxdeg) return;
      if (is_effective(f, mori, cur)) out.push_back(cur);
      return;
    }
    for (Int v = bounds[static_cast<size_t>(j)].first; v <= bounds[static_cast<size_t>(j)].second; ++v) {
      cur[static_cast<size_t>(j)] = v;
      rec(j + 1);
    }
  };
  rec(0);
  std::sort(out.begin(), out.end(), [&](const std::vector<Int>& a, const std::vector<Int>& b) {
    Int da(0), db(0);
    for (int t = 0; t < r; ++t) {
      da += mori.ample[static_cast<size_t>(t)] * a[static_cast<size_t>(t)];
      db += mori.ample[static_cast<size_t>(t)] * b[static_cast<size_t>(t)];
    }
    if (da != db) return da < db;
    return a < b;
  });
  return out;
}

/*
 * Gale dual side.  With F the coordinate group of N (free then torsion
 * generators), K the kernel lattice of F -> N (spanned by m_j e_{f+j}), and
 * btilde the ray matrix into F, the dual group is
 *   coker( F* -> K* (+) (Z^m)* ),  phi |-> (phi o iota, phi o btilde).
 * Elements are held as integer vectors of length t+m (K* then (Z^m)* part).
 */
struct GaleDual {
  int tgens = 0;  // rank of K = number of torsion generators of N
  int m = 0;
  StandardizedQuotient quo;                 // abstract group with proj/lift
  std::vector<std::vector<Int>> divisor_class;  // D_i in abstract coordinates
  std::vector<Int> c1;                      // sum of the divisor classes
};

inline GaleDual gale_dual(const StackyFan& f) {
  const int m = f.m();
  const int dim = f.N.dim();
  const int fr = f.N.free_rank;
  const int t = static_cast<int>(f.N.torsion.size());
  GaleDual gd;
  gd.tgens = t;
  gd.m = m;
  // stacked map F* -> K* (+) (Z^m)*: row block iota^T then btilde^T
  IntMatrix rels(t + m, dim);
  for (int p = 0; p < dim; ++p) {
    // (phi_p o iota)(j-th K basis) = phi_p(m_j e_{fr+j})
    for (int j = 0; j < t; ++j)
      if (fr + j == p) rels.at(j, p) = f.N.torsion[static_cast<size_t>(j)];
    for (int i = 0; i < m; ++i)
      rels.at(t + i, p) = f.b[static_cast<size_t>(i)][static_cast<size_t>(p)];
  }
  gd.quo = standardize_quotient(t + m, rels);
  for (int i = 0; i < m; ++i) {
    std::vector<Int> e(static_cast<size_t>(t + m), Int(0));
    e[static_cast<size_t>(t + i)] = 1;
    gd.divisor_class.push_back(gd.quo.group.normalize(gd.quo.proj.apply(e)));
  }
  gd.c1.assign(static_cast<size_t>(gd.quo.group.dim()), Int(0));
  for (const auto& d : gd.divisor_class) gd.c1 = gd.quo.group.add(gd.c1, d);
  return gd;
}

/*
 * age(xi, (c, k)) for xi a representative in Z^{t+m} and (c, k) a generator
 * of the extension group: pair xi with (K-coordinates of ktilde - btilde(c), c).
 * Well defined modulo Z once (c, k) is fixed.
 */
inline Rat age_pairing(const StackyFan& f, const GaleDual& gd, const std::vector<Int>& xi,
                       const ExtGenerator& g) {
  const int m = f.m();
  const int dim = f.N.dim();
  const int fr = f.N.free_rank;
  const int t = gd.tgens;
  if (static_cast<int>(xi.size()) != t + m) throw std::invalid_argument("age_pairing: xi length");
  std::vector<Rat> diff(static_cast<size_t>(dim), Rat(0));
  for (int p = 0; p < dim; ++p) {
    diff[static_cast<size_t>(p)] = Rat(g.k[static_cast<size_t>(p)]);
    for (int i = 0; i < m; ++i)
      diff[static_cast<size_t>(p)] -= g.c[static_cast<size_t>(i)] * Rat(f.b[static_cast<size_t>(i)][static_cast<size_t>(p)]);
  }
  for (int p = 0; p < fr; ++p)
    if (diff[static_cast<size_t>(p)] != 0)
      throw std::invalid_argument("age_pairing: element not in the extension group");
  Rat age(0);
  for (int j = 0; j < t; ++j)
    age += Rat(xi[static_cast<size_t>(j)]) * diff[static_cast<size_t>(fr + j)] / Rat(f.N.torsion[static_cast<size_t>(j)]);
  for (int i = 0; i < m; ++i) age += Rat(xi[static_cast<size_t>(t + i)]) * g.c[static_cast<size_t>(i)];
  return age;
}

/* Pairing of xi with a Lambda class given in Q^m (zero N component). */
inline Rat lambda_pairing(const StackyFan& f, const GaleDual& gd, const std::vector<Int>& xi,
                          const std::vector<Rat>& lam) {
  ExtGenerator g;
  g.c = lam;
  g.k = f.N.zero();
  return age_pairing(f, gd, xi, g);
}

/*
 * The stacky Picard group: the dual group modulo the classes that pair
 * integrally with every element of Lambda.  Torsion elements act with
 * nontrivial phases on curve classes and box variables.
 */
inline StandardizedQuotient picard_stack(const StackyFan& f, const GaleDual& gd,
                                         const QLattice& lambda) {
  const int n = gd.tgens + gd.m;
  const int r = lambda.rank();
  // rows: pairing with each Lambda basis vector, scaled to integers
  std::vector<std::vector<Rat>> rows;
  for (int j = 0; j < r; ++j) {
    std::vector<Rat> lam(static_cast<size_t>(gd.m));
    for (int i = 0; i < gd.m; ++i) lam[static_cast<size_t>(i)] = curves_detail::lambda_entry(lambda, i, j);
    std::vector<Rat> row(static_cast<size_t>(n), Rat(0));
    for (int p = 0; p < n; ++p) {
      std::vector<Int> e(static_cast<size_t>(n), Int(0));
      e[static_cast<size_t>(p)] = 1;
      row[static_cast<size_t>(p)] = lambda_pairing(f, gd, e, lam);
    }
    rows.push_back(row);
  }
  // sublattice { x : row_j . x in Z for all j } via kernel of [A | diag(D)]
  std::vector<Int> dens(static_cast<size_t>(r), Int(1));
  for (int j = 0; j < r; ++j)
    for (int p = 0; p < n; ++p)
      dens[static_cast<size_t>(j)] = int_lcm(dens[static_cast<size_t>(j)], rat_den(rows[static_cast<size_t>(j)][static_cast<size_t>(p)]));
  IntMatrix stack(r, n + r);
  for (int j = 0; j < r; ++j) {
    for (int p = 0; p < n; ++p)
      stack.at(j, p) = rat_num(rows[static_cast<size_t>(j)][static_cast<size_t>(p)] * Rat(dens[static_cast<size_t>(j)]));
    stack.at(j, n + j) = dens[static_cast<size_t>(j)];
  }
  auto ker = int_kernel(stack);
  IntMatrix xmat(n, static_cast<int>(ker.size()));
  for (size_t j = 0; j < ker.size(); ++j)
    for (int i = 0; i < n; ++i) xmat.at(i, static_cast<int>(j)) = ker[j][static_cast<size_t>(i)];
  IntMatrix basis = column_lattice_basis(xmat);
  return standardize_quotient(n, basis);
}

/*
 * Phases of the symmetry attached to xi (a representative in Z^{t+m}):
 * a curve class d gets multiplier exp(-2 pi i <xi, d>), the variable of a
 * deformation direction l gets exp(-2 pi i age(xi, (Psi(l), l))), and the
 * sector of a box element v gets shifted by age(xi, (Psi(v), v)).
 * All phases are reported as rationals modulo 1.
 */
struct GaloisPhases {
  std::vector<Rat> q_phase;       // per Lambda basis vector
  std::vector<Rat> ray_phase;     // per ray (must be integral, hence 0)
  std::vector<Rat> box_phase;     // per box element of the fan, box(f) order
  std::vector<BoxElement> boxes;
};

inline Rat mod_one(const Rat& x) {
  Rat r = x - Rat(rat_floor(x));
  return r;
}

inline GaloisPhases galois_phases(const StackyFan& f, const FanSequences& seq, const GaleDual& gd,
                                  const std::vector<Int>& xi) {
  GaloisPhases ph;
  const int r = seq.lambda.rank();
  for (int j = 0; j < r; ++j) {
    std::vector<Rat> lam(static_cast<size_t>(gd.m));
    for (int i = 0; i < gd.m; ++i) lam[static_cast<size_t>(i)] = curves_detail::lambda_entry(seq.lambda, i, j);
    ph.q_phase.push_back(mod_one(-lambda_pairing(f, gd, xi, lam)));
  }
  for (int i = 0; i < f.m(); ++i) {
    ExtGenerator g;
    g.c.assign(static_cast<size_t>(f.m()), Rat(0));
    g.c[static_cast<size_t>(i)] = Rat(1);
    g.k = f.N.normalize(f.b[static_cast<size_t>(i)]);
    ph.ray_phase.push_back(mod_one(-age_pairing(f, gd, xi, g)));
  }
  ph.boxes = box(f);
  for (const auto& v : ph.boxes) {
    ExtGenerator g;
    g.c.assign(v.psi.begin(), v.psi.end());
    g.k = v.k;
    ph.box_phase.push_back(mod_one(age_pairing(f, gd, xi, g)));
  }
  return ph;
}

/*
 * Points of N inside a maximal cone up to a bound on the total Psi mass,
 * listed via the box decomposition k = v + sum a_i b_i.
 */
inline std::vector<std::vector<Int>> cone_lattice_points(const StackyFan& f,
                                                         const std::vector<int>& sigma,
                                                         const Rat& max_mass) {
  std::vector<std::vector<Int>> out;
  std::set<std::vector<Int>> seen;
  for (const auto& v : box_of_cone(f, sigma)) {
    Rat base = v.age();
    if (base > max_mass) continue;
    // iterate a in Z_{>=0}^sigma with base + sum a_i <= max_mass
    std::vector<Int> a(sigma.size(), Int(0));
    std::function<void(size_t, Rat)> rec = [&](size_t j, Rat used) {
      if (j == sigma.size()) {
        std::vector<Int> k = v.k;
        for (size_t t = 0; t < sigma.size(); ++t)
          k = f.N.add(k, f.N.scale(a[t], f.b[static_cast<size_t>(sigma[t])]));
        k = f.N.normalize(k);
        if (seen.insert(k).second) out.push_back(k);
        return;
      }
      for (Int val(0); used + Rat(val) <= max_mass; ++val) {
        a[j] = val;
        rec(j + 1, used + Rat(val));
      }
      a[j] = 0;
    };
    rec(0, base);
  }
  return out;
}

}  // namespace toricmirror
