#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "toricmirror/intmatrix.hpp"
#include "toricmirror/rational.hpp"

namespace toricmirror {

/* Finitely generated abelian group in split form: Z^free_rank + sum Z/m_j.
 * Elements are coordinate vectors of length free_rank + torsion.size(),
 * free coordinates first. */
struct FgAbGroup {
  int free_rank = 0;
  std::vector<Int> torsion;  // each modulus >= 2

  static FgAbGroup free_group(int rank) { return FgAbGroup{rank, {}}; }

  int dim() const { return free_rank + static_cast<int>(torsion.size()); }
  bool is_trivial() const { return dim() == 0; }
  Int torsion_order() const {
    Int o(1);
    for (auto& m : torsion) o *= m;
    return o;
  }
  bool is_finite() const { return free_rank == 0; }
  Int order() const {
    if (!is_finite()) throw std::invalid_argument("FgAbGroup: infinite group");
    return torsion_order();
  }

  std::vector<Int> zero() const { return std::vector<Int>(static_cast<size_t>(dim()), Int(0)); }

  std::vector<Int> normalize(std::vector<Int> v) const {
    if (static_cast<int>(v.size()) != dim())
      throw std::invalid_argument("FgAbGroup: element shape mismatch");
    for (size_t j = 0; j < torsion.size(); ++j) {
      Int& c = v[static_cast<size_t>(free_rank) + j];
      c %= torsion[j];
      if (c < 0) c += torsion[j];
    }
    return v;
  }
  bool is_zero(const std::vector<Int>& v) const {
    for (auto& c : normalize(v))
      if (c != 0) return false;
    return true;
  }
  bool equal(const std::vector<Int>& a, const std::vector<Int>& b) const {
    return normalize(a) == normalize(b);
  }
  std::vector<Int> add(const std::vector<Int>& a, const std::vector<Int>& b) const {
    std::vector<Int> r = a;
    for (size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return normalize(r);
  }
  std::vector<Int> neg(const std::vector<Int>& a) const {
    std::vector<Int> r = a;
    for (auto& c : r) c = -c;
    return normalize(r);
  }
  std::vector<Int> scale(const Int& n, const std::vector<Int>& a) const {
    std::vector<Int> r = a;
    for (auto& c : r) c *= n;
    return normalize(r);
  }

  /* Image in the free quotient (torsion coordinates dropped). */
  std::vector<Int> free_image(const std::vector<Int>& v) const {
    return std::vector<Int>(v.begin(), v.begin() + free_rank);
  }

  /* Relation matrix of the canonical presentation Z^dim -> this. */
  IntMatrix relation_matrix() const {
    IntMatrix r(dim(), static_cast<int>(torsion.size()));
    for (size_t j = 0; j < torsion.size(); ++j)
      r.at(free_rank + static_cast<int>(j), static_cast<int>(j)) = torsion[j];
    return r;
  }

  /* All torsion elements (free part zero); only valid for small groups. */
  std::vector<std::vector<Int>> torsion_elements() const {
    std::vector<std::vector<Int>> out{zero()};
    for (size_t j = 0; j < torsion.size(); ++j) {
      std::vector<std::vector<Int>> next;
      for (auto& v : out)
        for (Int c(0); c < torsion[j]; ++c) {
          auto w = v;
          w[static_cast<size_t>(free_rank) + j] = c;
          next.push_back(w);
        }
      out = std::move(next);
    }
    return out;
  }

  bool operator==(const FgAbGroup& o) const {
    return free_rank == o.free_rank && torsion == o.torsion;
  }
};

/* Homomorphism between split-form groups, as a matrix on generator coords. */
struct GroupHom {
  FgAbGroup domain;
  FgAbGroup codomain;
  IntMatrix matrix;  // codomain.dim x domain.dim

  std::vector<Int> apply(const std::vector<Int>& v) const {
    return codomain.normalize(matrix.apply(v));
  }

  /* The matrix must send domain relations into codomain relations. */
  bool is_well_defined() const {
    IntMatrix rel = domain.relation_matrix();
    IntMatrix relcod = codomain.relation_matrix();
    for (int j = 0; j < rel.cols(); ++j) {
      auto img = matrix.apply(rel.col(j));
      if (relcod.cols() == 0) {
        for (auto& c : img)
          if (c != 0) return false;
      } else if (!int_solve(relcod, img)) {
        return false;
      }
    }
    return true;
  }
};

/* Standardization of Z^ngens / im(rels): the split-form group, the projection
 * on generator coordinates, and a lift of standard generators. */
struct StandardizedQuotient {
  FgAbGroup group;
  IntMatrix proj;  // group.dim x ngens
  IntMatrix lift;  // ngens x group.dim

  std::vector<Int> cls(const std::vector<Int>& v) const {
    return group.normalize(proj.apply(v));
  }
};

inline IntMatrix unimodular_inverse(const IntMatrix& u) {
  auto inv = QMatrix::from_int(u).inverse();
  if (!inv) throw std::invalid_argument("unimodular_inverse: singular");
  IntMatrix r(u.rows(), u.cols());
  for (int i = 0; i < u.rows(); ++i)
    for (int j = 0; j < u.cols(); ++j) {
      if (!rat_is_integer(inv->at(i, j)))
        throw std::invalid_argument("unimodular_inverse: not unimodular");
      r.at(i, j) = rat_num(inv->at(i, j));
    }
  return r;
}

inline StandardizedQuotient standardize_quotient(int ngens, const IntMatrix& rels) {
  if (rels.rows() != ngens) throw std::invalid_argument("standardize_quotient: shape");
  SmithForm s = smith_normal_form(rels);
  IntMatrix uinv = unimodular_inverse(s.U);
  std::vector<int> free_idx, tors_idx;
  std::vector<Int> moduli;
  int dmin = std::min(rels.rows(), rels.cols());
  for (int i = 0; i < ngens; ++i) {
    Int d = i < dmin ? s.D.at(i, i) : Int(0);
    if (d == 0) free_idx.push_back(i);
    else if (d >= 2) {
      tors_idx.push_back(i);
      moduli.push_back(d);
    }
    // d == 1: generator dies
  }
  FgAbGroup g{static_cast<int>(free_idx.size()), moduli};
  IntMatrix proj(g.dim(), ngens), lift(ngens, g.dim());
  int row = 0;
  auto put = [&](int src) {
    for (int j = 0; j < ngens; ++j) proj.at(row, j) = s.U.at(src, j);
    for (int i = 0; i < ngens; ++i) lift.at(i, row) = uinv.at(i, src);
    ++row;
  };
  for (int i : free_idx) put(i);
  for (int i : tors_idx) put(i);
  return {g, proj, lift};
}

/* Basis of the lattice spanned by the columns of a, as matrix columns. */
inline IntMatrix column_lattice_basis(const IntMatrix& a) {
  SmithForm s = smith_normal_form(a);
  IntMatrix uinv = unimodular_inverse(s.U);
  IntMatrix b(a.rows(), s.rank);
  for (int j = 0; j < s.rank; ++j)
    for (int i = 0; i < a.rows(); ++i) b.at(i, j) = uinv.at(i, j) * s.D.at(j, j);
  return b;
}

/* Kernel of a homomorphism: split-form group plus inclusion into the domain
 * (on generator coordinates). */
struct SubgroupData {
  FgAbGroup group;
  IntMatrix incl;  // domain.dim x group.dim
};

inline SubgroupData kernel(const GroupHom& f) {
  int da = f.domain.dim(), db = f.codomain.dim();
  IntMatrix relb = f.codomain.relation_matrix();
  IntMatrix stacked(db, da + relb.cols());
  for (int i = 0; i < db; ++i) {
    for (int j = 0; j < da; ++j) stacked.at(i, j) = f.matrix.at(i, j);
    for (int j = 0; j < relb.cols(); ++j) stacked.at(i, da + j) = relb.at(i, j);
  }
  auto ker = int_kernel(stacked);
  IntMatrix gens(da, static_cast<int>(ker.size()));
  for (size_t j = 0; j < ker.size(); ++j)
    for (int i = 0; i < da; ++i) gens.at(i, static_cast<int>(j)) = ker[j][static_cast<size_t>(i)];
  IntMatrix basis = column_lattice_basis(gens);  // da x r, the preimage lattice L

  // relations: domain relations expressed in the basis of L
  IntMatrix rela = f.domain.relation_matrix();
  IntMatrix relcoords(basis.cols(), rela.cols());
  for (int j = 0; j < rela.cols(); ++j) {
    auto sol = int_solve(basis, rela.col(j));
    if (!sol) throw std::logic_error("kernel: domain relation outside preimage lattice");
    for (int i = 0; i < basis.cols(); ++i) relcoords.at(i, j) = (*sol)[static_cast<size_t>(i)];
  }
  StandardizedQuotient q = standardize_quotient(basis.cols(), relcoords);
  return {q.group, basis * q.lift};
}

/* Section of f (matrix s with f(s(x)) = x and s well-defined), if the direct
 * construction succeeds. */
inline std::optional<IntMatrix> solve_section(const GroupHom& f) {
  int da = f.domain.dim(), db = f.codomain.dim();
  IntMatrix relb = f.codomain.relation_matrix();
  IntMatrix stacked(db, da + relb.cols());
  for (int i = 0; i < db; ++i) {
    for (int j = 0; j < da; ++j) stacked.at(i, j) = f.matrix.at(i, j);
    for (int j = 0; j < relb.cols(); ++j) stacked.at(i, da + j) = relb.at(i, j);
  }
  IntMatrix s(da, db);
  for (int j = 0; j < db; ++j) {
    std::vector<Int> e(static_cast<size_t>(db), Int(0));
    e[static_cast<size_t>(j)] = 1;
    auto sol = int_solve(stacked, e);
    if (!sol) return std::nullopt;
    for (int i = 0; i < da; ++i) s.at(i, j) = (*sol)[static_cast<size_t>(i)];
  }
  // well-definedness: s must send codomain relations into domain relations
  IntMatrix rela = f.domain.relation_matrix();
  for (int j = 0; j < relb.cols(); ++j) {
    auto img = s.apply(relb.col(j));
    bool ok;
    if (rela.cols() == 0) {
      ok = true;
      for (auto& c : img) ok = ok && c == 0;
    } else {
      ok = static_cast<bool>(int_solve(rela, img));
    }
    if (!ok) return std::nullopt;
  }
  return s;
}

/* Lattice inside Q^ambient, stored as an integer basis over a common
 * denominator: column j of basis / denom. */
struct QLattice {
  int ambient = 0;
  IntMatrix basis;  // ambient x rank
  Int denom = 1;

  int rank() const { return basis.cols(); }

  static QLattice from_generators(int ambient, const std::vector<std::vector<Rat>>& gens) {
    Int d(1);
    for (auto& g : gens)
      for (auto& x : g) d = int_lcm(d, rat_den(x));
    IntMatrix m(ambient, static_cast<int>(gens.size()));
    for (size_t j = 0; j < gens.size(); ++j) {
      if (static_cast<int>(gens[j].size()) != ambient)
        throw std::invalid_argument("QLattice: generator shape");
      for (int i = 0; i < ambient; ++i) {
        Rat scaled = gens[j][static_cast<size_t>(i)] * Rat(d);
        m.at(i, static_cast<int>(j)) = rat_num(scaled);
      }
    }
    return {ambient, column_lattice_basis(m), d};
  }

  std::vector<Rat> from_coordinates(const std::vector<Int>& c) const {
    if (static_cast<int>(c.size()) != rank()) throw std::invalid_argument("QLattice: coord shape");
    std::vector<Rat> v(static_cast<size_t>(ambient), Rat(0));
    for (int i = 0; i < ambient; ++i) {
      Int acc(0);
      for (int j = 0; j < rank(); ++j) acc += basis.at(i, j) * c[static_cast<size_t>(j)];
      v[static_cast<size_t>(i)] = Rat(acc) / Rat(denom);
    }
    return v;
  }

  std::optional<std::vector<Int>> coordinates(const std::vector<Rat>& v) const {
    if (static_cast<int>(v.size()) != ambient) throw std::invalid_argument("QLattice: vector shape");
    std::vector<Int> target(static_cast<size_t>(ambient));
    for (int i = 0; i < ambient; ++i) {
      Rat scaled = v[static_cast<size_t>(i)] * Rat(denom);
      if (!rat_is_integer(scaled)) return std::nullopt;
      target[static_cast<size_t>(i)] = rat_num(scaled);
    }
    return int_solve(basis, target);
  }
  bool contains(const std::vector<Rat>& v) const { return static_cast<bool>(coordinates(v)); }
};

}  // namespace toricmirror
