#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stackyfan.hpp"
#include "zrat.hpp"

namespace toricmirror {

/*
 * Localized inertia cohomology.  A class is stored through its restrictions
 * to the fixed points (maximal cones) and, at each fixed point, to the
 * sectors indexed by the box elements of that cone.  Entries are rational
 * functions in z and the equivariant parameters chi_1..chi_n.
 */

struct LocalizationFrame {
  StackyFan fan;
  std::vector<FixedPointData> fixed;  // aligned with fan.cones
  int nvars = 0;                      // number of chi variables = n

  const FixedPointData& at_cone(int c) const { return fixed[static_cast<size_t>(c)]; }
};

inline LocalizationFrame build_frame(const StackyFan& f) {
  LocalizationFrame fr;
  fr.fan = f;
  fr.nvars = f.n();
  for (const auto& sigma : f.cones) fr.fixed.push_back(fixed_point_weights(f, sigma));
  return fr;
}

/* (cone index, normalized box representative) */
using SectorKey = std::pair<int, std::vector<Int>>;

struct LocalizedClass {
  std::map<SectorKey, ZRat> entries;

  void add(const SectorKey& s, const ZRat& v) {
    auto it = entries.find(s);
    if (it == entries.end()) {
      if (!v.is_zero()) entries.emplace(s, v);
      return;
    }
    it->second = it->second + v;
    if (it->second.is_zero()) entries.erase(it);
  }
  const ZRat* at(const SectorKey& s) const {
    auto it = entries.find(s);
    return it == entries.end() ? nullptr : &it->second;
  }
  bool is_zero() const { return entries.empty(); }

  friend LocalizedClass operator+(const LocalizedClass& a, const LocalizedClass& b) {
    LocalizedClass r = a;
    for (const auto& [s, v] : b.entries) r.add(s, v);
    return r;
  }
  friend LocalizedClass operator-(const LocalizedClass& a, const LocalizedClass& b) {
    LocalizedClass r = a;
    for (const auto& [s, v] : b.entries) r.add(s, -v);
    return r;
  }
  LocalizedClass operator-() const {
    LocalizedClass r;
    for (const auto& [s, v] : entries) r.entries.emplace(s, -v);
    return r;
  }
  LocalizedClass scaled(const ZRat& c) const {
    LocalizedClass r;
    for (const auto& [s, v] : entries) r.add(s, v * c);
    return r;
  }
  bool operator==(const LocalizedClass& o) const {
    LocalizedClass d = *this - o;
    return d.is_zero();
  }
};

/* Indicator class of the sector of a box element. */
inline LocalizedClass unit_class(const LocalizationFrame& fr, const std::vector<Int>& v) {
  LocalizedClass c;
  auto vn = fr.fan.N.normalize(v);
  for (size_t ci = 0; ci < fr.fixed.size(); ++ci)
    for (const auto& bx : fr.fixed[ci].box)
      if (bx.k == vn)
        c.add({static_cast<int>(ci), vn}, ZRat::constant(fr.nvars, Rat(1)));
  return c;
}

/*
 * phi_class(k) for k in N cap |Sigma|: reduce k = v + sum_i f_i b_i over its
 * minimal cone, then restrict prod_i u_i^{f_i} 1_v.  Weights u_i vanish off
 * the cone, which kills sectors whose fixed point does not see the support.
 */
inline LocalizedClass phi_class(const LocalizationFrame& fr, const std::vector<Int>& k) {
  auto sig = find_containing_cone(fr.fan, k);
  if (!sig) throw std::invalid_argument("phi_class: k outside the support");
  auto red0 = box_reduce(fr.fan, k, *sig);
  if (!red0) throw std::runtime_error("phi_class: reduction failed");
  const BoxReduction& red = *red0;
  LocalizedClass c;
  auto vn = fr.fan.N.normalize(red.v.k);
  for (size_t ci = 0; ci < fr.fixed.size(); ++ci) {
    const auto& fp = fr.fixed[ci];
    bool sector_here = false;
    for (const auto& bx : fp.box)
      if (bx.k == vn) sector_here = true;
    if (!sector_here) continue;
    MPoly val = MPoly::constant(fr.nvars, Rat(1));
    bool zero = false;
    for (int i = 0; i < fr.fan.m(); ++i) {
      Int f = red.floors[static_cast<size_t>(i)];
      if (f == 0) continue;
      if (f < 0) throw std::runtime_error("phi_class: negative reduction exponent");
      if (fp.u[static_cast<size_t>(i)].is_zero()) {
        zero = true;
        break;
      }
      for (Int t(0); t < f; ++t) val = val * fp.u[static_cast<size_t>(i)];
    }
    if (zero) continue;
    c.add({static_cast<int>(ci), vn}, ZRat(ZPoly::from_mpoly(val)));
  }
  return c;
}

/*
 * Cup product.  At a fixed point both sectors live in Box(sigma); the product
 * convolves sectors, and the box reduction of v1+v2 contributes the weight
 * monomial of its integer carries.
 */
inline LocalizedClass cr_product(const LocalizationFrame& fr, const LocalizedClass& a,
                                 const LocalizedClass& b) {
  LocalizedClass c;
  for (const auto& [sa, va] : a.entries)
    for (const auto& [sb, vb] : b.entries) {
      if (sa.first != sb.first) continue;
      int ci = sa.first;
      const auto& fp = fr.fixed[static_cast<size_t>(ci)];
      auto k = fr.fan.N.add(sa.second, sb.second);
      auto red0 = box_reduce(fr.fan, k, fr.fan.cones[static_cast<size_t>(ci)]);
      if (!red0) throw std::runtime_error("cr_product: reduction failed");
      const BoxReduction& red = *red0;
      MPoly w = MPoly::constant(fr.nvars, Rat(1));
      for (int i = 0; i < fr.fan.m(); ++i) {
        Int f = red.floors[static_cast<size_t>(i)];
        for (Int t(0); t < f; ++t) w = w * fp.u[static_cast<size_t>(i)];
      }
      c.add({ci, fr.fan.N.normalize(red.v.k)}, va * vb * ZRat(ZPoly::from_mpoly(w)));
    }
  return c;
}

/*
 * Pairing: sum over fixed points and sectors of
 *   restriction(a) * restriction(b at the inverse sector) / (|N(sigma)| * e)
 * with e the product of the weights of the directions normal to the sector.
 */
inline ZRat ab_pairing(const LocalizationFrame& fr, const LocalizedClass& a,
                       const LocalizedClass& b) {
  ZRat total = ZRat::constant(fr.nvars, Rat(0));
  for (const auto& [sa, va] : a.entries) {
    int ci = sa.first;
    const auto& fp = fr.fixed[static_cast<size_t>(ci)];
    const auto& sigma = fr.fan.cones[static_cast<size_t>(ci)];
    // locate the box element for this sector
    const BoxElement* bx = nullptr;
    for (const auto& cand : fp.box)
      if (cand.k == sa.second) bx = &cand;
    if (!bx) throw std::runtime_error("ab_pairing: sector not in box");
    auto iv = inv_box(fr.fan, *bx);
    const ZRat* vb = b.at({ci, fr.fan.N.normalize(iv.k)});
    if (!vb) continue;
    MPoly e = MPoly::constant(fr.nvars, Rat(1));
    std::set<int> supp(bx->sigma.begin(), bx->sigma.end());
    for (int j : sigma)
      if (!supp.count(j)) e = e * fp.u[static_cast<size_t>(j)];
    e = e * MPoly::constant(fr.nvars, Rat(fp.group_order));
    total = total + va * (*vb) / ZRat(ZPoly::from_mpoly(e));
  }
  return total;
}

/* All sectors of the frame, i.e. the box of the fan with its ages. */
inline std::vector<BoxElement> frame_sectors(const LocalizationFrame& fr) { return box(fr.fan); }

}  // namespace toricmirror
