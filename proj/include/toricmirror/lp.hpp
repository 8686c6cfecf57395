#pragma once

#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "toricmirror/rational.hpp"

namespace toricmirror {

/* System of weak linear inequalities a.x <= c over the rationals. */
struct LinIneqSystem {
  int nvars = 0;
  std::vector<std::vector<Rat>> rows;
  std::vector<Rat> rhs;

  explicit LinIneqSystem(int n) : nvars(n) {}
  void add(const std::vector<Rat>& a, const Rat& c) {
    if (static_cast<int>(a.size()) != nvars)
      throw std::invalid_argument("LinIneqSystem: row shape");
    rows.push_back(a);
    rhs.push_back(c);
  }
  /* a.x == c as two inequalities. */
  void add_eq(const std::vector<Rat>& a, const Rat& c) {
    add(a, c);
    std::vector<Rat> neg = a;
    for (auto& x : neg) x = -x;
    add(neg, -c);
  }
};

namespace lp_detail {

/* One Fourier-Motzkin step: eliminate variable j. */
inline LinIneqSystem fm_eliminate(const LinIneqSystem& s, int j) {
  LinIneqSystem out(s.nvars);  // variable j stays as a dead column
  std::vector<size_t> pos, neg;
  for (size_t r = 0; r < s.rows.size(); ++r) {
    const Rat& a = s.rows[r][static_cast<size_t>(j)];
    if (a > 0) pos.push_back(r);
    else if (a < 0) neg.push_back(r);
    else out.add(s.rows[r], s.rhs[r]);
  }
  for (size_t p : pos)
    for (size_t q : neg) {
      // combine so the j-coefficients cancel
      const Rat& ap = s.rows[p][static_cast<size_t>(j)];
      const Rat& aq = s.rows[q][static_cast<size_t>(j)];
      std::vector<Rat> row(static_cast<size_t>(s.nvars), Rat(0));
      for (int k = 0; k < s.nvars; ++k)
        row[static_cast<size_t>(k)] =
            s.rows[p][static_cast<size_t>(k)] / ap - s.rows[q][static_cast<size_t>(k)] / aq;
      out.add(row, s.rhs[p] / ap - s.rhs[q] / aq);
    }
  return out;
}

}  // namespace lp_detail

/* Feasibility of a.x <= c; when feasible, returns a witness point. */
inline std::optional<std::vector<Rat>> lp_feasible_point(const LinIneqSystem& sys) {
  std::vector<LinIneqSystem> stages{sys};
  for (int j = sys.nvars - 1; j >= 0; --j)
    stages.push_back(lp_detail::fm_eliminate(stages.back(), j));
  // the final system is variable-free: rows are all zero
  const LinIneqSystem& last = stages.back();
  for (size_t r = 0; r < last.rows.size(); ++r)
    if (last.rhs[r] < 0) return std::nullopt;

  std::vector<Rat> x(static_cast<size_t>(sys.nvars), Rat(0));
  // back-substitute: stages[k] still contains variables 0..k-1 live
  for (int j = 0; j < sys.nvars; ++j) {
    const LinIneqSystem& s = stages[static_cast<size_t>(sys.nvars - 1 - j)];
    bool has_lo = false, has_hi = false;
    Rat lo(0), hi(0);
    for (size_t r = 0; r < s.rows.size(); ++r) {
      const Rat& a = s.rows[r][static_cast<size_t>(j)];
      if (a == 0) continue;
      Rat bound = s.rhs[r];
      for (int k = 0; k < j; ++k) bound -= s.rows[r][static_cast<size_t>(k)] * x[static_cast<size_t>(k)];
      bound /= a;
      if (a > 0) {  // x_j <= bound
        if (!has_hi || bound < hi) hi = bound;
        has_hi = true;
      } else {  // x_j >= bound
        if (!has_lo || bound > lo) lo = bound;
        has_lo = true;
      }
    }
    Rat v(0);
    if (has_lo && has_hi) v = (lo + hi) / 2;
    else if (has_lo) v = lo;
    else if (has_hi) v = hi;
    x[static_cast<size_t>(j)] = v;
  }
  return x;
}

inline bool lp_feasible(const LinIneqSystem& sys) {
  return static_cast<bool>(lp_feasible_point(sys));
}

/* Exact range of x_j over the feasible set: (min, max), nullopt = unbounded.
 * Requires the system to be feasible. */
inline std::pair<std::optional<Rat>, std::optional<Rat>> lp_range(const LinIneqSystem& sys,
                                                                  int j) {
  LinIneqSystem s = sys;
  for (int k = 0; k < sys.nvars; ++k) {
    if (k == j) continue;
    s = lp_detail::fm_eliminate(s, k);
  }
  bool has_lo = false, has_hi = false;
  Rat lo(0), hi(0);
  for (size_t r = 0; r < s.rows.size(); ++r) {
    const Rat& a = s.rows[r][static_cast<size_t>(j)];
    if (a == 0) {
      if (s.rhs[r] < 0) throw std::invalid_argument("lp_range: infeasible system");
      continue;
    }
    Rat bound = s.rhs[r] / a;
    if (a > 0) {
      if (!has_hi || bound < hi) hi = bound;
      has_hi = true;
    } else {
      if (!has_lo || bound > lo) lo = bound;
      has_lo = true;
    }
  }
  return {has_lo ? std::optional<Rat>(lo) : std::nullopt,
          has_hi ? std::optional<Rat>(hi) : std::nullopt};
}

}  // namespace toricmirror
