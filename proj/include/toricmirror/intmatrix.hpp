#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "toricmirror/rational.hpp"

namespace toricmirror {

class IntMatrix {
 public:
  IntMatrix() : rows_(0), cols_(0) {}
  IntMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, Int(0)) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("IntMatrix: negative shape");
  }
  static IntMatrix identity(int n) {
    IntMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }
  static IntMatrix from_rows(const std::vector<std::vector<Int>>& rows) {
    int r = static_cast<int>(rows.size());
    int c = r == 0 ? 0 : static_cast<int>(rows[0].size());
    IntMatrix m(r, c);
    for (int i = 0; i < r; ++i) {
      if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != c)
        throw std::invalid_argument("IntMatrix: ragged rows");
      for (int j = 0; j < c; ++j) m.at(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Int& at(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const Int& at(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  std::vector<Int> row(int i) const {
    std::vector<Int> r(static_cast<size_t>(cols_));
    for (int j = 0; j < cols_; ++j) r[static_cast<size_t>(j)] = at(i, j);
    return r;
  }
  std::vector<Int> col(int j) const {
    std::vector<Int> c(static_cast<size_t>(rows_));
    for (int i = 0; i < rows_; ++i) c[static_cast<size_t>(i)] = at(i, j);
    return c;
  }

  IntMatrix transposed() const {
    IntMatrix m(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m.at(j, i) = at(i, j);
    return m;
  }

  friend IntMatrix operator*(const IntMatrix& a, const IntMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("IntMatrix: shape mismatch");
    IntMatrix m(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int k = 0; k < a.cols_; ++k) {
        if (a.at(i, k) == 0) continue;
        for (int j = 0; j < b.cols_; ++j) m.at(i, j) += a.at(i, k) * b.at(k, j);
      }
    return m;
  }
  std::vector<Int> apply(const std::vector<Int>& v) const {
    if (static_cast<int>(v.size()) != cols_) throw std::invalid_argument("IntMatrix: apply shape");
    std::vector<Int> r(static_cast<size_t>(rows_), Int(0));
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r[static_cast<size_t>(i)] += at(i, j) * v[static_cast<size_t>(j)];
    return r;
  }

  bool operator==(const IntMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }
  bool operator!=(const IntMatrix& o) const { return !(*this == o); }

 private:
  int rows_, cols_;
  std::vector<Int> data_;
};

/* U * A * V = D with U, V unimodular and D diagonal, d_i >= 0, d_i | d_{i+1}. */
struct SmithForm {
  IntMatrix U;
  IntMatrix D;
  IntMatrix V;
  int rank = 0;
};

inline SmithForm smith_normal_form(const IntMatrix& a) {
  int r = a.rows(), c = a.cols();
  IntMatrix D = a, U = IntMatrix::identity(r), V = IntMatrix::identity(c);

  auto row_swap = [&](int i, int j) {
    if (i == j) return;
    for (int k = 0; k < c; ++k) std::swap(D.at(i, k), D.at(j, k));
    for (int k = 0; k < r; ++k) std::swap(U.at(i, k), U.at(j, k));
  };
  auto col_swap = [&](int i, int j) {
    if (i == j) return;
    for (int k = 0; k < r; ++k) std::swap(D.at(k, i), D.at(k, j));
    for (int k = 0; k < c; ++k) std::swap(V.at(k, i), V.at(k, j));
  };
  auto row_addmul = [&](int dst, int src, const Int& f) {  // row dst += f * row src
    if (f == 0) return;
    for (int k = 0; k < c; ++k) D.at(dst, k) += f * D.at(src, k);
    for (int k = 0; k < r; ++k) U.at(dst, k) += f * U.at(src, k);
  };
  auto col_addmul = [&](int dst, int src, const Int& f) {
    if (f == 0) return;
    for (int k = 0; k < r; ++k) D.at(k, dst) += f * D.at(k, src);
    for (int k = 0; k < c; ++k) V.at(k, dst) += f * V.at(k, src);
  };
  auto row_negate = [&](int i) {
    for (int k = 0; k < c; ++k) D.at(i, k) = -D.at(i, k);
    for (int k = 0; k < r; ++k) U.at(i, k) = -U.at(i, k);
  };

  int t = 0;
  int dim = std::min(r, c);
  while (t < dim) {
    // locate a nonzero entry of least absolute value in the remaining block
    int pi = -1, pj = -1;
    Int best(0);
    for (int i = t; i < r; ++i)
      for (int j = t; j < c; ++j) {
        Int v = boost::multiprecision::abs(D.at(i, j));
        if (v != 0 && (pi == -1 || v < best)) {
          best = v;
          pi = i;
          pj = j;
        }
      }
    if (pi == -1) break;
    row_swap(t, pi);
    col_swap(t, pj);

    bool clean = false;
    while (!clean) {
      clean = true;
      for (int i = t + 1; i < r; ++i) {
        if (D.at(i, t) == 0) continue;
        Int q = int_floor_div(D.at(i, t), D.at(t, t));
        row_addmul(i, t, -q);
        if (D.at(i, t) != 0) {  // remainder strictly smaller: swap and restart
          row_swap(t, i);
          clean = false;
        }
      }
      for (int j = t + 1; j < c; ++j) {
        if (D.at(t, j) == 0) continue;
        Int q = int_floor_div(D.at(t, j), D.at(t, t));
        col_addmul(j, t, -q);
        if (D.at(t, j) != 0) {
          col_swap(t, j);
          clean = false;
        }
      }
    }
    if (D.at(t, t) < 0) row_negate(t);
    ++t;
  }

  // enforce the divisibility chain
  for (int i = 0; i + 1 < t; ++i) {
    for (int j = i + 1; j < t; ++j) {
      if (D.at(j, j) % D.at(i, i) == 0) continue;
      // mix column j into column i, then re-reduce the 2x2 block
      col_addmul(i, j, Int(1));
      // now entries (i,i) and (j,i) are nonzero in column i
      while (D.at(j, i) != 0) {
        Int q = int_floor_div(D.at(i, i), D.at(j, i));
        row_addmul(i, j, -q);
        std::swap_ranges(&D.at(i, 0), &D.at(i, 0) + c, &D.at(j, 0));
        for (int k = 0; k < r; ++k) std::swap(U.at(i, k), U.at(j, k));
      }
      // clear the fill-in at (i,j)
      if (D.at(i, j) != 0) {
        Int q = D.at(i, j) / D.at(i, i);
        col_addmul(j, i, -q);
      }
      if (D.at(i, i) < 0) row_negate(i);
      if (D.at(j, j) < 0) row_negate(j);
      j = i;  // recheck the whole chain from i
    }
  }

  SmithForm out{U, D, V, 0};
  for (int i = 0; i < dim; ++i)
    if (D.at(i, i) != 0) ++out.rank;
  return out;
}

/* Basis of the integer kernel {x : A x = 0}, as columns. */
inline std::vector<std::vector<Int>> int_kernel(const IntMatrix& a) {
  SmithForm s = smith_normal_form(a);
  std::vector<std::vector<Int>> basis;
  for (int j = s.rank; j < a.cols(); ++j) basis.push_back(s.V.col(j));
  return basis;
}

/* One integer solution of A x = b, if any. */
inline std::optional<std::vector<Int>> int_solve(const IntMatrix& a, const std::vector<Int>& b) {
  SmithForm s = smith_normal_form(a);
  std::vector<Int> ub = s.U.apply(b);
  std::vector<Int> y(static_cast<size_t>(a.cols()), Int(0));
  int dim = std::min(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    Int d = i < dim ? s.D.at(i, i) : Int(0);
    if (d == 0) {
      if (ub[static_cast<size_t>(i)] != 0) return std::nullopt;
    } else {
      if (ub[static_cast<size_t>(i)] % d != 0) return std::nullopt;
      y[static_cast<size_t>(i)] = ub[static_cast<size_t>(i)] / d;
    }
  }
  return s.V.apply(y);
}

/* Dense rational matrix; enough for rank, solve, inverse and rref. */
class QMatrix {
 public:
  QMatrix() : rows_(0), cols_(0) {}
  QMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, Rat(0)) {}
  static QMatrix identity(int n) {
    QMatrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1;
    return m;
  }
  static QMatrix from_int(const IntMatrix& a) {
    QMatrix m(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j) m.at(i, j) = Rat(a.at(i, j));
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Rat& at(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const Rat& at(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  friend QMatrix operator*(const QMatrix& a, const QMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("QMatrix: shape mismatch");
    QMatrix m(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i)
      for (int k = 0; k < a.cols_; ++k) {
        if (a.at(i, k) == 0) continue;
        for (int j = 0; j < b.cols_; ++j) m.at(i, j) += a.at(i, k) * b.at(k, j);
      }
    return m;
  }
  std::vector<Rat> apply(const std::vector<Rat>& v) const {
    if (static_cast<int>(v.size()) != cols_) throw std::invalid_argument("QMatrix: apply shape");
    std::vector<Rat> r(static_cast<size_t>(rows_), Rat(0));
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) r[static_cast<size_t>(i)] += at(i, j) * v[static_cast<size_t>(j)];
    return r;
  }

  bool operator==(const QMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
  }

  /* In-place reduced row echelon form; returns pivot columns. */
  std::vector<int> rref() {
    std::vector<int> pivots;
    int prow = 0;
    for (int j = 0; j < cols_ && prow < rows_; ++j) {
      int sel = -1;
      for (int i = prow; i < rows_; ++i)
        if (at(i, j) != 0) {
          sel = i;
          break;
        }
      if (sel == -1) continue;
      if (sel != prow)
        for (int k = 0; k < cols_; ++k) std::swap(at(sel, k), at(prow, k));
      Rat p = at(prow, j);
      for (int k = 0; k < cols_; ++k) at(prow, k) /= p;
      for (int i = 0; i < rows_; ++i) {
        if (i == prow || at(i, j) == 0) continue;
        Rat f = at(i, j);
        for (int k = 0; k < cols_; ++k) at(i, k) -= f * at(prow, k);
      }
      pivots.push_back(j);
      ++prow;
    }
    return pivots;
  }

  int rank() const {
    QMatrix m = *this;
    return static_cast<int>(m.rref().size());
  }

  std::optional<QMatrix> inverse() const {
    if (rows_ != cols_) throw std::invalid_argument("QMatrix: inverse of non-square");
    QMatrix aug(rows_, 2 * cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) aug.at(i, j) = at(i, j);
      aug.at(i, cols_ + i) = 1;
    }
    auto piv = aug.rref();
    if (static_cast<int>(piv.size()) != rows_) return std::nullopt;
    if (!piv.empty() && piv.back() >= cols_) return std::nullopt;
    QMatrix inv(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) inv.at(i, j) = aug.at(i, cols_ + j);
    return inv;
  }

  /* One solution of A x = b, if consistent. */
  std::optional<std::vector<Rat>> solve(const std::vector<Rat>& b) const {
    if (static_cast<int>(b.size()) != rows_) throw std::invalid_argument("QMatrix: solve shape");
    QMatrix aug(rows_, cols_ + 1);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) aug.at(i, j) = at(i, j);
      aug.at(i, cols_) = b[static_cast<size_t>(i)];
    }
    auto piv = aug.rref();
    if (!piv.empty() && piv.back() == cols_) return std::nullopt;
    std::vector<Rat> x(static_cast<size_t>(cols_), Rat(0));
    for (size_t p = 0; p < piv.size(); ++p)
      x[static_cast<size_t>(piv[p])] = aug.at(static_cast<int>(p), cols_);
    return x;
  }

  /* Basis of {x : A x = 0}. */
  std::vector<std::vector<Rat>> nullspace() const {
    QMatrix m = *this;
    auto piv = m.rref();
    std::vector<bool> is_piv(static_cast<size_t>(cols_), false);
    for (int j : piv) is_piv[static_cast<size_t>(j)] = true;
    std::vector<std::vector<Rat>> basis;
    for (int j = 0; j < cols_; ++j) {
      if (is_piv[static_cast<size_t>(j)]) continue;
      std::vector<Rat> v(static_cast<size_t>(cols_), Rat(0));
      v[static_cast<size_t>(j)] = 1;
      for (size_t p = 0; p < piv.size(); ++p)
        v[static_cast<size_t>(piv[p])] = -m.at(static_cast<int>(p), j);
      basis.push_back(v);
    }
    return basis;
  }

  Rat determinant() const {
    if (rows_ != cols_) throw std::invalid_argument("QMatrix: determinant of non-square");
    QMatrix m = *this;
    Rat det(1);
    for (int j = 0; j < cols_; ++j) {
      int sel = -1;
      for (int i = j; i < rows_; ++i)
        if (m.at(i, j) != 0) {
          sel = i;
          break;
        }
      if (sel == -1) return Rat(0);
      if (sel != j) {
        for (int k = 0; k < cols_; ++k) std::swap(m.at(sel, k), m.at(j, k));
        det = -det;
      }
      det *= m.at(j, j);
      for (int i = j + 1; i < rows_; ++i) {
        if (m.at(i, j) == 0) continue;
        Rat f = m.at(i, j) / m.at(j, j);
        for (int k = j; k < cols_; ++k) m.at(i, k) -= f * m.at(j, k);
      }
    }
    return det;
  }

 private:
  int rows_, cols_;
  std::vector<Rat> data_;
};

}  // namespace toricmirror
