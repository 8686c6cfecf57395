#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

namespace toricmirror {

namespace kmatrix_detail {
template <typename K>
auto entry_is_zero(const K& c, int) -> decltype(c.is_zero()) {
  return c.is_zero();
}
template <typename K>
bool entry_is_zero(const K& c, long) {
  return c == K(0);
}
template <typename K>
bool entry_is_zero(const K& c) {
  return entry_is_zero(c, 0);
}
}  // namespace kmatrix_detail

/* Dense matrix over an arbitrary exact field. */
template <typename K>
class KMatrix {
 public:
  KMatrix() : rows_(0), cols_(0) {}
  KMatrix(int rows, int cols, const K& zero)
      : rows_(rows), cols_(cols), zero_(zero), data_(static_cast<size_t>(rows) * cols, zero) {}

  static KMatrix identity(int n, const K& zero, const K& one) {
    KMatrix m(n, n, zero);
    for (int i = 0; i < n; ++i) m.at(i, i) = one;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  K& at(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  const K& at(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  friend KMatrix operator*(const KMatrix& a, const KMatrix& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("KMatrix: shape mismatch");
    KMatrix m(a.rows_, b.cols_, a.zero_);
    for (int i = 0; i < a.rows_; ++i)
      for (int k = 0; k < a.cols_; ++k) {
        if (kmatrix_detail::entry_is_zero(a.at(i, k))) continue;
        for (int j = 0; j < b.cols_; ++j)
          m.at(i, j) = m.at(i, j) + a.at(i, k) * b.at(k, j);
      }
    return m;
  }
  friend KMatrix operator+(const KMatrix& a, const KMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw std::invalid_argument("KMatrix: shape mismatch");
    KMatrix m = a;
    for (int i = 0; i < a.rows_; ++i)
      for (int j = 0; j < a.cols_; ++j) m.at(i, j) = m.at(i, j) + b.at(i, j);
    return m;
  }
  friend KMatrix operator-(const KMatrix& a, const KMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
      throw std::invalid_argument("KMatrix: shape mismatch");
    KMatrix m = a;
    for (int i = 0; i < a.rows_; ++i)
      for (int j = 0; j < a.cols_; ++j) m.at(i, j) = m.at(i, j) - b.at(i, j);
    return m;
  }
  KMatrix operator-() const {
    KMatrix m = *this;
    for (auto& x : m.data_) x = -x;
    return m;
  }

  bool operator==(const KMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) return false;
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j)
        if (!(at(i, j) == o.at(i, j))) return false;
    return true;
  }
  bool operator!=(const KMatrix& o) const { return !(*this == o); }

  bool is_zero() const {
    for (const auto& x : data_)
      if (!kmatrix_detail::entry_is_zero(x)) return false;
    return true;
  }

  std::vector<K> apply(const std::vector<K>& v) const {
    if (static_cast<int>(v.size()) != cols_) throw std::invalid_argument("KMatrix: apply shape");
    std::vector<K> r(static_cast<size_t>(rows_), zero_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) {
        if (kmatrix_detail::entry_is_zero(at(i, j))) continue;
        r[static_cast<size_t>(i)] = r[static_cast<size_t>(i)] + at(i, j) * v[static_cast<size_t>(j)];
      }
    return r;
  }

  /* In-place reduced row echelon form; returns pivot columns. */
  std::vector<int> rref() {
    std::vector<int> pivots;
    int prow = 0;
    for (int j = 0; j < cols_ && prow < rows_; ++j) {
      int sel = -1;
      for (int i = prow; i < rows_; ++i)
        if (!kmatrix_detail::entry_is_zero(at(i, j))) {
          sel = i;
          break;
        }
      if (sel == -1) continue;
      if (sel != prow)
        for (int k = 0; k < cols_; ++k) std::swap(at(sel, k), at(prow, k));
      K p = at(prow, j);
      for (int k = 0; k < cols_; ++k) at(prow, k) = at(prow, k) / p;
      for (int i = 0; i < rows_; ++i) {
        if (i == prow || kmatrix_detail::entry_is_zero(at(i, j))) continue;
        K f = at(i, j);
        for (int k = 0; k < cols_; ++k) at(i, k) = at(i, k) - f * at(prow, k);
      }
      pivots.push_back(j);
      ++prow;
    }
    return pivots;
  }

  int rank() const {
    KMatrix m = *this;
    return static_cast<int>(m.rref().size());
  }

  std::optional<KMatrix> inverse(const K& one) const {
    if (rows_ != cols_) throw std::invalid_argument("KMatrix: inverse of non-square");
    KMatrix aug(rows_, 2 * cols_, zero_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) aug.at(i, j) = at(i, j);
      aug.at(i, cols_ + i) = one;
    }
    auto piv = aug.rref();
    if (static_cast<int>(piv.size()) != rows_) return std::nullopt;
    if (!piv.empty() && piv.back() >= cols_) return std::nullopt;
    KMatrix inv(rows_, cols_, zero_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) inv.at(i, j) = aug.at(i, cols_ + j);
    return inv;
  }

 private:
  int rows_, cols_;
  K zero_;
  std::vector<K> data_;
};

}  // namespace toricmirror
