#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "rinverse/errors.hpp"

namespace rinverse {

/// Derivative multi-index (a_1, ..., a_n) of non-negative integers.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {
    for (int e : entries_)
      if (e < 0) throw ShapeError("MultiIndex: negative entry");
  }
  static MultiIndex zeros(int n) { return MultiIndex(std::vector<int>(n, 0)); }
  static MultiIndex unit(int n, int axis) {
    std::vector<int> e(n, 0);
    e.at(axis) = 1;
    return MultiIndex(std::move(e));
  }

  int dimension() const { return static_cast<int>(entries_.size()); }
  int operator[](int i) const { return entries_[i]; }
  const std::vector<int>& entries() const { return entries_; }

  /// |a| = sum of entries.
  int order() const {
    int s = 0;
    for (int e : entries_) s += e;
    return s;
  }

  /// a! = a_1! * ... * a_n!, as double (orders stay small).
  double factorial() const {
    double f = 1.0;
    for (int e : entries_)
      for (int k = 2; k <= e; ++k) f *= k;
    return f;
  }

  MultiIndex plus(const MultiIndex& other) const {
    std::vector<int> e(entries_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.entries_[i];
    return MultiIndex(std::move(e));
  }

  MultiIndex plus_unit(int axis, int count = 1) const {
    std::vector<int> e(entries_);
    e.at(axis) += count;
    return MultiIndex(std::move(e));
  }

  bool operator==(const MultiIndex& other) const { return entries_ == other.entries_; }
  bool operator!=(const MultiIndex& other) const { return entries_ != other.entries_; }

 private:
  std::vector<int> entries_;
};

/// Graded-lexicographic order: lower total degree first; within a degree the
/// index with the larger leading entries comes first, so for n = 2, degree 2
/// the order is (2,0), (1,1), (0,2).
inline bool grlex_less(const MultiIndex& a, const MultiIndex& b) {
  const int oa = a.order(), ob = b.order();
  if (oa != ob) return oa < ob;
  return std::lexicographical_compare(b.entries().begin(), b.entries().end(),
                                      a.entries().begin(), a.entries().end());
}

/// Number of multi-indices in n variables with order <= m: C(n+m, m).
inline std::size_t jet_coefficient_count(int n, int m) {
  std::size_t c = 1;
  for (int i = 1; i <= n; ++i) c = c * (m + i) / i;
  return c;
}

/// Shared immutable layout of all multi-indices with |a| <= m in grlex order,
/// plus a dense multiplication table used by the truncated Cauchy product.
class JetLayout {
 public:
  static std::shared_ptr<const JetLayout> get(int dimension, int order);

  int dimension() const { return n_; }
  int order() const { return m_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& index(std::size_t pos) const { return indices_[pos]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  /// Position of a in grlex order; throws if |a| > order or dimension differs.
  std::size_t position(const MultiIndex& a) const {
    if (a.dimension() != n_) throw ShapeError("JetLayout: dimension mismatch");
    if (a.order() > m_) throw ShapeError("JetLayout: multi-index order exceeds jet order");
    const auto it = std::lower_bound(indices_.begin(), indices_.end(), a, grlex_less);
    return static_cast<std::size_t>(it - indices_.begin());
  }

  /// Position of index(i) + index(j), or npos when the sum exceeds the order.
  std::size_t product_position(std::size_t i, std::size_t j) const {
    return mul_table_[i * size() + j];
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  JetLayout(int n, int m) : n_(n), m_(m) {
    std::vector<int> current(n, 0);
    for (int d = 0; d <= m; ++d) emit_degree(current, 0, d);
    const std::size_t sz = indices_.size();
    mul_table_.assign(sz * sz, npos);
    for (std::size_t i = 0; i < sz; ++i)
      for (std::size_t j = 0; j < sz; ++j) {
        if (indices_[i].order() + indices_[j].order() > m_) continue;
        mul_table_[i * sz + j] = position(indices_[i].plus(indices_[j]));
      }
  }

  // Enumerates indices of total degree d in lex-descending order.
  void emit_degree(std::vector<int>& current, int pos, int remaining) {
    if (pos == n_ - 1) {
      current[pos] = remaining;
      indices_.push_back(MultiIndex(current));
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      current[pos] = v;
      emit_degree(current, pos + 1, remaining - v);
    }
  }

  int n_;
  int m_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> mul_table_;
};

inline std::shared_ptr<const JetLayout> JetLayout::get(int dimension, int order) {
  if (dimension < 1) throw ShapeError("JetLayout: dimension must be >= 1");
  if (order < 0) throw ShapeError("JetLayout: order must be >= 0");
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{dimension, order}];
  if (!slot) slot = std::shared_ptr<const JetLayout>(new JetLayout(dimension, order));
  return slot;
}

}  // namespace rinverse
