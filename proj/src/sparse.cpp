#include <algorithm>
#include <cmath>
#include <string>

#include "scpseg/error.hpp"
#include "scpseg/graph.hpp"

namespace scpseg {

SparseWeightMatrix::SparseWeightMatrix(std::size_t n, std::vector<std::uint64_t> row_ptr,
                                       std::vector<std::uint32_t> cols, std::vector<double> vals)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals)) {
  if (row_ptr_.size() != n_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != cols_.size() ||
      cols_.size() != vals_.size()) {
    throw Error(Errc::dimension_mismatch, "malformed compressed-row layout");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (row_ptr_[i] > row_ptr_[i + 1]) throw Error(Errc::invalid_argument, "row pointers decrease");
    for (auto e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
      if (cols_[e] >= n_) throw Error(Errc::index_out_of_range, "column index out of range");
      if (e > row_ptr_[i] && cols_[e] <= cols_[e - 1]) {
        throw Error(Errc::invalid_argument, "columns not strictly increasing in row " + std::to_string(i));
      }
    }
  }
}

SparseWeightMatrix SparseWeightMatrix::from_triplets(std::size_t n, std::vector<Triplet> triplets,
                                                     Duplicates policy, bool keep_zeros) {
  for (const auto& t : triplets) {
    if (t.row >= n || t.col >= n) throw Error(Errc::index_out_of_range, "triplet outside matrix");
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(triplets.size());
  vals.reserve(triplets.size());
  std::size_t i = 0;
  while (i < triplets.size()) {
    const auto row = triplets[i].row, col = triplets[i].col;
    double v = triplets[i].value;
    std::size_t j = i + 1;
    for (; j < triplets.size() && triplets[j].row == row && triplets[j].col == col; ++j) {
      switch (policy) {
        case Duplicates::sum: v += triplets[j].value; break;
        case Duplicates::max: v = std::max(v, triplets[j].value); break;
        case Duplicates::last: v = triplets[j].value; break;
      }
    }
    if (v != 0.0 || keep_zeros) {
      cols.push_back(col);
      vals.push_back(v);
      ++row_ptr[row + 1];
    }
    i = j;
  }
  for (std::size_t r = 0; r < n; ++r) row_ptr[r + 1] += row_ptr[r];
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

SparseWeightMatrix SparseWeightMatrix::from_dense(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw Error(Errc::dimension_mismatch, "from_dense: matrix not square");
  const auto n = static_cast<std::size_t>(m.rows());
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v != 0.0) {
        cols.push_back(static_cast<std::uint32_t>(j));
        vals.push_back(v);
      }
    }
    row_ptr[i + 1] = cols.size();
  }
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

SparseWeightMatrix SparseWeightMatrix::identity(std::size_t n) {
  std::vector<std::uint64_t> row_ptr(n + 1);
  std::vector<std::uint32_t> cols(n);
  for (std::size_t i = 0; i <= n; ++i) row_ptr[i] = i;
  for (std::size_t i = 0; i < n; ++i) cols[i] = static_cast<std::uint32_t>(i);
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::vector<double>(n, 1.0));
}

double SparseWeightMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) throw Error(Errc::index_out_of_range, "at(): index outside matrix");
  const auto cols = row_cols(i);
  const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(j));
  if (it == cols.end() || *it != j) return 0.0;
  return vals_[row_ptr_[i] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseWeightMatrix::contains(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_) return false;
  const auto cols = row_cols(i);
  return std::binary_search(cols.begin(), cols.end(), static_cast<std::uint32_t>(j));
}

SparseWeightMatrix SparseWeightMatrix::transpose() const {
  std::vector<std::uint64_t> row_ptr(n_ + 1, 0);
  for (auto c : cols_) ++row_ptr[c + 1];
  for (std::size_t r = 0; r < n_; ++r) row_ptr[r + 1] += row_ptr[r];
  std::vector<std::uint64_t> next(row_ptr.begin(), row_ptr.end() - 1);
  std::vector<std::uint32_t> cols(cols_.size());
  std::vector<double> vals(vals_.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (auto e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
      const auto dst = next[cols_[e]]++;
      cols[dst] = static_cast<std::uint32_t>(i);
      vals[dst] = vals_[e];
    }
  }
  return SparseWeightMatrix(n_, std::move(row_ptr), std::move(cols), std::move(vals));
}

DenseMatrix SparseWeightMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    for (auto e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
      d(static_cast<Eigen::Index>(i), cols_[e]) = vals_[e];
    }
  }
  return d;
}

namespace {

/// Visits the union support of rows of a and b (same row index) in column order.
template <typename F>
void merge_rows(std::span<const std::uint32_t> ca, std::span<const double> va,
                std::span<const std::uint32_t> cb, std::span<const double> vb, F&& visit) {
  std::size_t p = 0, q = 0;
  while (p < ca.size() || q < cb.size()) {
    if (q == cb.size() || (p < ca.size() && ca[p] < cb[q])) {
      visit(ca[p], va[p], 0.0);
      ++p;
    } else if (p == ca.size() || cb[q] < ca[p]) {
      visit(cb[q], 0.0, vb[q]);
      ++q;
    } else {
      visit(ca[p], va[p], vb[q]);
      ++p;
      ++q;
    }
  }
}

}  // namespace

double SparseWeightMatrix::max_asymmetry() const {
  const SparseWeightMatrix t = transpose();
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    merge_rows(row_cols(i), row_vals(i), t.row_cols(i), t.row_vals(i),
               [&](std::uint32_t, double a, double b) { worst = std::max(worst, std::abs(a - b)); });
  }
  return worst;
}

double SparseWeightMatrix::max_value() const {
  double m = 0.0;
  for (double v : vals_) m = std::max(m, v);
  return m;
}

std::vector<double> SparseWeightMatrix::row_sums() const {
  std::vector<double> sums(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (auto e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) s += vals_[e];
    sums[i] = s;
  }
  return sums;
}

SparseWeightMatrix average_with_transpose(const SparseWeightMatrix& a) {
  const SparseWeightMatrix t = a.transpose();
  const std::size_t n = a.n();
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(a.nnz());
  vals.reserve(a.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    merge_rows(a.row_cols(i), a.row_vals(i), t.row_cols(i), t.row_vals(i),
               [&](std::uint32_t c, double x, double y) {
                 const double v = 0.5 * (x + y);
                 if (v != 0.0) {
                   cols.push_back(c);
                   vals.push_back(v);
                 }
               });
    row_ptr[i + 1] = cols.size();
  }
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

}  // namespace scpseg
