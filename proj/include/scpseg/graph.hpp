#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scpseg/features.hpp"
#include "scpseg/linalg.hpp"
#include "scpseg/selection.hpp"

namespace scpseg {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

/// Square sparse matrix in compressed-row layout with sorted column indices.
///
/// Used for every affinity in the pipeline (W, W_u, adjusted weights, S_u).
/// Instances are immutable once built.
class SparseWeightMatrix {
 public:
  enum class Duplicates { sum, max, last };

  SparseWeightMatrix() : row_ptr_(1, 0) {}
  explicit SparseWeightMatrix(std::size_t n) : n_(n), row_ptr_(n + 1, 0) {}

  /// Takes ownership of a compressed layout; validates shape and ordering.
  SparseWeightMatrix(std::size_t n, std::vector<std::uint64_t> row_ptr,
                     std::vector<std::uint32_t> cols, std::vector<double> vals);

  /// Builds from unordered triplets. Zeros are kept only if keep_zeros.
  static SparseWeightMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets,
                                          Duplicates policy = Duplicates::sum,
                                          bool keep_zeros = false);

  static SparseWeightMatrix from_dense(const DenseMatrix& m);
  static SparseWeightMatrix identity(std::size_t n);

  std::size_t n() const noexcept { return n_; }
  std::size_t nnz() const noexcept { return cols_.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t i) const {
    return {cols_.data() + row_ptr_[i], cols_.data() + row_ptr_[i + 1]};
  }
  std::span<const double> row_vals(std::size_t i) const {
    return {vals_.data() + row_ptr_[i], vals_.data() + row_ptr_[i + 1]};
  }
  std::size_t row_nnz(std::size_t i) const { return row_ptr_[i + 1] - row_ptr_[i]; }

  /// Stored value at (i, j) or 0.
  double at(std::size_t i, std::size_t j) const;
  bool contains(std::size_t i, std::size_t j) const;

  const std::vector<std::uint64_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t>& cols() const noexcept { return cols_; }
  const std::vector<double>& vals() const noexcept { return vals_; }

  SparseWeightMatrix transpose() const;
  DenseMatrix to_dense() const;

  /// Largest |a_ij - a_ji| over the union of both supports.
  double max_asymmetry() const;
  double max_value() const;
  std::vector<double> row_sums() const;

  bool operator==(const SparseWeightMatrix& other) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
};

/// Elementwise (A + B) / 2 over the union support, dropping resulting zeros.
SparseWeightMatrix average_with_transpose(const SparseWeightMatrix& a);

struct GraphConfig {
  std::size_t window_radius = 7;  // square spatial candidate window
  /// Kernel bandwidth; the median selected-edge distance when unset.
  std::optional<double> sigma;
};

/// Result of graph construction with the bandwidth actually used.
struct KnnGraph {
  SparseWeightMatrix w;
  double sigma = 0.0;
};

/// k-NN affinity graph over all pixels. Candidates for pixel i are the pixels
/// of the (2r+1)^2 window around it; the k closest in feature space get edge
/// weight exp(-d^2 / (2 sigma^2)); W is symmetrized by elementwise max.
KnnGraph build_knn_graph_with_sigma(const FeatureMap& fm, std::size_t width, std::size_t height,
                                    std::size_t k, const GraphConfig& cfg = {});

SparseWeightMatrix build_knn_graph(const FeatureMap& fm, std::size_t width, std::size_t height,
                                   std::size_t k, const GraphConfig& cfg = {});

/// w_u(i, j) = w(P_u(i), P_u(j)).
SparseWeightMatrix restrict(const SparseWeightMatrix& w, const SelectionIndex& sel);

/// S_u = D^{-1/2} W_u D^{-1/2} with the D^{-1/2} diagonal kept alongside.
struct NormalizedOperators {
  SparseWeightMatrix s_u;
  std::vector<double> degree_rsqrt;  // 0 for isolated nodes

  std::size_t n() const noexcept { return s_u.n(); }
};

NormalizedOperators normalize(const SparseWeightMatrix& w_u);

enum class Side { left, right };

DenseVector spmv(const SparseWeightMatrix& m, const DenseVector& x);

/// left: m * X, right: X * m.
DenseMatrix spmm_dense(const SparseWeightMatrix& m, const DenseMatrix& x, Side side);

/// out = scale * (m * x) + shift * b, over the leading `cols` columns of
/// row-major matrices. Shared kernel of the propagation sweeps.
void spmm_affine(const SparseWeightMatrix& m, const DenseMatrix& x, double scale,
                 const DenseMatrix& b, double shift, DenseMatrix& out);

/// Binary graph file: "SCPG", u32 version, u64 n, u64 nnz, n u64 row counts,
/// then nnz (u32 column, f64 weight) pairs; little-endian.
void save_graph(const SparseWeightMatrix& m, const std::filesystem::path& path);
SparseWeightMatrix load_graph(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_graph(const SparseWeightMatrix& m);
SparseWeightMatrix deserialize_graph(std::span<const std::uint8_t> bytes);

}  // namespace scpseg
