#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scpseg/constraints.hpp"
#include "scpseg/graph.hpp"
#include "scpseg/linalg.hpp"

namespace scpseg {

enum class KWayMethod { embedding, recursive };

struct SpectralConfig {
  double eig_tol = 1e-8;
  std::size_t eig_max_iter = 5000;  // matrix-vector products
  std::size_t n_eigenvectors = 2;
  std::size_t split_candidates = 64;
  std::uint64_t seed = 0;
  std::size_t kmeans_max_iter = 100;
  KWayMethod k_way_method = KWayMethod::embedding;

  void validate() const;
};

struct EigenResult {
  std::vector<double> values;     // descending
  Eigen::MatrixXd vectors;        // n x m, unit columns
  std::vector<double> residuals;  // ||S v - lambda v||_2
  std::size_t matvecs = 0;
  bool converged = false;
};

struct Segmentation {
  std::vector<std::int32_t> labels;  // per pixel, 0..k-1
  std::size_t k = 0;
  double ncut_value = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const Segmentation& other) const {
    return labels == other.labels && k == other.k && ncut_value == other.ncut_value;
  }
};

/// Largest m eigenpairs of S = D^{-1/2} W D^{-1/2} by thick-restart Lanczos
/// with full reorthogonalization. On non-convergence the best pairs are
/// returned with converged == false.
EigenResult top_eigenvectors(const SparseWeightMatrix& w, std::size_t m,
                             const SpectralConfig& cfg = {});

/// Same solver on an already normalized symmetric operator.
EigenResult top_eigenvectors_of(const SparseWeightMatrix& s, std::size_t m,
                                const SpectralConfig& cfg = {});

/// sum over regions of cut(A, V \ A) / assoc(A, V); regions with zero
/// association contribute 0.
double ncut_objective(const SparseWeightMatrix& w, const std::vector<std::int32_t>& labels);

/// Relabels so that regions are numbered by their smallest pixel index.
std::size_t canonicalize_labels(std::vector<std::int32_t>& labels);

Segmentation two_way_cut(const SparseWeightMatrix& w, const SpectralConfig& cfg = {});
Segmentation k_way_cut(const SparseWeightMatrix& w, std::size_t k, const SpectralConfig& cfg = {});

/// Spectral-learning baseline: must-link pairs set to the largest stored
/// weight, cannot-link pairs removed.
SparseWeightMatrix spectral_learning_edit(const SparseWeightMatrix& w, const ConstraintSet& cs);

}  // namespace scpseg
