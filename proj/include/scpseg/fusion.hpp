#pragma once

#include "scpseg/graph.hpp"
#include "scpseg/linalg.hpp"
#include "scpseg/selection.hpp"

namespace scpseg {

struct FusionParams {
  double lambda = 0.001;

  void validate() const;
};

/// argmin_{z >= 0} 1/2 (z - x)^2 + lambda |z - y|, evaluated by comparing the
/// two candidates max(x - lambda, y) and max(0, min(x + lambda, y)).
double soft_thr(double x, double y, double lambda);

/// Elementwise soft_thr(F_u, W_u, lambda) over the union support of both
/// (off-diagonal), then averaged with its transpose.
SparseWeightMatrix adjust_weights(const DenseMatrix& f_u, const SparseWeightMatrix& w_u,
                                  const FusionParams& p = {});

/// Full-image weights with every pair inside P_u replaced by w_u_new.
SparseWeightMatrix patch_weights(const SparseWeightMatrix& w, const SparseWeightMatrix& w_u_new,
                                 const SelectionIndex& sel);

}  // namespace scpseg
