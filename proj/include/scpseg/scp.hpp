#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "scpseg/constraints.hpp"
#include "scpseg/graph.hpp"
#include "scpseg/linalg.hpp"

namespace scpseg {

/// Solver parameters. alpha = mu_hat / (1 + mu_hat), beta = gamma / (1 + gamma).
struct ScpParams {
  double alpha = 0.9;
  double beta = 0.1;
  double eps = 1e-7;  // |entry| < eps is discarded before each update; 0 disables
  /// Inner sweeps stop once the a-posteriori distance to the fixed point,
  /// alpha / (1 - alpha) * ||dF|| / ||F||, drops below inner_tol.
  double inner_tol = 1e-6;
  std::size_t inner_max_iter = 1000;
  double outer_tol = 1e-5;
  std::size_t outer_max_iter = 10;

  double mu_hat() const { return alpha / (1.0 - alpha); }
  double gamma() const { return beta / (1.0 - beta); }
  double mu() const { return mu_hat() * (1.0 + gamma()); }

  static ScpParams from_regularization(double mu, double gamma);

  void validate() const;
};

enum class SweepDirection { vertical, horizontal };

/// Reported after every inner sweep; matrices are in natural orientation.
struct SweepEvent {
  std::size_t outer_iter;  // 1-based
  SweepDirection direction;
  std::size_t iterations;
  bool converged;
  const DenseMatrix& f_v;
  const DenseMatrix& f_h;
  /// The matrix held fixed while this sweep ran (F_h* or F_v*).
  const DenseMatrix& fixed;
};

using SweepObserver = std::function<void(const SweepEvent&)>;

struct PropagationState {
  DenseMatrix f_v;
  DenseMatrix f_h;
  std::size_t outer_iter = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative change per outer iteration
  std::vector<std::size_t> inner_iterations;  // per sweep, vertical then horizontal
};

struct PropagationResult {
  DenseMatrix f_u;  // (F_v* + F_h*) / 2
  PropagationState meta;
};

/// Selective constraint propagation by alternating vertical and horizontal
/// label propagation over S_u, started from zero.
PropagationResult propagate(const NormalizedOperators& ops, const ConstraintMatrix& z,
                            const ScpParams& p = {}, const SweepObserver& observer = {});

/// Largest dense system the closed-form oracles will solve.
inline constexpr std::size_t kClosedFormMaxSize = 2000;

/// (1 - alpha) (I - alpha S_u)^{-1} ((1 - beta) Z_u + beta F_h*).
DenseMatrix closed_form_vertical(const NormalizedOperators& ops, const ConstraintMatrix& z,
                                 const DenseMatrix& f_h_star, double alpha, double beta);

/// (1 - alpha) ((1 - beta) Z_u + beta F_v*) (I - alpha S_u)^{-1}.
DenseMatrix closed_form_horizontal(const NormalizedOperators& ops, const ConstraintMatrix& z,
                                   const DenseMatrix& f_v_star, double alpha, double beta);

/// Q(F_v, F_h) with L_u = I - S_u and mu = mu_hat (1 + gamma).
double objective(const DenseMatrix& f_v, const DenseMatrix& f_h, const NormalizedOperators& ops,
                 const ConstraintMatrix& z, double mu_hat, double gamma);

/// "SCPF", u64 n, n*n row-major f64, little-endian.
void save_propagation(const DenseMatrix& f_u, const std::filesystem::path& path);
DenseMatrix load_propagation(const std::filesystem::path& path);

}  // namespace scpseg
