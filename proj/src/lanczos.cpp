// Thick-restart Lanczos for the largest eigenpairs of a sparse symmetric
// operator. The projected matrix is formed explicitly as V^T (S V) on every
// restart, so the basis may also be extended by arbitrary orthogonal vectors
// (used after an invariant subspace is exhausted).

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "scpseg/error.hpp"
#include "scpseg/ncut.hpp"
#include "scpseg/rng.hpp"

namespace scpseg {

namespace {

void apply(const SparseWeightMatrix& s, const double* x, double* y) {
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto rc = s.row_cols(i);
    const auto rv = s.row_vals(i);
    double acc = 0.0;
    for (std::size_t e = 0; e < rc.size(); ++e) acc += rv[e] * x[rc[e]];
    y[i] = acc;
  }
}

/// Two passes of classical Gram-Schmidt against the first k columns of v.
double orthogonalize(const Eigen::MatrixXd& v, Eigen::Index k, Eigen::VectorXd& w) {
  for (int pass = 0; pass < 2; ++pass) {
    if (k == 0) break;
    const Eigen::VectorXd coeff = v.leftCols(k).transpose() * w;
    w.noalias() -= v.leftCols(k) * coeff;
  }
  return w.norm();
}

/// Random unit vector orthogonal to the first k columns, or empty if the
/// basis already spans the space.
bool random_orthogonal(const Eigen::MatrixXd& v, Eigen::Index k, Rng& rng, Eigen::VectorXd& out) {
  const Eigen::Index n = v.rows();
  for (int attempt = 0; attempt < 8; ++attempt) {
    out.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = rng.normal();
    const double before = out.norm();
    const double after = orthogonalize(v, k, out);
    if (after > 1e-8 * before) {
      out /= after;
      return true;
    }
  }
  return false;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0) v = -v;
}

}  // namespace

EigenResult top_eigenvectors_of(const SparseWeightMatrix& s, std::size_t m, const SpectralConfig& cfg) {
  const std::size_t n = s.n();
  if (m == 0 || m > n) {
    throw Error(Errc::invalid_argument, "requested " + std::to_string(m) + " eigenpairs of an order-" +
                                            std::to_string(n) + " operator");
  }
  if (!(cfg.eig_tol > 0)) throw Error(Errc::invalid_argument, "eig_tol must be positive");

  const auto N = static_cast<Eigen::Index>(n);
  const auto M = static_cast<Eigen::Index>(m);
  // Workspace is capped near 16M doubles per matrix.
  const Eigen::Index budget = std::max<Eigen::Index>(4 * M + 20, (Eigen::Index{1} << 24) / N);
  const Eigen::Index max_basis = std::min<Eigen::Index>({N, budget, std::max<Eigen::Index>(4 * M, 400)});
  const Eigen::Index keep = std::min<Eigen::Index>(max_basis - 1, std::max<Eigen::Index>(M + 1, max_basis / 2));

  Eigen::MatrixXd v(N, max_basis), av(N, max_basis);
  Rng rng(cfg.seed ^ 0x5eed1a2c05ull);
  Eigen::VectorXd w;
  random_orthogonal(v, 0, rng, w);
  v.col(0) = w;

  EigenResult res;
  Eigen::Index k = 0;  // basis columns with S v already stored in av
  Eigen::MatrixXd ritz_vecs;
  Eigen::VectorXd ritz_vals;
  std::vector<double> ritz_res;
  while (true) {
    // Expand the basis until it is full, spans the space, or the budget ends.
    bool exhausted = false;
    while (k < max_basis && res.matvecs < cfg.eig_max_iter) {
      apply(s, v.col(k).data(), av.col(k).data());
      ++res.matvecs;
      ++k;
      if (k == max_basis) break;
      w = av.col(k - 1);
      const double scale = std::max(1.0, w.norm());
      const double norm = orthogonalize(v, k, w);
      if (norm > 1e-10 * scale) {
        v.col(k) = w / norm;
      } else if (random_orthogonal(v, k, rng, w)) {
        v.col(k) = w;  // invariant subspace found; continue in a fresh direction
      } else {
        exhausted = true;
        break;
      }
    }

    // Rayleigh-Ritz on span(V).
    Eigen::MatrixXd h = v.leftCols(k).transpose() * av.leftCols(k);
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const Eigen::Index take = std::min(k, std::max(keep, M));
    ritz_vals.resize(take);
    Eigen::MatrixXd u(k, take);
    for (Eigen::Index c = 0; c < take; ++c) {
      ritz_vals[c] = es.eigenvalues()[k - 1 - c];
      u.col(c) = es.eigenvectors().col(k - 1 - c);
    }
    ritz_vecs = v.leftCols(k) * u;
    const Eigen::MatrixXd ritz_av = av.leftCols(k) * u;

    ritz_res.assign(static_cast<std::size_t>(take), 0.0);
    bool all_converged = take >= M;
    for (Eigen::Index c = 0; c < take; ++c) {
      ritz_res[c] = (ritz_av.col(c) - ritz_vals[c] * ritz_vecs.col(c)).norm();
      if (c < M && ritz_res[c] > 0.5 * cfg.eig_tol) all_converged = false;
    }
    if (all_converged || exhausted || k == N || res.matvecs >= cfg.eig_max_iter) break;

    // Thick restart: keep the leading Ritz vectors plus the Krylov
    // continuation, which is orthogonal to the whole current basis.
    w = av.col(k - 1);
    const double scale = std::max(1.0, w.norm());
    const double norm = orthogonalize(v, k, w);
    const bool have_continuation = norm > 1e-10 * scale;
    if (have_continuation) w /= norm;
    v.leftCols(take) = ritz_vecs;
    av.leftCols(take) = ritz_av;
    k = take;
    if (have_continuation) {
      v.col(k) = w;
    } else if (random_orthogonal(v, k, rng, w)) {
      v.col(k) = w;
    } else {
      break;
    }
  }

  res.values.resize(m);
  res.vectors.resize(N, M);
  res.residuals.resize(m);
  Eigen::VectorXd sv(N);
  res.converged = true;
  for (Eigen::Index c = 0; c < M; ++c) {
    Eigen::VectorXd vec = ritz_vecs.col(c);
    vec.normalize();
    fix_sign(vec);
    apply(s, vec.data(), sv.data());
    const double lambda = vec.dot(sv);
    res.values[c] = lambda;
    res.vectors.col(c) = vec;
    res.residuals[c] = (sv - lambda * vec).norm();
    if (res.residuals[c] > cfg.eig_tol) res.converged = false;
  }
  return res;
}

EigenResult top_eigenvectors(const SparseWeightMatrix& w, std::size_t m, const SpectralConfig& cfg) {
  return top_eigenvectors_of(normalize(w).s_u, m, cfg);
}

}  // namespace scpseg
