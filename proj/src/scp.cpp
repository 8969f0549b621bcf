#include "scpseg/scp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "scpseg/error.hpp"
#include "scpseg/image.hpp"

namespace scpseg {

ScpParams ScpParams::from_regularization(double mu, double gamma) {
  if (!(mu > 0) || !(gamma >= 0)) throw Error(Errc::invalid_argument, "mu must be > 0 and gamma >= 0");
  ScpParams p;
  const double mu_hat = mu / (1.0 + gamma);
  p.alpha = mu_hat / (1.0 + mu_hat);
  p.beta = gamma / (1.0 + gamma);
  return p;
}

void ScpParams::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
  if (!(beta >= 0 && beta < 1)) throw Error(Errc::invalid_argument, "beta must lie in [0, 1)");
  if (!(eps >= 0) || !std::isfinite(eps)) throw Error(Errc::invalid_argument, "eps must be >= 0");
  if (!(inner_tol > 0) || !(outer_tol > 0)) throw Error(Errc::invalid_argument, "tolerances must be positive");
  if (inner_max_iter == 0 || outer_max_iter == 0) {
    throw Error(Errc::invalid_argument, "iteration caps must be positive");
  }
}

namespace {

struct SweepOutcome {
  std::size_t iterations = 0;
  bool converged = false;
};

/// Runs X <- alpha S X + (1 - alpha) B to its fixed point. Columns of X are
/// independent problems; a column that is zero in both X and B stays zero,
/// so only the remaining columns are iterated.
SweepOutcome propagate_columns(const SparseWeightMatrix& s, const DenseMatrix& b, DenseMatrix& x,
                               const ScpParams& p) {
  const Eigen::Index n = x.rows(), cols = x.cols();
  std::vector<Eigen::Index> active;
  {
    std::vector<char> nz(static_cast<std::size_t>(cols), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double* xr = x.data() + i * cols;
      const double* br = b.data() + i * cols;
      for (Eigen::Index j = 0; j < cols; ++j) nz[j] |= static_cast<char>(xr[j] != 0.0 || br[j] != 0.0);
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (nz[j]) active.push_back(j);
    }
  }
  if (active.empty()) return {1, true};

  const auto m = static_cast<Eigen::Index>(active.size());
  const bool compact = m < cols;
  DenseMatrix xc, bc;
  if (compact) {
    xc.resize(n, m);
    bc.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < m; ++c) {
        xc(i, c) = x(i, active[c]);
        bc(i, c) = b(i, active[c]);
      }
    }
  } else {
    xc = std::move(x);
  }
  const DenseMatrix& bref = compact ? bc : b;

  // ||X_{t+1} - X*|| <= alpha / (1 - alpha) ||X_{t+1} - X_t|| since ||S||_2 <= 1.
  const double error_factor = p.alpha / (1.0 - p.alpha);
  // xc always holds the thresholded iterate. The change is measured between
  // unthresholded iterates, since entries below eps are regenerated by every
  // update and would otherwise count as movement; the values zeroed in xc are
  // remembered so they can be put back for that comparison.
  std::vector<std::pair<Eigen::Index, double>> removed;
  auto threshold = [&](DenseMatrix& m) {
    removed.clear();
    if (p.eps <= 0) return;
    double* d = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (d[i] != 0.0 && std::abs(d[i]) < p.eps) {
        removed.emplace_back(i, d[i]);
        d[i] = 0.0;
      }
    }
  };
  threshold(xc);
  DenseMatrix next;
  SweepOutcome out;
  for (std::size_t t = 1; t <= p.inner_max_iter; ++t) {
    spmm_affine(s, xc, p.alpha, bref, 1.0 - p.alpha, next);
    for (const auto& [i, v] : removed) xc.data()[i] = v;
    removed.clear();
    double diff2 = 0.0, norm2 = 0.0;
    double* a = next.data();
    const double* o = xc.data();
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      const double d = a[i] - o[i];
      diff2 += d * d;
      norm2 += a[i] * a[i];
      if (p.eps > 0 && a[i] != 0.0 && std::abs(a[i]) < p.eps) {
        removed.emplace_back(i, a[i]);
        a[i] = 0.0;
      }
    }
    std::swap(xc, next);
    out.iterations = t;
    if (!std::isfinite(diff2) || !std::isfinite(norm2)) {
      throw Error(Errc::non_finite, "propagation diverged (spectral radius of S_u above 1?)");
    }
    const double rel = norm2 > 0 ? std::sqrt(diff2 / norm2) : 0.0;
    if (error_factor * rel < p.inner_tol) {
      out.converged = true;
      break;
    }
  }

  if (compact) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < m; ++c) x(i, active[c]) = xc(i, c);
    }
  } else {
    x = std::move(xc);
  }
  return out;
}

double frobenius_diff(const DenseMatrix& a, const DenseMatrix& b) { return (a - b).norm(); }

}  // namespace

PropagationResult propagate(const NormalizedOperators& ops, const ConstraintMatrix& z,
                            const ScpParams& p, const SweepObserver& observer) {
  p.validate();
  const auto n = static_cast<Eigen::Index>(ops.n());
  if (z.z.rows() != n || z.z.cols() != n) {
    throw Error(Errc::dimension_mismatch, "Z_u is " + std::to_string(z.z.rows()) + "x" +
                                              std::to_string(z.z.cols()) + ", S_u has order " +
                                              std::to_string(n));
  }
  const SparseWeightMatrix& s = ops.s_u;
  const DenseMatrix z_t = z.z.transpose();

  PropagationState st;
  st.f_v = DenseMatrix::Zero(n, n);
  // The horizontal unknown is kept transposed: F_h S = (S F_h^T)^T because S_u
  // is symmetric, so both sweeps share the column-propagation kernel.
  DenseMatrix g = DenseMatrix::Zero(n, n);

  DenseMatrix rhs, prev_v, prev_g, f_h_view;
  for (std::size_t r = 1; r <= p.outer_max_iter; ++r) {
    st.outer_iter = r;

    prev_v = st.f_v;
    rhs = (1.0 - p.beta) * z.z + p.beta * g.transpose();
    const auto vert = propagate_columns(s, rhs, st.f_v, p);
    st.inner_iterations.push_back(vert.iterations);
    if (observer) {
      f_h_view = g.transpose();
      observer({r, SweepDirection::vertical, vert.iterations, vert.converged, st.f_v, f_h_view, f_h_view});
    }

    prev_g = g;
    rhs = (1.0 - p.beta) * z_t + p.beta * st.f_v.transpose();
    const auto horiz = propagate_columns(s, rhs, g, p);
    st.inner_iterations.push_back(horiz.iterations);
    if (observer) {
      f_h_view = g.transpose();
      observer({r, SweepDirection::horizontal, horiz.iterations, horiz.converged, st.f_v, f_h_view, st.f_v});
    }

    const double change = std::max(frobenius_diff(st.f_v, prev_v), frobenius_diff(g, prev_g));
    const double scale = std::max({1.0, st.f_v.norm(), g.norm()});
    const double rel = change / scale;
    if (!std::isfinite(rel)) throw Error(Errc::non_finite, "propagation produced non-finite values");
    st.residual_history.push_back(rel);
    if (rel < p.outer_tol) {
      st.converged = true;
      break;
    }
  }

  st.f_h = g.transpose();
  PropagationResult result;
  result.f_u = 0.5 * (st.f_v + st.f_h);
  result.meta = std::move(st);
  return result;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_propagation_operator(const NormalizedOperators& ops, double alpha) {
  if (ops.n() > kClosedFormMaxSize) {
    throw Error(Errc::size_guard, "dense closed form limited to n_u <= " +
                                      std::to_string(kClosedFormMaxSize));
  }
  if (!(alpha > 0 && alpha < 1)) throw Error(Errc::invalid_argument, "alpha must lie in (0, 1)");
  const auto n = static_cast<Eigen::Index>(ops.n());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - alpha * Eigen::MatrixXd(ops.s_u.to_dense());
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(Errc::non_finite, "I - alpha S_u is not positive definite");
  }
  return llt;
}

void check_square(const DenseMatrix& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    throw Error(Errc::dimension_mismatch, std::string(what) + " has the wrong shape");
  }
}

}  // namespace

DenseMatrix closed_form_vertical(const NormalizedOperators& ops, const ConstraintMatrix& z,
                                 const DenseMatrix& f_h_star, double alpha, double beta) {
  const auto n = static_cast<Eigen::Index>(ops.n());
  check_square(z.z, n, "Z_u");
  check_square(f_h_star, n, "F_h*");
  const auto llt = factor_propagation_operator(ops, alpha);
  const Eigen::MatrixXd rhs = (1.0 - beta) * z.z + beta * f_h_star;
  return (1.0 - alpha) * llt.solve(rhs);
}

DenseMatrix closed_form_horizontal(const NormalizedOperators& ops, const ConstraintMatrix& z,
                                   const DenseMatrix& f_v_star, double alpha, double beta) {
  const auto n = static_cast<Eigen::Index>(ops.n());
  check_square(z.z, n, "Z_u");
  check_square(f_v_star, n, "F_v*");
  const auto llt = factor_propagation_operator(ops, alpha);
  const Eigen::MatrixXd rhs_t = ((1.0 - beta) * z.z + beta * f_v_star).transpose();
  return ((1.0 - alpha) * llt.solve(rhs_t)).transpose();
}

double objective(const DenseMatrix& f_v, const DenseMatrix& f_h, const NormalizedOperators& ops,
                 const ConstraintMatrix& z, double mu_hat, double gamma) {
  const auto n = static_cast<Eigen::Index>(ops.n());
  check_square(f_v, n, "F_v");
  check_square(f_h, n, "F_h");
  check_square(z.z, n, "Z_u");
  const double mu = mu_hat * (1.0 + gamma);
  // tr(F^T L F) = ||F||^2 - <F, S F>,  tr(F L F^T) = ||F||^2 - <F, F S>
  const DenseMatrix s_fv = spmm_dense(ops.s_u, f_v, Side::left);
  const DenseMatrix fh_s = spmm_dense(ops.s_u, f_h, Side::right);
  const double lap_v = f_v.squaredNorm() - f_v.cwiseProduct(s_fv).sum();
  const double lap_h = f_h.squaredNorm() - f_h.cwiseProduct(fh_s).sum();
  return (f_v - z.z).squaredNorm() + mu * lap_v + (f_h - z.z).squaredNorm() + mu * lap_h +
         gamma * (f_v - f_h).squaredNorm();
}

namespace {
constexpr char kPropagationMagic[4] = {'S', 'C', 'P', 'F'};

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

template <typename T>
T read_le(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(Errc::corrupt_file, "propagation file truncated");
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}
}  // namespace

void save_propagation(const DenseMatrix& f_u, const std::filesystem::path& path) {
  if (f_u.rows() != f_u.cols()) throw Error(Errc::dimension_mismatch, "F_u must be square");
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * static_cast<std::size_t>(f_u.size()));
  out.insert(out.end(), kPropagationMagic, kPropagationMagic + 4);
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(f_u.rows()));
  for (Eigen::Index i = 0; i < f_u.size(); ++i) append_le<double>(out, f_u.data()[i]);
  write_file_bytes(path, out);
}

DenseMatrix load_propagation(const std::filesystem::path& path) {
  const auto in = read_file_bytes(path);
  if (in.size() < 4 || std::memcmp(in.data(), kPropagationMagic, 4) != 0) {
    throw Error(Errc::unsupported_format, "not an SCPF propagation file");
  }
  std::size_t pos = 4;
  const auto n = read_le<std::uint64_t>(in, pos);
  if (n > (1u << 20) || in.size() != pos + 8 * n * n) throw Error(Errc::corrupt_file, "propagation file size mismatch");
  DenseMatrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = read_le<double>(in, pos);
  return f;
}

}  // namespace scpseg
