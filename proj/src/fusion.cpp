#include "scpseg/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scpseg/error.hpp"

namespace scpseg {

void FusionParams::validate() const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) {
    throw Error(Errc::invalid_argument, "lambda must be finite and >= 0");
  }
}

double soft_thr(double x, double y, double lambda) {
  const double z1 = std::max(x - lambda, y);
  const double z2 = std::max(0.0, std::min(x + lambda, y));
  const double f1 = (z1 - x) * (z1 - x) + 2.0 * lambda * std::abs(z1 - y);
  const double f2 = (z2 - x) * (z2 - x) + 2.0 * lambda * std::abs(z2 - y);
  return f1 <= f2 ? z1 : z2;
}

SparseWeightMatrix adjust_weights(const DenseMatrix& f_u, const SparseWeightMatrix& w_u,
                                  const FusionParams& p) {
  p.validate();
  const std::size_t n = w_u.n();
  if (static_cast<std::size_t>(f_u.rows()) != n || static_cast<std::size_t>(f_u.cols()) != n) {
    throw Error(Errc::dimension_mismatch, "F_u is " + std::to_string(f_u.rows()) + "x" +
                                              std::to_string(f_u.cols()) + ", W_u has order " +
                                              std::to_string(n));
  }
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(w_u.nnz());
  vals.reserve(w_u.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    const double* fr = f_u.data() + static_cast<Eigen::Index>(i) * f_u.cols();
    const auto wc = w_u.row_cols(i);
    const auto wv = w_u.row_vals(i);
    std::size_t e = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double y = 0.0;
      if (e < wc.size() && wc[e] == j) y = wv[e++];
      const double x = fr[j];
      // soft_thr(0, 0, lambda) = 0, and affinities carry no self-loops.
      if ((x == 0.0 && y == 0.0) || j == i) continue;
      const double z = soft_thr(x, y, p.lambda);
      if (z > 0.0) {
        cols.push_back(static_cast<std::uint32_t>(j));
        vals.push_back(z);
      }
    }
    row_ptr[i + 1] = cols.size();
  }
  return average_with_transpose(
      SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals)));
}

SparseWeightMatrix patch_weights(const SparseWeightMatrix& w, const SparseWeightMatrix& w_u_new,
                                 const SelectionIndex& sel) {
  if (sel.n != w.n() || sel.fwd.size() != w.n()) {
    throw Error(Errc::index_out_of_range, "selection built for a different node count");
  }
  if (w_u_new.n() != sel.n_u()) {
    throw Error(Errc::index_out_of_range, "adjusted matrix order differs from |P_u|");
  }
  const std::size_t n = w.n();
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(w.nnz() + w_u_new.nnz());
  vals.reserve(w.nnz() + w_u_new.nnz());
  for (std::size_t pix = 0; pix < n; ++pix) {
    const auto rc = w.row_cols(pix);
    const auto rv = w.row_vals(pix);
    const auto local = sel.fwd[pix];
    if (local == SelectionIndex::kAbsent) {
      cols.insert(cols.end(), rc.begin(), rc.end());
      vals.insert(vals.end(), rv.begin(), rv.end());
    } else {
      const auto uc = w_u_new.row_cols(static_cast<std::size_t>(local));
      const auto uv = w_u_new.row_vals(static_cast<std::size_t>(local));
      std::size_t a = 0, b = 0;
      auto skip_selected = [&] {
        while (a < rc.size() && sel.fwd[rc[a]] != SelectionIndex::kAbsent) ++a;
      };
      skip_selected();
      while (a < rc.size() || b < uc.size()) {
        const std::uint32_t qa = a < rc.size() ? rc[a] : UINT32_MAX;
        const std::uint32_t qb = b < uc.size() ? sel.inv(uc[b]) : UINT32_MAX;
        if (qa < qb) {
          cols.push_back(qa);
          vals.push_back(rv[a]);
          ++a;
          skip_selected();
        } else {
          if (uv[b] != 0.0) {
            cols.push_back(qb);
            vals.push_back(uv[b]);
          }
          ++b;
        }
      }
    }
    row_ptr[pix + 1] = cols.size();
  }
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

}  // namespace scpseg
