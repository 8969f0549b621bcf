#include "scpseg/graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "scpseg/error.hpp"

namespace scpseg {

KnnGraph build_knn_graph_with_sigma(const FeatureMap& fm, std::size_t width, std::size_t height,
                                    std::size_t k, const GraphConfig& cfg) {
  const std::size_t n = width * height;
  if (k == 0) throw Error(Errc::invalid_argument, "k must be at least 1");
  if (fm.n != n) throw Error(Errc::dimension_mismatch, "feature map does not match image size");
  if (cfg.sigma && !(*cfg.sigma > 0)) throw Error(Errc::invalid_argument, "sigma must be positive");
  const std::size_t r = cfg.window_radius;
  // The corner pixel sees the smallest window.
  const std::size_t corner = (std::min(r, width - 1) + 1) * (std::min(r, height - 1) + 1);
  if (corner < k + 1) {
    throw Error(Errc::k_too_large, "candidate window of " + std::to_string(corner) +
                                       " pixels cannot supply k=" + std::to_string(k) + " neighbours");
  }

  struct Candidate {
    double dist2;
    std::uint32_t index;
    bool operator<(const Candidate& o) const {
      return dist2 != o.dist2 ? dist2 < o.dist2 : index < o.index;
    }
  };
  std::vector<Candidate> edges(n * k);  // k nearest per pixel, row i at i * k
  std::vector<Candidate> cand;
  cand.reserve((2 * r + 1) * (2 * r + 1));
  const std::size_t dim = fm.dim;
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t y0 = y >= r ? y - r : 0, y1 = std::min(height - 1, y + r);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t x0 = x >= r ? x - r : 0, x1 = std::min(width - 1, x + r);
      const std::size_t i = y * width + x;
      const double* fi = fm.row(i);
      cand.clear();
      for (std::size_t yy = y0; yy <= y1; ++yy) {
        for (std::size_t xx = x0; xx <= x1; ++xx) {
          const std::size_t j = yy * width + xx;
          if (j == i) continue;
          const double* fj = fm.row(j);
          double d2 = 0.0;
          for (std::size_t c = 0; c < dim; ++c) {
            const double d = fi[c] - fj[c];
            d2 += d * d;
          }
          cand.push_back({d2, static_cast<std::uint32_t>(j)});
        }
      }
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
      std::copy_n(cand.begin(), k, edges.begin() + static_cast<std::ptrdiff_t>(i * k));
    }
  }

  double sigma = 0.0;
  if (cfg.sigma) {
    sigma = *cfg.sigma;
  } else {
    std::vector<double> dists(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) dists[e] = std::sqrt(edges[e].dist2);
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    sigma = *mid;
    if (!(sigma > 0)) {
      // More than half the edges have zero length; fall back to the mean
      // positive length, or 1 when every edge is degenerate.
      double sum = 0.0;
      std::size_t count = 0;
      for (double d : dists) {
        if (d > 0) {
          sum += d;
          ++count;
        }
      }
      sigma = count > 0 ? sum / static_cast<double>(count) : 1.0;
    }
  }

  const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<Triplet> triplets;
  triplets.reserve(2 * edges.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < k; ++e) {
      const auto& c = edges[i * k + e];
      const double wgt = std::exp(-c.dist2 * inv_two_sigma2);
      triplets.push_back({static_cast<std::uint32_t>(i), c.index, wgt});
      triplets.push_back({c.index, static_cast<std::uint32_t>(i), wgt});
    }
  }
  return {SparseWeightMatrix::from_triplets(n, std::move(triplets),
                                            SparseWeightMatrix::Duplicates::max),
          sigma};
}

SparseWeightMatrix build_knn_graph(const FeatureMap& fm, std::size_t width, std::size_t height,
                                   std::size_t k, const GraphConfig& cfg) {
  return build_knn_graph_with_sigma(fm, width, height, k, cfg).w;
}

SparseWeightMatrix restrict(const SparseWeightMatrix& w, const SelectionIndex& sel) {
  if (sel.n != w.n() || sel.fwd.size() != w.n()) {
    throw Error(Errc::index_out_of_range, "selection built for a different node count");
  }
  const std::size_t nu = sel.n_u();
  std::vector<std::uint64_t> row_ptr(nu + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  for (std::size_t li = 0; li < nu; ++li) {
    const auto p = sel.inv(li);
    if (p >= w.n()) throw Error(Errc::index_out_of_range, "selected pixel outside graph");
    const auto rc = w.row_cols(p);
    const auto rv = w.row_vals(p);
    for (std::size_t e = 0; e < rc.size(); ++e) {
      const auto lj = sel.fwd[rc[e]];
      if (lj != SelectionIndex::kAbsent) {
        cols.push_back(static_cast<std::uint32_t>(lj));
        vals.push_back(rv[e]);
      }
    }
    row_ptr[li + 1] = cols.size();
  }
  return SparseWeightMatrix(nu, std::move(row_ptr), std::move(cols), std::move(vals));
}

NormalizedOperators normalize(const SparseWeightMatrix& w_u) {
  const std::size_t n = w_u.n();
  const auto degree = w_u.row_sums();
  NormalizedOperators ops;
  ops.degree_rsqrt.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ops.degree_rsqrt[i] = degree[i] > 0 ? 1.0 / std::sqrt(degree[i]) : 0.0;
  }
  std::vector<std::uint64_t> row_ptr(w_u.row_ptr());
  std::vector<std::uint32_t> cols(w_u.cols());
  std::vector<double> vals(w_u.nnz());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      // r_i * r_j is formed first so that (i, j) and (j, i) round identically.
      vals[e] = w_u.vals()[e] * (ops.degree_rsqrt[i] * ops.degree_rsqrt[cols[e]]);
    }
  }
  ops.s_u = SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
  return ops;
}

DenseVector spmv(const SparseWeightMatrix& m, const DenseVector& x) {
  if (static_cast<std::size_t>(x.size()) != m.n()) {
    throw Error(Errc::dimension_mismatch, "spmv: vector length differs from matrix order");
  }
  DenseVector y(x.size());
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto rc = m.row_cols(i);
    const auto rv = m.row_vals(i);
    double acc = 0.0;
    for (std::size_t e = 0; e < rc.size(); ++e) acc += rv[e] * x[rc[e]];
    y[static_cast<Eigen::Index>(i)] = acc;
  }
  return y;
}

void spmm_affine(const SparseWeightMatrix& m, const DenseMatrix& x, double scale,
                 const DenseMatrix& b, double shift, DenseMatrix& out) {
  const auto n = static_cast<Eigen::Index>(m.n());
  if (x.rows() != n) throw Error(Errc::dimension_mismatch, "spmm: row count differs from matrix order");
  const bool has_b = b.size() != 0;
  if (has_b && (b.rows() != x.rows() || b.cols() != x.cols())) {
    throw Error(Errc::dimension_mismatch, "spmm: affine term has the wrong shape");
  }
  const Eigen::Index cols = x.cols();
  out.resize(n, cols);
  // Column panels keep the touched slice of x resident in cache.
  constexpr Eigen::Index kPanel = 128;
  for (Eigen::Index p0 = 0; p0 < cols; p0 += kPanel) {
    const Eigen::Index pw = std::min(kPanel, cols - p0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double* __restrict o = out.data() + i * cols + p0;
      if (has_b) {
        const double* bb = b.data() + i * cols + p0;
        for (Eigen::Index c = 0; c < pw; ++c) o[c] = shift * bb[c];
      } else {
        std::fill_n(o, pw, 0.0);
      }
      const auto rc = m.row_cols(static_cast<std::size_t>(i));
      const auto rv = m.row_vals(static_cast<std::size_t>(i));
      for (std::size_t e = 0; e < rc.size(); ++e) {
        const double s = scale * rv[e];
        const double* __restrict xr = x.data() + static_cast<Eigen::Index>(rc[e]) * cols + p0;
        for (Eigen::Index c = 0; c < pw; ++c) o[c] += s * xr[c];
      }
    }
  }
}

DenseMatrix spmm_dense(const SparseWeightMatrix& m, const DenseMatrix& x, Side side) {
  const auto n = static_cast<Eigen::Index>(m.n());
  DenseMatrix out;
  if (side == Side::left) {
    if (x.rows() != n) throw Error(Errc::dimension_mismatch, "spmm_dense: m * X needs X.rows() == n");
    spmm_affine(m, x, 1.0, DenseMatrix(), 0.0, out);
    return out;
  }
  if (x.cols() != n) throw Error(Errc::dimension_mismatch, "spmm_dense: X * m needs X.cols() == n");
  out = DenseMatrix::Zero(x.rows(), n);
  // (X m)(r, :) = sum_j X(r, j) m(j, :)
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double* o = out.data() + r * n;
    const double* xr = x.data() + r * n;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = xr[j];
      if (a == 0.0) continue;
      const auto rc = m.row_cols(static_cast<std::size_t>(j));
      const auto rv = m.row_vals(static_cast<std::size_t>(j));
      for (std::size_t e = 0; e < rc.size(); ++e) o[rc[e]] += a * rv[e];
    }
  }
  return out;
}

namespace {

constexpr char kGraphMagic[4] = {'S', 'C', 'P', 'G'};
constexpr std::uint32_t kGraphVersion = 1;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (in.size() - pos < sizeof(T) || pos > in.size()) {
    throw Error(Errc::corrupt_file, "graph file truncated");
  }
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

std::vector<std::uint8_t> serialize_graph(const SparseWeightMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(24 + 8 * m.n() + 12 * m.nnz());
  out.insert(out.end(), kGraphMagic, kGraphMagic + 4);
  put_le<std::uint32_t>(out, kGraphVersion);
  put_le<std::uint64_t>(out, m.n());
  put_le<std::uint64_t>(out, m.nnz());
  for (std::size_t i = 0; i < m.n(); ++i) put_le<std::uint64_t>(out, m.row_nnz(i));
  for (std::size_t e = 0; e < m.nnz(); ++e) {
    put_le<std::uint32_t>(out, m.cols()[e]);
    put_le<double>(out, m.vals()[e]);
  }
  return out;
}

SparseWeightMatrix deserialize_graph(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kGraphMagic, 4) != 0) {
    throw Error(Errc::unsupported_format, "not an SCPG graph file");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kGraphVersion) {
    throw Error(Errc::unsupported_format, "unsupported graph file version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes, pos);
  const auto nnz = get_le<std::uint64_t>(bytes, pos);
  if (n > (1ull << 32) || bytes.size() < pos + 8 * n + 12 * nnz) {
    throw Error(Errc::corrupt_file, "graph file truncated");
  }
  std::vector<std::uint64_t> row_ptr(n + 1, 0);
  for (std::uint64_t i = 0; i < n; ++i) row_ptr[i + 1] = row_ptr[i] + get_le<std::uint64_t>(bytes, pos);
  if (row_ptr.back() != nnz) throw Error(Errc::corrupt_file, "graph row counts disagree with nnz");
  std::vector<std::uint32_t> cols(nnz);
  std::vector<double> vals(nnz);
  for (std::uint64_t e = 0; e < nnz; ++e) {
    cols[e] = get_le<std::uint32_t>(bytes, pos);
    vals[e] = get_le<double>(bytes, pos);
  }
  return SparseWeightMatrix(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

void save_graph(const SparseWeightMatrix& m, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_graph(m));
}

SparseWeightMatrix load_graph(const std::filesystem::path& path) {
  return deserialize_graph(read_file_bytes(path));
}

}  // namespace scpseg
