#include "scpseg/ncut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "scpseg/error.hpp"
#include "scpseg/rng.hpp"

namespace scpseg {

void SpectralConfig::validate() const {
  if (!(eig_tol > 0)) throw Error(Errc::invalid_argument, "eig_tol must be positive");
  if (n_eigenvectors < 2) throw Error(Errc::invalid_argument, "n_eigenvectors must be at least 2");
  if (split_candidates == 0) throw Error(Errc::invalid_argument, "split_candidates must be positive");
  if (eig_max_iter == 0) throw Error(Errc::invalid_argument, "eig_max_iter must be positive");
}

std::size_t canonicalize_labels(std::vector<std::int32_t>& labels) {
  std::unordered_map<std::int32_t, std::int32_t> remap;
  for (auto& l : labels) {
    const auto it = remap.try_emplace(l, static_cast<std::int32_t>(remap.size())).first;
    l = it->second;
  }
  return remap.size();
}

double ncut_objective(const SparseWeightMatrix& w, const std::vector<std::int32_t>& labels) {
  if (labels.size() != w.n()) throw Error(Errc::length_mismatch, "labels do not cover the graph");
  std::vector<std::int32_t> canon = labels;
  const std::size_t k = canonicalize_labels(canon);
  std::vector<double> cut(k, 0.0), assoc(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < w.n(); ++i) {
    const auto rc = w.row_cols(i);
    const auto rv = w.row_vals(i);
    const auto li = static_cast<std::size_t>(canon[i]);
    for (std::size_t e = 0; e < rc.size(); ++e) {
      assoc[li] += rv[e];
      if (canon[rc[e]] != canon[i]) cut[li] += rv[e];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (assoc[c] > 0) total += cut[c] / assoc[c];
  }
  return total;
}

namespace {

/// cut/assoc of the bipartition {in_a} vs rest.
double bipartition_ncut(const SparseWeightMatrix& w, const std::vector<char>& in_a,
                        const std::vector<double>& degree) {
  double cut = 0.0, assoc_a = 0.0, assoc_b = 0.0;
  for (std::size_t i = 0; i < w.n(); ++i) {
    (in_a[i] ? assoc_a : assoc_b) += degree[i];
    if (!in_a[i]) continue;
    const auto rc = w.row_cols(i);
    const auto rv = w.row_vals(i);
    for (std::size_t e = 0; e < rc.size(); ++e) {
      if (!in_a[rc[e]]) cut += rv[e];
    }
  }
  double value = 0.0;
  if (assoc_a > 0) value += cut / assoc_a;
  if (assoc_b > 0) value += cut / assoc_b;
  return value;
}

Segmentation finish(const SparseWeightMatrix& w, std::vector<std::int32_t> labels,
                    std::vector<std::string> warnings) {
  Segmentation seg;
  seg.k = canonicalize_labels(labels);
  seg.labels = std::move(labels);
  seg.ncut_value = ncut_objective(w, seg.labels);
  seg.warnings = std::move(warnings);
  return seg;
}

}  // namespace

Segmentation two_way_cut(const SparseWeightMatrix& w, const SpectralConfig& cfg) {
  cfg.validate();
  const std::size_t n = w.n();
  if (n < 2) throw Error(Errc::invalid_argument, "two_way_cut needs at least 2 nodes");
  const NormalizedOperators ops = normalize(w);
  const EigenResult eig = top_eigenvectors_of(ops.s_u, 2, cfg);
  std::vector<std::string> warnings;
  if (!eig.converged) {
    warnings.push_back("NoConvergence: eigen residual " + std::to_string(eig.residuals[1]) +
                       " above tolerance");
  }

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = eig.vectors(static_cast<Eigen::Index>(i), 1) * ops.degree_rsqrt[i];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return y[a] < y[b]; });

  const auto degree = w.row_sums();
  std::vector<char> in_a(n), best_split;
  double best = std::numeric_limits<double>::infinity();
  double last_threshold = std::numeric_limits<double>::quiet_NaN();
  const std::size_t candidates = cfg.split_candidates;
  for (std::size_t c = 1; c <= candidates; ++c) {
    const std::size_t pos = std::min(n - 1, std::max<std::size_t>(1, c * n / (candidates + 1)));
    const double threshold = y[order[pos]];
    if (threshold == last_threshold) continue;
    last_threshold = threshold;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      in_a[i] = static_cast<char>(y[i] < threshold);
      count += static_cast<std::size_t>(in_a[i]);
    }
    if (count == 0 || count == n) continue;
    const double value = bipartition_ncut(w, in_a, degree);
    if (value < best) {
      best = value;
      best_split = in_a;
    }
  }
  if (best_split.empty()) {
    warnings.push_back("DegenerateSplit: every threshold left a side empty, using median split");
    best_split.assign(n, 0);
    for (std::size_t r = 0; r < n / 2; ++r) best_split[order[r]] = 1;
  }
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = best_split[i] ? 1 : 0;
  return finish(w, std::move(labels), std::move(warnings));
}

namespace {

/// Seeded k-means++ followed by Lloyd iterations on the rows of `points`.
/// Returns an empty vector if a cluster ends up empty.
std::vector<std::int32_t> kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed,
                                 std::size_t max_iter) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto K = static_cast<Eigen::Index>(k);
  Rng rng(seed);
  Eigen::MatrixXd centers(K, points.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0) {
        double target = rng.uniform01() * total;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i]) continue;
          target -= d2[i];
          if (target < 0) {
            pick = i;
            break;
          }
        }
        if (pick == n) {  // rounding at the tail
          for (std::size_t i = n; i-- > 0;) {
            if (!chosen[i] && d2[i] > 0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      }
    }
    chosen[pick] = 1;
    centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }

  std::vector<std::int32_t> assign(n, -1);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < K; ++c) {
        const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = static_cast<std::int32_t>(best);
        changed = true;
      }
    }
    std::vector<std::size_t> counts(k, 0);
    centers.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      centers.row(assign[i]) += points.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) return {};
      centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(counts[c]);
    }
    if (!changed) break;
  }
  return assign;
}

Segmentation recursive_cut(const SparseWeightMatrix& w, std::size_t k, const SpectralConfig& cfg) {
  const std::size_t n = w.n();
  std::vector<std::int32_t> labels(n, 0);
  std::vector<std::string> warnings;
  std::vector<char> unsplittable;
  std::size_t regions = 1;
  while (regions < k) {
    std::vector<std::size_t> sizes(regions, 0);
    for (auto l : labels) ++sizes[static_cast<std::size_t>(l)];
    std::size_t target = regions;
    for (std::size_t r = 0; r < regions; ++r) {
      if ((r >= unsplittable.size() || !unsplittable[r]) && sizes[r] >= 2 &&
          (target == regions || sizes[r] > sizes[target])) {
        target = r;
      }
    }
    if (target == regions) throw Error(Errc::no_convergence, "no region left to split");
    std::vector<std::uint32_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == static_cast<std::int32_t>(target)) members.push_back(static_cast<std::uint32_t>(i));
    }
    const SelectionIndex sub = SelectionIndex::of(n, members);
    const Segmentation part = two_way_cut(restrict(w, sub), cfg);
    if (part.k < 2) {
      unsplittable.resize(regions, 0);
      unsplittable[target] = 1;
      continue;
    }
    warnings.insert(warnings.end(), part.warnings.begin(), part.warnings.end());
    for (std::size_t li = 0; li < sub.n_u(); ++li) {
      if (part.labels[li] == 1) labels[sub.inv(li)] = static_cast<std::int32_t>(regions);
    }
    ++regions;
  }
  Segmentation seg;
  seg.k = canonicalize_labels(labels);
  seg.ncut_value = ncut_objective(w, labels);
  seg.labels = std::move(labels);
  seg.warnings = std::move(warnings);
  return seg;
}

}  // namespace

Segmentation k_way_cut(const SparseWeightMatrix& w, std::size_t k, const SpectralConfig& cfg) {
  cfg.validate();
  const std::size_t n = w.n();
  if (k < 2 || k > n) {
    throw Error(Errc::invalid_argument, "k_way_cut needs 2 <= k <= N, got k=" + std::to_string(k));
  }
  if (k == n) {
    std::vector<std::int32_t> labels(n);
    std::iota(labels.begin(), labels.end(), 0);
    return finish(w, std::move(labels), {});
  }
  if (cfg.k_way_method == KWayMethod::recursive) return recursive_cut(w, k, cfg);

  const EigenResult eig = top_eigenvectors(w, k, cfg);
  std::vector<std::string> warnings;
  if (!eig.converged) warnings.push_back("NoConvergence: eigenpairs above tolerance");
  Eigen::MatrixXd emb = eig.vectors;
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0) emb.row(i) /= norm;
  }
  for (std::uint64_t attempt = 0; attempt < 5; ++attempt) {
    auto labels = kmeans(emb, k, cfg.seed + attempt, cfg.kmeans_max_iter);
    if (!labels.empty()) return finish(w, std::move(labels), std::move(warnings));
    warnings.push_back("EmptyCluster: k-means reseeded");
  }
  throw Error(Errc::no_convergence, "k-means produced an empty cluster after 5 seeds");
}

SparseWeightMatrix spectral_learning_edit(const SparseWeightMatrix& w, const ConstraintSet& cs) {
  const std::size_t n = w.n();
  for (const auto* set : {&cs.must, &cs.cannot}) {
    for (const auto& [a, b] : *set) {
      if (a >= n || b >= n) throw Error(Errc::index_out_of_range, "constraint pixel outside graph");
    }
  }
  if (cs.empty()) return w;
  const double w_max = w.nnz() > 0 ? w.max_value() : 1.0;
  std::vector<PixelPair> cannot = cs.cannot;
  for (auto& p : cannot) p = make_pair_key(p.first, p.second);
  std::sort(cannot.begin(), cannot.end());
  auto is_cannot = [&](std::uint32_t i, std::uint32_t j) {
    return std::binary_search(cannot.begin(), cannot.end(), make_pair_key(i, j));
  };
  std::vector<Triplet> t;
  t.reserve(w.nnz() + 2 * cs.must.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto rc = w.row_cols(i);
    const auto rv = w.row_vals(i);
    for (std::size_t e = 0; e < rc.size(); ++e) {
      if (!cannot.empty() && is_cannot(static_cast<std::uint32_t>(i), rc[e])) continue;
      t.push_back({static_cast<std::uint32_t>(i), rc[e], rv[e]});
    }
  }
  for (const auto& [a, b] : cs.must) {
    t.push_back({a, b, w_max});
    t.push_back({b, a, w_max});
  }
  return SparseWeightMatrix::from_triplets(n, std::move(t), SparseWeightMatrix::Duplicates::last);
}

}  // namespace scpseg
