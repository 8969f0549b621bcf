#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "oracles.hpp"
#include "scpseg/error.hpp"
#include "scpseg/ncut.hpp"

using namespace scpseg;

namespace {

DenseMatrix two_cliques() {
  DenseMatrix w = DenseMatrix::Zero(8, 8);
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) w(4 * b + i, 4 * b + j) = 1.0;
  w(3, 4) = w(4, 3) = 0.01;
  return w;
}

std::vector<int> as_int(const std::vector<std::int32_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("eigenpairs of a single edge") {
  DenseMatrix w(2, 2);
  w << 0, 1, 1, 0;
  SpectralConfig cfg;
  const EigenResult r = top_eigenvectors(SparseWeightMatrix::from_dense(w), 2, cfg);
  CHECK(r.converged);
  CHECK(r.values[0] == doctest::Approx(1.0));
  CHECK(r.values[1] == doctest::Approx(-1.0));
  CHECK(r.vectors(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(r.vectors(1, 0) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("multiplicity of the unit eigenvalue counts components") {
  Rng rng(3);
  DenseMatrix w = DenseMatrix::Zero(15, 15);
  for (int c = 0; c < 3; ++c) {
    const DenseMatrix block = oracle::random_graph(5, 0.5, rng).to_dense();
    w.block(5 * c, 5 * c, 5, 5) = block;
  }
  const EigenResult r = top_eigenvectors(SparseWeightMatrix::from_dense(w), 4);
  CHECK(r.values[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.values[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.values[2] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.values[3] < 1.0 - 1e-6);
}

TEST_CASE("top eigenpairs against a dense solver") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const SparseWeightMatrix w = oracle::random_graph(30, 0.2, rng);
    const EigenResult r = top_eigenvectors(w, 5, SpectralConfig{});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::dense_normalized(w.to_dense()));
    CHECK(r.converged);
    for (int c = 0; c < 5; ++c) {
      CHECK(std::abs(r.values[c] - es.eigenvalues()[29 - c]) < 1e-8);
      CHECK(r.residuals[c] <= 1e-8);
      CHECK(r.values[c] <= 1 + 1e-9);
      CHECK(r.values[c] >= -1 - 1e-9);
    }
    // principal angles between the returned and the dense subspace
    const Eigen::MatrixXd ref = es.eigenvectors().rightCols(5);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(ref.transpose() * r.vectors);
    CHECK(svd.singularValues().minCoeff() > std::cos(1e-6));
  }
}

TEST_CASE("eigensolver argument checks") {
  CHECK_THROWS_AS(top_eigenvectors(SparseWeightMatrix(3), 4), Error);
  CHECK_THROWS_AS(top_eigenvectors(SparseWeightMatrix(3), 0), Error);
}

TEST_CASE("two cliques") {
  const DenseMatrix d = two_cliques();
  const SparseWeightMatrix w = SparseWeightMatrix::from_dense(d);
  const Segmentation seg = two_way_cut(w);
  CHECK(seg.k == 2);
  CHECK(seg.labels == std::vector<std::int32_t>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(seg.ncut_value == doctest::Approx(2 * 0.01 / 12.01));
  CHECK(seg.ncut_value == doctest::Approx(oracle::brute_force_ncut(d)).epsilon(1e-12));
  CHECK(std::abs(seg.ncut_value - ncut_objective(w, seg.labels)) <= 1e-12);
  const Segmentation kw = k_way_cut(w, 2);
  CHECK(kw.labels == seg.labels);
}

TEST_CASE("disconnected components are found with zero cut") {
  DenseMatrix d = DenseMatrix::Zero(6, 6);
  d(0, 1) = d(1, 0) = d(1, 2) = d(2, 1) = 1;
  d(3, 4) = d(4, 3) = d(4, 5) = d(5, 4) = 0.5;
  const Segmentation two = two_way_cut(SparseWeightMatrix::from_dense(d));
  CHECK(two.ncut_value == 0.0);
  CHECK(two.labels == std::vector<std::int32_t>{0, 0, 0, 1, 1, 1});

  DenseMatrix t = DenseMatrix::Zero(9, 9);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j) t(3 * c + i, 3 * c + j) = 1.0 + 0.1 * c;
  const Segmentation three = k_way_cut(SparseWeightMatrix::from_dense(t), 3);
  CHECK(three.labels == std::vector<std::int32_t>{0, 0, 0, 1, 1, 1, 2, 2, 2});
  CHECK(three.ncut_value == doctest::Approx(0.0));
}

TEST_CASE("complete graph: balanced split reaches the brute-force minimum") {
  DenseMatrix d = DenseMatrix::Constant(4, 4, 1.0);
  d.diagonal().setZero();
  const Segmentation seg = two_way_cut(SparseWeightMatrix::from_dense(d));
  CHECK(seg.ncut_value == doctest::Approx(oracle::brute_force_ncut(d)).epsilon(1e-12));
}

TEST_CASE("two_way_cut is close to the exhaustive optimum on small graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(500 + seed);
    const std::size_t n = 6 + seed % 7;
    const SparseWeightMatrix w = oracle::random_graph(n, 0.4, rng);
    const Segmentation seg = two_way_cut(w);
    const double best = oracle::brute_force_ncut(w.to_dense());
    CHECK(seg.ncut_value <= 1.1 * best + 1e-12);
    CHECK(seg.ncut_value == doctest::Approx(oracle::ncut_dense(w.to_dense(), as_int(seg.labels), 2)).epsilon(1e-12));
  }
}

TEST_CASE("k_way_cut special cases") {
  Rng rng(7);
  const SparseWeightMatrix w = oracle::random_graph(9, 0.4, rng);
  const Segmentation each = k_way_cut(w, 9);
  CHECK(each.k == 9);
  for (std::int32_t i = 0; i < 9; ++i) CHECK(each.labels[i] == i);
  CHECK_THROWS_AS(k_way_cut(w, 1), Error);
  CHECK_THROWS_AS(k_way_cut(w, 10), Error);
  SpectralConfig rec;
  rec.k_way_method = KWayMethod::recursive;
  const Segmentation r = k_way_cut(SparseWeightMatrix::from_dense(two_cliques()), 2, rec);
  CHECK(r.labels == std::vector<std::int32_t>{0, 0, 0, 0, 1, 1, 1, 1});
  const Segmentation r3 = k_way_cut(w, 3, rec);
  CHECK(r3.k == 3);
  CHECK(r3.ncut_value == doctest::Approx(ncut_objective(w, r3.labels)));
}

TEST_CASE("cuts are deterministic") {
  Rng rng(8);
  const SparseWeightMatrix w = oracle::random_graph(40, 0.15, rng);
  CHECK(two_way_cut(w) == two_way_cut(w));
  CHECK(k_way_cut(w, 4) == k_way_cut(w, 4));
}

TEST_CASE("label canonicalization") {
  std::vector<std::int32_t> l{5, 5, 2, 9, 2};
  CHECK(canonicalize_labels(l) == 3);
  CHECK(l == std::vector<std::int32_t>{0, 0, 1, 2, 1});
}

TEST_CASE("spectral learning edit") {
  DenseMatrix d = DenseMatrix::Zero(5, 5);
  d(0, 1) = d(1, 0) = 0.6;
  d(1, 2) = d(2, 1) = 0.3;
  d(3, 4) = d(4, 3) = 0.8;
  const SparseWeightMatrix w = SparseWeightMatrix::from_dense(d);
  SUBCASE("no constraints") { CHECK(spectral_learning_edit(w, {}) == w); }
  SUBCASE("must-link between non-adjacent pixels") {
    const SparseWeightMatrix e = spectral_learning_edit(w, ConstraintSet::from_pairs({{0, 4}}, {}));
    CHECK(e.at(0, 4) == 0.8);
    CHECK(e.at(4, 0) == 0.8);
    CHECK(e.nnz() == w.nnz() + 2);
  }
  SUBCASE("must-link on a unit-weight graph inserts 1.0") {
    DenseMatrix u = DenseMatrix::Zero(3, 3);
    u(0, 1) = u(1, 0) = 1.0;
    const SparseWeightMatrix e = spectral_learning_edit(SparseWeightMatrix::from_dense(u), ConstraintSet::from_pairs({{0, 2}}, {}));
    CHECK(e.at(0, 2) == 1.0);
    CHECK(e.at(2, 0) == 1.0);
  }
  SUBCASE("cannot-link removes one edge only") {
    const SparseWeightMatrix e = spectral_learning_edit(w, ConstraintSet::from_pairs({}, {{1, 2}}));
    CHECK_FALSE(e.contains(1, 2));
    CHECK_FALSE(e.contains(2, 1));
    CHECK(e.nnz() == w.nnz() - 2);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if (!((i == 1 && j == 2) || (i == 2 && j == 1))) CHECK(e.at(i, j) == w.at(i, j));
  }
  SUBCASE("pixel outside the graph") {
    CHECK_THROWS_AS(spectral_learning_edit(w, ConstraintSet::from_pairs({{0, 7}}, {})), Error);
  }
}
