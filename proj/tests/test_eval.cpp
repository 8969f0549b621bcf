#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "oracles.hpp"
#include "scpseg/error.hpp"
#include "scpseg/eval.hpp"
#include "scpseg/image.hpp"
#include "scpseg/rng.hpp"

using namespace scpseg;

namespace {

Labeling random_labels(std::size_t n, std::int32_t k, Rng& rng) {
  Labeling l(n);
  for (auto& v : l) v = static_cast<std::int32_t>(rng.uniform_index(k));
  return l;
}

std::vector<int> as_int(const Labeling& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("adjusted Rand index") {
  const Labeling a{1, 1, 2, 2}, b{1, 2, 1, 2};
  CHECK(adjusted_rand(a, b) == doctest::Approx(-0.5));
  CHECK(oracle::ari_pairs(as_int(a), as_int(b)) == doctest::Approx(-0.5));
  CHECK(adjusted_rand(a, a) == 1.0);
  CHECK(adjusted_rand(Labeling{3, 3, 3}, Labeling{0, 0, 0}) == 1.0);
  CHECK(adjusted_rand(Labeling{0, 1, 2}, Labeling{4, 5, 6}) == 1.0);
  CHECK(adjusted_rand(Labeling{0, 0, 0}, Labeling{0, 1, 2}) == 0.0);
  CHECK_THROWS_AS(adjusted_rand(Labeling{0, 1}, Labeling{0}), Error);

  Rng rng(21);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.uniform_index(60);
    const Labeling x = random_labels(n, 1 + static_cast<std::int32_t>(rng.uniform_index(5)), rng);
    const Labeling y = random_labels(n, 1 + static_cast<std::int32_t>(rng.uniform_index(5)), rng);
    const double v = adjusted_rand(x, y);
    CHECK(v == doctest::Approx(oracle::ari_pairs(as_int(x), as_int(y))).epsilon(1e-12));
    CHECK(adjusted_rand(y, x) == v);
    CHECK(adjusted_rand(x, x) == 1.0);
    Labeling px = x;
    for (auto& l : px) l = (l * 7 + 3) % 11;  // injective relabeling
    CHECK(adjusted_rand(px, y) == doctest::Approx(v).epsilon(1e-12));
  }
  const Labeling big_a = random_labels(1000, 2, rng), big_b = random_labels(1000, 2, rng);
  CHECK(std::abs(adjusted_rand(big_a, big_b)) < 0.1);
  CHECK(rand_index(a, a) == 1.0);
}

TEST_CASE("label inference by voting") {
  // P_u = {0..3}: pixel 0 is object (1), pixel 1 background (0), 2 and 3 free
  const SelectionIndex sel = SelectionIndex::from_sets(6, {0, 1}, {2, 3});
  const LabeledPixels lp{{{0, 1}, {1, 0}}};
  DenseMatrix f = DenseMatrix::Zero(4, 4);
  f(0, 2) = 0.9;
  f(1, 2) = -0.2;
  f(1, 3) = 0.4;
  f(0, 3) = 0.1;
  f(1, 0) = 5.0;  // strong vote for pixel 0 being background is ignored
  const Labeling got = infer_selected_labels(f, sel, lp);
  CHECK(got == Labeling{1, 0, 1, 0});
  CHECK(infer_selected_labels(3.5 * f, sel, lp) == got);
  // ties go to the smaller class id
  CHECK(infer_selected_labels(DenseMatrix::Zero(4, 4), sel, lp) == Labeling{1, 0, 0, 0});
  try {
    infer_selected_labels(f, sel, LabeledPixels{{{5, 1}}});
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unselected_labeled_pixel);
  }
}

TEST_CASE("label maps and RLE") {
  const Labeling l{0, 0, 1, 2, 2, 2, 1, 0};
  const auto runs = rle_encode(l);
  CHECK(runs.size() == 5);
  CHECK(runs[2] == std::pair<std::int32_t, std::size_t>{2, 3});
  CHECK(rle_decode(runs) == l);
  const RasterImage img = label_map_image(l, 4, 2);
  CHECK(labels_from_color_map(img) == l);
  std::uint8_t c0[3], c1[3];
  region_color(0, c0);
  region_color(1, c1);
  CHECK_FALSE((c0[0] == c1[0] && c0[1] == c1[1] && c0[2] == c1[2]));
}

TEST_CASE("ground truth loading") {
  const auto dir = std::filesystem::temp_directory_path() / "scpseg_gt_test";
  std::filesystem::create_directories(dir);
  const Labeling l{1, 1, 0, 0, 2, 2};
  save_png(label_map_image(l, 3, 2), dir / "gt.png");
  const GroundTruth g = load_ground_truth(dir / "gt.png");
  CHECK(g.width == 3);
  CHECK(g.k == 3);
  CHECK(adjusted_rand(g.labels, l) == 1.0);
  nlohmann::json j{{"width", 3}, {"height", 2}, {"labels_rle", rle_encode(l)}};
  std::ofstream(dir / "gt.json") << j.dump();
  const GroundTruth gj = load_ground_truth(dir / "gt.json");
  CHECK(gj.labels == l);
  std::ofstream(dir / "bad.json") << R"({"width": 3, "height": 3, "labels_rle": [[0, 2]]})";
  CHECK_THROWS_AS(load_ground_truth(dir / "bad.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("metric report JSON") {
  MetricReport r;
  r.runtime_seconds = {{"ncut", 0.5}, {"total", 0.75}};
  r.params_echo = R"({"n_s": 10})";
  auto j = nlohmann::json::parse(r.to_json());
  CHECK(j["ar_index"].is_null());
  CHECK(j["params"]["n_s"] == 10);
  r.has_ground_truth = true;
  r.ar_index = 0.25;
  j = nlohmann::json::parse(r.to_json());
  CHECK(j["ar_index"] == 0.25);
  CHECK(j["runtime_seconds"]["total"] == 0.75);
}
