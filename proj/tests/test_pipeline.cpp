#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "oracles.hpp"
#include "scpseg/error.hpp"
#include "scpseg/pipeline.hpp"
#include "scpseg/synth.hpp"

using namespace scpseg;
namespace fs = std::filesystem;

namespace {

SynthSample small_sample(std::size_t index = 0) {
  SynthConfig sc;
  sc.width = 32;
  sc.height = 32;
  return make_synth_sample(sc, index);
}

RunConfig small_config(Method m) {
  RunConfig cfg;
  cfg.method = m;
  cfg.n_s = 300;
  cfg.k = 20;
  cfg.graph.window_radius = 4;
  return cfg;
}

ConstraintFile scribbles_of(const SynthSample& s) {
  ConstraintFile cf;
  cf.labeled = s.scribbles;
  cf.label_names = {"background", "object"};
  return cf;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::invalid_argument;
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("scpseg_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("run config defaults") {
  const RunConfig cfg;
  CHECK(cfg.k == 60);
  CHECK(cfg.alpha == 0.9);
  CHECK(cfg.beta == 0.1);
  CHECK(cfg.eps == 1e-7);
  CHECK(cfg.lambda == 0.001);
  CHECK(cfg.n_s == 2500);
  CHECK(cfg.method == Method::ncut_scp);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("run config JSON") {
  const RunConfig cfg = run_config_from_json(
      R"({"method": "ncut_sl", "ns": 123, "alpha": 0.8, "graph": {"window_radius": 3, "sigma": 0.5},
          "spectral": {"k_way_method": "recursive"}, "features": {"standardize": false}})");
  CHECK(cfg.method == Method::ncut_sl);
  CHECK(cfg.n_s == 123);
  CHECK(cfg.alpha == 0.8);
  CHECK(cfg.graph.window_radius == 3);
  CHECK(cfg.graph.sigma == std::optional<double>(0.5));
  CHECK(cfg.spectral.k_way_method == KWayMethod::recursive);
  CHECK_FALSE(cfg.features.standardize);
  const RunConfig back = run_config_from_json(run_config_to_json(cfg));
  CHECK(run_config_to_json(back) == run_config_to_json(cfg));

  CHECK(code_of([] { run_config_from_json(R"({"n_sz": 3})"); }) == Errc::config_error);
  CHECK(code_of([] { run_config_from_json(R"({"graph": {"radius": 3}})"); }) == Errc::config_error);
  CHECK(code_of([] { run_config_from_json(R"({"method": "kmeans"})"); }) == Errc::config_error);
  CHECK(code_of([] { run_config_from_json("[1, 2"); }) == Errc::config_error);
  CHECK(code_of([] { run_config_from_json(R"({"alpha": 1.5})").validate(); }) == Errc::config_error);
  CHECK(code_of([] { load_run_config("/nonexistent/cfg.json"); }) == Errc::config_error);
  CHECK(parse_method("ncut_scp") == Method::ncut_scp);
  CHECK(method_name(Method::ncut) == "ncut");
}

TEST_CASE("every method runs and is deterministic") {
  const SynthSample s = small_sample();
  for (Method m : {Method::ncut, Method::ncut_sl, Method::ncut_scp}) {
    const RunConfig cfg = small_config(m);
    const RunOutput a = run_on_image(s.image, scribbles_of(s), cfg, &s.truth);
    const RunOutput b = run_on_image(s.image, scribbles_of(s), cfg, &s.truth);
    CHECK(a.segmentation == b.segmentation);
    CHECK(a.report.ar_index == b.report.ar_index);
    CHECK(a.report.has_ground_truth);
    CHECK(a.segmentation.labels.size() == 32 * 32);
    CHECK(a.segmentation.k == 2);
    CHECK(a.method == m);
    CHECK(segmentation_json(a.segmentation, 32, 32) == segmentation_json(b.segmentation, 32, 32));
    if (m == Method::ncut_scp) {
      REQUIRE(a.propagation);
      REQUIRE(a.selection);
      CHECK(a.selection->n_s() == 300);
      CHECK(a.selection->n_c() == s.scribbles.size());
      CHECK(a.selection->n_u() <= 300 + s.scribbles.size());
      CHECK(a.propagation->meta.outer_iter < 10);
      CHECK(a.selected_labels.size() == a.selection->n_u());
    }
  }
}

TEST_CASE("plain NCut ignores the constraints") {
  const SynthSample s = small_sample(1);
  const RunConfig cfg = small_config(Method::ncut);
  const RunOutput with = run_on_image(s.image, scribbles_of(s), cfg);
  const RunOutput without = run_on_image(s.image, ConstraintFile{}, cfg);
  CHECK(with.segmentation == without.segmentation);
  CHECK_FALSE(with.propagation);
  CHECK(with.report.runtime_seconds.count("propagation") == 0);
  const PreparedImage prep = prepare_image(s.image, cfg);
  CHECK(two_way_cut(prep.w, [&] {
    SpectralConfig sc = cfg.spectral;
    sc.seed ^= cfg.seed;
    return sc;
  }()).labels == with.segmentation.labels);
}

TEST_CASE("without constraints SCP clamps selected weights at lambda") {
  const SynthSample s = small_sample(2);
  RunConfig cfg = small_config(Method::ncut_scp);
  cfg.lambda = 0.05;
  const PreparedImage prep = prepare_image(s.image, cfg);
  const std::size_t n = prep.w.n();
  const SelectionIndex sel = select_pixels(n, {}, cfg.n_s, cfg.seed);
  const DenseMatrix w_u = restrict(prep.w, sel).to_dense();
  // the minimizer for x = 0 from a scalar grid search is min(y, lambda)
  for (double y : {0.0, 0.01, 0.05, 0.2, 0.9}) {
    CHECK(oracle::grid_soft_thr(0.0, y, cfg.lambda, 1e-5) == doctest::Approx(std::min(y, cfg.lambda)).epsilon(1e-4));
  }
  std::vector<Triplet> clamped;
  for (Eigen::Index i = 0; i < w_u.rows(); ++i)
    for (Eigen::Index j = 0; j < w_u.cols(); ++j)
      if (w_u(i, j) > 0) clamped.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), std::min(w_u(i, j), cfg.lambda)});
  const SparseWeightMatrix expect_w = patch_weights(prep.w, SparseWeightMatrix::from_triplets(sel.n_u(), clamped), sel);
  const RunOutput out = segment_prepared(prep, ConstraintFile{}, cfg);
  REQUIRE(out.propagation);
  CHECK(out.propagation->f_u.cwiseAbs().maxCoeff() == 0.0);
  const Segmentation expect = two_way_cut(expect_w, [&] {
    SpectralConfig sc = cfg.spectral;
    sc.seed ^= cfg.seed;
    return sc;
  }());
  CHECK(out.segmentation.labels == expect.labels);
}

TEST_CASE("large lambda without constraints degrades to plain NCut") {
  for (std::size_t idx : {3, 4}) {
    const SynthSample s = small_sample(idx);
    RunConfig cfg = small_config(Method::ncut_scp);
    cfg.lambda = 1.0;
    const PreparedImage prep = prepare_image(s.image, cfg);
    const RunOutput scp = segment_prepared(prep, ConstraintFile{}, cfg);
    cfg.method = Method::ncut;
    const RunOutput plain = segment_prepared(prep, ConstraintFile{}, cfg);
    CHECK(scp.segmentation.labels == plain.segmentation.labels);
  }
}

TEST_CASE("stage timings add up to the total") {
  const SynthSample s = small_sample(5);
  const RunOutput out = run_on_image(s.image, scribbles_of(s), small_config(Method::ncut_scp));
  const auto& t = out.report.runtime_seconds;
  double sum = 0;
  for (const auto& [name, v] : t)
    if (name != "total") sum += v;
  for (const char* stage : {"features", "graph", "constraints", "propagation", "fusion", "ncut"}) {
    CHECK(t.count(stage) == 1);
  }
  CHECK(std::abs(sum - t.at("total")) <= 0.05 * t.at("total"));
}

TEST_CASE("sample larger than the image is a config error") {
  const SynthSample s = small_sample();
  RunConfig cfg = small_config(Method::ncut_scp);
  cfg.n_s = 32 * 32;
  CHECK(code_of([&] { run_on_image(s.image, scribbles_of(s), cfg); }) == Errc::config_error);
}

TEST_CASE("file based run writes its outputs") {
  const fs::path dir = scratch("pipeline_run");
  SynthConfig sc;
  sc.width = sc.height = 32;
  sc.count = 1;
  write_synth_corpus(sc, dir / "corpus");
  RunConfig cfg = small_config(Method::ncut_scp);
  cfg.image = (dir / "corpus" / "image_00.png").string();
  cfg.scribbles = (dir / "corpus" / "scribbles_00.json").string();
  cfg.ground_truth = (dir / "corpus" / "truth_00.png").string();
  cfg.out = (dir / "out").string();
  cfg.dump_graph = (dir / "g.bin").string();
  const RunOutput a = run_scp_segmentation(cfg);
  write_run_outputs(a, cfg, 32, 32);
  for (const char* f : {"labels.png", "result.json", "report.json"}) CHECK(fs::exists(dir / "out" / f));
  std::ifstream rf(dir / "out" / "result.json");
  const auto result = nlohmann::json::parse(rf);
  CHECK(result["k"] == 2);
  CHECK(result["method"] == "ncut_scp");
  CHECK(rle_decode(result["labels_rle"].get<std::vector<std::pair<std::int32_t, std::size_t>>>()) == a.segmentation.labels);
  CHECK(a.report.has_ground_truth);

  RunConfig reload = cfg;
  reload.dump_graph.clear();
  reload.load_graph = cfg.dump_graph;
  const RunOutput b = run_scp_segmentation(reload);
  CHECK(b.segmentation == a.segmentation);

  RunConfig missing = cfg;
  missing.image = (dir / "nope.png").string();
  CHECK(code_of([&] { run_scp_segmentation(missing); }) == Errc::io_error);
  fs::remove_all(dir);
}

TEST_CASE("benchmark table shape") {
  const fs::path dir = scratch("bench");
  SynthConfig sc;
  sc.width = sc.height = 32;
  sc.count = 2;
  write_synth_corpus(sc, dir);
  nlohmann::json j{{"base", nlohmann::json::parse(run_config_to_json(small_config(Method::ncut)))},
                   {"manifest", "manifest.json"},
                   {"methods", {"ncut", "ncut_scp"}},
                   {"workers", 2}};
  std::ofstream(dir / "bench.json") << j.dump();
  BenchConfig cfg = load_bench_config(dir / "bench.json");
  REQUIRE(cfg.images.size() == 2);
  const auto both_images = cfg.images;
  cfg.images.resize(1);
  const BenchResult r = run_benchmark(cfg);
  CHECK(r.rows.size() == 2);
  CHECK(r.summary.size() == 2);
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("image,method,n_s,ari,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(r.mean_ari(Method::ncut) == r.rows[0].ari);

  cfg.images = both_images;
  cfg.ns_values = {100, 200};
  const BenchResult sweep = run_benchmark(cfg);
  CHECK(sweep.rows.size() == 2 * 2 * 2);
  CHECK(sweep.summary.size() == 4);
  cfg.workers = 1;
  const BenchResult serial = run_benchmark(cfg);
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].image == sweep.rows[i].image);
    CHECK(serial.rows[i].ari == sweep.rows[i].ari);
  }
  cfg.images[0].ground_truths.clear();
  CHECK(code_of([&] { run_benchmark(cfg); }) == Errc::missing_ground_truth);
  fs::remove_all(dir);
}

TEST_CASE("synthetic corpus") {
  SynthConfig sc;
  const SynthSample a = make_synth_sample(sc, 3), b = make_synth_sample(sc, 3);
  CHECK(a.image.rgb == b.image.rgb);
  CHECK(a.truth.labels == b.truth.labels);
  CHECK(a.image.width == 64);
  const auto object = std::count(a.truth.labels.begin(), a.truth.labels.end(), 1);
  CHECK(object > 300);
  CHECK(object < 64 * 64 - 300);
  CHECK(a.scribbles.size() == 2 * sc.labeled_per_region);
  for (const auto& e : a.scribbles.entries) CHECK(a.truth.labels[e.pixel] == e.label);
  CHECK(make_synth_sample(sc, 4).image.rgb != a.image.rgb);
  SynthConfig other = sc;
  other.seed = 2;
  CHECK(make_synth_sample(other, 3).image.rgb != a.image.rgb);

  const fs::path dir = scratch("synth");
  sc.count = 2;
  write_synth_corpus(sc, dir);
  std::ifstream mf(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["images"].size() == 2);
  const GroundTruth gt = load_ground_truth(dir / "truth_01.png");
  CHECK(adjusted_rand(gt.labels, make_synth_sample(sc, 1).truth.labels) == 1.0);
  const ConstraintFile cf = load_constraint_file(dir / "scribbles_01.json", 64, 64);
  CHECK(cf.labeled.size() == 2 * sc.labeled_per_region);
  fs::remove_all(dir);
}

TEST_CASE("shipped corpus matches the generator") {
  const fs::path shipped = SCPSEG_DATA_DIR;
  const fs::path dir = scratch("shipped");
  write_synth_corpus(SynthConfig{}, dir);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path name = entry.path().filename();
    INFO(name.string());
    REQUIRE(fs::exists(shipped / name));
    CHECK(read_file_bytes(shipped / name) == read_file_bytes(entry.path()));
    ++files;
  }
  CHECK(files == 3 * 20 + 1);
  fs::remove_all(dir);
}
