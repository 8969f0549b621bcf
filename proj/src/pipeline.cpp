#include "scpseg/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "scpseg/error.hpp"

namespace scpseg {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs `fn`, adds its wall time to `timings[stage]`, and returns its result.
template <class Fn>
auto timed(std::map<std::string, double>& timings, const std::string& stage, Fn&& fn) {
  const auto t0 = Clock::now();
  if constexpr (std::is_void_v<decltype(fn())>) {
    fn();
    timings[stage] += seconds_since(t0);
  } else {
    auto result = fn();
    timings[stage] += seconds_since(t0);
    return result;
  }
}

[[noreturn]] void config_fail(const std::string& msg) { throw Error(Errc::config_error, msg); }

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    config_fail("config key '" + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    config_fail("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

void apply_features(const json& j, FeatureConfig& f) {
  for (const auto& [key, v] : j.items()) {
    if (key == "smoothing_sigma") f.smoothing_sigma = get_as<double>(v, key);
    else if (key == "texture_scale") f.texture_scale = get_as<double>(v, key);
    else if (key == "standardize") f.standardize = get_as<bool>(v, key);
    else config_fail("unknown config key 'features." + key + "'");
  }
}

void apply_graph(const json& j, GraphConfig& g) {
  for (const auto& [key, v] : j.items()) {
    if (key == "window_radius") g.window_radius = get_count(v, key);
    else if (key == "sigma") g.sigma = v.is_null() ? std::nullopt : std::optional(get_as<double>(v, key));
    else config_fail("unknown config key 'graph." + key + "'");
  }
}

void apply_spectral(const json& j, SpectralConfig& s) {
  for (const auto& [key, v] : j.items()) {
    if (key == "eig_tol") s.eig_tol = get_as<double>(v, key);
    else if (key == "eig_max_iter") s.eig_max_iter = get_count(v, key);
    else if (key == "n_eigenvectors") s.n_eigenvectors = get_count(v, key);
    else if (key == "split_candidates") s.split_candidates = get_count(v, key);
    else if (key == "seed") s.seed = get_as<std::uint64_t>(v, key);
    else if (key == "kmeans_max_iter") s.kmeans_max_iter = get_count(v, key);
    else if (key == "k_way_method") {
      const auto name = get_as<std::string>(v, key);
      if (name == "embedding") s.k_way_method = KWayMethod::embedding;
      else if (name == "recursive") s.k_way_method = KWayMethod::recursive;
      else config_fail("k_way_method must be 'embedding' or 'recursive'");
    } else {
      config_fail("unknown config key 'spectral." + key + "'");
    }
  }
}

void apply_run(const json& j, RunConfig& c) {
  if (!j.is_object()) config_fail("run configuration must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "image") c.image = get_as<std::string>(v, key);
    else if (key == "scribbles") c.scribbles = get_as<std::string>(v, key);
    else if (key == "ground_truth") c.ground_truth = get_as<std::string>(v, key);
    else if (key == "method") {
      try {
        c.method = parse_method(get_as<std::string>(v, key));
      } catch (const Error& e) {
        config_fail(e.what());
      }
    }
    else if (key == "n_s" || key == "ns") c.n_s = get_count(v, key);
    else if (key == "k") c.k = get_count(v, key);
    else if (key == "alpha") c.alpha = get_as<double>(v, key);
    else if (key == "beta") c.beta = get_as<double>(v, key);
    else if (key == "eps") c.eps = get_as<double>(v, key);
    else if (key == "lambda") c.lambda = get_as<double>(v, key);
    else if (key == "k_regions") c.k_regions = get_count(v, key);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "constraint_budget") {
      c.constraint_budget = v.is_null() ? std::nullopt : std::optional(get_count(v, key));
    }
    else if (key == "features") apply_features(v, c.features);
    else if (key == "graph") apply_graph(v, c.graph);
    else if (key == "spectral") apply_spectral(v, c.spectral);
    else if (key == "inner_tol") c.inner_tol = get_as<double>(v, key);
    else if (key == "inner_max_iter") c.inner_max_iter = get_count(v, key);
    else if (key == "outer_tol") c.outer_tol = get_as<double>(v, key);
    else if (key == "outer_max_iter") c.outer_max_iter = get_count(v, key);
    else if (key == "out") c.out = get_as<std::string>(v, key);
    else if (key == "dump_graph") c.dump_graph = get_as<std::string>(v, key);
    else if (key == "load_graph") c.load_graph = get_as<std::string>(v, key);
    else if (key == "dump_propagation") c.dump_propagation = get_as<std::string>(v, key);
    else config_fail("unknown config key '" + key + "'");
  }
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    config_fail(what + " is not valid JSON: " + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

Segmentation cut(const SparseWeightMatrix& w, const RunConfig& cfg) {
  SpectralConfig sc = cfg.spectral;
  sc.seed ^= cfg.seed;
  if (cfg.k_regions == 2) return two_way_cut(w, sc);
  return k_way_cut(w, cfg.k_regions, sc);
}

ConstraintSet constraints_of(const ConstraintFile& cf, const RunConfig& cfg) {
  if (cf.explicit_pairs) return *cf.explicit_pairs;
  return derive_constraints(cf.labeled, cfg.constraint_budget, cfg.seed ^ 0xc045a1ULL);
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::ncut: return "ncut";
    case Method::ncut_sl: return "ncut_sl";
    case Method::ncut_scp: return "ncut_scp";
  }
  return "ncut";
}

Method parse_method(std::string_view name) {
  if (name == "ncut") return Method::ncut;
  if (name == "ncut_sl") return Method::ncut_sl;
  if (name == "ncut_scp") return Method::ncut_scp;
  throw Error(Errc::config_error,
              "unknown method '" + std::string(name) + "' (expected ncut, ncut_sl or ncut_scp)");
}

ScpParams RunConfig::scp_params() const {
  ScpParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.eps = eps;
  p.inner_tol = inner_tol;
  p.inner_max_iter = inner_max_iter;
  p.outer_tol = outer_tol;
  p.outer_max_iter = outer_max_iter;
  return p;
}

void RunConfig::validate() const {
  try {
    scp_params().validate();
    fusion_params().validate();
    spectral.validate();
  } catch (const Error& e) {
    config_fail(e.what());
  }
  if (k == 0) config_fail("k must be at least 1");
  if (k_regions < 2) config_fail("k_regions must be at least 2");
  if (!(features.smoothing_sigma > 0) || !(features.texture_scale > 0)) {
    config_fail("feature scales must be positive");
  }
  if (graph.sigma && !(*graph.sigma > 0)) config_fail("graph.sigma must be positive");
}

RunConfig run_config_from_json(const std::string& json_text, RunConfig base) {
  apply_run(parse_json(json_text, "run configuration"), base);
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  try {
    return run_config_from_json(read_text(path), std::move(base));
  } catch (const Error& e) {
    if (e.code() == Errc::io_error) config_fail(e.what());
    throw;
  }
}

std::string run_config_to_json(const RunConfig& c) {
  ojson j;
  j["image"] = c.image;
  j["scribbles"] = c.scribbles;
  j["ground_truth"] = c.ground_truth;
  j["method"] = method_name(c.method);
  j["n_s"] = c.n_s;
  j["k"] = c.k;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["eps"] = c.eps;
  j["lambda"] = c.lambda;
  j["k_regions"] = c.k_regions;
  j["seed"] = c.seed;
  j["constraint_budget"] = c.constraint_budget ? ojson(*c.constraint_budget) : ojson(nullptr);
  j["features"] = {{"smoothing_sigma", c.features.smoothing_sigma},
                   {"texture_scale", c.features.texture_scale},
                   {"standardize", c.features.standardize}};
  j["graph"] = {{"window_radius", c.graph.window_radius},
                {"sigma", c.graph.sigma ? ojson(*c.graph.sigma) : ojson(nullptr)}};
  j["spectral"] = {{"eig_tol", c.spectral.eig_tol},
                   {"eig_max_iter", c.spectral.eig_max_iter},
                   {"n_eigenvectors", c.spectral.n_eigenvectors},
                   {"split_candidates", c.spectral.split_candidates},
                   {"seed", c.spectral.seed},
                   {"kmeans_max_iter", c.spectral.kmeans_max_iter},
                   {"k_way_method", c.spectral.k_way_method == KWayMethod::recursive
                                        ? "recursive"
                                        : "embedding"}};
  j["inner_tol"] = c.inner_tol;
  j["inner_max_iter"] = c.inner_max_iter;
  j["outer_tol"] = c.outer_tol;
  j["outer_max_iter"] = c.outer_max_iter;
  j["out"] = c.out;
  j["dump_graph"] = c.dump_graph;
  j["load_graph"] = c.load_graph;
  j["dump_propagation"] = c.dump_propagation;
  return j.dump();
}

PreparedImage prepare_image(RasterImage image, const RunConfig& cfg) {
  PreparedImage p;
  p.image = std::move(image);
  if (!cfg.load_graph.empty()) {
    p.w = timed(p.timings, "graph", [&] { return load_graph(cfg.load_graph); });
    if (p.w.n() != p.image.pixel_count()) {
      throw Error(Errc::dimension_mismatch, "loaded graph has " + std::to_string(p.w.n()) +
                                                " nodes, image has " +
                                                std::to_string(p.image.pixel_count()));
    }
  } else {
    p.features = timed(p.timings, "features", [&] { return extract_features(p.image, cfg.features); });
    KnnGraph g = timed(p.timings, "graph", [&] {
      return build_knn_graph_with_sigma(p.features, p.image.width, p.image.height, cfg.k, cfg.graph);
    });
    p.w = std::move(g.w);
    p.sigma = g.sigma;
  }
  if (!cfg.dump_graph.empty()) save_graph(p.w, cfg.dump_graph);
  return p;
}

RunOutput segment_prepared(const PreparedImage& prepared, const ConstraintFile& constraints,
                           const RunConfig& cfg,
                           const std::optional<std::vector<std::uint32_t>>& fixed_sample,
                           const GroundTruth* gt) {
  cfg.validate();
  const auto t_start = Clock::now();
  const SparseWeightMatrix& w = prepared.w;
  const std::size_t n = w.n();
  RunOutput out;
  out.method = cfg.method;
  auto& timings = out.report.runtime_seconds;
  for (const auto& [stage, t] : prepared.timings) timings[stage] = t;

  if (cfg.method == Method::ncut) {
    out.segmentation = timed(timings, "ncut", [&] { return cut(w, cfg); });
  } else {
    const ConstraintSet cs = timed(timings, "constraints", [&] { return constraints_of(constraints, cfg); });
    for (const auto& [a, b] : cs.must) {
      if (a >= n || b >= n) throw Error(Errc::index_out_of_range, "constraint pixel outside image");
    }
    for (const auto& [a, b] : cs.cannot) {
      if (a >= n || b >= n) throw Error(Errc::index_out_of_range, "constraint pixel outside image");
    }
    if (cfg.method == Method::ncut_sl) {
      const SparseWeightMatrix edited =
          timed(timings, "fusion", [&] { return spectral_learning_edit(w, cs); });
      out.segmentation = timed(timings, "ncut", [&] { return cut(edited, cfg); });
    } else {
      const SelectionIndex sel = timed(timings, "selection", [&] {
        const auto p_c = cs.constrained_pixels();
        if (fixed_sample) return SelectionIndex::from_sets(n, p_c, *fixed_sample);
        if (cfg.n_s + p_c.size() > n) {
          config_fail("n_s + n_c = " + std::to_string(cfg.n_s + p_c.size()) +
                      " exceeds the pixel count " + std::to_string(n));
        }
        return select_pixels(n, cs, cfg.n_s, cfg.seed);
      });
      const ConstraintMatrix z = timed(timings, "constraints", [&] { return build_z(cs, sel); });
      const SparseWeightMatrix w_u = timed(timings, "selection", [&] { return restrict(w, sel); });
      PropagationResult prop = timed(timings, "propagation", [&] {
        return propagate(normalize(w_u), z, cfg.scp_params());
      });
      const SparseWeightMatrix w_new = timed(timings, "fusion", [&] {
        return patch_weights(w, adjust_weights(prop.f_u, w_u, cfg.fusion_params()), sel);
      });
      out.segmentation = timed(timings, "ncut", [&] { return cut(w_new, cfg); });
      if (!cfg.dump_propagation.empty()) save_propagation(prop.f_u, cfg.dump_propagation);
      if (constraints.has_labels()) {
        out.selected_labels = timed(timings, "eval", [&] {
          return infer_selected_labels(prop.f_u, sel, constraints.labeled);
        });
      }
      out.selection = sel;
      out.propagation = std::move(prop);
    }
    out.segmentation.warnings.insert(out.segmentation.warnings.begin(), cs.warnings.begin(),
                                     cs.warnings.end());
  }

  if (gt) {
    timed(timings, "eval", [&] {
      if (gt->labels.size() != n) {
        throw Error(Errc::length_mismatch, "ground truth size does not match the image");
      }
      out.report.ar_index = adjusted_rand(out.segmentation.labels, gt->labels);
      out.report.has_ground_truth = true;
    });
  }
  double prepared_total = 0.0;
  for (const auto& [stage, t] : prepared.timings) prepared_total += t;
  timings["total"] = prepared_total + seconds_since(t_start);
  out.report.params_echo = run_config_to_json(cfg);
  return out;
}

RunOutput run_on_image(const RasterImage& image, const ConstraintFile& constraints,
                       const RunConfig& cfg, const GroundTruth* gt) {
  cfg.validate();
  const PreparedImage prepared = prepare_image(image, cfg);
  return segment_prepared(prepared, constraints, cfg, std::nullopt, gt);
}

RunOutput run_scp_segmentation(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.image.empty()) config_fail("no image given");
  const RasterImage image = load_image(cfg.image);
  ConstraintFile cf;
  if (!cfg.scribbles.empty()) cf = load_constraint_file(cfg.scribbles, image.width, image.height);
  std::optional<GroundTruth> gt;
  if (!cfg.ground_truth.empty()) {
    gt = load_ground_truth(cfg.ground_truth);
    if (gt->width != image.width || gt->height != image.height) {
      throw Error(Errc::dimension_mismatch, "ground truth size does not match the image");
    }
  }
  return run_on_image(image, cf, cfg, gt ? &*gt : nullptr);
}

std::string segmentation_json(const Segmentation& seg, std::size_t width, std::size_t height) {
  ojson j;
  j["width"] = width;
  j["height"] = height;
  j["k"] = seg.k;
  j["ncut_value"] = seg.ncut_value;
  ojson runs = ojson::array();
  for (const auto& [label, run] : rle_encode(seg.labels)) runs.push_back({label, run});
  j["labels_rle"] = std::move(runs);
  j["warnings"] = seg.warnings;
  return j.dump();
}

void write_run_outputs(const RunOutput& out, const RunConfig& cfg, std::size_t width,
                       std::size_t height) {
  const std::filesystem::path dir = cfg.out.empty() ? std::filesystem::path(".") : std::filesystem::path(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  save_png(label_map_image(out.segmentation.labels, width, height), dir / "labels.png");
  ojson result = ojson::parse(segmentation_json(out.segmentation, width, height));
  result["method"] = method_name(out.method);
  const std::string text = result.dump(2) + "\n";
  write_file_bytes(dir / "result.json",
                   {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  const std::string report = out.report.to_json() + "\n";
  write_file_bytes(dir / "report.json",
                   {reinterpret_cast<const std::uint8_t*>(report.data()), report.size()});
}

std::string BenchResult::to_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << "image,method,n_s,ari,seconds\n";
  for (const auto* list : {&rows, &summary}) {
    for (const auto& r : *list) {
      os << r.image << ',' << method_name(r.method) << ',' << r.n_s << ',' << std::fixed << r.ari
         << ',' << r.seconds << '\n';
      os.unsetf(std::ios::fixed);
    }
  }
  return os.str();
}

double BenchResult::mean_ari(Method m, std::optional<std::size_t> n_s) const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows) {
    if (r.method != m || (n_s && r.n_s != *n_s)) continue;
    sum += r.ari;
    ++count;
  }
  if (count == 0) throw Error(Errc::invalid_argument, "no benchmark rows for that method");
  return sum / static_cast<double>(count);
}

namespace {

std::string resolve(const std::filesystem::path& base_dir, const std::string& p) {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base_dir / p).string();
}

std::vector<BenchImage> parse_bench_images(const json& list, const std::filesystem::path& dir) {
  if (!list.is_array()) config_fail("'images' must be an array");
  std::vector<BenchImage> images;
  for (const auto& item : list) {
    BenchImage bi;
    for (const auto& [key, v] : item.items()) {
      if (key == "name") bi.name = get_as<std::string>(v, key);
      else if (key == "image") bi.image = resolve(dir, get_as<std::string>(v, key));
      else if (key == "scribbles") bi.scribbles = resolve(dir, get_as<std::string>(v, key));
      else if (key == "ground_truth") {
        if (v.is_array()) {
          for (const auto& g : v) bi.ground_truths.push_back(resolve(dir, get_as<std::string>(g, key)));
        } else {
          bi.ground_truths.push_back(resolve(dir, get_as<std::string>(v, key)));
        }
      } else {
        config_fail("unknown config key 'images[]." + key + "'");
      }
    }
    if (bi.image.empty()) config_fail("benchmark image entry without 'image'");
    if (bi.name.empty()) bi.name = std::filesystem::path(bi.image).stem().string();
    images.push_back(std::move(bi));
  }
  return images;
}

}  // namespace

BenchConfig bench_config_from_json(const std::string& json_text,
                                   const std::filesystem::path& base_dir) {
  const json j = parse_json(json_text, "benchmark configuration");
  if (!j.is_object()) config_fail("benchmark configuration must be a JSON object");
  BenchConfig bc;
  for (const auto& [key, v] : j.items()) {
    if (key == "base") apply_run(v, bc.base);
    else if (key == "images") {
      auto more = parse_bench_images(v, base_dir);
      bc.images.insert(bc.images.end(), more.begin(), more.end());
    } else if (key == "manifest") {
      const std::filesystem::path mpath = resolve(base_dir, get_as<std::string>(v, key));
      std::string text;
      try {
        text = read_text(mpath);
      } catch (const Error& e) {
        config_fail(e.what());
      }
      const json m = parse_json(text, "manifest");
      auto more = parse_bench_images(m.at("images"), mpath.parent_path());
      bc.images.insert(bc.images.end(), more.begin(), more.end());
    } else if (key == "methods") {
      bc.methods.clear();
      for (const auto& name : v) bc.methods.push_back(parse_method(get_as<std::string>(name, key)));
    } else if (key == "ns_values") {
      for (const auto& x : v) bc.ns_values.push_back(get_count(x, key));
    } else if (key == "workers") {
      bc.workers = get_count(v, key);
    } else {
      config_fail("unknown config key '" + key + "'");
    }
  }
  return bc;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    config_fail(e.what());
  }
  return bench_config_from_json(text, path.parent_path());
}

BenchResult run_benchmark(const BenchConfig& bc) {
  bc.base.validate();
  const std::vector<std::size_t> ns_values =
      bc.ns_values.empty() ? std::vector<std::size_t>{bc.base.n_s} : bc.ns_values;
  for (const auto& im : bc.images) {
    if (im.ground_truths.empty()) {
      throw Error(Errc::missing_ground_truth, "benchmark image '" + im.name + "' has no ground truth");
    }
  }

  std::vector<std::vector<BenchRow>> per_image(bc.images.size());
  auto run_image = [&](std::size_t idx) {
    const BenchImage& im = bc.images[idx];
    const RasterImage image = load_image(im.image);
    ConstraintFile cf;
    if (!im.scribbles.empty()) cf = load_constraint_file(im.scribbles, image.width, image.height);
    std::vector<GroundTruth> gts;
    for (const auto& g : im.ground_truths) {
      gts.push_back(load_ground_truth(g));
      if (gts.back().labels.size() != image.pixel_count()) {
        throw Error(Errc::dimension_mismatch, "ground truth of '" + im.name + "' has the wrong size");
      }
    }
    RunConfig cfg = bc.base;
    cfg.image = im.image;
    cfg.out.clear();
    cfg.dump_graph.clear();
    cfg.load_graph.clear();
    cfg.dump_propagation.clear();
    const PreparedImage prepared = prepare_image(image, cfg);
    for (Method m : bc.methods) {
      cfg.method = m;
      std::optional<BenchRow> shared;  // baselines do not depend on n_s
      for (std::size_t ns : ns_values) {
        if (shared) {
          BenchRow r = *shared;
          r.n_s = ns;
          per_image[idx].push_back(r);
          continue;
        }
        cfg.n_s = ns;
        const RunOutput out = segment_prepared(prepared, cf, cfg);
        double ari = 0.0;
        for (const auto& gt : gts) ari += adjusted_rand(out.segmentation.labels, gt.labels);
        ari /= static_cast<double>(gts.size());
        BenchRow row{im.name, m, ns, ari, out.report.runtime_seconds.at("total")};
        per_image[idx].push_back(row);
        if (m != Method::ncut_scp) shared = row;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(bc.workers, bc.images.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < bc.images.size(); ++i) run_image(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr failure;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t idx;
          {
            std::lock_guard lock(mu);
            if (failure || next >= bc.images.size()) return;
            idx = next++;
          }
          try {
            run_image(idx);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  BenchResult result;
  for (auto& rows : per_image) result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  for (Method m : bc.methods) {
    for (std::size_t ns : ns_values) {
      double ari = 0.0, secs = 0.0;
      std::size_t count = 0;
      for (const auto& r : result.rows) {
        if (r.method != m || r.n_s != ns) continue;
        ari += r.ari;
        secs += r.seconds;
        ++count;
      }
      if (count == 0) continue;
      result.summary.push_back({"mean", m, ns, ari / static_cast<double>(count),
                                secs / static_cast<double>(count)});
    }
  }
  return result;
}

}  // namespace scpseg
