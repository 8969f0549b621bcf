#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scpseg/constraints.hpp"
#include "scpseg/eval.hpp"
#include "scpseg/features.hpp"
#include "scpseg/fusion.hpp"
#include "scpseg/graph.hpp"
#include "scpseg/ncut.hpp"
#include "scpseg/scp.hpp"

namespace scpseg {

enum class Method { ncut, ncut_sl, ncut_scp };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct RunConfig {
  std::string image;
  std::string scribbles;
  std::string ground_truth;
  Method method = Method::ncut_scp;
  std::size_t n_s = 2500;
  std::size_t k = 60;
  double alpha = 0.9;
  double beta = 0.1;
  double eps = 1e-7;
  double lambda = 0.001;
  std::size_t k_regions = 2;
  std::uint64_t seed = 7;
  std::optional<std::size_t> constraint_budget;
  FeatureConfig features;
  GraphConfig graph;
  SpectralConfig spectral;
  double inner_tol = 1e-6;
  std::size_t inner_max_iter = 1000;
  double outer_tol = 1e-5;
  std::size_t outer_max_iter = 10;
  std::string out;
  std::string dump_graph;
  std::string load_graph;
  std::string dump_propagation;

  ScpParams scp_params() const;
  FusionParams fusion_params() const { return {lambda}; }
  void validate() const;
};

/// Applies the keys present in `json_text` on top of `base`; unknown keys
/// are a config_error.
RunConfig run_config_from_json(const std::string& json_text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string run_config_to_json(const RunConfig& cfg);

/// Image-dependent products that do not depend on the constraints.
struct PreparedImage {
  RasterImage image;
  FeatureMap features;
  SparseWeightMatrix w;
  double sigma = 0.0;
  std::map<std::string, double> timings;
};

PreparedImage prepare_image(RasterImage image, const RunConfig& cfg);

struct RunOutput {
  Segmentation segmentation;
  MetricReport report;
  Method method = Method::ncut;
  std::optional<SelectionIndex> selection;
  std::optional<PropagationResult> propagation;
  std::vector<std::int32_t> selected_labels;  // voting over P_u, ncut_scp only
};

/// Steps after graph construction. `fixed_sample`, when given, replaces the
/// random P_s draw (interactive sessions keep it stable).
RunOutput segment_prepared(const PreparedImage& prepared, const ConstraintFile& constraints,
                           const RunConfig& cfg,
                           const std::optional<std::vector<std::uint32_t>>& fixed_sample = {},
                           const GroundTruth* gt = nullptr);

/// features -> W -> selection -> Z_u -> SCP -> fusion -> patch -> NCut.
RunOutput run_scp_segmentation(const RunConfig& cfg);

RunOutput run_on_image(const RasterImage& image, const ConstraintFile& constraints,
                       const RunConfig& cfg, const GroundTruth* gt = nullptr);

/// Writes labels.png, result.json and report.json into cfg.out.
void write_run_outputs(const RunOutput& out, const RunConfig& cfg, std::size_t width,
                       std::size_t height);
std::string segmentation_json(const Segmentation& seg, std::size_t width, std::size_t height);

struct BenchImage {
  std::string name;
  std::string image;
  std::string scribbles;
  std::vector<std::string> ground_truths;  // ARI is averaged over all of them
};

struct BenchConfig {
  RunConfig base;
  std::vector<BenchImage> images;
  std::vector<Method> methods{Method::ncut, Method::ncut_sl, Method::ncut_scp};
  std::vector<std::size_t> ns_values;  // empty: base.n_s only
  std::size_t workers = 1;
};

struct BenchRow {
  std::string image;
  Method method;
  std::size_t n_s;
  double ari;
  double seconds;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<BenchRow> summary;  // image == "mean"

  std::string to_csv() const;
  double mean_ari(Method m, std::optional<std::size_t> n_s = std::nullopt) const;
};

BenchConfig bench_config_from_json(const std::string& json_text,
                                   const std::filesystem::path& base_dir = {});
BenchConfig load_bench_config(const std::filesystem::path& path);

BenchResult run_benchmark(const BenchConfig& cfg);

}  // namespace scpseg
