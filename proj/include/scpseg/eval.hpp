#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scpseg/constraints.hpp"
#include "scpseg/image.hpp"
#include "scpseg/linalg.hpp"
#include "scpseg/selection.hpp"

namespace scpseg {

using Labeling = std::vector<std::int32_t>;

/// Adjusted Rand index from the contingency table. When the chance-corrected
/// denominator vanishes the result is 1 for identical partitions, else 0.
double adjusted_rand(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

/// Unadjusted Rand index, for reference only.
double rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b);

/// Voting over P_u: score(c) = sum of f_u(fwd(i), j) over voters i of class c.
/// Labeled pixels keep their label; ties go to the smaller class id.
Labeling infer_selected_labels(const DenseMatrix& f_u, const SelectionIndex& sel,
                               const LabeledPixels& lp);

struct GroundTruth {
  std::size_t width = 0;
  std::size_t height = 0;
  Labeling labels;
  std::size_t k = 0;
};

/// PNG label map (distinct colors are regions) or JSON RLE sidecar.
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Deterministic distinct palette color for a region id.
void region_color(std::int32_t label, std::uint8_t rgb[3]);
RasterImage label_map_image(std::span<const std::int32_t> labels, std::size_t width,
                            std::size_t height);
Labeling labels_from_color_map(const RasterImage& img);

/// Run-length encoding as [[label, run], ...].
std::vector<std::pair<std::int32_t, std::size_t>> rle_encode(std::span<const std::int32_t> labels);
Labeling rle_decode(const std::vector<std::pair<std::int32_t, std::size_t>>& runs);

struct MetricReport {
  double ar_index = 0.0;
  bool has_ground_truth = false;
  std::map<std::string, double> runtime_seconds;  // per stage plus "total"
  std::string params_echo;                         // JSON of the run configuration

  std::string to_json() const;
};

}  // namespace scpseg
