#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scpseg/image.hpp"

namespace scpseg {

struct FeatureConfig {
  double smoothing_sigma = 2.0;  // Gaussian blur of the L*a*b* channels, px
  double texture_scale = 2.0;    // window scale of the second-moment matrix, px
  bool standardize = true;       // z-score every column
};

/// Per-pixel 6-d features: smoothed L*, a*, b*, contrast, anisotropy, polarity.
struct FeatureMap {
  static constexpr std::size_t kDim = 6;

  std::size_t n = 0;
  std::size_t dim = kDim;
  std::vector<double> data;  // n x dim, row-major

  /// Columns found constant and replaced by zeros during standardization.
  std::vector<std::size_t> zero_variance_columns;
  std::vector<std::string> warnings;

  const double* row(std::size_t i) const { return data.data() + i * dim; }
  double* row(std::size_t i) { return data.data() + i * dim; }
  double operator()(std::size_t i, std::size_t c) const { return data[i * dim + c]; }
};

/// Converts one sRGB triple to CIE L*a*b* (D65 white).
void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double lab[3]);

/// Smallest image side accepted for a given texture scale.
std::size_t min_side_for_texture_scale(double texture_scale);

FeatureMap extract_features(const RasterImage& img, const FeatureConfig& cfg = {});

}  // namespace scpseg
