#include "scpseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "scpseg/error.hpp"

namespace scpseg {

namespace {

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

/// Separable Gaussian blur with edge replication.
std::vector<double> blur(const std::vector<double>& src, std::size_t w, std::size_t h,
                         const std::vector<double>& kernel) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> tmp(src.size()), out(src.size());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        acc += kernel[d + radius] * src[y * w + clamp_index(static_cast<std::ptrdiff_t>(x) + d, w)];
      }
      tmp[y * w + x] = acc;
    }
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        acc += kernel[d + radius] * tmp[clamp_index(static_cast<std::ptrdiff_t>(y) + d, h) * w + x];
      }
      out[y * w + x] = acc;
    }
  }
  return out;
}

struct TextureChannels {
  std::vector<double> contrast, anisotropy, polarity;
};

TextureChannels texture_features(const std::vector<double>& gray, std::size_t w, std::size_t h,
                                 double scale) {
  const std::size_t n = w * h;
  std::vector<double> gx(n), gy(n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto xi = static_cast<std::ptrdiff_t>(x);
      const auto yi = static_cast<std::ptrdiff_t>(y);
      gx[y * w + x] = 0.5 * (gray[y * w + clamp_index(xi + 1, w)] - gray[y * w + clamp_index(xi - 1, w)]);
      gy[y * w + x] = 0.5 * (gray[clamp_index(yi + 1, h) * w + x] - gray[clamp_index(yi - 1, h) * w + x]);
    }
  }
  std::vector<double> xx(n), xy(n), yy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = gx[i] * gx[i];
    xy[i] = gx[i] * gy[i];
    yy[i] = gy[i] * gy[i];
  }
  const auto kernel = gaussian_kernel(scale);
  xx = blur(xx, w, h, kernel);
  xy = blur(xy, w, h, kernel);
  yy = blur(yy, w, h, kernel);

  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  TextureChannels t{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      const double a = xx[i], b = xy[i], c = yy[i];
      const double half_tr = 0.5 * (a + c);
      const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
      const double l1 = half_tr + disc;
      const double l2 = std::max(0.0, half_tr - disc);
      t.contrast[i] = l1 + l2;
      if (l1 <= 1e-12) continue;  // flat neighbourhood: anisotropy = polarity = 0
      t.anisotropy[i] = 1.0 - l2 / l1;

      const double theta = 0.5 * std::atan2(2.0 * b, a - c);
      const double nx = std::cos(theta), ny = std::sin(theta);
      double pos = 0.0, neg = 0.0;
      for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
        const std::size_t yy_i = clamp_index(static_cast<std::ptrdiff_t>(y) + dy, h);
        for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
          const std::size_t xx_i = clamp_index(static_cast<std::ptrdiff_t>(x) + dx, w);
          const std::size_t j = yy_i * w + xx_i;
          const double g = kernel[dy + radius] * kernel[dx + radius];
          const double proj = gx[j] * nx + gy[j] * ny;
          if (proj > 0) pos += g * proj;
          else neg -= g * proj;
        }
      }
      if (pos + neg > 0) t.polarity[i] = std::abs(pos - neg) / (pos + neg);
    }
  }
  return t;
}

}  // namespace

void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, double lab[3]) {
  const double rl = srgb_to_linear(r / 255.0);
  const double gl = srgb_to_linear(g / 255.0);
  const double bl = srgb_to_linear(b / 255.0);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  lab[0] = 116.0 * fy - 16.0;
  lab[1] = 500.0 * (fx - fy);
  lab[2] = 200.0 * (fy - fz);
}

std::size_t min_side_for_texture_scale(double texture_scale) {
  return 2 * static_cast<std::size_t>(std::ceil(3.0 * texture_scale)) + 1;
}

FeatureMap extract_features(const RasterImage& img, const FeatureConfig& cfg) {
  if (img.width == 0 || img.height == 0 || img.rgb.size() != 3 * img.pixel_count()) {
    throw Error(Errc::invalid_argument, "extract_features: malformed image");
  }
  if (!(cfg.smoothing_sigma > 0) || !(cfg.texture_scale > 0)) {
    throw Error(Errc::invalid_argument, "smoothing_sigma and texture_scale must be positive");
  }
  const std::size_t min_side = min_side_for_texture_scale(cfg.texture_scale);
  if (std::min(img.width, img.height) < min_side) {
    throw Error(Errc::image_too_small, "image side must be at least " + std::to_string(min_side) +
                                           " px for texture_scale " +
                                           std::to_string(cfg.texture_scale));
  }
  const std::size_t w = img.width, h = img.height, n = w * h;

  std::vector<double> lab_l(n), lab_a(n), lab_b(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lab[3];
    srgb_to_lab(img.rgb[3 * i], img.rgb[3 * i + 1], img.rgb[3 * i + 2], lab);
    lab_l[i] = lab[0];
    lab_a[i] = lab[1];
    lab_b[i] = lab[2];
  }
  const TextureChannels tex = texture_features(lab_l, w, h, cfg.texture_scale);
  const auto kernel = gaussian_kernel(cfg.smoothing_sigma);
  const std::vector<double> columns[FeatureMap::kDim] = {
      blur(lab_l, w, h, kernel), blur(lab_a, w, h, kernel), blur(lab_b, w, h, kernel),
      tex.contrast, tex.anisotropy, tex.polarity};

  FeatureMap fm;
  fm.n = n;
  fm.dim = FeatureMap::kDim;
  fm.data.resize(n * fm.dim);
  static constexpr const char* kNames[FeatureMap::kDim] = {"L*", "a*", "b*", "contrast",
                                                            "anisotropy", "polarity"};
  for (std::size_t c = 0; c < fm.dim; ++c) {
    const auto& col = columns[c];
    if (!cfg.standardize) {
      for (std::size_t i = 0; i < n; ++i) fm.data[i * fm.dim + c] = col[i];
      continue;
    }
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd <= 1e-9 * std::max(1.0, std::abs(mean))) {
      fm.zero_variance_columns.push_back(c);
      fm.warnings.push_back(std::string("ZeroVarianceFeature: column ") + kNames[c] +
                            " is constant, replaced by zeros");
      for (std::size_t i = 0; i < n; ++i) fm.data[i * fm.dim + c] = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) fm.data[i * fm.dim + c] = (col[i] - mean) / sd;
  }
  return fm;
}

}  // namespace scpseg
