#include "scpseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <json.hpp>

#include "scpseg/error.hpp"
#include "scpseg/rng.hpp"

namespace scpseg {

namespace {

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

struct Blob {
  double cx, cy, r;
  double amp[3], phase[3];

  double radius(double theta) const {
    double s = 1.0;
    for (int h = 0; h < 3; ++h) s += amp[h] * std::sin((h + 2) * theta + phase[h]);
    return r * s;
  }

  /// Signed distance proxy: positive inside.
  double inside(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    return radius(std::atan2(dy, dx)) - std::hypot(dx, dy);
  }
};

std::string two_digits(std::size_t i) {
  std::string s = std::to_string(i);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

SynthSample make_synth_sample(const SynthConfig& cfg, std::size_t index) {
  const std::size_t w = cfg.width, h = cfg.height;
  if (w < 16 || h < 16) throw Error(Errc::invalid_argument, "synthetic images need at least 16x16");
  Rng rng(cfg.seed * 0x9E3779B97F4A7C15ULL + index + 1);
  const double side = static_cast<double>(std::min(w, h));

  Blob blob{};
  blob.r = side * rng.uniform(0.25, 0.36);
  blob.cx = rng.uniform(blob.r * 1.3, static_cast<double>(w) - blob.r * 1.3);
  blob.cy = rng.uniform(blob.r * 1.3, static_cast<double>(h) - blob.r * 1.3);
  for (int k = 0; k < 3; ++k) {
    blob.amp[k] = rng.uniform(0.0, 0.12);
    blob.phase[k] = rng.uniform(0.0, 2 * std::numbers::pi);
  }

  // The background is split into two zones by a straight line through a
  // random point; the zones differ in color and texture more than the
  // object differs from either of them.
  const double line_angle = rng.uniform(0.0, std::numbers::pi);
  const double lx = rng.uniform(0.3, 0.7) * static_cast<double>(w);
  const double ly = rng.uniform(0.3, 0.7) * static_cast<double>(h);
  const double nx = std::cos(line_angle), ny = std::sin(line_angle);

  const double base = rng.uniform(70.0, 110.0);
  const double zone_a[3] = {base + 90, base + 60, base + 20};
  const double zone_b[3] = {base - 40, base - 20, base + 60};
  double object[3];
  for (int c = 0; c < 3; ++c) object[c] = 0.5 * (zone_a[c] + zone_b[c]) + rng.uniform(-15, 15);
  const double stripe_angle = rng.uniform(0.0, std::numbers::pi);
  const double sx = std::cos(stripe_angle), sy = std::sin(stripe_angle);
  const double noise_sd = 10.0;

  SynthSample s;
  s.image = RasterImage(w, h);
  s.truth.width = w;
  s.truth.height = h;
  s.truth.k = 2;
  s.truth.labels.assign(w * h, 0);
  std::vector<double> inside(w * h), zone_side(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      const std::size_t i = y * w + x;
      inside[i] = blob.inside(fx, fy);
      zone_side[i] = (fx - lx) * nx + (fy - ly) * ny;
      double rgb[3];
      if (inside[i] > 0) {
        s.truth.labels[i] = 1;
        for (int c = 0; c < 3; ++c) rgb[c] = object[c];
      } else if (zone_side[i] > 0) {
        const double stripe = std::sin(2 * std::numbers::pi * (fx * sx + fy * sy) / 5.0);
        for (int c = 0; c < 3; ++c) rgb[c] = zone_a[c] + 35.0 * stripe;
      } else {
        const double check = ((x / 2 + y / 2) % 2 == 0) ? 25.0 : -25.0;
        for (int c = 0; c < 3; ++c) rgb[c] = zone_b[c] + check;
      }
      s.image.set(x, y, clamp_byte(rgb[0] + noise_sd * rng.normal()),
                  clamp_byte(rgb[1] + noise_sd * rng.normal()),
                  clamp_byte(rgb[2] + noise_sd * rng.normal()));
    }
  }

  // Scribbles: object pixels well inside the blob, background pixels split
  // evenly between the two zones and away from every boundary.
  const double margin = 3.0;
  std::vector<std::uint32_t> obj_pool, zone_a_pool, zone_b_pool;
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto x = static_cast<double>(i % w), y = static_cast<double>(i / w);
    if (x < margin || y < margin || x >= static_cast<double>(w) - margin ||
        y >= static_cast<double>(h) - margin) {
      continue;
    }
    const auto px = static_cast<std::uint32_t>(i);
    if (inside[i] > margin) {
      obj_pool.push_back(px);
    } else if (inside[i] < -margin && std::abs(zone_side[i]) > margin) {
      (zone_side[i] > 0 ? zone_a_pool : zone_b_pool).push_back(px);
    }
  }
  auto take = [&](const std::vector<std::uint32_t>& pool, std::size_t count, std::int32_t label) {
    count = std::min(count, pool.size());
    for (auto j : rng.sample_without_replacement(static_cast<std::uint32_t>(pool.size()),
                                                 static_cast<std::uint32_t>(count))) {
      s.scribbles.entries.push_back({pool[j], label});
    }
  };
  const std::size_t per = cfg.labeled_per_region;
  take(obj_pool, per, 1);
  take(zone_a_pool, per - per / 2, 0);
  take(zone_b_pool, per / 2, 0);
  std::sort(s.scribbles.entries.begin(), s.scribbles.entries.end(),
            [](const auto& a, const auto& b) { return a.pixel < b.pixel; });
  return s;
}

std::vector<SynthSample> make_synth_corpus(const SynthConfig& cfg) {
  std::vector<SynthSample> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) out.push_back(make_synth_sample(cfg, i));
  return out;
}

void write_synth_corpus(const SynthConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["images"] = nlohmann::ordered_json::array();
  const std::vector<std::string> names{"background", "object"};
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const SynthSample s = make_synth_sample(cfg, i);
    const std::string tag = two_digits(i);
    const std::string image = "image_" + tag + ".png";
    const std::string truth = "truth_" + tag + ".png";
    const std::string scribbles = "scribbles_" + tag + ".json";
    save_png(s.image, dir / image);
    save_png(label_map_image(s.truth.labels, s.truth.width, s.truth.height), dir / truth);
    const std::string text = constraint_file_json(s.scribbles, names, s.image.width, image) + "\n";
    write_file_bytes(dir / scribbles, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
    manifest["images"].push_back(
        {{"name", "image_" + tag}, {"image", image}, {"scribbles", scribbles}, {"ground_truth", truth}});
  }
  nlohmann::ordered_json meta{{"count", cfg.count}, {"width", cfg.width},
                              {"height", cfg.height}, {"seed", cfg.seed},
                              {"labeled_per_region", cfg.labeled_per_region}};
  manifest["generator"] = meta;
  const std::string text = manifest.dump(2) + "\n";
  write_file_bytes(dir / "manifest.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace scpseg
