#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "scpseg/constraints.hpp"
#include "scpseg/eval.hpp"
#include "scpseg/image.hpp"

namespace scpseg {

struct SynthConfig {
  std::size_t count = 20;
  std::size_t width = 64;
  std::size_t height = 64;
  std::uint64_t seed = 1;
  std::size_t labeled_per_region = 10;
};

/// Two-region image: a blob-shaped object over a background made of two
/// differently colored and textured zones, with seeded noise.
struct SynthSample {
  RasterImage image;
  GroundTruth truth;  // 0 background, 1 object
  LabeledPixels scribbles;
};

SynthSample make_synth_sample(const SynthConfig& cfg, std::size_t index);
std::vector<SynthSample> make_synth_corpus(const SynthConfig& cfg);

/// Writes image_XX.png, truth_XX.png, scribbles_XX.json and manifest.json.
void write_synth_corpus(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace scpseg
