#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scpseg/linalg.hpp"
#include "scpseg/selection.hpp"

namespace scpseg {

struct LabeledPixel {
  std::uint32_t pixel;
  std::int32_t label;

  bool operator==(const LabeledPixel&) const = default;
};

/// User-supplied seeds: unique pixels, each carrying a region label.
struct LabeledPixels {
  std::vector<LabeledPixel> entries;

  /// Checks uniqueness and range; throws index_out_of_range / invalid_argument.
  void validate(std::size_t n) const;
  std::vector<std::int32_t> distinct_labels() const;
  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
};

/// Unordered pixel pair stored with first < second.
using PixelPair = std::pair<std::uint32_t, std::uint32_t>;

PixelPair make_pair_key(std::uint32_t a, std::uint32_t b);

/// Must-link M and cannot-link C, both sorted and duplicate free.
struct ConstraintSet {
  std::vector<PixelPair> must;
  std::vector<PixelPair> cannot;
  std::vector<std::string> warnings;

  bool empty() const noexcept { return must.empty() && cannot.empty(); }

  /// Pixels occurring in any pair, sorted.
  std::vector<std::uint32_t> constrained_pixels() const;

  /// Sorts, dedups, and rejects self pairs or pairs in both sets.
  static ConstraintSet from_pairs(std::vector<PixelPair> must, std::vector<PixelPair> cannot);
};

/// All same-label pairs go to M and all different-label pairs to C. With a
/// budget, a uniform random subset of that many pairs is kept.
ConstraintSet derive_constraints(const LabeledPixels& lp,
                                 std::optional<std::size_t> budget = std::nullopt,
                                 std::uint64_t seed = 0);

/// p_s: n_s pixels drawn uniformly without replacement; p_c: pixels of cs.
SelectionIndex select_pixels(std::size_t n, const ConstraintSet& cs, std::size_t n_s,
                             std::uint64_t seed);

/// Dense Z_u with +1 for must-links, -1 for cannot-links, 0 elsewhere
/// (including the diagonal).
struct ConstraintMatrix {
  DenseMatrix z;

  std::size_t n() const noexcept { return static_cast<std::size_t>(z.rows()); }
};

ConstraintMatrix build_z(const ConstraintSet& cs, const SelectionIndex& sel);

/// Scribble / constraint document, either
///   {"image": path, "labeled": [{"x":..,"y":..,"label":".."}, ...]}
/// or {"must": [[i,j],...], "cannot": [[i,j],...]}.
struct ConstraintFile {
  std::optional<std::string> image;
  LabeledPixels labeled;
  std::vector<std::string> label_names;  // label id -> name
  std::optional<ConstraintSet> explicit_pairs;

  bool has_labels() const noexcept { return !labeled.empty(); }
};

/// Label names are mapped to ids in sorted name order.
ConstraintFile parse_constraint_file(const std::string& json_text, std::size_t width,
                                     std::size_t height);
ConstraintFile load_constraint_file(const std::filesystem::path& path, std::size_t width,
                                    std::size_t height);
std::string constraint_file_json(const LabeledPixels& lp, const std::vector<std::string>& names,
                                 std::size_t width, const std::optional<std::string>& image);

}  // namespace scpseg
