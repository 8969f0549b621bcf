#include "scpseg/constraints.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "scpseg/error.hpp"
#include "scpseg/image.hpp"
#include "scpseg/rng.hpp"

namespace scpseg {

using nlohmann::json;

void LabeledPixels::validate(std::size_t n) const {
  std::vector<std::uint32_t> pixels;
  pixels.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.pixel >= n) {
      throw Error(Errc::index_out_of_range, "labeled pixel " + std::to_string(e.pixel) +
                                                " outside image of " + std::to_string(n) + " pixels");
    }
    pixels.push_back(e.pixel);
  }
  std::sort(pixels.begin(), pixels.end());
  if (std::adjacent_find(pixels.begin(), pixels.end()) != pixels.end()) {
    throw Error(Errc::invalid_argument, "a pixel is labeled more than once");
  }
}

std::vector<std::int32_t> LabeledPixels::distinct_labels() const {
  std::vector<std::int32_t> labels;
  for (const auto& e : entries) labels.push_back(e.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

PixelPair make_pair_key(std::uint32_t a, std::uint32_t b) {
  return a < b ? PixelPair{a, b} : PixelPair{b, a};
}

std::vector<std::uint32_t> ConstraintSet::constrained_pixels() const {
  std::vector<std::uint32_t> px;
  px.reserve(2 * (must.size() + cannot.size()));
  for (const auto* set : {&must, &cannot}) {
    for (const auto& [a, b] : *set) {
      px.push_back(a);
      px.push_back(b);
    }
  }
  std::sort(px.begin(), px.end());
  px.erase(std::unique(px.begin(), px.end()), px.end());
  return px;
}

ConstraintSet ConstraintSet::from_pairs(std::vector<PixelPair> must, std::vector<PixelPair> cannot) {
  for (auto* set : {&must, &cannot}) {
    for (auto& p : *set) {
      if (p.first == p.second) {
        throw Error(Errc::inconsistent_constraints,
                    "self pair (" + std::to_string(p.first) + ", " + std::to_string(p.first) + ")");
      }
      p = make_pair_key(p.first, p.second);
    }
    std::sort(set->begin(), set->end());
    set->erase(std::unique(set->begin(), set->end()), set->end());
  }
  std::vector<PixelPair> both;
  std::set_intersection(must.begin(), must.end(), cannot.begin(), cannot.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    throw Error(Errc::inconsistent_constraints,
                "pair (" + std::to_string(both[0].first) + ", " + std::to_string(both[0].second) +
                    ") is both must-link and cannot-link");
  }
  ConstraintSet cs;
  cs.must = std::move(must);
  cs.cannot = std::move(cannot);
  return cs;
}

ConstraintSet derive_constraints(const LabeledPixels& lp, std::optional<std::size_t> budget,
                                 std::uint64_t seed) {
  std::vector<LabeledPixel> entries = lp.entries;
  std::sort(entries.begin(), entries.end(),
            [](const LabeledPixel& a, const LabeledPixel& b) { return a.pixel < b.pixel; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].pixel == entries[i - 1].pixel) {
      throw Error(Errc::invalid_argument, "a pixel is labeled more than once");
    }
  }

  std::vector<PixelPair> must, cannot;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      const PixelPair p{entries[i].pixel, entries[j].pixel};
      (entries[i].label == entries[j].label ? must : cannot).push_back(p);
    }
  }

  ConstraintSet cs;
  if (budget && *budget < must.size() + cannot.size()) {
    Rng rng(seed);
    auto picks = rng.sample_without_replacement(static_cast<std::uint32_t>(must.size() + cannot.size()),
                                                static_cast<std::uint32_t>(*budget));
    std::sort(picks.begin(), picks.end());
    for (auto idx : picks) {
      if (idx < must.size()) cs.must.push_back(must[idx]);
      else cs.cannot.push_back(cannot[idx - must.size()]);
    }
  } else {
    cs.must = std::move(must);
    cs.cannot = std::move(cannot);
  }
  if (entries.size() >= 2 && lp.distinct_labels().size() == 1) {
    cs.warnings.push_back("SingleLabel: all labeled pixels share one label, no cannot-links");
  }
  return cs;
}

SelectionIndex select_pixels(std::size_t n, const ConstraintSet& cs, std::size_t n_s,
                             std::uint64_t seed) {
  if (n_s > n) {
    throw Error(Errc::sample_too_large, "sample size " + std::to_string(n_s) + " exceeds " +
                                            std::to_string(n) + " pixels");
  }
  Rng rng(seed);
  auto p_s = rng.sample_without_replacement(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n_s));
  return SelectionIndex::from_sets(n, cs.constrained_pixels(), std::move(p_s));
}

ConstraintMatrix build_z(const ConstraintSet& cs, const SelectionIndex& sel) {
  const auto nu = static_cast<Eigen::Index>(sel.n_u());
  ConstraintMatrix cm{DenseMatrix::Zero(nu, nu)};
  auto place = [&](const PixelPair& p, double v) {
    const auto a = sel.local(p.first);
    const auto b = sel.local(p.second);
    if (!a || !b) {
      throw Error(Errc::unselected_constraint_pixel,
                  "constraint pixel " + std::to_string(a ? p.second : p.first) + " not in P_u");
    }
    cm.z(*a, *b) = v;
    cm.z(*b, *a) = v;
  };
  for (const auto& p : cs.must) place(p, 1.0);
  for (const auto& p : cs.cannot) place(p, -1.0);
  return cm;
}

namespace {

std::string label_name(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(Errc::config_error, "label must be a string or an integer");
}

std::vector<PixelPair> parse_pairs(const json& arr, std::size_t n, const char* what) {
  if (!arr.is_array()) throw Error(Errc::config_error, std::string(what) + " must be an array");
  std::vector<PixelPair> pairs;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw Error(Errc::config_error, std::string(what) + " entries must be [i, j] integer pairs");
    }
    const auto a = p[0].get<long long>(), b = p[1].get<long long>();
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
      throw Error(Errc::index_out_of_range, std::string(what) + " pair outside image");
    }
    pairs.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
  }
  return pairs;
}

}  // namespace

ConstraintFile parse_constraint_file(const std::string& json_text, std::size_t width,
                                     std::size_t height) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config_error, std::string("constraint file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::config_error, "constraint file must be a JSON object");
  const std::size_t n = width * height;
  ConstraintFile cf;
  if (doc.contains("image") && doc["image"].is_string()) cf.image = doc["image"].get<std::string>();

  if (doc.contains("labeled")) {
    const auto& arr = doc["labeled"];
    if (!arr.is_array()) throw Error(Errc::config_error, "\"labeled\" must be an array");
    std::map<std::uint32_t, std::string> by_pixel;  // later entries win
    std::set<std::string> names;
    for (const auto& e : arr) {
      if (!e.is_object() || !e.contains("x") || !e.contains("y") || !e.contains("label") ||
          !e["x"].is_number_integer() || !e["y"].is_number_integer()) {
        throw Error(Errc::config_error, "labeled entries need integer x, y and a label");
      }
      const auto x = e["x"].get<long long>(), y = e["y"].get<long long>();
      if (x < 0 || y < 0 || static_cast<std::size_t>(x) >= width || static_cast<std::size_t>(y) >= height) {
        throw Error(Errc::index_out_of_range, "labeled pixel (" + std::to_string(x) + ", " +
                                                  std::to_string(y) + ") outside the image");
      }
      auto name = label_name(e["label"]);
      names.insert(name);
      by_pixel[static_cast<std::uint32_t>(static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x))] =
          std::move(name);
    }
    cf.label_names.assign(names.begin(), names.end());
    for (const auto& [pixel, name] : by_pixel) {
      const auto id = std::lower_bound(cf.label_names.begin(), cf.label_names.end(), name) -
                      cf.label_names.begin();
      cf.labeled.entries.push_back({pixel, static_cast<std::int32_t>(id)});
    }
  }
  if (doc.contains("must") || doc.contains("cannot")) {
    auto must = doc.contains("must") ? parse_pairs(doc["must"], n, "must") : std::vector<PixelPair>{};
    auto cannot = doc.contains("cannot") ? parse_pairs(doc["cannot"], n, "cannot") : std::vector<PixelPair>{};
    cf.explicit_pairs = ConstraintSet::from_pairs(std::move(must), std::move(cannot));
  }
  return cf;
}

ConstraintFile load_constraint_file(const std::filesystem::path& path, std::size_t width,
                                    std::size_t height) {
  const auto bytes = read_file_bytes(path);
  return parse_constraint_file(std::string(bytes.begin(), bytes.end()), width, height);
}

std::string constraint_file_json(const LabeledPixels& lp, const std::vector<std::string>& names,
                                 std::size_t width, const std::optional<std::string>& image) {
  json doc;
  if (image) doc["image"] = *image;
  json arr = json::array();
  for (const auto& e : lp.entries) {
    const auto label = static_cast<std::size_t>(e.label) < names.size()
                           ? json(names[static_cast<std::size_t>(e.label)])
                           : json(std::to_string(e.label));
    arr.push_back({{"x", e.pixel % width}, {"y", e.pixel / width}, {"label", label}});
  }
  doc["labeled"] = std::move(arr);
  return doc.dump(2);
}

}  // namespace scpseg
