#include "scpseg/eval.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "scpseg/error.hpp"

namespace scpseg {

namespace {

double choose2(double v) { return 0.5 * v * (v - 1.0); }

struct PairCounts {
  double sum_ij = 0.0;  // sum of C(n_ij, 2)
  double sum_a = 0.0;   // sum of C(a_i, 2)
  double sum_b = 0.0;
  double total = 0.0;   // C(n, 2)
  bool same_partition = false;
};

PairCounts pair_counts(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::length_mismatch, "labelings differ in length: " + std::to_string(a.size()) +
                                           " vs " + std::to_string(b.size()));
  }
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> table;
  std::map<std::int32_t, std::size_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  PairCounts pc;
  for (const auto& [key, count] : table) pc.sum_ij += choose2(static_cast<double>(count));
  for (const auto& [key, count] : rows) pc.sum_a += choose2(static_cast<double>(count));
  for (const auto& [key, count] : cols) pc.sum_b += choose2(static_cast<double>(count));
  pc.total = choose2(static_cast<double>(a.size()));
  // Same partition iff every row and column of the table has one cell.
  pc.same_partition = table.size() == rows.size() && table.size() == cols.size();
  return pc;
}

}  // namespace

double adjusted_rand(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  const PairCounts pc = pair_counts(a, b);
  if (a.size() < 2) return pc.same_partition ? 1.0 : 0.0;
  const double expected = pc.sum_a * pc.sum_b / pc.total;
  const double max_index = 0.5 * (pc.sum_a + pc.sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return pc.same_partition ? 1.0 : 0.0;
  return (pc.sum_ij - expected) / denom;
}

double rand_index(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  const PairCounts pc = pair_counts(a, b);
  if (pc.total == 0) return 1.0;
  // agreements = pairs joined in both + pairs split in both
  const double joined_both = pc.sum_ij;
  const double split_both = pc.total - pc.sum_a - pc.sum_b + pc.sum_ij;
  return (joined_both + split_both) / pc.total;
}

Labeling infer_selected_labels(const DenseMatrix& f_u, const SelectionIndex& sel,
                               const LabeledPixels& lp) {
  const std::size_t nu = sel.n_u();
  if (static_cast<std::size_t>(f_u.rows()) != nu || static_cast<std::size_t>(f_u.cols()) != nu) {
    throw Error(Errc::dimension_mismatch, "f_u does not match the selection size");
  }
  const std::vector<std::int32_t> classes = lp.distinct_labels();
  std::vector<std::pair<std::uint32_t, std::size_t>> voters;  // (local index, class slot)
  voters.reserve(lp.size());
  for (const auto& e : lp.entries) {
    const auto local = sel.local(e.pixel);
    if (!local) {
      throw Error(Errc::unselected_labeled_pixel,
                  "labeled pixel " + std::to_string(e.pixel) + " is not in the selection");
    }
    const auto slot = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), e.label) - classes.begin());
    voters.emplace_back(*local, slot);
  }
  Labeling out(nu, classes.empty() ? 0 : classes.front());
  if (classes.empty()) return out;
  std::vector<double> score(classes.size());
  for (std::size_t j = 0; j < nu; ++j) {
    std::fill(score.begin(), score.end(), 0.0);
    for (const auto& [i, slot] : voters) score[slot] += f_u(i, static_cast<Eigen::Index>(j));
    std::size_t best = 0;
    for (std::size_t c = 1; c < score.size(); ++c) {
      if (score[c] > score[best]) best = c;
    }
    out[j] = classes[best];
  }
  for (const auto& e : lp.entries) out[*sel.local(e.pixel)] = e.label;
  return out;
}

void region_color(std::int32_t label, std::uint8_t rgb[3]) {
  // Odd multiplier modulo 2^24 is a bijection, so distinct labels below 2^24
  // get distinct colors.
  const auto u = static_cast<std::uint32_t>(label) & 0xFFFFFFu;
  const std::uint32_t c = (u * 0x9E3779u + 0x3C6EF3u) & 0xFFFFFFu;
  rgb[0] = static_cast<std::uint8_t>(c >> 16);
  rgb[1] = static_cast<std::uint8_t>(c >> 8);
  rgb[2] = static_cast<std::uint8_t>(c);
}

RasterImage label_map_image(std::span<const std::int32_t> labels, std::size_t width,
                            std::size_t height) {
  if (labels.size() != width * height) {
    throw Error(Errc::length_mismatch, "label count does not match image size");
  }
  RasterImage img(width, height);
  for (std::size_t i = 0; i < labels.size(); ++i) region_color(labels[i], img.rgb.data() + 3 * i);
  return img;
}

Labeling labels_from_color_map(const RasterImage& img) {
  std::unordered_map<std::uint32_t, std::int32_t> ids;
  Labeling out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* p = img.rgb.data() + 3 * i;
    const std::uint32_t key = (std::uint32_t{p[0]} << 16) | (std::uint32_t{p[1]} << 8) | p[2];
    out[i] = ids.try_emplace(key, static_cast<std::int32_t>(ids.size())).first->second;
  }
  return out;
}

std::vector<std::pair<std::int32_t, std::size_t>> rle_encode(std::span<const std::int32_t> labels) {
  std::vector<std::pair<std::int32_t, std::size_t>> runs;
  for (auto l : labels) {
    if (!runs.empty() && runs.back().first == l) {
      ++runs.back().second;
    } else {
      runs.emplace_back(l, 1);
    }
  }
  return runs;
}

Labeling rle_decode(const std::vector<std::pair<std::int32_t, std::size_t>>& runs) {
  Labeling out;
  for (const auto& [label, run] : runs) out.insert(out.end(), run, label);
  return out;
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  GroundTruth gt;
  if (path.extension() == ".json") {
    const auto bytes = read_file_bytes(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
      gt.width = j.at("width").get<std::size_t>();
      gt.height = j.at("height").get<std::size_t>();
      std::vector<std::pair<std::int32_t, std::size_t>> runs;
      for (const auto& r : j.at("labels_rle")) {
        runs.emplace_back(r.at(0).get<std::int32_t>(), r.at(1).get<std::size_t>());
      }
      gt.labels = rle_decode(runs);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::corrupt_file, path.string() + ": " + e.what());
    }
    if (gt.labels.size() != gt.width * gt.height) {
      throw Error(Errc::corrupt_file, path.string() + ": run lengths do not cover the image");
    }
  } else {
    const RasterImage img = load_image(path);
    gt.width = img.width;
    gt.height = img.height;
    gt.labels = labels_from_color_map(img);
  }
  Labeling sorted = gt.labels;
  std::sort(sorted.begin(), sorted.end());
  gt.k = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  return gt;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  if (has_ground_truth) {
    j["ar_index"] = ar_index;
  } else {
    j["ar_index"] = nullptr;
  }
  j["runtime_seconds"] = runtime_seconds;
  j["params"] = params_echo.empty() ? nlohmann::ordered_json::object()
                                    : nlohmann::ordered_json::parse(params_echo);
  return j.dump(2);
}

}  // namespace scpseg
