#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "scpseg/error.hpp"
#include "scpseg/eval.hpp"
#include "scpseg/fusion.hpp"
#include "scpseg/image.hpp"
#include "scpseg/pipeline.hpp"
#include "scpseg/synth.hpp"

namespace py = pybind11;
using namespace scpseg;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

RasterImage to_raster(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(Errc::invalid_argument, "image must have shape (height, width, 3)");
  RasterImage img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.rgb.begin());
  return img;
}

py::array_t<std::uint8_t> from_raster(const RasterImage& img) {
  py::array_t<std::uint8_t> a({img.height, img.width, std::size_t{3}});
  std::copy(img.rgb.begin(), img.rgb.end(), a.mutable_data());
  return a;
}

py::array_t<std::int32_t> label_grid(const std::vector<std::int32_t>& labels, std::size_t w, std::size_t h) {
  py::array_t<std::int32_t> a({h, w});
  std::copy(labels.begin(), labels.end(), a.mutable_data());
  return a;
}

/// (x, y, label) triples with non-negative integer labels.
ConstraintFile scribbles_from(const std::vector<std::tuple<std::size_t, std::size_t, std::int32_t>>& marks,
                              std::size_t width, std::size_t height) {
  ConstraintFile cf;
  std::int32_t top = -1;
  for (const auto& [x, y, label] : marks) {
    if (x >= width || y >= height) {
      throw Error(Errc::pixel_out_of_range, "scribble (" + std::to_string(x) + ", " + std::to_string(y) +
                                                ") lies outside the image");
    }
    if (label < 0) throw Error(Errc::invalid_argument, "scribble labels must be non-negative");
    const auto pixel = static_cast<std::uint32_t>(y * width + x);
    auto& entries = cf.labeled.entries;
    auto it = std::find_if(entries.begin(), entries.end(), [&](const LabeledPixel& e) { return e.pixel == pixel; });
    if (it != entries.end()) it->label = label;
    else entries.push_back({pixel, label});
    top = std::max(top, label);
  }
  for (std::int32_t l = 0; l <= top; ++l) cf.label_names.push_back(std::to_string(l));
  return cf;
}

py::dict result_dict(const RunOutput& out, std::size_t w, std::size_t h) {
  py::dict d;
  d["labels"] = label_grid(out.segmentation.labels, w, h);
  d["k"] = out.segmentation.k;
  d["ncut_value"] = out.segmentation.ncut_value;
  d["method"] = std::string(method_name(out.method));
  d["ari"] = out.report.has_ground_truth ? py::object(py::float_(out.report.ar_index)) : py::none();
  d["timings"] = out.report.runtime_seconds;
  d["warnings"] = out.segmentation.warnings;
  d["report_json"] = out.report.to_json();
  if (out.propagation) {
    d["outer_iterations"] = out.propagation->meta.outer_iter;
    d["n_u"] = out.selection ? out.selection->n_u() : 0;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_scpseg, m) {
  m.doc() = "Constrained spectral segmentation engine";

  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(py::str(e.what()));
      exc.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("default_config", [] { return run_config_to_json(RunConfig{}); },
        "Default run configuration as a JSON string.");
  m.def("normalize_config", [](const std::string& json_text) {
    const RunConfig cfg = run_config_from_json(json_text);
    cfg.validate();
    return run_config_to_json(cfg);
  });

  m.def("load_image", [](const std::string& path) { return from_raster(load_image(path)); }, py::arg("path"));
  m.def("save_png", [](const ImageArray& a, const std::string& path) { save_png(to_raster(a), path); },
        py::arg("image"), py::arg("path"));
  m.def("load_ground_truth", [](const std::string& path) {
    const GroundTruth gt = load_ground_truth(path);
    return label_grid(gt.labels, gt.width, gt.height);
  });

  m.def(
      "segment",
      [](const ImageArray& image, const std::vector<std::tuple<std::size_t, std::size_t, std::int32_t>>& scribbles,
         const std::string& config_json, const std::optional<LabelArray>& ground_truth) {
        const RasterImage img = to_raster(image);
        RunConfig cfg = run_config_from_json(config_json);
        cfg.validate();
        const ConstraintFile cf = scribbles_from(scribbles, img.width, img.height);
        GroundTruth gt;
        if (ground_truth) {
          const auto& g = *ground_truth;
          if (g.ndim() != 2 || static_cast<std::size_t>(g.shape(0)) != img.height ||
              static_cast<std::size_t>(g.shape(1)) != img.width) {
            throw Error(Errc::dimension_mismatch, "ground truth must have shape (height, width)");
          }
          gt.width = img.width;
          gt.height = img.height;
          gt.labels.assign(g.data(), g.data() + g.size());
          std::vector<std::int32_t> ids = gt.labels;
          std::sort(ids.begin(), ids.end());
          gt.k = static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
        }
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = run_on_image(img, cf, cfg, ground_truth ? &gt : nullptr);
        }
        return result_dict(out, img.width, img.height);
      },
      py::arg("image"), py::arg("scribbles"), py::arg("config_json") = "{}", py::arg("ground_truth") = py::none());

  m.def(
      "run_files",
      [](const std::string& config_json) {
        RunConfig cfg = run_config_from_json(config_json);
        cfg.validate();
        RunOutput out;
        RasterImage img;
        {
          py::gil_scoped_release release;
          img = load_image(cfg.image);
          out = run_scp_segmentation(cfg);
          if (!cfg.out.empty()) write_run_outputs(out, cfg, img.width, img.height);
        }
        return result_dict(out, img.width, img.height);
      },
      py::arg("config_json"));

  m.def(
      "run_benchmark",
      [](const std::string& path) {
        const BenchConfig bc = load_bench_config(path);
        py::gil_scoped_release release;
        return run_benchmark(bc).to_csv();
      },
      py::arg("config_path"));

  m.def(
      "adjusted_rand",
      [](const LabelArray& a, const LabelArray& b) {
        return adjusted_rand({a.data(), static_cast<std::size_t>(a.size())},
                             {b.data(), static_cast<std::size_t>(b.size())});
      },
      py::arg("a"), py::arg("b"));
  m.def("soft_thr", &soft_thr, py::arg("x"), py::arg("y"), py::arg("lam"));

  m.def(
      "synth_sample",
      [](std::size_t index, std::size_t width, std::size_t height, std::uint64_t seed) {
        SynthConfig sc;
        sc.width = width;
        sc.height = height;
        sc.seed = seed;
        const SynthSample s = make_synth_sample(sc, index);
        std::vector<std::tuple<std::size_t, std::size_t, std::int32_t>> marks;
        for (const auto& e : s.scribbles.entries) marks.emplace_back(e.pixel % width, e.pixel / width, e.label);
        return py::make_tuple(from_raster(s.image), label_grid(s.truth.labels, width, height), marks);
      },
      py::arg("index"), py::arg("width") = 64, py::arg("height") = 64, py::arg("seed") = 1);
  m.def(
      "write_synth_corpus",
      [](const std::string& dir, std::size_t count, std::uint64_t seed) {
        SynthConfig sc;
        sc.count = count;
        sc.seed = seed;
        write_synth_corpus(sc, dir);
      },
      py::arg("out_dir"), py::arg("count") = 20, py::arg("seed") = 1);
}
