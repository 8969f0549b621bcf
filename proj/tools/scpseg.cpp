// scpseg command line: run, bench, synth, serve.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "scpseg/error.hpp"
#include "scpseg/image.hpp"
#include "scpseg/pipeline.hpp"
#include "scpseg/service.hpp"
#include "scpseg/synth.hpp"

namespace {

using namespace scpseg;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return kExitConfig;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::numerical: return kExitNumerical;
  }
  return 1;
}

struct RunArgs {
  std::string config, image, scribbles, ground_truth, method, out, dump_graph, load_graph;
  std::optional<std::size_t> ns;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const RunArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  if (!a.image.empty()) cfg.image = a.image;
  if (!a.scribbles.empty()) cfg.scribbles = a.scribbles;
  if (!a.ground_truth.empty()) cfg.ground_truth = a.ground_truth;
  if (!a.method.empty()) {
    try {
      cfg.method = parse_method(a.method);
    } catch (const Error& e) {
      throw Error(Errc::config_error, e.what());
    }
  }
  if (a.ns) cfg.n_s = *a.ns;
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.out = a.out;
  if (!a.dump_graph.empty()) cfg.dump_graph = a.dump_graph;
  if (!a.load_graph.empty()) cfg.load_graph = a.load_graph;
  if (cfg.image.empty()) throw Error(Errc::config_error, "no image given");
  cfg.validate();

  const RasterImage image = load_image(cfg.image);
  const RunOutput out = run_scp_segmentation(cfg);
  if (!cfg.out.empty()) write_run_outputs(out, cfg, image.width, image.height);
  for (const auto& w : out.segmentation.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << out.report.to_json() << "\n";
  return 0;
}

int cmd_bench(const std::string& config, const std::string& out_path, std::optional<std::size_t> workers) {
  BenchConfig cfg = load_bench_config(config);
  if (workers) cfg.workers = *workers;
  const BenchResult res = run_benchmark(cfg);
  const std::string csv = res.to_csv();
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw Error(Errc::io_error, "cannot write " + out_path);
    f << csv;
    for (const auto& row : res.summary) {
      std::printf("%-9s n_s=%-5zu mean ARI %.4f\n", std::string(method_name(row.method)).c_str(),
                  row.n_s, row.ari);
    }
  }
  return 0;
}

int cmd_synth(const std::string& out, std::size_t count, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  write_synth_corpus(cfg, out);
  std::printf("wrote %zu images to %s\n", count, out.c_str());
  return 0;
}

int cmd_serve(const std::string& config, const std::string& host, int port, const std::string& static_dir) {
  ServiceConfig cfg;
  if (!config.empty()) cfg.base = load_run_config(config);
  cfg.static_dir = static_dir;
  HttpService svc(cfg);
  const int bound = svc.bind(host, port);
  if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  std::printf("listening on http://%s:%d\n", host.c_str(), bound);
  std::fflush(stdout);
  return svc.serve() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained image segmentation with selective constraint propagation"};
  app.require_subcommand(1);

  RunArgs ra;
  std::size_t ns_value = 0;
  std::uint64_t seed_value = 0;
  auto* run = app.add_subcommand("run", "Segment one image");
  run->add_option("--config", ra.config, "Run config JSON");
  run->add_option("--image", ra.image, "Input image");
  run->add_option("--scribbles", ra.scribbles, "Scribble or constraint JSON");
  run->add_option("--ground-truth", ra.ground_truth, "Ground truth for ARI");
  run->add_option("--method", ra.method, "ncut | ncut_sl | ncut_scp");
  auto* ns_opt = run->add_option("--ns", ns_value, "Sample size n_s");
  auto* seed_opt = run->add_option("--seed", seed_value, "Random seed");
  run->add_option("--out", ra.out, "Output directory");
  run->add_option("--dump-graph", ra.dump_graph, "Write the affinity graph here");
  run->add_option("--load-graph", ra.load_graph, "Reuse a dumped affinity graph");

  std::string bench_config, bench_out;
  std::size_t bench_workers = 0;
  auto* bench = app.add_subcommand("bench", "Run a benchmark over a corpus");
  bench->add_option("--config", bench_config, "Bench config JSON")->required();
  bench->add_option("--out", bench_out, "CSV output path");
  auto* workers_opt = bench->add_option("--workers", bench_workers, "Worker threads");

  std::string synth_out;
  std::size_t synth_count = 20;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of images");
  synth->add_option("--seed", synth_seed, "Corpus seed");

  std::string serve_config, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Start the HTTP session service");
  serve->add_option("--config", serve_config, "Base run config JSON");
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port (0 picks one)");
  serve->add_option("--static", serve_static, "Directory of UI files to serve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      if (*ns_opt) ra.ns = ns_value;
      if (*seed_opt) ra.seed = seed_value;
      return cmd_run(ra);
    }
    if (*bench) {
      return cmd_bench(bench_config, bench_out,
                       *workers_opt ? std::optional<std::size_t>(bench_workers) : std::nullopt);
    }
    if (*synth) return cmd_synth(synth_out, synth_count, synth_seed);
    if (*serve) return cmd_serve(serve_config, serve_host, serve_port, serve_static);
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [config_error]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io_error]: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
