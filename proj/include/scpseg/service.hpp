#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "scpseg/pipeline.hpp"

namespace scpseg {

struct ServiceConfig {
  RunConfig base;  // method, n_s and solver settings used by every session
  std::size_t max_width = 512;
  std::size_t max_height = 512;
  std::string cors_origin = "*";
  std::string static_dir;  // built UI bundle, served at "/" when set
};

struct ScribbleEdit {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::string label;  // ignored for removals
};

struct SessionSummary {
  std::string id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint64_t revision = 0;
  std::vector<ScribbleEdit> scribbles;  // sorted by pixel index
  std::optional<std::uint64_t> result_revision;
  std::size_t graph_builds = 0;
};

struct SegmentResponse {
  std::uint64_t revision = 0;
  std::string method;
  Segmentation segmentation;
  std::vector<std::uint8_t> mask_png;
  std::map<std::string, double> timings;
};

/// In-memory interactive sessions. Operations on one session are serialized
/// by a per-session lock; different sessions proceed independently.
class SessionStore {
 public:
  explicit SessionStore(ServiceConfig cfg = {});

  /// Decodes the image and builds its features and graph.
  std::string create(std::span<const std::uint8_t> image_bytes);

  /// Applies removals, then additions; returns the new revision.
  std::uint64_t update_scribbles(const std::string& id, const std::vector<ScribbleEdit>& add,
                                 const std::vector<ScribbleEdit>& remove);

  /// `overrides` is a JSON object of run-config keys (may be empty).
  SegmentResponse segment(const std::string& id, const std::string& overrides = {});

  SessionSummary summary(const std::string& id) const;
  bool remove(const std::string& id);
  std::size_t size() const;

  const ServiceConfig& config() const noexcept { return cfg_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  ServiceConfig cfg_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::atomic<std::uint64_t> counter_{0};
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// HTTP front end over a SessionStore.
///   POST   /sessions                 image as multipart field "image" or raw body
///   POST   /sessions/{id}/scribbles  {"add": [{x, y, label}], "remove": [{x, y}]}
///   POST   /sessions/{id}/segment    {"params": {...}} (optional)
///   GET    /sessions/{id}
///   DELETE /sessions/{id}
/// Errors are {"code", "message"} with a matching status.
class HttpService {
 public:
  explicit HttpService(ServiceConfig cfg = {});
  ~HttpService();

  /// Binds and serves until stop(); port 0 picks a free port.
  bool listen(const std::string& host, int port);
  /// Binds without serving; returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves on a socket bound by bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

  SessionStore& store() noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scpseg
