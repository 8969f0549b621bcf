#include "scpseg/service.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include <httplib.h>
#include <json.hpp>

#include "scpseg/error.hpp"
#include "scpseg/rng.hpp"

namespace scpseg {

using json = nlohmann::json;

struct SessionStore::Session {
  std::mutex mu;
  std::string id;
  PreparedImage prepared;
  std::uint64_t seed = 0;
  std::map<std::uint32_t, std::string> scribbles;  // pixel -> label name
  std::uint64_t revision = 0;
  std::optional<std::uint64_t> result_revision;
  std::map<std::size_t, std::vector<std::uint32_t>> samples;  // n_s -> fixed P_s
  std::size_t graph_builds = 0;
};

SessionStore::SessionStore(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.base.out.clear();
  cfg_.base.dump_graph.clear();
  cfg_.base.load_graph.clear();
  cfg_.base.dump_propagation.clear();
  cfg_.base.validate();
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::unknown_session, "no session '" + id + "'");
  return it->second;
}

std::string SessionStore::create(std::span<const std::uint8_t> image_bytes) {
  RasterImage image = decode_image(image_bytes);
  if (image.width > cfg_.max_width || image.height > cfg_.max_height) {
    throw Error(Errc::image_too_large, std::to_string(image.width) + "x" +
                                           std::to_string(image.height) + " exceeds the " +
                                           std::to_string(cfg_.max_width) + "x" +
                                           std::to_string(cfg_.max_height) + " limit");
  }
  auto session = std::make_shared<Session>();
  session->prepared = prepare_image(std::move(image), cfg_.base);
  session->graph_builds = 1;
  session->seed = cfg_.base.seed;

  static thread_local std::mt19937_64 token_rng{std::random_device{}()};
  const std::uint64_t serial = ++counter_;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%08llx%016llx", static_cast<unsigned long long>(serial),
                static_cast<unsigned long long>(token_rng()));
  session->id = buf;

  std::unique_lock lock(mu_);
  sessions_.emplace(session->id, session);
  return session->id;
}

std::uint64_t SessionStore::update_scribbles(const std::string& id,
                                             const std::vector<ScribbleEdit>& add,
                                             const std::vector<ScribbleEdit>& remove) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  const std::size_t w = s->prepared.image.width, h = s->prepared.image.height;
  auto index_of = [&](const ScribbleEdit& e) {
    if (e.x >= w || e.y >= h) {
      throw Error(Errc::pixel_out_of_range, "pixel (" + std::to_string(e.x) + ", " +
                                                std::to_string(e.y) + ") outside " +
                                                std::to_string(w) + "x" + std::to_string(h));
    }
    return static_cast<std::uint32_t>(e.y * w + e.x);
  };
  // Validate everything first so a rejected request changes nothing.
  for (const auto& e : remove) index_of(e);
  for (const auto& e : add) {
    index_of(e);
    if (e.label.empty()) throw Error(Errc::invalid_argument, "scribble without a label");
  }
  for (const auto& e : remove) s->scribbles.erase(index_of(e));
  for (const auto& e : add) s->scribbles[index_of(e)] = e.label;
  return ++s->revision;
}

SegmentResponse SessionStore::segment(const std::string& id, const std::string& overrides) {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  RunConfig cfg = cfg_.base;
  if (!overrides.empty()) cfg = run_config_from_json(overrides, cfg);
  cfg.seed = s->seed;
  cfg.out.clear();
  cfg.dump_graph.clear();
  cfg.load_graph.clear();
  cfg.dump_propagation.clear();

  const std::size_t n = s->prepared.w.n();
  ConstraintFile cf;
  for (const auto& [pixel, name] : s->scribbles) cf.label_names.push_back(name);
  std::sort(cf.label_names.begin(), cf.label_names.end());
  cf.label_names.erase(std::unique(cf.label_names.begin(), cf.label_names.end()), cf.label_names.end());
  for (const auto& [pixel, name] : s->scribbles) {
    const auto label = std::lower_bound(cf.label_names.begin(), cf.label_names.end(), name) -
                       cf.label_names.begin();
    cf.labeled.entries.push_back({pixel, static_cast<std::int32_t>(label)});
  }
  if (cf.labeled.empty()) cfg.method = Method::ncut;

  std::optional<std::vector<std::uint32_t>> sample;
  if (cfg.method == Method::ncut_scp) {
    const std::size_t ns = std::min(cfg.n_s, n);
    auto it = s->samples.find(ns);
    if (it == s->samples.end()) {
      Rng rng(s->seed);
      auto p_s = rng.sample_without_replacement(static_cast<std::uint32_t>(n),
                                                static_cast<std::uint32_t>(ns));
      std::sort(p_s.begin(), p_s.end());
      it = s->samples.emplace(ns, std::move(p_s)).first;
    }
    sample = it->second;
  }

  RunOutput out = segment_prepared(s->prepared, cf, cfg, sample);
  SegmentResponse r;
  r.revision = s->revision;
  r.method = std::string(method_name(cfg.method));
  r.mask_png = encode_png(label_map_image(out.segmentation.labels, s->prepared.image.width,
                                          s->prepared.image.height));
  r.timings = out.report.runtime_seconds;
  r.segmentation = std::move(out.segmentation);
  s->result_revision = r.revision;
  return r;
}

SessionSummary SessionStore::summary(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard lock(s->mu);
  SessionSummary sum;
  sum.id = s->id;
  sum.width = s->prepared.image.width;
  sum.height = s->prepared.image.height;
  sum.revision = s->revision;
  sum.result_revision = s->result_revision;
  sum.graph_builds = s->graph_builds;
  for (const auto& [pixel, name] : s->scribbles) {
    sum.scribbles.push_back({static_cast<std::uint32_t>(pixel % sum.width),
                             static_cast<std::uint32_t>(pixel / sum.width), name});
  }
  return sum;
}

bool SessionStore::remove(const std::string& id) {
  std::unique_lock lock(mu_);
  return sessions_.erase(id) > 0;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    out += kAlphabet[v >> 18];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = std::uint32_t{bytes[i]} << 16;
    out += kAlphabet[v >> 18];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8);
    out += kAlphabet[v >> 18];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::unknown_session: return 404;
    case Errc::image_too_large: return 413;
    case Errc::unsupported_format: return 415;
    case Errc::non_finite:
    case Errc::no_convergence:
    case Errc::empty_cluster: return 500;
    default: return 400;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::invalid_argument, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed JSON: ") + e.what());
  }
}

std::vector<ScribbleEdit> parse_edits(const json& body, const char* key, bool need_label) {
  std::vector<ScribbleEdit> edits;
  if (!body.contains(key)) return edits;
  const json& list = body.at(key);
  if (!list.is_array()) throw Error(Errc::invalid_argument, std::string("'") + key + "' must be an array");
  for (const auto& item : list) {
    ScribbleEdit e;
    if (!item.is_object() || !item.contains("x") || !item.contains("y") ||
        !item.at("x").is_number_integer() || !item.at("y").is_number_integer()) {
      throw Error(Errc::invalid_argument, std::string("entries of '") + key + "' need integer x and y");
    }
    const auto x = item.at("x").get<std::int64_t>(), y = item.at("y").get<std::int64_t>();
    if (x < 0 || y < 0 || x > UINT32_MAX || y > UINT32_MAX) {
      throw Error(Errc::pixel_out_of_range, "negative or huge pixel coordinate");
    }
    e.x = static_cast<std::uint32_t>(x);
    e.y = static_cast<std::uint32_t>(y);
    if (need_label) {
      const json& l = item.value("label", json());
      if (l.is_string()) e.label = l.get<std::string>();
      else if (l.is_number_integer()) e.label = std::to_string(l.get<std::int64_t>());
      else throw Error(Errc::invalid_argument, "scribble label must be a string or integer");
    }
    edits.push_back(std::move(e));
  }
  return edits;
}

json summary_json(const SessionSummary& s) {
  json scribbles = json::array();
  for (const auto& e : s.scribbles) scribbles.push_back({{"x", e.x}, {"y", e.y}, {"label", e.label}});
  return {{"session", s.id},
          {"width", s.width},
          {"height", s.height},
          {"revision", s.revision},
          {"scribbles", std::move(scribbles)},
          {"result_revision", s.result_revision ? json(*s.result_revision) : json(nullptr)},
          {"graph_builds", s.graph_builds}};
}

}  // namespace

struct HttpService::Impl {
  SessionStore store;
  httplib::Server server;

  explicit Impl(ServiceConfig cfg) : store(std::move(cfg)) { routes(); }

  template <class Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), errc_name(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    const std::string origin = store.config().cors_origin;
    server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string_view data = req.body;
      std::string file;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw Error(Errc::invalid_argument, "multipart field 'image' missing");
        file = req.get_file_value("image").content;
        data = file;
      }
      if (data.empty()) throw Error(Errc::invalid_argument, "empty upload");
      const std::string id = store.create(
          {reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
      const auto s = store.summary(id);
      send_json(res, 200, {{"session", id}, {"width", s.width}, {"height", s.height}});
    }));

    server.Post(R"(/sessions/([0-9a-f]+)/scribbles)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  const auto add = parse_edits(body, "add", true);
                  const auto remove = parse_edits(body, "remove", false);
                  const auto rev = store.update_scribbles(req.matches[1], add, remove);
                  send_json(res, 200, {{"revision", rev}});
                }));

    server.Post(R"(/sessions/([0-9a-f]+)/segment)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const json body = parse_body(req);
                  std::string overrides;
                  if (body.contains("params") && !body.at("params").is_null()) {
                    if (!body.at("params").is_object()) {
                      throw Error(Errc::invalid_argument, "'params' must be an object");
                    }
                    overrides = body.at("params").dump();
                  }
                  const SegmentResponse r = store.segment(req.matches[1], overrides);
                  send_json(res, 200,
                            {{"revision", r.revision},
                             {"method", r.method},
                             {"k", r.segmentation.k},
                             {"ncut_value", r.segmentation.ncut_value},
                             {"warnings", r.segmentation.warnings},
                             {"mask_png_base64", base64_encode(r.mask_png)},
                             {"timings", r.timings}});
                }));

    server.Get(R"(/sessions/([0-9a-f]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, summary_json(store.summary(req.matches[1])));
    }));

    server.Delete(R"(/sessions/([0-9a-f]+))",
                  guarded([this](const httplib::Request& req, httplib::Response& res) {
                    if (!store.remove(req.matches[1])) {
                      throw Error(Errc::unknown_session, "no session '" + std::string(req.matches[1]) + "'");
                    }
                    send_json(res, 200, {{"deleted", std::string(req.matches[1])}});
                  }));

    if (!store.config().static_dir.empty()) server.set_mount_point("/", store.config().static_dir);
  }
};

HttpService::HttpService(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
HttpService::~HttpService() { stop(); }

bool HttpService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::serve() { return impl_->server.listen_after_bind(); }
void HttpService::stop() {
  if (impl_) impl_->server.stop();
}
void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }
SessionStore& HttpService::store() noexcept { return impl_->store; }

}  // namespace scpseg
