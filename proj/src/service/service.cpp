#include "ami/service/service.hpp"

#include <atomic>
#include <charconv>
#include <sstream>
#include <thread>

#include "ami/core/fs.hpp"
#include "ami/core/image_io.hpp"
#include "ami/synthgen/crop_store.hpp"
#include "httplib.h"

namespace ami::service {

using json = nlohmann::json;
using pipeline::JobState;

std::string_view to_string(ApiCode code) {
  switch (code) {
    case ApiCode::not_found: return "not_found";
    case ApiCode::invalid_input: return "invalid_input";
    case ApiCode::conflict: return "conflict";
    case ApiCode::backend_failure: return "backend_failure";
  }
  return "?";
}

int http_status(ApiCode code) {
  switch (code) {
    case ApiCode::not_found: return 404;
    case ApiCode::invalid_input: return 422;
    case ApiCode::conflict: return 409;
    case ApiCode::backend_failure: return 502;
  }
  return 500;
}

ApiCode api_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_found: return ApiCode::not_found;
    case ErrorKind::configuration:
    case ErrorKind::parse:
    case ErrorKind::input: return ApiCode::invalid_input;
    case ErrorKind::conflict: return ApiCode::conflict;
    case ErrorKind::data_integrity:
    case ErrorKind::io:
    case ErrorKind::stage: return ApiCode::backend_failure;
  }
  return ApiCode::backend_failure;
}

json error_body(ApiCode code, const std::string& message, const json& detail) {
  return {{"error", {{"code", to_string(code)}, {"message", message}, {"detail", detail}}}};
}

namespace {

class ApiError : public std::runtime_error {
 public:
  ApiError(ApiCode code, const std::string& message) : std::runtime_error(message), code(code) {}
  ApiCode code;
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ApiCode code, const std::string& message, const json& detail = nullptr) {
  send_json(res, error_body(code, message, detail), http_status(code));
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  std::istringstream in(fs::read_text(path));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

std::size_t parse_size(const std::string& text, const char* what) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw ApiError(ApiCode::invalid_input, std::string(what) + " must be a non-negative integer");
  return v;
}

/// Cursor pagination: the cursor is the offset of the next item.
json paginate(const std::vector<json>& items, const httplib::Request& req) {
  std::size_t limit = 100;
  if (req.has_param("limit")) {
    limit = parse_size(req.get_param_value("limit"), "limit");
    if (limit == 0) throw ApiError(ApiCode::invalid_input, "limit must be positive");
    limit = std::min(limit, kMaxPageSize);
  }
  std::size_t offset = req.has_param("cursor") ? parse_size(req.get_param_value("cursor"), "cursor") : 0;
  offset = std::min(offset, items.size());
  const std::size_t end = std::min(items.size(), offset + limit);
  json page = json::array();
  for (std::size_t i = offset; i < end; ++i) page.push_back(items[i]);
  return {{"items", page}, {"next_cursor", end < items.size() ? json(std::to_string(end)) : json(nullptr)}};
}

bool wants_png(const httplib::Request& req) {
  const std::string accept = req.get_header_value("Accept");
  const auto png = accept.find("image/png");
  const auto jpeg = accept.find("image/jpeg");
  return png != std::string::npos && (jpeg == std::string::npos || png < jpeg);
}

void send_image(httplib::Response& res, const httplib::Request& req, const Raster& image) {
  if (wants_png(req)) {
    const auto bytes = encode_png(image);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  } else {
    const auto bytes = encode_jpeg(image);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/jpeg");
  }
  res.set_header("Vary", "Accept");
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ApiError(ApiCode::invalid_input, std::string("request body is not valid JSON: ") + e.what());
  }
}

bool terminal(JobState s) {
  return s == JobState::completed || s == JobState::failed || s == JobState::cancelled;
}

}  // namespace

struct Service::Impl {
  pipeline::Engine& engine;
  ServiceConfig config;
  httplib::Server server;
  synthgen::CropStore crops;
  std::atomic<bool> stopping{false};
  int port = -1;

  Impl(pipeline::Engine& e, ServiceConfig c)
      : engine(e),
        config(std::move(c)),
        crops(config.crops_dir.empty() ? e.home() / "crops" : config.crops_dir) {
    routes();
  }

  template <typename F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ApiError& e) {
        send_error(res, e.code, e.what());
      } catch (const Error& e) {
        send_error(res, api_code(e.kind()), e.what(), {{"kind", to_string(e.kind())}});
      } catch (const json::exception& e) {
        send_error(res, ApiCode::invalid_input, e.what());
      } catch (const std::exception& e) {
        send_error(res, ApiCode::backend_failure, e.what());
      }
    };
  }

  pipeline::Session session_or_404(const std::string& id) const {
    auto s = engine.find_session(id);
    if (!s) throw NotFoundError("session " + id + " not found");
    return std::move(*s);
  }

  pipeline::PipelineJob job_or_404(const std::string& id) const {
    auto j = engine.job(id);
    if (!j) throw NotFoundError("job " + id + " not found");
    return std::move(*j);
  }

  /// Results directory of the requested job, or of the latest completed one.
  std::pair<pipeline::PipelineJob, std::filesystem::path> results(const httplib::Request& req,
                                                                  const std::string& session_id) const {
    session_or_404(session_id);
    pipeline::PipelineJob job;
    if (req.has_param("job")) {
      job = job_or_404(req.get_param_value("job"));
      if (job.session_id != session_id) throw NotFoundError("job " + job.job_id + " belongs to another session");
      if (job.state != JobState::completed) throw NotFoundError("job " + job.job_id + " has no results yet");
    } else {
      auto latest = engine.latest_completed(session_id);
      if (!latest) throw NotFoundError("session " + session_id + " has no completed job");
      job = std::move(*latest);
    }
    return {job, engine.results_dir(session_id, job.job_id)};
  }

  static json session_summary(const pipeline::Session& s) {
    return {{"session_id", s.session_id},
            {"deployment_id", s.deployment_id},
            {"night_of", s.night_of},
            {"frames", s.frames.size()},
            {"first_capture", s.frames.empty() ? json(nullptr) : json(pipeline::format_local_time(s.frames.front().capture_time))},
            {"last_capture", s.frames.empty() ? json(nullptr) : json(pipeline::format_local_time(s.frames.back().capture_time))}};
  }

  static json crop_json(const synthgen::CropInfo& c) {
    return {{"id", c.id}, {"review_state", synthgen::to_string(c.review_state)}, {"width", c.width}, {"height", c.height}};
  }

  void routes() {
    auto& s = server;

    s.Get("/api/deployments", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::size_t> count;
      for (const auto& sess : engine.sessions()) ++count[sess.deployment_id];
      std::vector<json> items;
      for (const auto& [id, n] : count) items.push_back({{"deployment_id", id}, {"sessions", n}});
      send_json(res, paginate(items, req));
    }));

    s.Get("/api/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const std::string dep = req.has_param("deployment") ? req.get_param_value("deployment") : "";
      std::vector<json> items;
      for (const auto& sess : engine.sessions())
        if (dep.empty() || sess.deployment_id == dep) items.push_back(session_summary(sess));
      send_json(res, paginate(items, req));
    }));

    s.Get(R"(/api/sessions/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, session_summary(session_or_404(req.matches[1])));
    }));

    s.Get(R"(/api/sessions/([^/]+)/frames)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto sess = session_or_404(req.matches[1]);
      std::vector<json> items;
      for (std::size_t i = 0; i < sess.frames.size(); ++i) {
        const auto& f = sess.frames[i];
        items.push_back({{"frame_id", sess.session_id + "@" + std::to_string(i)},
                         {"index", i},
                         {"file", f.path.filename().string()},
                         {"capture_time", pipeline::format_local_time(f.capture_time)},
                         {"time_source", pipeline::to_string(f.source)}});
      }
      send_json(res, paginate(items, req));
    }));

    s.Get(R"(/api/sessions/([^/]+)/detections)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto [job, dir] = results(req, req.matches[1]);
      json page = paginate(read_jsonl(dir / "detections.jsonl"), req);
      page["job_id"] = job.job_id;
      send_json(res, page);
    }));

    s.Get(R"(/api/sessions/([^/]+)/tracks)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto [job, dir] = results(req, req.matches[1]);
      json page = paginate(read_jsonl(dir / "tracks.jsonl"), req);
      page["job_id"] = job.job_id;
      send_json(res, page);
    }));

    s.Get(R"(/api/sessions/([^/]+)/counts)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto [job, dir] = results(req, req.matches[1]);
      const std::string level = req.has_param("level") ? req.get_param_value("level") : "species";
      if (level != "species" && level != "genus" && level != "family")
        throw ApiError(ApiCode::invalid_input, "level must be species, genus or family");
      const json summary = json::parse(fs::read_text(dir / "counts.json"));
      if (level != "species" && !summary.value("rollup", false))
        throw ApiError(ApiCode::not_found, "no backbone loaded; only species counts are available");
      std::int64_t total = 0;
      for (const auto& c : summary["counts"][level]) total += c["count"].get<std::int64_t>();
      send_json(res, {{"session_id", summary["session_id"]},
                      {"job_id", job.job_id},
                      {"level", level},
                      {"counts", summary["counts"][level]},
                      {"total", total},
                      {"tracks", summary["tracks"]},
                      {"detections", summary["detections"]},
                      {"moths", summary["moths"]}});
    }));

    s.Get("/api/jobs", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::vector<json> items;
      for (const auto& j : engine.jobs()) {
        if (req.has_param("state") && pipeline::to_string(j.state) != req.get_param_value("state")) continue;
        if (req.has_param("session") && j.session_id != req.get_param_value("session")) continue;
        items.push_back(pipeline::to_json(j));
      }
      send_json(res, paginate(items, req));
    }));

    s.Post("/api/jobs", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.is_object() || !body.contains("session_id") || !body["session_id"].is_string())
        throw ApiError(ApiCode::invalid_input, "body needs a session_id string");
      if (!body.contains("spec")) throw ApiError(ApiCode::invalid_input, "body needs a spec object");
      const pipeline::JobSpec spec = pipeline::job_spec_from_json(body["spec"]);
      try {
        const auto r = engine.enqueue(body["session_id"].get<std::string>(), spec);
        send_json(res, {{"job", pipeline::to_json(r.job)}, {"existing", r.existing}});
      } catch (const NotFoundError& e) {
        throw ApiError(ApiCode::invalid_input, e.what());
      }
    }));

    s.Get(R"(/api/jobs/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, pipeline::to_json(job_or_404(req.matches[1])));
    }));

    s.Post(R"(/api/jobs/([^/]+)/cancel)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, pipeline::to_json(engine.cancel(req.matches[1])));
    }));

    s.Post(R"(/api/jobs/([^/]+)/retry)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, pipeline::to_json(engine.retry(req.matches[1])));
    }));

    s.Get(R"(/api/jobs/([^/]+)/events)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      job_or_404(id);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, id, last = std::string()](std::size_t, httplib::DataSink& sink) mutable {
            if (stopping) {
              sink.done();
              return true;
            }
            const auto job = engine.job(id);
            if (!job) {
              sink.done();
              return true;
            }
            const std::string payload = pipeline::to_json(*job).dump();
            if (payload != last) {
              const std::string event = "event: progress\ndata: " + payload + "\n\n";
              if (!sink.write(event.data(), event.size())) return false;
              last = payload;
            }
            if (terminal(job->state)) {
              sink.done();
              return true;
            }
            std::this_thread::sleep_for(config.event_poll);
            return true;
          });
    }));

    s.Get("/api/crops", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::vector<json> items;
      for (const auto& c : crops.list()) {
        if (req.has_param("review_state") && synthgen::to_string(c.review_state) != req.get_param_value("review_state"))
          continue;
        items.push_back(crop_json(c));
      }
      send_json(res, paginate(items, req));
    }));

    s.Get(R"(/api/crops/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto c = crops.get(req.matches[1]);
      if (!c) throw NotFoundError("crop " + std::string(req.matches[1]) + " not found");
      send_json(res, crop_json(*c));
    }));

    s.Patch(R"(/api/crops/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.is_object() || !body.contains("review_state") || !body["review_state"].is_string())
        throw ApiError(ApiCode::invalid_input, "body needs a review_state string");
      const auto state = synthgen::parse_review_state(body["review_state"].get<std::string>());
      send_json(res, crop_json(crops.set_review_state(req.matches[1], state)));
    }));

    s.Get(R"(/api/crops/([^/]+)/image)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      if (!crops.get(req.matches[1])) throw NotFoundError("crop " + std::string(req.matches[1]) + " not found");
      send_image(res, req, read_image(crops.image_path(req.matches[1])));
    }));

    s.Get(R"(/api/taxa/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto bb = engine.backbone();
      if (!bb) throw NotFoundError("no backbone loaded");
      const std::string text = req.matches[1];
      taxonomy::TaxonKey key = 0;
      const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), key);
      if (ec != std::errc() || p != text.data() + text.size())
        throw ApiError(ApiCode::invalid_input, "taxon key must be an integer");
      const auto& r = bb->at(key);
      const auto lin = bb->lineage(key);
      auto opt = [](const std::optional<taxonomy::TaxonKey>& k) { return k ? json(*k) : json(nullptr); };
      send_json(res, {{"taxon_key", r.taxon_key},
                      {"scientific_name", r.scientific_name},
                      {"rank", taxonomy::to_string(r.rank)},
                      {"status", taxonomy::to_string(r.status)},
                      {"accepted_key", opt(r.accepted_key)},
                      {"parent_key", opt(r.parent_key)},
                      {"lineage", {{"species", opt(lin.species)}, {"genus", opt(lin.genus)}, {"family", lin.family}}}});
    }));

    s.Get("/api/models", wrap([this](const httplib::Request& req, httplib::Response& res) {
      std::vector<json> items;
      const auto path = engine.home() / "models.json";
      if (std::filesystem::exists(path)) {
        for (const auto& m : json::parse(fs::read_text(path))) items.push_back(inference::to_json(inference::model_spec_from_json(m)));
      } else {
        items.push_back(inference::to_json(inference::ModelSpec{inference::Stage::detector, inference::Backend::blob,
                                                                 "threshold=40;min_area=100", 0.5, 128}));
      }
      send_json(res, paginate(items, req));
    }));

    s.Get(R"(/api/frames/([^/]+)/image)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto at = id.rfind('@');
      if (at == std::string::npos) throw ApiError(ApiCode::invalid_input, "frame id must be <session>@<index>");
      const auto sess = session_or_404(id.substr(0, at));
      const std::size_t index = parse_size(id.substr(at + 1), "frame index");
      if (index >= sess.frames.size()) throw NotFoundError("frame " + id + " not found");
      send_image(res, req, read_image(sess.frames[index].path));
    }));

    s.Get(R"(/api/detections/([^/]+)/crop)", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto c1 = id.find(':'), c2 = id.rfind(':');
      if (c1 == std::string::npos || c1 == c2)
        throw ApiError(ApiCode::invalid_input, "detection id must be <job>:<frame>:<index>");
      const auto job = job_or_404(id.substr(0, c1));
      const std::size_t frame = parse_size(id.substr(c1 + 1, c2 - c1 - 1), "frame index");
      const std::size_t index = parse_size(id.substr(c2 + 1), "detection index");
      const auto state = engine.store().ledger(job.job_id).read();
      const auto rec = state.ok.find(frame);
      if (rec == state.ok.end()) throw NotFoundError("detection " + id + " not found");
      const auto det = std::find_if(rec->second.detections.begin(), rec->second.detections.end(),
                                    [&](const inference::Detection& d) { return d.index == index; });
      if (det == rec->second.detections.end()) throw NotFoundError("detection " + id + " not found");
      const auto sess = session_or_404(job.session_id);
      const Raster image = read_image(sess.frames.at(frame).path);
      const int x0 = std::clamp(static_cast<int>(std::floor(det->box.x_min)), 0, image.width() - 1);
      const int y0 = std::clamp(static_cast<int>(std::floor(det->box.y_min)), 0, image.height() - 1);
      const int x1 = std::clamp(static_cast<int>(std::ceil(det->box.x_max)), x0 + 1, image.width());
      const int y1 = std::clamp(static_cast<int>(std::ceil(det->box.y_max)), y0 + 1, image.height());
      send_image(res, req, image.sub_image(x0, y0, x1, y1));
    }));

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, ApiCode::not_found, "no such endpoint");
    });
  }
};

Service::Service(pipeline::Engine& engine, ServiceConfig config)
    : impl_(std::make_unique<Impl>(engine, std::move(config))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& im = *impl_;
  if (im.config.port == 0) im.port = im.server.bind_to_any_port(im.config.host);
  else im.port = im.server.bind_to_port(im.config.host, im.config.port) ? im.config.port : -1;
  if (im.port < 0) throw IoError("cannot bind " + im.config.host + ":" + std::to_string(im.config.port));
  return im.port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
}

}  // namespace ami::service
