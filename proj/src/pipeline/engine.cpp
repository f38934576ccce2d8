#include "ami/pipeline/engine.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/image_io.hpp"
#include "ami/inference/stages.hpp"
#include "ami/tracking/tracking.hpp"

namespace ami::pipeline {

using json = nlohmann::json;

EngineConfig EngineConfig::load(const std::filesystem::path& home) {
  EngineConfig c;
  const auto path = home / "config.json";
  if (!std::filesystem::exists(path)) return c;
  json j;
  try {
    j = json::parse(fs::read_text(path));
    if (j.contains("data_root")) c.data_root = j["data_root"].get<std::string>();
    c.failure_threshold = j.value("failure_threshold", c.failure_threshold);
    c.lease_seconds = j.value("lease_seconds", c.lease_seconds);
    c.frame_workers = j.value("frame_workers", c.frame_workers);
    c.discovery.filename_pattern = j.value("filename_pattern", c.discovery.filename_pattern);
    c.discovery.mtime_fallback = j.value("mtime_fallback", c.discovery.mtime_fallback);
  } catch (const json::exception& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
  if (!(c.failure_threshold >= 0 && c.failure_threshold <= 1))
    throw ConfigurationError("failure_threshold must lie in [0,1]");
  if (c.lease_seconds <= 0) throw ConfigurationError("lease_seconds must be positive");
  if (c.frame_workers < 1) throw ConfigurationError("frame_workers must be at least 1");
  return c;
}

json EngineConfig::to_json() const {
  return {{"data_root", data_root.string()},
          {"failure_threshold", failure_threshold},
          {"lease_seconds", lease_seconds},
          {"frame_workers", frame_workers},
          {"filename_pattern", discovery.filename_pattern},
          {"mtime_fallback", discovery.mtime_fallback}};
}

std::filesystem::path default_home() {
  if (const char* env = std::getenv("AMI_HOME"); env && *env) return env;
  return "ami_home";
}

Engine::Engine(std::filesystem::path home)
    : home_(std::move(home)), config_(EngineConfig::load(home_)), store_(home_) {}

void Engine::set_config(EngineConfig config) {
  config_ = std::move(config);
  fs::atomic_write(home_ / "config.json", config_.to_json().dump(2) + "\n");
}

std::int64_t Engine::now() const {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

DiscoveryResult Engine::discover(const std::optional<std::filesystem::path>& root) {
  const auto dir = root ? *root : config_.data_root;
  if (dir.empty()) throw ConfigurationError("no data root configured");
  DiscoveryResult r = discover_sessions(dir, config_.discovery);
  fs::atomic_write(home_ / "sessions.json", to_json(r).dump(1) + "\n");
  return r;
}

std::vector<Session> Engine::sessions() const {
  const auto path = home_ / "sessions.json";
  if (!std::filesystem::exists(path)) return {};
  std::vector<Session> out;
  try {
    const json doc = json::parse(fs::read_text(path));
    for (const auto& s : doc.at("sessions")) out.push_back(session_from_json(s));
  } catch (const json::exception& e) {
    throw DataIntegrityError(path.string() + ": " + e.what());
  }
  return out;
}

std::optional<Session> Engine::find_session(const std::string& session_id) const {
  for (Session& s : sessions())
    if (s.session_id == session_id) return std::move(s);
  return std::nullopt;
}

std::vector<std::string> Engine::deployments() const {
  std::vector<std::string> out;
  for (const Session& s : sessions())
    if (out.empty() || out.back() != s.deployment_id) out.push_back(s.deployment_id);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::shared_ptr<const taxonomy::Backbone> Engine::backbone() const {
  std::lock_guard lock(backbone_mutex_);
  if (!backbone_loaded_) {
    const auto path = home_ / "backbone.csv";
    if (std::filesystem::exists(path))
      backbone_ = std::make_shared<const taxonomy::Backbone>(taxonomy::Backbone::load_csv(path));
    backbone_loaded_ = true;
  }
  return backbone_;
}

JobTable::EnqueueResult Engine::enqueue(const std::string& session_id, const JobSpec& spec) {
  const auto session = find_session(session_id);
  if (!session) throw NotFoundError("session " + session_id + " not found");
  inference::validate(spec.stages.detector);
  inference::validate(spec.stages.binary);
  if (spec.stages.species) inference::validate(*spec.stages.species);
  if (spec.stages.life_stage) inference::validate(*spec.stages.life_stage);
  return store_.update([&](JobTable& t) { return t.enqueue(session_id, spec, session->frames.size()); });
}

std::optional<PipelineJob> Engine::job(const std::string& job_id) const {
  const JobTable t = store_.load();
  if (const PipelineJob* j = t.find(job_id)) return *j;
  return std::nullopt;
}

namespace {

std::string make_worker_id() {
  static std::atomic<int> counter{0};
  return local_host_name() + ":" + std::to_string(::getpid()) + ":" + std::to_string(counter++);
}

FrameRecord process_frame(const Session& session, std::size_t index, inference::StageBackends& backends) {
  FrameRecord r;
  r.frame_index = index;
  try {
    const Raster image = read_image(session.frames[index].path);
    r.width = image.width();
    r.height = image.height();
    r.detections = inference::run_stages(image, backends);
  } catch (const Error& e) {
    r = FrameRecord{};
    r.frame_index = index;
    r.ok = false;
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return r;
}

}  // namespace

std::size_t Engine::work(const WorkOptions& options) {
  const std::string worker = options.worker_id.empty() ? make_worker_id() : options.worker_id;
  std::size_t ran = 0;
  while (!options.max_jobs || ran < *options.max_jobs) {
    const Lease lease{worker, ::getpid(), local_host_name(), now() + config_.lease_seconds};
    const auto claimed = store_.update([&](JobTable& t) {
      return t.claim(lease, now(), lease_process_alive, options.only_stale_running);
    });
    if (!claimed) break;
    run_job(*claimed, worker, options);
    ++ran;
  }
  return ran;
}

std::size_t Engine::run_workers(int n) {
  if (n < 1) throw ConfigurationError("worker count must be positive");
  std::vector<std::thread> threads;
  std::atomic<std::size_t> total{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    threads.emplace_back([&, i] {
      try {
        total += work({});
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return total;
}

std::size_t Engine::resume() {
  WorkOptions o;
  o.only_stale_running = true;
  return work(o);
}

void Engine::run_job(const std::string& job_id, const std::string& worker, const WorkOptions& options) {
  const PipelineJob job = store_.load().at(job_id);
  auto fail_job = [&](const std::string& message) {
    store_.update([&](JobTable& t) {
      if (t.holds(job_id, worker, now())) t.transition(job_id, JobState::failed, message);
    });
  };
  const auto session = find_session(job.session_id);
  if (!session) return fail_job("session " + job.session_id + " not found");
  if (session->frames.size() != job.frames_total)
    return fail_job("session " + job.session_id + " changed since the job was enqueued");

  std::filesystem::create_directories(store_.job_dir(job_id));
  const Ledger ledger = store_.ledger(job_id);
  LedgerState state;
  try {
    // Only the lease holder touches the ledger, so the repair cannot race.
    ledger.repair();
    state = ledger.read();
  } catch (const Error& e) {
    return fail_job(e.what());
  }

  std::unique_ptr<inference::StageBackends> backends;
  try {
    backends = std::make_unique<inference::StageBackends>(job.spec.stages);
  } catch (const Error& e) {
    return fail_job(std::string(to_string(e.kind())) + ": " + e.what());
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < session->frames.size(); ++i)
    if (!state.ok.count(i) && !state.failed.count(i)) todo.push_back(i);

  const std::size_t batch = static_cast<std::size_t>(config_.frame_workers);
  for (std::size_t start = 0; start < todo.size(); start += batch) {
    const std::size_t end = std::min(todo.size(), start + batch);
    std::vector<FrameRecord> records(end - start);
    if (end - start == 1) {
      records[0] = process_frame(*session, todo[start], *backends);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t k = start; k < end; ++k)
        threads.emplace_back([&, k] { records[k - start] = process_frame(*session, todo[k], *backends); });
      for (auto& t : threads) t.join();
    }
    for (FrameRecord& r : records) {
      const std::size_t frame = r.frame_index;
      const bool committed = store_.update([&](JobTable& t) {
        const std::int64_t ts = now();
        if (!t.holds(job_id, worker, ts)) return false;
        ledger.append(r);
        if (r.ok) state.ok.emplace(frame, std::move(r));
        else state.failed[frame] = r.error;
        t.set_progress(job_id, state.ok.size() + state.failed.size(), state.failed.size());
        t.renew(job_id, worker, ts, ts + config_.lease_seconds);
        return true;
      });
      if (!committed) return;  // cancelled or lease lost
      if (options.after_commit) options.after_commit(job_id, frame);
    }
  }

  const std::size_t total = session->frames.size();
  const std::size_t failed = state.failed.size();
  if (total > 0 && static_cast<double>(failed) > config_.failure_threshold * static_cast<double>(total))
    return fail_job(std::to_string(failed) + " of " + std::to_string(total) + " frames failed");
  try {
    write_outputs(job, *session, state);
  } catch (const Error& e) {
    return fail_job(std::string(to_string(e.kind())) + ": " + e.what());
  }
  store_.update([&](JobTable& t) {
    if (t.holds(job_id, worker, now())) t.transition(job_id, JobState::completed);
  });
}

void Engine::write_outputs(const PipelineJob& job, const Session& session, const LedgerState& ledger) const {
  const auto dir = results_dir(session.session_id, job.job_id);
  std::filesystem::create_directories(dir);

  std::string detections;
  std::vector<std::vector<inference::Detection>> moth_frames(session.frames.size());
  std::size_t n_dets = 0, n_moths = 0;
  double diag = 0;
  for (const auto& [index, rec] : ledger.ok) {
    if (diag == 0 && rec.width > 0) diag = std::hypot(double(rec.width), double(rec.height));
    for (const auto& d : rec.detections) {
      json j = inference::to_json(d);
      j["session_id"] = session.session_id;
      j["frame_index"] = index;
      j["frame"] = session.frames[index].path.filename().string();
      j["detection_id"] = job.job_id + ":" + std::to_string(index) + ":" + std::to_string(d.index);
      detections += j.dump() + "\n";
      ++n_dets;
      if (d.binary && d.binary->label == inference::BinaryLabel::moth) {
        moth_frames[index].push_back(d);
        ++n_moths;
      }
    }
  }

  tracking::TrackerConfig tc;
  const TrackerParams& tp = job.spec.tracker;
  tc.weights = tracking::CostWeights(tp.w_iou, tp.w_size, tp.w_dist, tp.w_feat);
  tc.gate = tp.gate;
  tc.image_diag = diag > 0 ? diag : 1.0;
  const auto tracks = tracking::track_session(moth_frames, tc);
  std::string tracks_text;
  for (const auto& t : tracks) tracks_text += tracking::to_json(t, session.session_id).dump() + "\n";

  json counts_json;
  if (const auto bb = backbone()) {
    counts_json = tracking::to_json(tracking::count_individuals(tracks, *bb));
  } else {
    tracking::Counts c;
    for (const auto& t : tracks) ++c.species[t.consensus ? t.consensus->taxon_key : tracking::kUnclassified];
    counts_json = tracking::to_json(c);
  }
  const json summary = {{"session_id", session.session_id},
                        {"job_id", job.job_id},
                        {"frames", session.frames.size()},
                        {"frames_failed", ledger.failed.size()},
                        {"detections", n_dets},
                        {"moths", n_moths},
                        {"tracks", tracks.size()},
                        {"rollup", backbone() != nullptr},
                        {"counts", counts_json}};
  fs::atomic_write(dir / "detections.jsonl", detections);
  fs::atomic_write(dir / "tracks.jsonl", tracks_text);
  fs::atomic_write(dir / "counts.json", summary.dump(2) + "\n");
}

std::optional<PipelineJob> Engine::latest_completed(const std::string& session_id) const {
  std::optional<PipelineJob> best;
  for (const PipelineJob& j : jobs())
    if (j.session_id == session_id && j.state == JobState::completed && (!best || j.seq > best->seq)) best = j;
  return best;
}

std::string Engine::export_session(const std::string& session_id, const std::string& format) const {
  if (format != "jsonl" && format != "csv") throw InputError("export format must be jsonl or csv");
  const auto job = latest_completed(session_id);
  if (!job) throw NotFoundError("session " + session_id + " has no completed job");
  const auto dir = results_dir(session_id, job->job_id);
  std::vector<tracking::Track> tracks;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> track_of;
  {
    std::istringstream in(fs::read_text(dir / "tracks.jsonl"));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      tracks.push_back(tracking::track_from_json(json::parse(line)));
      for (const auto& item : tracks.back().items)
        track_of[{item.frame_index, item.detection_index}] = tracks.back().track_id;
    }
  }
  std::string out;
  if (format == "jsonl") {
    std::istringstream in(fs::read_text(dir / "detections.jsonl"));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      json j = json::parse(line);
      const auto it = track_of.find({j["frame_index"].get<std::size_t>(), j["index"].get<std::size_t>()});
      j["track_id"] = it == track_of.end() ? json(nullptr) : json(it->second);
      out += j.dump() + "\n";
    }
    return out;
  }
  out = csv::format_row({"session_id", "job_id", "track_id", "taxon_key", "mean_probability", "detections",
                         "first_frame", "last_frame"});
  for (const auto& t : tracks) {
    out += csv::format_row({session_id, job->job_id, std::to_string(t.track_id),
                            t.consensus ? std::to_string(t.consensus->taxon_key) : "",
                            t.consensus ? json(t.consensus->mean_probability).dump() : "",
                            std::to_string(t.items.size()), std::to_string(t.items.front().frame_index),
                            std::to_string(t.items.back().frame_index)});
  }
  return out;
}

}  // namespace ami::pipeline
