#include "ami/pipeline/jobs.hpp"

#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <fstream>

#include "ami/core/error.hpp"
#include "ami/core/hash.hpp"

namespace ami::pipeline {

using json = nlohmann::json;

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::completed: return "completed";
    case JobState::failed: return "failed";
    case JobState::cancelled: return "cancelled";
  }
  return "?";
}

JobState parse_job_state(std::string_view text) {
  for (JobState s : {JobState::queued, JobState::running, JobState::completed, JobState::failed, JobState::cancelled})
    if (to_string(s) == text) return s;
  throw ParseError("unknown job state '" + std::string(text) + "'");
}

bool legal_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::queued: return to == JobState::running || to == JobState::cancelled;
    case JobState::running:
      return to == JobState::completed || to == JobState::failed || to == JobState::cancelled;
    case JobState::failed: return to == JobState::queued;
    case JobState::completed:
    case JobState::cancelled: return false;
  }
  return false;
}

json to_json(const JobSpec& spec) {
  return {{"stages", inference::to_json(spec.stages)},
          {"tracker",
           {{"w_iou", spec.tracker.w_iou},
            {"w_size", spec.tracker.w_size},
            {"w_dist", spec.tracker.w_dist},
            {"w_feat", spec.tracker.w_feat},
            {"gate", spec.tracker.gate}}}};
}

JobSpec job_spec_from_json(const json& j) {
  JobSpec s;
  if (!j.is_object()) throw ConfigurationError("job spec must be a JSON object");
  s.stages = inference::stage_specs_from_json(j.contains("stages") ? j["stages"] : j);
  if (j.contains("tracker")) {
    const json& t = j["tracker"];
    s.tracker.w_iou = t.value("w_iou", 0.25);
    s.tracker.w_size = t.value("w_size", 0.25);
    s.tracker.w_dist = t.value("w_dist", 0.25);
    s.tracker.w_feat = t.value("w_feat", 0.25);
    s.tracker.gate = t.value("gate", 0.8);
  }
  const auto& t = s.tracker;
  for (double w : {t.w_iou, t.w_size, t.w_dist, t.w_feat})
    if (!(w >= 0)) throw ConfigurationError("tracker weights must be non-negative");
  if (t.w_iou + t.w_size + t.w_dist + t.w_feat <= 0) throw ConfigurationError("tracker weights must not all be zero");
  if (!(t.gate >= 0 && t.gate <= 1)) throw ConfigurationError("tracker gate must lie in [0,1]");
  return s;
}

std::string make_job_id(const std::string& session_id, const JobSpec& spec) {
  return "job-" + sha256_hex(session_id + "\n" + to_json(spec).dump()).substr(0, 12);
}

json to_json(const PipelineJob& job) {
  json j = {{"job_id", job.job_id},
            {"session_id", job.session_id},
            {"spec", to_json(job.spec)},
            {"state", to_string(job.state)},
            {"frames_done", job.frames_done},
            {"frames_failed", job.frames_failed},
            {"frames_total", job.frames_total},
            {"seq", job.seq},
            {"attempts", job.attempts}};
  j["error"] = job.error ? json(*job.error) : json(nullptr);
  if (job.lease)
    j["lease"] = {{"worker_id", job.lease->worker_id},
                  {"pid", job.lease->pid},
                  {"host", job.lease->host},
                  {"expires_at", job.lease->expires_at}};
  else
    j["lease"] = nullptr;
  return j;
}

PipelineJob pipeline_job_from_json(const json& j) {
  PipelineJob job;
  job.job_id = j.at("job_id").get<std::string>();
  job.session_id = j.at("session_id").get<std::string>();
  job.spec = job_spec_from_json(j.at("spec"));
  job.state = parse_job_state(j.at("state").get<std::string>());
  job.frames_done = j.at("frames_done").get<std::size_t>();
  job.frames_failed = j.value("frames_failed", std::size_t{0});
  job.frames_total = j.at("frames_total").get<std::size_t>();
  job.seq = j.value("seq", std::size_t{0});
  job.attempts = j.value("attempts", std::size_t{0});
  if (j.contains("error") && !j["error"].is_null()) job.error = j["error"].get<std::string>();
  if (j.contains("lease") && !j["lease"].is_null()) {
    const json& l = j["lease"];
    job.lease = Lease{l.at("worker_id").get<std::string>(), l.at("pid").get<std::int64_t>(),
                      l.at("host").get<std::string>(), l.at("expires_at").get<std::int64_t>()};
  }
  return job;
}

std::string local_host_name() {
  char buf[256] = {};
  if (::gethostname(buf, sizeof(buf) - 1) != 0) return "localhost";
  return buf;
}

bool lease_process_alive(const Lease& lease) {
  if (lease.host != local_host_name() || lease.pid <= 0) return true;
  return ::kill(static_cast<pid_t>(lease.pid), 0) == 0 || errno == EPERM;
}

JobTable::EnqueueResult JobTable::enqueue(const std::string& session_id, const JobSpec& spec,
                                          std::size_t frames_total) {
  const std::string id = make_job_id(session_id, spec);
  if (const PipelineJob* existing = find(id)) return {*existing, true};
  PipelineJob job;
  job.job_id = id;
  job.session_id = session_id;
  job.spec = spec;
  job.frames_total = frames_total;
  job.seq = jobs_.empty() ? 0 : jobs_.back().seq + 1;
  jobs_.push_back(job);
  return {job, false};
}

const PipelineJob* JobTable::find(const std::string& job_id) const {
  for (const PipelineJob& j : jobs_)
    if (j.job_id == job_id) return &j;
  return nullptr;
}

const PipelineJob& JobTable::at(const std::string& job_id) const {
  if (const PipelineJob* j = find(job_id)) return *j;
  throw NotFoundError("job " + job_id + " not found");
}

PipelineJob& JobTable::mut(const std::string& job_id) { return const_cast<PipelineJob&>(at(job_id)); }

bool JobTable::lease_stale(const PipelineJob& job, std::int64_t now, const LivenessCheck& alive) const {
  if (job.state != JobState::running) return false;
  if (!job.lease) return true;
  return job.lease->expires_at <= now || (alive && !alive(*job.lease));
}

std::optional<std::string> JobTable::claim(const Lease& lease, std::int64_t now, const LivenessCheck& alive,
                                           bool only_running) {
  PipelineJob* pick = nullptr;
  if (!only_running)
    for (PipelineJob& j : jobs_)
      if (j.state == JobState::queued) {
        pick = &j;
        break;
      }
  if (!pick)
    for (PipelineJob& j : jobs_)
      if (lease_stale(j, now, alive)) {
        pick = &j;
        break;
      }
  if (!pick) return std::nullopt;
  if (pick->state == JobState::queued) {
    pick->state = JobState::running;
    pick->error.reset();
  }
  pick->lease = lease;
  ++pick->attempts;
  return pick->job_id;
}

bool JobTable::holds(const std::string& job_id, const std::string& worker_id, std::int64_t now) const {
  const PipelineJob* j = find(job_id);
  return j && j->state == JobState::running && j->lease && j->lease->worker_id == worker_id &&
         j->lease->expires_at > now;
}

void JobTable::renew(const std::string& job_id, const std::string& worker_id, std::int64_t now,
                     std::int64_t expires_at) {
  if (!holds(job_id, worker_id, now)) throw ConflictError("worker " + worker_id + " no longer holds " + job_id);
  mut(job_id).lease->expires_at = expires_at;
}

void JobTable::transition(const std::string& job_id, JobState to, std::optional<std::string> error) {
  PipelineJob& j = mut(job_id);
  if (!legal_transition(j.state, to))
    throw ConflictError("job " + job_id + " cannot go from " + std::string(to_string(j.state)) + " to " +
                        std::string(to_string(to)));
  j.state = to;
  if (to != JobState::running) j.lease.reset();
  if (to == JobState::failed) j.error = error ? error : std::optional<std::string>("failed");
  else j.error = std::move(error);
}

void JobTable::set_progress(const std::string& job_id, std::size_t done, std::size_t failed) {
  PipelineJob& j = mut(job_id);
  j.frames_done = std::min(done, j.frames_total);
  j.frames_failed = failed;
}

json JobTable::to_json() const {
  json arr = json::array();
  for (const PipelineJob& j : jobs_) arr.push_back(pipeline::to_json(j));
  return {{"jobs", arr}};
}

JobTable JobTable::from_json(const json& j) {
  JobTable t;
  for (const auto& item : j.at("jobs")) t.jobs_.push_back(pipeline_job_from_json(item));
  return t;
}

json to_json(const FrameRecord& r) {
  json j = {{"type", "frame"}, {"frame_index", r.frame_index}, {"ok", r.ok}};
  if (r.ok) {
    json dets = json::array();
    for (const auto& d : r.detections) dets.push_back(inference::to_json(d));
    j["detections"] = std::move(dets);
    j["width"] = r.width;
    j["height"] = r.height;
  } else {
    j["error"] = r.error;
  }
  return j;
}

FrameRecord frame_record_from_json(const json& j) {
  FrameRecord r;
  r.frame_index = j.at("frame_index").get<std::size_t>();
  r.ok = j.at("ok").get<bool>();
  if (r.ok) {
    for (const auto& d : j.at("detections")) r.detections.push_back(inference::detection_from_json(d));
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
  } else {
    r.error = j.value("error", "");
  }
  return r;
}

LedgerState Ledger::read() const {
  LedgerState state;
  if (!std::filesystem::exists(path_)) return state;
  const std::string text = fs::read_text(path_);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final line
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataIntegrityError(path_.string() + ": corrupt ledger line: " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "retry") {
      state.failed.clear();
    } else if (type == "frame") {
      ++state.records;
      FrameRecord r = frame_record_from_json(j);
      if (state.ok.count(r.frame_index)) continue;
      if (r.ok) {
        state.failed.erase(r.frame_index);
        state.ok.emplace(r.frame_index, std::move(r));
      } else {
        state.failed[r.frame_index] = r.error;
      }
    }
  }
  return state;
}

void Ledger::repair() const {
  if (!std::filesystem::exists(path_)) return;
  const std::string text = fs::read_text(path_);
  if (text.empty() || text.back() == '\n') return;
  const std::size_t keep = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
  std::filesystem::resize_file(path_, keep);
}

void Ledger::append(const FrameRecord& record) const { fs::append_line_durable(path_, to_json(record).dump()); }

void Ledger::append_retry_marker() const { fs::append_line_durable(path_, json{{"type", "retry"}}.dump()); }

JobStore::JobStore(std::filesystem::path home) : home_(std::move(home)) {
  fs::ensure_writable_dir(home_ / "jobs");
}

JobTable JobStore::load() const {
  fs::FileLock lock(lock_path());
  return load_unlocked();
}

JobTable JobStore::load_unlocked() const {
  const auto path = home_ / "jobs" / "table.json";
  if (!std::filesystem::exists(path)) return {};
  try {
    return JobTable::from_json(json::parse(fs::read_text(path)));
  } catch (const json::exception& e) {
    throw DataIntegrityError(path.string() + ": " + e.what());
  }
}

void JobStore::save_unlocked(const JobTable& table) const {
  fs::atomic_write(home_ / "jobs" / "table.json", table.to_json().dump(1) + "\n");
}

PipelineJob JobStore::retry(const std::string& job_id) const {
  return update([&](JobTable& t) {
    t.transition(job_id, JobState::queued);
    const auto dir = job_dir(job_id);
    std::filesystem::create_directories(dir);
    Ledger l = ledger(job_id);
    l.repair();
    l.append_retry_marker();
    const LedgerState st = l.read();
    t.set_progress(job_id, st.ok.size(), 0);
    return t.at(job_id);
  });
}

PipelineJob JobStore::cancel(const std::string& job_id) const {
  return update([&](JobTable& t) {
    t.transition(job_id, JobState::cancelled);
    return t.at(job_id);
  });
}

}  // namespace ami::pipeline
