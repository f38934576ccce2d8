#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include "ami/core/fs.hpp"
#include "ami/inference/types.hpp"
#include "json.hpp"

namespace ami::pipeline {

enum class JobState { queued, running, completed, failed, cancelled };
std::string_view to_string(JobState s);
JobState parse_job_state(std::string_view text);

/// queued→running, running→{completed, failed, cancelled}, queued→cancelled,
/// failed→queued.
bool legal_transition(JobState from, JobState to);

struct TrackerParams {
  double w_iou = 0.25, w_size = 0.25, w_dist = 0.25, w_feat = 0.25;
  double gate = 0.8;
  friend bool operator==(const TrackerParams&, const TrackerParams&) = default;
};

struct JobSpec {
  inference::StageSpecs stages;
  TrackerParams tracker;
  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

nlohmann::json to_json(const JobSpec& spec);
JobSpec job_spec_from_json(const nlohmann::json& j);

/// "job-" + 12 hex digits of SHA-256 over the session id and the canonical
/// spec JSON. Doubles as the idempotency key of enqueue.
std::string make_job_id(const std::string& session_id, const JobSpec& spec);

struct Lease {
  std::string worker_id;
  std::int64_t pid = 0;
  std::string host;
  std::int64_t expires_at = 0;  // unix seconds
  friend bool operator==(const Lease&, const Lease&) = default;
};

struct PipelineJob {
  std::string job_id;
  std::string session_id;
  JobSpec spec;
  JobState state = JobState::queued;
  std::size_t frames_done = 0;  // committed frames, successful or failed
  std::size_t frames_failed = 0;
  std::size_t frames_total = 0;
  std::optional<std::string> error;
  std::size_t seq = 0;       // enqueue order
  std::size_t attempts = 0;  // claims, including takeovers
  std::optional<Lease> lease;
  friend bool operator==(const PipelineJob&, const PipelineJob&) = default;
};

nlohmann::json to_json(const PipelineJob& job);
PipelineJob pipeline_job_from_json(const nlohmann::json& j);

/// False only when the lease's process is known to be gone. Only leases taken
/// on this host can be checked; others count as alive until they expire.
using LivenessCheck = std::function<bool(const Lease&)>;
bool lease_process_alive(const Lease& lease);
std::string local_host_name();

/// In-memory job table. Every state change of the queue goes through these
/// methods; the on-disk store loads, mutates and saves a table under a lock.
class JobTable {
 public:
  struct EnqueueResult {
    PipelineJob job;
    bool existing = false;
  };

  EnqueueResult enqueue(const std::string& session_id, const JobSpec& spec, std::size_t frames_total);

  const std::vector<PipelineJob>& jobs() const noexcept { return jobs_; }
  const PipelineJob* find(const std::string& job_id) const;
  const PipelineJob& at(const std::string& job_id) const;  // NotFoundError

  /// Leases the first queued job in enqueue order, or failing that a running
  /// job whose lease expired or whose process is gone. `only_running`
  /// restricts the search to such takeovers.
  std::optional<std::string> claim(const Lease& lease, std::int64_t now, const LivenessCheck& alive,
                                   bool only_running = false);
  bool lease_stale(const PipelineJob& job, std::int64_t now, const LivenessCheck& alive) const;

  /// Whether `worker_id` holds an unexpired lease on a running job.
  bool holds(const std::string& job_id, const std::string& worker_id, std::int64_t now) const;
  /// Extends the holder's lease; ConflictError if the worker no longer holds it.
  void renew(const std::string& job_id, const std::string& worker_id, std::int64_t now, std::int64_t expires_at);

  /// ConflictError on an illegal transition. Leaving `running` drops the lease.
  void transition(const std::string& job_id, JobState to, std::optional<std::string> error = std::nullopt);
  void set_progress(const std::string& job_id, std::size_t done, std::size_t failed);

  nlohmann::json to_json() const;
  static JobTable from_json(const nlohmann::json& j);

 private:
  PipelineJob& mut(const std::string& job_id);
  std::vector<PipelineJob> jobs_;
};

/// One committed frame outcome in a job's ledger.
struct FrameRecord {
  std::size_t frame_index = 0;
  bool ok = true;
  std::vector<inference::Detection> detections;
  int width = 0, height = 0;
  std::string error;
};

nlohmann::json to_json(const FrameRecord& r);
FrameRecord frame_record_from_json(const nlohmann::json& j);

struct LedgerState {
  std::map<std::size_t, FrameRecord> ok;   // first committed success per frame
  std::map<std::size_t, std::string> failed;  // failures since the last retry marker
  std::size_t records = 0;  // frame records, including superseded ones
};

/// Append-only JSON Lines file. A torn final line (a crash mid-append) is
/// ignored on read and cut off by repair().
class Ledger {
 public:
  explicit Ledger(std::filesystem::path path) : path_(std::move(path)) {}
  LedgerState read() const;
  void repair() const;
  void append(const FrameRecord& record) const;
  void append_retry_marker() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// The job table persisted at <home>/jobs/table.json. Every operation is a
/// read-modify-write under an exclusive file lock, so separate processes
/// sharing the directory see one serial history.
class JobStore {
 public:
  explicit JobStore(std::filesystem::path home);

  JobTable load() const;
  /// Runs f on the table under the lock and saves it if f returns normally.
  template <typename F>
  auto update(F&& f) const {
    fs::FileLock lock(lock_path());
    JobTable table = load_unlocked();
    if constexpr (std::is_void_v<decltype(f(table))>) {
      f(table);
      save_unlocked(table);
    } else {
      auto result = f(table);
      save_unlocked(table);
      return result;
    }
  }

  std::filesystem::path job_dir(const std::string& job_id) const { return home_ / "jobs" / job_id; }
  Ledger ledger(const std::string& job_id) const { return Ledger(job_dir(job_id) / "ledger.jsonl"); }

  /// failed→queued plus a ledger marker so that failed frames run again.
  PipelineJob retry(const std::string& job_id) const;
  PipelineJob cancel(const std::string& job_id) const;

 private:
  std::filesystem::path lock_path() const { return home_ / "jobs" / ".lock"; }
  JobTable load_unlocked() const;
  void save_unlocked(const JobTable& table) const;
  std::filesystem::path home_;
};

}  // namespace ami::pipeline
