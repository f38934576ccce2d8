#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ami/pipeline/jobs.hpp"
#include "ami/pipeline/session.hpp"
#include "ami/taxonomy/backbone.hpp"

namespace ami::pipeline {

/// <home>/config.json. Missing keys take these defaults.
struct EngineConfig {
  std::filesystem::path data_root;
  double failure_threshold = 0.1;  // a job fails when more than this fraction of frames fail
  std::int64_t lease_seconds = 300;
  int frame_workers = 1;
  DiscoveryOptions discovery;

  static EngineConfig load(const std::filesystem::path& home);
  nlohmann::json to_json() const;
};

/// Shared core behind the CLI and the HTTP service. Engine home layout:
///   config.json, sessions.json, backbone.csv (optional), models.json (optional),
///   jobs/table.json, jobs/<job>/ledger.jsonl,
///   results/<session>/<job>/{detections.jsonl, tracks.jsonl, counts.json}
class Engine {
 public:
  explicit Engine(std::filesystem::path home);

  const std::filesystem::path& home() const noexcept { return home_; }
  const EngineConfig& config() const noexcept { return config_; }
  void set_config(EngineConfig config);
  const JobStore& store() const noexcept { return store_; }

  /// Scans the configured data root (or `root`) and replaces sessions.json.
  DiscoveryResult discover(const std::optional<std::filesystem::path>& root = std::nullopt);
  std::vector<Session> sessions() const;
  std::optional<Session> find_session(const std::string& session_id) const;
  std::vector<std::string> deployments() const;

  /// Null when the home has no backbone.csv.
  std::shared_ptr<const taxonomy::Backbone> backbone() const;

  /// NotFoundError for an unknown session, ConfigurationError for bad specs.
  JobTable::EnqueueResult enqueue(const std::string& session_id, const JobSpec& spec);
  PipelineJob cancel(const std::string& job_id) { return store_.cancel(job_id); }
  PipelineJob retry(const std::string& job_id) { return store_.retry(job_id); }
  std::optional<PipelineJob> job(const std::string& job_id) const;
  std::vector<PipelineJob> jobs() const { return store_.load().jobs(); }

  struct WorkOptions {
    std::string worker_id;        // generated when empty
    bool only_stale_running = false;  // resume mode: only take over abandoned jobs
    std::optional<std::size_t> max_jobs;
    /// Called after each frame record is committed.
    std::function<void(const std::string& job_id, std::size_t frame_index)> after_commit;
  };
  /// Claims and runs jobs until none is claimable. Returns the number run.
  std::size_t work(const WorkOptions& options);
  /// n worker threads in this process, each running work().
  std::size_t run_workers(int n);
  /// Takes over running jobs whose worker died or whose lease expired, and
  /// finishes them; frames already committed are not recomputed.
  std::size_t resume();

  std::filesystem::path results_dir(const std::string& session_id, const std::string& job_id) const {
    return home_ / "results" / session_id / job_id;
  }
  /// Most recently enqueued completed job of the session.
  std::optional<PipelineJob> latest_completed(const std::string& session_id) const;

  /// jsonl: one detection per line with its track id; csv: one row per track.
  std::string export_session(const std::string& session_id, const std::string& format) const;

 private:
  void run_job(const std::string& job_id, const std::string& worker_id, const WorkOptions& options);
  void write_outputs(const PipelineJob& job, const Session& session, const LedgerState& ledger) const;
  std::int64_t now() const;

  std::filesystem::path home_;
  EngineConfig config_;
  JobStore store_;
  mutable std::mutex backbone_mutex_;
  mutable std::shared_ptr<const taxonomy::Backbone> backbone_;
  mutable bool backbone_loaded_ = false;
};

/// Engine home from $AMI_HOME, else ./ami_home.
std::filesystem::path default_home();

}  // namespace ami::pipeline
