#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ami/dwca/archive.hpp"
#include "ami/taxonomy/checklist.hpp"

namespace ami::dwca {

/// Fetches one URL. Returns the body, or nullopt with `error` filled in.
using Downloader = std::function<std::optional<std::vector<std::uint8_t>>(const std::string& url, std::string& error)>;

/// http:// via a blocking client, file:// from the local filesystem.
Downloader default_downloader(std::chrono::milliseconds timeout = std::chrono::seconds(20));

struct FetchOptions {
  std::filesystem::path cache_dir;
  int concurrency = 4;
  int retries = 2;
  bool retry_failed = false;  // re-attempt records already marked fetch_failed
  Downloader downloader;      // empty: default_downloader()
};

struct FetchStats {
  std::size_t downloads = 0;  // network requests issued, retries included
  std::size_t cache_hits = 0;
  std::size_t failures = 0;
};

/// Path of a cached object relative to the cache directory.
std::filesystem::path cache_object_path(const std::string& content_hash);

/// Downloads each distinct URL once, stores the bytes under the cache keyed
/// by SHA-256 and fills content_hash/width/height. Already-cached URLs are
/// never downloaded again. Per-URL failures become verdict fetch_failed.
FetchStats fetch_media(std::vector<MediaRecord>& records, const FetchOptions& options);

struct CleaningRules {
  int thumbnail_min_px = 128;
  std::set<std::string> dataset_blacklist;
  std::set<std::string> adult_stages = {"adult", "imago"};
};

/// Optional slot for records without life-stage metadata: returns a stage
/// label, or nullopt when it cannot decide.
using LifeStageClassifier = std::function<std::optional<std::string>(const MediaRecord&)>;

struct CleaningSummary {
  std::map<Verdict, std::size_t> counts;
  std::size_t total = 0;
  std::size_t needs_review = 0;
};

/// Applies, first match wins: blacklisted_dataset, non_adult, duplicate,
/// thumbnail; everything else is kept. Duplicates are detected scanning in
/// occurrence_id order, so the kept copy has the smallest occurrence_id.
CleaningSummary clean_media(const std::vector<OccurrenceRecord>& occurrences, std::vector<MediaRecord>& media,
                            const CleaningRules& rules, const LifeStageClassifier& classifier = {});

struct ManifestRow {
  std::string path;
  std::int64_t taxon_key = 0;
  std::string content_hash;
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct ExportReject {
  std::string occurrence_id;
  std::int64_t taxon_key = 0;
  std::string reason;
};

struct ExportResult {
  std::vector<ManifestRow> rows;
  std::vector<ExportReject> rejects;
};

inline constexpr std::size_t kDefaultCapPerSpecies = 1000;

/// Training manifest from kept media. Species above the cap are subsampled
/// uniformly with a generator seeded from (seed, taxon_key). Rows are sorted
/// by (taxon_key, content_hash).
ExportResult export_training_set(const std::vector<OccurrenceRecord>& occurrences,
                                 const std::vector<MediaRecord>& media,
                                 const std::vector<taxonomy::ChecklistEntry>& checklist,
                                 const std::filesystem::path& cache_dir, std::size_t cap_per_species,
                                 std::uint64_t seed);

std::string format_manifest(const std::vector<ManifestRow>& rows);
std::string format_rejects(const std::vector<ExportReject>& rejects);

// JSON Lines persistence used between CLI steps.
std::string occurrences_to_jsonl(const std::vector<OccurrenceRecord>& records);
std::vector<OccurrenceRecord> occurrences_from_jsonl(std::string_view text);
std::string media_to_jsonl(const std::vector<MediaRecord>& records);
std::vector<MediaRecord> media_from_jsonl(std::string_view text);

}  // namespace ami::dwca
