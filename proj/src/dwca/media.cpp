#include "ami/dwca/media.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include "json.hpp"
#include <random>
#include <sstream>
#include <thread>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/hash.hpp"
#include "ami/core/image_io.hpp"

namespace ami::dwca {

using json = nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct CacheEntry {
  std::string hash;
  int width = 0;
  int height = 0;
};

std::filesystem::path url_index_path(const std::filesystem::path& cache, const std::string& url) {
  return cache / "urls" / sha256_hex(url);
}

std::optional<CacheEntry> lookup_url(const std::filesystem::path& cache, const std::string& url) {
  const auto index = url_index_path(cache, url);
  if (!std::filesystem::exists(index)) return std::nullopt;
  std::istringstream in(fs::read_text(index));
  CacheEntry e;
  if (!(in >> e.hash >> e.width >> e.height)) return std::nullopt;
  if (!std::filesystem::exists(cache / cache_object_path(e.hash))) return std::nullopt;
  return e;
}

}  // namespace

std::filesystem::path cache_object_path(const std::string& content_hash) {
  return std::filesystem::path("objects") / content_hash.substr(0, 2) / content_hash;
}

Downloader default_downloader(std::chrono::milliseconds timeout) {
  return [timeout](const std::string& url, std::string& error) -> std::optional<std::vector<std::uint8_t>> {
    if (url.starts_with("file://")) {
      try {
        return fs::read_bytes(url.substr(7));
      } catch (const std::exception& e) {
        error = e.what();
        return std::nullopt;
      }
    }
    if (!url.starts_with("http://")) {
      error = "unsupported URL scheme";
      return std::nullopt;
    }
    const auto path_start = url.find('/', 7);
    const std::string host = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
    httplib::Client client(host);
    client.set_follow_location(true);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
    auto res = client.Get(path);
    if (!res) {
      error = httplib::to_string(res.error());
      return std::nullopt;
    }
    if (res->status != 200) {
      error = "HTTP " + std::to_string(res->status);
      return std::nullopt;
    }
    return std::vector<std::uint8_t>(res->body.begin(), res->body.end());
  };
}

FetchStats fetch_media(std::vector<MediaRecord>& records, const FetchOptions& options) {
  if (options.concurrency < 1) throw ConfigurationError("fetch concurrency must be positive");
  fs::ensure_writable_dir(options.cache_dir);
  fs::ensure_writable_dir(options.cache_dir / "objects");
  fs::ensure_writable_dir(options.cache_dir / "urls");
  const Downloader download = options.downloader ? options.downloader : default_downloader();

  FetchStats stats;
  // url → indices of records needing it
  std::map<std::string, std::vector<std::size_t>> pending;
  for (std::size_t i = 0; i < records.size(); ++i) {
    MediaRecord& r = records[i];
    if (r.verdict == Verdict::fetch_failed && !options.retry_failed) continue;
    if (auto hit = lookup_url(options.cache_dir, r.url)) {
      r.content_hash = hit->hash;
      r.width = hit->width;
      r.height = hit->height;
      if (r.verdict == Verdict::fetch_failed) r.verdict = Verdict::unreviewed;
      ++stats.cache_hits;
      continue;
    }
    pending[r.url].push_back(i);
  }

  struct Outcome {
    std::optional<CacheEntry> entry;
    std::string error;
    std::size_t attempts = 0;
  };
  std::vector<std::string> urls;
  for (const auto& [url, _] : pending) urls.push_back(url);
  std::vector<Outcome> outcomes(urls.size());
  std::atomic<std::size_t> next{0};
  std::mutex object_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= urls.size()) return;
      Outcome& out = outcomes[k];
      std::optional<std::vector<std::uint8_t>> body;
      for (int attempt = 0; attempt <= options.retries; ++attempt) {
        ++out.attempts;
        body = download(urls[k], out.error);
        if (body) break;
        if (attempt < options.retries) std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
      }
      if (!body) continue;
      Raster decoded;
      try {
        decoded = decode_image(*body);
      } catch (const InputError& e) {
        out.error = std::string("not a decodable image: ") + e.what();
        continue;
      }
      CacheEntry e{sha256_hex(*body), decoded.width(), decoded.height()};
      {
        const auto object = options.cache_dir / cache_object_path(e.hash);
        std::lock_guard lock(object_mutex);
        if (!std::filesystem::exists(object)) fs::atomic_write(object, *body, /*durable=*/false);
      }
      fs::atomic_write(url_index_path(options.cache_dir, urls[k]),
                       e.hash + " " + std::to_string(e.width) + " " + std::to_string(e.height) + "\n",
                       /*durable=*/false);
      out.entry = e;
    }
  };
  const int n_threads = std::min<int>(options.concurrency, static_cast<int>(urls.size()));
  std::vector<std::thread> threads;
  for (int t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  if (n_threads > 0) worker();
  for (auto& t : threads) t.join();

  for (std::size_t k = 0; k < urls.size(); ++k) {
    stats.downloads += outcomes[k].attempts;
    for (std::size_t i : pending[urls[k]]) {
      MediaRecord& r = records[i];
      if (outcomes[k].entry) {
        r.content_hash = outcomes[k].entry->hash;
        r.width = outcomes[k].entry->width;
        r.height = outcomes[k].entry->height;
        if (r.verdict == Verdict::fetch_failed) r.verdict = Verdict::unreviewed;
      } else {
        r.content_hash.reset();
        r.width.reset();
        r.height.reset();
        r.verdict = Verdict::fetch_failed;
        r.note = outcomes[k].error;
        ++stats.failures;
      }
    }
  }
  return stats;
}

CleaningSummary clean_media(const std::vector<OccurrenceRecord>& occurrences, std::vector<MediaRecord>& media,
                            const CleaningRules& rules, const LifeStageClassifier& classifier) {
  std::map<std::string, const OccurrenceRecord*> by_id;
  for (const auto& o : occurrences) by_id.emplace(o.occurrence_id, &o);
  std::set<std::string> adult;
  for (const auto& s : rules.adult_stages) adult.insert(lower(s));

  std::vector<std::size_t> order(media.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (media[a].occurrence_id != media[b].occurrence_id) return media[a].occurrence_id < media[b].occurrence_id;
    return media[a].url < media[b].url;
  });

  CleaningSummary summary;
  summary.total = media.size();
  std::set<std::string> kept_hashes;
  for (std::size_t i : order) {
    MediaRecord& m = media[i];
    const auto it = by_id.find(m.occurrence_id);
    const OccurrenceRecord* occ = it == by_id.end() ? nullptr : it->second;
    const bool failed = m.verdict == Verdict::fetch_failed;
    if (!failed) m.note.clear();

    std::optional<Verdict> verdict;
    if (occ && rules.dataset_blacklist.contains(occ->dataset_key)) verdict = Verdict::blacklisted_dataset;
    if (!verdict) {
      std::optional<std::string> stage = occ ? occ->life_stage : std::nullopt;
      if (!stage && classifier && !failed) stage = classifier(m);
      if (stage) {
        if (!adult.contains(lower(*stage))) verdict = Verdict::non_adult;
      } else if (!failed) {
        m.note = "needs_review: no life-stage metadata";
        ++summary.needs_review;
      }
    }
    if (!verdict && failed) verdict = Verdict::fetch_failed;
    if (!verdict && !m.content_hash) verdict = Verdict::unreviewed;
    if (!verdict && kept_hashes.contains(*m.content_hash)) verdict = Verdict::duplicate;
    if (!verdict && m.width && m.height && std::min(*m.width, *m.height) < rules.thumbnail_min_px)
      verdict = Verdict::thumbnail;
    if (!verdict) {
      verdict = Verdict::kept;
      kept_hashes.insert(*m.content_hash);
    }
    m.verdict = *verdict;
    ++summary.counts[m.verdict];
  }
  return summary;
}

ExportResult export_training_set(const std::vector<OccurrenceRecord>& occurrences,
                                 const std::vector<MediaRecord>& media,
                                 const std::vector<taxonomy::ChecklistEntry>& checklist,
                                 const std::filesystem::path& cache_dir, std::size_t cap_per_species,
                                 std::uint64_t seed) {
  std::set<std::int64_t> known;
  for (const auto& e : checklist)
    if (e.resolved_key) known.insert(*e.resolved_key);
  std::map<std::string, std::int64_t> taxon_of;
  for (const auto& o : occurrences) taxon_of.emplace(o.occurrence_id, o.taxon_key);

  ExportResult result;
  std::map<std::int64_t, std::vector<ManifestRow>> per_species;
  for (const auto& m : media) {
    if (m.verdict != Verdict::kept || !m.content_hash) continue;
    const auto it = taxon_of.find(m.occurrence_id);
    if (it == taxon_of.end()) {
      result.rejects.push_back({m.occurrence_id, 0, "occurrence not found"});
      continue;
    }
    if (!known.contains(it->second)) {
      result.rejects.push_back({m.occurrence_id, it->second, "taxon not in processed checklist"});
      continue;
    }
    per_species[it->second].push_back(
        {(cache_dir / cache_object_path(*m.content_hash)).string(), it->second, *m.content_hash});
  }
  for (auto& [taxon, rows] : per_species) {
    std::sort(rows.begin(), rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.content_hash < b.content_hash; });
    if (rows.size() > cap_per_species) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(static_cast<std::uint64_t>(taxon)),
                        static_cast<std::uint32_t>(static_cast<std::uint64_t>(taxon) >> 32)};
      std::mt19937_64 rng(seq);
      std::vector<ManifestRow> chosen;
      chosen.reserve(cap_per_species);
      // selection sampling keeps the input (hash) order
      std::sample(rows.begin(), rows.end(), std::back_inserter(chosen), cap_per_species, rng);
      rows = std::move(chosen);
    }
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  csv::write_row(out, {"path", "taxon_key", "content_hash"});
  for (const auto& r : rows) csv::write_row(out, {r.path, std::to_string(r.taxon_key), r.content_hash});
  return out.str();
}

std::string format_rejects(const std::vector<ExportReject>& rejects) {
  std::ostringstream out;
  csv::write_row(out, {"occurrence_id", "taxon_key", "reason"});
  for (const auto& r : rejects) csv::write_row(out, {r.occurrence_id, std::to_string(r.taxon_key), r.reason});
  return out.str();
}

namespace {

json extra_to_json(const std::vector<std::pair<std::string, std::string>>& extra) {
  json a = json::array();
  for (const auto& [k, v] : extra) a.push_back(json::array({k, v}));
  return a;
}

std::vector<std::pair<std::string, std::string>> extra_from_json(const json& j) {
  std::vector<std::pair<std::string, std::string>> out;
  if (!j.is_array()) return out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = text.substr(start, end - start);
    if (!line.empty()) {
      try {
        fn(json::parse(line));
      } catch (const json::exception& e) {
        throw ParseError("JSONL line " + std::to_string(line_no) + ": " + e.what(), start);
      }
    }
    start = end + 1;
  }
}

}  // namespace

std::string occurrences_to_jsonl(const std::vector<OccurrenceRecord>& records) {
  std::string out;
  for (const auto& o : records) {
    json j = {{"occurrence_id", o.occurrence_id}, {"taxon_key", o.taxon_key}, {"dataset_key", o.dataset_key}};
    j["life_stage"] = o.life_stage ? json(*o.life_stage) : json(nullptr);
    j["location"] = o.location ? json{{"lat", o.location->lat}, {"lon", o.location->lon}} : json(nullptr);
    j["publisher"] = o.publisher ? json(*o.publisher) : json(nullptr);
    j["extra"] = extra_to_json(o.extra);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<OccurrenceRecord> occurrences_from_jsonl(std::string_view text) {
  std::vector<OccurrenceRecord> out;
  for_each_line(text, [&](const json& j) {
    OccurrenceRecord o;
    o.occurrence_id = j.at("occurrence_id").get<std::string>();
    o.taxon_key = j.at("taxon_key").get<std::int64_t>();
    o.dataset_key = j.value("dataset_key", "");
    if (j.contains("life_stage") && !j["life_stage"].is_null()) o.life_stage = j["life_stage"].get<std::string>();
    if (j.contains("location") && !j["location"].is_null())
      o.location = GeoPoint{j["location"].at("lat").get<double>(), j["location"].at("lon").get<double>()};
    if (j.contains("publisher") && !j["publisher"].is_null()) o.publisher = j["publisher"].get<std::string>();
    o.extra = extra_from_json(j.value("extra", json::array()));
    out.push_back(std::move(o));
  });
  return out;
}

std::string media_to_jsonl(const std::vector<MediaRecord>& records) {
  std::string out;
  for (const auto& m : records) {
    json j = {{"occurrence_id", m.occurrence_id}, {"url", m.url}, {"verdict", to_string(m.verdict)}, {"note", m.note}};
    j["content_hash"] = m.content_hash ? json(*m.content_hash) : json(nullptr);
    j["width"] = m.width ? json(*m.width) : json(nullptr);
    j["height"] = m.height ? json(*m.height) : json(nullptr);
    j["extra"] = extra_to_json(m.extra);
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<MediaRecord> media_from_jsonl(std::string_view text) {
  std::vector<MediaRecord> out;
  for_each_line(text, [&](const json& j) {
    MediaRecord m;
    m.occurrence_id = j.at("occurrence_id").get<std::string>();
    m.url = j.at("url").get<std::string>();
    m.verdict = parse_verdict(j.value("verdict", "unreviewed"));
    m.note = j.value("note", "");
    if (j.contains("content_hash") && !j["content_hash"].is_null()) m.content_hash = j["content_hash"].get<std::string>();
    if (j.contains("width") && !j["width"].is_null()) m.width = j["width"].get<int>();
    if (j.contains("height") && !j["height"].is_null()) m.height = j["height"].get<int>();
    m.extra = extra_from_json(j.value("extra", json::array()));
    out.push_back(std::move(m));
  });
  return out;
}

}  // namespace ami::dwca
