#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ami::pipeline {

/// Wall-clock time at the deployment, to the second, without a zone.
using LocalTime = std::chrono::sys_seconds;

std::string format_local_time(LocalTime t);  // "YYYY-MM-DDTHH:MM:SS"
LocalTime parse_local_time(const std::string& text);

enum class TimeSource { exif, filename, mtime };
std::string_view to_string(TimeSource s);

struct Frame {
  std::filesystem::path path;
  LocalTime capture_time;
  TimeSource source = TimeSource::exif;
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct Session {
  std::string session_id;
  std::string deployment_id;
  std::string night_of;  // YYYY-MM-DD
  std::vector<Frame> frames;
  friend bool operator==(const Session&, const Session&) = default;
};

/// The calendar date on which the noon-to-noon window containing t starts.
std::string night_of(LocalTime t);

/// DateTimeOriginal (falling back to DateTime) from a JPEG's EXIF block.
std::optional<LocalTime> exif_capture_time(std::span<const std::uint8_t> jpeg);

struct DiscoveryOptions {
  /// Two capture groups: YYYYMMDD and HHMMSS.
  std::string filename_pattern = R"((\d{8})[-_T]?(\d{6}))";
  bool mtime_fallback = true;
};

struct DiscoveryResult {
  std::vector<Session> sessions;  // ordered by session_id
  std::vector<std::filesystem::path> unsorted;
  std::vector<std::string> warnings;
};

/// Scans root/<deployment>/**/*.{jpg,jpeg,png}. A deployment directory may
/// carry deployment.json with "utc_offset_minutes", used to turn file mtimes
/// into local time. Images without any usable timestamp go to `unsorted`.
DiscoveryResult discover_sessions(const std::filesystem::path& root, const DiscoveryOptions& options = {});

nlohmann::json to_json(const Session& s);
Session session_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscoveryResult& r);

}  // namespace ami::pipeline
