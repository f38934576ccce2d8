#include "ami/pipeline/session.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"

namespace ami::pipeline {

using json = nlohmann::json;
using namespace std::chrono;

namespace {

std::optional<LocalTime> make_time(int y, int mo, int d, int h, int mi, int s) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_date(sys_days d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

std::string format_local_time(LocalTime t) {
  const sys_days d = floor<days>(t);
  const hh_mm_ss hms{t - d};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02d", format_date(d).c_str(), static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return buf;
}

LocalTime parse_local_time(const std::string& text) {
  int y, mo, d, h, mi, s;
  char tail;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail) != 6)
    throw ParseError("bad timestamp '" + text + "'");
  const auto t = make_time(y, mo, d, h, mi, s);
  if (!t) throw ParseError("bad timestamp '" + text + "'");
  return *t;
}

std::string_view to_string(TimeSource s) {
  switch (s) {
    case TimeSource::exif: return "exif";
    case TimeSource::filename: return "filename";
    case TimeSource::mtime: return "mtime";
  }
  return "?";
}

std::string night_of(LocalTime t) { return format_date(floor<days>(t - hours{12})); }

std::optional<LocalTime> exif_capture_time(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || b[0] != 0xFF || b[1] != 0xD8) return std::nullopt;
  std::size_t pos = 2;
  while (pos + 4 <= b.size()) {
    if (b[pos] != 0xFF) return std::nullopt;
    const std::uint8_t marker = b[pos + 1];
    if (marker == 0xDA || marker == 0xD9) return std::nullopt;
    const std::size_t len = (std::size_t(b[pos + 2]) << 8) | b[pos + 3];
    if (len < 2 || pos + 2 + len > b.size()) return std::nullopt;
    const std::size_t seg = pos + 4, seg_end = pos + 2 + len;
    pos = seg_end;
    if (marker != 0xE1 || seg_end - seg < 14) continue;
    static constexpr std::uint8_t kExif[] = {'E', 'x', 'i', 'f', 0, 0};
    if (!std::equal(std::begin(kExif), std::end(kExif), b.begin() + static_cast<std::ptrdiff_t>(seg))) continue;
    const std::span<const std::uint8_t> tiff = b.subspan(seg + 6, seg_end - seg - 6);
    const bool le = tiff[0] == 'I' && tiff[1] == 'I';
    if (!le && !(tiff[0] == 'M' && tiff[1] == 'M')) return std::nullopt;
    auto u16 = [&](std::size_t o) -> std::optional<std::uint32_t> {
      if (o + 2 > tiff.size()) return std::nullopt;
      return le ? tiff[o] | (tiff[o + 1] << 8) : (tiff[o] << 8) | tiff[o + 1];
    };
    auto u32 = [&](std::size_t o) -> std::optional<std::uint32_t> {
      if (o + 4 > tiff.size()) return std::nullopt;
      const std::uint32_t a = tiff[o], c = tiff[o + 1], d = tiff[o + 2], e = tiff[o + 3];
      return le ? a | (c << 8) | (d << 16) | (e << 24) : (a << 24) | (c << 16) | (d << 8) | e;
    };
    // Returns the value offset of `tag` in the IFD at `ifd`.
    auto find_tag = [&](std::uint32_t ifd, std::uint32_t tag) -> std::optional<std::uint32_t> {
      const auto count = u16(ifd);
      if (!count) return std::nullopt;
      for (std::uint32_t k = 0; k < *count; ++k) {
        const std::size_t e = ifd + 2 + 12 * std::size_t(k);
        const auto t = u16(e);
        if (!t) return std::nullopt;
        if (*t == tag) return u32(e + 8);
      }
      return std::nullopt;
    };
    auto datetime_at = [&](std::uint32_t off) -> std::optional<LocalTime> {
      if (off + 19 > tiff.size()) return std::nullopt;
      const std::string s(reinterpret_cast<const char*>(tiff.data()) + off, 19);
      int y, mo, d, h, mi, sec;
      if (std::sscanf(s.c_str(), "%4d:%2d:%2d %2d:%2d:%2d", &y, &mo, &d, &h, &mi, &sec) != 6) return std::nullopt;
      return make_time(y, mo, d, h, mi, sec);
    };
    const auto ifd0 = u32(4);
    if (!ifd0) return std::nullopt;
    if (const auto exif_ifd = find_tag(*ifd0, 0x8769))
      if (const auto off = find_tag(*exif_ifd, 0x9003))
        if (const auto t = datetime_at(*off)) return t;
    if (const auto off = find_tag(*ifd0, 0x0132)) return datetime_at(*off);
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

bool is_image(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

int deployment_offset_minutes(const std::filesystem::path& dir, std::vector<std::string>& warnings) {
  const auto cfg = dir / "deployment.json";
  if (!std::filesystem::exists(cfg)) return 0;
  try {
    return json::parse(fs::read_text(cfg)).value("utc_offset_minutes", 0);
  } catch (const std::exception& e) {
    warnings.push_back(cfg.string() + ": ignored (" + e.what() + ")");
    return 0;
  }
}

}  // namespace

DiscoveryResult discover_sessions(const std::filesystem::path& root, const DiscoveryOptions& options) {
  namespace stdfs = std::filesystem;
  if (!stdfs::is_directory(root)) throw NotFoundError("data root " + root.string() + " is not a directory");
  std::regex pattern;
  try {
    pattern = std::regex(options.filename_pattern);
  } catch (const std::regex_error& e) {
    throw ConfigurationError("filename pattern: " + std::string(e.what()));
  }
  if (pattern.mark_count() < 2) throw ConfigurationError("filename pattern needs date and time capture groups");

  DiscoveryResult out;
  std::vector<stdfs::path> deployments;
  for (const auto& e : stdfs::directory_iterator(root))
    if (e.is_directory()) deployments.push_back(e.path());
  std::sort(deployments.begin(), deployments.end());

  std::map<std::string, Session> sessions;
  for (const auto& dep : deployments) {
    const std::string dep_id = dep.filename().string();
    const int offset = deployment_offset_minutes(dep, out.warnings);
    std::vector<stdfs::path> files;
    std::error_code ec;
    for (auto it = stdfs::recursive_directory_iterator(dep, stdfs::directory_options::skip_permission_denied, ec);
         it != stdfs::recursive_directory_iterator(); it.increment(ec)) {
      if (ec) {
        out.warnings.push_back(dep.string() + ": " + ec.message());
        break;
      }
      if (it->is_regular_file() && is_image(it->path())) files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::optional<LocalTime> t;
      TimeSource source = TimeSource::exif;
      const std::string ext = file.extension().string();
      if (ext != ".png" && ext != ".PNG") {
        try {
          t = exif_capture_time(fs::read_bytes(file));
        } catch (const Error& e) {
          out.warnings.push_back(file.string() + ": unreadable, skipped (" + e.what() + ")");
          continue;
        }
      }
      if (!t) {
        std::smatch m;
        const std::string name = file.filename().string();
        if (std::regex_search(name, m, pattern)) {
          const std::string d = m[1].str(), tm = m[2].str();
          if (d.size() == 8 && tm.size() == 6)
            t = make_time(std::stoi(d.substr(0, 4)), std::stoi(d.substr(4, 2)), std::stoi(d.substr(6, 2)),
                          std::stoi(tm.substr(0, 2)), std::stoi(tm.substr(2, 2)), std::stoi(tm.substr(4, 2)));
          source = TimeSource::filename;
        }
      }
      if (!t && options.mtime_fallback) {
        const auto ft = stdfs::last_write_time(file, ec);
        if (!ec) {
          t = floor<seconds>(file_clock::to_sys(ft)) + minutes{offset};
          source = TimeSource::mtime;
          out.warnings.push_back(file.string() + ": no capture timestamp, using file mtime");
        }
      }
      if (!t) {
        out.unsorted.push_back(file);
        continue;
      }
      const std::string night = night_of(*t);
      const std::string id = dep_id + "_" + night;
      Session& s = sessions[id];
      s.session_id = id;
      s.deployment_id = dep_id;
      s.night_of = night;
      s.frames.push_back({file, *t, source});
    }
  }
  for (auto& [id, s] : sessions) {
    std::stable_sort(s.frames.begin(), s.frames.end(), [](const Frame& a, const Frame& b) {
      if (a.capture_time != b.capture_time) return a.capture_time < b.capture_time;
      return a.path < b.path;
    });
    out.sessions.push_back(std::move(s));
  }
  return out;
}

json to_json(const Session& s) {
  json frames = json::array();
  for (const Frame& f : s.frames)
    frames.push_back(
        {{"path", f.path.string()}, {"capture_time", format_local_time(f.capture_time)}, {"source", to_string(f.source)}});
  return {{"session_id", s.session_id}, {"deployment_id", s.deployment_id}, {"night_of", s.night_of}, {"frames", frames}};
}

Session session_from_json(const json& j) {
  Session s;
  s.session_id = j.at("session_id").get<std::string>();
  s.deployment_id = j.at("deployment_id").get<std::string>();
  s.night_of = j.at("night_of").get<std::string>();
  for (const auto& f : j.at("frames")) {
    const std::string src = f.value("source", "exif");
    s.frames.push_back({f.at("path").get<std::string>(), parse_local_time(f.at("capture_time").get<std::string>()),
                        src == "filename" ? TimeSource::filename
                        : src == "mtime"  ? TimeSource::mtime
                                          : TimeSource::exif});
  }
  return s;
}

json to_json(const DiscoveryResult& r) {
  json sessions = json::array();
  for (const Session& s : r.sessions) sessions.push_back(to_json(s));
  json unsorted = json::array();
  for (const auto& p : r.unsorted) unsorted.push_back(p.string());
  return {{"sessions", sessions}, {"unsorted", unsorted}, {"warnings", r.warnings}};
}

}  // namespace ami::pipeline
