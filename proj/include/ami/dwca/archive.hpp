#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ami::dwca {

/// One data file declared in meta.xml.
struct FileDescriptor {
  std::string location;
  std::string row_type;
  char delimiter = '\t';
  std::optional<char> quote;  // absent: fields are never enclosed
  int header_lines = 0;
  std::string line_terminator = "\n";
  /// <id> for the core, <coreid> for an extension.
  std::optional<int> key_index;
  /// column index → term URI. The key column is always present.
  std::map<int, std::string> columns;
  /// term URI → constant value for fields declared without an index.
  std::map<std::string, std::string> defaults;
};

struct ArchiveDescriptor {
  FileDescriptor core;
  std::vector<FileDescriptor> extensions;
};

/// Reads meta.xml. Throws ParseError (with byte offset) for malformed XML or
/// a descriptor violating the structural rules.
ArchiveDescriptor parse_meta_xml(std::string_view xml);
std::string write_meta_xml(const ArchiveDescriptor& descriptor);

/// "http://rs.tdwg.org/dwc/terms/occurrenceID" → "occurrenceID".
std::string_view term_name(std::string_view term_uri);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct OccurrenceRecord {
  std::string occurrence_id;
  std::int64_t taxon_key = 0;
  std::optional<std::string> life_stage;
  std::string dataset_key;
  std::optional<GeoPoint> location;
  std::optional<std::string> publisher;
  /// Unrecognized columns, passed through untouched (term URI, value).
  std::vector<std::pair<std::string, std::string>> extra;

  friend bool operator==(const OccurrenceRecord&, const OccurrenceRecord&) = default;
};

enum class Verdict { kept, duplicate, thumbnail, non_adult, blacklisted_dataset, fetch_failed, unreviewed };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view text);

struct MediaRecord {
  std::string occurrence_id;
  std::string url;
  std::optional<std::string> content_hash;  // lowercase hex SHA-256
  std::optional<int> width;
  std::optional<int> height;
  Verdict verdict = Verdict::unreviewed;
  std::string note;
  std::vector<std::pair<std::string, std::string>> extra;

  friend bool operator==(const MediaRecord&, const MediaRecord&) = default;
};

struct ParseReport {
  std::vector<std::string> warnings;
  std::size_t skipped_rows = 0;
  std::size_t unmatched_extension_rows = 0;
  std::vector<std::string> ignored_extensions;
};

struct ParsedArchive {
  ArchiveDescriptor descriptor;
  std::vector<OccurrenceRecord> occurrences;
  std::vector<MediaRecord> media;
  ParseReport report;
};

ParsedArchive parse_archive(const std::filesystem::path& archive);
ParsedArchive parse_archive_bytes(std::vector<std::uint8_t> zip_bytes);

struct SerializeOptions {
  char delimiter = '\t';
  std::optional<char> quote;
  bool header = true;
};

/// Writes occurrences and media as a fresh archive (occurrence core plus a
/// multimedia extension). Engine-specific media state travels in extra
/// columns so that parse(serialize(x)) == x.
std::vector<std::uint8_t> serialize_archive(const std::vector<OccurrenceRecord>& occurrences,
                                            const std::vector<MediaRecord>& media,
                                            const SerializeOptions& options = {});

namespace terms {
inline constexpr std::string_view kOccurrenceRowType = "http://rs.tdwg.org/dwc/terms/Occurrence";
inline constexpr std::string_view kMultimediaRowType = "http://rs.gbif.org/terms/1.0/Multimedia";
inline constexpr std::string_view kOccurrenceId = "http://rs.tdwg.org/dwc/terms/occurrenceID";
inline constexpr std::string_view kTaxonKey = "http://rs.gbif.org/terms/1.0/taxonKey";
inline constexpr std::string_view kLifeStage = "http://rs.tdwg.org/dwc/terms/lifeStage";
inline constexpr std::string_view kDatasetKey = "http://rs.gbif.org/terms/1.0/datasetKey";
inline constexpr std::string_view kLatitude = "http://rs.tdwg.org/dwc/terms/decimalLatitude";
inline constexpr std::string_view kLongitude = "http://rs.tdwg.org/dwc/terms/decimalLongitude";
inline constexpr std::string_view kPublisher = "http://purl.org/dc/terms/publisher";
inline constexpr std::string_view kIdentifier = "http://purl.org/dc/terms/identifier";
inline constexpr std::string_view kContentHash = "urn:ami:terms:contentHash";
inline constexpr std::string_view kWidth = "urn:ami:terms:width";
inline constexpr std::string_view kHeight = "urn:ami:terms:height";
inline constexpr std::string_view kVerdict = "urn:ami:terms:verdict";
inline constexpr std::string_view kNote = "urn:ami:terms:note";
}  // namespace terms

}  // namespace ami::dwca
