#include "ami/dwca/archive.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/xml.hpp"
#include "ami/core/zip.hpp"

namespace ami::dwca {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kept: return "kept";
    case Verdict::duplicate: return "duplicate";
    case Verdict::thumbnail: return "thumbnail";
    case Verdict::non_adult: return "non_adult";
    case Verdict::blacklisted_dataset: return "blacklisted_dataset";
    case Verdict::fetch_failed: return "fetch_failed";
    case Verdict::unreviewed: return "unreviewed";
  }
  return "?";
}

Verdict parse_verdict(std::string_view text) {
  for (Verdict v : {Verdict::kept, Verdict::duplicate, Verdict::thumbnail, Verdict::non_adult,
                    Verdict::blacklisted_dataset, Verdict::fetch_failed, Verdict::unreviewed})
    if (to_string(v) == text) return v;
  throw ParseError("unknown media verdict '" + std::string(text) + "'");
}

std::string_view term_name(std::string_view term_uri) {
  const auto cut = term_uri.find_last_of("/#:");
  return cut == std::string_view::npos ? term_uri : term_uri.substr(cut + 1);
}

namespace {

std::string decode_escapes(std::string_view raw) {
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      const char n = raw[i + 1];
      if (n == 't') { out.push_back('\t'); ++i; continue; }
      if (n == 'n') { out.push_back('\n'); ++i; continue; }
      if (n == 'r') { out.push_back('\r'); ++i; continue; }
      if (n == '\\') { out.push_back('\\'); ++i; continue; }
    }
    out.push_back(raw[i]);
  }
  return out;
}

std::string encode_escapes(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out.push_back(c);
  }
  return out;
}

int parse_index(const std::string& text, std::size_t offset) {
  int v = -1;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size() || v < 0)
    throw ParseError("meta.xml: bad column index '" + text + "'", offset);
  return v;
}

FileDescriptor parse_file_element(const xml::Element& el, bool is_core) {
  FileDescriptor f;
  f.row_type = el.attribute("rowType").value_or("");
  const std::string delim = decode_escapes(el.attribute("fieldsTerminatedBy").value_or(","));
  if (delim.size() != 1)
    throw ParseError("meta.xml: fieldsTerminatedBy must be a single character", el.byte_offset);
  f.delimiter = delim[0];
  const std::string quote = decode_escapes(el.attribute("fieldsEnclosedBy").value_or("\""));
  if (quote.size() > 1) throw ParseError("meta.xml: fieldsEnclosedBy must be at most one character", el.byte_offset);
  if (!quote.empty()) f.quote = quote[0];
  f.line_terminator = decode_escapes(el.attribute("linesTerminatedBy").value_or("\\n"));
  f.header_lines = el.attribute("ignoreHeaderLines") ? parse_index(*el.attribute("ignoreHeaderLines"), el.byte_offset) : 0;

  const xml::Element* files = el.child("files");
  const xml::Element* location = files ? files->child("location") : nullptr;
  if (!location) throw ParseError("meta.xml: <" + el.name + "> lacks files/location", el.byte_offset);
  f.location = location->text;
  f.location.erase(0, f.location.find_first_not_of(" \t\r\n"));
  f.location.erase(f.location.find_last_not_of(" \t\r\n") + 1);

  const xml::Element* key = el.child(is_core ? "id" : "coreid");
  if (key) {
    const auto idx = key->attribute("index");
    if (!idx) throw ParseError("meta.xml: <" + key->name + "> lacks index", key->byte_offset);
    f.key_index = parse_index(*idx, key->byte_offset);
  } else if (!is_core) {
    throw ParseError("meta.xml: extension " + f.location + " declares no coreid column", el.byte_offset);
  }
  for (const xml::Element* field : el.children_named("field")) {
    const auto term = field->attribute("term");
    if (!term) throw ParseError("meta.xml: <field> lacks term", field->byte_offset);
    if (const auto idx = field->attribute("index")) {
      const int i = parse_index(*idx, field->byte_offset);
      if (!f.columns.emplace(i, *term).second)
        throw ParseError("meta.xml: column " + *idx + " declared twice", field->byte_offset);
    } else if (const auto def = field->attribute("default")) {
      f.defaults[*term] = *def;
    }
  }
  if (f.key_index && !f.columns.contains(*f.key_index)) f.columns[*f.key_index] = is_core ? "id" : "coreid";
  return f;
}

void write_file_element(std::ostringstream& out, const FileDescriptor& f, bool is_core) {
  const std::string tag = is_core ? "core" : "extension";
  out << "  <" << tag << " encoding=\"UTF-8\" fieldsTerminatedBy=\"" << xml::escape(encode_escapes(std::string(1, f.delimiter)))
      << "\" linesTerminatedBy=\"" << xml::escape(encode_escapes(f.line_terminator)) << "\" fieldsEnclosedBy=\""
      << (f.quote ? xml::escape(std::string(1, *f.quote)) : "") << "\" ignoreHeaderLines=\"" << f.header_lines
      << "\" rowType=\"" << xml::escape(f.row_type) << "\">\n";
  out << "    <files>\n      <location>" << xml::escape(f.location) << "</location>\n    </files>\n";
  if (f.key_index) out << "    <" << (is_core ? "id" : "coreid") << " index=\"" << *f.key_index << "\"/>\n";
  for (const auto& [idx, term] : f.columns) {
    if (f.key_index && idx == *f.key_index && (term == "id" || term == "coreid")) continue;
    out << "    <field index=\"" << idx << "\" term=\"" << xml::escape(term) << "\"/>\n";
  }
  for (const auto& [term, value] : f.defaults)
    out << "    <field term=\"" << xml::escape(term) << "\" default=\"" << xml::escape(value) << "\"/>\n";
  out << "  </" << tag << ">\n";
}

bool is_multimedia(const FileDescriptor& f) {
  const std::string_view name = term_name(f.row_type);
  return name == "Multimedia" || name == "Image" || name == "Images";
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

/// Rows of one data file as (term URI → value) lists in column order.
struct TableRow {
  std::vector<std::pair<std::string, std::string>> values;  // column order, then defaults
  std::string key;
  std::size_t line = 0;
};

std::vector<TableRow> read_table(const zip::Reader& zip, const FileDescriptor& f, ParseReport& report) {
  const std::string text = zip.read_text(f.location);
  const auto rows = csv::parse(text, csv::Dialect{f.delimiter, f.quote});
  const int max_index = f.columns.empty() ? 0 : f.columns.rbegin()->first;
  std::size_t expected = static_cast<std::size_t>(max_index) + 1;
  if (f.header_lines > 0 && !rows.empty()) expected = std::max(expected, rows.front().fields.size());
  std::vector<TableRow> out;
  for (std::size_t r = static_cast<std::size_t>(f.header_lines); r < rows.size(); ++r) {
    const auto& fields = rows[r].fields;
    if (fields.size() != expected) {
      report.warnings.push_back(f.location + " line " + std::to_string(rows[r].line) + ": expected " +
                                std::to_string(expected) + " columns, found " + std::to_string(fields.size()) +
                                "; row skipped");
      ++report.skipped_rows;
      continue;
    }
    TableRow row;
    row.line = rows[r].line;
    for (const auto& [idx, term] : f.columns) row.values.emplace_back(term, fields[static_cast<std::size_t>(idx)]);
    for (const auto& [term, value] : f.defaults) row.values.emplace_back(term, value);
    if (f.key_index) row.key = fields[static_cast<std::size_t>(*f.key_index)];
    out.push_back(std::move(row));
  }
  return out;
}

const std::string* find_value(const TableRow& row, std::string_view short_name) {
  for (const auto& [term, value] : row.values)
    if (term_name(term) == short_name) return &value;
  return nullptr;
}

std::optional<std::string> non_empty(const std::string* v) {
  if (!v || v->empty()) return std::nullopt;
  return *v;
}

const std::set<std::string_view> kCoreKnown = {"id", "occurrenceID", "taxonKey", "lifeStage", "datasetKey",
                                               "decimalLatitude", "decimalLongitude", "publisher"};
const std::set<std::string_view> kMediaKnown = {"coreid", "id", "identifier", "accessURI", "contentHash",
                                                "width", "height", "verdict", "note"};

}  // namespace

ArchiveDescriptor parse_meta_xml(std::string_view text) {
  const xml::Element root = xml::parse(text);
  if (root.local_name() != "archive") throw ParseError("meta.xml: root element must be <archive>", root.byte_offset);
  const auto cores = root.children_named("core");
  if (cores.size() != 1)
    throw ParseError("meta.xml: expected exactly one <core>, found " + std::to_string(cores.size()), root.byte_offset);
  ArchiveDescriptor d;
  d.core = parse_file_element(*cores.front(), true);
  for (const xml::Element* ext : root.children_named("extension")) d.extensions.push_back(parse_file_element(*ext, false));
  return d;
}

std::string write_meta_xml(const ArchiveDescriptor& d) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<archive xmlns=\"http://rs.tdwg.org/dwc/text/\" metadata=\"\">\n";
  write_file_element(out, d.core, true);
  for (const auto& e : d.extensions) write_file_element(out, e, false);
  out << "</archive>\n";
  return out.str();
}

ParsedArchive parse_archive_bytes(std::vector<std::uint8_t> zip_bytes) {
  const zip::Reader zip = zip::Reader::from_bytes(std::move(zip_bytes));
  if (!zip.contains("meta.xml")) throw ParseError("archive has no meta.xml descriptor");
  ParsedArchive out;
  out.descriptor = parse_meta_xml(zip.read_text("meta.xml"));
  ParseReport& report = out.report;

  const FileDescriptor& core = out.descriptor.core;
  if (!zip.contains(core.location)) throw ParseError("core file missing from archive: " + core.location);

  std::map<std::string, std::string> core_key_to_occurrence;
  std::set<std::string> seen_ids;
  for (const TableRow& row : read_table(zip, core, report)) {
    const std::string where = core.location + " line " + std::to_string(row.line);
    OccurrenceRecord rec;
    rec.occurrence_id = non_empty(find_value(row, "occurrenceID")).value_or(row.key);
    if (rec.occurrence_id.empty()) {
      report.warnings.push_back(where + ": no occurrence id; row skipped");
      ++report.skipped_rows;
      continue;
    }
    const std::string* tk = find_value(row, "taxonKey");
    const auto taxon = tk ? parse_int(*tk) : std::nullopt;
    if (!taxon) {
      report.warnings.push_back(where + ": missing or non-integer taxonKey; row skipped");
      ++report.skipped_rows;
      continue;
    }
    rec.taxon_key = *taxon;
    rec.life_stage = non_empty(find_value(row, "lifeStage"));
    rec.dataset_key = non_empty(find_value(row, "datasetKey")).value_or("");
    rec.publisher = non_empty(find_value(row, "publisher"));
    const auto lat = non_empty(find_value(row, "decimalLatitude"));
    const auto lon = non_empty(find_value(row, "decimalLongitude"));
    if (lat && lon) {
      const auto la = parse_double(*lat), lo = parse_double(*lon);
      if (la && lo && *la >= -90.0 && *la <= 90.0 && *lo >= -180.0 && *lo <= 180.0) {
        rec.location = GeoPoint{*la, *lo};
      } else {
        report.warnings.push_back(where + ": coordinates out of range or malformed; location dropped");
      }
    }
    for (const auto& [term, value] : row.values)
      if (!kCoreKnown.contains(term_name(term))) rec.extra.emplace_back(term, value);
    if (!seen_ids.insert(rec.occurrence_id).second) {
      report.warnings.push_back(where + ": duplicate occurrence id " + rec.occurrence_id + "; row skipped");
      ++report.skipped_rows;
      continue;
    }
    core_key_to_occurrence[row.key.empty() ? rec.occurrence_id : row.key] = rec.occurrence_id;
    out.occurrences.push_back(std::move(rec));
  }

  for (const FileDescriptor& ext : out.descriptor.extensions) {
    if (!is_multimedia(ext)) {
      report.ignored_extensions.push_back(ext.row_type);
      continue;
    }
    if (!zip.contains(ext.location)) {
      report.warnings.push_back("extension file missing from archive: " + ext.location);
      continue;
    }
    for (const TableRow& row : read_table(zip, ext, report)) {
      const std::string where = ext.location + " line " + std::to_string(row.line);
      const auto it = core_key_to_occurrence.find(row.key);
      if (it == core_key_to_occurrence.end()) {
        ++report.unmatched_extension_rows;
        continue;
      }
      MediaRecord m;
      m.occurrence_id = it->second;
      auto url = non_empty(find_value(row, "identifier"));
      if (!url) url = non_empty(find_value(row, "accessURI"));
      if (!url) {
        report.warnings.push_back(where + ": media row without identifier; row skipped");
        ++report.skipped_rows;
        continue;
      }
      m.url = *url;
      m.content_hash = non_empty(find_value(row, "contentHash"));
      if (const auto w = non_empty(find_value(row, "width"))) m.width = static_cast<int>(parse_int(*w).value_or(0));
      if (const auto h = non_empty(find_value(row, "height"))) m.height = static_cast<int>(parse_int(*h).value_or(0));
      if (const auto v = non_empty(find_value(row, "verdict"))) m.verdict = parse_verdict(*v);
      m.note = non_empty(find_value(row, "note")).value_or("");
      for (const auto& [term, value] : row.values)
        if (!kMediaKnown.contains(term_name(term))) m.extra.emplace_back(term, value);
      out.media.push_back(std::move(m));
    }
  }
  return out;
}

ParsedArchive parse_archive(const std::filesystem::path& archive) {
  return parse_archive_bytes(fs::read_bytes(archive));
}

std::vector<std::uint8_t> serialize_archive(const std::vector<OccurrenceRecord>& occurrences,
                                            const std::vector<MediaRecord>& media, const SerializeOptions& options) {
  auto union_terms = [](const auto& records) {
    std::vector<std::string> terms;
    for (const auto& r : records)
      for (const auto& [term, _] : r.extra)
        if (std::find(terms.begin(), terms.end(), term) == terms.end()) terms.push_back(term);
    return terms;
  };
  auto value_of = [](const auto& extra, const std::string& term) -> std::string {
    for (const auto& [t, v] : extra)
      if (t == term) return v;
    return {};
  };
  const csv::Dialect dialect{options.delimiter, options.quote};
  auto emit = [&](std::ostringstream& out, const std::vector<std::string>& fields) {
    if (!options.quote) {
      for (const auto& f : fields)
        if (f.find(options.delimiter) != std::string::npos || f.find('\n') != std::string::npos ||
            f.find('\r') != std::string::npos)
          throw InputError("value '" + f + "' contains the delimiter or a newline and the archive has no quote char");
    }
    csv::write_row(out, fields, dialect);
  };

  ArchiveDescriptor d;
  d.core.location = "occurrence.txt";
  d.core.row_type = std::string(terms::kOccurrenceRowType);
  d.core.delimiter = options.delimiter;
  d.core.quote = options.quote;
  d.core.header_lines = options.header ? 1 : 0;
  d.core.key_index = 0;
  const std::vector<std::string_view> core_terms = {"id", terms::kOccurrenceId, terms::kTaxonKey, terms::kLifeStage,
                                                    terms::kDatasetKey, terms::kLatitude, terms::kLongitude,
                                                    terms::kPublisher};
  const auto core_extra = union_terms(occurrences);
  for (std::size_t i = 0; i < core_terms.size(); ++i) d.core.columns[static_cast<int>(i)] = std::string(core_terms[i]);
  for (std::size_t i = 0; i < core_extra.size(); ++i)
    d.core.columns[static_cast<int>(core_terms.size() + i)] = core_extra[i];

  FileDescriptor mm;
  mm.location = "multimedia.txt";
  mm.row_type = std::string(terms::kMultimediaRowType);
  mm.delimiter = options.delimiter;
  mm.quote = options.quote;
  mm.header_lines = options.header ? 1 : 0;
  mm.key_index = 0;
  const std::vector<std::string_view> media_terms = {"coreid", terms::kIdentifier, terms::kContentHash, terms::kWidth,
                                                     terms::kHeight, terms::kVerdict, terms::kNote};
  const auto media_extra = union_terms(media);
  for (std::size_t i = 0; i < media_terms.size(); ++i) mm.columns[static_cast<int>(i)] = std::string(media_terms[i]);
  for (std::size_t i = 0; i < media_extra.size(); ++i)
    mm.columns[static_cast<int>(media_terms.size() + i)] = media_extra[i];
  d.extensions.push_back(mm);

  std::ostringstream core_out;
  if (options.header) {
    std::vector<std::string> header;
    for (const auto& [_, term] : d.core.columns) header.emplace_back(term_name(term));
    emit(core_out, header);
  }
  for (const auto& o : occurrences) {
    std::vector<std::string> row = {o.occurrence_id,
                                    o.occurrence_id,
                                    std::to_string(o.taxon_key),
                                    o.life_stage.value_or(""),
                                    o.dataset_key,
                                    o.location ? format_double(o.location->lat) : "",
                                    o.location ? format_double(o.location->lon) : "",
                                    o.publisher.value_or("")};
    for (const auto& term : core_extra) row.push_back(value_of(o.extra, term));
    emit(core_out, row);
  }

  std::ostringstream media_out;
  if (options.header) {
    std::vector<std::string> header;
    for (const auto& [_, term] : mm.columns) header.emplace_back(term_name(term));
    emit(media_out, header);
  }
  for (const auto& m : media) {
    std::vector<std::string> row = {m.occurrence_id,
                                    m.url,
                                    m.content_hash.value_or(""),
                                    m.width ? std::to_string(*m.width) : "",
                                    m.height ? std::to_string(*m.height) : "",
                                    std::string(to_string(m.verdict)),
                                    m.note};
    for (const auto& term : media_extra) row.push_back(value_of(m.extra, term));
    emit(media_out, row);
  }

  zip::Writer writer;
  writer.add("meta.xml", write_meta_xml(d));
  writer.add("occurrence.txt", core_out.str());
  writer.add("multimedia.txt", media_out.str());
  return writer.finish();
}

}  // namespace ami::dwca
