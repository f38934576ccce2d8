#include "ami/taxonomy/checklist.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"

namespace ami::taxonomy {

std::string_view to_string(Resolution r) {
  switch (r) {
    case Resolution::accepted: return "accepted";
    case Resolution::merged_synonym: return "merged_synonym";
    case Resolution::duplicate_removed: return "duplicate_removed";
    case Resolution::doubtful: return "doubtful";
    case Resolution::fuzzy: return "fuzzy";
    case Resolution::unmatched: return "unmatched";
  }
  return "?";
}

Resolution parse_resolution(std::string_view text) {
  for (Resolution r : {Resolution::accepted, Resolution::merged_synonym, Resolution::duplicate_removed,
                       Resolution::doubtful, Resolution::fuzzy, Resolution::unmatched})
    if (to_string(r) == text) return r;
  throw ParseError("unknown checklist resolution '" + std::string(text) + "'");
}

std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = a[i - 1] == b[j - 1] ? 0 : 1;
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + sub});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1])
        cur[j] = std::min(cur[j], prev2[j - 2] + 1);
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
  }
  return prev[m];
}

double name_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(damerau_levenshtein(a, b)) / static_cast<double>(longest);
}

namespace {

struct ExactMatch {
  Resolution resolution = Resolution::unmatched;
  std::optional<TaxonKey> key;
  std::string note;
};

ExactMatch exact_match(const std::vector<TaxonKey>& keys, const Backbone& backbone) {
  // keys come from the name index in ascending order
  for (TaxonKey k : keys)
    if (backbone.at(k).status == Status::accepted) return {Resolution::accepted, k, ""};
  for (TaxonKey k : keys) {
    const TaxonRecord& r = backbone.at(k);
    if (r.status == Status::synonym) {
      return {Resolution::merged_synonym, *r.accepted_key,
              "synonym " + std::to_string(k) + " of " + backbone.at(*r.accepted_key).scientific_name};
    }
  }
  for (TaxonKey k : keys)
    if (backbone.at(k).status == Status::doubtful)
      return {Resolution::doubtful, std::nullopt, "doubtful taxon " + std::to_string(k)};
  return {};
}

ExactMatch fuzzy_match(const std::string& normalized, const Backbone& backbone, double threshold) {
  std::vector<const std::string*> candidates;
  for (const auto& [indexed, keys] : backbone.name_index()) {
    const std::size_t longest = std::max(indexed.size(), normalized.size());
    const std::size_t len_gap = indexed.size() > normalized.size() ? indexed.size() - normalized.size()
                                                                   : normalized.size() - indexed.size();
    // distance >= length gap, so skip names that cannot reach the threshold
    if (longest > 0 && 1.0 - static_cast<double>(len_gap) / static_cast<double>(longest) < threshold) continue;
    if (name_similarity(normalized, indexed) >= threshold) candidates.push_back(&indexed);
  }
  if (candidates.size() == 1) {
    const auto& keys = backbone.name_index().at(*candidates.front());
    return {Resolution::fuzzy, std::nullopt, backbone.at(keys.front()).scientific_name};
  }
  if (candidates.size() > 1) {
    std::string note = "ambiguous fuzzy candidates:";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& keys = backbone.name_index().at(*candidates[i]);
      note += (i ? "; " : " ") + backbone.at(keys.front()).scientific_name;
    }
    return {Resolution::unmatched, std::nullopt, note};
  }
  return {};
}

}  // namespace

std::vector<ChecklistEntry> normalize_checklist(const std::vector<std::string>& raw_names, const Backbone& backbone,
                                                double fuzzy_threshold) {
  if (!(fuzzy_threshold >= 0.0 && fuzzy_threshold <= 1.0))
    throw ConfigurationError("fuzzy_threshold must lie in [0,1]");
  std::vector<ChecklistEntry> out;
  out.reserve(raw_names.size());
  std::map<TaxonKey, std::size_t> emitted;
  for (const std::string& raw : raw_names) {
    ChecklistEntry entry;
    entry.input_name = raw;
    const std::string normalized = normalize_name(raw);
    ExactMatch m = exact_match(backbone.lookup(normalized), backbone);
    if (m.resolution == Resolution::unmatched && !normalized.empty())
      m = fuzzy_match(normalized, backbone, fuzzy_threshold);
    entry.resolution = m.resolution;
    entry.note = m.note;
    if (m.key) {
      const auto [it, inserted] = emitted.emplace(*m.key, out.size());
      if (inserted) {
        entry.resolved_key = m.key;
      } else {
        entry.resolution = Resolution::duplicate_removed;
        entry.duplicate_of = it->second;
        entry.note = "duplicate of entry " + std::to_string(it->second) + " (key " + std::to_string(*m.key) +
                     ") via " + std::string(to_string(m.resolution));
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<std::string> read_checklist_names(std::string_view text) {
  const auto first_nl = text.find('\n');
  const std::string_view first_line = text.substr(0, first_nl);
  if (first_line.find("scientificName") != std::string_view::npos) {
    const auto rows = csv::parse(text);
    const auto& header = rows.front().fields;
    const auto it = std::find(header.begin(), header.end(), "scientificName");
    if (it == header.end()) throw ParseError("checklist header lacks a scientificName column");
    const auto col = static_cast<std::size_t>(it - header.begin());
    std::vector<std::string> names;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (col < rows[i].fields.size() && !rows[i].fields[col].empty()) names.push_back(rows[i].fields[col]);
    }
    return names;
  }
  std::vector<std::string> names;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(b, e - b + 1));
  }
  return names;
}

std::string format_processed_checklist(const std::vector<ChecklistEntry>& entries, const Backbone& backbone) {
  std::ostringstream out;
  csv::write_row(out, {"input_name", "resolution", "resolved_key", "accepted_name", "genus", "family", "note", "duplicate_of"});
  for (const auto& e : entries) {
    std::string key, accepted, genus, family;
    if (e.resolved_key) {
      key = std::to_string(*e.resolved_key);
      accepted = backbone.at(*e.resolved_key).scientific_name;
      const Lineage lin = backbone.lineage(*e.resolved_key);
      if (lin.genus) genus = backbone.at(*lin.genus).scientific_name;
      family = backbone.at(lin.family).scientific_name;
    }
    csv::write_row(out, {e.input_name, std::string(to_string(e.resolution)), key, accepted, genus, family, e.note,
                          e.duplicate_of ? std::to_string(*e.duplicate_of) : std::string()});
  }
  return out.str();
}

std::vector<ChecklistEntry> parse_processed_checklist(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ParseError("processed checklist is empty");
  std::vector<ChecklistEntry> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 7 && f.size() != 8)
      throw ParseError("processed checklist line " + std::to_string(rows[i].line) + ": expected 8 columns",
                       rows[i].byte_offset);
    ChecklistEntry e;
    e.input_name = f[0];
    e.resolution = parse_resolution(f[1]);
    if (!f[2].empty()) e.resolved_key = std::stoll(f[2]);
    e.note = f[6];
    if (f.size() == 8 && !f[7].empty()) e.duplicate_of = std::stoull(f[7]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ami::taxonomy
