#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ami/taxonomy/backbone.hpp"

namespace ami::taxonomy {

enum class Resolution { accepted, merged_synonym, duplicate_removed, doubtful, fuzzy, unmatched };

std::string_view to_string(Resolution r);
Resolution parse_resolution(std::string_view text);

struct ChecklistEntry {
  std::string input_name;
  Resolution resolution = Resolution::unmatched;
  std::optional<TaxonKey> resolved_key;  // set iff accepted or merged_synonym
  std::string note;
  std::optional<std::size_t> duplicate_of;  // index of the entry that kept the key

  friend bool operator==(const ChecklistEntry&, const ChecklistEntry&) = default;
};

inline constexpr double kDefaultFuzzyThreshold = 0.90;

/// Damerau-Levenshtein distance (optimal string alignment variant), counted
/// in bytes.
std::size_t damerau_levenshtein(std::string_view a, std::string_view b);

/// 1 - distance / max(len); 1.0 for two empty strings.
double name_similarity(std::string_view a, std::string_view b);

/// Resolves each raw name against the backbone in input order. Priority:
/// exact accepted, exact synonym, exact doubtful, unique fuzzy candidate,
/// unmatched. A later entry whose key was already emitted becomes
/// duplicate_removed. Fuzzy candidates are reported, never resolved.
std::vector<ChecklistEntry> normalize_checklist(const std::vector<std::string>& raw_names,
                                                const Backbone& backbone,
                                                double fuzzy_threshold = kDefaultFuzzyThreshold);

/// One name per line, or a CSV whose header contains `scientificName`.
std::vector<std::string> read_checklist_names(std::string_view text);

/// Columns: input_name,resolution,resolved_key,accepted_name,genus,family,note,duplicate_of.
std::string format_processed_checklist(const std::vector<ChecklistEntry>& entries, const Backbone& backbone);

/// Reads the processed checklist back (accepted_name/genus/family are derived
/// columns and are ignored).
std::vector<ChecklistEntry> parse_processed_checklist(std::string_view text);

}  // namespace ami::taxonomy
