#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ami::taxonomy {

using TaxonKey = std::int64_t;

enum class Rank { species, genus, family };
enum class Status { accepted, synonym, doubtful };

std::string_view to_string(Rank rank);
std::string_view to_string(Status status);
Rank parse_rank(std::string_view text);
Status parse_status(std::string_view text);

struct TaxonRecord {
  TaxonKey taxon_key = 0;
  std::string scientific_name;
  Rank rank = Rank::species;
  Status status = Status::accepted;
  std::optional<TaxonKey> accepted_key;  // synonyms only
  std::optional<TaxonKey> parent_key;    // genus for species, family for genus
};

struct Lineage {
  std::optional<TaxonKey> species;
  std::optional<TaxonKey> genus;
  TaxonKey family = 0;

  friend bool operator==(const Lineage&, const Lineage&) = default;
};

/// Case-folds, trims, collapses whitespace and strips a trailing authorship
/// ("Linnaeus, 1758", "(Linnaeus, 1758)"). Idempotent.
std::string normalize_name(std::string_view name);

/// Immutable taxonomy snapshot. Construction validates key uniqueness,
/// referenced keys, and synonym targets; chain shape is checked lazily by
/// lineage(), which reports a DataIntegrityError for a broken chain.
class Backbone {
 public:
  explicit Backbone(std::vector<TaxonRecord> records);

  /// CSV with header taxon_key,scientific_name,rank,status,accepted_key,parent_key.
  static Backbone load_csv(const std::filesystem::path& path);
  static Backbone parse_csv(std::string_view text);

  const TaxonRecord* find(TaxonKey key) const;
  const TaxonRecord& at(TaxonKey key) const;  // NotFoundError when absent
  /// Keys whose normalized scientific name equals normalize_name(name).
  const std::vector<TaxonKey>& lookup(std::string_view name) const;
  std::size_t size() const noexcept { return records_.size(); }

  /// Synonyms map to their accepted key; other keys map to themselves.
  TaxonKey resolve_accepted(TaxonKey key) const;
  Lineage lineage(TaxonKey key) const;

  /// Normalized name → keys, iterated in name order.
  const std::map<std::string, std::vector<TaxonKey>>& name_index() const noexcept { return name_index_; }
  const std::map<TaxonKey, TaxonRecord>& records() const noexcept { return records_; }

 private:
  std::map<TaxonKey, TaxonRecord> records_;
  std::map<std::string, std::vector<TaxonKey>> name_index_;
};

enum class RollupLevel { genus, family };

/// Sums species-level probabilities into their genus or family. Summation runs
/// over input keys in ascending order, so results are reproducible bit for bit.
std::map<TaxonKey, double> rollup(const std::map<TaxonKey, double>& species_probs, const Backbone& backbone,
                                  RollupLevel level);

/// Integer-count variant used for per-species individual counts.
std::map<TaxonKey, std::int64_t> rollup_counts(const std::map<TaxonKey, std::int64_t>& species_counts,
                                               const Backbone& backbone, RollupLevel level);

}  // namespace ami::taxonomy
