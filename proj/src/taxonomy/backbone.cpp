#include "ami/taxonomy/backbone.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "ami/core/csv.hpp"
#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"

namespace ami::taxonomy {

std::string_view to_string(Rank rank) {
  switch (rank) {
    case Rank::species: return "species";
    case Rank::genus: return "genus";
    case Rank::family: return "family";
  }
  return "?";
}

std::string_view to_string(Status status) {
  switch (status) {
    case Status::accepted: return "accepted";
    case Status::synonym: return "synonym";
    case Status::doubtful: return "doubtful";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_ws(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::optional<TaxonKey> parse_optional_key(const std::string& text, std::size_t line) {
  if (text.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigurationError("backbone line " + std::to_string(line) + ": bad taxon key '" + text + "'");
  }
}

}  // namespace

Rank parse_rank(std::string_view text) {
  const auto t = lower(text);
  if (t == "species") return Rank::species;
  if (t == "genus") return Rank::genus;
  if (t == "family") return Rank::family;
  throw ConfigurationError("unknown rank '" + std::string(text) + "'");
}

Status parse_status(std::string_view text) {
  const auto t = lower(text);
  if (t == "accepted") return Status::accepted;
  if (t == "synonym") return Status::synonym;
  if (t == "doubtful") return Status::doubtful;
  throw ConfigurationError("unknown taxonomic status '" + std::string(text) + "'");
}

std::string normalize_name(std::string_view name) {
  std::string s = collapse_ws(name);
  // Trailing authorship: a capitalized token (possibly several words, possibly
  // in parentheses) followed by a four-digit year.
  static const std::regex kAuthorship(R"(^(\S+(?: [^A-Z(\s]\S*)*) \(?[A-Z][^()]*?,? \[?\d{4}\]?\)?$)");
  std::smatch m;
  if (std::regex_match(s, m, kAuthorship)) s = m[1].str();
  return lower(s);
}

Backbone::Backbone(std::vector<TaxonRecord> records) {
  for (auto& r : records) {
    const TaxonKey key = r.taxon_key;
    if (!records_.emplace(key, std::move(r)).second)
      throw ConfigurationError("duplicate taxon_key " + std::to_string(key));
  }
  for (const auto& [key, r] : records_) {
    if (r.status == Status::synonym) {
      if (!r.accepted_key)
        throw ConfigurationError("synonym " + std::to_string(key) + " has no accepted_key");
      const TaxonRecord* target = find(*r.accepted_key);
      if (!target)
        throw ConfigurationError("synonym " + std::to_string(key) + " points to missing accepted_key " +
                                 std::to_string(*r.accepted_key));
      if (target->status != Status::accepted)
        throw ConfigurationError("synonym " + std::to_string(key) + " points to non-accepted taxon " +
                                 std::to_string(target->taxon_key));
      if (target->rank != r.rank)
        throw ConfigurationError("synonym " + std::to_string(key) + " and its accepted taxon differ in rank");
    } else if (r.accepted_key) {
      throw ConfigurationError("non-synonym " + std::to_string(key) + " carries an accepted_key");
    }
    if (r.parent_key && !find(*r.parent_key))
      throw ConfigurationError("taxon " + std::to_string(key) + " points to missing parent_key " +
                               std::to_string(*r.parent_key));
    name_index_[normalize_name(r.scientific_name)].push_back(key);
  }
}

Backbone Backbone::parse_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ConfigurationError("backbone CSV is empty");
  const auto& header = rows.front().fields;
  auto column = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigurationError("backbone CSV lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_key = column("taxon_key"), c_name = column("scientific_name"), c_rank = column("rank"),
                    c_status = column("status"), c_acc = column("accepted_key"), c_parent = column("parent_key");
  std::vector<TaxonRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != header.size())
      throw ConfigurationError("backbone line " + std::to_string(rows[i].line) + ": expected " +
                               std::to_string(header.size()) + " columns");
    TaxonRecord r;
    const auto key = parse_optional_key(f[c_key], rows[i].line);
    if (!key) throw ConfigurationError("backbone line " + std::to_string(rows[i].line) + ": empty taxon_key");
    r.taxon_key = *key;
    r.scientific_name = f[c_name];
    r.rank = parse_rank(f[c_rank]);
    r.status = parse_status(f[c_status]);
    r.accepted_key = parse_optional_key(f[c_acc], rows[i].line);
    r.parent_key = parse_optional_key(f[c_parent], rows[i].line);
    records.push_back(std::move(r));
  }
  return Backbone(std::move(records));
}

Backbone Backbone::load_csv(const std::filesystem::path& path) { return parse_csv(fs::read_text(path)); }

const TaxonRecord* Backbone::find(TaxonKey key) const {
  const auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

const TaxonRecord& Backbone::at(TaxonKey key) const {
  if (const auto* r = find(key)) return *r;
  throw NotFoundError("taxon key " + std::to_string(key) + " not in backbone");
}

const std::vector<TaxonKey>& Backbone::lookup(std::string_view name) const {
  static const std::vector<TaxonKey> kEmpty;
  const auto it = name_index_.find(normalize_name(name));
  return it == name_index_.end() ? kEmpty : it->second;
}

TaxonKey Backbone::resolve_accepted(TaxonKey key) const {
  const TaxonRecord& r = at(key);
  return r.status == Status::synonym ? *r.accepted_key : key;
}

Lineage Backbone::lineage(TaxonKey key) const {
  const TaxonRecord* r = &at(resolve_accepted(key));
  Lineage out;
  auto broken = [&](const std::string& why) {
    return DataIntegrityError("broken lineage for taxon " + std::to_string(key) + ": " + why);
  };
  auto parent_of = [&](const TaxonRecord& rec) -> const TaxonRecord& {
    if (!rec.parent_key) throw broken(std::string(to_string(rec.rank)) + " " + std::to_string(rec.taxon_key) +
                                      " has no parent");
    const TaxonRecord* p = find(*rec.parent_key);
    if (!p) throw broken("missing parent " + std::to_string(*rec.parent_key));
    return *p;
  };
  if (r->rank == Rank::species) {
    out.species = r->taxon_key;
    r = &parent_of(*r);
    if (r->rank != Rank::genus) throw broken("species parent is not a genus");
  }
  if (r->rank == Rank::genus) {
    out.genus = r->taxon_key;
    r = &parent_of(*r);
    if (r->rank != Rank::family) throw broken("genus parent is not a family");
  }
  if (r->parent_key) throw broken("family " + std::to_string(r->taxon_key) + " has a parent");
  out.family = r->taxon_key;
  return out;
}

namespace {

template <typename Value>
std::map<TaxonKey, Value> rollup_impl(const std::map<TaxonKey, Value>& values, const Backbone& backbone,
                                      RollupLevel level) {
  std::vector<TaxonKey> missing;
  for (const auto& [key, _] : values)
    if (!backbone.find(key)) missing.push_back(key);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "rollup: taxon keys absent from backbone:";
    for (TaxonKey k : missing) msg << ' ' << k;
    throw DataIntegrityError(msg.str());
  }
  std::map<TaxonKey, Value> out;
  for (const auto& [key, value] : values) {  // ascending key order
    const Lineage lin = backbone.lineage(key);
    TaxonKey target = lin.family;
    if (level == RollupLevel::genus) {
      if (!lin.genus)
        throw DataIntegrityError("rollup: taxon " + std::to_string(key) + " has no genus-level ancestor");
      target = *lin.genus;
    }
    out[target] += value;
  }
  return out;
}

}  // namespace

std::map<TaxonKey, double> rollup(const std::map<TaxonKey, double>& species_probs, const Backbone& backbone,
                                  RollupLevel level) {
  for (const auto& [key, p] : species_probs)
    if (!(p >= 0.0)) throw InputError("rollup: negative or NaN probability for taxon " + std::to_string(key));
  return rollup_impl(species_probs, backbone, level);
}

std::map<TaxonKey, std::int64_t> rollup_counts(const std::map<TaxonKey, std::int64_t>& species_counts,
                                               const Backbone& backbone, RollupLevel level) {
  return rollup_impl(species_counts, backbone, level);
}

}  // namespace ami::taxonomy
