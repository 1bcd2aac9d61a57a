#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cuflinks/bag.hpp"
#include "cuflinks/clock.hpp"

namespace cuflinks::ro {

namespace fs = std::filesystem;

// ---- term dictionary -------------------------------------------------------

enum class TermStatus { active, deprecated };

struct TermRecord {
  std::string canonical_id;  // CURIE such as NCIT:C106052, or local:<term>
  std::string definition;
  TermStatus status = TermStatus::active;
  std::optional<std::string> superseded_by;

  bool operator==(const TermRecord&) const = default;
};

/// `PREFIX:reference` with a letter-led prefix and no whitespace.
bool is_curie(std::string_view id) noexcept;
std::string local_id(std::string_view term);

/// One controlled vocabulary. Values are immutable; evolution returns copies.
class TermDictionary {
 public:
  TermDictionary() = default;
  /// Throws VocabularyError if the records break an invariant, CycleError on
  /// a supersession cycle.
  explicit TermDictionary(std::map<std::string, TermRecord> terms);

  const std::map<std::string, TermRecord>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  const TermRecord* find(std::string_view term) const;
  /// Follows supersession to the active term.
  std::string resolve(std::string_view term) const;
  /// Active term whose canonical id is `id`.
  std::optional<std::string> term_for_id(std::string_view id) const;
  std::vector<std::string> active_terms() const;

  bool operator==(const TermDictionary&) const = default;

 private:
  std::map<std::string, TermRecord> terms_;
};

/// `term<TAB>canonical_id<TAB>status<TAB>superseded_by<TAB>definition`.
/// Blank lines and `#` comments are ignored; an empty canonical id means
/// `local:<term>`.
TermDictionary parse_dictionary(std::string_view text, std::string_view file = "dictionary.tsv");
std::string render_dictionary(const TermDictionary& dict);

/// Field name -> vocabulary.
using DictionarySet = std::map<std::string, TermDictionary, std::less<>>;

/// A `.tsv` file (field = file stem) or a directory of them.
DictionarySet load_dictionaries(const fs::path& location);

struct TermVerdict {
  bool ok = false;
  std::string term;  // active term, when ok
  std::string canonical_id;
  bool substituted = false;  // the input was a deprecated term
  std::vector<std::string> suggestions;  // active terms, when rejected

  bool operator==(const TermVerdict&) const = default;
};

/// Exact matches only. Rejections carry suggestions: case-insensitive matches
/// first, then terms within Damerau-Levenshtein distance 1 after case folding.
TermVerdict validate_term(std::string_view value, const TermDictionary& dict);
/// Throws ConfigError if `field` has no vocabulary.
TermVerdict validate_term(std::string_view value, std::string_view field, const DictionarySet& dicts);

/// Optimal string alignment distance (adjacent transpositions count as one).
std::size_t damerau_levenshtein(std::string_view a, std::string_view b);

struct AddTerm {
  std::string term;
  std::string canonical_id;  // empty: local:<term>, or the target's id for aliases
  std::string definition;
  /// Adds `term` already deprecated in favour of this term.
  std::optional<std::string> alias_of;
};

struct Deprecate {
  std::string term;
  std::string superseded_by;
};

using DictionaryChange = std::variant<AddTerm, Deprecate>;

struct ChangeLogEntry {
  TimePoint at;
  std::string actor;
  std::string field;
  DictionaryChange change;
};

struct Evolution {
  TermDictionary dictionary;
  ChangeLogEntry log_entry;
};

/// Throws VocabularyError for a duplicate or unknown term and CycleError when
/// a deprecation would close a supersession loop.
Evolution evolve_dictionary(const TermDictionary& dict, const DictionaryChange& change, std::string actor,
                            std::string field = "", const Clock& clock = system_clock());

std::string render_change(const ChangeLogEntry& entry);  // one JSON line
void append_change_log(const fs::path& log, const ChangeLogEntry& entry);

// ---- RO manifest -----------------------------------------------------------

inline const std::vector<std::string> kDefaultContext = {"https://w3id.org/bundle/context"};

struct Agent {
  std::string name;
  std::optional<std::string> uri;

  bool operator==(const Agent&) const = default;
};

struct Provenance {
  Agent created_by;
  TimePoint created_on;

  bool operator==(const Provenance&) const = default;
};

struct RoAggregate {
  std::string uri;  // in-bag path (data/..., metadata/...) or absolute URI
  std::string mediatype;
  std::optional<std::string> semantic_type;
  std::optional<Provenance> provenance;

  bool operator==(const RoAggregate&) const = default;
};

struct RoAnnotation {
  std::string about;
  std::string content;

  bool operator==(const RoAnnotation&) const = default;
};

struct RoManifest {
  std::vector<std::string> context = kDefaultContext;
  TimePoint created_on;
  Agent created_by;
  std::vector<RoAggregate> aggregates;
  std::vector<RoAnnotation> annotations;

  bool operator==(const RoManifest&) const = default;
};

bool is_mediatype(std::string_view s) noexcept;
/// By file extension; `application/octet-stream` when unknown.
std::string guess_mediatype(std::string_view path);

/// Canonical JSON: sorted keys, two-space indent, trailing newline. In-bag
/// paths are written relative to the manifest (`../data/x`).
std::string render_ro_manifest(const RoManifest& m);
RoManifest parse_ro_manifest(std::string_view text, std::string_view file = "metadata/manifest.json");

struct BuildOptions {
  Agent created_by{"cuflinks", std::nullopt};
  Clock clock = system_clock();
  std::vector<std::string> context = kDefaultContext;
};

/// Checks references and vocabulary and normalizes every semantic type to
/// the canonical id of its active term. Throws ReferenceError naming a
/// missing in-bag path and VocabularyError naming an unknown term.
RoManifest build_ro_manifest(const bag::Bag& bag, std::vector<RoAggregate> aggregates,
                             const TermDictionary& dictionary, std::vector<RoAnnotation> annotations = {},
                             const BuildOptions& options = {});

/// One aggregate per payload, fetch and metadata entry, mediatype guessed.
std::vector<RoAggregate> default_aggregates(const bag::Bag& bag);

/// The bag with `metadata/manifest.json` added and tag manifests refreshed.
bag::Bag attach_ro_manifest(bag::Bag bag, const RoManifest& m);

}  // namespace cuflinks::ro
