#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "cuflinks/ro.hpp"

namespace cuflinks::ro {

namespace {

std::string fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool valid_term_name(std::string_view t) {
  return !t.empty() && t.find_first_of("\t\r\n") == std::string_view::npos && t.front() != '#' &&
         !std::isspace(static_cast<unsigned char>(t.front())) && !std::isspace(static_cast<unsigned char>(t.back()));
}

std::string_view status_name(TermStatus s) { return s == TermStatus::active ? "active" : "deprecated"; }

}  // namespace

bool is_curie(std::string_view id) noexcept {
  auto colon = id.find(':');
  if (colon == 0 || colon == std::string_view::npos || colon + 1 == id.size()) return false;
  if (!std::isalpha(static_cast<unsigned char>(id[0]))) return false;
  for (std::size_t i = 0; i < colon; ++i) {
    char c = id[i];
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') return false;
  }
  for (char c : id.substr(colon + 1)) {
    if (std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::string local_id(std::string_view term) { return "local:" + std::string(term); }

TermDictionary::TermDictionary(std::map<std::string, TermRecord> terms) : terms_(std::move(terms)) {
  std::map<std::string, std::string> active_ids;
  for (const auto& [term, rec] : terms_) {
    if (!valid_term_name(term)) throw VocabularyError("invalid term name '" + term + "'");
    if (!is_curie(rec.canonical_id)) {
      throw VocabularyError("term '" + term + "' has malformed canonical id '" + rec.canonical_id + "'");
    }
    if (rec.status == TermStatus::active) {
      if (rec.superseded_by) throw VocabularyError("active term '" + term + "' cannot be superseded");
      auto [it, fresh] = active_ids.emplace(rec.canonical_id, term);
      if (!fresh) {
        throw VocabularyError("active terms '" + it->second + "' and '" + term + "' share canonical id " +
                              rec.canonical_id);
      }
    } else {
      if (!rec.superseded_by) throw VocabularyError("deprecated term '" + term + "' names no successor");
      if (!terms_.count(*rec.superseded_by)) {
        throw VocabularyError("term '" + term + "' is superseded by unknown term '" + *rec.superseded_by + "'");
      }
    }
  }
  for (const auto& [term, rec] : terms_) {
    std::vector<std::string> path{term};
    std::set<std::string> seen{term};
    const TermRecord* cur = &rec;
    while (cur->status == TermStatus::deprecated) {
      const std::string& next = *cur->superseded_by;
      if (!seen.insert(next).second) {
        auto start = std::find(path.begin(), path.end(), next);
        std::vector<std::string> members(start, path.end());
        throw CycleError("supersession cycle through '" + next + "'", members);
      }
      path.push_back(next);
      cur = &terms_.at(next);
    }
  }
}

const TermRecord* TermDictionary::find(std::string_view term) const {
  auto it = terms_.find(std::string(term));
  return it == terms_.end() ? nullptr : &it->second;
}

std::string TermDictionary::resolve(std::string_view term) const {
  std::string cur(term);
  for (const TermRecord* rec = find(cur); rec && rec->status == TermStatus::deprecated; rec = find(cur)) {
    cur = *rec->superseded_by;
  }
  return cur;
}

std::optional<std::string> TermDictionary::term_for_id(std::string_view id) const {
  for (const auto& [term, rec] : terms_) {
    if (rec.status == TermStatus::active && rec.canonical_id == id) return term;
  }
  return std::nullopt;
}

std::vector<std::string> TermDictionary::active_terms() const {
  std::vector<std::string> out;
  for (const auto& [term, rec] : terms_) {
    if (rec.status == TermStatus::active) out.push_back(term);
  }
  return out;
}

TermDictionary parse_dictionary(std::string_view text, std::string_view file) {
  std::map<std::string, TermRecord> terms;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string> f;
    for (std::size_t start = 0;;) {
      auto tab = line.find('\t', start);
      if (f.size() == 4 || tab == std::string_view::npos) {
        f.emplace_back(line.substr(start));
        break;
      }
      f.emplace_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    f.resize(5);
    if (line_no == 1 && f[0] == "term" && f[1] == "canonical_id") continue;

    TermRecord rec;
    rec.canonical_id = f[1].empty() ? local_id(f[0]) : f[1];
    if (f[2].empty() || f[2] == "active") {
      rec.status = TermStatus::active;
    } else if (f[2] == "deprecated") {
      rec.status = TermStatus::deprecated;
    } else {
      throw ParseError(std::string(file), line_no, "unknown status '" + f[2] + "'");
    }
    if (!f[3].empty()) rec.superseded_by = f[3];
    rec.definition = f[4];
    if (!valid_term_name(f[0])) throw ParseError(std::string(file), line_no, "invalid term '" + f[0] + "'");
    if (!terms.emplace(f[0], std::move(rec)).second) {
      throw ParseError(std::string(file), line_no, "duplicate term '" + f[0] + "'");
    }
  }
  try {
    return TermDictionary(std::move(terms));
  } catch (const VocabularyError& e) {
    throw ParseError(std::string(file), 0, e.what());
  }
}

std::string render_dictionary(const TermDictionary& dict) {
  std::string out = "# term\tcanonical_id\tstatus\tsuperseded_by\tdefinition\n";
  for (const auto& [term, rec] : dict.terms()) {
    out += term + '\t' + rec.canonical_id + '\t' + std::string(status_name(rec.status)) + '\t' +
           rec.superseded_by.value_or("") + '\t' + rec.definition + '\n';
  }
  return out;
}

DictionarySet load_dictionaries(const fs::path& location) {
  DictionarySet out;
  auto load = [&](const fs::path& file) {
    out[file.stem().string()] = parse_dictionary(read_file(file), file.string());
  };
  if (fs::is_directory(location)) {
    for (const auto& rel : list_files(location)) {
      fs::path p = location / rel;
      if (p.extension() == ".tsv" && rel.find('/') == std::string::npos) load(p);
    }
  } else if (fs::is_regular_file(location)) {
    load(location);
  } else {
    throw IoError(location, "no dictionary here");
  }
  return out;
}

std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

TermVerdict validate_term(std::string_view value, const TermDictionary& dict) {
  TermVerdict v;
  if (const TermRecord* rec = dict.find(value)) {
    v.ok = true;
    v.term = dict.resolve(value);
    v.canonical_id = dict.find(v.term)->canonical_id;
    v.substituted = rec->status == TermStatus::deprecated;
    return v;
  }
  if (auto term = dict.term_for_id(value)) {
    v.ok = true;
    v.term = *term;
    v.canonical_id = std::string(value);
    return v;
  }
  std::string folded = fold(value);
  auto add = [&](const std::string& term) {
    std::string target = dict.resolve(term);
    if (std::find(v.suggestions.begin(), v.suggestions.end(), target) == v.suggestions.end()) {
      v.suggestions.push_back(target);
    }
  };
  for (const auto& [term, _] : dict.terms()) {
    if (fold(term) == folded) add(term);
  }
  for (const auto& [term, _] : dict.terms()) {
    if (damerau_levenshtein(fold(term), folded) <= 1) add(term);
  }
  return v;
}

TermVerdict validate_term(std::string_view value, std::string_view field, const DictionarySet& dicts) {
  auto it = dicts.find(field);
  if (it == dicts.end() || it->second.empty()) {
    throw ConfigError("no vocabulary for field '" + std::string(field) + "'");
  }
  return validate_term(value, it->second);
}

Evolution evolve_dictionary(const TermDictionary& dict, const DictionaryChange& change, std::string actor,
                            std::string field, const Clock& clock) {
  std::map<std::string, TermRecord> terms = dict.terms();
  if (const auto* add = std::get_if<AddTerm>(&change)) {
    if (const TermRecord* existing = dict.find(add->term)) {
      throw VocabularyError("term '" + add->term + "' already exists (" +
                            std::string(status_name(existing->status)) + ")");
    }
    TermRecord rec;
    rec.definition = add->definition;
    if (add->alias_of) {
      if (!dict.find(*add->alias_of)) throw VocabularyError("unknown term '" + *add->alias_of + "'");
      rec.status = TermStatus::deprecated;
      rec.superseded_by = *add->alias_of;
      rec.canonical_id =
          add->canonical_id.empty() ? dict.find(dict.resolve(*add->alias_of))->canonical_id : add->canonical_id;
    } else {
      rec.canonical_id = add->canonical_id.empty() ? local_id(add->term) : add->canonical_id;
    }
    terms.emplace(add->term, std::move(rec));
  } else {
    const auto& dep = std::get<Deprecate>(change);
    if (!dict.find(dep.term)) throw VocabularyError("unknown term '" + dep.term + "'");
    if (!dict.find(dep.superseded_by)) throw VocabularyError("unknown term '" + dep.superseded_by + "'");
    if (dep.term == dep.superseded_by) {
      throw CycleError("term '" + dep.term + "' cannot supersede itself", {dep.term});
    }
    TermRecord& rec = terms.at(dep.term);
    rec.status = TermStatus::deprecated;
    rec.superseded_by = dep.superseded_by;
  }
  return {TermDictionary(std::move(terms)), ChangeLogEntry{truncate_to_seconds(clock()), std::move(actor),
                                                           std::move(field), change}};
}

std::string render_change(const ChangeLogEntry& entry) {
  nlohmann::json j;
  j["at"] = format_timestamp(entry.at);
  j["actor"] = entry.actor;
  if (!entry.field.empty()) j["field"] = entry.field;
  if (const auto* add = std::get_if<AddTerm>(&entry.change)) {
    j["op"] = "add";
    j["term"] = add->term;
    if (!add->canonical_id.empty()) j["canonical_id"] = add->canonical_id;
    if (!add->definition.empty()) j["definition"] = add->definition;
    if (add->alias_of) j["alias_of"] = *add->alias_of;
  } else {
    const auto& dep = std::get<Deprecate>(entry.change);
    j["op"] = "deprecate";
    j["term"] = dep.term;
    j["superseded_by"] = dep.superseded_by;
  }
  return j.dump() + "\n";
}

void append_change_log(const fs::path& log, const ChangeLogEntry& entry) {
  std::string existing = fs::exists(log) ? read_file(log) : std::string();
  if (!existing.empty() && existing.back() != '\n') existing += '\n';
  write_file_atomic(log, existing + render_change(entry));
}

}  // namespace cuflinks::ro
