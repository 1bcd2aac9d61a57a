#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "cuflinks/error.hpp"
#include "cuflinks/ro.hpp"

namespace cuflinks::ro {

using nlohmann::json;

namespace {

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || std::string_view("!#$&^_.+-").find(c) != std::string_view::npos;
}

bool is_external(std::string_view uri) {
  auto colon = uri.find(':');
  if (colon == 0 || colon == std::string_view::npos || !std::isalpha(static_cast<unsigned char>(uri[0]))) {
    return false;
  }
  return std::all_of(uri.begin(), uri.begin() + static_cast<std::ptrdiff_t>(colon), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '.' || c == '-';
  });
}

std::string to_json_uri(const std::string& uri) { return is_external(uri) ? uri : "../" + uri; }

std::string from_json_uri(const std::string& uri) {
  if (is_external(uri)) return uri;
  if (uri.rfind("../", 0) == 0) return uri.substr(3);
  if (uri.rfind('/', 0) == 0) return uri.substr(1);
  return "metadata/" + uri;
}

json agent_json(const Agent& a) {
  json j{{"name", a.name}};
  if (a.uri) j["uri"] = *a.uri;
  return j;
}

Agent agent_from(const json& j) {
  Agent a;
  a.name = j.at("name").get<std::string>();
  if (j.contains("uri")) a.uri = j.at("uri").get<std::string>();
  return a;
}

}  // namespace

bool is_mediatype(std::string_view s) noexcept {
  s = s.substr(0, s.find(';'));
  auto slash = s.find('/');
  if (slash == 0 || slash == std::string_view::npos || slash + 1 == s.size()) return false;
  return std::all_of(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(slash), is_token_char) &&
         std::all_of(s.begin() + static_cast<std::ptrdiff_t>(slash) + 1, s.end(), is_token_char);
}

std::string guess_mediatype(std::string_view path) {
  static const std::map<std::string, std::string, std::less<>> kTypes = {
      {".bed", "text/plain"},         {".csv", "text/csv"},
      {".fa", "text/plain"},          {".fasta", "text/plain"},
      {".gz", "application/gzip"},    {".htm", "text/html"},
      {".html", "text/html"},         {".jpeg", "image/jpeg"},
      {".jpg", "image/jpeg"},         {".json", "application/json"},
      {".jsonld", "application/ld+json"}, {".md", "text/markdown"},
      {".pdf", "application/pdf"},    {".png", "image/png"},
      {".tif", "image/tiff"},         {".tiff", "image/tiff"},
      {".tsv", "text/tab-separated-values"}, {".txt", "text/plain"},
      {".xml", "application/xml"},    {".zip", "application/zip"},
  };
  auto slash = path.rfind('/');
  std::string_view name = slash == std::string_view::npos ? path : path.substr(slash + 1);
  auto dot = name.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return "application/octet-stream";
  std::string ext(name.substr(dot));
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto it = kTypes.find(ext);
  return it == kTypes.end() ? "application/octet-stream" : it->second;
}

std::string render_ro_manifest(const RoManifest& m) {
  json aggregates = json::array();
  for (const auto& a : m.aggregates) {
    json j{{"uri", to_json_uri(a.uri)}, {"mediatype", a.mediatype}};
    if (a.semantic_type) j["semanticType"] = *a.semantic_type;
    if (a.provenance) {
      j["createdBy"] = agent_json(a.provenance->created_by);
      j["createdOn"] = format_timestamp(a.provenance->created_on);
    }
    aggregates.push_back(std::move(j));
  }
  json annotations = json::array();
  for (const auto& a : m.annotations) {
    annotations.push_back({{"about", to_json_uri(a.about)}, {"content", to_json_uri(a.content)}});
  }
  json doc{{"@context", m.context},
           {"createdOn", format_timestamp(m.created_on)},
           {"createdBy", agent_json(m.created_by)},
           {"aggregates", std::move(aggregates)},
           {"annotations", std::move(annotations)}};
  return doc.dump(2) + "\n";
}

RoManifest parse_ro_manifest(std::string_view text, std::string_view file) {
  try {
    json doc = json::parse(text);
    RoManifest m;
    m.context = doc.at("@context").get<std::vector<std::string>>();
    m.created_on = parse_timestamp(doc.at("createdOn").get<std::string>());
    m.created_by = agent_from(doc.at("createdBy"));
    for (const auto& j : doc.at("aggregates")) {
      RoAggregate a;
      a.uri = from_json_uri(j.at("uri").get<std::string>());
      a.mediatype = j.at("mediatype").get<std::string>();
      if (j.contains("semanticType")) a.semantic_type = j.at("semanticType").get<std::string>();
      if (j.contains("createdBy")) {
        a.provenance = Provenance{agent_from(j.at("createdBy")), parse_timestamp(j.at("createdOn").get<std::string>())};
      }
      m.aggregates.push_back(std::move(a));
    }
    if (doc.contains("annotations")) {
      for (const auto& j : doc.at("annotations")) {
        m.annotations.push_back(
            {from_json_uri(j.at("about").get<std::string>()), from_json_uri(j.at("content").get<std::string>())});
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string(file), 0, e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string(file), 0, e.what());
  }
}

RoManifest build_ro_manifest(const bag::Bag& bag, std::vector<RoAggregate> aggregates,
                             const TermDictionary& dictionary, std::vector<RoAnnotation> annotations,
                             const BuildOptions& options) {
  std::set<std::string, std::less<>> present{std::string(bag::kRoManifestPath)};
  for (const auto& e : bag.payload) present.insert(e.path);
  for (const auto& e : bag.tag_metadata) present.insert(e.path);
  for (const auto& e : bag.fetch) present.insert(e.path);
  auto check_ref = [&](const std::string& uri, std::string_view role) {
    if (!is_external(uri) && !present.count(uri)) {
      throw ReferenceError(std::string(role) + " references nonexistent in-bag path '" + uri + "'");
    }
  };

  for (auto& a : aggregates) {
    check_ref(a.uri, "aggregate");
    if (!is_mediatype(a.mediatype)) {
      throw ArgumentError("aggregate '" + a.uri + "' has malformed mediatype '" + a.mediatype + "'");
    }
    if (!a.semantic_type) continue;
    std::optional<std::string> term;
    if (dictionary.find(*a.semantic_type)) {
      term = dictionary.resolve(*a.semantic_type);
    } else {
      for (const auto& [name, rec] : dictionary.terms()) {
        if (rec.canonical_id == *a.semantic_type) {
          term = dictionary.resolve(name);
          if (rec.status == TermStatus::active) break;
        }
      }
    }
    if (!term) throw VocabularyError("semantic type '" + *a.semantic_type + "' is not in the dictionary");
    a.semantic_type = dictionary.find(*term)->canonical_id;
  }
  for (const auto& a : annotations) {
    check_ref(a.about, "annotation");
    check_ref(a.content, "annotation");
  }

  RoManifest m;
  m.context = options.context;
  m.created_on = truncate_to_seconds(options.clock());
  m.created_by = options.created_by;
  m.aggregates = std::move(aggregates);
  m.annotations = std::move(annotations);
  return m;
}

std::vector<RoAggregate> default_aggregates(const bag::Bag& bag) {
  std::vector<RoAggregate> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& path) {
    if (path == bag::kRoManifestPath || !seen.insert(path).second) return;
    out.push_back({path, guess_mediatype(path), std::nullopt, std::nullopt});
  };
  for (const auto& e : bag.payload) add(e.path);
  for (const auto& e : bag.fetch) add(e.path);
  for (const auto& e : bag.tag_metadata) {
    if (e.path.rfind("metadata/", 0) == 0) add(e.path);
  }
  std::sort(out.begin(), out.end(), [](const RoAggregate& a, const RoAggregate& b) { return a.uri < b.uri; });
  return out;
}

bag::Bag attach_ro_manifest(bag::Bag bag, const RoManifest& m) {
  return bag::with_tag_file(std::move(bag), bag::bytes_entry(std::string(bag::kRoManifestPath), render_ro_manifest(m)));
}

}  // namespace cuflinks::ro
