#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <functional>
#include <set>

#include <json.hpp>

#include "cuflinks/cuflink.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"

namespace cuflinks::cuflink {

using nlohmann::json;

bool is_commit_hash(std::string_view s) noexcept {
  return (s.size() == 40 || s.size() == 64) &&
         std::all_of(s.begin(), s.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

MethodRef MethodRef::commit_of(std::string repository, std::string commit) {
  if (repository.empty()) throw ArgumentError("method repository is empty");
  if (!is_commit_hash(commit)) {
    throw ArgumentError("'" + commit + "' is not a full 40- or 64-character commit hash; a branch or tag can change without notice");
  }
  for (char& c : commit) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  MethodRef m;
  m.kind = Kind::repository_commit;
  m.repository = std::move(repository);
  m.commit = std::move(commit);
  return m;
}

MethodRef MethodRef::artifact_of(std::string id) {
  minid::parse_identifier(id);
  MethodRef m;
  m.kind = Kind::identified_artifact;
  m.artifact = std::move(id);
  return m;
}

MethodRef MethodRef::parse(std::string_view text) {
  if (minid::is_valid_identifier(text)) return artifact_of(std::string(text));
  auto at = text.rfind('@');
  if (at == std::string_view::npos || at == 0) {
    throw ArgumentError("method '" + std::string(text) + "' names no commit; use <repo>@<commit hash> or a minid");
  }
  return commit_of(std::string(text.substr(0, at)), std::string(text.substr(at + 1)));
}

EnvironmentRef parse_environment(std::string_view json_text) {
  try {
    json j = json::parse(json_text);
    EnvironmentRef e;
    if (j.contains("minid")) e.minid = j.at("minid").get<std::string>();
    if (j.contains("os") || j.contains("architecture") || j.contains("dependencies")) {
      e.inline_env = InlineEnvironment{j.value("os", ""), j.value("architecture", ""),
                                       j.value("dependencies", std::vector<std::string>{})};
    }
    if (!e.minid && !e.inline_env) throw ArgumentError("environment names neither a minid nor os/architecture/dependencies");
    if (e.minid) minid::parse_identifier(*e.minid);
    return e;
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("environment description is not valid JSON: ") + e.what());
  }
}

// ---- ledger text -----------------------------------------------------------

namespace {

json method_json(const MethodRef& m) {
  if (m.kind == MethodRef::Kind::identified_artifact) return json{{"kind", "identified_artifact"}, {"minid", m.artifact}};
  return json{{"kind", "repository_commit"}, {"repository", m.repository}, {"commit", m.commit}};
}

MethodRef method_from(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "identified_artifact") return MethodRef::artifact_of(j.at("minid").get<std::string>());
  if (kind == "repository_commit") {
    return MethodRef::commit_of(j.at("repository").get<std::string>(), j.at("commit").get<std::string>());
  }
  throw ArgumentError("unknown method kind '" + kind + "'");
}

json environment_json(const EnvironmentRef& e) {
  json j = json::object();
  if (e.minid) j["minid"] = *e.minid;
  if (e.inline_env) {
    j["os"] = e.inline_env->os;
    j["architecture"] = e.inline_env->architecture;
    j["dependencies"] = e.inline_env->dependencies;
  }
  return j;
}

void check_record(const LinkageRecord& r) {
  minid::parse_identifier(r.output);
  std::set<std::string> seen;
  for (const auto& in : r.inputs) {
    minid::parse_identifier(in);
    if (in == r.output) throw CycleError(r.output + " is listed as its own input", {r.output});
    if (!seen.insert(in).second) throw ArgumentError("input " + in + " is listed twice");
  }
  if (r.method.kind == MethodRef::Kind::repository_commit) {
    MethodRef::commit_of(r.method.repository, r.method.commit);
  } else {
    minid::parse_identifier(r.method.artifact);
  }
  if (!r.environment.minid && !r.environment.inline_env) throw ArgumentError("record has no environment");
  if (r.environment.minid) minid::parse_identifier(*r.environment.minid);
}

LedgerEntry entry_from(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "root") {
    RootDeclaration r;
    r.identifier = j.at("identifier").get<std::string>();
    minid::parse_identifier(r.identifier);
    r.actor = j.at("actor").get<std::string>();
    r.declared_at = parse_timestamp(j.at("declared_at").get<std::string>());
    if (j.contains("notes")) r.notes = j.at("notes").get<std::string>();
    return r;
  }
  if (kind != "linkage") throw ArgumentError("unknown entry kind '" + kind + "'");
  LinkageRecord r;
  r.output = j.at("output").get<std::string>();
  r.inputs = j.at("inputs").get<std::vector<std::string>>();
  r.method = method_from(j.at("method"));
  const json& env = j.at("environment");
  if (env.contains("minid")) r.environment.minid = env.at("minid").get<std::string>();
  if (env.contains("os")) {
    r.environment.inline_env = InlineEnvironment{env.at("os").get<std::string>(), env.at("architecture").get<std::string>(),
                                                 env.at("dependencies").get<std::vector<std::string>>()};
  }
  r.actor = j.at("actor").get<std::string>();
  r.performed_at = parse_timestamp(j.at("performed_at").get<std::string>());
  if (j.contains("notes")) r.notes = j.at("notes").get<std::string>();
  check_record(r);
  return r;
}

}  // namespace

std::string render_entry(const LedgerEntry& entry, std::string_view prev) {
  json j;
  if (const auto* r = std::get_if<LinkageRecord>(&entry)) {
    j = json{{"kind", "linkage"},
             {"output", r->output},
             {"inputs", r->inputs},
             {"method", method_json(r->method)},
             {"environment", environment_json(r->environment)},
             {"actor", r->actor},
             {"performed_at", format_timestamp(r->performed_at)}};
    if (r->notes) j["notes"] = *r->notes;
  } else {
    const auto& root = std::get<RootDeclaration>(entry);
    j = json{{"kind", "root"},
             {"identifier", root.identifier},
             {"actor", root.actor},
             {"declared_at", format_timestamp(root.declared_at)}};
    if (root.notes) j["notes"] = *root.notes;
  }
  j["prev"] = std::string(prev);
  return j.dump();
}

const LinkageRecord* Ledger::producer(std::string_view output) const {
  for (const auto& r : records) {
    if (r.output == output) return &r;
  }
  return nullptr;
}

bool Ledger::is_root(std::string_view id) const {
  return std::any_of(roots.begin(), roots.end(), [&](const RootDeclaration& r) { return r.identifier == id; });
}

std::vector<std::string> Ledger::terminal_outputs() const {
  std::set<std::string> consumed;
  for (const auto& r : records) consumed.insert(r.inputs.begin(), r.inputs.end());
  std::set<std::string> out;
  for (const auto& r : records) {
    if (!consumed.count(r.output)) out.insert(r.output);
  }
  return {out.begin(), out.end()};
}

Ledger parse_ledger(std::string_view text) {
  Ledger ledger;
  ledger.last_line_digest = std::string(kGenesisDigest);
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (line.empty()) {
      ledger.issues.push_back({line_no, "blank line"});
      continue;
    }
    std::string expected_prev = ledger.last_line_digest;
    ledger.last_line_digest = compute_digest(line, ChecksumAlgorithm::sha256);
    try {
      json j = json::parse(line);
      if (j.value("prev", "") != expected_prev) {
        ledger.issues.push_back({line_no, "hash chain broken: the preceding line was altered, inserted or removed"});
      }
      LedgerEntry e = entry_from(j);
      if (auto* r = std::get_if<LinkageRecord>(&e)) {
        if (ledger.producer(r->output) || ledger.is_root(r->output)) {
          ledger.issues.push_back({line_no, "second entry for " + r->output});
          continue;
        }
        ledger.records.push_back(std::move(*r));
      } else {
        auto& root = std::get<RootDeclaration>(e);
        if (ledger.producer(root.identifier) || ledger.is_root(root.identifier)) {
          ledger.issues.push_back({line_no, "second entry for " + root.identifier});
          continue;
        }
        ledger.roots.push_back(std::move(root));
      }
    } catch (const json::exception& e) {
      ledger.issues.push_back({line_no, std::string("malformed entry: ") + e.what()});
    } catch (const Error& e) {
      ledger.issues.push_back({line_no, std::string("invalid entry: ") + e.what()});
    }
  }
  return ledger;
}

Ledger load_ledger(const fs::path& file) {
  if (!fs::exists(file)) return parse_ledger("");
  return parse_ledger(read_file(file));
}

// ---- DAG -------------------------------------------------------------------

Dag walk_chain(const Ledger& ledger, std::string_view start) {
  if (!ledger.producer(start) && !ledger.is_root(start)) {
    throw NotFoundError(std::string(start) + " is not in the ledger");
  }
  enum class Color { grey, black };
  std::map<std::string, Color> color;
  std::vector<std::string> path;
  std::set<std::pair<std::string, std::string>> edges;

  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    color[id] = Color::grey;
    path.push_back(id);
    if (const LinkageRecord* r = ledger.producer(id)) {
      for (const auto& in : r->inputs) {
        edges.emplace(id, in);
        auto it = color.find(in);
        if (it == color.end()) {
          visit(in);
        } else if (it->second == Color::grey) {
          std::vector<std::string> members(std::find(path.begin(), path.end(), in), path.end());
          std::sort(members.begin(), members.end());
          std::string names;
          for (const auto& m : members) names += (names.empty() ? "" : ", ") + m;
          throw CycleError("provenance cycle through " + names, members);
        }
      }
    }
    path.pop_back();
    color[id] = Color::black;
  };
  visit(std::string(start));

  Dag dag;
  for (const auto& [id, _] : color) {
    dag.nodes.push_back(id);
    if (!ledger.producer(id)) dag.roots.push_back(id);
  }
  dag.edges.assign(edges.begin(), edges.end());
  return dag;
}

// ---- writes ----------------------------------------------------------------

namespace {

void append_line(const fs::path& file, const std::string& line) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError(file, std::string("cannot open: ") + std::strerror(errno));
  std::string buf = line;
  if (auto size = fs::file_size(file); size > 0) {
    std::string existing = read_file(file);
    if (existing.back() != '\n') buf.insert(0, "\n");
  }
  buf += '\n';
  std::size_t done = 0;
  while (done < buf.size()) {
    ssize_t n = ::write(fd, buf.data() + done, buf.size() - done);
    if (n <= 0) {
      int err = errno;
      ::close(fd);
      throw IoError(file, std::string("append failed: ") + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw IoError(file, "fsync failed");
}

fs::path lock_path(const fs::path& ledger) {
  fs::path p = ledger;
  p += ".lock";
  return p;
}

}  // namespace

void record_linkage(const fs::path& ledger_file, const LinkageRecord& record, minid::MinidService& resolver) {
  check_record(record);
  resolver.resolve(record.output);
  FileLock lock(lock_path(ledger_file), "ledger '" + ledger_file.string() + "'", false);
  Ledger ledger = load_ledger(ledger_file);
  if (ledger.producer(record.output) || ledger.is_root(record.output)) {
    throw ConflictError(record.output + " already has a ledger entry");
  }
  Ledger extended = ledger;
  extended.records.push_back(record);
  walk_chain(extended, record.output);
  append_line(ledger_file, render_entry(record, ledger.last_line_digest));
}

void declare_root(const fs::path& ledger_file, const RootDeclaration& root) {
  minid::parse_identifier(root.identifier);
  FileLock lock(lock_path(ledger_file), "ledger '" + ledger_file.string() + "'", false);
  Ledger ledger = load_ledger(ledger_file);
  if (ledger.producer(root.identifier) || ledger.is_root(root.identifier)) {
    throw ConflictError(root.identifier + " already has a ledger entry");
  }
  append_line(ledger_file, render_entry(root, ledger.last_line_digest));
}

}  // namespace cuflinks::cuflink
