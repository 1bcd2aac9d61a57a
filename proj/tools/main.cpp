#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <thread>

#include "cli_config.hpp"
#include "cuflinks/archive.hpp"
#include "cuflinks/bag.hpp"
#include "cuflinks/cuflink.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fetch.hpp"
#include "cuflinks/fsutil.hpp"
#include "cuflinks/minid.hpp"
#include "cuflinks/ro.hpp"

using namespace cuflinks;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFinding = 1, kUsage = 2, kInfra = 3 };

struct Context {
  cli::CliConfig cfg;
  bool as_json = false;
  Clock clock = system_clock();

  void emit(const json& doc, const std::string& human) const {
    if (as_json) {
      std::cout << doc.dump(2) << "\n";
    } else if (!human.empty()) {
      std::cout << human;
      if (human.back() != '\n') std::cout << "\n";
    }
  }
};

// SOURCE_DATE_EPOCH pins every timestamp we write, for reproducible bags.
Clock command_clock() {
  if (const char* s = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      std::size_t used = 0;
      long long secs = std::stoll(s, &used);
      if (used == std::string_view(s).size() && secs >= 0)
        return fixed_clock(std::chrono::system_clock::from_time_t(static_cast<std::time_t>(secs)));
    } catch (const std::logic_error&) {
    }
    throw ConfigError(std::string("SOURCE_DATE_EPOCH is not a non-negative integer: ") + s);
  }
  return system_clock();
}

std::string kind_of(const std::exception& e) {
  if (dynamic_cast<const IdentifierSyntaxError*>(&e)) return "malformed-identifier";
  if (dynamic_cast<const ArgumentError*>(&e)) return "usage";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const NotFoundError*>(&e)) return "not-found";
  if (dynamic_cast<const IntegrityError*>(&e)) return "integrity";
  if (dynamic_cast<const NotABagError*>(&e)) return "not-a-bag";
  if (dynamic_cast<const BagStructureError*>(&e)) return "bag-structure";
  if (dynamic_cast<const BagInvalidError*>(&e)) return "bag-invalid";
  if (dynamic_cast<const MalformedArchiveError*>(&e)) return "malformed-archive";
  if (dynamic_cast<const VocabularyError*>(&e)) return "vocabulary";
  if (dynamic_cast<const ReferenceError*>(&e)) return "reference";
  if (dynamic_cast<const CycleError*>(&e)) return "cycle";
  if (dynamic_cast<const ConflictError*>(&e)) return "conflict";
  if (dynamic_cast<const ParseError*>(&e)) return "parse";
  if (dynamic_cast<const LockedError*>(&e)) return "locked";
  if (dynamic_cast<const TransferError*>(&e)) return "transfer";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  return "internal";
}

int exit_for(const std::string& kind) {
  if (kind == "usage" || kind == "config" || kind == "malformed-identifier") return kUsage;
  if (kind == "locked" || kind == "transfer" || kind == "io" || kind == "internal") return kInfra;
  return kFinding;
}

// ---- shared plumbing --------------------------------------------------------

std::shared_ptr<minid::MinidService> open_service(const Context& ctx, bool writable) {
  const auto& r = ctx.cfg.resolver;
  if (r.empty())
    throw ConfigError("no resolver configured; set resolver in cuflinks.toml, CUFLINKS_RESOLVER or --resolver");
  if (ctx.cfg.resolver_is_url()) return std::make_shared<minid::HttpClient>(r, ctx.cfg.token);
  return std::make_shared<minid::Registry>(r, writable ? minid::Registry::Mode::read_write
                                                       : minid::Registry::Mode::read_only);
}

fetch::SchemeRegistry schemes_for(const Context& ctx, bool with_minid) {
  auto schemes = fetch::default_schemes();
  if (with_minid && !ctx.cfg.resolver.empty())
    schemes.add("minid", minid::make_minid_scheme(open_service(ctx, false), fetch::default_schemes()));
  return schemes;
}

fs::path require_ledger(const Context& ctx) {
  if (ctx.cfg.ledger.empty())
    throw ConfigError("no ledger configured; set ledger in cuflinks.toml, CUFLINKS_LEDGER or --ledger");
  return ctx.cfg.ledger;
}

fetch::RetryPolicy retry_policy() { return {}; }

json minid_json(const minid::Minid& m) { return json::parse(minid::to_json(m)); }

std::string minid_text(const minid::Minid& m) {
  std::string s = m.identifier + "\n";
  s += "  title:    " + m.title + "\n";
  s += "  author:   " + m.author + "\n";
  s += "  created:  " + format_timestamp(m.created) + "\n";
  s += "  status:   " + m.status.str() + "\n";
  s += "  checksum: " + std::string(algorithm_name(m.checksum.algorithm)) + ":" + m.checksum.digest + "\n";
  for (const auto& l : m.locations) s += "  location: " + l + "\n";
  return s;
}

// ---- bag ----------------------------------------------------------------------

struct BagCreateArgs {
  std::string src, out, name, metadata, alg, type_field = "type";
  std::vector<std::string> info, types;
};

int bag_create(const Context& ctx, const BagCreateArgs& a) {
  fs::path src = fs::absolute(a.src);
  if (!fs::is_directory(src)) throw ArgumentError("source '" + a.src + "' is not a directory");
  fs::path dest = a.out.empty() ? fs::current_path() / (src.filename().string() + "_bag") : fs::absolute(a.out);

  bag::CreateOptions opts;
  opts.root_name = a.name.empty() ? dest.filename().string() : a.name;
  opts.source_dir = src;
  opts.algorithms = parse_algorithm_list(a.alg.empty() ? ctx.cfg.algorithms : a.alg);
  opts.clock = ctx.clock;
  if (!a.metadata.empty()) {
    fs::path md = fs::absolute(a.metadata);
    if (!fs::is_directory(md)) throw ArgumentError("metadata '" + a.metadata + "' is not a directory");
    for (const auto& rel : list_files(md)) opts.metadata_files.push_back(bag::file_entry(rel, md / rel));
  }
  for (const auto& kv : a.info) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ArgumentError("--info expects Label=value, got '" + kv + "'");
    opts.bag_info_extra.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  bag::Bag b = bag::create_bag(opts);

  auto aggregates = ro::default_aggregates(b);
  ro::TermDictionary dict;
  if (!a.types.empty()) {
    if (ctx.cfg.dictionary.empty()) throw ConfigError("--type needs a term dictionary (dictionary setting)");
    auto dicts = ro::load_dictionaries(ctx.cfg.dictionary);
    auto it = dicts.find(a.type_field);
    if (it == dicts.end()) throw ConfigError("no vocabulary for field '" + a.type_field + "'");
    dict = it->second;
    for (const auto& kv : a.types) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ArgumentError("--type expects PATH=TERM, got '" + kv + "'");
      std::string path = kv.substr(0, eq);
      auto agg = std::find_if(aggregates.begin(), aggregates.end(), [&](const auto& x) { return x.uri == path; });
      if (agg == aggregates.end()) throw ReferenceError("--type names '" + path + "', which is not in the bag");
      agg->semantic_type = kv.substr(eq + 1);
    }
  }
  ro::BuildOptions bo;
  bo.created_by = ro::Agent{ctx.cfg.actor, std::nullopt};
  bo.clock = ctx.clock;
  b = ro::attach_ro_manifest(b, ro::build_ro_manifest(b, aggregates, dict, {}, bo));
  bag::write_bag(b, dest);

  std::vector<std::string> files = list_files(dest);
  ctx.emit(json{{"bag", dest.string()}, {"payload_files", b.payload.size()}, {"files", files}},
           "created " + dest.string() + " (" + std::to_string(b.payload.size()) + " payload files)");
  return kOk;
}

json finding_json(const bag::Finding& f) {
  return {{"path", f.path}, {"kind", bag::finding_kind_name(f.kind)}, {"manifest", f.manifest}, {"detail", f.detail}};
}

int bag_validate(const Context& ctx, const std::string& dir, bool fast) {
  auto level = fast ? bag::ValidationLevel::fast : bag::ValidationLevel::full;
  auto report = bag::validate_bag_at(fs::absolute(dir), level);
  // A holey bag is well-formed at fast level; full validation demands completeness.
  bool valid = fast ? report.ok_except_pending() : report.ok();
  json findings = json::array();
  std::string text;
  std::size_t pending = 0;
  for (const auto& f : report.findings) {
    findings.push_back(finding_json(f));
    if (f.kind == bag::FindingKind::fetch_pending) ++pending;
    if (fast && f.kind == bag::FindingKind::fetch_pending) continue;
    text += std::string(bag::finding_kind_name(f.kind)) + " " + f.path;
    if (!f.manifest.empty()) text += " (" + f.manifest + ")";
    if (!f.detail.empty()) text += ": " + f.detail;
    text += "\n";
  }
  text += (valid ? "valid: " : "INVALID: ") + dir;
  if (fast && pending) text += " (" + std::to_string(pending) + " entries pending fetch)";
  ctx.emit(json{{"bag", dir}, {"level", fast ? "fast" : "full"}, {"valid", valid}, {"findings", findings}}, text);
  return valid ? kOk : kFinding;
}

int bag_resolve_fetch(const Context& ctx, const std::string& dir, const std::vector<std::string>& paths) {
  fetch::MaterializeOptions o;
  o.paths = paths;
  o.parallelism = ctx.cfg.parallelism;
  o.retry = retry_policy();
  fs::path loc = fs::absolute(dir);
  auto report = fetch::materialize(loc, schemes_for(ctx, true), o);
  auto done = fetch::verify_completeness(loc);

  json entries = json::array();
  std::string text;
  for (const auto& e : report.entries) {
    entries.push_back({{"path", e.path},
                       {"url", e.url},
                       {"outcome", fetch::outcome_name(e.outcome)},
                       {"bytes", e.bytes},
                       {"detail", e.detail}});
    text += std::string(fetch::outcome_name(e.outcome)) + " " + e.path;
    if (!e.detail.empty()) text += ": " + e.detail;
    text += "\n";
  }
  text += done.complete ? "complete: " + dir : std::to_string(done.pending.size()) + " entries still pending in " + dir;
  ctx.emit(json{{"bag", dir}, {"entries", entries}, {"complete", done.complete}, {"pending", done.pending}}, text);

  if (report.count(fetch::Outcome::digest_mismatch) || report.count(fetch::Outcome::length_mismatch)) return kFinding;
  if (report.count(fetch::Outcome::transfer_error)) return kInfra;
  return kOk;
}

int bag_archive(const Context& ctx, const std::string& dir, const std::string& out) {
  fs::path src = fs::absolute(dir);
  fs::path zip = out.empty() ? fs::current_path() / (src.filename().string() + ".zip") : fs::absolute(out);
  bag::serialize(src, zip);
  ctx.emit(json{{"archive", zip.string()}}, zip.string());
  return kOk;
}

int bag_extract(const Context& ctx, const std::string& zip, const std::string& dest) {
  fs::path parent = dest.empty() ? fs::current_path() : fs::absolute(dest);
  fs::path bag = bag::extract(fs::absolute(zip), parent);
  ctx.emit(json{{"bag", bag.string()}}, bag.string());
  return kOk;
}

// ---- minid --------------------------------------------------------------------

struct MintArgs {
  std::string title, author, from_file;
  std::vector<std::string> locations;
};

int minid_mint(const Context& ctx, const MintArgs& a) {
  fs::path f = fs::absolute(a.from_file);
  if (!fs::is_regular_file(f)) throw ArgumentError("--from-file '" + a.from_file + "' is not a file");
  std::string sha = digest_file(f, {ChecksumAlgorithm::sha256}).at(ChecksumAlgorithm::sha256);
  auto svc = open_service(ctx, true);
  auto m = svc->mint({a.author.empty() ? ctx.cfg.actor : a.author, a.title, a.locations,
                      {ChecksumAlgorithm::sha256, sha}});
  ctx.emit(minid_json(m), m.identifier);
  return kOk;
}

int minid_resolve(const Context& ctx, const std::string& id, const std::string& download) {
  minid::parse_identifier(id);
  auto svc = open_service(ctx, false);
  if (download.empty()) {
    auto m = svc->resolve(id);
    ctx.emit(minid_json(m), minid_text(m));
    return kOk;
  }
  fs::path dest = fs::absolute(download);
  auto r = minid::resolve_to_file(*svc, id, schemes_for(ctx, false), dest, retry_policy());
  json doc = minid_json(r.record);
  doc["downloaded"] = dest.string();
  doc["from"] = r.location;
  ctx.emit(doc, minid_text(r.record) + "downloaded " + dest.string() + " from " + r.location);
  return kOk;
}

int minid_tombstone(const Context& ctx, const std::string& id) {
  auto m = open_service(ctx, true)->tombstone(id, ctx.cfg.actor);
  ctx.emit(minid_json(m), minid_text(m));
  return kOk;
}

int minid_supersede(const Context& ctx, const std::string& id, const std::string& by) {
  auto m = open_service(ctx, true)->supersede(id, by, ctx.cfg.actor);
  ctx.emit(minid_json(m), minid_text(m));
  return kOk;
}

int registry_serve(const Context& ctx, const std::string& host, int port) {
  if (ctx.cfg.resolver.empty() || ctx.cfg.resolver_is_url())
    throw ConfigError("registry serve needs the resolver setting to be a local minid log path");
  minid::Registry reg(ctx.cfg.resolver);
  minid::RegistryServer server(reg, ctx.cfg.token);
  int bound = server.start(host, port);
  std::cerr << "serving " << reg.size() << " minids from " << ctx.cfg.resolver << " on http://" << host << ":"
            << bound << "/minid\n";
  ctx.emit(json{{"host", host}, {"port", bound}, {"base", "http://" + host + ":" + std::to_string(bound) + "/minid"}},
           "");
  std::cout.flush();
  // Runs until the process is signalled; every acknowledged write is already on disk.
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

// ---- link ---------------------------------------------------------------------

std::string chain_text(const cuflink::ChainReport& r) {
  std::string s;
  for (const auto& [id, n] : r.nodes) {
    s += (n.failed ? "FAIL " : "ok   ") + id + "  " + n.role + "  " + (n.resolved ? n.status : "unresolved") +
         "  fixity=" + std::string(cuflink::fixity_name(n.fixity));
    if (!n.detail.empty()) s += "  " + n.detail;
    s += "\n";
  }
  for (const auto& i : r.ledger_issues) s += "ledger line " + std::to_string(i.line) + ": " + i.detail + "\n";
  s += (r.intact() ? "intact: " : "BROKEN: ") + r.start;
  return s;
}

// Surfaces an unreachable registry as an infrastructure failure before any
// node gets blamed for it.
void probe(minid::MinidService& svc, const std::string& id) {
  try {
    svc.resolve(id);
  } catch (const NotFoundError&) {
  }
}

cuflink::VerifyOptions verify_options(const Context& ctx, bool full) {
  cuflink::VerifyOptions o;
  o.depth = full ? cuflink::Depth::full_fixity : cuflink::Depth::resolve_only;
  o.parallelism = ctx.cfg.parallelism;
  o.retry = retry_policy();
  return o;
}

struct RecordArgs {
  std::string output, commit, method, env_file, notes;
  std::vector<std::string> inputs;
};

int link_record(const Context& ctx, const RecordArgs& a) {
  fs::path ledger = require_ledger(ctx);
  cuflink::LinkageRecord r;
  r.output = a.output;
  r.inputs = a.inputs;
  r.method = cuflink::MethodRef::parse(a.commit.empty() ? a.method : a.commit);
  if (a.env_file.empty()) {
    r.environment.inline_env = cuflink::capture_environment();
  } else {
    r.environment = cuflink::parse_environment(read_file(fs::absolute(a.env_file)));
  }
  r.actor = ctx.cfg.actor;
  r.performed_at = truncate_to_seconds(ctx.clock());
  if (!a.notes.empty()) r.notes = a.notes;

  auto svc = open_service(ctx, false);
  cuflink::record_linkage(ledger, r, *svc);
  // Verify right away so a bad link surfaces while the work is fresh.
  auto report = cuflink::verify_chain(cuflink::load_ledger(ledger), r.output, *svc, schemes_for(ctx, false),
                                      verify_options(ctx, true));
  json doc = json::parse(cuflink::report_json(report));
  doc["recorded"] = r.output;
  ctx.emit(doc, "recorded " + r.output + "\n" + chain_text(report));
  return report.intact() ? kOk : kFinding;
}

int link_root(const Context& ctx, const std::string& id, const std::string& notes) {
  fs::path ledger = require_ledger(ctx);
  auto svc = open_service(ctx, false);
  svc->resolve(id);
  cuflink::declare_root(ledger, {id, ctx.cfg.actor, truncate_to_seconds(ctx.clock()),
                                 notes.empty() ? std::nullopt : std::optional<std::string>(notes)});
  ctx.emit(json{{"root", id}}, "declared root " + id);
  return kOk;
}

int link_verify(const Context& ctx, const std::string& id, bool full) {
  minid::parse_identifier(id);
  auto ledger = cuflink::load_ledger(require_ledger(ctx));
  auto svc = open_service(ctx, false);
  probe(*svc, id);
  auto report = cuflink::verify_chain(ledger, id, *svc, schemes_for(ctx, false), verify_options(ctx, full));
  ctx.emit(json::parse(cuflink::report_json(report)), chain_text(report));
  return report.intact() ? kOk : kFinding;
}

int link_ci(const Context& ctx, const std::string& report_file, const std::string& schedule) {
  fs::path ledger_file = require_ledger(ctx);
  auto svc = open_service(ctx, false);
  auto outs = cuflink::load_ledger(ledger_file).terminal_outputs();
  if (!outs.empty()) probe(*svc, outs.front());
  std::optional<fs::path> rf;
  if (!report_file.empty()) rf = fs::absolute(report_file);
  auto ci = cuflink::ci_verify(ledger_file, *svc, schemes_for(ctx, false), schedule, rf, verify_options(ctx, true));
  std::string text;
  for (const auto& c : ci.chains) text += (c.failures.empty() ? "intact  " : "BROKEN  ") + c.start + "\n";
  for (const auto& i : ci.ledger_issues) text += "ledger line " + std::to_string(i.line) + ": " + i.detail + "\n";
  text += (ci.intact() ? "all " : "broken: ") + std::to_string(ci.chains.size()) + " chains checked";
  ctx.emit(json::parse(cuflink::report_json(ci)), text);
  return ci.exit_status();
}

// ---- dict ---------------------------------------------------------------------

ro::DictionarySet require_dictionaries(const Context& ctx) {
  if (ctx.cfg.dictionary.empty())
    throw ConfigError("no term dictionary configured; set dictionary in cuflinks.toml, CUFLINKS_DICTIONARY or --dictionary");
  return ro::load_dictionaries(ctx.cfg.dictionary);
}

json verdict_json(const std::string& value, const ro::TermVerdict& v) {
  return {{"value", value},       {"ok", v.ok},
          {"term", v.term},       {"canonical_id", v.canonical_id},
          {"substituted", v.substituted}, {"suggestions", v.suggestions}};
}

int dict_check(const Context& ctx, const std::string& term, const std::string& field) {
  auto dicts = require_dictionaries(ctx);
  std::vector<std::string> values;
  if (term == "-") {
    for (std::string line; std::getline(std::cin, line);) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) values.push_back(line);
    }
  } else {
    values.push_back(term);
  }
  json results = json::array();
  std::string text;
  bool all_ok = true;
  for (const auto& v : values) {
    auto verdict = ro::validate_term(v, field, dicts);
    results.push_back(verdict_json(v, verdict));
    all_ok = all_ok && verdict.ok;
    if (verdict.ok && verdict.substituted) {
      text += "ok      '" + v + "' is deprecated, use '" + verdict.term + "' (" + verdict.canonical_id + ")\n";
    } else if (verdict.ok) {
      text += "ok      '" + v + "' -> " + verdict.canonical_id + "\n";
    } else {
      text += "REJECT  '" + v + "'";
      for (std::size_t i = 0; i < verdict.suggestions.size(); ++i)
        text += (i ? ", '" : "; did you mean '") + verdict.suggestions[i] + "'";
      text += "\n";
    }
  }
  ctx.emit(json{{"field", field}, {"results", results}}, text);
  return all_ok ? kOk : kFinding;
}

// The file holding `field`'s vocabulary and the change log beside it.
std::pair<fs::path, fs::path> dictionary_files(const Context& ctx, const std::string& field) {
  const fs::path& d = ctx.cfg.dictionary;
  if (d.empty()) throw ConfigError("no term dictionary configured");
  if (d.extension() == ".tsv") {
    if (d.stem() != field) throw ConfigError("dictionary " + d.string() + " holds field '" + d.stem().string() + "'");
    return {d, d.parent_path() / (d.stem().string() + ".changes.jsonl")};
  }
  return {d / (field + ".tsv"), d / "changes.jsonl"};
}

int dict_evolve(const Context& ctx, const std::string& field, const ro::DictionaryChange& change) {
  auto [file, log] = dictionary_files(ctx, field);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path lock_file = file;
  lock_file += ".lock";
  FileLock lock(lock_file, "term dictionary '" + file.string() + "'", false);
  ro::TermDictionary dict = fs::exists(file) ? ro::parse_dictionary(read_file(file), file.string()) : ro::TermDictionary{};
  auto ev = ro::evolve_dictionary(dict, change, ctx.cfg.actor, field, ctx.clock);
  write_file_atomic(file, ro::render_dictionary(ev.dictionary));
  ro::append_change_log(log, ev.log_entry);
  std::string line = ro::render_change(ev.log_entry);
  ctx.emit(json::parse(line), line);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cuflinks: packaging, identifiers, vocabularies and verifiable provenance links for research data"};
  app.set_version_flag("--version", std::string(CUFLINKS_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::map<std::string, std::string> flags;
  bool json_out = false;
  app.add_option("--config", config_file, "settings file (default ./cuflinks.toml when present)");
  for (const char* key : {"resolver", "token", "ledger", "dictionary", "algorithms", "parallelism", "actor"}) {
    app.add_option_function<std::string>(std::string("--") + key, [&flags, key](const std::string& v) { flags[key] = v; },
                                         std::string("override the '") + key + "' setting");
  }
  app.add_flag("--json", json_out, "machine-readable output");

  // bag
  auto* bag_cmd = app.add_subcommand("bag", "create, validate, fetch and archive bags")->require_subcommand(1);
  BagCreateArgs create;
  auto* c_create = bag_cmd->add_subcommand("create", "package a directory as a bag");
  c_create->add_option("src", create.src, "directory to package")->required();
  c_create->add_option("--out,-o", create.out, "bag directory to write (default <src>_bag)");
  c_create->add_option("--name", create.name, "root name used inside archives");
  c_create->add_option("--metadata", create.metadata, "directory copied under metadata/");
  c_create->add_option("--alg", create.alg, "checksum algorithms, e.g. md5,sha256");
  c_create->add_option("--info", create.info, "extra bag-info.txt Label=value");
  c_create->add_option("--type", create.types, "semantic type PATH=TERM for the RO manifest");
  c_create->add_option("--type-field", create.type_field, "vocabulary field for --type")->capture_default_str();

  std::string bag_dir;
  bool fast = false, full = false;
  auto* c_validate = bag_cmd->add_subcommand("validate", "check structure, completeness and fixity");
  c_validate->add_option("bag", bag_dir)->required();
  auto* o_fast = c_validate->add_flag("--fast", fast, "structure and Payload-Oxum only");
  c_validate->add_flag("--full", full, "recompute every digest (default)")->excludes(o_fast);

  std::vector<std::string> fetch_paths;
  bool fetch_all = false;
  auto* c_fetch = bag_cmd->add_subcommand("resolve-fetch", "download fetch.txt entries into the bag");
  c_fetch->add_option("bag", bag_dir)->required();
  auto* o_all = c_fetch->add_flag("--all", fetch_all, "every pending entry (default)");
  c_fetch->add_option("--path", fetch_paths, "only these payload paths")->excludes(o_all);

  std::string out_path;
  auto* c_archive = bag_cmd->add_subcommand("archive", "serialize a bag to ZIP");
  c_archive->add_option("bag", bag_dir)->required();
  c_archive->add_option("--out,-o", out_path, "archive file (default <bag>.zip)");

  std::string zip_path;
  auto* c_extract = bag_cmd->add_subcommand("extract", "unpack a serialized bag");
  c_extract->add_option("archive", zip_path)->required();
  c_extract->add_option("--dest,-d", out_path, "parent directory (default current directory)");

  // minid
  auto* minid_cmd = app.add_subcommand("minid", "mint and resolve identifiers")->require_subcommand(1);
  MintArgs mint;
  auto* c_mint = minid_cmd->add_subcommand("mint", "mint a minid for a file");
  c_mint->add_option("--title", mint.title)->required();
  c_mint->add_option("--author", mint.author, "defaults to the actor setting");
  c_mint->add_option("--locations", mint.locations, "URLs serving the bytes")->required()->expected(1, -1);
  c_mint->add_option("--from-file", mint.from_file, "local copy used to compute the checksum")->required();

  std::string id, download, by;
  auto* c_resolve = minid_cmd->add_subcommand("resolve", "show a minid record");
  c_resolve->add_option("id", id)->required();
  c_resolve->add_option("--download", download, "fetch and check the bytes into this file");

  auto* c_tomb = minid_cmd->add_subcommand("tombstone", "withdraw a minid (the record stays resolvable)");
  c_tomb->add_option("id", id)->required();

  auto* c_super = minid_cmd->add_subcommand("supersede", "point a minid at its replacement");
  c_super->add_option("id", id)->required();
  c_super->add_option("--by", by, "replacing minid or doi:")->required();

  auto* registry_cmd = app.add_subcommand("registry", "run a minid registry service")->require_subcommand(1);
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* c_serve = registry_cmd->add_subcommand("serve", "serve the local minid log over HTTP");
  c_serve->add_option("--host", host)->capture_default_str();
  c_serve->add_option("--port", port)->capture_default_str();

  // link
  auto* link_cmd = app.add_subcommand("link", "record and verify provenance links")->require_subcommand(1);
  RecordArgs rec;
  auto* c_record = link_cmd->add_subcommand("record", "append a linkage record, then verify its chain");
  c_record->add_option("--output", rec.output)->required();
  c_record->add_option("--inputs", rec.inputs)->required()->expected(1, -1);
  auto* o_commit = c_record->add_option("--commit", rec.commit, "<repository>@<commit hash>");
  auto* o_method = c_record->add_option("--method", rec.method, "minid of a single-file program");
  o_commit->excludes(o_method);
  c_record->add_option("--env-file", rec.env_file, "environment JSON (default: this machine)");
  c_record->add_option("--notes", rec.notes);

  std::string notes;
  auto* c_root = link_cmd->add_subcommand("root", "declare an external input");
  c_root->add_option("id", id)->required();
  c_root->add_option("--notes", notes);

  bool verify_full = false;
  auto* c_verify = link_cmd->add_subcommand("verify", "walk and check a provenance chain");
  c_verify->add_option("id", id)->required();
  c_verify->add_flag("--full", verify_full, "also download every node and check fixity");

  std::string report_file, schedule = "on-demand";
  auto* c_ci = link_cmd->add_subcommand("ci", "verify every chain in the ledger");
  c_ci->add_option("--report", report_file, "write the JSON report here");
  c_ci->add_option("--schedule", schedule)->capture_default_str();

  // dict
  auto* dict_cmd = app.add_subcommand("dict", "controlled vocabularies")->require_subcommand(1);
  std::string term, field, canonical_id, definition, alias_of;
  auto* c_check = dict_cmd->add_subcommand("check", "validate a value ('-' reads one per line from stdin)");
  c_check->add_option("term", term)->required();
  c_check->add_option("--field", field)->required();

  auto* c_add = dict_cmd->add_subcommand("add", "add a term or an alias");
  c_add->add_option("term", term)->required();
  c_add->add_option("--field", field)->required();
  c_add->add_option("--id", canonical_id, "canonical id, e.g. NCIT:C25164");
  c_add->add_option("--definition", definition);
  c_add->add_option("--alias-of", alias_of, "add as a deprecated synonym of this term");

  auto* c_dep = dict_cmd->add_subcommand("deprecate", "retire a term in favour of another");
  c_dep->add_option("term", term)->required();
  c_dep->add_option("--field", field)->required();
  c_dep->add_option("--by", by, "the replacing term")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Context ctx;
  ctx.as_json = json_out;
  try {
    std::optional<fs::path> cfg_path;
    if (!config_file.empty()) {
      cfg_path = config_file;
    } else if (fs::exists("cuflinks.toml")) {
      cfg_path = "cuflinks.toml";
    }
    ctx.cfg = cli::load_config(cfg_path, cli::process_environment(), flags, fs::current_path());
    ctx.clock = command_clock();

    if (c_create->parsed()) return bag_create(ctx, create);
    if (c_validate->parsed()) return bag_validate(ctx, bag_dir, fast);
    if (c_fetch->parsed()) return bag_resolve_fetch(ctx, bag_dir, fetch_paths);
    if (c_archive->parsed()) return bag_archive(ctx, bag_dir, out_path);
    if (c_extract->parsed()) return bag_extract(ctx, zip_path, out_path);
    if (c_mint->parsed()) return minid_mint(ctx, mint);
    if (c_resolve->parsed()) return minid_resolve(ctx, id, download);
    if (c_tomb->parsed()) return minid_tombstone(ctx, id);
    if (c_super->parsed()) return minid_supersede(ctx, id, by);
    if (c_serve->parsed()) return registry_serve(ctx, host, port);
    if (c_record->parsed()) {
      if (rec.commit.empty() == rec.method.empty()) throw ArgumentError("give exactly one of --commit or --method");
      return link_record(ctx, rec);
    }
    if (c_root->parsed()) return link_root(ctx, id, notes);
    if (c_verify->parsed()) return link_verify(ctx, id, verify_full);
    if (c_ci->parsed()) return link_ci(ctx, report_file, schedule);
    if (c_check->parsed()) return dict_check(ctx, term, field);
    if (c_add->parsed()) {
      ro::AddTerm a{term, canonical_id, definition, std::nullopt};
      if (!alias_of.empty()) a.alias_of = alias_of;
      return dict_evolve(ctx, field, a);
    }
    if (c_dep->parsed()) return dict_evolve(ctx, field, ro::Deprecate{term, by});
    return kUsage;
  } catch (const std::exception& e) {
    std::string kind = kind_of(e);
    std::cerr << "error: " << e.what() << "\n";
    if (ctx.as_json) std::cout << json{{"error", e.what()}, {"kind", kind}}.dump(2) << "\n";
    return exit_for(kind);
  }
}
