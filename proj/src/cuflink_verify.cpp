#include <sys/utsname.h>

#include <algorithm>

#include <json.hpp>
#include <openssl/crypto.h>
#include <zlib.h>

#include "cuflinks/cuflink.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "parallel.hpp"

namespace cuflinks::cuflink {

using nlohmann::json;

InlineEnvironment capture_environment(std::vector<std::string> extra_dependencies) {
  InlineEnvironment env;
  struct utsname u {};
  if (::uname(&u) == 0) {
    env.os = std::string(u.sysname) + " " + u.release;
    env.architecture = u.machine;
  }
  env.dependencies = {std::string("cuflinks ") + CUFLINKS_VERSION, OpenSSL_version(OPENSSL_VERSION),
                      std::string("zlib ") + zlibVersion()};
  env.dependencies.insert(env.dependencies.end(), extra_dependencies.begin(), extra_dependencies.end());
  return env;
}

std::string_view fixity_name(Fixity f) noexcept {
  switch (f) {
    case Fixity::match: return "match";
    case Fixity::mismatch: return "mismatch";
    case Fixity::unverifiable: return "unverifiable";
  }
  return "?";
}

namespace {

class ScratchDir {
 public:
  ScratchDir() : path_(fs::temp_directory_path() / ("cuflinks-verify-" + minid::random_suffix())) {
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

ChainReport verify_chain(const Ledger& ledger, std::string_view start, minid::MinidService& resolver,
                         const fetch::SchemeRegistry& schemes, const VerifyOptions& options) {
  Dag dag = walk_chain(ledger, start);
  ChainReport report;
  report.start = std::string(start);
  report.edges = dag.edges;
  report.ledger_issues = ledger.issues;

  for (const auto& id : dag.nodes) report.nodes[id].role = "data";
  for (const auto& id : dag.nodes) {
    const LinkageRecord* r = ledger.producer(id);
    if (!r) continue;
    if (r->method.kind == MethodRef::Kind::identified_artifact) {
      auto& node = report.nodes[r->method.artifact];
      if (node.role.empty()) node.role = "method";
    }
    if (r->environment.minid) {
      auto& node = report.nodes[*r->environment.minid];
      if (node.role.empty()) node.role = "environment";
    }
  }

  std::vector<std::string> ids;
  for (const auto& [id, _] : report.nodes) ids.push_back(id);
  ScratchDir scratch;

  detail::parallel_for(ids.size(), std::max(1u, options.parallelism), [&](std::size_t i) {
    const std::string& id = ids[i];
    NodeResult& node = report.nodes.at(id);
    node.record_present = ledger.producer(id) != nullptr;
    node.declared_root = ledger.is_root(id);
    try {
      minid::Minid m = resolver.resolve(id);
      node.status = m.status.str();
      node.resolved = m.status.kind != minid::Status::Kind::tombstoned;
      if (!node.resolved) node.detail = id + " is tombstoned";
    } catch (const NotFoundError& e) {
      node.detail = e.what();
    } catch (const IdentifierSyntaxError& e) {
      node.detail = e.what();
    } catch (const TransferError& e) {
      node.detail = std::string("registry unreachable: ") + e.what();
    }
    if (node.resolved && options.depth == Depth::full_fixity) {
      try {
        minid::resolve_to_file(resolver, id, schemes, scratch.path() / std::to_string(i), options.retry);
        node.fixity = Fixity::match;
      } catch (const IntegrityError& e) {
        node.fixity = Fixity::mismatch;
        node.detail = e.what();
      } catch (const Error& e) {
        node.fixity = Fixity::unverifiable;
        node.detail = e.what();
      }
    }
    bool needs_record = node.role == "data" && !node.record_present && !node.declared_root;
    if (needs_record && node.detail.empty()) node.detail = "no ledger record produces " + id + " and it is not a declared root";
    node.failed = !node.resolved || node.fixity == Fixity::mismatch || needs_record;
  });

  for (const auto& [id, node] : report.nodes) {
    if (node.failed) report.failures.push_back(id);
  }
  return report;
}

bool CiReport::intact() const {
  return ledger_issues.empty() && std::all_of(chains.begin(), chains.end(), [](const ChainReport& c) {
           return c.failures.empty();
         });
}

namespace {

json chain_json(const ChainReport& r, bool with_issues) {
  json nodes = json::object();
  for (const auto& [id, n] : r.nodes) {
    nodes[id] = json{{"role", n.role},
                     {"resolved", n.resolved},
                     {"status", n.status},
                     {"fixity", fixity_name(n.fixity)},
                     {"record_present", n.record_present},
                     {"declared_root", n.declared_root},
                     {"failed", n.failed},
                     {"detail", n.detail}};
  }
  json edges = json::array();
  for (const auto& [out, in] : r.edges) edges.push_back({out, in});
  json j{{"start", r.start},
         {"verdict", (with_issues ? r.intact() : r.failures.empty()) ? "intact" : "broken"},
         {"failures", r.failures},
         {"nodes", nodes},
         {"edges", edges}};
  if (with_issues) {
    json issues = json::array();
    for (const auto& i : r.ledger_issues) issues.push_back({{"line", i.line}, {"detail", i.detail}});
    j["ledger_issues"] = issues;
  }
  return j;
}

}  // namespace

std::string report_json(const ChainReport& r) { return chain_json(r, true).dump(2) + "\n"; }

std::string report_json(const CiReport& r) {
  json chains = json::array();
  for (const auto& c : r.chains) chains.push_back(chain_json(c, false));
  json issues = json::array();
  for (const auto& i : r.ledger_issues) issues.push_back({{"line", i.line}, {"detail", i.detail}});
  json j{{"schedule", r.schedule},
         {"verdict", r.intact() ? "intact" : "broken"},
         {"chains", chains},
         {"ledger_issues", issues}};
  return j.dump(2) + "\n";
}

CiReport ci_verify(const fs::path& ledger_file, minid::MinidService& resolver, const fetch::SchemeRegistry& schemes,
                   std::string schedule, const std::optional<fs::path>& report_file, const VerifyOptions& options) {
  Ledger ledger = load_ledger(ledger_file);
  CiReport ci;
  ci.schedule = std::move(schedule);
  ci.ledger_issues = ledger.issues;
  for (const auto& out : ledger.terminal_outputs()) {
    try {
      ci.chains.push_back(verify_chain(ledger, out, resolver, schemes, options));
    } catch (const CycleError& e) {
      ChainReport broken;
      broken.start = out;
      broken.failures = e.members();
      for (const auto& id : e.members()) broken.nodes[id] = NodeResult{"data", false, "", Fixity::unverifiable, true, false, true, e.what()};
      ci.chains.push_back(std::move(broken));
    }
  }
  std::sort(ci.chains.begin(), ci.chains.end(),
            [](const ChainReport& a, const ChainReport& b) { return a.start < b.start; });
  if (report_file) write_file_atomic(*report_file, report_json(ci));
  return ci;
}

}  // namespace cuflinks::cuflink
