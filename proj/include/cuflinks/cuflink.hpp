#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cuflinks/clock.hpp"
#include "cuflinks/fetch.hpp"
#include "cuflinks/minid.hpp"

namespace cuflinks::cuflink {

namespace fs = std::filesystem;

struct MethodRef {
  enum class Kind { repository_commit, identified_artifact };
  Kind kind = Kind::repository_commit;
  std::string repository;  // repository_commit
  std::string commit;      // 40 or 64 lowercase hex
  std::string artifact;    // identified_artifact: minid of a single-file program

  static MethodRef commit_of(std::string repository, std::string commit);
  static MethodRef artifact_of(std::string minid);
  /// `<repo>@<hash>` or a minid. Throws ArgumentError for bare URLs and
  /// branch names.
  static MethodRef parse(std::string_view text);
  bool operator==(const MethodRef&) const = default;
};

bool is_commit_hash(std::string_view s) noexcept;

struct InlineEnvironment {
  std::string os;
  std::string architecture;
  std::vector<std::string> dependencies;

  bool operator==(const InlineEnvironment&) const = default;
};

struct EnvironmentRef {
  std::optional<std::string> minid;
  std::optional<InlineEnvironment> inline_env;

  bool operator==(const EnvironmentRef&) const = default;
};

/// Operating system, architecture and the libraries this tool runs on.
InlineEnvironment capture_environment(std::vector<std::string> extra_dependencies = {});
/// `{"minid": ...}` and/or `{"os", "architecture", "dependencies"}`.
EnvironmentRef parse_environment(std::string_view json_text);

struct LinkageRecord {
  std::string output;
  std::vector<std::string> inputs;
  MethodRef method;
  EnvironmentRef environment;
  std::string actor;
  TimePoint performed_at;
  std::optional<std::string> notes;

  bool operator==(const LinkageRecord&) const = default;
};

/// Marks an identifier as an external input with no producing record.
struct RootDeclaration {
  std::string identifier;
  std::string actor;
  TimePoint declared_at;
  std::optional<std::string> notes;

  bool operator==(const RootDeclaration&) const = default;
};

using LedgerEntry = std::variant<LinkageRecord, RootDeclaration>;

struct LedgerIssue {
  std::size_t line = 0;
  std::string detail;

  bool operator==(const LedgerIssue&) const = default;
};

/// Parsed view of a JSON-lines ledger. Each line carries `prev`, the SHA-256
/// of the preceding line, so edits and deletions surface as issues.
struct Ledger {
  std::vector<LinkageRecord> records;
  std::vector<RootDeclaration> roots;
  std::vector<LedgerIssue> issues;
  std::string last_line_digest;  // what the next line's `prev` must be

  const LinkageRecord* producer(std::string_view output) const;
  bool is_root(std::string_view id) const;
  /// Outputs no record consumes, sorted.
  std::vector<std::string> terminal_outputs() const;
};

inline constexpr std::string_view kGenesisDigest =
    "0000000000000000000000000000000000000000000000000000000000000000";

Ledger parse_ledger(std::string_view text);
/// An absent file is an empty ledger.
Ledger load_ledger(const fs::path& file);
/// Canonical line for `entry` (sorted keys, no trailing newline).
std::string render_entry(const LedgerEntry& entry, std::string_view prev);

/// Appends after checking the record. Throws ArgumentError (malformed
/// identifiers or method), CycleError (self-loop or cross-record cycle),
/// ConflictError (output already recorded), NotFoundError (output does not
/// resolve) and LockedError (another writer).
void record_linkage(const fs::path& ledger, const LinkageRecord& record, minid::MinidService& resolver);
void declare_root(const fs::path& ledger, const RootDeclaration& root);

struct Dag {
  std::vector<std::string> nodes;                         // sorted
  std::vector<std::pair<std::string, std::string>> edges;  // (output, input), sorted
  std::vector<std::string> roots;                          // no producing record, sorted
};

/// Throws NotFoundError if `start` is neither an output nor a declared
/// root, CycleError naming the cycle's identifiers.
Dag walk_chain(const Ledger& ledger, std::string_view start);

enum class Depth { resolve_only, full_fixity };
enum class Fixity { match, mismatch, unverifiable };
std::string_view fixity_name(Fixity f) noexcept;

struct NodeResult {
  std::string role;  // data, method, environment
  bool resolved = false;
  std::string status;  // minid status, or empty when unresolved
  Fixity fixity = Fixity::unverifiable;
  bool record_present = false;
  bool declared_root = false;
  bool failed = false;
  std::string detail;
};

struct ChainReport {
  std::string start;
  std::map<std::string, NodeResult> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<LedgerIssue> ledger_issues;
  std::vector<std::string> failures;  // sorted identifiers

  bool intact() const { return failures.empty() && ledger_issues.empty(); }
};

struct VerifyOptions {
  Depth depth = Depth::full_fixity;
  unsigned parallelism = 4;
  fetch::RetryPolicy retry;
};

ChainReport verify_chain(const Ledger& ledger, std::string_view start, minid::MinidService& resolver,
                         const fetch::SchemeRegistry& schemes, const VerifyOptions& options = {});

struct CiReport {
  std::string schedule;
  std::vector<ChainReport> chains;  // sorted by start
  std::vector<LedgerIssue> ledger_issues;

  bool intact() const;
  int exit_status() const { return intact() ? 0 : 1; }
};

/// Full-fixity verification of every terminal output. Writes the report
/// (stable ordering, no timestamps) to `report_file` when given.
CiReport ci_verify(const fs::path& ledger, minid::MinidService& resolver, const fetch::SchemeRegistry& schemes,
                   std::string schedule = "on-demand", const std::optional<fs::path>& report_file = std::nullopt,
                   const VerifyOptions& options = {});

std::string report_json(const ChainReport& r);
std::string report_json(const CiReport& r);

}  // namespace cuflinks::cuflink
