#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cuflinks/clock.hpp"
#include "cuflinks/digest.hpp"
#include "cuflinks/fetch.hpp"

namespace cuflinks::minid {

namespace fs = std::filesystem;

inline constexpr std::string_view kPrefix = "minid:";
inline constexpr std::size_t kMinSuffix = 10;
inline constexpr std::size_t kMaxSuffix = 16;
inline constexpr std::size_t kMintedSuffix = 12;

struct Identifier {
  std::string suffix;

  std::string str() const { return std::string(kPrefix) + suffix; }
  bool operator==(const Identifier&) const = default;
};

/// Throws IdentifierSyntaxError unless `text` is `minid:` plus 10-16 base62 characters.
Identifier parse_identifier(std::string_view text);
bool is_valid_identifier(std::string_view text) noexcept;
/// 12 base62 characters drawn from the OS random source.
std::string random_suffix();

struct Checksum {
  ChecksumAlgorithm algorithm = ChecksumAlgorithm::sha256;
  std::string digest;

  bool operator==(const Checksum&) const = default;
};

struct Status {
  enum class Kind { active, tombstoned, superseded };
  Kind kind = Kind::active;
  std::string superseded_by;  // minid:... or doi:..., when superseded

  static Status active() { return {}; }
  static Status tombstoned() { return {Kind::tombstoned, ""}; }
  static Status superseded(std::string by) { return {Kind::superseded, std::move(by)}; }
  /// `active`, `tombstoned`, `superseded:<id>`
  std::string str() const;
  static Status parse(std::string_view text);
  bool operator==(const Status&) const = default;
};

struct Minid {
  std::string identifier;
  std::string author;
  TimePoint created;
  std::string title;
  std::vector<std::string> locations;
  Checksum checksum;
  Status status;

  bool operator==(const Minid&) const = default;
};

/// The wire form: identifier, author, created, title, locations,
/// checksum{algorithm,digest}, status.
std::string to_json(const Minid& m);
Minid minid_from_json(std::string_view text);

struct MintRequest {
  std::string author;
  std::string title;
  std::vector<std::string> locations;
  Checksum checksum;
};

/// Mint/resolve/update, served locally or over HTTP.
class MinidService {
 public:
  virtual ~MinidService() = default;
  /// Throws ArgumentError on empty locations or a non-SHA-256 checksum.
  virtual Minid mint(const MintRequest& request) = 0;
  /// Throws IdentifierSyntaxError or NotFoundError.
  virtual Minid resolve(std::string_view identifier) = 0;
  /// Throws ConflictError if the minid is not active, ArgumentError if the
  /// result would have no locations or `remove` names an unknown location.
  virtual Minid update_locations(std::string_view identifier, const std::vector<std::string>& add,
                                 const std::vector<std::string>& remove, const std::string& actor) = 0;
  virtual Minid tombstone(std::string_view identifier, const std::string& actor) = 0;
  /// `by` is another minid in the same registry or a `doi:` identifier.
  virtual Minid supersede(std::string_view identifier, const std::string& by, const std::string& actor) = 0;
};

/// File-backed registry: an append-only log of checksummed records replayed
/// into an in-memory index at open. A writable registry holds `<log>.lock`.
class Registry : public MinidService {
 public:
  enum class Mode { read_write, read_only };

  struct OpenInfo {
    std::uint64_t records = 0;
    std::uint64_t truncated_bytes = 0;  // torn tail dropped at open
  };

  /// Throws LockedError when another writer holds the log, IntegrityError on
  /// corruption that is not a torn tail. A read-only view of a missing log
  /// is an empty registry and creates nothing.
  explicit Registry(fs::path log, Mode mode = Mode::read_write, Clock clock = system_clock());
  ~Registry() override;
  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  Minid mint(const MintRequest& request) override;
  Minid resolve(std::string_view identifier) override;
  Minid update_locations(std::string_view identifier, const std::vector<std::string>& add,
                         const std::vector<std::string>& remove, const std::string& actor) override;
  Minid tombstone(std::string_view identifier, const std::string& actor) override;
  Minid supersede(std::string_view identifier, const std::string& by, const std::string& actor) override;

  std::size_t size() const;
  std::uint64_t last_sequence() const;
  const OpenInfo& open_info() const;
  /// Every record, sorted by identifier.
  std::vector<Minid> records() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Client for a registry served over HTTP. `base` is the collection URL
/// (`http://host:port/minid`); identifiers resolve at `<base>/<suffix>`.
class HttpClient : public MinidService {
 public:
  explicit HttpClient(std::string base, std::optional<std::string> token = std::nullopt,
                      std::chrono::seconds timeout = std::chrono::seconds(60));

  Minid mint(const MintRequest& request) override;
  Minid resolve(std::string_view identifier) override;
  Minid update_locations(std::string_view identifier, const std::vector<std::string>& add,
                         const std::vector<std::string>& remove, const std::string& actor) override;
  Minid tombstone(std::string_view identifier, const std::string& actor) override;
  Minid supersede(std::string_view identifier, const std::string& by, const std::string& actor) override;

 private:
  std::string base_;
  std::optional<std::string> token_;
  std::chrono::seconds timeout_;
};

/// HTTP front end for a Registry: POST /minid, GET|PATCH /minid/<suffix>,
/// GET /healthz. Writes require `Authorization: Bearer <token>` when a token
/// is set.
class RegistryServer {
 public:
  RegistryServer(Registry& registry, std::optional<std::string> token = std::nullopt);
  ~RegistryServer();
  RegistryServer(const RegistryServer&) = delete;
  RegistryServer& operator=(const RegistryServer&) = delete;

  /// Binds (port 0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Verification {
  bool match = false;
  bool tombstoned = false;
  std::string expected;
  std::string actual;
};

Verification verify(const Minid& record, std::istream& content);
Verification verify_file(const Minid& record, const fs::path& file);

struct Resolved {
  Minid record;
  std::string location;  // the one that served the bytes
};

/// Downloads the first location that transfers and checks the digest; only a
/// match is moved to `dest`. Throws ConflictError for an inactive minid,
/// IntegrityError on a mismatch, TransferError listing every location's
/// failure when none transfers.
Resolved resolve_to_file(MinidService& service, std::string_view identifier, const fetch::SchemeRegistry& schemes,
                         const fs::path& dest, const fetch::RetryPolicy& retry = {});

/// A `minid:` transfer scheme for fetch.txt entries.
std::shared_ptr<fetch::TransferScheme> make_minid_scheme(std::shared_ptr<MinidService> service,
                                                         fetch::SchemeRegistry schemes);

}  // namespace cuflinks::minid
