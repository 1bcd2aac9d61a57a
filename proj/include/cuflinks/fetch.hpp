#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cuflinks/fetch_list.hpp"

namespace cuflinks::fetch {

namespace fs = std::filesystem;

/// A way of retrieving bytes for URLs of one scheme.
class TransferScheme {
 public:
  virtual ~TransferScheme() = default;
  /// Streams the resource into `sink` and returns the byte count. Throws
  /// TransferError; `transient()` on the error decides whether to retry.
  virtual std::uint64_t fetch(const std::string& url, std::ostream& sink) = 0;
};

class SchemeRegistry {
 public:
  /// Throws ArgumentError if `name` is already registered.
  void add(std::string name, std::shared_ptr<TransferScheme> scheme);
  TransferScheme* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::shared_ptr<TransferScheme>, std::less<>> schemes_;
};

struct HttpOptions {
  std::chrono::seconds timeout{60};
  int max_redirects = 5;
  std::string user_agent = std::string("cuflinks/") + CUFLINKS_VERSION;
};

/// GET without cookies; follows up to `max_redirects` redirects.
std::shared_ptr<TransferScheme> make_http_scheme(HttpOptions options = {});
/// `file:///absolute/path`
std::shared_ptr<TransferScheme> make_file_scheme();
/// Accepts Globus URLs opaquely and fails every transfer; a placeholder
/// until a real Globus transfer client is plugged in.
std::shared_ptr<TransferScheme> make_globus_placeholder();

/// http, https, file and globus.
SchemeRegistry default_schemes(HttpOptions options = {});

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{500};
};

/// Downloads `url` into `dest` (truncating it on every attempt), retrying
/// transient failures with exponential backoff. Returns the byte count.
std::uint64_t fetch_to_file(const SchemeRegistry& schemes, const std::string& url, const fs::path& dest,
                            const RetryPolicy& retry);

enum class Outcome { fetched, digest_mismatch, length_mismatch, transfer_error, skipped };
std::string_view outcome_name(Outcome o) noexcept;

struct EntryResult {
  std::string path;
  std::string url;
  Outcome outcome = Outcome::skipped;
  std::uint64_t bytes = 0;
  std::string detail;

  bool operator==(const EntryResult&) const = default;
};

struct MaterializationReport {
  std::vector<EntryResult> entries;  // sorted by path

  std::size_t count(Outcome o) const;
  /// True when no entry failed (skipped entries are not failures).
  bool ok() const;
};

struct MaterializeOptions {
  /// Empty means every fetch entry.
  std::vector<std::string> paths;
  unsigned parallelism = 4;
  RetryPolicy retry;
};

/// Downloads the selected fetch entries into the bag. Each download lands in
/// `.bdbag-tmp/`, is checked against the declared length and every payload
/// manifest digest, and only then is renamed into place. Fetched entries are
/// dropped from fetch.txt (and the tag manifests updated) once all transfers
/// have settled. Holds `.bdbag-lock` throughout.
MaterializationReport materialize(const fs::path& bag_dir, const SchemeRegistry& schemes,
                                  const MaterializeOptions& options = {});

struct Completeness {
  bool complete = false;
  std::vector<std::string> pending;  // sorted
};

Completeness verify_completeness(const fs::path& bag_dir);

}  // namespace cuflinks::fetch
