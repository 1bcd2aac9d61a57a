#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cuflinks/clock.hpp"
#include "cuflinks/digest.hpp"
#include "cuflinks/fetch_list.hpp"

namespace cuflinks::bag {

namespace fs = std::filesystem;

inline constexpr std::string_view kBagitTxt = "bagit.txt";
inline constexpr std::string_view kBagInfoTxt = "bag-info.txt";
inline constexpr std::string_view kFetchTxt = "fetch.txt";
inline constexpr std::string_view kRoManifestPath = "metadata/manifest.json";
/// Scratch area for in-flight downloads; never part of the bag.
inline constexpr std::string_view kTempDir = ".bdbag-tmp";
inline constexpr std::string_view kLockFile = ".bdbag-lock";
inline constexpr std::string_view kBdbagProfile =
    "https://raw.githubusercontent.com/fair-research/bdbag/master/profiles/bdbag-profile.json";

struct BagDeclaration {
  std::string version = "1.0";
  std::string encoding = "UTF-8";

  bool operator==(const BagDeclaration&) const = default;
};

struct Manifest {
  ChecksumAlgorithm algorithm = ChecksumAlgorithm::sha256;
  std::map<std::string, std::string> entries;  // in-bag path -> lowercase hex

  bool operator==(const Manifest&) const = default;
};

/// Where an entry's bytes live: nowhere (described only), a file, or memory.
using Content = std::variant<std::monostate, fs::path, std::string>;

struct FileEntry {
  std::string path;
  std::uint64_t byte_length = 0;
  Content content;

  /// Structural: content sources are not compared.
  bool operator==(const FileEntry& o) const { return path == o.path && byte_length == o.byte_length; }
};
using PayloadEntry = FileEntry;
using MetadataEntry = FileEntry;

FileEntry file_entry(std::string path, const fs::path& source);
FileEntry bytes_entry(std::string path, std::string bytes);

using BagInfo = std::vector<std::pair<std::string, std::string>>;

struct Bag {
  std::string root_name;
  std::vector<PayloadEntry> payload;        // sorted by path
  std::vector<MetadataEntry> tag_metadata;  // metadata/ files and unrecognised root tag files
  BagInfo bag_info;
  BagDeclaration bagit_decl;
  std::map<ChecksumAlgorithm, Manifest> manifests;
  std::map<ChecksumAlgorithm, Manifest> tag_manifests;
  std::vector<fetch::FetchEntry> fetch;
  /// Set when the bag is backed by a directory; validation then reads from disk.
  std::optional<fs::path> location;

  /// Structural equality; `location` and content sources are ignored.
  bool operator==(const Bag& o) const;

  std::optional<std::string> info(std::string_view key) const;
  const PayloadEntry* find_payload(std::string_view path) const;
  const MetadataEntry* find_metadata(std::string_view path) const;
};

// ---- tag file codecs -------------------------------------------------------

std::string manifest_filename(ChecksumAlgorithm alg);
std::string tagmanifest_filename(ChecksumAlgorithm alg);

std::string render_bagit_txt(const BagDeclaration& decl);
BagDeclaration parse_bagit_txt(std::string_view text);

std::string render_bag_info(const BagInfo& info);
BagInfo parse_bag_info(std::string_view text);

/// `<digest><two spaces><encoded path>` lines, sorted by path.
std::string render_manifest(const Manifest& m);
/// Accepts one or more spaces/tabs between digest and path. `payload`
/// restricts paths to data/, otherwise paths must lie outside it.
Manifest parse_manifest(std::string_view text, ChecksumAlgorithm alg, std::string_view file, bool payload);

// ---- operations ------------------------------------------------------------

/// A remote payload element plus the digests the manifests must carry for it.
struct RemoteFile {
  fetch::FetchEntry entry;
  DigestMap digests;
};

struct CreateOptions {
  std::string root_name = "bag";
  /// Copied, unchanged, under data/.
  std::optional<fs::path> source_dir;
  /// Extra payload files; `path` is relative to data/.
  std::vector<FileEntry> payload_files;
  /// `path` is relative to metadata/.
  std::vector<FileEntry> metadata_files;
  std::vector<RemoteFile> remote;
  AlgorithmSet algorithms{ChecksumAlgorithm::sha256};
  BagInfo bag_info_extra;
  Clock clock = system_clock();
  std::string profile_identifier = std::string(kBdbagProfile);
};

Bag create_bag(const CreateOptions& opts);

/// Returns a copy with `entry` added (or replaced) among the tag metadata and
/// the tag manifests recomputed.
Bag with_tag_file(Bag bag, MetadataEntry entry);

/// Recomputes every tag manifest from the bag's current tag files.
void refresh_tag_manifests(Bag& bag);

/// Rendered bytes of the generated tag files, keyed by in-bag path.
std::map<std::string, std::string> render_tag_files(const Bag& bag);

/// Writes the bag to `destination` (absent or empty) and returns the
/// directory-backed bag.
Bag write_bag(const Bag& bag, const fs::path& destination);

Bag read_bag(const fs::path& location);

// ---- validation ------------------------------------------------------------

enum class ValidationLevel { fast, full };

enum class FindingKind { missing, extra, size_mismatch, digest_mismatch, fetch_pending, malformed };
std::string_view finding_kind_name(FindingKind k) noexcept;

struct Finding {
  std::string path;
  FindingKind kind;
  std::string manifest;  // manifest file that produced the finding, if any
  std::string detail;

  bool operator==(const Finding&) const = default;
  auto operator<=>(const Finding& o) const {
    if (auto c = path <=> o.path; c != 0) return c;
    if (auto c = kind <=> o.kind; c != 0) return c;
    return manifest <=> o.manifest;
  }
};

struct ValidationReport {
  std::vector<Finding> findings;  // sorted

  bool ok() const noexcept { return findings.empty(); }
  /// Findings other than fetch-pending.
  bool ok_except_pending() const noexcept;
};

ValidationReport validate_bag(const Bag& bag, ValidationLevel level);

/// Reads and validates a directory. Parse failures in tag files become
/// `malformed` findings naming the file; a missing bagit.txt still throws.
ValidationReport validate_bag_at(const fs::path& location, ValidationLevel level);

}  // namespace cuflinks::bag
