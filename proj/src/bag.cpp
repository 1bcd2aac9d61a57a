#include "cuflinks/bag.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "cuflinks/bag_path.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"

namespace cuflinks::bag {

FileEntry file_entry(std::string path, const fs::path& source) {
  std::error_code ec;
  auto size = fs::file_size(source, ec);
  if (ec) throw IoError(source, "cannot read: " + ec.message());
  return FileEntry{std::move(path), size, source};
}

FileEntry bytes_entry(std::string path, std::string bytes) {
  auto size = bytes.size();
  return FileEntry{std::move(path), size, std::move(bytes)};
}

bool Bag::operator==(const Bag& o) const {
  return root_name == o.root_name && payload == o.payload && tag_metadata == o.tag_metadata &&
         bag_info == o.bag_info && bagit_decl == o.bagit_decl && manifests == o.manifests &&
         tag_manifests == o.tag_manifests && fetch == o.fetch;
}

std::optional<std::string> Bag::info(std::string_view key) const {
  for (const auto& [k, v] : bag_info) {
    if (k == key) return v;
  }
  return std::nullopt;
}

namespace {

template <typename Entries>
auto find_entry(const Entries& entries, std::string_view path) -> decltype(&entries.front()) {
  auto it = std::lower_bound(entries.begin(), entries.end(), path,
                             [](const FileEntry& e, std::string_view p) { return e.path < p; });
  return it != entries.end() && it->path == path ? &*it : nullptr;
}

DigestMap hash_content(const Content& content, const std::string& path, const AlgorithmSet& algs) {
  if (const auto* file = std::get_if<fs::path>(&content)) return digest_file(*file, algs);
  if (const auto* bytes = std::get_if<std::string>(&content)) {
    Hasher h(algs);
    h.update(*bytes);
    return h.finish();
  }
  throw BagStructureError("no content available for '" + path + "'");
}

void sort_entries(std::vector<FileEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

const PayloadEntry* Bag::find_payload(std::string_view path) const { return find_entry(payload, path); }

const MetadataEntry* Bag::find_metadata(std::string_view path) const { return find_entry(tag_metadata, path); }

// ---- create ----------------------------------------------------------------

Bag create_bag(const CreateOptions& opts) {
  if (opts.algorithms.empty()) throw ArgumentError("at least one checksum algorithm is required");

  Bag bag;
  bag.root_name = opts.root_name;
  std::set<std::string> seen;

  auto add_payload = [&](FileEntry e) {
    require_payload_path(e.path);
    if (!seen.insert(e.path).second) throw ArgumentError("duplicate payload path '" + e.path + "'");
    bag.payload.push_back(std::move(e));
  };

  if (opts.source_dir) {
    std::error_code ec;
    if (!fs::is_directory(*opts.source_dir, ec)) throw IoError(*opts.source_dir, "not a readable directory");
    for (const auto& rel : list_files(*opts.source_dir)) {
      add_payload(file_entry("data/" + rel, *opts.source_dir / rel));
    }
  }
  for (auto e : opts.payload_files) {
    e.path = "data/" + e.path;
    add_payload(std::move(e));
  }
  for (auto e : opts.metadata_files) {
    e.path = "metadata/" + e.path;
    if (!is_metadata_path(e.path)) throw BagStructureError("invalid metadata path '" + e.path + "'");
    if (!seen.insert(e.path).second) throw ArgumentError("duplicate metadata path '" + e.path + "'");
    bag.tag_metadata.push_back(std::move(e));
  }
  sort_entries(bag.payload);
  sort_entries(bag.tag_metadata);

  for (auto alg : opts.algorithms) bag.manifests[alg].algorithm = alg;
  for (const auto& entry : bag.payload) {
    auto digests = hash_content(entry.content, entry.path, opts.algorithms);
    for (auto& [alg, hex] : digests) bag.manifests[alg].entries[entry.path] = std::move(hex);
  }

  std::uint64_t oxum_bytes = 0, oxum_files = bag.payload.size();
  bool oxum_known = true;
  for (const auto& e : bag.payload) oxum_bytes += e.byte_length;
  for (const auto& remote : opts.remote) {
    const auto& fe = remote.entry;
    require_payload_path(fe.path);
    if (fetch::url_scheme(fe.url).empty() || fe.url.find_first_of(" \t\r\n") != std::string::npos) {
      throw ArgumentError("remote URL '" + fe.url + "' is not an absolute URI");
    }
    if (!seen.insert(fe.path).second) throw ArgumentError("remote path '" + fe.path + "' collides with another entry");
    for (auto alg : opts.algorithms) {
      auto it = remote.digests.find(alg);
      if (it == remote.digests.end() || !is_valid_hex_digest(it->second, alg)) {
        throw ArgumentError("remote file '" + fe.path + "' lacks a valid " + std::string(algorithm_name(alg)) + " digest");
      }
      bag.manifests[alg].entries[fe.path] = it->second;
    }
    bag.fetch.push_back(fe);
    ++oxum_files;
    if (fe.length) {
      oxum_bytes += *fe.length;
    } else {
      oxum_known = false;
    }
  }
  std::sort(bag.fetch.begin(), bag.fetch.end(), [](const auto& a, const auto& b) { return a.path < b.path; });

  BagInfo info;
  info.emplace_back("BagIt-Profile-Identifier", opts.profile_identifier);
  info.emplace_back("Bagging-Date", format_date(opts.clock()));
  if (oxum_known) info.emplace_back("Payload-Oxum", std::to_string(oxum_bytes) + "." + std::to_string(oxum_files));
  for (const auto& [key, value] : opts.bag_info_extra) {
    if (key.empty() || key.find_first_of(" \t:\r\n") != std::string::npos) {
      throw ArgumentError("invalid bag-info label '" + key + "'");
    }
    if (iequals(key, "Payload-Oxum")) throw ArgumentError("Payload-Oxum is computed and cannot be supplied");
    auto it = std::find_if(info.begin(), info.end(), [&](const auto& kv) { return iequals(kv.first, key); });
    if (it != info.end() && it - info.begin() < 2) {
      it->second = value;
    } else {
      info.emplace_back(key, value);
    }
  }
  bag.bag_info = std::move(info);

  refresh_tag_manifests(bag);
  return bag;
}

std::map<std::string, std::string> render_tag_files(const Bag& bag) {
  std::map<std::string, std::string> out;
  out.emplace(kBagitTxt, render_bagit_txt(bag.bagit_decl));
  out.emplace(kBagInfoTxt, render_bag_info(bag.bag_info));
  for (const auto& [alg, m] : bag.manifests) out.emplace(manifest_filename(alg), render_manifest(m));
  out.emplace(kFetchTxt, fetch::render_fetch(bag.fetch));
  return out;
}

void refresh_tag_manifests(Bag& bag) {
  AlgorithmSet algs;
  for (const auto& [alg, m] : bag.tag_manifests) algs.insert(alg);
  if (algs.empty()) {
    for (const auto& [alg, m] : bag.manifests) algs.insert(alg);
  }
  std::map<ChecksumAlgorithm, Manifest> fresh;
  for (auto alg : algs) fresh[alg].algorithm = alg;

  auto record = [&](const std::string& path, DigestMap digests) {
    for (auto& [alg, hex] : digests) fresh[alg].entries[path] = std::move(hex);
  };
  for (const auto& [path, text] : render_tag_files(bag)) {
    Hasher h(algs);
    h.update(text);
    record(path, h.finish());
  }
  for (const auto& entry : bag.tag_metadata) record(entry.path, hash_content(entry.content, entry.path, algs));
  bag.tag_manifests = std::move(fresh);
}

Bag with_tag_file(Bag bag, MetadataEntry entry) {
  if (!is_valid_bag_path(entry.path) || is_payload_path(entry.path)) {
    throw BagStructureError("invalid tag file path '" + entry.path + "'");
  }
  auto it = std::find_if(bag.tag_metadata.begin(), bag.tag_metadata.end(),
                         [&](const auto& e) { return e.path == entry.path; });
  if (it != bag.tag_metadata.end()) {
    *it = std::move(entry);
  } else {
    bag.tag_metadata.push_back(std::move(entry));
  }
  sort_entries(bag.tag_metadata);
  refresh_tag_manifests(bag);
  return bag;
}

// ---- write -----------------------------------------------------------------

namespace {

void materialize_entry(const FileEntry& entry, const fs::path& target) {
  fs::create_directories(target.parent_path());
  if (const auto* file = std::get_if<fs::path>(&entry.content)) {
    std::error_code ec;
    fs::copy_file(*file, target, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError(*file, "cannot copy: " + ec.message());
  } else if (const auto* bytes = std::get_if<std::string>(&entry.content)) {
    write_file(target, *bytes);
  } else {
    throw BagStructureError("no content available for '" + entry.path + "'");
  }
}

}  // namespace

Bag write_bag(const Bag& bag, const fs::path& destination) {
  if (!is_empty_or_absent(destination)) {
    throw ConflictError("destination '" + destination.string() + "' exists and is not empty");
  }
  fs::path dest = fs::absolute(destination).lexically_normal();
  if (dest.filename().empty()) dest = dest.parent_path();
  fs::create_directories(dest.parent_path());

  std::random_device rd;
  fs::path staging = dest.parent_path() / ("." + dest.filename().string() + ".partial-" + std::to_string(rd()));
  try {
    fs::create_directories(staging / "data");
    for (const auto& [path, text] : render_tag_files(bag)) write_file(staging / path, text);
    for (const auto& [alg, m] : bag.tag_manifests) write_file(staging / tagmanifest_filename(alg), render_manifest(m));
    for (const auto& e : bag.payload) materialize_entry(e, staging / e.path);
    for (const auto& e : bag.tag_metadata) materialize_entry(e, staging / e.path);
    if (fs::exists(dest)) fs::remove(dest);
    fs::rename(staging, dest);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging);
    throw IoError(dest, e.what());
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  return read_bag(dest);
}

// ---- read ------------------------------------------------------------------

namespace {

enum class TagRole { bagit, bag_info, fetch, manifest, tagmanifest, other };

TagRole classify(const std::string& path, std::optional<ChecksumAlgorithm>& alg) {
  if (path == kBagitTxt) return TagRole::bagit;
  if (path == kBagInfoTxt) return TagRole::bag_info;
  if (path == kFetchTxt) return TagRole::fetch;
  auto match = [&](std::string_view prefix) {
    if (path.rfind(prefix, 0) != 0 || path.size() <= prefix.size() + 4) return false;
    if (path.substr(path.size() - 4) != ".txt") return false;
    alg = parse_algorithm(std::string_view(path).substr(prefix.size(), path.size() - prefix.size() - 4));
    return alg.has_value();
  };
  if (match("manifest-")) return TagRole::manifest;
  if (match("tagmanifest-")) return TagRole::tagmanifest;
  return TagRole::other;
}

}  // namespace

Bag read_bag(const fs::path& location) {
  std::error_code ec;
  if (!fs::is_regular_file(location / kBagitTxt, ec)) {
    throw NotABagError("'" + location.string() + "' is not a bag (no bagit.txt)");
  }
  Bag bag;
  fs::path root = fs::absolute(location).lexically_normal();
  if (root.filename().empty()) root = root.parent_path();
  bag.root_name = root.filename().string();
  bag.location = root;

  auto root_files = list_files(root, {"data", std::string(kTempDir), std::string(kLockFile)});
  for (const auto& path : root_files) {
    std::optional<ChecksumAlgorithm> alg;
    switch (classify(path, alg)) {
      case TagRole::bagit:
        bag.bagit_decl = parse_bagit_txt(read_file(root / path));
        break;
      case TagRole::bag_info:
        bag.bag_info = parse_bag_info(read_file(root / path));
        break;
      case TagRole::fetch:
        bag.fetch = fetch::parse_fetch(read_file(root / path), path);
        break;
      case TagRole::manifest:
        bag.manifests[*alg] = parse_manifest(read_file(root / path), *alg, path, true);
        break;
      case TagRole::tagmanifest:
        bag.tag_manifests[*alg] = parse_manifest(read_file(root / path), *alg, path, false);
        break;
      case TagRole::other:
        if (!is_valid_bag_path(path)) throw BagStructureError("tag file name '" + path + "' is not a valid bag path");
        bag.tag_metadata.push_back(file_entry(path, root / path));
        break;
    }
  }
  for (const auto& rel : list_files(root / "data")) {
    std::string path = "data/" + rel;
    if (!is_payload_path(path)) throw BagStructureError("payload file name '" + path + "' is not a valid bag path");
    bag.payload.push_back(file_entry(path, root / path));
  }
  if (bag.manifests.empty()) throw BagStructureError("'" + root.string() + "' has no payload manifest");
  return bag;
}

}  // namespace cuflinks::bag
