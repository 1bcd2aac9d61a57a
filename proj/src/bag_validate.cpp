#include <algorithm>
#include <charconv>
#include <set>

#include "cuflinks/bag.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "parallel.hpp"

namespace cuflinks::bag {

std::string_view finding_kind_name(FindingKind k) noexcept {
  switch (k) {
    case FindingKind::missing:
      return "missing";
    case FindingKind::extra:
      return "extra";
    case FindingKind::size_mismatch:
      return "size-mismatch";
    case FindingKind::digest_mismatch:
      return "digest-mismatch";
    case FindingKind::fetch_pending:
      return "fetch-pending";
    case FindingKind::malformed:
      return "malformed";
  }
  return "";
}

bool ValidationReport::ok_except_pending() const noexcept {
  return std::all_of(findings.begin(), findings.end(),
                     [](const Finding& f) { return f.kind == FindingKind::fetch_pending; });
}

namespace {

/// Uniform access to a bag's files, whether on disk or in memory.
class BagView {
 public:
  explicit BagView(const Bag& bag) : bag_(bag) {
    if (bag.location) {
      const fs::path& root = *bag.location;
      for (const auto& rel : list_files(root / "data")) payload_.insert("data/" + rel);
      for (const auto& path : list_files(root, {"data", std::string(kTempDir), std::string(kLockFile)})) {
        if (path.rfind("tagmanifest-", 0) != 0) tags_.insert(path);
      }
    } else {
      for (const auto& e : bag.payload) payload_.insert(e.path);
      rendered_ = render_tag_files(bag);
      for (const auto& [path, text] : rendered_) tags_.insert(path);
      for (const auto& e : bag.tag_metadata) tags_.insert(e.path);
    }
  }

  const std::set<std::string>& payload() const { return payload_; }
  const std::set<std::string>& tags() const { return tags_; }

  std::optional<std::uint64_t> size_of(const std::string& path) const {
    if (bag_.location) {
      std::error_code ec;
      auto n = fs::file_size(*bag_.location / path, ec);
      if (ec) return std::nullopt;
      return n;
    }
    if (auto it = rendered_.find(path); it != rendered_.end()) return it->second.size();
    const FileEntry* e = bag_.find_payload(path);
    if (!e) e = bag_.find_metadata(path);
    if (!e) return std::nullopt;
    if (const auto* bytes = std::get_if<std::string>(&e->content)) return bytes->size();
    if (const auto* file = std::get_if<fs::path>(&e->content)) {
      std::error_code ec;
      auto n = fs::file_size(*file, ec);
      if (!ec) return n;
    }
    return std::nullopt;
  }

  DigestMap hash(const std::string& path, const AlgorithmSet& algs) const {
    if (bag_.location) return digest_file(*bag_.location / path, algs);
    if (auto it = rendered_.find(path); it != rendered_.end()) {
      Hasher h(algs);
      h.update(it->second);
      return h.finish();
    }
    const FileEntry* e = bag_.find_payload(path);
    if (!e) e = bag_.find_metadata(path);
    if (e) {
      if (const auto* file = std::get_if<fs::path>(&e->content)) return digest_file(*file, algs);
      if (const auto* bytes = std::get_if<std::string>(&e->content)) {
        Hasher h(algs);
        h.update(*bytes);
        return h.finish();
      }
    }
    throw BagStructureError("no content available for '" + path + "'");
  }

 private:
  const Bag& bag_;
  std::set<std::string> payload_;
  std::set<std::string> tags_;
  std::map<std::string, std::string> rendered_;
};

struct HashJob {
  std::string path;
  AlgorithmSet algs;
  DigestMap result;
};

std::optional<std::pair<std::uint64_t, std::uint64_t>> parse_oxum(std::string_view s) {
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  std::uint64_t bytes = 0, files = 0;
  auto a = std::from_chars(s.data(), s.data() + dot, bytes);
  auto b = std::from_chars(s.data() + dot + 1, s.data() + s.size(), files);
  if (a.ec != std::errc{} || a.ptr != s.data() + dot || b.ec != std::errc{} || b.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return std::pair{bytes, files};
}

}  // namespace

ValidationReport validate_bag(const Bag& bag, ValidationLevel level) {
  std::vector<Finding> findings;
  BagView view(bag);
  const auto& local = view.payload();

  std::map<std::string, const fetch::FetchEntry*> fetch_by_path;
  for (const auto& fe : bag.fetch) fetch_by_path.emplace(fe.path, &fe);

  if (bag.manifests.empty()) {
    findings.push_back({".", FindingKind::malformed, "", "no payload manifest"});
  }

  // Enumeration: local ∪ fetched = listed, per manifest.
  std::set<std::string> pending;
  std::set<std::string> listed_anywhere;
  for (const auto& [alg, m] : bag.manifests) {
    const std::string mfile = manifest_filename(alg);
    for (const auto& [path, digest] : m.entries) {
      listed_anywhere.insert(path);
      if (local.count(path)) continue;
      if (fetch_by_path.count(path)) {
        pending.insert(path);
      } else {
        findings.push_back({path, FindingKind::missing, mfile, "listed but not present"});
      }
    }
    for (const auto& path : local) {
      if (!m.entries.count(path)) findings.push_back({path, FindingKind::extra, mfile, "present but not listed"});
    }
  }
  for (const auto& path : pending) {
    findings.push_back({path, FindingKind::fetch_pending, std::string(kFetchTxt), fetch_by_path.at(path)->url});
  }
  for (const auto& fe : bag.fetch) {
    if (!listed_anywhere.count(fe.path)) {
      findings.push_back({fe.path, FindingKind::extra, std::string(kFetchTxt), "fetch entry not listed in any manifest"});
    }
  }

  // Byte counts.
  for (const auto& e : bag.payload) {
    if (!local.count(e.path)) continue;
    auto actual = view.size_of(e.path);
    if (actual && *actual != e.byte_length) {
      findings.push_back({e.path, FindingKind::size_mismatch, "",
                          "expected " + std::to_string(e.byte_length) + " bytes, found " + std::to_string(*actual)});
    }
  }
  for (const auto& fe : bag.fetch) {
    if (!fe.length || !local.count(fe.path)) continue;
    auto actual = view.size_of(fe.path);
    if (actual && *actual != *fe.length) {
      findings.push_back({fe.path, FindingKind::size_mismatch, std::string(kFetchTxt),
                          "fetch.txt declares " + std::to_string(*fe.length) + " bytes, found " + std::to_string(*actual)});
    }
  }
  bool enumeration_clean = std::none_of(findings.begin(), findings.end(), [](const Finding& f) {
    return f.kind == FindingKind::missing || f.kind == FindingKind::extra;
  });
  if (auto oxum_text = bag.info("Payload-Oxum"); oxum_text && enumeration_clean) {
    auto declared = parse_oxum(*oxum_text);
    if (!declared) {
      findings.push_back({std::string(kBagInfoTxt), FindingKind::malformed, "", "Payload-Oxum '" + *oxum_text + "'"});
    } else {
      std::uint64_t bytes = 0, files = 0;
      bool known = true;
      for (const auto& path : listed_anywhere) {
        ++files;
        if (local.count(path)) {
          bytes += view.size_of(path).value_or(0);
        } else if (auto it = fetch_by_path.find(path); it != fetch_by_path.end() && it->second->length) {
          bytes += *it->second->length;
        } else {
          known = false;
        }
      }
      if (known && (bytes != declared->first || files != declared->second)) {
        findings.push_back({std::string(kBagInfoTxt), FindingKind::size_mismatch, "",
                            "Payload-Oxum " + *oxum_text + " but payload is " + std::to_string(bytes) + "." +
                                std::to_string(files)});
      }
    }
  }

  // Tag enumeration.
  for (const auto& [alg, m] : bag.tag_manifests) {
    const std::string tfile = tagmanifest_filename(alg);
    for (const auto& [path, digest] : m.entries) {
      if (!view.tags().count(path)) findings.push_back({path, FindingKind::missing, tfile, "listed but not present"});
    }
    for (const auto& path : view.tags()) {
      if (!m.entries.count(path)) findings.push_back({path, FindingKind::extra, tfile, "tag file not listed"});
    }
  }

  if (level == ValidationLevel::full) {
    std::vector<HashJob> jobs;
    for (const auto& path : local) {
      HashJob job{path, {}, {}};
      for (const auto& [alg, m] : bag.manifests) {
        if (m.entries.count(path)) job.algs.insert(alg);
      }
      if (!job.algs.empty()) jobs.push_back(std::move(job));
    }
    std::size_t tag_start = jobs.size();
    for (const auto& path : view.tags()) {
      HashJob job{path, {}, {}};
      for (const auto& [alg, m] : bag.tag_manifests) {
        if (m.entries.count(path)) job.algs.insert(alg);
      }
      if (!job.algs.empty()) jobs.push_back(std::move(job));
    }
    detail::parallel_for(jobs.size(), detail::default_parallelism(),
                         [&](std::size_t i) { jobs[i].result = view.hash(jobs[i].path, jobs[i].algs); });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto& manifests = i < tag_start ? bag.manifests : bag.tag_manifests;
      for (const auto& [alg, actual] : jobs[i].result) {
        const auto& expected = manifests.at(alg).entries.at(jobs[i].path);
        if (expected != actual) {
          std::string mfile = i < tag_start ? manifest_filename(alg) : tagmanifest_filename(alg);
          findings.push_back({jobs[i].path, FindingKind::digest_mismatch, mfile,
                              "expected " + expected + ", computed " + actual});
        }
      }
    }
  }

  std::sort(findings.begin(), findings.end());
  findings.erase(std::unique(findings.begin(), findings.end()), findings.end());
  return ValidationReport{std::move(findings)};
}

ValidationReport validate_bag_at(const fs::path& location, ValidationLevel level) {
  try {
    return validate_bag(read_bag(location), level);
  } catch (const ParseError& e) {
    return ValidationReport{{Finding{e.file(), FindingKind::malformed, "", e.what()}}};
  } catch (const BagStructureError& e) {
    return ValidationReport{{Finding{".", FindingKind::malformed, "", e.what()}}};
  }
}

}  // namespace cuflinks::bag
