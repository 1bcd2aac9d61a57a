#include "cuflinks/fetch.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "cuflinks/bag.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "parallel.hpp"

namespace cuflinks::fetch {

void SchemeRegistry::add(std::string name, std::shared_ptr<TransferScheme> scheme) {
  if (!scheme) throw ArgumentError("transfer scheme '" + name + "' is null");
  if (!schemes_.emplace(name, std::move(scheme)).second) {
    throw ArgumentError("transfer scheme '" + name + "' is already registered");
  }
}

TransferScheme* SchemeRegistry::find(std::string_view name) const {
  auto it = schemes_.find(name);
  return it == schemes_.end() ? nullptr : it->second.get();
}

std::vector<std::string> SchemeRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : schemes_) out.push_back(name);
  return out;
}

namespace {

std::string percent_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
        std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

class FileScheme : public TransferScheme {
 public:
  std::uint64_t fetch(const std::string& url, std::ostream& sink) override {
    constexpr std::string_view prefix = "file://";
    if (url.rfind(prefix, 0) != 0 || url.size() == prefix.size() || url[prefix.size()] != '/') {
      throw TransferError("'" + url + "' is not a file:///absolute URL", false);
    }
    fs::path file = percent_decode(std::string_view(url).substr(prefix.size()));
    std::ifstream in(file, std::ios::binary);
    if (!in) throw TransferError("cannot open '" + file.string() + "'", false);
    std::uint64_t total = 0;
    char buf[1 << 16];
    while (in) {
      in.read(buf, sizeof buf);
      auto got = in.gcount();
      if (got <= 0) break;
      sink.write(buf, got);
      total += static_cast<std::uint64_t>(got);
    }
    if (in.bad()) throw TransferError("read failed on '" + file.string() + "'", true);
    if (!sink) throw IoError("", "write failed while copying '" + url + "'");
    return total;
  }
};

class GlobusPlaceholder : public TransferScheme {
 public:
  std::uint64_t fetch(const std::string& url, std::ostream&) override {
    throw TransferError("no Globus transfer client is configured for '" + url + "'", false);
  }
};

void commit_fetch_list(const fs::path& bag_dir, const std::vector<FetchEntry>& remaining) {
  std::string text = render_fetch(remaining);
  write_file_atomic(bag_dir / bag::kFetchTxt, text);
  for (ChecksumAlgorithm alg : {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256, ChecksumAlgorithm::sha512}) {
    fs::path tm = bag_dir / bag::tagmanifest_filename(alg);
    if (!fs::exists(tm)) continue;
    bag::Manifest m = bag::parse_manifest(read_file(tm), alg, tm.filename().string(), false);
    m.entries[std::string(bag::kFetchTxt)] = compute_digest(text, alg);
    write_file_atomic(tm, bag::render_manifest(m));
  }
}

}  // namespace

std::shared_ptr<TransferScheme> make_file_scheme() { return std::make_shared<FileScheme>(); }
std::shared_ptr<TransferScheme> make_globus_placeholder() { return std::make_shared<GlobusPlaceholder>(); }

SchemeRegistry default_schemes(HttpOptions options) {
  SchemeRegistry reg;
  auto http = make_http_scheme(std::move(options));
  reg.add("http", http);
  reg.add("https", http);
  reg.add("file", make_file_scheme());
  reg.add("globus", make_globus_placeholder());
  return reg;
}

std::uint64_t fetch_to_file(const SchemeRegistry& schemes, const std::string& url, const fs::path& dest,
                            const RetryPolicy& retry) {
  TransferScheme* scheme = schemes.find(url_scheme(url));
  if (!scheme) throw ConfigError("no transfer scheme registered for '" + url + "'");
  int attempts = std::max(1, retry.attempts);
  for (int attempt = 0;; ++attempt) {
    try {
      std::ofstream out(dest, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError(dest, "cannot open for writing");
      std::uint64_t n = scheme->fetch(url, out);
      out.flush();
      if (!out) throw IoError(dest, "write failed");
      return n;
    } catch (const TransferError& e) {
      if (!e.transient() || attempt + 1 >= attempts) throw;
      std::this_thread::sleep_for(retry.base_delay * (1 << attempt));
    }
  }
}

std::string_view outcome_name(Outcome o) noexcept {
  switch (o) {
    case Outcome::fetched: return "fetched";
    case Outcome::digest_mismatch: return "digest-mismatch";
    case Outcome::length_mismatch: return "length-mismatch";
    case Outcome::transfer_error: return "transfer-error";
    case Outcome::skipped: return "skipped";
  }
  return "?";
}

std::size_t MaterializationReport::count(Outcome o) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [o](const EntryResult& r) { return r.outcome == o; }));
}

bool MaterializationReport::ok() const {
  return std::all_of(entries.begin(), entries.end(), [](const EntryResult& r) {
    return r.outcome == Outcome::fetched || r.outcome == Outcome::skipped;
  });
}

MaterializationReport materialize(const fs::path& bag_dir, const SchemeRegistry& schemes,
                                  const MaterializeOptions& options) {
  FileLock lock(bag_dir / bag::kLockFile, "bag '" + bag_dir.string() + "'", true);

  fs::path tmp = bag_dir / bag::kTempDir;
  fs::remove_all(tmp);

  bag::Bag bag = bag::read_bag(bag_dir);
  bag::ValidationReport fast = bag::validate_bag(bag, bag::ValidationLevel::fast);
  if (!fast.ok_except_pending()) {
    throw BagInvalidError("bag '" + bag_dir.string() + "' fails fast validation");
  }

  std::set<std::string> wanted(options.paths.begin(), options.paths.end());
  for (const auto& p : wanted) {
    bool listed = std::any_of(bag.fetch.begin(), bag.fetch.end(), [&](const FetchEntry& e) { return e.path == p; });
    if (!listed) throw ArgumentError("'" + p + "' is not in fetch.txt");
  }

  std::vector<std::size_t> selected;
  MaterializationReport report;
  report.entries.resize(bag.fetch.size());
  for (std::size_t i = 0; i < bag.fetch.size(); ++i) {
    const FetchEntry& e = bag.fetch[i];
    report.entries[i] = EntryResult{e.path, e.url, Outcome::skipped, 0, "not selected"};
    if (!wanted.empty() && !wanted.count(e.path)) continue;
    if (!schemes.has(url_scheme(e.url))) {
      throw ConfigError("no transfer scheme registered for '" + e.url + "'");
    }
    selected.push_back(i);
  }

  auto expected_digests = [&](const std::string& path) {
    DigestMap out;
    for (const auto& [alg, m] : bag.manifests) {
      if (auto it = m.entries.find(path); it != m.entries.end()) out[alg] = it->second;
    }
    return out;
  };

  std::vector<char> done(bag.fetch.size(), 0);
  if (!selected.empty()) fs::create_directories(tmp);
  std::mutex commit_mu;

  detail::parallel_for(selected.size(), std::max(1u, options.parallelism), [&](std::size_t k) {
    std::size_t i = selected[k];
    const FetchEntry& e = bag.fetch[i];
    EntryResult& r = report.entries[i];
    r.detail.clear();
    DigestMap expected = expected_digests(e.path);
    AlgorithmSet algs;
    for (const auto& [alg, _] : expected) algs.insert(alg);
    fs::path final_path = bag_dir / e.path;

    auto matches = [&](const fs::path& file) {
      DigestMap got = digest_file(file, algs);
      for (const auto& [alg, hex] : expected) {
        if (got.at(alg) != hex) {
          r.detail = std::string(algorithm_name(alg)) + " expected " + hex + ", got " + got.at(alg);
          return false;
        }
      }
      return true;
    };

    if (fs::is_regular_file(final_path) && matches(final_path)) {
      r.outcome = Outcome::skipped;
      r.bytes = fs::file_size(final_path);
      r.detail = "already present";
      done[i] = 1;
      return;
    }

    fs::path staged = tmp / std::to_string(i);
    try {
      r.bytes = fetch_to_file(schemes, e.url, staged, options.retry);
    } catch (const Error& err) {
      r.outcome = Outcome::transfer_error;
      r.detail = err.what();
      fs::remove(staged);
      return;
    }
    if (e.length && *e.length != r.bytes) {
      r.outcome = Outcome::length_mismatch;
      r.detail = "expected " + std::to_string(*e.length) + " bytes, got " + std::to_string(r.bytes);
      fs::remove(staged);
      return;
    }
    if (!matches(staged)) {
      r.outcome = Outcome::digest_mismatch;
      fs::remove(staged);
      return;
    }
    {
      std::lock_guard guard(commit_mu);
      fs::create_directories(final_path.parent_path());
      fs::rename(staged, final_path);
    }
    r.outcome = Outcome::fetched;
    done[i] = 1;
  });

  std::vector<FetchEntry> remaining;
  for (std::size_t i = 0; i < bag.fetch.size(); ++i) {
    if (!done[i]) remaining.push_back(bag.fetch[i]);
  }
  if (remaining.size() != bag.fetch.size()) commit_fetch_list(bag_dir, remaining);
  fs::remove_all(tmp);

  std::sort(report.entries.begin(), report.entries.end(),
            [](const EntryResult& a, const EntryResult& b) { return a.path < b.path; });
  return report;
}

Completeness verify_completeness(const fs::path& bag_dir) {
  bag::Bag bag = bag::read_bag(bag_dir);
  std::set<std::string> pending;
  for (const auto& e : bag.fetch) pending.insert(e.path);
  for (const auto& [_, m] : bag.manifests) {
    for (const auto& [path, __] : m.entries) {
      if (!fs::is_regular_file(bag_dir / path)) pending.insert(path);
    }
  }
  return {bag.fetch.empty() && pending.empty(), {pending.begin(), pending.end()}};
}

}  // namespace cuflinks::fetch
