#include "cuflinks/archive.hpp"

#include <fstream>
#include <random>
#include <set>

#include "cuflinks/bag.hpp"
#include "cuflinks/bag_path.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "cuflinks/zip.hpp"

namespace cuflinks::bag {

namespace {

/// Directories under `root` (relative, `/`-separated) that contain nothing.
std::vector<std::string> empty_directories(const fs::path& root) {
  std::vector<std::string> out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    fs::path rel = it->path().lexically_relative(root);
    std::string top = rel.begin()->string();
    if (top == kTempDir || top == kLockFile) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (it->is_directory() && fs::is_empty(it->path())) out.push_back(rel.generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

fs::path serialize(const fs::path& bag_dir, const fs::path& archive) {
  Bag bag = read_bag(bag_dir);
  auto report = validate_bag(bag, ValidationLevel::fast);
  if (!report.ok_except_pending()) {
    const auto& f = report.findings.front();
    throw BagInvalidError("bag '" + bag_dir.string() + "' fails fast validation: " +
                          std::string(finding_kind_name(f.kind)) + " " + f.path);
  }
  const fs::path& root = *bag.location;
  const std::string prefix = bag.root_name + "/";

  fs::path tmp = archive;
  tmp += ".partial";
  try {
    zip::Writer writer(tmp);
    for (const auto& rel : list_files(root, {std::string(kTempDir), std::string(kLockFile)})) {
      writer.add_file(prefix + rel, root / rel);
    }
    for (const auto& dir : empty_directories(root)) writer.add_directory(prefix + dir);
    writer.finish();
  } catch (...) {
    fs::remove(tmp);
    throw;
  }
  fs::rename(tmp, archive);
  return archive;
}

fs::path extract(const fs::path& archive, const fs::path& dest_parent) {
  auto entries = zip::list_entries(archive);
  std::set<std::string> roots;
  for (const auto& e : entries) {
    std::string name = e.name;
    if (e.is_directory()) name.pop_back();
    auto slash = name.find('/');
    roots.insert(name.substr(0, slash));
    if (!is_valid_bag_path(name) || name.find_first_of("\r\n") != std::string::npos) {
      throw MalformedArchiveError(archive.string() + ": unsafe member name '" + e.name + "'");
    }
    if (slash == std::string::npos && !e.is_directory()) {
      throw MalformedArchiveError(archive.string() + ": member '" + e.name + "' is outside the top-level directory");
    }
  }
  if (roots.size() != 1) {
    throw MalformedArchiveError(archive.string() + ": expected a single top-level directory, found " +
                                std::to_string(roots.size()));
  }
  const std::string root_name = *roots.begin();
  fs::path target = dest_parent / root_name;
  if (!is_empty_or_absent(target)) {
    throw ConflictError("destination '" + target.string() + "' exists and is not empty");
  }

  std::random_device rd;
  fs::create_directories(dest_parent);
  fs::path staging = dest_parent / ("." + root_name + ".partial-" + std::to_string(rd()));
  try {
    fs::create_directories(staging);
    for (const auto& e : entries) {
      std::string rel = e.name.substr(root_name.size());
      if (rel.empty() || rel == "/") continue;
      rel.erase(0, 1);
      fs::path out_path = staging / rel;
      if (e.is_directory()) {
        fs::create_directories(out_path);
        continue;
      }
      fs::create_directories(out_path.parent_path());
      std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError(out_path, "cannot open for writing");
      zip::extract_entry(archive, e, out);
    }
    if (fs::exists(target)) fs::remove(target);
    fs::rename(staging, target);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  return target;
}

}  // namespace cuflinks::bag
