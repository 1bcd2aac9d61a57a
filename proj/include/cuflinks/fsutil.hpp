#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cuflinks {

namespace fs = std::filesystem;

std::string read_file(const fs::path& file);
void write_file(const fs::path& file, std::string_view bytes);
/// Writes to a sibling temporary, fsyncs, then renames over `file`.
void write_file_atomic(const fs::path& file, std::string_view bytes);

/// Regular files under `dir`, as sorted `/`-separated paths relative to `dir`.
/// Entries whose first component appears in `skip_top` are ignored.
std::vector<std::string> list_files(const fs::path& dir,
                                    const std::vector<std::string>& skip_top = {});

bool is_empty_or_absent(const fs::path& dir);

/// Exclusive advisory lock held for the lifetime of the object. The lock
/// file is created if needed; with `remove_on_release` it is unlinked again.
/// A second holder fails fast with LockedError. The kernel drops the lock
/// when the owning process dies, so a crash never leaves a stale lock.
class FileLock {
 public:
  FileLock(fs::path lock_file, std::string_view what, bool remove_on_release);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
  bool remove_;
};

}  // namespace cuflinks
