#include "cuflinks/fsutil.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "cuflinks/error.hpp"

namespace cuflinks {

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(file, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(file, "read failure");
  return std::move(ss).str();
}

void write_file(const fs::path& file, std::string_view bytes) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(file, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(file, "write failure");
}

void write_file_atomic(const fs::path& file, std::string_view bytes) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  fs::path tmp = file;
  tmp += ".tmp-" + std::to_string(rng() % 1000000000ULL);
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError(tmp, std::strerror(errno));
  std::size_t done = 0;
  while (done < bytes.size()) {
    ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw IoError(tmp, std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError(file, ec.message());
  }
}

std::vector<std::string> list_files(const fs::path& dir, const std::vector<std::string>& skip_top) {
  std::vector<std::string> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  fs::recursive_directory_iterator it(dir, ec), end;
  if (ec) throw IoError(dir, ec.message());
  for (; it != end; it.increment(ec)) {
    if (ec) throw IoError(dir, ec.message());
    fs::path rel = it->path().lexically_relative(dir);
    std::string top = rel.begin()->string();
    if (std::find(skip_top.begin(), skip_top.end(), top) != skip_top.end()) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file()) out.push_back(rel.generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool is_empty_or_absent(const fs::path& dir) {
  std::error_code ec;
  if (!fs::exists(dir, ec)) return true;
  return fs::is_directory(dir, ec) && fs::is_empty(dir, ec);
}

FileLock::FileLock(fs::path lock_file, std::string_view what, bool remove_on_release)
    : path_(std::move(lock_file)), remove_(remove_on_release) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError(path_, std::strerror(errno));
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw LockedError(std::string(what) + " is locked by another process (" + path_.string() + ")");
  }
}

FileLock::~FileLock() {
  if (fd_ < 0) return;
  if (remove_) ::unlink(path_.c_str());
  ::flock(fd_, LOCK_UN);
  ::close(fd_);
}

}  // namespace cuflinks
