#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cuflinks::zip {

namespace fs = std::filesystem;

/// Central-directory view of one archive member.
struct Entry {
  std::string name;
  std::uint16_t method = 0;  // 0 stored, 8 deflated
  std::uint32_t crc = 0;
  std::uint64_t compressed_size = 0;
  std::uint64_t size = 0;
  std::uint64_t local_header_offset = 0;

  bool is_directory() const { return !name.empty() && name.back() == '/'; }
};

/// Streams members into a PKZIP archive. Timestamps are pinned to
/// 1980-01-01 so identical inputs give identical archives. No ZIP64:
/// members and the archive must stay below 4 GiB.
class Writer {
 public:
  explicit Writer(const fs::path& archive);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void add_file(const std::string& name, const fs::path& source);
  void add_bytes(const std::string& name, std::string_view bytes);
  void add_directory(std::string name);
  /// Writes the central directory. Must be called exactly once.
  void finish();

 private:
  void add_stream(const std::string& name, std::istream& in);

  fs::path path_;
  std::ofstream out_;
  std::vector<Entry> entries_;
  bool finished_ = false;
};

/// Throws MalformedArchiveError if the file is not a readable ZIP.
std::vector<Entry> list_entries(const fs::path& archive);

/// Inflates one member into `out`, checking its CRC-32 and size.
void extract_entry(const fs::path& archive, const Entry& entry, std::ostream& out);

}  // namespace cuflinks::zip
