#include "cuflinks/zip.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <limits>
#include <sstream>

#include "cuflinks/error.hpp"

namespace cuflinks::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kUtf8Flag = 1u << 11;
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
constexpr std::uint64_t kMax32 = std::numeric_limits<std::uint32_t>::max();

void put16(std::string& b, std::uint16_t v) {
  b += static_cast<char>(v & 0xff);
  b += static_cast<char>(v >> 8);
}

void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint16_t get16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string local_header(const Entry& e) {
  std::string h;
  put32(h, kLocalSig);
  put16(h, kVersion);
  put16(h, kUtf8Flag);
  put16(h, e.method);
  put16(h, kDosTime);
  put16(h, kDosDate);
  put32(h, e.crc);
  put32(h, static_cast<std::uint32_t>(e.compressed_size));
  put32(h, static_cast<std::uint32_t>(e.size));
  put16(h, static_cast<std::uint16_t>(e.name.size()));
  put16(h, 0);
  h += e.name;
  return h;
}

std::string central_header(const Entry& e) {
  std::string h;
  put32(h, kCentralSig);
  put16(h, (3 << 8) | kVersion);  // made by: unix
  put16(h, kVersion);
  put16(h, kUtf8Flag);
  put16(h, e.method);
  put16(h, kDosTime);
  put16(h, kDosDate);
  put32(h, e.crc);
  put32(h, static_cast<std::uint32_t>(e.compressed_size));
  put32(h, static_cast<std::uint32_t>(e.size));
  put16(h, static_cast<std::uint16_t>(e.name.size()));
  put16(h, 0);  // extra
  put16(h, 0);  // comment
  put16(h, 0);  // disk
  put16(h, 0);  // internal attrs
  std::uint32_t mode = e.is_directory() ? (0040755u << 16) | 0x10 : (0100644u << 16);
  put32(h, mode);
  put32(h, static_cast<std::uint32_t>(e.local_header_offset));
  h += e.name;
  return h;
}

struct Inflater {
  z_stream zs{};
  Inflater() {
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error("zlib inflateInit failed");
  }
  ~Inflater() { inflateEnd(&zs); }
};

struct Deflater {
  z_stream zs{};
  Deflater() {
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
      throw Error("zlib deflateInit failed");
    }
  }
  ~Deflater() { deflateEnd(&zs); }
};

}  // namespace

Writer::Writer(const fs::path& archive) : path_(archive), out_(archive, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError(archive, "cannot open for writing");
}

Writer::~Writer() = default;

void Writer::add_file(const std::string& name, const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw IoError(source, "cannot open for reading");
  add_stream(name, in);
}

void Writer::add_bytes(const std::string& name, std::string_view bytes) {
  std::string copy(bytes);
  std::istringstream in(copy);
  add_stream(name, in);
}

void Writer::add_directory(std::string name) {
  if (name.empty() || name.back() != '/') name += '/';
  Entry e;
  e.name = std::move(name);
  e.local_header_offset = static_cast<std::uint64_t>(out_.tellp());
  std::string h = local_header(e);
  out_.write(h.data(), static_cast<std::streamsize>(h.size()));
  entries_.push_back(std::move(e));
}

void Writer::add_stream(const std::string& name, std::istream& in) {
  if (name.empty() || name.size() > 0xffff) throw ArgumentError("invalid archive member name '" + name + "'");
  Entry e;
  e.name = name;
  e.method = 8;
  e.local_header_offset = static_cast<std::uint64_t>(out_.tellp());
  if (e.local_header_offset > kMax32) throw IoError(path_, "archive exceeds 4 GiB (ZIP64 unsupported)");
  std::string header = local_header(e);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));

  Deflater d;
  std::array<char, 64 * 1024> inbuf;
  std::array<unsigned char, 64 * 1024> outbuf;
  uLong crc = crc32(0L, Z_NULL, 0);
  int flush = Z_NO_FLUSH;
  do {
    in.read(inbuf.data(), inbuf.size());
    auto got = static_cast<uInt>(in.gcount());
    if (in.bad()) throw IoError(name, "read failure while archiving");
    crc = crc32(crc, reinterpret_cast<const Bytef*>(inbuf.data()), got);
    e.size += got;
    flush = in.eof() ? Z_FINISH : Z_NO_FLUSH;
    d.zs.next_in = reinterpret_cast<Bytef*>(inbuf.data());
    d.zs.avail_in = got;
    do {
      d.zs.next_out = outbuf.data();
      d.zs.avail_out = outbuf.size();
      deflate(&d.zs, flush);
      auto produced = outbuf.size() - d.zs.avail_out;
      out_.write(reinterpret_cast<const char*>(outbuf.data()), static_cast<std::streamsize>(produced));
      e.compressed_size += produced;
    } while (d.zs.avail_out == 0);
  } while (flush != Z_FINISH);
  if (e.size > kMax32 || e.compressed_size > kMax32) {
    throw IoError(name, "member exceeds 4 GiB (ZIP64 unsupported)");
  }
  e.crc = static_cast<std::uint32_t>(crc);

  auto end = out_.tellp();
  out_.seekp(static_cast<std::streamoff>(e.local_header_offset));
  header = local_header(e);
  out_.write(header.data(), static_cast<std::streamsize>(header.size()));
  out_.seekp(end);
  if (!out_) throw IoError(path_, "write failure");
  entries_.push_back(std::move(e));
}

void Writer::finish() {
  if (finished_) throw Error("zip writer already finished");
  finished_ = true;
  auto cd_start = static_cast<std::uint64_t>(out_.tellp());
  for (const auto& e : entries_) {
    std::string h = central_header(e);
    out_.write(h.data(), static_cast<std::streamsize>(h.size()));
  }
  auto cd_end = static_cast<std::uint64_t>(out_.tellp());
  if (entries_.size() > 0xffff || cd_end > kMax32) throw IoError(path_, "archive too large (ZIP64 unsupported)");
  std::string eocd;
  put32(eocd, kEndSig);
  put16(eocd, 0);
  put16(eocd, 0);
  put16(eocd, static_cast<std::uint16_t>(entries_.size()));
  put16(eocd, static_cast<std::uint16_t>(entries_.size()));
  put32(eocd, static_cast<std::uint32_t>(cd_end - cd_start));
  put32(eocd, static_cast<std::uint32_t>(cd_start));
  put16(eocd, 0);
  out_.write(eocd.data(), static_cast<std::streamsize>(eocd.size()));
  out_.flush();
  if (!out_) throw IoError(path_, "write failure");
  out_.close();
}

std::vector<Entry> list_entries(const fs::path& archive) {
  std::ifstream in(archive, std::ios::binary);
  if (!in) throw IoError(archive, "cannot open for reading");
  in.seekg(0, std::ios::end);
  auto file_size = static_cast<std::uint64_t>(in.tellg());
  const std::uint64_t tail_len = std::min<std::uint64_t>(file_size, 22 + 0xffff);
  std::string tail(tail_len, '\0');
  in.seekg(static_cast<std::streamoff>(file_size - tail_len));
  in.read(tail.data(), static_cast<std::streamsize>(tail_len));

  const auto* t = reinterpret_cast<const unsigned char*>(tail.data());
  std::int64_t eocd = -1;
  for (std::int64_t i = static_cast<std::int64_t>(tail_len) - 22; i >= 0; --i) {
    if (get32(t + i) == kEndSig) {
      eocd = i;
      break;
    }
  }
  if (eocd < 0) throw MalformedArchiveError(archive.string() + ": no end-of-central-directory record");
  std::uint16_t count = get16(t + eocd + 10);
  std::uint32_t cd_size = get32(t + eocd + 12);
  std::uint32_t cd_offset = get32(t + eocd + 16);
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > file_size) {
    throw MalformedArchiveError(archive.string() + ": central directory out of range");
  }

  std::string cd(cd_size, '\0');
  in.seekg(cd_offset);
  in.read(cd.data(), cd_size);
  const auto* p = reinterpret_cast<const unsigned char*>(cd.data());
  std::vector<Entry> out;
  std::size_t pos = 0;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (pos + 46 > cd.size() || get32(p + pos) != kCentralSig) {
      throw MalformedArchiveError(archive.string() + ": corrupt central directory");
    }
    Entry e;
    e.method = get16(p + pos + 10);
    e.crc = get32(p + pos + 16);
    e.compressed_size = get32(p + pos + 20);
    e.size = get32(p + pos + 24);
    std::uint16_t name_len = get16(p + pos + 28);
    std::uint16_t extra_len = get16(p + pos + 30);
    std::uint16_t comment_len = get16(p + pos + 32);
    e.local_header_offset = get32(p + pos + 42);
    if (pos + 46 + name_len > cd.size()) throw MalformedArchiveError(archive.string() + ": truncated entry name");
    e.name.assign(cd.data() + pos + 46, name_len);
    if (e.method != 0 && e.method != 8) {
      throw MalformedArchiveError(archive.string() + ": '" + e.name + "' uses unsupported compression method " +
                                  std::to_string(e.method));
    }
    pos += 46 + name_len + extra_len + comment_len;
    out.push_back(std::move(e));
  }
  return out;
}

void extract_entry(const fs::path& archive, const Entry& entry, std::ostream& out) {
  std::ifstream in(archive, std::ios::binary);
  if (!in) throw IoError(archive, "cannot open for reading");
  unsigned char lh[30];
  in.seekg(static_cast<std::streamoff>(entry.local_header_offset));
  in.read(reinterpret_cast<char*>(lh), sizeof lh);
  if (!in || get32(lh) != kLocalSig) {
    throw MalformedArchiveError(archive.string() + ": bad local header for '" + entry.name + "'");
  }
  in.seekg(get16(lh + 26) + get16(lh + 28), std::ios::cur);

  std::array<char, 64 * 1024> inbuf;
  std::array<char, 64 * 1024> outbuf;
  uLong crc = crc32(0L, Z_NULL, 0);
  std::uint64_t produced = 0;
  std::uint64_t remaining = entry.compressed_size;
  auto emit = [&](const char* data, std::size_t n) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n));
    produced += n;
    out.write(data, static_cast<std::streamsize>(n));
  };

  if (entry.method == 0) {
    while (remaining > 0) {
      auto want = static_cast<std::streamsize>(std::min<std::uint64_t>(remaining, inbuf.size()));
      in.read(inbuf.data(), want);
      if (in.gcount() != want) throw MalformedArchiveError(archive.string() + ": truncated '" + entry.name + "'");
      emit(inbuf.data(), static_cast<std::size_t>(want));
      remaining -= static_cast<std::uint64_t>(want);
    }
  } else {
    Inflater inf;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
      if (inf.zs.avail_in == 0) {
        if (remaining == 0) break;
        auto want = static_cast<std::streamsize>(std::min<std::uint64_t>(remaining, inbuf.size()));
        in.read(inbuf.data(), want);
        if (in.gcount() != want) throw MalformedArchiveError(archive.string() + ": truncated '" + entry.name + "'");
        remaining -= static_cast<std::uint64_t>(want);
        inf.zs.next_in = reinterpret_cast<Bytef*>(inbuf.data());
        inf.zs.avail_in = static_cast<uInt>(want);
      }
      inf.zs.next_out = reinterpret_cast<Bytef*>(outbuf.data());
      inf.zs.avail_out = outbuf.size();
      rc = inflate(&inf.zs, Z_NO_FLUSH);
      if (rc != Z_OK && rc != Z_STREAM_END) {
        throw MalformedArchiveError(archive.string() + ": corrupt deflate data in '" + entry.name + "'");
      }
      emit(outbuf.data(), outbuf.size() - inf.zs.avail_out);
    }
    if (rc != Z_STREAM_END) throw MalformedArchiveError(archive.string() + ": truncated '" + entry.name + "'");
  }
  if (produced != entry.size || static_cast<std::uint32_t>(crc) != entry.crc) {
    throw MalformedArchiveError(archive.string() + ": CRC or size mismatch in '" + entry.name + "'");
  }
  if (!out) throw IoError(entry.name, "write failure while extracting");
}

}  // namespace cuflinks::zip
