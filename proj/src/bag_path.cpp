#include "cuflinks/bag_path.hpp"

#include "cuflinks/error.hpp"

namespace cuflinks::bag {

bool is_valid_bag_path(std::string_view path) noexcept {
  if (path.empty() || path.front() == '/' || path.back() == '/') return false;
  for (char c : path) {
    auto u = static_cast<unsigned char>(c);
    if ((u < 0x20 && c != '\r' && c != '\n') || u == 0x7f || c == '\\') return false;
  }
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    std::string_view part = path.substr(start, slash == std::string_view::npos ? slash : slash - start);
    if (part.empty() || part == "." || part == "..") return false;
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return true;
}

bool is_payload_path(std::string_view path) noexcept {
  return path.size() > 5 && path.substr(0, 5) == "data/" && is_valid_bag_path(path);
}

bool is_metadata_path(std::string_view path) noexcept {
  return path.size() > 9 && path.substr(0, 9) == "metadata/" && is_valid_bag_path(path);
}

void require_payload_path(std::string_view path) {
  if (!is_payload_path(path)) {
    throw BagStructureError("'" + std::string(path) + "' is not a valid payload path (must be relative, under data/)");
  }
}

namespace {

std::string encode(std::string_view path, bool whitespace) {
  std::string out;
  out.reserve(path.size());
  for (char c : path) {
    switch (c) {
      case '%':
        out += "%25";
        break;
      case '\r':
        out += "%0D";
        break;
      case '\n':
        out += "%0A";
        break;
      case ' ':
        out += whitespace ? "%20" : " ";
        break;
      case '\t':
        out += whitespace ? "%09" : "\t";
        break;
      default:
        out += c;
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string encode_path(std::string_view path) { return encode(path, false); }

std::string encode_fetch_path(std::string_view path) { return encode(path, true); }

std::string decode_path(std::string_view encoded) {
  std::string out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] == '%' && i + 2 < encoded.size()) {
      int hi = hex_value(encoded[i + 1]);
      int lo = hex_value(encoded[i + 2]);
      if (hi >= 0 && lo >= 0) {
        char c = static_cast<char>(hi * 16 + lo);
        if (c == '%' || c == '\r' || c == '\n' || c == ' ' || c == '\t') {
          out += c;
          i += 2;
          continue;
        }
      }
    }
    out += encoded[i];
  }
  return out;
}

}  // namespace cuflinks::bag
