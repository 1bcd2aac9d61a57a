// Readers and writers for the bag's tag files.

#include <algorithm>
#include <cctype>

#include "cuflinks/bag.hpp"
#include "cuflinks/bag_path.hpp"
#include "cuflinks/error.hpp"

namespace cuflinks::bag {

namespace {

/// Splits on LF, dropping a trailing CR. A final empty line is not reported.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(++line_no, line);
  }
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string manifest_filename(ChecksumAlgorithm alg) {
  return "manifest-" + std::string(algorithm_name(alg)) + ".txt";
}

std::string tagmanifest_filename(ChecksumAlgorithm alg) {
  return "tagmanifest-" + std::string(algorithm_name(alg)) + ".txt";
}

std::string render_bagit_txt(const BagDeclaration& decl) {
  return "BagIt-Version: " + decl.version + "\nTag-File-Character-Encoding: " + decl.encoding + "\n";
}

BagDeclaration parse_bagit_txt(std::string_view text) {
  const std::string file(kBagitTxt);
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") {
    throw ParseError(file, 1, "byte-order mark is not permitted");
  }
  BagDeclaration decl;
  bool have_version = false, have_encoding = false;
  for_each_line(text, [&](std::size_t n, std::string_view line) {
    if (line.empty()) return;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError(file, n, "expected 'Key: value'");
    std::string_view key = line.substr(0, colon);
    std::string_view value = trim(line.substr(colon + 1));
    if (key == "BagIt-Version" && n == 1) {
      auto dot = value.find('.');
      bool ok = dot != std::string_view::npos && dot > 0 && dot + 1 < value.size();
      for (std::size_t i = 0; ok && i < value.size(); ++i) {
        ok = i == dot || std::isdigit(static_cast<unsigned char>(value[i]));
      }
      if (!ok) throw ParseError(file, n, "BagIt-Version '" + std::string(value) + "' is not <major>.<minor>");
      decl.version = std::string(value);
      have_version = true;
    } else if (key == "Tag-File-Character-Encoding" && n == 2) {
      if (value != "UTF-8") throw ParseError(file, n, "unsupported encoding '" + std::string(value) + "'");
      decl.encoding = std::string(value);
      have_encoding = true;
    } else {
      throw ParseError(file, n, "unexpected line '" + std::string(line) + "'");
    }
  });
  if (!have_version) throw ParseError(file, 1, "missing BagIt-Version");
  if (!have_encoding) throw ParseError(file, 2, "missing Tag-File-Character-Encoding");
  return decl;
}

std::string render_bag_info(const BagInfo& info) {
  std::string out;
  for (const auto& [key, value] : info) {
    out += key;
    out += ": ";
    // Embedded line breaks become continuation lines.
    for (char c : value) {
      out += c;
      if (c == '\n') out += ' ';
    }
    out += '\n';
  }
  return out;
}

BagInfo parse_bag_info(std::string_view text) {
  const std::string file(kBagInfoTxt);
  BagInfo info;
  for_each_line(text, [&](std::size_t n, std::string_view line) {
    if (line.empty()) return;
    if (line.front() == ' ' || line.front() == '\t') {
      if (info.empty()) throw ParseError(file, n, "continuation line before any key");
      info.back().second += '\n';
      info.back().second += line.substr(1);
      return;
    }
    auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) throw ParseError(file, n, "expected 'Key: value'");
    std::string_view key = line.substr(0, colon);
    if (key.find_first_of(" \t") != std::string_view::npos) {
      throw ParseError(file, n, "label '" + std::string(key) + "' contains whitespace");
    }
    std::string_view value = line.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    info.emplace_back(std::string(key), std::string(value));
  });
  return info;
}

std::string render_manifest(const Manifest& m) {
  std::string out;
  for (const auto& [path, digest] : m.entries) {
    out += digest;
    out += "  ";
    out += encode_path(path);
    out += '\n';
  }
  return out;
}

Manifest parse_manifest(std::string_view text, ChecksumAlgorithm alg, std::string_view file, bool payload) {
  const std::string label(file);
  Manifest m;
  m.algorithm = alg;
  for_each_line(text, [&](std::size_t n, std::string_view line) {
    if (is_blank(line)) return;
    auto sep = line.find_first_of(" \t");
    if (sep == std::string_view::npos) throw ParseError(label, n, "expected '<digest> <path>', found 1 token");
    std::string digest(line.substr(0, sep));
    std::transform(digest.begin(), digest.end(), digest.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!is_valid_hex_digest(digest, alg)) {
      throw ParseError(label, n, "'" + std::string(line.substr(0, sep)) + "' is not a " +
                                     std::string(algorithm_name(alg)) + " digest");
    }
    std::size_t start = line.find_first_not_of(" \t", sep);
    if (start == std::string_view::npos) throw ParseError(label, n, "expected '<digest> <path>', found 1 token");
    std::string path = decode_path(line.substr(start));
    if (!is_valid_bag_path(path)) throw ParseError(label, n, "invalid path '" + path + "'");
    if (payload && !is_payload_path(path)) throw ParseError(label, n, "path '" + path + "' is not under data/");
    if (!payload && path.rfind("data/", 0) == 0) {
      throw ParseError(label, n, "tag manifest lists payload path '" + path + "'");
    }
    if (!m.entries.emplace(std::move(path), std::move(digest)).second) {
      throw ParseError(label, n, "duplicate path");
    }
  });
  return m;
}

}  // namespace cuflinks::bag
