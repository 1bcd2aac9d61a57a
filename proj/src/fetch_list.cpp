#include "cuflinks/fetch_list.hpp"

#include <charconv>
#include <set>

#include "cuflinks/bag_path.hpp"
#include "cuflinks/error.hpp"

namespace cuflinks::fetch {

std::string_view url_scheme(std::string_view url) noexcept {
  auto colon = url.find(':');
  if (colon == std::string_view::npos || colon == 0) return {};
  auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  if (!alpha(url[0])) return {};
  for (std::size_t i = 1; i < colon; ++i) {
    char c = url[i];
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '+' && c != '-' && c != '.') return {};
  }
  return url.substr(0, colon);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back(line.substr(start, i - start));
  }
  return out;
}

}  // namespace

std::vector<FetchEntry> parse_fetch(std::string_view text, std::string_view file) {
  std::vector<FetchEntry> out;
  std::set<std::string> seen;
  std::string label(file);
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 3) {
      throw ParseError(label, line_no, "expected 3 fields (URL LENGTH FILENAME), found " + std::to_string(fields.size()));
    }
    FetchEntry e;
    e.url = std::string(fields[0]);
    if (url_scheme(e.url).empty() || e.url.size() == url_scheme(e.url).size() + 1) {
      throw ParseError(label, line_no, "URL '" + e.url + "' is not absolute");
    }
    if (fields[1] != "-") {
      std::uint64_t n = 0;
      auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), n);
      if (ec != std::errc{} || p != fields[1].data() + fields[1].size()) {
        throw ParseError(label, line_no, "length '" + std::string(fields[1]) + "' is neither a byte count nor '-'");
      }
      e.length = n;
    }
    e.path = bag::decode_path(fields[2]);
    if (!bag::is_payload_path(e.path)) {
      throw ParseError(label, line_no, "path '" + e.path + "' is not under data/");
    }
    if (!seen.insert(e.path).second) {
      throw ParseError(label, line_no, "duplicate entry for '" + e.path + "'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string render_fetch(const std::vector<FetchEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.url;
    out += ' ';
    out += e.length ? std::to_string(*e.length) : std::string("-");
    out += ' ';
    out += bag::encode_fetch_path(e.path);
    out += '\n';
  }
  return out;
}

}  // namespace cuflinks::fetch
