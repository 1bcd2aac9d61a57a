#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cuflinks::fetch {

/// One remote payload element of a holey bag.
struct FetchEntry {
  std::string url;
  std::optional<std::uint64_t> length;  // nullopt is written as `-`
  std::string path;                      // in-bag, under data/

  bool operator==(const FetchEntry&) const = default;
};

/// URI scheme of `url` (text before the first `:`), or empty if it has none.
std::string_view url_scheme(std::string_view url) noexcept;

/// One entry per non-empty line: `URL LENGTH FILENAME`. `file` only labels errors.
std::vector<FetchEntry> parse_fetch(std::string_view text, std::string_view file = "fetch.txt");
std::string render_fetch(const std::vector<FetchEntry>& entries);

}  // namespace cuflinks::fetch
