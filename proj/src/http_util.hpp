#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include <httplib.h>

namespace cuflinks::detail {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string target;  // /path?query, never empty
};

/// Splits an http(s) URL. Throws TransferError (permanent) on anything else.
UrlParts split_url(std::string_view url);

/// Resolves a redirect `Location` against the URL that produced it.
std::string resolve_location(std::string_view base, std::string_view location);

std::unique_ptr<httplib::Client> make_client(const std::string& origin, std::chrono::seconds timeout);

bool is_transient_status(int status);

}  // namespace cuflinks::detail
