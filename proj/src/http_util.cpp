#include "http_util.hpp"

#include "cuflinks/error.hpp"

namespace cuflinks::detail {

UrlParts split_url(std::string_view url) {
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw TransferError("URL '" + std::string(url) + "' has no authority", false);
  std::string_view scheme = url.substr(0, sep);
  if (scheme != "http" && scheme != "https") {
    throw TransferError("URL '" + std::string(url) + "' is not http(s)", false);
  }
  auto path_start = url.find_first_of("/?#", sep + 3);
  UrlParts parts;
  parts.origin = std::string(url.substr(0, path_start));
  if (parts.origin.size() == sep + 3) throw TransferError("URL '" + std::string(url) + "' has no host", false);
  parts.target = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));
  if (auto hash = parts.target.find('#'); hash != std::string::npos) parts.target.erase(hash);
  if (parts.target.empty() || parts.target.front() != '/') parts.target.insert(0, "/");
  return parts;
}

std::string resolve_location(std::string_view base, std::string_view location) {
  if (location.find("://") != std::string_view::npos) return std::string(location);
  UrlParts parts = split_url(base);
  if (!location.empty() && location.front() == '/') {
    if (location.size() > 1 && location[1] == '/') {
      return std::string(base.substr(0, base.find("://") + 1)) + std::string(location);
    }
    return parts.origin + std::string(location);
  }
  std::string dir = parts.target.substr(0, parts.target.find('?'));
  dir.erase(dir.rfind('/') + 1);
  return parts.origin + dir + std::string(location);
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, std::chrono::seconds timeout) {
  auto client = std::make_unique<httplib::Client>(origin);
  if (!client->is_valid()) throw TransferError("cannot create HTTP client for '" + origin + "'", false);
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  client->set_follow_location(false);
  client->set_url_encode(false);
  client->set_keep_alive(false);
  return client;
}

bool is_transient_status(int status) { return status >= 500 || status == 408 || status == 429; }

}  // namespace cuflinks::detail
