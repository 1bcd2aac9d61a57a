#include <ostream>

#include "cuflinks/error.hpp"
#include "cuflinks/fetch.hpp"
#include "http_util.hpp"

namespace cuflinks::fetch {

namespace {

class HttpScheme : public TransferScheme {
 public:
  explicit HttpScheme(HttpOptions options) : options_(std::move(options)) {}

  std::uint64_t fetch(const std::string& url, std::ostream& sink) override {
    std::string current = url;
    for (int hop = 0; hop <= options_.max_redirects; ++hop) {
      detail::UrlParts parts = detail::split_url(current);
      auto client = detail::make_client(parts.origin, options_.timeout);
      httplib::Headers headers{{"User-Agent", options_.user_agent}};

      int status = 0;
      std::string location;
      std::uint64_t total = 0;
      bool sink_failed = false;
      auto on_response = [&](const httplib::Response& res) {
        status = res.status;
        if (status >= 300 && status < 400) location = res.get_header_value("Location");
        return status == 200;
      };
      auto on_content = [&](const char* data, std::size_t len) {
        sink.write(data, static_cast<std::streamsize>(len));
        if (!sink) {
          sink_failed = true;
          return false;
        }
        total += len;
        return true;
      };
      auto res = client->Get(parts.target, headers, on_response, on_content);

      if (sink_failed) throw IoError("", "write failed while downloading '" + url + "'");
      if (status == 200) {
        if (!res) {
          throw TransferError("GET " + current + " interrupted: " + httplib::to_string(res.error()));
        }
        return total;
      }
      if (status == 0) {
        throw TransferError("GET " + current + " failed: " + httplib::to_string(res.error()));
      }
      if (status >= 300 && status < 400 && !location.empty()) {
        current = detail::resolve_location(current, location);
        continue;
      }
      throw TransferError("GET " + current + " returned HTTP " + std::to_string(status),
                          detail::is_transient_status(status));
    }
    throw TransferError("GET " + url + " exceeded " + std::to_string(options_.max_redirects) + " redirects",
                        false);
  }

 private:
  HttpOptions options_;
};

}  // namespace

std::shared_ptr<TransferScheme> make_http_scheme(HttpOptions options) {
  return std::make_shared<HttpScheme>(std::move(options));
}

}  // namespace cuflinks::fetch
