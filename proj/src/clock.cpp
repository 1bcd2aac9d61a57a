#include "cuflinks/clock.hpp"

#include <ctime>
#include <string>

#include "cuflinks/error.hpp"

namespace cuflinks {

Clock system_clock() {
  return [] { return std::chrono::system_clock::now(); };
}

Clock fixed_clock(TimePoint at) {
  return [at] { return at; };
}

namespace {

std::tm to_utc(TimePoint t) {
  std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm out{};
  gmtime_r(&secs, &out);
  return out;
}

std::string format(TimePoint t, const char* pattern) {
  std::tm tm = to_utc(t);
  char buf[64];
  std::size_t n = std::strftime(buf, sizeof buf, pattern, &tm);
  return std::string(buf, n);
}

}  // namespace

std::string format_timestamp(TimePoint t) { return format(t, "%Y-%m-%dT%H:%M:%SZ"); }

std::string format_date(TimePoint t) { return format(t, "%Y-%m-%d"); }

TimePoint parse_timestamp(std::string_view text) {
  std::tm tm{};
  std::string s(text);
  const char* end = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  if (end == nullptr || *end != '\0' || s.size() != 20) {
    throw ArgumentError("malformed timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

TimePoint truncate_to_seconds(TimePoint t) {
  return std::chrono::time_point_cast<std::chrono::seconds>(t);
}

}  // namespace cuflinks
