#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <string_view>

namespace cuflinks {

using TimePoint = std::chrono::system_clock::time_point;

/// Every timestamp the toolkit writes comes from one of these.
using Clock = std::function<TimePoint()>;

Clock system_clock();
Clock fixed_clock(TimePoint at);

/// `2026-10-15T08:30:00Z`, second precision.
std::string format_timestamp(TimePoint t);
/// `2026-10-15`
std::string format_date(TimePoint t);

/// Inverse of format_timestamp. Throws ArgumentError on anything else.
TimePoint parse_timestamp(std::string_view text);

TimePoint truncate_to_seconds(TimePoint t);

}  // namespace cuflinks
