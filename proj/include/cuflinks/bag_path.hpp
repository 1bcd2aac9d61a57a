#pragma once

#include <string>
#include <string_view>

namespace cuflinks::bag {

/// Relative, `/`-separated, no empty / `.` / `..` components, no control
/// characters other than CR and LF (which survive via percent-encoding).
bool is_valid_bag_path(std::string_view path) noexcept;
bool is_payload_path(std::string_view path) noexcept;
bool is_metadata_path(std::string_view path) noexcept;

/// Throws BagStructureError unless the path is a valid payload path.
void require_payload_path(std::string_view path);

/// Escapes CR, LF and `%` for line-oriented tag files.
std::string encode_path(std::string_view path);
/// Inverse of encode_path; additionally decodes `%20` and `%09`, which
/// fetch.txt uses to keep its three columns whitespace-free.
std::string decode_path(std::string_view encoded);
/// encode_path plus space and tab, for fetch.txt.
std::string encode_fetch_path(std::string_view path);

}  // namespace cuflinks::bag
