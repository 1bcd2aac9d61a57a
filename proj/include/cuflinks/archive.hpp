#pragma once

#include <filesystem>

namespace cuflinks::bag {

/// Serializes a bag directory to ZIP with a single top-level directory named
/// after the bag. Requires the bag to pass fast validation (pending fetch
/// entries allowed). Empty directories are kept as directory members.
std::filesystem::path serialize(const std::filesystem::path& bag_dir, const std::filesystem::path& archive);

/// Extracts into `dest_parent` and returns the bag directory. The archive
/// must hold exactly one top-level directory and no unsafe member names; the
/// target directory must be absent or empty.
std::filesystem::path extract(const std::filesystem::path& archive, const std::filesystem::path& dest_parent);

}  // namespace cuflinks::bag
