#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>

namespace cuflinks {

enum class ChecksumAlgorithm { md5, sha256, sha512 };

/// Lowercase name used in manifest filenames: `md5`, `sha256`, `sha512`.
std::string_view algorithm_name(ChecksumAlgorithm alg) noexcept;
std::optional<ChecksumAlgorithm> parse_algorithm(std::string_view name) noexcept;
/// Hex characters in a digest of this algorithm (32, 64, 128).
std::size_t digest_hex_length(ChecksumAlgorithm alg) noexcept;
bool is_valid_hex_digest(std::string_view hex, ChecksumAlgorithm alg) noexcept;

using AlgorithmSet = std::set<ChecksumAlgorithm>;
using DigestMap = std::map<ChecksumAlgorithm, std::string>;

/// Parses a comma-separated list such as `md5,sha256`.
AlgorithmSet parse_algorithm_list(std::string_view csv);

/// Incremental hasher for several algorithms at once.
class Hasher {
 public:
  explicit Hasher(const AlgorithmSet& algorithms);
  ~Hasher();
  Hasher(Hasher&&) noexcept;
  Hasher& operator=(Hasher&&) noexcept;
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  void update(std::span<const std::byte> bytes);
  void update(std::string_view bytes);
  /// Lowercase hex per algorithm. The hasher cannot be reused afterwards.
  DigestMap finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

std::string compute_digest(std::string_view bytes, ChecksumAlgorithm alg);
/// Reads the stream to its end. Throws IoError on a read failure.
std::string compute_digest(std::istream& in, ChecksumAlgorithm alg);
DigestMap compute_digests(std::istream& in, const AlgorithmSet& algorithms);
DigestMap digest_file(const std::filesystem::path& file, const AlgorithmSet& algorithms);

}  // namespace cuflinks
