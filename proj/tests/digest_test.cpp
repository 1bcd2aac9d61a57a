#include <doctest.h>

#include <sstream>

#include "cuflinks/digest.hpp"
#include "cuflinks/error.hpp"
#include "support/test_util.hpp"

using namespace cuflinks;

// Expected values were produced by Python's hashlib before this code existed.
TEST_CASE("known-answer digests") {
  CHECK(compute_digest("", ChecksumAlgorithm::md5) == "d41d8cd98f00b204e9800998ecf8427e");
  CHECK(compute_digest("", ChecksumAlgorithm::sha256) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(compute_digest("", ChecksumAlgorithm::sha512) ==
        "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce"
        "47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e");
  CHECK(compute_digest("abc", ChecksumAlgorithm::md5) == "900150983cd24fb0d6963f7d28e17f72");
  CHECK(compute_digest("abc", ChecksumAlgorithm::sha256) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(compute_digest("hello world\n", ChecksumAlgorithm::sha256) ==
        "a948904f2f0f479b8f8197694b30184b0d2ed1c1cd2a1ec0fb85d299a192a447");
}

TEST_CASE("stream and file digests agree with the in-memory path") {
  std::string big(300'000, 'x');
  for (std::size_t i = 0; i < big.size(); i += 7) big[i] = static_cast<char>(i % 251);
  std::istringstream in(big);
  auto all = compute_digests(in, {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256, ChecksumAlgorithm::sha512});
  for (auto& [alg, hex] : all) {
    CHECK(hex == compute_digest(big, alg));
    CHECK(is_valid_hex_digest(hex, alg));
  }

  testing::TempDir tmp;
  testing::put(tmp / "f", big);
  CHECK(digest_file(tmp / "f", {ChecksumAlgorithm::sha256}).at(ChecksumAlgorithm::sha256) ==
        all.at(ChecksumAlgorithm::sha256));
  CHECK_THROWS_AS(digest_file(tmp / "absent", {ChecksumAlgorithm::md5}), IoError);
}

TEST_CASE("digest is deterministic") {
  CHECK(compute_digest("payload", ChecksumAlgorithm::sha512) == compute_digest("payload", ChecksumAlgorithm::sha512));
}

TEST_CASE("algorithm names round-trip") {
  for (auto alg : {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256, ChecksumAlgorithm::sha512}) {
    CHECK(parse_algorithm(algorithm_name(alg)) == alg);
  }
  CHECK_FALSE(parse_algorithm("sha1"));
  CHECK_FALSE(parse_algorithm("MD5"));
  CHECK(parse_algorithm_list("md5, sha256") == AlgorithmSet{ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256});
  CHECK_THROWS_AS(parse_algorithm_list("md5,crc32"), ArgumentError);
}

TEST_CASE("hex digest validation") {
  CHECK(is_valid_hex_digest("d41d8cd98f00b204e9800998ecf8427e", ChecksumAlgorithm::md5));
  CHECK_FALSE(is_valid_hex_digest("D41D8CD98F00B204E9800998ECF8427E", ChecksumAlgorithm::md5));
  CHECK_FALSE(is_valid_hex_digest("d41d8cd98f00b204e9800998ecf8427e", ChecksumAlgorithm::sha256));
  CHECK_FALSE(is_valid_hex_digest("g41d8cd98f00b204e9800998ecf8427e", ChecksumAlgorithm::md5));
}
