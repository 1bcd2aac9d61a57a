#include "cuflinks/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <istream>
#include <vector>

#include "cuflinks/error.hpp"

namespace cuflinks {

std::string_view algorithm_name(ChecksumAlgorithm alg) noexcept {
  switch (alg) {
    case ChecksumAlgorithm::md5:
      return "md5";
    case ChecksumAlgorithm::sha256:
      return "sha256";
    case ChecksumAlgorithm::sha512:
      return "sha512";
  }
  return "";
}

std::optional<ChecksumAlgorithm> parse_algorithm(std::string_view name) noexcept {
  for (auto alg : {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256, ChecksumAlgorithm::sha512}) {
    if (algorithm_name(alg) == name) return alg;
  }
  return std::nullopt;
}

std::size_t digest_hex_length(ChecksumAlgorithm alg) noexcept {
  switch (alg) {
    case ChecksumAlgorithm::md5:
      return 32;
    case ChecksumAlgorithm::sha256:
      return 64;
    case ChecksumAlgorithm::sha512:
      return 128;
  }
  return 0;
}

bool is_valid_hex_digest(std::string_view hex, ChecksumAlgorithm alg) noexcept {
  if (hex.size() != digest_hex_length(alg)) return false;
  for (char c : hex) {
    bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    if (!ok) return false;
  }
  return true;
}

AlgorithmSet parse_algorithm_list(std::string_view csv) {
  AlgorithmSet out;
  while (!csv.empty()) {
    auto comma = csv.find(',');
    std::string_view item = csv.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      auto alg = parse_algorithm(item);
      if (!alg) throw ArgumentError("unknown checksum algorithm '" + std::string(item) + "'");
      out.insert(*alg);
    }
    if (comma == std::string_view::npos) break;
    csv.remove_prefix(comma + 1);
  }
  return out;
}

namespace {

const EVP_MD* evp_for(ChecksumAlgorithm alg) {
  switch (alg) {
    case ChecksumAlgorithm::md5:
      return EVP_md5();
    case ChecksumAlgorithm::sha256:
      return EVP_sha256();
    case ChecksumAlgorithm::sha512:
      return EVP_sha512();
  }
  return nullptr;
}

struct CtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using CtxPtr = std::unique_ptr<EVP_MD_CTX, CtxDeleter>;

std::string to_hex(const unsigned char* data, unsigned int len) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[data[i] >> 4];
    out[2 * i + 1] = kHex[data[i] & 0x0f];
  }
  return out;
}

}  // namespace

struct Hasher::State {
  std::vector<std::pair<ChecksumAlgorithm, CtxPtr>> contexts;
};

Hasher::Hasher(const AlgorithmSet& algorithms) : state_(std::make_unique<State>()) {
  for (auto alg : algorithms) {
    CtxPtr ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), evp_for(alg), nullptr) != 1) {
      throw Error("cannot initialise " + std::string(algorithm_name(alg)) + " digest");
    }
    state_->contexts.emplace_back(alg, std::move(ctx));
  }
}

Hasher::~Hasher() = default;
Hasher::Hasher(Hasher&&) noexcept = default;
Hasher& Hasher::operator=(Hasher&&) noexcept = default;

void Hasher::update(std::span<const std::byte> bytes) {
  for (auto& [alg, ctx] : state_->contexts) {
    EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  }
}

void Hasher::update(std::string_view bytes) {
  update(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

DigestMap Hasher::finish() {
  DigestMap out;
  for (auto& [alg, ctx] : state_->contexts) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    out.emplace(alg, to_hex(md, len));
  }
  state_->contexts.clear();
  return out;
}

std::string compute_digest(std::string_view bytes, ChecksumAlgorithm alg) {
  Hasher h({alg});
  h.update(bytes);
  return h.finish().at(alg);
}

DigestMap compute_digests(std::istream& in, const AlgorithmSet& algorithms) {
  Hasher h(algorithms);
  std::array<char, 64 * 1024> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    auto got = in.gcount();
    if (got > 0) h.update(std::string_view(buf.data(), static_cast<std::size_t>(got)));
  }
  if (in.bad()) throw IoError("<stream>", "read failure while hashing");
  return h.finish();
}

std::string compute_digest(std::istream& in, ChecksumAlgorithm alg) {
  return compute_digests(in, {alg}).at(alg);
}

DigestMap digest_file(const std::filesystem::path& file, const AlgorithmSet& algorithms) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(file, "cannot open for reading");
  try {
    return compute_digests(in, algorithms);
  } catch (const IoError&) {
    throw IoError(file, "read failure while hashing");
  }
}

}  // namespace cuflinks
