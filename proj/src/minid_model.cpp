#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cuflinks/error.hpp"
#include "cuflinks/minid.hpp"
#include "minid_json.hpp"

namespace cuflinks::minid {

using nlohmann::json;

namespace {

constexpr std::string_view kBase62 = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

bool is_base62(char c) { return kBase62.find(c) != std::string_view::npos; }

}  // namespace

bool is_valid_identifier(std::string_view text) noexcept {
  if (text.substr(0, kPrefix.size()) != kPrefix) return false;
  std::string_view suffix = text.substr(kPrefix.size());
  return suffix.size() >= kMinSuffix && suffix.size() <= kMaxSuffix && std::all_of(suffix.begin(), suffix.end(), is_base62);
}

Identifier parse_identifier(std::string_view text) {
  if (!is_valid_identifier(text)) {
    throw IdentifierSyntaxError("'" + std::string(text) + "' is not a minid (minid: plus 10-16 base62 characters)");
  }
  return Identifier{std::string(text.substr(kPrefix.size()))};
}

std::string random_suffix() {
  static thread_local std::random_device rd;
  std::uniform_int_distribution<std::size_t> pick(0, kBase62.size() - 1);
  std::string out(kMintedSuffix, '0');
  for (char& c : out) c = kBase62[pick(rd)];
  return out;
}

std::string Status::str() const {
  switch (kind) {
    case Kind::active: return "active";
    case Kind::tombstoned: return "tombstoned";
    case Kind::superseded: return "superseded:" + superseded_by;
  }
  return "?";
}

Status Status::parse(std::string_view text) {
  if (text == "active") return active();
  if (text == "tombstoned") return tombstoned();
  constexpr std::string_view sup = "superseded:";
  if (text.substr(0, sup.size()) == sup && text.size() > sup.size()) {
    return superseded(std::string(text.substr(sup.size())));
  }
  throw ArgumentError("unknown minid status '" + std::string(text) + "'");
}

namespace detail {

json record_json(const Minid& m) {
  return json{{"identifier", m.identifier},
              {"author", m.author},
              {"created", format_timestamp(m.created)},
              {"title", m.title},
              {"locations", m.locations},
              {"checksum", {{"algorithm", algorithm_name(m.checksum.algorithm)}, {"digest", m.checksum.digest}}},
              {"status", m.status.str()}};
}

Minid record_from(const json& j) {
  Minid m;
  m.identifier = j.at("identifier").get<std::string>();
  parse_identifier(m.identifier);
  m.author = j.at("author").get<std::string>();
  m.created = parse_timestamp(j.at("created").get<std::string>());
  m.title = j.at("title").get<std::string>();
  m.locations = j.at("locations").get<std::vector<std::string>>();
  m.checksum = checksum_from(j.at("checksum"));
  m.status = Status::parse(j.at("status").get<std::string>());
  return m;
}

Checksum checksum_from(const json& j) {
  auto name = j.at("algorithm").get<std::string>();
  auto alg = parse_algorithm(name);
  if (!alg) throw ArgumentError("unknown checksum algorithm '" + name + "'");
  return Checksum{*alg, j.at("digest").get<std::string>()};
}

void check_mint_request(const MintRequest& r) {
  if (r.locations.empty()) throw ArgumentError("a minid needs at least one location");
  for (const auto& loc : r.locations) {
    if (fetch::url_scheme(loc).empty()) throw ArgumentError("location '" + loc + "' is not an absolute URI");
  }
  if (r.checksum.algorithm != ChecksumAlgorithm::sha256) throw ArgumentError("minid checksums must be sha256");
  if (!is_valid_hex_digest(r.checksum.digest, r.checksum.algorithm)) {
    throw ArgumentError("'" + r.checksum.digest + "' is not a lowercase sha256 hex digest");
  }
}

}  // namespace detail

std::string to_json(const Minid& m) { return detail::record_json(m).dump(); }

Minid minid_from_json(std::string_view text) {
  try {
    return detail::record_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError("minid record", 0, e.what());
  }
}

Verification verify(const Minid& record, std::istream& content) {
  Verification v;
  v.tombstoned = record.status.kind == Status::Kind::tombstoned;
  v.expected = record.checksum.digest;
  v.actual = compute_digest(content, record.checksum.algorithm);
  v.match = v.actual == v.expected;
  return v;
}

Verification verify_file(const Minid& record, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError(file, "cannot open");
  return verify(record, in);
}

namespace {

void require_active(const Minid& m) {
  if (m.status.kind != Status::Kind::active) {
    throw ConflictError(m.identifier + " is " + m.status.str());
  }
}

}  // namespace

Resolved resolve_to_file(MinidService& service, std::string_view identifier, const fetch::SchemeRegistry& schemes,
                         const fs::path& dest, const fetch::RetryPolicy& retry) {
  Minid m = service.resolve(identifier);
  require_active(m);
  fs::path partial = dest;
  partial += ".partial";
  std::string failures;
  for (const auto& loc : m.locations) {
    try {
      fetch::fetch_to_file(schemes, loc, partial, retry);
    } catch (const Error& e) {
      failures += "\n  " + loc + ": " + e.what();
      continue;
    }
    Verification v = verify_file(m, partial);
    if (!v.match) {
      fs::remove(partial);
      throw IntegrityError(m.identifier + " from " + loc + ": expected sha256 " + v.expected + ", got " + v.actual);
    }
    fs::rename(partial, dest);
    return {m, loc};
  }
  fs::remove(partial);
  throw TransferError("no location of " + m.identifier + " could be fetched:" + failures, false);
}

namespace {

class MinidScheme : public fetch::TransferScheme {
 public:
  MinidScheme(std::shared_ptr<MinidService> service, fetch::SchemeRegistry schemes)
      : service_(std::move(service)), schemes_(std::move(schemes)) {}

  std::uint64_t fetch(const std::string& url, std::ostream& sink) override {
    Minid m;
    try {
      m = service_->resolve(url);
    } catch (const NotFoundError& e) {
      throw TransferError(e.what(), false);
    } catch (const IdentifierSyntaxError& e) {
      throw TransferError(e.what(), false);
    }
    if (m.status.kind != Status::Kind::active) throw TransferError(m.identifier + " is " + m.status.str(), false);
    std::string failures;
    bool transient = false;
    for (const auto& loc : m.locations) {
      fetch::TransferScheme* scheme = schemes_.find(fetch::url_scheme(loc));
      if (!scheme) {
        failures += "\n  " + loc + ": no transfer scheme";
        continue;
      }
      std::ostringstream buffer;
      try {
        scheme->fetch(loc, buffer);
      } catch (const TransferError& e) {
        transient |= e.transient();
        failures += "\n  " + loc + ": " + e.what();
        continue;
      }
      std::string bytes = std::move(buffer).str();
      if (compute_digest(bytes, m.checksum.algorithm) != m.checksum.digest) {
        failures += "\n  " + loc + ": content does not match the minid checksum";
        continue;
      }
      sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      return bytes.size();
    }
    throw TransferError("no location of " + m.identifier + " could be fetched:" + failures, transient);
  }

 private:
  std::shared_ptr<MinidService> service_;
  fetch::SchemeRegistry schemes_;
};

}  // namespace

std::shared_ptr<fetch::TransferScheme> make_minid_scheme(std::shared_ptr<MinidService> service,
                                                         fetch::SchemeRegistry schemes) {
  return std::make_shared<MinidScheme>(std::move(service), std::move(schemes));
}

}  // namespace cuflinks::minid
