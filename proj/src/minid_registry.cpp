#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <shared_mutex>

#include <zlib.h>

#include "cuflinks/error.hpp"
#include "cuflinks/fsutil.hpp"
#include "cuflinks/minid.hpp"
#include "minid_json.hpp"

namespace cuflinks::minid {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "CUFLINKS-MINID-LOG 1\n";
constexpr std::size_t kHeader = 8;  // u32 length, u32 crc32, little endian

std::uint32_t crc32_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

struct Registry::Impl {
  fs::path log;
  Mode mode;
  Clock clock;
  std::unique_ptr<FileLock> lock;
  int fd = -1;
  std::uint64_t end = 0;
  std::uint64_t seq = 0;
  OpenInfo info;
  std::map<std::string, Minid> index;
  mutable std::shared_mutex index_mu;
  std::mutex write_mu;

  void apply(const json& ev) {
    const std::string type = ev.at("type").get<std::string>();
    std::uint64_t s = ev.at("seq").get<std::uint64_t>();
    if (s != seq + 1) throw IntegrityError("minid log sequence jumps from " + std::to_string(seq) + " to " + std::to_string(s));
    if (type == "minted") {
      Minid m = detail::record_from(ev.at("record"));
      if (!index.emplace(m.identifier, m).second) throw IntegrityError("minid log mints " + m.identifier + " twice");
    } else {
      std::string id = ev.at("identifier").get<std::string>();
      auto it = index.find(id);
      if (it == index.end()) throw IntegrityError("minid log event for unknown " + id);
      Minid& m = it->second;
      if (type == "location-added") {
        m.locations.push_back(ev.at("location").get<std::string>());
      } else if (type == "location-removed") {
        auto loc = ev.at("location").get<std::string>();
        auto pos = std::find(m.locations.begin(), m.locations.end(), loc);
        if (pos == m.locations.end()) throw IntegrityError("minid log removes unknown location of " + id);
        m.locations.erase(pos);
      } else if (type == "tombstoned") {
        m.status = Status::tombstoned();
      } else if (type == "superseded") {
        m.status = Status::superseded(ev.at("by").get<std::string>());
      } else {
        throw IntegrityError("minid log has unknown event type '" + type + "'");
      }
    }
    seq = s;
  }

  void replay() {
    std::string bytes = fs::exists(log) ? read_file(log) : std::string();
    if (bytes.empty()) {
      if (mode == Mode::read_write) append_raw(std::string(kMagic), 0);
      end = kMagic.size();
      return;
    }
    if (bytes.size() < kMagic.size() || std::string_view(bytes).substr(0, kMagic.size()) != kMagic) {
      if (std::string_view(kMagic).substr(0, bytes.size()) != bytes) {
        throw IntegrityError("'" + log.string() + "' is not a minid log");
      }
      // Torn during creation.
      info.truncated_bytes = bytes.size();
      if (mode == Mode::read_write) {
        if (::ftruncate(fd, 0) != 0) throw IoError(log, "cannot truncate");
        append_raw(std::string(kMagic), 0);
      }
      end = kMagic.size();
      return;
    }
    std::size_t pos = kMagic.size();
    while (pos < bytes.size()) {
      std::string_view rest = std::string_view(bytes).substr(pos);
      bool torn = rest.size() < kHeader || rest.size() < kHeader + get_u32(rest, 0);
      if (!torn) {
        std::uint32_t len = get_u32(rest, 0);
        std::string_view payload = rest.substr(kHeader, len);
        if (crc32_of(payload) != get_u32(rest, 4)) {
          if (kHeader + len != rest.size()) {
            throw IntegrityError("minid log record at byte " + std::to_string(pos) + " fails its checksum");
          }
          torn = true;
        } else {
          json events;
          try {
            events = json::parse(payload);
            for (const auto& ev : events) apply(ev);
          } catch (const json::exception& e) {
            throw IntegrityError("minid log record at byte " + std::to_string(pos) + ": " + e.what());
          } catch (const ArgumentError& e) {
            throw IntegrityError("minid log record at byte " + std::to_string(pos) + ": " + e.what());
          } catch (const IdentifierSyntaxError& e) {
            throw IntegrityError("minid log record at byte " + std::to_string(pos) + ": " + e.what());
          }
          ++info.records;
          pos += kHeader + len;
          continue;
        }
      }
      info.truncated_bytes = rest.size();
      if (mode == Mode::read_write) {
        if (::ftruncate(fd, static_cast<off_t>(pos)) != 0 || ::fsync(fd) != 0) throw IoError(log, "cannot truncate");
      }
      break;
    }
    end = pos;
  }

  void append_raw(const std::string& buf, std::uint64_t at) {
    std::size_t done = 0;
    while (done < buf.size()) {
      ssize_t n = ::pwrite(fd, buf.data() + done, buf.size() - done, static_cast<off_t>(at + done));
      if (n <= 0) {
        int err = errno;
        if (::ftruncate(fd, static_cast<off_t>(at)) != 0) err = errno;
        throw IoError(log, std::string("append failed: ") + std::strerror(err));
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd) != 0) {
      int err = errno;
      if (::ftruncate(fd, static_cast<off_t>(at)) != 0) err = errno;
      throw IoError(log, std::string("fsync failed: ") + std::strerror(err));
    }
  }

  /// Assigns sequence numbers, makes the record durable, then updates the index.
  void commit(json events) {
    std::uint64_t s = seq;
    for (auto& ev : events) ev["seq"] = ++s;
    std::string payload = events.dump();
    std::string buf;
    put_u32(buf, static_cast<std::uint32_t>(payload.size()));
    put_u32(buf, crc32_of(payload));
    buf += payload;
    append_raw(buf, end);
    end += buf.size();
    std::unique_lock guard(index_mu);
    for (const auto& ev : events) apply(ev);
    ++info.records;
  }

  void require_writable() const {
    if (mode != Mode::read_write) throw ConfigError("minid registry '" + log.string() + "' is open read-only");
  }

  Minid current(std::string_view identifier) const {
    Identifier id = parse_identifier(identifier);
    std::shared_lock guard(index_mu);
    auto it = index.find(id.str());
    if (it == index.end()) throw NotFoundError(id.str() + " is not registered");
    return it->second;
  }

  json event(std::string type, const std::string& id, const std::string& actor) {
    return json{{"type", std::move(type)}, {"identifier", id}, {"actor", actor}, {"at", format_timestamp(clock())}};
  }
};

Registry::Registry(fs::path log, Mode mode, Clock clock) : impl_(std::make_unique<Impl>()) {
  impl_->log = std::move(log);
  impl_->mode = mode;
  impl_->clock = std::move(clock);
  if (mode == Mode::read_write) {
    if (impl_->log.has_parent_path()) fs::create_directories(impl_->log.parent_path());
    fs::path lock_file = impl_->log;
    lock_file += ".lock";
    impl_->lock = std::make_unique<FileLock>(lock_file, "minid registry '" + impl_->log.string() + "'", false);
    impl_->fd = ::open(impl_->log.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (impl_->fd < 0) throw IoError(impl_->log, std::string("cannot open: ") + std::strerror(errno));
  }
  impl_->replay();
}

Registry::~Registry() {
  if (impl_ && impl_->fd >= 0) ::close(impl_->fd);
}

Minid Registry::mint(const MintRequest& request) {
  detail::check_mint_request(request);
  impl_->require_writable();
  std::lock_guard writer(impl_->write_mu);
  Minid m;
  do {
    m.identifier = Identifier{random_suffix()}.str();
  } while (impl_->index.count(m.identifier));
  m.author = request.author;
  m.created = truncate_to_seconds(impl_->clock());
  m.title = request.title;
  m.locations = request.locations;
  m.checksum = request.checksum;
  impl_->commit(json::array({json{{"type", "minted"}, {"record", detail::record_json(m)}}}));
  return m;
}

Minid Registry::resolve(std::string_view identifier) { return impl_->current(identifier); }

Minid Registry::update_locations(std::string_view identifier, const std::vector<std::string>& add,
                                 const std::vector<std::string>& remove, const std::string& actor) {
  impl_->require_writable();
  std::lock_guard writer(impl_->write_mu);
  Minid m = impl_->current(identifier);
  if (m.status.kind != Status::Kind::active) throw ConflictError(m.identifier + " is " + m.status.str());
  std::vector<std::string> locs = m.locations;
  json events = json::array();
  for (const auto& loc : remove) {
    auto pos = std::find(locs.begin(), locs.end(), loc);
    if (pos == locs.end()) throw ArgumentError(m.identifier + " has no location '" + loc + "'");
    locs.erase(pos);
    auto ev = impl_->event("location-removed", m.identifier, actor);
    ev["location"] = loc;
    events.push_back(std::move(ev));
  }
  for (const auto& loc : add) {
    if (fetch::url_scheme(loc).empty()) throw ArgumentError("location '" + loc + "' is not an absolute URI");
    if (std::find(locs.begin(), locs.end(), loc) != locs.end()) continue;
    locs.push_back(loc);
    auto ev = impl_->event("location-added", m.identifier, actor);
    ev["location"] = loc;
    events.push_back(std::move(ev));
  }
  if (locs.empty()) throw ArgumentError("update would leave " + m.identifier + " without locations");
  if (!events.empty()) impl_->commit(std::move(events));
  return impl_->current(m.identifier);
}

Minid Registry::tombstone(std::string_view identifier, const std::string& actor) {
  impl_->require_writable();
  std::lock_guard writer(impl_->write_mu);
  Minid m = impl_->current(identifier);
  if (m.status.kind == Status::Kind::tombstoned) throw ConflictError(m.identifier + " is already tombstoned");
  impl_->commit(json::array({impl_->event("tombstoned", m.identifier, actor)}));
  return impl_->current(m.identifier);
}

Minid Registry::supersede(std::string_view identifier, const std::string& by, const std::string& actor) {
  impl_->require_writable();
  std::lock_guard writer(impl_->write_mu);
  Minid m = impl_->current(identifier);
  if (m.status.kind == Status::Kind::tombstoned) throw ConflictError(m.identifier + " is tombstoned");
  if (by.rfind("doi:", 0) == 0) {
    if (by.size() <= 4) throw ArgumentError("empty DOI");
  } else {
    Minid next = impl_->current(by);
    std::vector<std::string> chain{m.identifier};
    for (;;) {
      if (next.identifier == m.identifier) {
        chain.push_back(next.identifier);
        throw CycleError("superseding " + m.identifier + " by " + by + " closes a cycle", chain);
      }
      chain.push_back(next.identifier);
      if (next.status.kind != Status::Kind::superseded || !is_valid_identifier(next.status.superseded_by)) break;
      next = impl_->current(next.status.superseded_by);
    }
  }
  auto ev = impl_->event("superseded", m.identifier, actor);
  ev["by"] = by;
  impl_->commit(json::array({std::move(ev)}));
  return impl_->current(m.identifier);
}

std::size_t Registry::size() const {
  std::shared_lock guard(impl_->index_mu);
  return impl_->index.size();
}

std::uint64_t Registry::last_sequence() const {
  std::shared_lock guard(impl_->index_mu);
  return impl_->seq;
}

const Registry::OpenInfo& Registry::open_info() const { return impl_->info; }

std::vector<Minid> Registry::records() const {
  std::shared_lock guard(impl_->index_mu);
  std::vector<Minid> out;
  for (const auto& [_, m] : impl_->index) out.push_back(m);
  return out;
}

}  // namespace cuflinks::minid
