#include <doctest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cuflinks/bag.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/minid.hpp"
#include "support/fixture_server.hpp"
#include "support/test_util.hpp"

using namespace cuflinks;
using namespace cuflinks::minid;
namespace fs = std::filesystem;

namespace {

// sha256, frozen from hashlib.
const std::string kHelloSha = "a948904f2f0f479b8f8197694b30184b0d2ed1c1cd2a1ec0fb85d299a192a447";  // "hello world\n"
const std::string kFirstSha = "7ca46ed8705ae80e983715aa2d60e4c49c87465c9d9467cafddf02bfadf6fc77";  // "first file\n"

MintRequest request(std::vector<std::string> locations = {"https://example.org/hello.txt"},
                    std::string digest = kHelloSha) {
  return MintRequest{"A. Author", "hello data", std::move(locations), {ChecksumAlgorithm::sha256, std::move(digest)}};
}

Clock fixed() { return fixed_clock(parse_timestamp("2026-04-01T12:00:00Z")); }

fetch::RetryPolicy quick() { return {3, std::chrono::milliseconds(1)}; }

}  // namespace

TEST_CASE("identifier syntax") {
  auto id = parse_identifier("minid:fPTs86M7VTyb");
  CHECK(id.suffix == "fPTs86M7VTyb");
  CHECK(id.str() == "minid:fPTs86M7VTyb");
  CHECK(is_valid_identifier("minid:0123456789"));
  CHECK(is_valid_identifier("minid:0123456789abcdef"));
  CHECK_FALSE(is_valid_identifier("minid:012345678"));
  CHECK_FALSE(is_valid_identifier("minid:0123456789abcdefg"));
  CHECK_FALSE(is_valid_identifier("minid:fPTs86M7-Tyb"));
  CHECK_FALSE(is_valid_identifier("fPTs86M7VTyb"));
  CHECK_FALSE(is_valid_identifier("ark:fPTs86M7VTyb"));
  CHECK_THROWS_AS(parse_identifier("minid:short"), IdentifierSyntaxError);
  std::regex grammar("[0-9A-Za-z]{12}");
  for (int i = 0; i < 100; ++i) CHECK(std::regex_match(random_suffix(), grammar));
}

TEST_CASE("mint and resolve round trip") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log", Registry::Mode::read_write, fixed());
  Minid m = reg.mint(request());
  CHECK(std::regex_match(m.identifier, std::regex("minid:[0-9A-Za-z]{10,16}")));
  CHECK(m.created == parse_timestamp("2026-04-01T12:00:00Z"));
  CHECK(m.status == Status::active());
  CHECK(reg.resolve(m.identifier) == m);
  CHECK(minid_from_json(to_json(m)) == m);

  auto j = nlohmann::json::parse(to_json(m));
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  CHECK(keys == std::set<std::string>{"identifier", "author", "created", "title", "locations", "checksum", "status"});
  CHECK(j["checksum"] == nlohmann::json{{"algorithm", "sha256"}, {"digest", kHelloSha}});

  CHECK_THROWS_AS(reg.resolve("minid:fPTs86M7VTyb"), NotFoundError);
  CHECK_THROWS_AS(reg.resolve("minid:zz"), IdentifierSyntaxError);
}

TEST_CASE("mint rejects bad requests") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log");
  CHECK_THROWS_AS(reg.mint(request({})), ArgumentError);
  CHECK_THROWS_AS(reg.mint(request({"relative/path"})), ArgumentError);
  CHECK_THROWS_AS(reg.mint(request({"https://x"}, "abc")), ArgumentError);
  auto md5 = request();
  md5.checksum = {ChecksumAlgorithm::md5, "d41d8cd98f00b204e9800998ecf8427e"};
  CHECK_THROWS_AS(reg.mint(md5), ArgumentError);
  CHECK(reg.size() == 0);
}

TEST_CASE("10,000 mints are distinct and survive reopening") {
  testing::TempDir tmp;
  std::set<std::string> ids;
  {
    Registry reg(tmp / "minids.log");
    for (int i = 0; i < 10000; ++i) ids.insert(reg.mint(request()).identifier);
    CHECK(reg.size() == 10000);
  }
  CHECK(ids.size() == 10000);
  Registry again(tmp / "minids.log");
  CHECK(again.size() == 10000);
  CHECK(again.last_sequence() == 10000);
  for (const auto& id : ids) REQUIRE(again.resolve(id).identifier == id);
}

TEST_CASE("update_locations, tombstone and supersede") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log");
  Minid m = reg.mint(request());
  Minid u = reg.update_locations(m.identifier, {"https://mirror.example.org/hello.txt"}, {}, "curator");
  CHECK(u.locations.size() == 2);
  CHECK(u.checksum == m.checksum);
  CHECK(u.created == m.created);
  CHECK(u.author == m.author);
  CHECK(u.title == m.title);

  CHECK_THROWS_AS(reg.update_locations(m.identifier, {}, u.locations, "curator"), ArgumentError);
  CHECK_THROWS_AS(reg.update_locations(m.identifier, {}, {"https://nowhere"}, "curator"), ArgumentError);
  Minid moved = reg.update_locations(m.identifier, {"https://new.example.org/h"}, u.locations, "curator");
  CHECK(moved.locations == std::vector<std::string>{"https://new.example.org/h"});

  Minid t = reg.tombstone(m.identifier, "curator");
  CHECK(t.status == Status::tombstoned());
  CHECK(t.checksum == m.checksum);
  CHECK_THROWS_AS(reg.update_locations(m.identifier, {"https://x/y"}, {}, "curator"), ConflictError);
  CHECK_THROWS_AS(reg.tombstone(m.identifier, "curator"), ConflictError);

  Minid a = reg.mint(request());
  Minid b = reg.mint(request());
  CHECK(reg.supersede(a.identifier, b.identifier, "c").status == Status::superseded(b.identifier));
  CHECK_THROWS_AS(reg.supersede(b.identifier, a.identifier, "c"), CycleError);
  CHECK_THROWS_AS(reg.supersede(b.identifier, b.identifier, "c"), CycleError);
  CHECK_THROWS_AS(reg.supersede(b.identifier, "minid:fPTs86M7VTyb", "c"), NotFoundError);
  CHECK(reg.supersede(b.identifier, "doi:10.1000/xyz", "c").status.str() == "superseded:doi:10.1000/xyz");

  auto before = reg.records();
  std::vector<Minid> after;
  {
    Registry view(tmp / "minids.log", Registry::Mode::read_only);
    after = view.records();
    CHECK_THROWS_AS(view.mint(request()), ConfigError);
  }
  CHECK(after == before);
}

TEST_CASE("the store admits one writer") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log");
  CHECK_THROWS_AS(Registry(tmp / "minids.log"), LockedError);
}

TEST_CASE("replay after any crash point yields a committed prefix") {
  testing::TempDir tmp;
  std::vector<std::size_t> sizes;  // file size after each commit
  std::vector<std::vector<Minid>> states;
  {
    Registry reg(tmp / "minids.log");
    sizes.push_back(fs::file_size(tmp / "minids.log"));
    states.push_back(reg.records());
    for (int i = 0; i < 4; ++i) {
      Minid m = reg.mint(request());
      sizes.push_back(fs::file_size(tmp / "minids.log"));
      states.push_back(reg.records());
      reg.update_locations(m.identifier, {"https://mirror/" + std::to_string(i)}, {}, "c");
      sizes.push_back(fs::file_size(tmp / "minids.log"));
      states.push_back(reg.records());
    }
  }
  const std::string full = testing::get(tmp / "minids.log");
  for (std::size_t cut = 0; cut <= full.size(); ++cut) {
    testing::put(tmp / "cut.log", full.substr(0, cut));
    Registry reg(tmp / "cut.log");
    std::size_t k = 0;
    while (k + 1 < sizes.size() && sizes[k + 1] <= cut) ++k;
    REQUIRE(reg.records() == (cut < sizes[0] ? std::vector<Minid>{} : states[k]));
    CHECK(fs::file_size(tmp / "cut.log") == (cut < sizes[0] ? sizes[0] : sizes[k]));
  }
}

TEST_CASE("corruption inside the log is not mistaken for a torn tail") {
  testing::TempDir tmp;
  {
    Registry reg(tmp / "minids.log");
    reg.mint(request());
    reg.mint(request());
  }
  testing::flip_byte(tmp / "minids.log", 40);
  CHECK_THROWS_AS(Registry(tmp / "minids.log"), IntegrityError);
  testing::put(tmp / "other.log", "something else entirely");
  CHECK_THROWS_AS(Registry(tmp / "other.log"), IntegrityError);
}

TEST_CASE("a killed writer loses no committed mint") {
  testing::TempDir tmp;
  int fds[2];
  REQUIRE(pipe(fds) == 0);
  pid_t child = fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    close(fds[0]);
    try {
      Registry reg(tmp / "minids.log");
      for (;;) {
        std::string line = reg.mint(request()).identifier + "\n";
        if (write(fds[1], line.data(), line.size()) != static_cast<ssize_t>(line.size())) _exit(2);
      }
    } catch (...) {
      _exit(1);
    }
  }
  close(fds[1]);
  std::string acknowledged;
  char buf[4096];
  while (std::count(acknowledged.begin(), acknowledged.end(), '\n') < 300) {
    ssize_t n = read(fds[0], buf, sizeof buf);
    REQUIRE(n > 0);
    acknowledged.append(buf, static_cast<std::size_t>(n));
  }
  kill(child, SIGKILL);
  int status = 0;
  waitpid(child, &status, 0);
  CHECK(WIFSIGNALED(status));
  close(fds[0]);

  Registry reg(tmp / "minids.log");
  std::istringstream lines(acknowledged);
  std::size_t checked = 0;
  for (std::string id; std::getline(lines, id);) {
    if (id.size() != kPrefix.size() + kMintedSuffix) continue;  // partial last line
    CHECK(reg.resolve(id).identifier == id);
    ++checked;
  }
  CHECK(checked >= 300);
  CHECK(reg.size() >= checked);
}

TEST_CASE("verify") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log");
  Minid m = reg.mint(request());
  testing::put(tmp / "hello.txt", "hello world\n");
  CHECK(verify_file(m, tmp / "hello.txt").match);
  testing::flip_byte(tmp / "hello.txt", 3);
  auto v = verify_file(m, tmp / "hello.txt");
  CHECK_FALSE(v.match);
  CHECK(v.expected == kHelloSha);
  CHECK(v.actual.size() == 64);
  CHECK(v.actual != kHelloSha);

  Minid t = reg.tombstone(m.identifier, "c");
  std::istringstream good("hello world\n");
  auto tv = verify(t, good);
  CHECK(tv.match);
  CHECK(tv.tombstoned);
}

TEST_CASE("HTTP registry service") {
  testing::TempDir tmp;
  Registry reg(tmp / "minids.log");
  RegistryServer server(reg, std::string("s3cret"));
  int port = server.start();
  std::string base = "http://127.0.0.1:" + std::to_string(port) + "/minid";

  HttpClient client(base, std::string("s3cret"));
  Minid m = client.mint(request());
  CHECK(client.resolve(m.identifier) == m);
  CHECK(reg.resolve(m.identifier) == m);
  CHECK_THROWS_AS(client.resolve("minid:fPTs86M7VTyb"), NotFoundError);
  CHECK_THROWS_AS(client.resolve("minid:bad"), IdentifierSyntaxError);

  Minid u = client.update_locations(m.identifier, {"https://mirror.example.org/h"}, {}, "c");
  CHECK(u.locations.size() == 2);
  CHECK_THROWS_AS(client.update_locations(m.identifier, {}, u.locations, "c"), ArgumentError);

  HttpClient anonymous(base);
  CHECK(anonymous.resolve(m.identifier) == u);
  CHECK_THROWS_AS(anonymous.mint(request()), ConfigError);

  httplib::Client raw("127.0.0.1", port);
  auto health = raw.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto bad = raw.Get("/minid/not-a-minid");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto missing = raw.Get("/minid/fPTs86M7VTyb");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  Minid t = client.tombstone(m.identifier, "c");
  auto gone = raw.Get("/minid/" + parse_identifier(m.identifier).suffix);
  REQUIRE(gone);
  CHECK(gone->status == 410);
  CHECK(minid_from_json(gone->body) == t);
  CHECK(client.resolve(m.identifier).status == Status::tombstoned());
  CHECK_THROWS_AS(client.tombstone(m.identifier, "c"), ConflictError);

  Minid a = client.mint(request());
  Minid b = client.mint(request());
  client.supersede(a.identifier, b.identifier, "c");
  CHECK_THROWS_AS(client.supersede(b.identifier, a.identifier, "c"), CycleError);

  server.stop();
  CHECK_THROWS_AS(client.resolve(m.identifier), TransferError);
}

TEST_CASE("resolve_to_file tries locations in order and always verifies") {
  testing::TempDir tmp;
  testing::FixtureServer srv;
  srv.serve("/good", "hello world\n");
  srv.serve("/bad", "hello world?");
  Registry reg(tmp / "minids.log");
  auto schemes = fetch::default_schemes();

  Minid fallback = reg.mint(request({srv.url("/missing"), srv.url("/good")}));
  Resolved r = resolve_to_file(reg, fallback.identifier, schemes, tmp / "out.txt", quick());
  CHECK(r.location == srv.url("/good"));
  CHECK(testing::get(tmp / "out.txt") == "hello world\n");
  CHECK(srv.hits("/missing") == 1);

  Minid tampered = reg.mint(request({srv.url("/bad"), srv.url("/good")}));
  CHECK_THROWS_AS(resolve_to_file(reg, tampered.identifier, schemes, tmp / "t.txt", quick()), IntegrityError);
  CHECK_FALSE(fs::exists(tmp / "t.txt"));
  CHECK_FALSE(fs::exists(tmp / "t.txt.partial"));

  Minid dead = reg.mint(request({srv.url("/a"), srv.url("/b")}));
  try {
    resolve_to_file(reg, dead.identifier, schemes, tmp / "d.txt", quick());
    FAIL("expected a transfer error");
  } catch (const TransferError& e) {
    std::string what = e.what();
    CHECK(what.find(srv.url("/a")) != std::string::npos);
    CHECK(what.find(srv.url("/b")) != std::string::npos);
  }

  reg.tombstone(fallback.identifier, "c");
  CHECK_THROWS_AS(resolve_to_file(reg, fallback.identifier, schemes, tmp / "x.txt", quick()), ConflictError);
}

TEST_CASE("fetch.txt entries may name minids") {
  testing::TempDir tmp;
  testing::FixtureServer srv;
  srv.serve("/f1", "first file\n");
  auto reg = std::make_shared<Registry>(tmp / "minids.log");
  Minid m = reg->mint(request({srv.url("/gone"), srv.url("/f1")}, kFirstSha));

  bag::CreateOptions opts;
  opts.remote = {{{m.identifier, 11, "data/file1"}, {{ChecksumAlgorithm::sha256, kFirstSha}}}};
  fs::path dir = bag::write_bag(bag::create_bag(opts), tmp / "bag").location.value();

  auto schemes = fetch::default_schemes();
  schemes.add("minid", make_minid_scheme(reg, schemes));
  fetch::MaterializeOptions o;
  o.retry = quick();
  auto report = fetch::materialize(dir, schemes, o);
  CHECK(report.count(fetch::Outcome::fetched) == 1);
  CHECK(bag::validate_bag_at(dir, bag::ValidationLevel::full).ok());
}
