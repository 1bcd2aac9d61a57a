// One PASS/FAIL line per headline guarantee. Exit status is the number of
// failures.
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cuflinks/archive.hpp"
#include "cuflinks/bag.hpp"
#include "cuflinks/cuflink.hpp"
#include "cuflinks/digest.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/minid.hpp"
#include "cuflinks/ro.hpp"
#include "support/fixture_server.hpp"
#include "support/pipeline.hpp"
#include "support/test_util.hpp"

using namespace cuflinks;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---- plumbing -----------------------------------------------------------------

struct Check {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

struct CliResult {
  int status = -1;
  std::string out;
};

CliResult cli(const std::vector<std::string>& args, const std::map<std::string, std::string>& env = {}) {
  std::string cmd = "env -u CUFLINKS_RESOLVER -u CUFLINKS_LEDGER -u CUFLINKS_DICTIONARY -u SOURCE_DATE_EPOCH";
  for (const auto& [k, v] : env) cmd += " " + k + "=" + quote(v);
  cmd += " " + quote(CUFLINKS_CLI_PATH);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " 2>/dev/null";
  CliResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::optional<json> parse_json(const std::string& s) {
  try {
    return json::parse(s);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

bag::CreateOptions random_bag(std::mt19937& rng) {
  std::uniform_int_distribution<int> nfiles(1, 6), len(0, 400), byte(0, 255), depth(0, 2), pick(0, 2);
  bag::CreateOptions opts;
  opts.root_name = "rb";
  opts.clock = fixed_clock(parse_timestamp("2026-01-01T00:00:00Z"));
  const AlgorithmSet choices[] = {{ChecksumAlgorithm::md5},
                                  {ChecksumAlgorithm::sha256},
                                  {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha512}};
  opts.algorithms = choices[pick(rng)];
  int n = nfiles(rng);
  for (int i = 0; i < n; ++i) {
    std::string path;
    for (int d = depth(rng); d > 0; --d) path += "d" + std::to_string(pick(rng)) + "/";
    path += "f" + std::to_string(i) + (pick(rng) == 0 ? " x.bin" : ".dat");
    std::string bytes(static_cast<std::size_t>(len(rng)), '\0');
    for (auto& c : bytes) c = static_cast<char>(byte(rng));
    opts.payload_files.push_back(bag::bytes_entry(path, bytes));
  }
  if (pick(rng) > 0) opts.metadata_files.push_back(bag::bytes_entry("notes.txt", "n=" + std::to_string(n) + "\n"));
  return opts;
}

// ---- 1 ------------------------------------------------------------------------

const std::map<std::string, std::string> kLayout = {
    {"bag-info.txt",
     "BagIt-Profile-Identifier: https://raw.githubusercontent.com/fair-research/bdbag/master/profiles/"
     "bdbag-profile.json\nBagging-Date: 2023-11-14\nPayload-Oxum: 23.2\n"},
    {"bagit.txt", "BagIt-Version: 1.0\nTag-File-Character-Encoding: UTF-8\n"},
    {"data/file1", "first file\n"},
    {"data/file2", "second file\n"},
    {"fetch.txt", ""},
    {"manifest-md5.txt", "ef5940958c334bb7cfc4f3da6ad0f8c3  data/file1\n3db2050fcf84bb631dcae417d3db518c  data/file2\n"},
    {"metadata/annotations.txt", "sample annotations\n"},
    {"metadata/manifest.json",
     "{\n  \"@context\": [\n    \"https://w3id.org/bundle/context\"\n  ],\n  \"aggregates\": [\n    {\n"
     "      \"mediatype\": \"application/octet-stream\",\n      \"uri\": \"../data/file1\"\n    },\n    {\n"
     "      \"mediatype\": \"application/octet-stream\",\n      \"uri\": \"../data/file2\"\n    },\n    {\n"
     "      \"mediatype\": \"text/plain\",\n      \"uri\": \"../metadata/annotations.txt\"\n    }\n  ],\n"
     "  \"annotations\": [],\n  \"createdBy\": {\n    \"name\": \"acceptance\"\n  },\n"
     "  \"createdOn\": \"2023-11-14T22:13:20Z\"\n}\n"},
    // md5 of each file above, from an independent hashlib run
    {"tagmanifest-md5.txt",
     "409a3311ae6e0794cd12b70d77be91a6  bag-info.txt\n"
     "eaa2c609ff6371712f623f5531945b44  bagit.txt\n"
     "d41d8cd98f00b204e9800998ecf8427e  fetch.txt\n"
     "98c60e62081e5c354d71bf59602fe216  manifest-md5.txt\n"
     "be4a9dc7ee7145115fdda777fbe5bf50  metadata/annotations.txt\n"
     "b82437666edb9fbb7c4c91dab63321ef  metadata/manifest.json\n"},
};

void layout(Check& c) {
  testing::TempDir tmp;
  testing::put(tmp / "src/file1", "first file\n");
  testing::put(tmp / "src/file2", "second file\n");
  testing::put(tmp / "md/annotations.txt", "sample annotations\n");
  auto r = cli({"bag", "create", (tmp / "src").string(), "--metadata", (tmp / "md").string(), "--alg", "md5", "--out",
                (tmp / "mybag").string()},
               {{"SOURCE_DATE_EPOCH", "1700000000"}, {"CUFLINKS_ACTOR", "acceptance"}});
  c.expect(r.status == 0, "bag create exit " + std::to_string(r.status));
  auto tree = testing::snapshot(tmp / "mybag");
  std::set<std::string> names;
  for (const auto& [k, _] : tree) names.insert(k);
  std::set<std::string> want;
  for (const auto& [k, _] : kLayout) want.insert(k);
  c.expect(names == want, "layout differs (" + std::to_string(names.size()) + " files)");
  for (const auto& [k, v] : kLayout) c.expect(tree.count(k) && tree[k] == v, k + " is not byte-exact");

  bag::Bag b = bag::read_bag(tmp / "mybag");
  c.expect(bag::write_bag(b, tmp / "copy" / "mybag") == b, "read-back bag differs");
  c.expect(testing::snapshot(tmp / "copy" / "mybag") == tree, "rewritten bag differs");
}

// ---- 2 ------------------------------------------------------------------------

void fixity(Check& c) {
  std::mt19937 rng(20260516);
  testing::TempDir tmp;
  std::size_t mutations = 0;
  for (int i = 0; i < 100; ++i) {
    fs::path dest = tmp / std::to_string(i) / "rb";
    bag::write_bag(bag::create_bag(random_bag(rng)), dest);
    c.expect(bag::validate_bag_at(dest, bag::ValidationLevel::full).ok(), "false finding on bag " + std::to_string(i));
    for (const auto& rel : list_files(dest)) {
      std::string original = testing::get(dest / rel);
      for (int k = 0; k < 3; ++k) {
        std::string mutated = original;
        if (mutated.empty()) {
          mutated.push_back('\n');  // the only single-byte change an empty file admits
        } else {
          std::size_t off = std::uniform_int_distribution<std::size_t>(0, mutated.size() - 1)(rng);
          auto mask = static_cast<unsigned char>(std::uniform_int_distribution<int>(1, 255)(rng));
          mutated[off] = static_cast<char>(static_cast<unsigned char>(mutated[off]) ^ mask);
        }
        write_file(dest / rel, mutated);
        ++mutations;
        bool named = false;
        try {
          auto rep = bag::validate_bag_at(dest, bag::ValidationLevel::full);
          for (const auto& f : rep.findings) named = named || f.path == rel || f.manifest == rel;
        } catch (const std::exception& e) {
          named = std::string(e.what()).find(rel) != std::string::npos;
        }
        c.expect(named, "bag " + std::to_string(i) + ": mutation of " + rel + " not reported");
        write_file(dest / rel, original);
      }
    }
    c.expect(bag::validate_bag_at(dest, bag::ValidationLevel::full).ok(), "restored bag " + std::to_string(i));
  }
  c.expect(mutations > 1000, "only " + std::to_string(mutations) + " mutations");
}

// ---- 3 ------------------------------------------------------------------------

fs::path holey_bag(const fs::path& dir, testing::FixtureServer& server) {
  bag::CreateOptions opts;
  opts.root_name = "holey";
  opts.algorithms = {ChecksumAlgorithm::md5};
  opts.clock = fixed_clock(parse_timestamp("2026-01-01T00:00:00Z"));
  opts.remote = {
      {{server.url("/file1"), 11, "data/file1"}, {{ChecksumAlgorithm::md5, "ef5940958c334bb7cfc4f3da6ad0f8c3"}}},
      {{server.url("/file2"), 12, "data/file2"}, {{ChecksumAlgorithm::md5, "3db2050fcf84bb631dcae417d3db518c"}}}};
  return bag::write_bag(bag::create_bag(opts), dir).location.value();
}

void holey(Check& c) {
  testing::TempDir tmp;
  {
    testing::FixtureServer server;
    server.serve("/file1", "first file\n");
    server.serve("/file2", "second file\n");
    fs::path b = holey_bag(tmp / "good", server);
    auto r = cli({"--json", "bag", "resolve-fetch", b.string(), "--all"});
    c.expect(r.status == 0, "resolve-fetch exit " + std::to_string(r.status));
    auto doc = parse_json(r.out);
    c.expect(doc && (*doc)["complete"] == true, "report does not say complete");
    c.expect(fetch::verify_completeness(b).complete, "bag not complete");
    c.expect(cli({"bag", "validate", b.string(), "--full"}).status == 0, "materialized bag fails full validation");
    c.expect(testing::get(b / "data/file2") == "second file\n", "wrong bytes");
  }
  {
    testing::FixtureServer server;
    server.serve("/file1", "first file\n");
    server.serve("/file2", "second fil3\n");
    fs::path b = holey_bag(tmp / "bad", server);
    auto before = testing::snapshot(b);
    auto r = cli({"--json", "bag", "resolve-fetch", b.string(), "--path", "data/file2"});
    c.expect(r.status != 0, "tampered response exited 0");
    auto doc = parse_json(r.out);
    bool mismatch = false;
    if (doc)
      for (const auto& e : (*doc)["entries"])
        mismatch = mismatch || (e["path"] == "data/file2" && e["outcome"] == "digest-mismatch");
    c.expect(mismatch, "no digest-mismatch for data/file2");
    c.expect(testing::snapshot(b) == before, "bag changed after a rejected download");
  }
}

// ---- 4 ------------------------------------------------------------------------

minid::MintRequest request(int i) {
  return {"acceptance", "item " + std::to_string(i), {"https://data.example.org/items/" + std::to_string(i)},
          {ChecksumAlgorithm::sha256, "a948904f2f0f479b8f8197694b30184b0d2ed1c1cd2a1ec0fb85d299a192a447"}};
}

void minids(Check& c) {
  testing::TempDir tmp;
  c.expect(minid::is_valid_identifier("minid:fPTs86M7VTyb"), "well-formed example identifier rejected");
  {
    minid::Registry fresh(tmp / "fresh.log");
    bool not_found = false;
    try {
      fresh.resolve("minid:fPTs86M7VTyb");
    } catch (const NotFoundError&) {
      not_found = true;
    }
    c.expect(not_found, "unminted id did not resolve to not-found");
  }
  auto r = cli({"minid", "resolve", "minid:fPTs86M7VTyb"}, {{"CUFLINKS_RESOLVER", (tmp / "cli.log").string()}});
  auto bad = cli({"minid", "resolve", "minid:fPTs86"}, {{"CUFLINKS_RESOLVER", (tmp / "cli.log").string()}});
  c.expect(r.status == 1 && bad.status == 2, "CLI not-found/malformed exits " + std::to_string(r.status) + "/" +
                                                 std::to_string(bad.status));

  std::vector<minid::Minid> minted;
  {
    minid::Registry reg(tmp / "big.log");
    std::set<std::string> ids;
    for (int i = 0; i < 10000; ++i) {
      minted.push_back(reg.mint(request(i)));
      ids.insert(minted.back().identifier);
    }
    c.expect(ids.size() == 10000, std::to_string(ids.size()) + " distinct of 10000");
    c.expect(reg.resolve(minted[1234].identifier) == minted[1234], "resolve differs from mint");

    minid::RegistryServer server(reg);
    int port = server.start();
    minid::HttpClient client("http://127.0.0.1:" + std::to_string(port) + "/minid");
    auto m = client.mint(request(-1));
    c.expect(client.resolve(m.identifier) == m, "HTTP round trip differs");
    minted.push_back(m);
    server.stop();
  }
  {
    minid::Registry reopened(tmp / "big.log");
    c.expect(reopened.size() == minted.size(), "replay lost records");
    bool same = true;
    for (const auto& m : minted) same = same && reopened.resolve(m.identifier) == m;
    c.expect(same, "replayed records differ");
  }

  // Kill a writer mid-stream; everything it acknowledged must come back.
  int fds[2];
  if (::pipe(fds) != 0) {
    c.expect(false, "pipe");
    return;
  }
  pid_t pid = ::fork();
  if (pid == 0) {
    ::close(fds[0]);
    minid::Registry reg(tmp / "killed.log");
    for (int i = 0;; ++i) {
      std::string line = reg.mint(request(i)).identifier + "\n";
      if (::write(fds[1], line.data(), line.size()) < 0) ::_exit(1);
    }
  }
  ::close(fds[1]);
  std::string acked;
  char buf[4096];
  while (std::count(acked.begin(), acked.end(), '\n') < 500) {
    ssize_t n = ::read(fds[0], buf, sizeof buf);
    if (n <= 0) break;
    acked.append(buf, static_cast<std::size_t>(n));
  }
  ::kill(pid, SIGKILL);
  ::waitpid(pid, nullptr, 0);
  ::close(fds[0]);
  acked.resize(acked.rfind('\n') + 1);
  minid::Registry after(tmp / "killed.log");
  std::istringstream in(acked);
  std::size_t lost = 0, n = 0;
  for (std::string id; std::getline(in, id); ++n) {
    try {
      after.resolve(id);
    } catch (const NotFoundError&) {
      ++lost;
    }
  }
  c.expect(n >= 500 && lost == 0, std::to_string(lost) + " of " + std::to_string(n) + " acknowledged mints lost");
}

// ---- 5 ------------------------------------------------------------------------

void chains(Check& c) {
  auto verdict = [&](testing::Pipeline& p) {
    auto r = cli({"--json", "link", "verify", p.ids.back(), "--full"},
                 {{"CUFLINKS_RESOLVER", p.registry_log.string()}, {"CUFLINKS_LEDGER", p.ledger.string()}});
    auto doc = parse_json(r.out);
    std::vector<std::string> failures;
    std::size_t issues = 0;
    if (doc) {
      failures = (*doc)["failures"].get<std::vector<std::string>>();
      issues = (*doc)["ledger_issues"].size();
    }
    return std::tuple{r.status, failures, issues};
  };
  {
    testing::TempDir tmp;
    testing::Pipeline p(tmp.path());
    auto [st, f, issues] = verdict(p);
    c.expect(st == 0 && f.empty() && issues == 0, "fresh pipeline not intact");
  }
  {
    testing::TempDir tmp;
    testing::Pipeline p(tmp.path());
    p.registry->tombstone(p.ids[1], "curator");
    auto [st, f, issues] = verdict(p);
    c.expect(st == 1 && f == std::vector<std::string>{p.ids[1]}, "tombstone not pinned to D2");
  }
  {
    testing::TempDir tmp;
    testing::Pipeline p(tmp.path());
    testing::flip_byte(p.archives[0], 60);
    auto [st, f, issues] = verdict(p);
    c.expect(st == 1 && f == std::vector<std::string>{p.ids[0]}, "tampered byte not pinned to D1");
  }
  {
    testing::TempDir tmp;
    testing::Pipeline p(tmp.path());
    std::string text = testing::get(p.ledger);
    // lines: root D1, D2 <- D1, D3 <- D2; drop the second
    auto a = text.find('\n') + 1, b = text.find('\n', a) + 1;
    testing::put(p.ledger, text.substr(0, a) + text.substr(b));
    auto [st, f, issues] = verdict(p);
    c.expect(st == 1 && f == std::vector<std::string>{p.ids[1]} && issues == 1,
             "deleted record not pinned to D2's linkage");
  }
}

// ---- 6 ------------------------------------------------------------------------

void terms(Check& c) {
  ro::TermDictionary dict({{"complete", {"local:complete", "", ro::TermStatus::active, std::nullopt}},
                           {"in-progress", {"local:in-progress", "", ro::TermStatus::active, std::nullopt}}});
  const std::vector<std::string> variants = {"Complete",  "completed",  "Completed",   "completed contaminated",
                                             "inprgress", "inprogress", "In Progress", "complete"};
  std::vector<std::string> accepted;
  int suggested = 0;
  for (const auto& v : variants) {
    auto verdict = ro::validate_term(v, dict);
    if (verdict.ok) accepted.push_back(v);
    if (!verdict.ok && !verdict.suggestions.empty()) ++suggested;
  }
  c.expect(accepted == std::vector<std::string>{"complete"}, std::to_string(accepted.size()) + " accepted");
  c.expect(suggested >= 5, "suggestions for " + std::to_string(suggested) + " of 7 rejects");
}

// ---- 7 ------------------------------------------------------------------------

void serialization(Check& c) {
  std::mt19937 rng(7);
  testing::TempDir tmp;
  for (int i = 0; i < 25; ++i) {
    fs::path dir = tmp / "src" / std::to_string(i) / "rb";
    bag::write_bag(bag::create_bag(random_bag(rng)), dir);
    fs::path zip = tmp / ("b" + std::to_string(i) + ".zip");
    bag::serialize(dir, zip);
    fs::path out = bag::extract(zip, tmp / "out" / std::to_string(i));
    c.expect(testing::snapshot(out) == testing::snapshot(dir), "bag " + std::to_string(i) + " differs after extract");
  }
}

// ---- 8 ------------------------------------------------------------------------

void known_answers(Check& c) {
  const std::string md5 = "d41d8cd98f00b204e9800998ecf8427e";
  const std::string sha256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
  c.expect(compute_digest("", ChecksumAlgorithm::md5) == md5, "md5(\"\")");
  c.expect(compute_digest("", ChecksumAlgorithm::sha256) == sha256, "sha256(\"\")");
  testing::TempDir tmp;
  testing::put(tmp / "empty", "");
  auto d = digest_file(tmp / "empty", {ChecksumAlgorithm::md5, ChecksumAlgorithm::sha256});
  c.expect(d[ChecksumAlgorithm::md5] == md5 && d[ChecksumAlgorithm::sha256] == sha256, "digest_file of empty file");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "bag create yields the nine-entry layout, byte-exact", 1, layout},
      {2, "every single-byte mutation in 100 bags is named", 30, fixity},
      {3, "holey bag materializes; tampered response rejected", 5, holey},
      {4, "minid round trip, not-found, 10k distinct, kill/replay", 60, minids},
      {5, "chain verdict flips on each injury, naming it", 10, chains},
      {6, "status vocabulary: only 'complete' passes, >=5 suggestions", 1, terms},
      {7, "extract(serialize(bag)) identical for 25 bags", 10, serialization},
      {8, "known-answer digests of empty input", 1, known_answers},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.problems.push_back(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= cr.limit_s) c.problems.push_back("took " + std::to_string(secs) + " s");
    bool ok = c.problems.empty();
    failed += ok ? 0 : 1;
    std::printf("%s  %d  %-60s %7.3f s (limit %g s)\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs, cr.limit_s);
    for (std::size_t i = 0; i < c.problems.size() && i < 5; ++i) std::printf("        %s\n", c.problems[i].c_str());
    std::fflush(stdout);
  }
  return failed;
}
