#include <doctest.h>

#include <sstream>

#include "cuflinks/archive.hpp"
#include "cuflinks/bag.hpp"
#include "cuflinks/error.hpp"
#include "cuflinks/zip.hpp"
#include "support/test_util.hpp"

using namespace cuflinks;
using namespace cuflinks::bag;
namespace fs = std::filesystem;

namespace {

fs::path make_bag(const testing::TempDir& tmp) {
  CreateOptions opts;
  opts.root_name = "mybag";
  opts.payload_files = {bytes_entry("file1", "first file\n"), bytes_entry("file2", std::string(70000, 'z'))};
  opts.metadata_files = {bytes_entry("annotations.txt", "note\n")};
  opts.algorithms = {ChecksumAlgorithm::md5};
  Bag bag = with_tag_file(create_bag(opts), bytes_entry("metadata/manifest.json", "{}\n"));
  return write_bag(bag, tmp / "src" / "mybag").location.value();
}

}  // namespace

TEST_CASE("serialize: one top-level directory holding every bag file") {
  testing::TempDir tmp;
  fs::path dir = make_bag(tmp);
  serialize(dir, tmp / "mybag.zip");
  auto entries = zip::list_entries(tmp / "mybag.zip");
  CHECK(entries.size() == 9);
  for (const auto& e : entries) CHECK(e.name.rfind("mybag/", 0) == 0);
}

TEST_CASE("extract(serialize(d)) is byte-identical to d") {
  testing::TempDir tmp;
  fs::path dir = make_bag(tmp);
  serialize(dir, tmp / "mybag.zip");
  fs::path out = extract(tmp / "mybag.zip", tmp / "out");
  CHECK(out == tmp / "out" / "mybag");
  CHECK(testing::snapshot(out) == testing::snapshot(dir));
  CHECK(validate_bag_at(out, ValidationLevel::full).ok());

  // Serializing twice yields the same archive bytes.
  serialize(dir, tmp / "again.zip");
  CHECK(testing::get(tmp / "again.zip") == testing::get(tmp / "mybag.zip"));

  CHECK_THROWS_AS(extract(tmp / "mybag.zip", tmp / "out"), ConflictError);
}

TEST_CASE("empty payload directory survives the round trip") {
  testing::TempDir tmp;
  CreateOptions opts;
  opts.root_name = "empty";
  Bag bag = write_bag(create_bag(opts), tmp / "src" / "empty");
  serialize(*bag.location, tmp / "empty.zip");
  fs::path out = extract(tmp / "empty.zip", tmp / "out");
  CHECK(fs::is_directory(out / "data"));
  CHECK(validate_bag_at(out, ValidationLevel::full).ok());
}

TEST_CASE("extract rejects archives without a single root") {
  testing::TempDir tmp;
  {
    zip::Writer w(tmp / "two.zip");
    w.add_bytes("a/bagit.txt", "x");
    w.add_bytes("b/bagit.txt", "y");
    w.finish();
  }
  CHECK_THROWS_AS(extract(tmp / "two.zip", tmp / "out"), MalformedArchiveError);
  {
    zip::Writer w(tmp / "loose.zip");
    w.add_bytes("bagit.txt", "x");
    w.finish();
  }
  CHECK_THROWS_AS(extract(tmp / "loose.zip", tmp / "out"), MalformedArchiveError);
  {
    zip::Writer w(tmp / "escape.zip");
    w.add_bytes("a/../../evil", "x");
    w.finish();
  }
  CHECK_THROWS_AS(extract(tmp / "escape.zip", tmp / "out"), MalformedArchiveError);
  CHECK_FALSE(fs::exists(tmp / "out"));

  testing::put(tmp / "junk.zip", "not a zip at all");
  CHECK_THROWS_AS(extract(tmp / "junk.zip", tmp / "out"), MalformedArchiveError);
}

TEST_CASE("serialize refuses a bag that fails fast validation") {
  testing::TempDir tmp;
  fs::path dir = make_bag(tmp);
  fs::remove(dir / "data/file1");
  CHECK_THROWS_AS(serialize(dir, tmp / "bad.zip"), BagInvalidError);
  CHECK_FALSE(fs::exists(tmp / "bad.zip"));
}

TEST_CASE("zip members detect corruption") {
  testing::TempDir tmp;
  {
    zip::Writer w(tmp / "one.zip");
    w.add_bytes("r/file", std::string(5000, 'q'));
    w.finish();
  }
  auto entries = zip::list_entries(tmp / "one.zip");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].size == 5000);
  std::ostringstream ok;
  zip::extract_entry(tmp / "one.zip", entries[0], ok);
  CHECK(ok.str() == std::string(5000, 'q'));

  // Corrupt a byte inside the compressed stream.
  testing::flip_byte(tmp / "one.zip", 30 + 6 + 2, 0xff);
  std::ostringstream bad;
  CHECK_THROWS_AS(zip::extract_entry(tmp / "one.zip", entries[0], bad), MalformedArchiveError);
}
