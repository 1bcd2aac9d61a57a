import json
import re
import subprocess
import time
from pathlib import Path

from conftest import BIN, make_holey, make_tree, run, run_json, snapshot

NINE = [
    "bag-info.txt", "bagit.txt", "data/file1", "data/file2", "fetch.txt", "manifest-md5.txt",
    "metadata/annotations.txt", "metadata/manifest.json", "tagmanifest-md5.txt",
]

STATUS_VARIANTS = ["Complete", "completed", "Completed", "completed contaminated",
                   "inprgress", "inprogress", "In Progress", "complete"]


def fixture_bag(tmp_path, name="mybag", epoch="1700000000"):
    make_tree(tmp_path / "src", {"file1": "first file\n", "file2": "second file\n"})
    make_tree(tmp_path / "md", {"annotations.txt": "sample annotations\n"})
    p = run("bag", "create", tmp_path / "src", "--metadata", tmp_path / "md", "--alg", "md5",
            "--out", tmp_path / name, env={"SOURCE_DATE_EPOCH": epoch})
    assert p.returncode == 0, p.stderr
    return tmp_path / name


def test_create_layout_is_reproducible(tmp_path):
    bag = fixture_bag(tmp_path)
    assert sorted(snapshot(bag)) == NINE
    assert (bag / "fetch.txt").read_bytes() == b""
    assert (bag / "manifest-md5.txt").read_text() == (
        "ef5940958c334bb7cfc4f3da6ad0f8c3  data/file1\n"
        "3db2050fcf84bb631dcae417d3db518c  data/file2\n")
    again = fixture_bag(tmp_path, "again")
    assert snapshot(bag) == snapshot(again)


def test_validate_names_the_mutated_path(tmp_path):
    bag = fixture_bag(tmp_path)
    assert run("bag", "validate", bag, "--full").returncode == 0
    f = bag / "data" / "file2"
    b = bytearray(f.read_bytes())
    b[3] ^= 0x01
    f.write_bytes(bytes(b))
    before = snapshot(bag)
    p, doc = run_json("bag", "validate", bag, "--full")
    assert p.returncode == 1
    assert doc["valid"] is False
    assert {x["path"] for x in doc["findings"]} == {"data/file2"}
    assert snapshot(bag) == before  # validation is read-only
    p = run("bag", "validate", bag, "--full")
    assert "data/file2" in p.stdout


def test_resolve_fetch_materializes_holey_bag(tmp_path, http_fixture):
    bag = fixture_bag(tmp_path)
    http_fixture.routes = {"/f1": b"first file\n", "/f2": b"second file\n"}
    make_holey(bag, {"data/file1": http_fixture.url("/f1"), "data/file2": http_fixture.url("/f2")})
    assert run("bag", "validate", bag, "--fast").returncode == 0
    assert run("bag", "validate", bag, "--full").returncode == 1

    start = time.monotonic()
    p, doc = run_json("bag", "resolve-fetch", bag, "--all")
    assert time.monotonic() - start < 5
    assert p.returncode == 0, p.stderr
    assert doc["complete"] is True
    assert [e["outcome"] for e in doc["entries"]] == ["fetched", "fetched"]
    assert (bag / "fetch.txt").read_bytes() == b""
    assert run("bag", "validate", bag, "--full").returncode == 0


def test_resolve_fetch_rejects_tampered_response(tmp_path, http_fixture):
    bag = fixture_bag(tmp_path)
    http_fixture.routes = {"/f1": b"first file\n", "/f2": b"secXnd file\n"}
    make_holey(bag, {"data/file1": http_fixture.url("/f1"), "data/file2": http_fixture.url("/f2")})
    p, doc = run_json("bag", "resolve-fetch", bag, "--path", "data/file2")
    assert p.returncode == 1
    assert doc["entries"][1]["outcome"] == "digest-mismatch"
    assert not (bag / "data" / "file2").exists()
    assert "data/file2" in (bag / "fetch.txt").read_text()
    assert not (bag / ".bdbag-tmp").exists() or not any((bag / ".bdbag-tmp").iterdir())


def test_minid_exit_codes_and_round_trip(tmp_path):
    env = {"CUFLINKS_RESOLVER": str(tmp_path / "minids.log")}
    p, doc = run_json("minid", "resolve", "minid:fPTs86M7VTyb", env=env)
    assert p.returncode == 1 and doc["kind"] == "not-found"
    assert not (tmp_path / "minids.log").exists()  # resolving creates nothing
    p, doc = run_json("minid", "resolve", "minid:short", env=env)
    assert p.returncode == 2 and doc["kind"] == "malformed-identifier"

    data = make_tree(tmp_path, {"x.csv": "a,b\n1,2\n"}) / "x.csv"
    p, minted = run_json("minid", "mint", "--title", "x", "--author", "me", "--locations",
                         data.as_uri(), "--from-file", data, env=env)
    assert p.returncode == 0, p.stderr
    p, resolved = run_json("minid", "resolve", minted["identifier"], env=env)
    assert resolved == minted
    p = run("minid", "resolve", minted["identifier"], "--download", tmp_path / "copy.csv", env=env)
    assert p.returncode == 0, p.stderr
    assert (tmp_path / "copy.csv").read_bytes() == data.read_bytes()

    assert run("minid", "tombstone", minted["identifier"], env=env).returncode == 0
    p, doc = run_json("minid", "resolve", minted["identifier"], env=env)
    assert p.returncode == 0 and doc["status"] == "tombstoned"


def test_registry_service_over_http(tmp_path):
    log = tmp_path / "served.log"
    srv = subprocess.Popen([BIN, "--resolver", str(log), "--token", "s3cret", "registry", "serve", "--port", "0"],
                           stderr=subprocess.PIPE, stdout=subprocess.DEVNULL, text=True)
    try:
        line = srv.stderr.readline()
        base = re.search(r"(http://\S+/minid)", line).group(1)
        data = make_tree(tmp_path, {"d.txt": "payload\n"}) / "d.txt"
        mint = ["minid", "mint", "--title", "d", "--locations", data.as_uri(), "--from-file", data]
        p, doc = run_json(*mint, env={"CUFLINKS_RESOLVER": base})
        assert p.returncode == 2 and doc["kind"] == "config"  # no token
        p, minted = run_json(*mint, env={"CUFLINKS_RESOLVER": base, "CUFLINKS_TOKEN": "s3cret"})
        assert p.returncode == 0, p.stderr
        p, resolved = run_json("minid", "resolve", minted["identifier"], env={"CUFLINKS_RESOLVER": base})
        assert resolved == minted
    finally:
        srv.terminate()
        srv.wait(10)
    # acknowledged writes are in the log
    p, resolved = run_json("minid", "resolve", minted["identifier"], env={"CUFLINKS_RESOLVER": str(log)})
    assert resolved == minted

    p, doc = run_json("minid", "resolve", minted["identifier"], env={"CUFLINKS_RESOLVER": base})
    assert p.returncode == 3 and doc["kind"] == "transfer"


def test_link_chain_workflow(tmp_path):
    env = {"CUFLINKS_RESOLVER": str(tmp_path / "minids.log"), "CUFLINKS_LEDGER": str(tmp_path / "ledger.jsonl")}
    ids = []
    for k in range(3):
        f = make_tree(tmp_path, {f"d{k}": f"stage {k}\n"}) / f"d{k}"
        p = run("minid", "mint", "--title", f"d{k}", "--locations", f.as_uri(), "--from-file", f, env=env)
        assert p.returncode == 0, p.stderr
        ids.append(p.stdout.strip())
    commit = "https://github.com/example/pipeline@9fceb02d0ae598e95dc970b74767f19372d61af8"
    assert run("link", "root", ids[0], env=env).returncode == 0
    for k in (1, 2):
        p = run("link", "record", "--output", ids[k], "--inputs", ids[k - 1], "--commit", commit, env=env)
        assert p.returncode == 0, p.stdout + p.stderr
    p = run("link", "record", "--output", ids[2], "--inputs", ids[0], "--commit", commit, env=env)
    assert p.returncode == 1 and "already" in p.stderr
    p = run("link", "record", "--output", ids[1], "--inputs", ids[0], "--commit", "https://github.com/x/y", env=env)
    assert p.returncode == 2

    p, doc = run_json("link", "verify", ids[2], "--full", env=env)
    assert p.returncode == 0 and doc["verdict"] == "intact"
    assert sorted(doc["nodes"]) == sorted(ids)

    ledger_before = (tmp_path / "ledger.jsonl").read_bytes()
    assert run("link", "ci", "--report", tmp_path / "r1.json", env=env).returncode == 0
    assert run("minid", "tombstone", ids[1], env=env).returncode == 0
    p, doc = run_json("link", "verify", ids[2], env=env)
    assert p.returncode == 1 and doc["failures"] == [ids[1]]
    assert run("link", "ci", "--report", tmp_path / "r2.json", env=env).returncode == 1
    assert run("link", "ci", "--report", tmp_path / "r3.json", env=env).returncode == 1
    assert (tmp_path / "r2.json").read_bytes() == (tmp_path / "r3.json").read_bytes()
    assert (tmp_path / "ledger.jsonl").read_bytes() == ledger_before


def test_dict_batch_mode(tmp_path):
    env = {"CUFLINKS_DICTIONARY": str(tmp_path / "vocab")}
    assert run("dict", "add", "complete", "--field", "status", "--id", "NCIT:C25250", env=env).returncode == 0
    assert run("dict", "add", "in-progress", "--field", "status", env=env).returncode == 0
    p, doc = run_json("dict", "check", "-", "--field", "status", env=env, stdin="\n".join(STATUS_VARIANTS) + "\n")
    assert p.returncode == 1
    res = doc["results"]
    assert [r["value"] for r in res if r["ok"]] == ["complete"]
    assert sum(1 for r in res if not r["ok"] and r["suggestions"]) >= 5
    p, doc = run_json("dict", "check", "x", "--field", "colour", env=env)
    assert p.returncode == 2

    assert run("dict", "add", "done", "--field", "status", "--alias-of", "complete", env=env).returncode == 0
    p, doc = run_json("dict", "check", "done", "--field", "status", env=env)
    assert p.returncode == 0 and doc["results"][0]["substituted"] and doc["results"][0]["term"] == "complete"
    changes = (tmp_path / "vocab" / "changes.jsonl").read_text().splitlines()
    assert [json.loads(c)["term"] for c in changes] == ["complete", "in-progress", "done"]


def test_config_precedence(tmp_path):
    data = make_tree(tmp_path, {"f": "x\n"}) / "f"
    (tmp_path / "cuflinks.toml").write_text('# project settings\nresolver = "from-file.log"\nactor = "file"\n')
    mint = ["minid", "mint", "--title", "t", "--locations", data.as_uri(), "--from-file", data]
    assert run(*mint, cwd=tmp_path).returncode == 0
    assert (tmp_path / "from-file.log").exists()
    assert run(*mint, cwd=tmp_path, env={"CUFLINKS_RESOLVER": "from-env.log"}).returncode == 0
    assert (tmp_path / "from-env.log").exists()
    p, doc = run_json("--resolver", "from-flag.log", *mint, cwd=tmp_path, env={"CUFLINKS_RESOLVER": "from-env.log"})
    assert (tmp_path / "from-flag.log").exists()
    assert doc["author"] == "file"

    (tmp_path / "cuflinks.toml").write_text('resolver = unquoted\n')
    p, doc = run_json(*mint, cwd=tmp_path)
    assert p.returncode == 1 and doc["kind"] == "parse"
    (tmp_path / "cuflinks.toml").write_text('colour = "blue"\n')
    assert run(*mint, cwd=tmp_path).returncode == 2


def test_usage_errors_exit_2(tmp_path):
    assert run().returncode == 2
    assert run("bag", "validate").returncode == 2
    assert run("bag", "validate", tmp_path, "--fast", "--full").returncode == 2
    assert run("minid", "resolve", "minid:fPTs86M7VTyb").returncode == 2  # no resolver configured
    assert run("--version").returncode == 0
