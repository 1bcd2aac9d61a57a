import hashlib
import http.server
import json
import os
import subprocess
import threading
from pathlib import Path

import pytest

BIN = os.environ.get("CUFLINKS_BIN", "cuflinks")


def run(*args, cwd=None, env=None, stdin=None):
    e = {k: v for k, v in os.environ.items() if not k.startswith("CUFLINKS_") and k != "SOURCE_DATE_EPOCH"}
    e.update(env or {})
    return subprocess.run([BIN, *map(str, args)], cwd=cwd, env=e, input=stdin,
                          capture_output=True, text=True, timeout=60)


def run_json(*args, **kw):
    p = run("--json", *args, **kw)
    return p, json.loads(p.stdout)


def snapshot(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def make_tree(root, files):
    root = Path(root)
    for rel, data in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data if isinstance(data, bytes) else data.encode())
    return root


def make_holey(bag, urls):
    """Turns payload files of a complete bag into fetch.txt entries, as a remote producer would."""
    bag = Path(bag)
    lines = []
    for rel, url in urls.items():
        f = bag / rel
        lines.append(f"{url}\t{f.stat().st_size}\t{rel}\n")
        f.unlink()
    (bag / "fetch.txt").write_text("".join(lines))
    for tm in bag.glob("tagmanifest-*.txt"):
        alg = tm.name[len("tagmanifest-"):-4]
        digest = hashlib.new(alg, (bag / "fetch.txt").read_bytes()).hexdigest()
        rows = [l for l in tm.read_text().splitlines() if not l.endswith("  fetch.txt")]
        rows.append(f"{digest}  fetch.txt")
        tm.write_text("\n".join(sorted(rows, key=lambda r: r.split("  ", 1)[1])) + "\n")


class Fixture:
    def __init__(self):
        self.routes = {}
        self.hits = {}
        fixture = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_GET(self):
                fixture.hits[self.path] = fixture.hits.get(self.path, 0) + 1
                body = fixture.routes.get(self.path)
                if body is None:
                    self.send_response(404)
                    self.end_headers()
                    return
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *a):
                pass

        self.server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def url(self, path):
        return f"http://127.0.0.1:{self.server.server_address[1]}{path}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def http_fixture():
    f = Fixture()
    yield f
    f.close()
