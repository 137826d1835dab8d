import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer
from importlib import resources

import pytest

from ecpart.cli import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main, parse_domain_spec, UsageError
from ecpart.ir.parser import parse_module

FIX = resources.files("ecpart") / "fixtures"


def fixture_path(name):
    return str(FIX / name)


@pytest.fixture
def f1_dataset(tmp_path):
    out = tmp_path / "f1.json"
    assert main(["analyze", "--ir", fixture_path("f1.mir"), "--out", str(out)]) == EXIT_OK
    return out


def test_usage_errors(tmp_path, capsys):
    assert main(["analyze", "--ir", fixture_path("f1.mir"), "--loop-bound", "0"]) == EXIT_USAGE
    assert main(["analyze", "--ir", fixture_path("f1.mir"), "--rules", "9"]) == EXIT_USAGE
    assert main(["analyze"]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["cluster", "--ir", fixture_path("f1.mir"), "--bucket-width", "0"]) == EXIT_USAGE


def test_analysis_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.mir"
    bad.write_text("func f( {\n")
    assert main(["analyze", "--ir", str(bad)]) == EXIT_ERROR
    assert "IrParseError" in capsys.readouterr().err


def test_verify_ok(f1_dataset, tmp_path):
    report = tmp_path / "report.json"
    assert main(["verify", str(f1_dataset), "--domain", "pin=0..0x5FF", "--out", str(report)]) == EXIT_OK
    assert json.loads(report.read_text())["ok"] is True


def test_verify_mismatch_after_tampering(f1_dataset, tmp_path):
    doc = json.loads(f1_dataset.read_text())
    # widen the middle class by one value past 0x2B0
    middle = doc["functions"][0]["classes"][1]
    assert "0x2b0" in middle["condition"]
    middle["condition"] = middle["condition"].replace("0x2b0", "0x2b1")
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(doc))
    rc = main(["verify", str(tampered), "--domain", "pin=0..0x5FF", "--out", str(tmp_path / "r.json")])
    assert rc == EXIT_MISMATCH


def test_verify_unknown_function(f1_dataset):
    assert main(["verify", str(f1_dataset), "--function", "nope"]) == EXIT_USAGE


@pytest.mark.parametrize("spec,expected", [
    ("pin=0..3", ("pin", [0, 1, 2, 3])),
    ("a=0..0x10:8", ("a", [0, 8, 16])),
    ("m=0,2", ("m", [0, 2])),
])
def test_domain_spec(spec, expected):
    assert parse_domain_spec(spec) == expected


@pytest.mark.parametrize("spec", ["pin", "pin=3..1", "pin=x", "=1", "a=0..4:0"])
def test_bad_domain_spec(spec):
    with pytest.raises(UsageError):
        parse_domain_spec(spec)


def test_lift_round_trip(tmp_path):
    out, bundle = tmp_path / "fw.mir", tmp_path / "bundle.json"
    rc = main(["lift", "--elf", fixture_path("firmware/fw.elf"), "--out", str(out), "--bundle-out", str(bundle)])
    assert rc == EXIT_OK
    module = parse_module(out.read_text())
    assert {f.name for f in module.defined} == {"_start", "classify", "g", "level", "over_limit", "dispatch"}
    assert json.loads(bundle.read_text())["functions"]


def test_analyze_elf_with_map(tmp_path):
    out = tmp_path / "fw.json"
    rc = main(["analyze", "--elf", fixture_path("firmware/fw.elf"), "--map", fixture_path("firmware/fw.map"),
               "--function", "g", "--out", str(out)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["source"]["edges_missing_from_map"] == []
    assert [f["name"] for f in doc["functions"]] == ["g"]


def test_cluster_plan(tmp_path):
    out = tmp_path / "plan.json"
    assert main(["cluster", "--map", fixture_path("firmware/fw.map"), "--out", str(out)]) == EXIT_OK
    plan = json.loads(out.read_text())
    assert plan
    again = tmp_path / "again.json"
    main(["cluster", "--map", fixture_path("firmware/fw.map"), "--out", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_render(f1_dataset, tmp_path):
    names = tmp_path / "names.json"
    names.write_text('{"0x540": "LIMIT_HI"}')
    out = tmp_path / "f1.txt"
    assert main(["render", str(f1_dataset), "--name-map", str(names), "--out", str(out)]) == EXIT_OK
    assert "LIMIT_HI" in out.read_text()


def test_dump_queries(tmp_path):
    qdir = tmp_path / "q"
    rc = main(["analyze", "--ir", fixture_path("f1.mir"), "--out", str(tmp_path / "d.json"),
               "--dump-queries", str(qdir)])
    assert rc == EXIT_OK
    files = sorted(qdir.glob("*.smt2"))
    assert files
    body = files[0].read_text()
    assert body.startswith("; expected: ") and "(check-sat)" in body


# -- LLM sidecar ----------------------------------------------------------


class _Stub(BaseHTTPRequestHandler):
    delay = 0.0
    seen: list = []

    def do_POST(self):
        n = int(self.headers["Content-Length"])
        self.seen.append(json.loads(self.rfile.read(n)))
        time.sleep(self.delay)
        body = json.dumps({"text": "plain words"}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        try:
            self.wfile.write(body)
        except OSError:
            pass

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    handler = type("Handler", (_Stub,), {"seen": [], "delay": 0.0})
    server = HTTPServer(("127.0.0.1", 0), handler)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    yield server, handler
    server.shutdown()
    server.server_close()


def test_llm_requires_endpoint(monkeypatch):
    monkeypatch.delenv("ECPART_LLM_ENDPOINT", raising=False)
    assert main(["analyze", "--ir", fixture_path("f2.mir"), "--llm"]) == EXIT_USAGE


def test_llm_sidecar_leaves_dataset_unchanged(stub_server, monkeypatch, tmp_path):
    server, handler = stub_server
    monkeypatch.setenv("ECPART_LLM_ENDPOINT", f"http://127.0.0.1:{server.server_port}/")
    plain, with_llm = tmp_path / "plain.json", tmp_path / "llm.json"
    assert main(["analyze", "--ir", fixture_path("f2.mir"), "--out", str(plain)]) == EXIT_OK
    assert main(["analyze", "--ir", fixture_path("f2.mir"), "--out", str(with_llm), "--llm"]) == EXIT_OK
    assert plain.read_bytes() == with_llm.read_bytes()
    assert (tmp_path / "llm.json.llm.txt").read_text() == "plain words"
    assert "p1" in handler.seen[0]["prompt"]


def test_llm_timeout_falls_back(stub_server, monkeypatch, tmp_path, capsys):
    server, handler = stub_server
    handler.delay = 2.0
    monkeypatch.setenv("ECPART_LLM_ENDPOINT", f"http://127.0.0.1:{server.server_port}/")
    monkeypatch.setenv("ECPART_LLM_TIMEOUT", "0.3")
    out = tmp_path / "d.json"
    assert main(["analyze", "--ir", fixture_path("f2.mir"), "--out", str(out), "--llm"]) == EXIT_OK
    assert out.exists()
    assert not (tmp_path / "d.json.llm.txt").exists()
    assert "warning" in capsys.readouterr().err
