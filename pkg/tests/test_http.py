import json
import threading
import urllib.error
import urllib.request

import pytest

from jacette.actions import ActionSpec, ActionTable
from jacette.corpus import CORPUS_DIR, load_store
from jacette.http_api import ApiServer
from jacette.lang import parse
from jacette.runtime import Runtime

DAILY_WALKER = (CORPUS_DIR / "daily_summary.jac").read_text(encoding="utf-8").split("walker ", 1)[1]
DAILY_WALKER = "walker " + DAILY_WALKER


def call(port, method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(f"http://127.0.0.1:{port}{path}", data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


@pytest.fixture
def served():
    rt = Runtime(parse((CORPUS_DIR / "myca.jac").read_text(encoding="utf-8")))
    keys = load_store(rt.graph, json.loads((CORPUS_DIR / "daily_summary.store.json").read_text()))
    with ApiServer(rt) as api:
        yield api.port, keys, rt
    rt.close()


def test_inject_run_remove_flow(served):
    port, keys, _ = served
    status, body = call(port, "GET", "/walker")
    assert status == 200 and "daily_summary" not in body["walkers"]
    assert call(port, "POST", "/walker/inject", {"source": DAILY_WALKER}) == (200, {"walker": "daily_summary"})
    status, body = call(port, "POST", "/walker/run", {"walker": "daily_summary", "start_node": keys["mon"]})
    assert status == 200
    golden = json.loads((CORPUS_DIR / "daily_summary.golden.json").read_text())
    assert body["report"] == golden["report"]
    assert body["status"] == "finished"
    assert call(port, "DELETE", "/walker/daily_summary") == (200, {"removed": "daily_summary"})
    status, body = call(port, "POST", "/walker/run", {"walker": "daily_summary", "start_node": keys["mon"]})
    assert status == 404 and body["error"]["type"] == "UnknownWalker"


@pytest.mark.parametrize("method,path,body,code,kind", [
    ("POST", "/walker/run", {"walker": "list_days", "start_node": 999}, 404, "NotFound"),
    ("POST", "/walker/run", {"walker": "list_days"}, 400, "BadRequest"),
    ("POST", "/walker/run", {"walker": "zzz", "start_node": 1}, 404, "UnknownWalker"),
    ("POST", "/walker/inject", {"source": "node x {}"}, 400, "NotAWalker"),
    ("POST", "/walker/inject", {"source": "walker x { report 1 }"}, 400, "JacSyntaxError"),
    ("POST", "/walker/inject", {"source": "walker x { take -->:nope; }"}, 400, "ResolutionError"),
    ("POST", "/walker/inject", {}, 400, "BadRequest"),
    ("DELETE", "/walker/zzz", None, 404, "UnknownWalker"),
    ("GET", "/jsorc/status", None, 404, "NotFound"),
    ("GET", "/nowhere", None, 404, "NotFound"),
])
def test_error_mapping(served, method, path, body, code, kind):
    port, _, _ = served
    status, reply = call(port, method, path, body)
    assert status == code
    assert reply["error"]["type"] == kind


def test_bad_json_body(served):
    port, _, _ = served
    req = urllib.request.Request(f"http://127.0.0.1:{port}/walker/run", data=b"{nope", method="POST")
    with pytest.raises(urllib.error.HTTPError) as info:
        urllib.request.urlopen(req, timeout=10)
    assert info.value.code == 400


def test_runtime_errors_are_422(served):
    port, keys, _ = served
    call(port, "POST", "/walker/inject", {"source": "walker bad { report here.date + 1; }"})
    status, body = call(port, "POST", "/walker/run", {"walker": "bad", "start_node": keys["mon"]})
    assert status == 422 and body["error"]["type"] == "RuntimeTypeError"


def test_shutdown_drains_in_flight_request():
    gate, entered = threading.Event(), threading.Event()

    def wait():
        entered.set()
        gate.wait(10)
        return "done"

    table = ActionTable()
    table.register(ActionSpec("wait", impl=wait))
    rt = Runtime(parse("node n { has v; } walker slow { can wait; report wait(); }"), actions=table)
    nid = rt.graph.create_node("n", {"v": 1})
    api = ApiServer(rt).start()
    out = {}
    t = threading.Thread(target=lambda: out.update(r=call(api.port, "POST", "/walker/run",
                                                          {"walker": "slow", "start_node": nid})))
    t.start()
    assert entered.wait(10)
    stopper = threading.Thread(target=api.shutdown)
    stopper.start()
    gate.set()
    t.join(10)
    stopper.join(10)
    assert out["r"][0] == 200 and out["r"][1]["report"] == ["done"]
