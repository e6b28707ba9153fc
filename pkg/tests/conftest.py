import sys

import pytest

from jacette.graph import Graph, Schema
from jacette.lang import parse
from jacette.runtime import Runtime
from jacette.storage import MemoryBackend, TierConfig, TieredStore

CHAIN_SOURCE = """
node n { has v; }
node secret access(process) { has v; }
edge e {}
edge big { has note; }

walker count { has n; n = n + 1; take -->; report n; }
walker stop { disengage; }
walker process { take -->; report here.v; }
walker analyze { take -->; report here.v; }
"""


def make_graph(source=CHAIN_SOURCE, threshold=64, capacity=1024, path=None):
    program = parse(source)
    tiers = TierConfig(capacity, threshold, str(path) if path else None)
    store = TieredStore(tiers) if path else TieredStore(tiers, MemoryBackend())
    return Graph(Schema.from_program(program), store)


def make_runtime(source=CHAIN_SOURCE, threshold=64, capacity=1024, path=None, **kw):
    program = parse(source)
    graph = make_graph(source, threshold, capacity, path)
    return Runtime(program, graph, **kw)


def build_chain(graph, length, edge_type="e", node_type="n"):
    ids = []
    with graph.transaction() as s:
        for i in range(length):
            ids.append(s.create_node(node_type, {"v": i + 1}))
            if i:
                s.create_edge(edge_type, ids[-2], ids[-1])
    return ids


@pytest.fixture
def runtime():
    rt = make_runtime()
    yield rt
    rt.close()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
