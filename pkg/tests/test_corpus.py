import json

import pytest

from conftest import make_graph
from jacette.corpus import CORPUS_DIR, RUNS, corpus_check, entry_names, execute, load_store
from jacette.storage import TierConfig


def test_every_entry_passes():
    results, missing = corpus_check()
    assert missing == []
    assert [r.name for r in results if not r.ok] == []


@pytest.mark.parametrize("name", sorted(RUNS))
def test_goldens_match_and_fusion_does_not_matter(name):
    golden = json.loads((CORPUS_DIR / f"{name}.golden.json").read_text(encoding="utf-8"))
    for threshold in (0, 64):
        assert execute(name, runtime_kwargs={"tiers": TierConfig(fast_edge_threshold=threshold)}) == golden


def test_access_denied_golden_names_both_types():
    golden = json.loads((CORPUS_DIR / "access_denied.golden.json").read_text(encoding="utf-8"))
    assert golden["error"]["type"] == "AccessDenied"
    assert golden["error"]["walker"] == "analyze"
    assert golden["error"]["node_type"] == "ledger"


def test_expected_entries_present():
    assert {"daily_summary", "access_denied", "count_chain", "every_production", "myca"} <= set(entry_names())


@pytest.mark.parametrize("items", [
    [{"kind": "node", "key": "a", "type": "n", "context": {"v": 1}},
     {"kind": "node", "key": "a", "type": "n", "context": {"v": 2}}],
    [{"kind": "blob", "key": "a"}],
])
def test_bad_store_files(items):
    with pytest.raises(ValueError):
        load_store(make_graph(), items)
