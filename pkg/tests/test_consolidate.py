"""Majority-vote consolidation, tie-breaks, and quality metrics."""

from collections import Counter

import pytest
from hypothesis import given, strategies as st

from matchloop.consolidate import (GoldenRecords, cluster_prf, column_counts,
                                   consolidate, golden_change_count,
                                   golden_value, gr_accuracy)
from matchloop.data import Dataset, GroundTruth, Record


def _dataset(rows, schema=("name", "city")):
    records = [Record(rid, "s0", tuple(values)) for rid, *values in rows]
    return Dataset(schema, records)


def test_golden_value_majority():
    counts = Counter()
    assert golden_value(["Acme", "Acme", "Acme Corp"], counts) == "Acme"


def test_golden_value_skips_empty():
    assert golden_value(["", "X", ""], Counter()) == "X"
    assert golden_value(["", ""], Counter()) == ""


def test_golden_value_tie_breaks_to_global_frequency():
    counts = Counter({"Acme Corp": 5, "Acme": 2})
    assert golden_value(["Acme", "Acme Corp"], counts) == "Acme Corp"


def test_golden_value_tie_breaks_lexicographic():
    counts = Counter({"B": 3, "A": 3})
    assert golden_value(["B", "A"], counts) == "A"


def test_consolidate_uses_global_counts_for_ties():
    dataset = _dataset([
        ("r1", "Acme", "Boston"),
        ("r2", "Acme", "boston"),
        ("r3", "Acme Corp", "Boston"),
    ])
    clusters = [frozenset({"r1", "r3"}), frozenset({"r2"})]
    goldens = consolidate(dataset, clusters)
    # Name votes tie 1-1 inside {r1, r3}; "Acme" wins on global frequency.
    assert goldens.by_cluster[frozenset({"r1", "r3"})] == ("Acme", "Boston")
    assert goldens.per_record["r1"] == goldens.per_record["r3"]
    assert goldens.per_record["r2"] == ("Acme", "boston")


def test_consolidate_order_invariant():
    dataset = _dataset([
        ("r1", "Acme", "Boston"),
        ("r2", "Acme", "boston"),
        ("r3", "Acme Corp", "Boston"),
    ])
    clusters = [frozenset({"r1", "r2", "r3"})]
    a = consolidate(dataset, clusters)
    b = consolidate(dataset, list(reversed(clusters)), column_counts(dataset))
    assert a.by_cluster == b.by_cluster
    assert a.per_record == b.per_record


def _goldens(assignment):
    return GoldenRecords({}, dict(assignment))


def test_golden_change_count():
    before = _goldens({"r1": ("A",), "r2": ("A",), "r3": ("B",)})
    after = _goldens({"r1": ("A",), "r2": ("C",), "r3": ("B",)})
    assert golden_change_count(before, after) == 1
    assert golden_change_count(before, before) == 0
    # Disappeared records count as changes too.
    gone = _goldens({"r1": ("A",)})
    assert golden_change_count(before, gone) == 2
    assert golden_change_count(gone, before) == 2


def test_gr_accuracy():
    truth = GroundTruth({"r1": "e1", "r2": "e1", "r3": "e2"},
                        {"e1": ("A",), "e2": ("B",)})
    goldens = _goldens({"r1": ("A",), "r2": ("X",), "r3": ("B",)})
    assert gr_accuracy(goldens, truth) == pytest.approx(2 / 3)
    assert gr_accuracy(_goldens({}), truth) == 0.0


def test_cluster_prf():
    truth = GroundTruth({"r1": "e1", "r2": "e1", "r3": "e2"},
                        {"e1": ("A",), "e2": ("B",)})
    perfect = [frozenset({"r1", "r2"}), frozenset({"r3"})]
    assert cluster_prf(perfect, truth) == (1.0, 1.0, 1.0)
    shattered = [frozenset({"r1"}), frozenset({"r2"}), frozenset({"r3"})]
    p, r, f1 = cluster_prf(shattered, truth)
    assert p == pytest.approx(1 / 3)
    assert r == pytest.approx(1 / 2)
    assert f1 == pytest.approx(0.4)
    merged = [frozenset({"r1", "r2", "r3"})]
    assert cluster_prf(merged, truth) == (0.0, 0.0, 0.0)


values_lists = st.lists(
    st.text(alphabet="abAB ", max_size=4), min_size=1, max_size=6)


@given(values_lists)
def test_golden_value_is_a_most_common_value(values):
    counts = Counter(v for v in values if v)
    chosen = golden_value(values, Counter())
    if not counts:
        assert chosen == ""
    else:
        assert counts[chosen] == max(counts.values())
