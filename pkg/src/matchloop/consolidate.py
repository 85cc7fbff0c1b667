"""Golden record construction and quality metrics.

Each cluster is consolidated into one golden record by per-attribute
majority vote over non-empty values.  Vote ties break toward the value
that is globally more frequent in the dataset column, then toward the
lexicographically smallest value, so consolidation is deterministic.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .data import Dataset, GroundTruth


def golden_value(values: list[str], global_counts: Counter) -> str:
    """Majority vote over non-empty values with deterministic tie-breaks."""
    non_empty = [v for v in values if v]
    if not non_empty:
        return ""
    counts = Counter(non_empty)
    return min(counts, key=lambda v: (-counts[v], -global_counts[v], v))


@dataclass
class GoldenRecords:
    """Golden record per cluster plus the per-record assignment."""

    by_cluster: dict[frozenset[str], tuple[str, ...]]
    per_record: dict[str, tuple[str, ...]]

    def record_golden(self, record_id: str) -> tuple[str, ...]:
        return self.per_record[record_id]


def column_counts(dataset: Dataset) -> list[Counter]:
    """Global value frequency per attribute column (tie-break input)."""
    return [Counter(v for v in dataset.column(a) if v) for a in dataset.schema]


def consolidate(dataset: Dataset, clusters: list[frozenset[str]],
                counts: list[Counter] | None = None) -> GoldenRecords:
    """Build golden records for every cluster in the partition."""
    if counts is None:
        counts = column_counts(dataset)
    by_cluster: dict[frozenset[str], tuple[str, ...]] = {}
    per_record: dict[str, tuple[str, ...]] = {}
    for cluster in clusters:
        members = sorted(cluster)
        rows = [dataset.record(r).values for r in members]
        golden = tuple(
            golden_value([row[col] for row in rows], counts[col])
            for col in range(len(dataset.schema))
        )
        by_cluster[cluster] = golden
        for r in members:
            per_record[r] = golden
    return GoldenRecords(by_cluster, per_record)


def golden_change_count(before: GoldenRecords, after: GoldenRecords) -> int:
    """Number of records whose assigned golden record changed.

    Counted per record over the multiset of assignments, so a cluster split
    that rewrites five records' goldens counts five changes.
    """
    changed = 0
    for record_id, golden in after.per_record.items():
        if before.per_record.get(record_id) != golden:
            changed += 1
    for record_id in before.per_record:
        if record_id not in after.per_record:
            changed += 1
    return changed


def gr_accuracy(goldens: GoldenRecords, truth: GroundTruth) -> float:
    """Fraction of records whose assigned golden equals the true golden."""
    if not goldens.per_record:
        return 0.0
    correct = sum(
        1 for record_id, golden in goldens.per_record.items()
        if golden == truth.true_golden(record_id)
    )
    return correct / len(goldens.per_record)


def cluster_prf(clusters: list[frozenset[str]], truth: GroundTruth
                ) -> tuple[float, float, float]:
    """Cluster precision, recall, and F1.

    A computed cluster is correct only when it equals some true entity's
    full record set exactly.
    """
    true_sets = truth.entity_sets()
    correct = sum(1 for c in clusters if c in true_sets)
    precision = correct / len(clusters) if clusters else 0.0
    recall = correct / len(true_sets) if true_sets else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1
