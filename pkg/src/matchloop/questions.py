"""Question types, question pools, and the oversized-cluster hierarchy.

Three question kinds circulate through the engine:

* training: approve or reject a similarity rule ("if jaccard(name) >= 0.5
  then match"), shown with sampled covered pairs;
* cluster: approve a proposed cluster or split it into sub-clusters;
* transformation: approve or reject a mined value rewrite.

Every question carries a canonical key; a key asked once is never asked
again, which both prevents re-asking and makes answer logs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .matcher import MatcherState, Pair, RulePredicate, canonical_pair
from .transforms import TransformationRule

MATCH_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)
NON_MATCH_THRESHOLDS = (0.1, 0.2)
SAMPLE_SIZE = 10


@dataclass(frozen=True)
class TrainingRuleQuestion:
    predicate: RulePredicate
    coverage: tuple[Pair, ...]
    samples: tuple[Pair, ...]
    # How reliable the rule's author believes it to be; the generated grid
    # uses one shared default, human-authored rules bring their own.
    confidence: float = 0.8

    kind = "training"

    @property
    def size(self) -> int:
        return len(self.coverage)

    def key(self) -> tuple:
        p = self.predicate
        return ("training", p.attribute, p.function, p.threshold, p.direction)

    def footprint(self) -> frozenset[str]:
        return frozenset(r for pair in self.coverage for r in pair)

    def describe(self) -> str:
        return self.predicate.describe()


@dataclass(frozen=True)
class ClusterQuestion:
    records: frozenset[str]
    # Pair probabilities captured when the question was generated; answer
    # statistics always refer to the pre-answer state.
    pair_probabilities: tuple[tuple[Pair, float], ...]
    hierarchy_node_count: int | None = None

    kind = "cluster"

    @property
    def size(self) -> int:
        return len(self.records)

    def key(self) -> tuple:
        return ("cluster", tuple(sorted(self.records)))

    def footprint(self) -> frozenset[str]:
        return self.records

    def pairs(self) -> list[Pair]:
        return [p for p, _ in self.pair_probabilities]

    def probability_of(self, pair: Pair) -> float:
        for p, prob in self.pair_probabilities:
            if p == pair:
                return prob
        raise KeyError(pair)

    def describe(self) -> str:
        return "cluster {" + ", ".join(sorted(self.records)) + "}"


@dataclass(frozen=True)
class TransformationQuestion:
    rule: TransformationRule
    sample_records: tuple[str, ...]
    affected_count: int = 1

    kind = "transformation"

    @property
    def size(self) -> int:
        """Records the rule would rewrite (what the reviewer must look at)."""
        return self.affected_count

    def key(self) -> tuple:
        return self.rule.key()

    def footprint(self) -> frozenset[str]:
        return frozenset(self.sample_records)

    def describe(self) -> str:
        return self.rule.describe()


Question = TrainingRuleQuestion | ClusterQuestion | TransformationQuestion


class AskedRegistry:
    """Canonical keys of every question ever asked in a session."""

    def __init__(self, keys: set[tuple] | None = None):
        self._keys: set[tuple] = set(keys or ())

    def __contains__(self, key: tuple) -> bool:
        return key in self._keys

    def add(self, key: tuple) -> None:
        self._keys.add(key)

    def snapshot(self) -> list[tuple]:
        return sorted(self._keys)


def cluster_pairs(records: frozenset[str]) -> list[Pair]:
    members = sorted(records)
    return [canonical_pair(members[i], members[j])
            for i in range(len(members)) for j in range(i + 1, len(members))]


def sample_pairs(pairs: list[Pair], similarities: np.ndarray, n: int,
                 rng: np.random.Generator) -> list[Pair]:
    """Sample up to n pairs, stratified over similarity ranges.

    Strata are [0, 0.5], (0.5, 0.6], ..., (0.9, 1.0]; slots are allocated
    proportionally to stratum population, with remainders going to the
    largest strata first.
    """
    if len(pairs) <= n:
        return list(pairs)
    bounds = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    strata: list[list[int]] = [[] for _ in range(len(bounds) + 1)]
    for i, s in enumerate(similarities):
        stratum = 0
        for k, hi in enumerate(bounds):
            if s <= hi:
                stratum = k
                break
        else:
            stratum = len(bounds)
        strata[stratum].append(i)
    total = len(pairs)
    alloc = [n * len(s) // total for s in strata]
    remaining = n - sum(alloc)
    order = sorted(range(len(strata)), key=lambda k: (-len(strata[k]), k))
    for k in order:
        if remaining == 0:
            break
        if alloc[k] < len(strata[k]):
            alloc[k] += 1
            remaining -= 1
    chosen: list[int] = []
    for k, members in enumerate(strata):
        take = min(alloc[k], len(members))
        if take == 0:
            continue
        if take == len(members):
            chosen.extend(members)
        else:
            picked = rng.choice(len(members), size=take, replace=False)
            chosen.extend(members[i] for i in sorted(picked))
    return [pairs[i] for i in sorted(chosen)]


GENERATED_RULE_CONFIDENCE = 0.8


def generate_training_rules(state: MatcherState, asked: AskedRegistry,
                            rng: np.random.Generator,
                            match_thresholds=MATCH_THRESHOLDS,
                            non_match_thresholds=NON_MATCH_THRESHOLDS,
                            user_rules: list[tuple[RulePredicate, float]] | None = None
                            ) -> list[TrainingRuleQuestion]:
    """The grid of candidate similarity rules with non-empty coverage.

    ``user_rules`` are human-authored (predicate, confidence) pairs asked
    alongside the generated grid.
    """
    candidates: list[tuple[RulePredicate, float]] = list(user_rules or ())
    for attribute in state.dataset.schema:
        function = state.similarity.function_name(attribute)
        grids = [("match", match_thresholds), ("non_match", non_match_thresholds)]
        for direction, thresholds in grids:
            for threshold in thresholds:
                candidates.append((
                    RulePredicate(attribute, function, threshold, direction),
                    GENERATED_RULE_CONFIDENCE,
                ))
    questions = []
    seen: set[tuple] = set()
    for predicate, confidence in candidates:
        q_key = ("training", predicate.attribute, predicate.function,
                 predicate.threshold, predicate.direction)
        if q_key in asked or q_key in seen:
            continue
        seen.add(q_key)
        coverage = state.rule_coverage(predicate)
        if not coverage:
            continue
        if predicate.function == state.similarity.function_name(predicate.attribute):
            column = state.feature_column(predicate.attribute)
            sims = np.array([column[state.pair_index[p]] for p in coverage])
        else:
            sims = np.full(len(coverage), predicate.threshold)
        samples = sample_pairs(coverage, sims, SAMPLE_SIZE, rng)
        questions.append(TrainingRuleQuestion(
            predicate, tuple(coverage), tuple(samples), confidence))
    return questions


def generate_transformation_questions(rules: list[TransformationRule],
                                      dataset: Dataset, asked: AskedRegistry
                                      ) -> list[TransformationQuestion]:
    from .transforms import affected_records
    questions = []
    for rule in rules:
        if rule.key() in asked:
            continue
        touched = affected_records(dataset, rule)
        if not touched:
            continue
        questions.append(TransformationQuestion(
            rule, tuple(touched[:SAMPLE_SIZE]), len(touched)))
    return questions


# --------------------------------------------------------------------------
# Oversized clusters
# --------------------------------------------------------------------------

class HierarchyNode:
    def __init__(self, records: tuple[str, ...]):
        self.records = tuple(sorted(records))
        self.children: list[HierarchyNode] = []
        self.resolved = False  # approved, collapsed to a representative
        self.removed = False   # split by the reviewer, out of the tree

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def settled(self) -> bool:
        return self.resolved or self.removed


class ClusterHierarchy:
    """Recursive split of an oversized cluster into reviewable nodes.

    Children are formed by raising the probability threshold until the
    cluster breaks into between 2 and ``max_leaf`` parts; when no threshold
    manages that (for example a chain of uniform probabilities), records are
    chunked into evenly sized groups instead.  Reviewing then proceeds
    bottom-up: an approved leaf collapses to a single representative inside
    its parent, so each node is always reviewable as at most ``max_leaf``
    units.
    """

    def __init__(self, records: frozenset[str], pair_probability,
                 base_threshold: float = 0.5, max_leaf: int = 10):
        self.max_leaf = max_leaf
        self.pair_probability = pair_probability
        self.root = self._build(tuple(sorted(records)), base_threshold)
        self.node_count = self._count(self.root)

    def _components(self, records: tuple[str, ...], threshold: float
                    ) -> list[tuple[str, ...]]:
        from .matcher import UnionFind
        uf = UnionFind()
        for r in records:
            uf.find(r)
        for i in range(len(records)):
            for j in range(i + 1, len(records)):
                pair = canonical_pair(records[i], records[j])
                if self.pair_probability(pair) > threshold:
                    uf.union(pair[0], pair[1])
        groups: dict[str, list[str]] = {}
        for r in records:
            groups.setdefault(uf.find(r), []).append(r)
        return sorted((tuple(sorted(g)) for g in groups.values()), key=lambda g: g[0])

    def _build(self, records: tuple[str, ...], threshold: float) -> HierarchyNode:
        node = HierarchyNode(records)
        if len(records) == 1:
            node.resolved = True  # a lone record needs no review
            return node
        if len(records) <= self.max_leaf:
            return node
        probs = sorted({
            self.pair_probability(canonical_pair(records[i], records[j]))
            for i in range(len(records)) for j in range(i + 1, len(records))
        })
        parts: list[tuple[str, ...]] | None = None
        for tau in probs:
            if tau <= threshold:
                continue
            components = self._components(records, tau)
            if 2 <= len(components) <= self.max_leaf:
                parts = components
                break
            if len(components) > self.max_leaf:
                break
        if parts is None:
            # Inseparable by thresholding; chunk into even groups.
            k = -(-len(records) // self.max_leaf)
            base = len(records) // k
            extra = len(records) % k
            parts = []
            pos = 0
            for i in range(k):
                size = base + (1 if i < extra else 0)
                parts.append(records[pos:pos + size])
                pos += size
        node.children = [self._build(p, threshold) for p in parts]
        return node

    def _count(self, node: HierarchyNode) -> int:
        return 1 + sum(self._count(c) for c in node.children)

    def _walk(self, node: HierarchyNode):
        yield node
        for c in node.children:
            yield from self._walk(c)

    def _review_set(self, node: HierarchyNode) -> tuple[str, ...] | None:
        """The record group reviewing this node would present, if any.

        A leaf presents its records.  An internal node becomes reviewable
        once every child is settled; it presents one representative (the
        smallest record id) per approved child.  Fewer than two remaining
        representatives leave nothing to review.
        """
        if node.settled:
            return None
        if node.is_leaf:
            return node.records if len(node.records) >= 2 else None
        if not all(c.settled for c in node.children):
            return None
        reps = tuple(sorted(c.records[0] for c in node.children if c.resolved))
        return reps if len(reps) >= 2 else None

    def reviewable_nodes(self) -> list[tuple[str, ...]]:
        out = []
        for node in self._walk(self.root):
            group = self._review_set(node)
            if group is not None:
                out.append(group)
        return out

    def _find(self, records: tuple[str, ...]) -> HierarchyNode | None:
        for node in self._walk(self.root):
            if self._review_set(node) == records:
                return node
        return None

    def record_approval(self, records: tuple[str, ...]) -> None:
        node = self._find(records)
        if node is not None:
            node.resolved = True

    def record_split(self, records: tuple[str, ...]) -> None:
        """A split node leaves the tree; its records re-enter review through
        the regular clustering once the model absorbs the new labels."""
        node = self._find(records)
        if node is not None:
            node.removed = True

    def to_json(self) -> dict:
        """Snapshot of the tree and its review progress.  The structure is
        frozen at build time, so probabilities need not be stored."""
        def dump(node: HierarchyNode) -> dict:
            return {"records": list(node.records),
                    "resolved": node.resolved, "removed": node.removed,
                    "children": [dump(c) for c in node.children]}
        return {"max_leaf": self.max_leaf, "root": dump(self.root)}

    @classmethod
    def from_json(cls, payload: dict) -> "ClusterHierarchy":
        def load(raw: dict) -> HierarchyNode:
            node = HierarchyNode(tuple(raw["records"]))
            node.resolved = raw["resolved"]
            node.removed = raw["removed"]
            node.children = [load(c) for c in raw["children"]]
            return node
        obj = object.__new__(cls)
        obj.max_leaf = payload["max_leaf"]
        obj.pair_probability = None
        obj.root = load(payload["root"])
        obj.node_count = obj._count(obj.root)
        return obj


def generate_cluster_questions(clusters: list[frozenset[str]],
                               state: MatcherState, asked: AskedRegistry,
                               max_direct_size: int = 30,
                               hierarchy_max_leaf: int = 10,
                               hierarchies: dict | None = None,
                               threshold: float = 0.5,
                               pair_probability=None
                               ) -> list[ClusterQuestion]:
    """One question per multi-record cluster, or per hierarchy node for
    clusters too large to review in one screen.

    ``pair_probability`` defaults to the matcher's; callers holding
    reviewer judgments pass an overlay so settled pairs read as certain.
    """
    probability = pair_probability or state.pair_probability
    questions = []
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        if len(cluster) <= max_direct_size:
            groups = [tuple(sorted(cluster))]
        else:
            if hierarchies is not None and cluster in hierarchies:
                hierarchy = hierarchies[cluster]
            else:
                hierarchy = ClusterHierarchy(cluster, probability,
                                             threshold, hierarchy_max_leaf)
                if hierarchies is not None:
                    hierarchies[cluster] = hierarchy
            groups = hierarchy.reviewable_nodes()
        for group in groups:
            key = ("cluster", group)
            if key in asked:
                continue
            recs = frozenset(group)
            pp = tuple((p, probability(p)) for p in cluster_pairs(recs))
            questions.append(ClusterQuestion(recs, pp))
    return questions
