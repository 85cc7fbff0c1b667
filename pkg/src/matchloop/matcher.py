"""Blocking, pair features, match probabilities, and clustering.

The matcher holds a per-revision cache (:class:`MatcherState`) of candidate
pairs, their feature vectors, and their current match probabilities.  Three
refresh paths keep the cache exact without full recomputation:

* records were edited: re-block the touched records and re-featurize and
  re-predict only the pairs containing them;
* the model was retrained: re-predict every cached candidate;
* both: union of the two.

A full from-scratch rebuild must produce bit-identical results; tests lean
on that equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .data import Dataset
from .forest import RandomForestMatcher
from .similarity import SimilaritySpec, similarity_function, tokenize

Pair = tuple[str, str]


def canonical_pair(a: str, b: str) -> Pair:
    """Order a record-id pair deterministically."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TokenShareBlocking:
    """Candidates share at least one token on ``attribute``.

    Tokens whose document frequency exceeds ``max_df`` are too common to
    block on and are skipped, except that a record all of whose tokens are
    common still contributes its rarest token so it cannot drop out of
    blocking entirely.
    """

    attribute: str
    max_df: int | None = None

    def kind(self) -> str:
        return "token_share"


@dataclass(frozen=True)
class ExactValueBlocking:
    """Candidates agree exactly on a non-empty ``attribute`` value."""

    attribute: str

    def kind(self) -> str:
        return "exact_value"


BlockingRule = TokenShareBlocking | ExactValueBlocking


def _blocking_keys(rule: BlockingRule, dataset: Dataset,
                   df: dict[str, int] | None = None) -> dict[str, list[str]]:
    """Blocking keys for every record under one rule."""
    keys: dict[str, list[str]] = {}
    if isinstance(rule, ExactValueBlocking):
        for r in dataset:
            value = dataset.value(r.record_id, rule.attribute)
            keys[r.record_id] = [f"=:{value}"] if value else []
        return keys
    max_df = rule.max_df
    if max_df is None:
        max_df = max(20, len(dataset) // 10)
    for r in dataset:
        tokens = tokenize(dataset.value(r.record_id, rule.attribute))
        if not tokens:
            keys[r.record_id] = []
            continue
        kept = sorted({t for t in tokens if df is None or df[t] <= max_df})
        if not kept:
            kept = [min(set(tokens), key=lambda t: (df[t], t))]
        keys[r.record_id] = [f"t:{t}" for t in kept]
    return keys


def _token_df(rule: TokenShareBlocking, dataset: Dataset) -> dict[str, int]:
    df: dict[str, int] = {}
    for r in dataset:
        for t in set(tokenize(dataset.value(r.record_id, rule.attribute))):
            df[t] = df.get(t, 0) + 1
    return df


def generate_candidates(dataset: Dataset, rules: list[BlockingRule]) -> list[Pair]:
    """All record pairs sharing a blocking key under any rule, sorted."""
    pairs: set[Pair] = set()
    for rule in rules:
        df = _token_df(rule, dataset) if isinstance(rule, TokenShareBlocking) else None
        keys = _blocking_keys(rule, dataset, df)
        buckets: dict[str, list[str]] = {}
        for record_id in dataset.record_ids:
            for key in keys[record_id]:
                buckets.setdefault(key, []).append(record_id)
        for members in buckets.values():
            if len(members) < 2:
                continue
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    pairs.add(canonical_pair(members[i], members[j]))
    return sorted(pairs)


def featurize_pairs(dataset: Dataset, pairs: list[Pair],
                    spec: SimilaritySpec) -> np.ndarray:
    """Similarity feature matrix, one row per pair, one column per attribute."""
    n_attrs = len(dataset.schema)
    X = np.zeros((len(pairs), n_attrs))
    for col, attribute in enumerate(dataset.schema):
        fn = spec.function(attribute)
        pos = dataset.attr_position(attribute)
        cache: dict[tuple[str, str], float] = {}
        for row, (a, b) in enumerate(pairs):
            va = dataset.record(a).values[pos]
            vb = dataset.record(b).values[pos]
            key = (va, vb) if va <= vb else (vb, va)
            sim = cache.get(key)
            if sim is None:
                sim = fn(va, vb)
                cache[key] = sim
            X[row, col] = sim
    return X


class UnionFind:
    """Straightforward union-find over hashable items."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        parent = self.parent
        if x not in parent:
            parent[x] = x
            return x
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def cluster_records(record_ids: list[str], pairs: list[Pair],
                    probabilities: np.ndarray, threshold: float = 0.5
                    ) -> list[frozenset[str]]:
    """Connected components over pairs with probability above threshold.

    Returns a partition of all given records (singletons included), sorted
    by each cluster's smallest member id.
    """
    index = {r: i for i, r in enumerate(record_ids)}
    rows, cols = [], []
    for (a, b), p in zip(pairs, probabilities):
        if p > threshold:
            rows.append(index[a])
            cols.append(index[b])
    n = len(record_ids)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, set[str]] = {}
    for record_id, i in index.items():
        groups.setdefault(labels[i], set()).add(record_id)
    return sorted((frozenset(g) for g in groups.values()), key=min)


@dataclass(frozen=True)
class RulePredicate:
    """A similarity predicate: sim(attribute) >= threshold (match) or
    sim(attribute) <= threshold (non-match)."""

    attribute: str
    function: str
    threshold: float
    direction: str  # "match" | "non_match"

    def describe(self) -> str:
        op = ">=" if self.direction == "match" else "<="
        verdict = "match" if self.direction == "match" else "do not match"
        return f"if {self.function}({self.attribute}) {op} {self.threshold:g} then {verdict}"


class MatcherState:
    """Candidate pairs, features, and probabilities for one dataset revision."""

    def __init__(self, dataset: Dataset, similarity: SimilaritySpec,
                 blocking: list[BlockingRule]):
        self.similarity = similarity
        self.blocking = blocking
        self.dataset = dataset
        self.pairs: list[Pair] = generate_candidates(dataset, blocking)
        self.pair_index: dict[Pair, int] = {p: i for i, p in enumerate(self.pairs)}
        self.features: np.ndarray = featurize_pairs(dataset, self.pairs, similarity)
        self.probabilities: np.ndarray = np.zeros(len(self.pairs))
        self.model: RandomForestMatcher | None = None
        self.model_version: int = 0

    def clone(self) -> "MatcherState":
        other = object.__new__(MatcherState)
        other.similarity = self.similarity
        other.blocking = self.blocking
        other.dataset = self.dataset
        other.pairs = self.pairs
        other.pair_index = self.pair_index
        other.features = self.features
        other.probabilities = self.probabilities
        other.model = self.model
        other.model_version = self.model_version
        return other

    def feature_column(self, attribute: str) -> np.ndarray:
        return self.features[:, self.dataset.attr_position(attribute)]

    def pair_probability(self, pair: Pair) -> float:
        """Probability for any pair, cached for candidates, on demand otherwise."""
        i = self.pair_index.get(pair)
        if i is not None:
            return float(self.probabilities[i])
        X = featurize_pairs(self.dataset, [pair], self.similarity)
        if self.model is None:
            return 0.0
        return float(self.model.predict_proba(X)[0])

    def predict_all(self) -> None:
        if self.model is None or not self.pairs:
            return
        self.probabilities = self.model.predict_proba(self.features)

    def set_model(self, model: RandomForestMatcher) -> None:
        self.model = model
        self.model_version += 1
        self.predict_all()

    def apply_dataset(self, dataset: Dataset, touched: list[str]) -> None:
        """Refresh candidates, features, and probabilities after cell edits.

        Pairs not containing a touched record keep their features and
        probabilities; pairs containing one are re-blocked, re-featurized,
        and re-predicted.
        """
        if dataset.revision == self.dataset.revision:
            return
        self.dataset = dataset
        if not touched:
            return
        touched_set = set(touched)
        keep = [i for i, (a, b) in enumerate(self.pairs)
                if a not in touched_set and b not in touched_set]
        kept_pairs = [self.pairs[i] for i in keep]
        kept_features = self.features[keep]
        kept_probs = self.probabilities[keep]
        # Re-block from scratch (blocking keys are derived from values), but
        # reuse everything that does not involve a touched record.
        new_pairs = generate_candidates(dataset, self.blocking)
        kept_index = {p: i for i, p in enumerate(kept_pairs)}
        fresh = [p for p in new_pairs if p not in kept_index]
        fresh_features = featurize_pairs(dataset, fresh, self.similarity)
        if self.model is not None and fresh:
            fresh_probs = self.model.predict_proba(fresh_features)
        else:
            fresh_probs = np.zeros(len(fresh))
        self.pairs = new_pairs
        self.pair_index = {p: i for i, p in enumerate(new_pairs)}
        n_attrs = len(dataset.schema)
        self.features = np.zeros((len(new_pairs), n_attrs))
        self.probabilities = np.zeros(len(new_pairs))
        fresh_index = {p: i for i, p in enumerate(fresh)}
        for i, p in enumerate(new_pairs):
            j = kept_index.get(p)
            if j is not None:
                self.features[i] = kept_features[j]
                self.probabilities[i] = kept_probs[j]
            else:
                k = fresh_index[p]
                self.features[i] = fresh_features[k]
                self.probabilities[i] = fresh_probs[k]

    def rule_coverage(self, predicate: RulePredicate) -> list[Pair]:
        """Candidate pairs satisfying the predicate, in canonical order."""
        if predicate.function == self.similarity.function_name(predicate.attribute):
            column = self.feature_column(predicate.attribute)
        else:
            fn = similarity_function(predicate.function)
            pos = self.dataset.attr_position(predicate.attribute)
            column = np.array([
                fn(self.dataset.record(a).values[pos], self.dataset.record(b).values[pos])
                for a, b in self.pairs
            ])
        if predicate.direction == "match":
            mask = column >= predicate.threshold
        else:
            mask = column <= predicate.threshold
        return [self.pairs[i] for i in np.nonzero(mask)[0]]

    def clustering(self, threshold: float = 0.5) -> list[frozenset[str]]:
        return cluster_records(self.dataset.record_ids, self.pairs,
                               self.probabilities, threshold)
