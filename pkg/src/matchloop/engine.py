"""Pipeline state and the machine side of the review loop.

:class:`PipelineState` bundles everything the machine derives from data and
answers so far: the dataset snapshot, the labeled-pair store, the matcher
cache, the current clustering, and the golden records.  Applying an answer
produces a :class:`Delta` (new labels and/or cell edits); :func:`advance`
folds a delta into a state, retraining the model only when its training
data changed and recomputing features only for touched records.

Two kinds of labels flow through the store.  Labels derived from approved
similarity rules are training data only.  Labels from cluster answers are
the reviewer's direct judgment on those records, so besides training the
model they also pin the clustering: a pinned pair stays together (or apart)
no matter what the model later thinks.  Without that, a split cluster could
silently re-form after a retrain and the loop would never converge.

States are cheap to clone (copy-on-write by construction: every advance
replaces arrays instead of mutating them), which is what makes speculative
what-if evaluation of candidate answers affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .consolidate import GoldenRecords, column_counts, consolidate
from .data import Dataset
from .forest import RandomForestMatcher
from .matcher import (BlockingRule, ExactValueBlocking, MatcherState, Pair,
                      TokenShareBlocking, canonical_pair, cluster_records,
                      featurize_pairs)
from .oracle import Answer
from .questions import (AskedRegistry, ClusterQuestion, Question,
                        TrainingRuleQuestion, TransformationQuestion,
                        cluster_pairs)
from .similarity import SimilaritySpec
from .transforms import affected_cells


@dataclass(frozen=True)
class EngineConfig:
    """All knobs for one review session."""

    seed: int = 0
    cluster_threshold: float = 0.5
    similarity: SimilaritySpec = field(default_factory=SimilaritySpec)
    blocking: tuple[BlockingRule, ...] = ()
    n_trees: int = 24
    max_depth: int = 8
    min_leaf: int = 2
    n_bins: int = 16
    max_direct_size: int = 30
    hierarchy_max_leaf: int = 10
    # Cluster answer statistics: exact enumeration up to this many records,
    # the learned threshold method beyond.
    exact_distribution_max_records: int = 4
    split_tau_grid: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    # Candidate similarity-rule grid per attribute and direction.
    match_rule_thresholds: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    non_match_rule_thresholds: tuple[float, ...] = (0.1, 0.2)
    # Benefit inference policy.
    min_speculation_probability: float = 0.02
    pairwise_benefit_cap: int = 60

    @staticmethod
    def for_schema(schema: tuple[str, ...], key_attribute: str | None = None,
                   code_attribute: str | None = None, **overrides) -> "EngineConfig":
        """A sensible config for a schema: token-share blocking on the key
        attribute, plus exact blocking and exact similarity on a code
        column when one exists."""
        key_attribute = key_attribute or schema[0]
        blocking: list[BlockingRule] = [TokenShareBlocking(key_attribute)]
        functions = {}
        if code_attribute is not None:
            blocking.append(ExactValueBlocking(code_attribute))
            functions[code_attribute] = "exact_equality"
        overrides.setdefault("similarity", SimilaritySpec(functions))
        overrides.setdefault("blocking", tuple(blocking))
        return EngineConfig(**overrides)


class LabelStore:
    """Pair labels with their provenance.

    ``labels`` holds the effective training label of every labeled pair;
    ``pinned`` holds the subset that came from cluster answers and that the
    clustering must honor.  Rule-derived labels never overwrite a pinned
    pair (a direct judgment outranks rule coverage); anything else
    overwrites, counting a conflict when the label actually flips.
    """

    def __init__(self):
        self.labels: dict[Pair, int] = {}
        self.pinned: dict[Pair, int] = {}
        self.version = 0
        self.conflicts = 0

    def add(self, pair: Pair, label: int, pin: bool = False) -> bool:
        if not pin and pair in self.pinned:
            return False
        changed = False
        if pin and self.pinned.get(pair) != label:
            self.pinned[pair] = label
            changed = True
        current = self.labels.get(pair)
        if current != label:
            if current is not None:
                self.conflicts += 1
            self.labels[pair] = label
            changed = True
        if changed:
            self.version += 1
        return changed

    def add_all(self, labels: list[tuple[Pair, int]], pin: bool) -> bool:
        changed = False
        for pair, label in labels:
            changed |= self.add(pair, label, pin)
        return changed

    def items_sorted(self) -> list[tuple[Pair, int]]:
        return sorted(self.labels.items())

    def has_both_classes(self) -> bool:
        values = set(self.labels.values())
        return 0 in values and 1 in values

    def clone(self) -> "LabelStore":
        other = LabelStore()
        other.labels = dict(self.labels)
        other.pinned = dict(self.pinned)
        other.version = self.version
        other.conflicts = self.conflicts
        return other


@dataclass
class Delta:
    """State changes one answer induces."""

    labels: list[tuple[Pair, int]] = field(default_factory=list)
    pin: bool = False
    cell_updates: list[tuple[str, str, str]] = field(default_factory=list)
    retired: bool = False

    @property
    def is_noop(self) -> bool:
        return not self.labels and not self.cell_updates


class PipelineState:
    """Everything derived from the data and the answers so far."""

    def __init__(self, dataset: Dataset, config: EngineConfig):
        self.config = config
        self.dataset = dataset
        self.store = LabelStore()
        self.matcher = MatcherState(dataset, config.similarity, list(config.blocking))
        self.trained_version = -1  # store version the current model saw
        self.counts = column_counts(dataset)
        self.clusters: list[frozenset[str]] = machine_clusters(self)
        self.goldens: GoldenRecords = consolidate(dataset, self.clusters, self.counts)
        self.asked = AskedRegistry()
        self.hierarchies: dict[frozenset[str], object] = {}

    def clone(self) -> "PipelineState":
        other = object.__new__(PipelineState)
        other.config = self.config
        other.dataset = self.dataset
        other.store = self.store.clone()
        other.matcher = self.matcher.clone()
        other.trained_version = self.trained_version
        other.counts = self.counts
        other.clusters = self.clusters
        other.goldens = self.goldens
        other.asked = self.asked  # shared: speculation never asks
        other.hierarchies = self.hierarchies
        return other

    @property
    def model(self) -> RandomForestMatcher | None:
        return self.matcher.model

    def pair_probability(self, pair: Pair) -> float:
        """Model probability, overridden by a pinned label when one exists."""
        pinned = self.store.pinned.get(pair)
        if pinned is not None:
            return float(pinned)
        return self.matcher.pair_probability(pair)


def overlaid_probabilities(state: PipelineState) -> np.ndarray:
    """Candidate-pair probabilities with pinned labels taking precedence."""
    m = state.matcher
    if not state.store.pinned:
        return m.probabilities
    probs = m.probabilities.copy()
    for pair, label in state.store.pinned.items():
        i = m.pair_index.get(pair)
        if i is not None:
            probs[i] = float(label)
    return probs


def machine_clusters(state: PipelineState) -> list[frozenset[str]]:
    """Connected components over candidate edges, with pinned labels taking
    precedence over model probabilities.  A pinned positive pair connects
    even when blocking no longer proposes it."""
    m = state.matcher
    threshold = state.config.cluster_threshold
    probs = overlaid_probabilities(state)
    extra = sorted(p for p, label in state.store.pinned.items()
                   if label == 1 and p not in m.pair_index)
    if extra:
        pairs = m.pairs + extra
        probs = np.concatenate([probs, np.ones(len(extra))])
    else:
        pairs = m.pairs
    return cluster_records(state.dataset.record_ids, pairs, probs, threshold)


def answer_to_delta(state: PipelineState, question: Question, answer: Answer) -> Delta:
    """Translate an answer into labels and cell edits.

    * approved similarity rule: label every covered pair in the rule's
      direction; rejected: retire, no labels;
    * approved cluster: all intra-cluster pairs positive and pinned;
      split: positives inside each sub-cluster, negatives across
      sub-clusters, all pinned;
    * approved transformation: the rule's cell rewrites; rejected: retire.
    """
    if isinstance(question, TrainingRuleQuestion):
        if answer.verdict != "yes":
            return Delta(retired=True)
        label = 1 if question.predicate.direction == "match" else 0
        return Delta(labels=[(p, label) for p in question.coverage])
    if isinstance(question, ClusterQuestion):
        if answer.verdict == "yes":
            return Delta(labels=[(p, 1) for p in cluster_pairs(question.records)],
                         pin=True)
        parts = answer.sub_clusters
        check_partition(question.records, parts)
        labels: list[tuple[Pair, int]] = []
        for part in parts:
            labels.extend((p, 1) for p in cluster_pairs(part))
        ordered = sorted(parts, key=min)
        for i in range(len(ordered)):
            for j in range(i + 1, len(ordered)):
                for a in sorted(ordered[i]):
                    for b in sorted(ordered[j]):
                        labels.append((canonical_pair(a, b), 0))
        return Delta(labels=labels, pin=True)
    if isinstance(question, TransformationQuestion):
        if answer.verdict != "yes":
            return Delta(retired=True)
        return Delta(cell_updates=affected_cells(state.dataset, question.rule))
    raise TypeError(f"unsupported question: {type(question).__name__}")


def check_partition(records: frozenset[str], parts: tuple[frozenset[str], ...]) -> None:
    """Reject split answers that do not partition the question's records."""
    if len(parts) < 2:
        raise ValueError("a cluster split needs at least two sub-clusters")
    union: set[str] = set()
    total = 0
    for part in parts:
        if not part:
            raise ValueError("empty sub-cluster in split answer")
        union |= set(part)
        total += len(part)
    if union != set(records) or total != len(records):
        raise ValueError("split answer is not a partition of the cluster")


def _retrain_seed(config: EngineConfig, store_version: int) -> int:
    return (config.seed * 1_000_003 + store_version) & 0x7FFFFFFF


def fit_matcher_model(store: LabelStore, matcher: MatcherState,
                      config: EngineConfig) -> RandomForestMatcher:
    """Fit the forest on the store's labels against current features.

    Features come from the matcher cache when the pair is a candidate and
    are computed on the spot otherwise.  The training set is ordered
    canonically and the seed is derived from the store version, so the fit
    is a pure function of (dataset, store, config): a speculative retrain
    and the later committed retrain of the same answer agree exactly, as do
    the incremental and from-scratch paths.
    """
    items = store.items_sorted()
    pairs = [p for p, _ in items]
    y = np.array([label for _, label in items], dtype=np.int64)
    cached = [matcher.pair_index.get(p) for p in pairs]
    missing = [p for p, c in zip(pairs, cached) if c is None]
    missing_X = featurize_pairs(matcher.dataset, missing, matcher.similarity)
    X = np.zeros((len(pairs), len(matcher.dataset.schema)))
    mi = 0
    for row, c in enumerate(cached):
        if c is None:
            X[row] = missing_X[mi]
            mi += 1
        else:
            X[row] = matcher.features[c]
    model = RandomForestMatcher(
        n_trees=config.n_trees, max_depth=config.max_depth,
        min_leaf=config.min_leaf, n_bins=config.n_bins,
        seed=_retrain_seed(config, store.version),
    )
    return model.fit(X, y)


def apply_deltas(state: PipelineState, deltas: list[Delta],
                 commits: list[tuple[Question, Answer]] | None = None
                 ) -> PipelineState:
    """Fold deltas into a state and rerun the machine side incrementally.

    Labels land before cell edits (so one retrain sees everything), and
    cell edits apply in delta order with the last write to a cell winning.
    Label changes retrain the model and re-predict every candidate; cell
    edits re-block and re-predict only pairs containing touched records
    (and retrain too when a touched record sits in a labeled pair, since
    its training features moved).  The input state is never mutated.
    Passing the committed question/answer pairs additionally updates the
    oversized-cluster bookkeeping; speculation leaves them out.
    """
    out = state.clone()
    labels_changed = False
    for delta in deltas:
        if delta.labels:
            labels_changed |= out.store.add_all(delta.labels, delta.pin)
    cells = [u for delta in deltas for u in delta.cell_updates]
    touched_set: set[str] = set()
    if cells:
        new_dataset, touched = out.dataset.apply_cell_updates(cells)
        if touched:
            out.dataset = new_dataset
            out.matcher.apply_dataset(new_dataset, touched)
            out.counts = column_counts(new_dataset)
            touched_set = set(touched)
    stale_features = touched_set and any(
        a in touched_set or b in touched_set for a, b in out.store.labels)
    if (labels_changed or stale_features) and out.store.has_both_classes():
        out.matcher.set_model(fit_matcher_model(out.store, out.matcher, out.config))
        out.trained_version = out.store.version
    if commits:
        for question, answer in commits:
            _update_hierarchies(out, question, answer)
    out.clusters = machine_clusters(out)
    out.goldens = consolidate(out.dataset, out.clusters, out.counts)
    if commits:
        live = set(out.clusters)
        out.hierarchies = {c: h for c, h in out.hierarchies.items() if c in live}
    return out


def advance(state: PipelineState, delta: Delta,
            commit_question: Question | None = None,
            answer: Answer | None = None) -> PipelineState:
    commits = None
    if commit_question is not None and answer is not None:
        commits = [(commit_question, answer)]
    return apply_deltas(state, [delta], commits)


def _update_hierarchies(state: PipelineState, question: Question,
                        answer: Answer) -> None:
    if not isinstance(question, ClusterQuestion) or not state.hierarchies:
        return
    group = tuple(sorted(question.records))
    for hierarchy in state.hierarchies.values():
        if answer.verdict == "yes":
            hierarchy.record_approval(group)
        else:
            hierarchy.record_split(group)


def full_recompute(state: PipelineState) -> PipelineState:
    """Rebuild every derived structure from the dataset and label store.

    This is the reference path the incremental :func:`advance` must agree
    with bit for bit; tests compare the two.
    """
    out = object.__new__(PipelineState)
    out.config = state.config
    out.dataset = state.dataset
    out.store = state.store.clone()
    out.matcher = MatcherState(state.dataset, state.config.similarity,
                               list(state.config.blocking))
    out.trained_version = state.trained_version
    if state.trained_version >= 0:
        out.matcher.set_model(fit_matcher_model(out.store, out.matcher, out.config))
        out.matcher.model_version = state.matcher.model_version
    out.counts = column_counts(state.dataset)
    out.clusters = machine_clusters(out)
    out.goldens = consolidate(state.dataset, out.clusters, out.counts)
    out.asked = state.asked
    out.hierarchies = dict(state.hierarchies)
    return out
