"""What a question is worth before asking it.

Two tiers of value estimates drive scheduling:

* local scores are cheap per-question heuristics (rule confidence times
  covered-pair uncertainty, summed cluster-pair uncertainty, rule
  frequency) used to shortlist candidates;
* expected global benefit simulates each plausible answer on a cloned
  pipeline state and counts how many records' golden values would change,
  weighting by the answer's probability.

On top of the per-question benefit sit pairwise joint benefits, which
expose correlation between questions (asking both is worth more, or less,
than the sum of asking each alone) and feed grouped batch selection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .consolidate import golden_change_count
from .engine import (PipelineState, answer_to_delta, apply_deltas,
                     overlaid_probabilities)
from .matcher import Pair, UnionFind
from .oracle import Answer
from .questions import (ClusterQuestion, Question, TrainingRuleQuestion,
                        TransformationQuestion)
from .transforms import form_counts

log = logging.getLogger(__name__)

PROB_EPS = 1e-4  # shared with the matcher's probability clamp
MIN_MAX_UNCERTAINTY = 2.0 * math.log(2.0)


def pair_uncertainty(p: float, eps: float = PROB_EPS) -> float:
    """U(p) = -(ln p + ln(1-p)); smallest at p=0.5, so the *least* certain
    pair scores the smallest U.  Input is clamped away from 0 and 1."""
    p = min(max(p, eps), 1.0 - eps)
    return -(math.log(p) + math.log(1.0 - p))


@dataclass(frozen=True)
class UtilityContext:
    """Normalization for pair utilities over one pool revision."""

    max_u: float
    eps: float = PROB_EPS

    def utility(self, p: float) -> float:
        """1 - U(p)/MaxU: highest for the pair nearest 0.5, zero for the
        most settled candidate pair."""
        return 1.0 - pair_uncertainty(p, self.eps) / self.max_u


def utility_context(state: PipelineState) -> UtilityContext:
    """MaxU over the current candidate pairs (at least 2 ln 2)."""
    probs = overlaid_probabilities(state)
    if len(probs) == 0:
        return UtilityContext(MIN_MAX_UNCERTAINTY)
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    u = -(np.log(p) + np.log(1.0 - p))
    return UtilityContext(max(float(u.max()), MIN_MAX_UNCERTAINTY))


def _utility_sum(probs: np.ndarray, ctx: UtilityContext) -> float:
    """Summed utility over an array of pair probabilities."""
    p = np.clip(probs, ctx.eps, 1.0 - ctx.eps)
    u = -(np.log(p) + np.log(1.0 - p))
    return float(np.sum(1.0 - u / ctx.max_u))


def local_score(state: PipelineState, question: Question,
                ctx: UtilityContext) -> float:
    """Cheap per-question ranking score.

    Training rules: author confidence times summed utility of covered
    pairs.  Clusters: summed utility of all within-cluster pairs (as
    captured at question generation).  Transformations: rule frequency.
    Before a model exists every pair utility defaults to 1, so early
    ranking falls back to confidence-weighted coverage.
    """
    if isinstance(question, TrainingRuleQuestion):
        if state.model is None:
            total = float(len(question.coverage))
        else:
            index = state.matcher.pair_index
            probs = overlaid_probabilities(state)
            idx = [index.get(pair) for pair in question.coverage]
            hits = np.array([i for i in idx if i is not None], dtype=np.int64)
            total = _utility_sum(probs[hits], ctx) if hits.size else 0.0
            for pair, i in zip(question.coverage, idx):
                if i is None:
                    total += ctx.utility(float(state.pair_probability(pair)))
        return question.confidence * total
    if isinstance(question, ClusterQuestion):
        if state.model is None:
            return float(len(question.pair_probabilities))
        probs = np.array([p for _, p in question.pair_probabilities])
        return _utility_sum(probs, ctx)
    if isinstance(question, TransformationQuestion):
        return float(question.rule.frequency)
    raise TypeError(f"unsupported question: {type(question).__name__}")


# --------------------------------------------------------------------------
# Answer probability models
# --------------------------------------------------------------------------

def prob_training_yes(state: PipelineState, question: TrainingRuleQuestion) -> float:
    """Mean match probability over covered pairs; non-match rules use the
    mean of the complements."""
    if not question.coverage:
        return 0.0
    index = state.matcher.pair_index
    probs = overlaid_probabilities(state)
    idx = [index.get(pair) for pair in question.coverage]
    hits = np.array([i for i in idx if i is not None], dtype=np.int64)
    total = float(np.sum(probs[hits])) if hits.size else 0.0
    for pair, i in zip(question.coverage, idx):
        if i is None:
            total += float(state.pair_probability(pair))
    mean = total / len(question.coverage)
    return mean if question.predicate.direction == "match" else 1.0 - mean


def prob_transformation_yes(state: PipelineState,
                            question: TransformationQuestion) -> float:
    """N(target)/(N(target)+N(source)) over records carrying each form: the
    more records already use the target spelling, the likelier approval."""
    n_source, n_target = form_counts(state.dataset, question.rule)
    if n_source + n_target == 0:
        return 0.0
    return n_target / (n_source + n_target)


@dataclass
class AnswerDistribution:
    """Possible answers with probabilities; sums to 1 unless truncated."""

    outcomes: list[tuple[Answer, float]]
    truncated: bool = False

    def total(self) -> float:
        return sum(p for _, p in self.outcomes)


def _partition(records: tuple[str, ...],
               positive: list[Pair]) -> tuple[frozenset[str], ...]:
    uf = UnionFind()
    for r in records:
        uf.find(r)
    for a, b in positive:
        uf.union(a, b)
    groups: dict[str, set[str]] = {}
    for r in records:
        groups.setdefault(uf.find(r), set()).add(r)
    return tuple(sorted((frozenset(g) for g in groups.values()), key=min))


def _partition_answer(parts: tuple[frozenset[str], ...]) -> Answer:
    if len(parts) == 1:
        return Answer("yes")
    return Answer("no", parts)


def _enumerate_vectors(records: tuple[str, ...], pairs: list[Pair],
                       probs: list[float], free: list[int],
                       fixed_positive: list[int]) -> dict[tuple, tuple[Answer, float]]:
    """Accumulate P(partition) over all label vectors of the free pairs.

    Non-free pairs are fixed to positive (if listed) or negative; their
    probability factors multiply into every vector, so with any pair fixed
    the accumulated mass is below 1 (the caller flags truncation).
    """
    acc: dict[tuple, tuple[Answer, float]] = {}
    free_set = set(free)
    fixed_pos_set = set(fixed_positive)
    base_p = 1.0
    for i in range(len(pairs)):
        if i in free_set:
            continue
        base_p *= probs[i] if i in fixed_pos_set else 1.0 - probs[i]
    base_positive = [pairs[i] for i in sorted(fixed_pos_set)]
    for mask in range(1 << len(free)):
        p_vec = base_p
        positive = list(base_positive)
        for bit, i in enumerate(free):
            if mask >> bit & 1:
                p_vec *= probs[i]
                positive.append(pairs[i])
            else:
                p_vec *= 1.0 - probs[i]
        if p_vec == 0.0:
            continue
        parts = _partition(records, positive)
        answer = _partition_answer(parts)
        key = answer.canonical()
        if key in acc:
            acc[key] = (acc[key][0], acc[key][1] + p_vec)
        else:
            acc[key] = (answer, p_vec)
    return acc


PRUNE_HIGH = 0.8
PRUNE_LOW = 0.2
MAX_FREE_PAIRS = 16


def cluster_answer_distribution(question: ClusterQuestion, mode: str,
                                split_model: "SplitThresholdModel | None" = None
                                ) -> AnswerDistribution:
    """Distribution over a cluster question's possible answers.

    ``exact`` enumerates every pair-label vector (meant for up to 4 records
    = 6 pairs); ``pruned`` first fixes near-certain pairs to their likely
    label and enumerates the rest, yielding a truncated distribution that
    is used as-is; ``threshold`` reads the answers off the partitions at
    each probability threshold in the split model's grid, weighted by the
    learned threshold likelihoods.
    """
    records = tuple(sorted(question.records))
    pairs = question.pairs()
    probs = [p for _, p in question.pair_probabilities]
    if mode == "exact":
        if len(records) > 4:
            raise ValueError("exact enumeration is limited to 4 records")
        acc = _enumerate_vectors(records, pairs, probs, list(range(len(pairs))), [])
        outcomes = sorted(acc.values(), key=lambda ap: (-ap[1], ap[0].canonical()))
        return AnswerDistribution(outcomes, truncated=False)
    if mode == "pruned":
        fixed_positive = [i for i, p in enumerate(probs) if p >= PRUNE_HIGH]
        free = [i for i, p in enumerate(probs)
                if PRUNE_LOW < p < PRUNE_HIGH]
        if len(free) > MAX_FREE_PAIRS:
            # Fix the most settled of the remainder too, keeping blowup bounded.
            free.sort(key=lambda i: (-abs(probs[i] - 0.5), i))
            overflow = free[:len(free) - MAX_FREE_PAIRS]
            free = sorted(free[len(free) - MAX_FREE_PAIRS:])
            fixed_positive += [i for i in overflow if probs[i] >= 0.5]
        truncated = len(free) < len(pairs)
        acc = _enumerate_vectors(records, pairs, probs, free, sorted(fixed_positive))
        outcomes = sorted(acc.values(), key=lambda ap: (-ap[1], ap[0].canonical()))
        return AnswerDistribution(outcomes, truncated=truncated)
    if mode == "threshold":
        if split_model is None:
            raise ValueError("threshold mode needs a split model")
        acc: dict[tuple, tuple[Answer, float]] = {}
        for tau in split_model.grid:
            positive = [pairs[i] for i, p in enumerate(probs) if p > tau]
            answer = _partition_answer(_partition(records, positive))
            key = answer.canonical()
            weight = split_model.likelihood(tau)
            if key in acc:
                acc[key] = (acc[key][0], acc[key][1] + weight)
            else:
                acc[key] = (answer, weight)
        outcomes = sorted(acc.values(), key=lambda ap: (-ap[1], ap[0].canonical()))
        return AnswerDistribution(outcomes, truncated=False)
    raise ValueError(f"unknown distribution mode: {mode!r}")


class SplitThresholdModel:
    """Learned likelihood that the reviewer's split matches the partition
    at each probability threshold.

    Starts uniform; every answered cluster question votes for the
    threshold whose partition (of the question's pre-answer probabilities)
    best matches the human's answer, by Jaccard similarity between the two
    partitions viewed as sets of record-id sets.  Likelihoods are add-one
    smoothed, so ``likelihood`` never returns 0.
    """

    def __init__(self, grid: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)):
        self.grid = grid
        self.counts = {tau: 0 for tau in grid}
        self.total = 0

    def likelihood(self, tau: float) -> float:
        return (self.counts[tau] + 1) / (self.total + len(self.grid))

    def best_threshold(self, question: ClusterQuestion, answer: Answer) -> float:
        records = tuple(sorted(question.records))
        pairs = question.pairs()
        probs = [p for _, p in question.pair_probabilities]
        if answer.verdict == "yes":
            human = {frozenset(records)}
        else:
            human = set(answer.sub_clusters)
        best_tau, best_score = self.grid[0], -1.0
        for tau in self.grid:
            positive = [pairs[i] for i, p in enumerate(probs) if p > tau]
            machine = set(_partition(records, positive))
            score = len(human & machine) / len(human | machine)
            if score > best_score:
                best_tau, best_score = tau, score
        return best_tau

    def update(self, question: ClusterQuestion, answer: Answer) -> None:
        self.counts[self.best_threshold(question, answer)] += 1
        self.total += 1

    def clone(self) -> "SplitThresholdModel":
        other = SplitThresholdModel(self.grid)
        other.counts = dict(self.counts)
        other.total = self.total
        return other


# --------------------------------------------------------------------------
# Speculative (global) benefit
# --------------------------------------------------------------------------

def speculative_change_count(state: PipelineState, question: Question,
                             answer: Answer) -> int:
    """N(q=a): records whose golden values would change if `answer` came
    back, measured by applying it to a cloned state.  Any failure inside
    the speculation is worth a log line, never a crashed scheduler."""
    try:
        delta = answer_to_delta(state, question, answer)
        if delta.is_noop:
            return 0
        after = apply_deltas(state, [delta])
        return golden_change_count(state.goldens, after.goldens)
    except Exception:
        log.exception("speculation failed for %s", question.describe())
        return 0


def answer_distribution(state: PipelineState, question: Question,
                        split_model: "SplitThresholdModel | None" = None
                        ) -> AnswerDistribution:
    """Distribution over plausible answers for any question type.

    Rule and transformation questions are binary (the reject branch is a
    no-op).  Cluster questions enumerate exactly when small and fall back
    to the learned threshold method when large.
    """
    config = state.config
    if isinstance(question, TrainingRuleQuestion):
        p_yes = prob_training_yes(state, question)
        return AnswerDistribution([(Answer("yes"), p_yes),
                                   (Answer("no"), 1.0 - p_yes)])
    if isinstance(question, TransformationQuestion):
        p_yes = prob_transformation_yes(state, question)
        return AnswerDistribution([(Answer("yes"), p_yes),
                                   (Answer("no"), 1.0 - p_yes)])
    if isinstance(question, ClusterQuestion):
        if len(question.records) <= config.exact_distribution_max_records:
            mode = "exact"
        else:
            mode = "threshold"
        return cluster_answer_distribution(question, mode, split_model)
    raise TypeError(f"unsupported question: {type(question).__name__}")


@dataclass
class BenefitBreakdown:
    """One question's expected benefit and the terms behind it."""

    benefit: float
    outcomes: list[tuple[Answer, float, int]] = field(default_factory=list)


def expected_benefit(state: PipelineState, question: Question,
                     split_model: "SplitThresholdModel | None" = None,
                     min_probability: float | None = None) -> BenefitBreakdown:
    """B(q) = sum over answers of P(answer) * N(answer).

    Answers below ``min_probability`` are not speculated (their N counts as
    0), keeping B a conservative lower bound; pass 0 to speculate all.
    """
    if min_probability is None:
        min_probability = state.config.min_speculation_probability
    dist = answer_distribution(state, question, split_model)
    benefit = 0.0
    outcomes: list[tuple[Answer, float, int]] = []
    for answer, p in dist.outcomes:
        if p <= 0.0 or p < min_probability:
            continue
        n = speculative_change_count(state, question, answer)
        benefit += p * n
        outcomes.append((answer, p, n))
    return BenefitBreakdown(benefit, outcomes)


def joint_change_count(state: PipelineState, question_a: Question, answer_a: Answer,
                       question_b: Question, answer_b: Answer) -> int:
    """N for two answers applied together: labels from both land first,
    then cell edits, then one pipeline rerun."""
    try:
        delta_a = answer_to_delta(state, question_a, answer_a)
        delta_b = answer_to_delta(state, question_b, answer_b)
        if delta_a.is_noop and delta_b.is_noop:
            return 0
        after = apply_deltas(state, [delta_a, delta_b])
        return golden_change_count(state.goldens, after.goldens)
    except Exception:
        log.exception("joint speculation failed for %s + %s",
                      question_a.describe(), question_b.describe())
        return 0


def pair_expected_benefit(state: PipelineState, question_a: Question,
                          question_b: Question,
                          split_model: "SplitThresholdModel | None" = None,
                          min_probability: float | None = None) -> float:
    """B(q,q'): expected joint benefit assuming independent answers."""
    if min_probability is None:
        min_probability = state.config.min_speculation_probability
    dist_a = answer_distribution(state, question_a, split_model)
    dist_b = answer_distribution(state, question_b, split_model)
    benefit = 0.0
    for answer_a, p_a in dist_a.outcomes:
        if p_a <= 0.0 or p_a < min_probability:
            continue
        for answer_b, p_b in dist_b.outcomes:
            joint_p = p_a * p_b
            if joint_p <= 0.0 or joint_p < min_probability:
                continue
            n = joint_change_count(state, question_a, answer_a,
                                   question_b, answer_b)
            benefit += joint_p * n
    return benefit


# --------------------------------------------------------------------------
# Correlation and groups
# --------------------------------------------------------------------------

EXACT_TOLERANCE = 1e-9
EXPECTED_TOLERANCE = 0.5


def correlation_classify(benefit_a: float, benefit_b: float,
                         benefit_joint: float,
                         tolerance: float = EXPECTED_TOLERANCE) -> str:
    """positive / negative / none, comparing B(q,q') against B(q)+B(q')."""
    total = benefit_a + benefit_b
    if abs(benefit_joint - total) <= tolerance:
        return "none"
    return "positive" if benefit_joint > total else "negative"


def group_questions(keys: list[tuple],
                    correlated: list[tuple[tuple, tuple]]) -> list[list[tuple]]:
    """Disjoint groups: connected components of the correlation edges;
    uncorrelated questions become singleton groups.  Returned groups and
    members come out in canonical key order."""
    uf = UnionFind()
    for key in keys:
        uf.find(key)
    for a, b in correlated:
        uf.union(a, b)
    groups: dict[tuple, list[tuple]] = {}
    for key in sorted(keys):
        groups.setdefault(uf.find(key), []).append(key)
    return sorted(groups.values(), key=lambda g: g[0])


def group_benefit(members: list[tuple], benefits: dict[tuple, float],
                  joint_benefits: dict[frozenset, float]) -> float:
    """Benefit of asking a whole subset together.

    Singletons are just B(q).  Larger subsets scale the summed individual
    benefits by the mean pairwise ratio B(q',q'')/(B(q')+B(q'')), the
    cheap stand-in for enumerating joint answers of the whole subset.
    A pair whose benefits sum to zero contributes a neutral factor 1.
    """
    if len(members) == 1:
        return benefits[members[0]]
    total = sum(benefits[m] for m in members)
    factors = []
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            a, b = members[i], members[j]
            denom = benefits[a] + benefits[b]
            joint = joint_benefits.get(frozenset((a, b)))
            if denom == 0.0 or joint is None:
                factors.append(1.0)
            else:
                factors.append(joint / denom)
    return total * (sum(factors) / len(factors))
