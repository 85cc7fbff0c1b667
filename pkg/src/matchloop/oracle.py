"""A simulated reviewer that answers questions from ground truth.

The oracle stands in for the human: it approves a training rule when the
rule's covered pairs are overwhelmingly consistent with the truth, splits
clusters along true entity lines, and approves a transformation when it
moves most affected cells toward their true golden values.

Randomness (only used when ``noise_rate`` > 0) is keyed by the question's
canonical key, so answers do not depend on the order questions are asked.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .data import Dataset, GroundTruth
from .questions import (ClusterQuestion, Question, TrainingRuleQuestion,
                        TransformationQuestion)
from .similarity import levenshtein
from .transforms import affected_cells


@dataclass(frozen=True)
class Answer:
    verdict: str  # "yes" | "no"
    sub_clusters: tuple[frozenset[str], ...] = ()

    def canonical(self) -> tuple:
        return (self.verdict,
                tuple(sorted(tuple(sorted(s)) for s in self.sub_clusters)))

    def to_json(self) -> dict:
        """Wire form; sub-clusters in canonical order so equal answers
        serialize to equal bytes."""
        payload: dict = {"verdict": self.verdict}
        if self.sub_clusters:
            payload["sub_clusters"] = [list(c) for c in self.canonical()[1]]
        return payload

    @staticmethod
    def from_json(payload: dict) -> "Answer":
        return Answer(payload["verdict"],
                      tuple(frozenset(c)
                            for c in payload.get("sub_clusters", ())))


def partition_by_entity(records: frozenset[str], truth: GroundTruth
                        ) -> tuple[frozenset[str], ...]:
    groups: dict[str, set[str]] = {}
    for r in records:
        groups.setdefault(truth.entity_of[r], set()).add(r)
    return tuple(sorted((frozenset(g) for g in groups.values()), key=min))


class SimulatedOracle:
    """Ground-truth-backed answer source."""

    def __init__(self, truth: GroundTruth, approval_threshold: float = 0.9,
                 noise_rate: float = 0.0, seed: int = 0):
        if not 0.5 < approval_threshold <= 1.0:
            raise ValueError("approval_threshold must be in (0.5, 1]")
        if not 0.0 <= noise_rate < 0.5:
            raise ValueError("noise_rate must be in [0, 0.5)")
        self.truth = truth
        self.approval_threshold = approval_threshold
        self.noise_rate = noise_rate
        self.seed = seed

    def _rng(self, question: Question) -> np.random.Generator:
        digest = zlib.crc32(repr(question.key()).encode("utf-8"))
        return np.random.default_rng([self.seed, digest])

    def _noisy(self, question: Question) -> bool:
        if self.noise_rate <= 0:
            return False
        return bool(self._rng(question).random() < self.noise_rate)

    def answer(self, question: Question, dataset: Dataset) -> Answer:
        if isinstance(question, TrainingRuleQuestion):
            return self._answer_training(question)
        if isinstance(question, ClusterQuestion):
            return self._answer_cluster(question)
        if isinstance(question, TransformationQuestion):
            return self._answer_transformation(question, dataset)
        raise TypeError(f"unsupported question: {type(question).__name__}")

    def _answer_training(self, question: TrainingRuleQuestion) -> Answer:
        if not question.coverage:
            return Answer("no")
        matches = sum(
            1 for a, b in question.coverage
            if self.truth.entity_of[a] == self.truth.entity_of[b]
        )
        fraction = matches / len(question.coverage)
        if question.predicate.direction == "non_match":
            fraction = 1.0 - fraction
        approve = fraction >= self.approval_threshold
        if self._noisy(question):
            approve = not approve
        if approve:
            return Answer("yes")
        return Answer("no")

    def _answer_cluster(self, question: ClusterQuestion) -> Answer:
        parts = partition_by_entity(question.records, self.truth)
        if len(parts) == 1:
            return Answer("yes")
        rng = self._rng(question)
        if self.noise_rate > 0 and rng.random() < self.noise_rate:
            # A sloppy reviewer merges two sub-clusters they should have
            # kept apart.
            i, j = sorted(rng.choice(len(parts), size=2, replace=False))
            merged = tuple(p for k, p in enumerate(parts) if k not in (i, j))
            merged += (parts[i] | parts[j],)
            if len(merged) == 1:
                return Answer("yes")
            return Answer("no", tuple(sorted(merged, key=min)))
        return Answer("no", parts)

    def _answer_transformation(self, question: TransformationQuestion,
                               dataset: Dataset) -> Answer:
        updates = affected_cells(dataset, question.rule)
        if not updates:
            return Answer("no")
        pos = dataset.attr_position(question.rule.attribute)
        improved = 0
        for record_id, _, new_value in updates:
            before = dataset.value(record_id, question.rule.attribute)
            target = self.truth.true_golden(record_id)[pos]
            if new_value == target or levenshtein(new_value, target) < levenshtein(before, target):
                improved += 1
        approve = improved * 2 > len(updates)
        if self._noisy(question):
            approve = not approve
        return Answer("yes" if approve else "no")
