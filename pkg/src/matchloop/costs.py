"""Question cost model.

Each question type has its own human-effort curve, fitted elsewhere from
timing data and kept here as closed-form formulas over the question size:

* training rule covering n pairs (shown via samples): 8*ln(n+3) - 10
* cluster of n records: n^2/100 + (n+1)/5
* transformation rewriting n records: (n + 0.5)/1.5

All costs are clamped below by ``floor`` so that extrapolating the fitted
curves to tiny questions can never produce a non-positive price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CostModel:
    """Closed-form effort estimates for the three question types.

    The coefficients are configurable so that a deployment can refit them
    against its own reviewers; the defaults reproduce the fitted curves.
    """

    training_scale: float = 8.0
    training_shift: float = 3.0
    training_offset: float = 10.0
    cluster_quad_div: float = 100.0
    cluster_lin_div: float = 5.0
    transformation_shift: float = 0.5
    transformation_div: float = 1.5
    floor: float = 0.5

    def training_cost(self, size: int) -> float:
        """Cost of reviewing a training rule covering ``size`` pairs."""
        raw = self.training_scale * math.log(size + self.training_shift) - self.training_offset
        return max(raw, self.floor)

    def cluster_cost(self, size: int) -> float:
        """Cost of reviewing a cluster of ``size`` records."""
        raw = size * size / self.cluster_quad_div + (size + 1) / self.cluster_lin_div
        return max(raw, self.floor)

    def transformation_cost(self, size: int) -> float:
        """Cost of reviewing a transformation rewriting ``size`` records."""
        raw = (size + self.transformation_shift) / self.transformation_div
        return max(raw, self.floor)

    def question_cost(self, question) -> float:
        """Dispatch on a question object's ``kind`` and ``size``.

        A cluster question backed by a review hierarchy (an oversized cluster
        broken into nodes of at most the leaf size) is priced as one cluster
        question per node.
        """
        kind = question.kind
        if kind == "training":
            return self.training_cost(question.size)
        if kind == "cluster":
            node_count = getattr(question, "hierarchy_node_count", None)
            if node_count:
                return node_count * self.cluster_cost(question.size)
            return self.cluster_cost(question.size)
        if kind == "transformation":
            return self.transformation_cost(question.size)
        raise ValueError(f"unknown question kind: {kind!r}")
