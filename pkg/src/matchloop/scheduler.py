"""The outer review loop: pick questions, ask, fold answers back in.

A session starts with two seed rules (one match, one non-match) to give the
matcher its first training data, then loops: regenerate the question pools
from the current state, rank and select under the active strategy, obtain
answers, rerun the machine side, charge the measured cost against the
budget.  The loop stops when the budget cannot cover the cheapest open
question or when no questions remain.

Selection strategies range from single-type baselines to benefit-driven
batch selection, where correlated questions are grouped and a small
dynamic program allocates the batch across groups by benefit/cost.

Asking and committing are separate steps (:meth:`Session.open_iteration`
and :meth:`Session.commit`) so an HTTP service can hold an iteration open
while a person answers; :meth:`Session.run` drives both ends against an
in-process answer source.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .benefit import (BenefitBreakdown, SplitThresholdModel,
                      correlation_classify, expected_benefit, group_benefit,
                      group_questions, local_score, pair_expected_benefit,
                      utility_context)
from .consolidate import cluster_prf, golden_change_count, gr_accuracy
from .costs import CostModel
from .data import Dataset, GroundTruth
from .engine import (EngineConfig, PipelineState, answer_to_delta,
                     apply_deltas)
from .oracle import Answer
from .questions import (ClusterQuestion, Question, TrainingRuleQuestion,
                        generate_cluster_questions,
                        generate_training_rules,
                        generate_transformation_questions)
from .transforms import generate_rules

log = logging.getLogger(__name__)

STRATEGIES = (
    "emec", "training_only", "cluster_only", "trans_only",
    "interleave_random", "interleave_greedy",
    "global_1", "global_k", "global_k_corr_b",
)

KINDS = ("training", "cluster", "transformation")


@dataclass(frozen=True)
class SchedulerConfig:
    strategy: str = "global_k_corr_b"
    budget: float = 1000.0
    k: int = 10
    b: int | None = None  # None: size of the largest question group
    seed: int = 0
    auto_k: bool = False
    costs: CostModel = field(default_factory=CostModel)
    subset_enumeration_cap: int = 5000

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy: {self.strategy!r}")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.k < 1 or (self.b is not None and self.b < 1):
            raise ValueError("k and b must be at least 1")


@dataclass
class QualityReport:
    iteration: int
    spent_cost: float
    questions_asked: int
    gr_accuracy: float | None
    cluster_f1: float | None


@dataclass
class AskedRecord:
    iteration: int
    question: Question
    answer: Answer
    cost: float


@dataclass
class RunResult:
    state: PipelineState
    reports: list[QualityReport]
    asked: list[AskedRecord]
    spent: float
    stop_reason: str

    @property
    def final(self) -> QualityReport:
        return self.reports[-1]


class ColdStartError(RuntimeError):
    """No approvable seed rule in some direction; the matcher cannot be
    trained and the session cannot start."""


# --------------------------------------------------------------------------
# Batch selection (grouping + allocation DP)
# --------------------------------------------------------------------------

def subset_ratio(members: tuple, benefits: dict, joints: dict,
                 costs: dict) -> float:
    """Benefit/cost of asking a subset together, with grouped-benefit
    accounting for the numerator."""
    cost = sum(costs[m] for m in members)
    if cost <= 0:
        return 0.0
    return group_benefit(list(members), benefits, joints) / cost


def best_subsets_per_size(group: list, benefits: dict, joints: dict,
                          costs: dict, max_size: int,
                          enumeration_cap: int = 5000
                          ) -> list[tuple[float, tuple]]:
    """W-row for one group: for j = 0..max_size the best ratio among the
    group's j-subsets and the subset achieving it.

    Groups whose subset count would blow past ``enumeration_cap`` fall back
    to nested prefixes of the members ordered by individual ratio.
    """
    rows: list[tuple[float, tuple]] = [(0.0, ())]
    sizes = range(1, min(max_size, len(group)) + 1)
    total = sum(math.comb(len(group), j) for j in sizes)
    if total > enumeration_cap:
        log.info("group of %d falls back to greedy subsets", len(group))
        ordered = sorted(
            group, key=lambda m: (-(benefits[m] / costs[m] if costs[m] else 0.0),
                                  costs[m], m))
        for j in sizes:
            prefix = tuple(sorted(ordered[:j]))
            rows.append((subset_ratio(prefix, benefits, joints, costs), prefix))
        return rows
    for j in sizes:
        best: tuple[float, tuple] | None = None
        for combo in itertools.combinations(group, j):
            ratio = subset_ratio(combo, benefits, joints, costs)
            if best is None or ratio > best[0] + 1e-15:
                best = (ratio, combo)
        rows.append(best)
    return rows


def allocate_batch(groups: list[list], benefits: dict, joints: dict,
                   costs: dict, b: int, enumeration_cap: int = 5000
                   ) -> tuple[list, float]:
    """Pick up to ``b`` questions across groups maximizing the summed
    per-group subset ratios.

    F[i][j] is the best value using the first i groups and at most j
    picks; a group may contribute its empty subset, which makes the table
    non-decreasing in both indices.  Ties prefer the larger allocation so
    batches stay as full as their value allows.  Backtracking recovers the
    chosen subsets.
    """
    total_candidates = sum(len(g) for g in groups)
    b = min(b, total_candidates)
    tables = [best_subsets_per_size(g, benefits, joints, costs, b,
                                    enumeration_cap) for g in groups]
    m = len(groups)
    F = [[0.0] * (b + 1) for _ in range(m + 1)]
    pick = [[0] * (b + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        row = tables[i - 1]
        for j in range(b + 1):
            best_value, best_k = -math.inf, 0
            for k in range(min(j, len(row) - 1) + 1):
                value = F[i - 1][j - k] + row[k][0]
                if value > best_value + 1e-15 or (
                        value > best_value - 1e-15 and k > best_k):
                    best_value, best_k = value, k
            F[i][j] = best_value
            pick[i][j] = best_k
    chosen: list = []
    j = b
    for i in range(m, 0, -1):
        k = pick[i][j]
        chosen.extend(tables[i - 1][k][1])
        j -= k
    return sorted(chosen), F[m][b]


def choose_b(groups: list[list], override: int | None = None) -> int:
    """Batch size: the largest group's size, kept within [1, 10]."""
    if override is not None:
        return max(1, min(override, 10))
    largest = max((len(g) for g in groups), default=1)
    return max(1, min(largest, 10))


def cluster_change_fraction(before: list[frozenset[str]],
                            after: list[frozenset[str]],
                            n_records: int) -> float:
    """Fraction of records whose cluster membership changed."""
    if n_records == 0:
        return 0.0
    before_of = {r: c for c in before for r in c}
    changed = sum(1 for c in after for r in c if before_of.get(r) != c)
    return changed / n_records


# --------------------------------------------------------------------------
# The session driver
# --------------------------------------------------------------------------

@dataclass
class _Scored:
    question: Question
    local: float
    cost: float
    benefit: float | None = None
    breakdown: BenefitBreakdown | None = None

    @property
    def local_ratio(self) -> float:
        return self.local / self.cost if self.cost > 0 else 0.0

    @property
    def ratio(self) -> float:
        if self.benefit is None:
            return self.local_ratio
        return self.benefit / self.cost if self.cost > 0 else 0.0


class Session:
    """One budgeted review session.

    Drive it in-process with :meth:`run`, or from a service loop by
    alternating :meth:`open_iteration` (select, idempotent while open) and
    :meth:`commit` (fold the answers in).  The seed-rule phase flows
    through the same two calls, one rule at a time, so a human can answer
    the seeds as well.
    """

    def __init__(self, dataset: Dataset, engine_config: EngineConfig,
                 config: SchedulerConfig, answer_source=None,
                 truth: GroundTruth | None = None, trace_path: str | None = None):
        self.config = config
        self.answer_source = answer_source
        self.truth = truth
        self.trace_path = trace_path
        self.state = PipelineState(dataset, engine_config)
        self.split_model = SplitThresholdModel(engine_config.split_tau_grid)
        self.rng = np.random.default_rng(config.seed)
        self.spent = 0.0
        self.iteration = 0
        self.asked: list[AskedRecord] = []
        self.n_asked = 0
        self.reports: list[QualityReport] = []
        self.stop_reason = ""
        self.k = config.k
        if config.auto_k:
            self.k = int(min(config.budget, 25)) if math.isfinite(config.budget) else 25
            self.k = max(1, self.k)
        # Benefit caches hold speculation results for the current state
        # only; every committed change invalidates them, so selection always
        # works from fresh expectations.
        self._benefit_cache: dict[tuple, tuple[float, BenefitBreakdown | None]] = {}
        self._joint_cache: dict[frozenset, float] = {}
        self._correlated: list[tuple[tuple, tuple]] = []
        self._joints_valid = False
        self._training_pool: tuple[int, list[TrainingRuleQuestion]] | None = None
        self._greedy_realized: dict[str, float] = {}
        self._greedy_choice = ""
        self._emec_phase = "training"
        self._pending: list[_Scored] | None = None
        self._pending_ranked: dict[str, list[_Scored]] | None = None
        # Seed-rule phase bookkeeping: one direction at a time, walking the
        # ranked rules until one is approved.
        self._phase = "seed"
        self._seed_queues: dict[str, list[_Scored]] | None = None
        self._seed_directions = ("match", "non_match")
        self._seed_direction_idx = 0
        self._seed_pos = 0
        self._seed_deltas: list = []
        self._seed_commits: list = []

    @property
    def done(self) -> bool:
        return bool(self.stop_reason)

    @property
    def phase(self) -> str:
        """"seed" while the matcher's seed rules are being asked, then
        "loop"."""
        return self._phase

    # -- pools -------------------------------------------------------------

    def _training_questions(self) -> list[TrainingRuleQuestion]:
        """Rule questions are regenerated only when the data changes; the
        grid and coverage depend on features alone.  Sampling draws from an
        rng keyed by (seed, revision), not the session stream, so the pool
        for a given dataset revision is always the same."""
        revision = self.state.dataset.revision
        if self._training_pool is None or self._training_pool[0] != revision:
            rng = np.random.default_rng([self.config.seed, revision])
            ec = self.state.config
            questions = generate_training_rules(
                self.state.matcher, self.state.asked, rng,
                match_thresholds=ec.match_rule_thresholds,
                non_match_thresholds=ec.non_match_rule_thresholds)
            self._training_pool = (revision, questions)
        return [q for q in self._training_pool[1]
                if q.key() not in self.state.asked]

    def _pools(self) -> dict[str, list[Question]]:
        state = self.state
        ec = state.config
        return {
            "training": list(self._training_questions()),
            "cluster": generate_cluster_questions(
                state.clusters, state.matcher, state.asked,
                max_direct_size=ec.max_direct_size,
                hierarchy_max_leaf=ec.hierarchy_max_leaf,
                hierarchies=state.hierarchies,
                threshold=ec.cluster_threshold,
                pair_probability=state.pair_probability),
            "transformation": generate_transformation_questions(
                generate_rules(state.dataset, state.clusters),
                state.dataset, state.asked),
        }

    def _usable_kinds(self) -> tuple[str, ...]:
        return {
            "emec": ("training", "transformation"),
            "training_only": ("training",),
            "cluster_only": ("cluster",),
            "trans_only": ("transformation",),
        }.get(self.config.strategy, KINDS)

    # -- scoring -----------------------------------------------------------

    def _score_pool(self, pools: dict[str, list[Question]]
                    ) -> dict[str, list[_Scored]]:
        ctx = utility_context(self.state)
        out: dict[str, list[_Scored]] = {}
        for kind in self._usable_kinds():
            scored = [
                _Scored(q, local_score(self.state, q, ctx),
                        self.config.costs.question_cost(q))
                for q in pools.get(kind, ())
            ]
            scored.sort(key=lambda s: (-s.local_ratio, s.cost, s.question.key()))
            out[kind] = scored
        return out

    def _top_k(self, ranked: dict[str, list[_Scored]], k: int) -> list[_Scored]:
        return [s for kind in KINDS for s in ranked.get(kind, [])[:k]]

    def _ensure_benefits(self, candidates: list[_Scored],
                         with_correlation: bool) -> None:
        """Fill in expected benefits.  The caches only ever hold values for
        the current state (commits clear them), so hits occur when the same
        iteration is re-opened or nothing changed since the last one."""
        for s in candidates:
            key = s.question.key()
            cached = self._benefit_cache.get(key)
            if cached is not None:
                s.benefit, s.breakdown = cached
                continue
            breakdown = expected_benefit(self.state, s.question, self.split_model)
            s.benefit = breakdown.benefit
            s.breakdown = breakdown
            self._benefit_cache[key] = (s.benefit, breakdown)
        if with_correlation and not self._joints_valid:
            self._compute_joint_benefits(candidates)
            self._joints_valid = True

    def _compute_joint_benefits(self, candidates: list[_Scored]) -> None:
        """Joint benefits for candidate pairs whose footprints overlap;
        disjoint questions are treated as uncorrelated outright."""
        cap = self.state.config.pairwise_benefit_cap
        overlapping: list[tuple[int, tuple, tuple]] = []
        for a, b in itertools.combinations(candidates, 2):
            shared = len(a.question.footprint() & b.question.footprint())
            if shared:
                overlapping.append((-shared, a.question.key(), b.question.key()))
        overlapping.sort()
        by_key = {s.question.key(): s for s in candidates}
        for _, ka, kb in overlapping[:cap]:
            a, b = by_key[ka], by_key[kb]
            joint = pair_expected_benefit(self.state, a.question, b.question,
                                          self.split_model)
            self._joint_cache[frozenset((ka, kb))] = joint
            if correlation_classify(a.benefit, b.benefit, joint) != "none":
                self._correlated.append((ka, kb))

    # -- selection ---------------------------------------------------------

    def _select(self, ranked: dict[str, list[_Scored]]) -> list[_Scored]:
        strategy = self.config.strategy
        if strategy in ("training_only", "cluster_only", "trans_only"):
            kind = self._usable_kinds()[0]
            pool = ranked.get(kind, [])
            return [pool[0]] if pool else []
        if strategy == "emec":
            if self._emec_phase == "training" and ranked.get("training"):
                return [ranked["training"][0]]
            pool = ranked.get("transformation", [])
            return [pool[0]] if pool else []
        if strategy == "interleave_random":
            candidates = self._top_k(ranked, self.config.k)
            if not candidates:
                return []
            return [candidates[int(self.rng.integers(len(candidates)))]]
        if strategy == "interleave_greedy":
            return self._select_greedy(ranked)
        k = 1 if strategy == "global_1" else self.k
        candidates = self._top_k(ranked, k)
        if not candidates:
            return []
        self._ensure_benefits(candidates, strategy == "global_k_corr_b")
        if strategy == "global_k_corr_b":
            return self._select_batch(candidates)
        if all((s.benefit or 0.0) == 0.0 for s in candidates):
            log.info("iteration %d: all benefits zero, local fallback",
                     self.iteration)
            return [min(candidates,
                        key=lambda s: (-s.local_ratio, s.cost, s.question.key()))]
        return [min(candidates,
                    key=lambda s: (-s.ratio, s.cost, s.question.key()))]

    def _select_greedy(self, ranked: dict[str, list[_Scored]]) -> list[_Scored]:
        """Stick with the question type whose last answer moved the most
        golden records; types never tried yet get their chance first."""
        available = [kind for kind in KINDS if ranked.get(kind)]
        if not available:
            return []
        if self._greedy_choice and self._greedy_choice not in available:
            # The type we were riding ran out of questions; forget the old
            # measurements and give every remaining type a fresh shot.
            self._greedy_realized.clear()
        for kind in available:
            if kind not in self._greedy_realized:
                self._greedy_choice = kind
                return [ranked[kind][0]]
        best = max(self._greedy_realized[t] for t in available)
        tied = [t for t in available if self._greedy_realized[t] == best]
        if len(tied) == 1:
            kind = tied[0]
        else:
            # Measurements tie (typically all zero on a plateau); rotate
            # through the tied types so no type starves.
            order = {t: i for i, t in enumerate(KINDS)}
            start = order.get(self._greedy_choice, -1)
            kind = min(tied, key=lambda t: (order[t] - start - 1) % len(KINDS))
        self._greedy_choice = kind
        return [ranked[kind][0]]

    def _select_batch(self, candidates: list[_Scored]) -> list[_Scored]:
        if all((s.benefit or 0.0) == 0.0 for s in candidates):
            log.info("iteration %d: all benefits zero, local fallback",
                     self.iteration)
            return [min(candidates,
                        key=lambda s: (-s.local_ratio, s.cost, s.question.key()))]
        by_key = {s.question.key(): s for s in candidates}
        keys = sorted(by_key)
        edges = [(a, b) for a, b in self._correlated
                 if a in by_key and b in by_key]
        groups = group_questions(keys, edges)
        b = choose_b(groups, self.config.b)
        benefits = {k: by_key[k].benefit or 0.0 for k in keys}
        costs = {k: by_key[k].cost for k in keys}
        chosen_keys, _ = allocate_batch(groups, benefits, self._joint_cache,
                                        costs, b,
                                        self.config.subset_enumeration_cap)
        chosen = [by_key[k] for k in chosen_keys]
        chosen.sort(key=lambda s: (-s.ratio, s.cost, s.question.key()))
        return chosen

    # -- seed-rule phase ---------------------------------------------------

    def _next_seed(self) -> _Scored | None:
        """The next seed-rule candidate, or None when the phase is over.
        Raises when a direction ran out of candidates without an approval."""
        if self._seed_queues is None:
            pools = self._pools()
            ctx = utility_context(self.state)
            ranked = [
                _Scored(q, local_score(self.state, q, ctx),
                        self.config.costs.question_cost(q))
                for q in pools["training"]
            ]
            ranked.sort(key=lambda s: (-s.local_ratio, s.cost, s.question.key()))
            self._seed_queues = {
                d: [s for s in ranked if s.question.predicate.direction == d]
                for d in self._seed_directions
            }
        while self._seed_direction_idx < len(self._seed_directions):
            direction = self._seed_directions[self._seed_direction_idx]
            queue = self._seed_queues[direction]
            if self._seed_pos < len(queue):
                return queue[self._seed_pos]
            if queue:
                raise ColdStartError(
                    f"every candidate {direction} seed rule was rejected")
            self._seed_direction_idx += 1
            self._seed_pos = 0
        if self._seed_deltas:
            self.state = apply_deltas(self.state, self._seed_deltas,
                                      self._seed_commits)
        self._phase = "loop"
        self._report()
        return None

    def _commit_seed(self, scored: _Scored, answer: Answer) -> None:
        delta = answer_to_delta(self.state, scored.question, answer)
        self.state.asked.add(scored.question.key())
        self.asked.append(AskedRecord(0, scored.question, answer, scored.cost))
        self.n_asked += 1
        if answer.verdict == "yes":
            self._seed_deltas.append(delta)
            self._seed_commits.append((scored.question, answer))
            self._seed_direction_idx += 1
            self._seed_pos = 0
        else:
            self._seed_pos += 1

    # -- the loop ----------------------------------------------------------

    def open_iteration(self) -> list[_Scored] | None:
        """Select what to ask next; idempotent while an iteration is open.
        Returns None once the session is finished.

        The two seed rules (asked before the budget starts counting) flow
        through here as single-question iterations; afterwards each call
        runs one round of pool regeneration and strategy selection.
        """
        if self._pending is not None:
            return self._pending
        if self.stop_reason:
            return None
        if self._phase == "seed":
            scored = self._next_seed()
            if scored is not None:
                self._pending = [scored]
                return self._pending
        return self._open_loop_iteration()

    def _open_loop_iteration(self) -> list[_Scored] | None:
        self.iteration += 1
        pools = self._pools()
        remaining = self.config.budget - self.spent
        if sum(len(pools.get(k, ())) for k in self._usable_kinds()) == 0:
            self.stop_reason = "pool_exhausted"
            return None
        for kind in self._usable_kinds():
            pools[kind] = [q for q in pools.get(kind, ())
                           if self.config.costs.question_cost(q) <= remaining + 1e-9]
        ranked = self._score_pool(pools)
        if not any(ranked.values()):
            self.stop_reason = "budget_exhausted"
            return None
        chosen = self._select(ranked)
        if not chosen:
            self.stop_reason = "pool_exhausted"
            return None
        # Keep what fits; anything beyond the remaining budget stays open.
        batch: list[_Scored] = []
        budgeted = 0.0
        for s in chosen:
            if self.spent + budgeted + s.cost <= self.config.budget + 1e-9:
                batch.append(s)
                budgeted += s.cost
        if not batch:
            self.stop_reason = "budget_exhausted"
            return None
        self._pending = batch
        self._pending_ranked = ranked
        return batch

    def commit(self, answers: list[Answer]) -> QualityReport | None:
        """Fold the answers for the open iteration in.

        Answers must line up one-to-one with the open batch.  All of them
        are validated (and turned into deltas) before any bookkeeping
        mutates, so a bad answer leaves the session untouched.  Returns the
        iteration's QualityReport, or None while still in the seed phase.
        """
        if self._pending is None:
            raise RuntimeError("no open iteration to commit")
        batch = self._pending
        if len(answers) != len(batch):
            raise ValueError(f"expected {len(batch)} answers, got {len(answers)}")
        if self._phase == "seed":
            self._commit_seed(batch[0], answers[0])
            self._pending = None
            return None
        deltas = [answer_to_delta(self.state, s.question, a)
                  for s, a in zip(batch, answers)]
        commits = []
        for s, answer in zip(batch, answers):
            self.state.asked.add(s.question.key())
            self.asked.append(AskedRecord(self.iteration, s.question, answer,
                                          s.cost))
            self.n_asked += 1
            commits.append((s.question, answer))
            if isinstance(s.question, ClusterQuestion):
                self.split_model.update(s.question, answer)
        before = self.state
        self.state = apply_deltas(self.state, deltas, commits)
        self.spent += sum(s.cost for s in batch)
        # Speculations were made against the pre-commit state; none of them
        # are valid now.
        self._benefit_cache.clear()
        self._joint_cache.clear()
        self._correlated = []
        self._joints_valid = False
        self._after_commit(before, batch, self._pending_ranked or {})
        self._report()
        self._trace(batch)
        self._pending = None
        self._pending_ranked = None
        return self.reports[-1]

    def step(self) -> bool:
        """One ask-and-commit round against the answer source; False when
        the session is over."""
        batch = self.open_iteration()
        if batch is None:
            return False
        answers = [self.answer_source.answer(s.question, self.state.dataset)
                   for s in batch]
        self.commit(answers)
        return True

    def _after_commit(self, before: PipelineState, batch: list[_Scored],
                      ranked: dict[str, list[_Scored]]) -> None:
        realized = golden_change_count(before.goldens, self.state.goldens)
        if self.config.strategy == "interleave_greedy":
            self._greedy_realized[self._greedy_choice] = realized
        if self.config.strategy == "emec" and self._emec_phase == "training":
            moved = cluster_change_fraction(before.clusters, self.state.clusters,
                                            len(self.state.dataset))
            if moved < 0.01:
                self._emec_phase = "transformation"
        if self.config.auto_k and self.config.strategy in ("global_k",
                                                           "global_k_corr_b"):
            last = batch[0].question
            pool = ranked.get(last.kind, [])
            for rank, s in enumerate(pool, start=1):
                if s.question.key() == last.key():
                    self.k = max(1, min(rank, 25))
                    break

    def _report(self) -> None:
        acc = f1 = None
        if self.truth is not None:
            acc = gr_accuracy(self.state.goldens, self.truth)
            _, _, f1 = cluster_prf(self.state.clusters, self.truth)
        self.reports.append(QualityReport(
            self.iteration, self.spent, self.n_asked, acc, f1))

    def _trace(self, batch: list[_Scored]) -> None:
        if not self.trace_path:
            return
        entries = []
        for s in batch:
            outcomes = []
            if s.breakdown is not None:
                outcomes = [[str(a.canonical()), p, n]
                            for a, p, n in s.breakdown.outcomes]
            entries.append({
                "question": str(s.question.key()),
                "local_score": s.local, "cost": s.cost,
                "benefit": s.benefit, "outcomes": outcomes,
                "ratio": s.ratio,
            })
        with open(self.trace_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"iteration": self.iteration,
                                 "asked": entries}) + "\n")

    def run(self) -> RunResult:
        if self.answer_source is None:
            raise ValueError("run() needs an answer source")
        while self.step():
            pass
        return RunResult(self.state, self.reports, self.asked, self.spent,
                         self.stop_reason)


def run_session(dataset: Dataset, engine_config: EngineConfig,
                config: SchedulerConfig, answer_source,
                truth: GroundTruth | None = None,
                trace_path: str | None = None) -> RunResult:
    """Run one full budgeted session and return its result."""
    return Session(dataset, engine_config, config, answer_source,
                   truth, trace_path).run()
