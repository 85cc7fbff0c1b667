"""Budgeted human-in-the-loop record matching and consolidation.

The package clusters duplicate records, consolidates each cluster into a
golden record, and spends a question budget on the human input that helps
most: validating matching rules, approving or splitting clusters, and
confirming value transformations.
"""

from .benefit import SplitThresholdModel, expected_benefit, local_score
from .consolidate import (GoldenRecords, cluster_prf, consolidate,
                          gr_accuracy)
from .costs import CostModel
from .data import (SYNTH_SCHEMA, CorruptionSpec, Dataset, GroundTruth,
                   Record, generate_corpus, load_dataset, load_truth,
                   save_dataset, save_truth)
from .engine import (EngineConfig, PipelineState, advance, apply_deltas,
                     answer_to_delta, full_recompute)
from .oracle import Answer, SimulatedOracle
from .scheduler import (STRATEGIES, ColdStartError, QualityReport, RunResult,
                        SchedulerConfig, Session, run_session)

__version__ = "0.1.0"

__all__ = [
    "Answer", "ColdStartError", "CorruptionSpec", "CostModel", "Dataset",
    "EngineConfig", "GoldenRecords", "GroundTruth", "PipelineState",
    "QualityReport", "Record", "RunResult", "STRATEGIES", "SYNTH_SCHEMA",
    "SchedulerConfig", "Session", "SimulatedOracle", "SplitThresholdModel",
    "advance", "answer_to_delta", "apply_deltas", "cluster_prf",
    "consolidate", "expected_benefit", "full_recompute", "generate_corpus",
    "gr_accuracy", "load_dataset", "load_truth", "local_score",
    "run_session", "save_dataset", "save_truth",
]
