"""Shared fixtures: small synthetic corpora and prepared pipeline states."""

from __future__ import annotations

import pytest

from matchloop.data import CorruptionSpec, generate_corpus
from matchloop.engine import EngineConfig, PipelineState, fit_matcher_model

TINY_SPEC = CorruptionSpec(
    n_entities=6, records_per_entity=(2, 4),
    abbreviation_rate=0.10, numeric_suffix_rate=0.08,
    typo_rate=0.08, case_rate=0.05, drop_token_rate=0.08,
    seed=7)

SMALL_SPEC = CorruptionSpec(
    n_entities=12, records_per_entity=(3, 5),
    abbreviation_rate=0.06, numeric_suffix_rate=0.05,
    typo_rate=0.08, case_rate=0.05, drop_token_rate=0.10,
    franchise_rate=0.5, franchise_records=(2, 3),
    seed=11)


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_corpus(TINY_SPEC)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(SMALL_SPEC)


def make_state(dataset, truth, n_labels: int = 40,
               **config_overrides) -> PipelineState:
    """A pipeline state with a model trained on truth-derived labels.

    The first ``n_labels`` candidate pairs (canonical order) are labeled
    straight from ground truth, which is enough signal for a usable
    matcher on the fixture corpora.
    """
    config = EngineConfig.for_schema(dataset.schema, code_attribute="code",
                                     **config_overrides)
    state = PipelineState(dataset, config)
    labels = []
    for pair in state.matcher.pairs[:n_labels]:
        a, b = pair
        labels.append((pair, int(truth.entity_of[a] == truth.entity_of[b])))
    state.store.add_all(labels, pin=False)
    if state.store.has_both_classes():
        state.matcher.set_model(
            fit_matcher_model(state.store, state.matcher, config))
        state.trained_version = state.store.version
    from matchloop.engine import machine_clusters
    from matchloop.consolidate import consolidate
    state.clusters = machine_clusters(state)
    state.goldens = consolidate(state.dataset, state.clusters, state.counts)
    return state


@pytest.fixture(scope="session")
def tiny_state(tiny_corpus):
    dataset, truth = tiny_corpus
    return make_state(dataset, truth)


@pytest.fixture(scope="session")
def small_state(small_corpus):
    dataset, truth = small_corpus
    return make_state(dataset, truth)
