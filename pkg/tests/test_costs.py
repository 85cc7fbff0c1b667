"""Cost model formulas, floors, and question-object dispatch."""

import pytest
from hypothesis import given, strategies as st

from matchloop.costs import CostModel
from matchloop.matcher import RulePredicate
from matchloop.questions import (ClusterQuestion, TrainingRuleQuestion,
                                 TransformationQuestion)
from matchloop.transforms import TransformationRule


@pytest.fixture(scope="module")
def model():
    return CostModel()


# Reference values computed independently with 50-digit arithmetic and
# rounded to double precision.
TRAINING_CASES = [
    (1, 1.0903548889591250),    # 8 ln 4 - 10
    (10, 10.519594859692294),   # 8 ln 13 - 10
    (100, 27.101689694606596),  # 8 ln 103 - 10
]

CLUSTER_CASES = [
    (2, 0.64),    # 4/100 + 3/5
    (5, 1.45),    # 25/100 + 6/5
    (10, 3.2),    # 100/100 + 11/5
]

TRANSFORMATION_CASES = [
    (1, 1.0),     # 1.5 / 1.5
    (4, 3.0),     # 4.5 / 1.5
    (10, 7.0),    # 10.5 / 1.5
]


@pytest.mark.parametrize("size,expected", TRAINING_CASES)
def test_training_cost(model, size, expected):
    assert model.training_cost(size) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("size,expected", CLUSTER_CASES)
def test_cluster_cost(model, size, expected):
    assert model.cluster_cost(size) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("size,expected", TRANSFORMATION_CASES)
def test_transformation_cost(model, size, expected):
    assert model.transformation_cost(size) == pytest.approx(expected, abs=1e-9)


def test_floors(model):
    # 8 ln 3 - 10 < 0, 1/100 + 2/5 < 0.5, 0.5/1.5 < 0.5: all clamp.
    assert model.training_cost(0) == 0.5
    assert model.cluster_cost(1) == 0.5
    assert model.transformation_cost(0) == 0.5


@given(st.integers(min_value=0, max_value=10_000))
def test_costs_positive_and_monotone(size):
    model = CostModel()
    for fn in (model.training_cost, model.cluster_cost,
               model.transformation_cost):
        assert fn(size) >= 0.5
        assert fn(size + 1) >= fn(size)


def _pairs(n):
    return tuple((f"r{i:03d}", f"s{i:03d}") for i in range(n))


def test_dispatch_training(model):
    predicate = RulePredicate("name", "token_jaccard", 0.8, "match")
    question = TrainingRuleQuestion(predicate, _pairs(10), _pairs(3))
    assert model.question_cost(question) == pytest.approx(
        10.519594859692294, abs=1e-9)


def test_dispatch_cluster(model):
    question = ClusterQuestion(frozenset(f"r{i}" for i in range(10)), ())
    assert model.question_cost(question) == pytest.approx(3.2, abs=1e-9)


def test_dispatch_cluster_hierarchy_prices_per_node(model):
    question = ClusterQuestion(frozenset(f"r{i}" for i in range(5)), (),
                               hierarchy_node_count=3)
    assert model.question_cost(question) == pytest.approx(
        3 * model.cluster_cost(5), abs=1e-12)


def test_dispatch_transformation(model):
    rule = TransformationRule("address", "literal", "St", "Street", 3)
    question = TransformationQuestion(rule, ("r001",), affected_count=4)
    assert model.question_cost(question) == pytest.approx(3.0, abs=1e-9)


def test_unknown_kind_rejected(model):
    class Odd:
        kind = "odd"
        size = 1

    with pytest.raises(ValueError):
        model.question_cost(Odd())
