"""Similarity function values, ranges, and spec dispatch."""

import pytest
from hypothesis import given, strategies as st

from matchloop.similarity import (SimilaritySpec, exact_equality, levenshtein,
                                  normalized_edit_similarity,
                                  similarity_function, token_jaccard, tokenize)

text = st.text(alphabet=st.characters(codec="ascii"), max_size=24)


def test_tokenize():
    assert tokenize("Meridian  Labs, Inc.") == ["meridian", "labs", "inc"]
    assert tokenize("12 Vassar Street") == ["12", "vassar", "street"]
    assert tokenize("---") == []
    assert tokenize("") == []


def test_token_jaccard_values():
    assert token_jaccard("Acme Corp", "Acme Corporation") == pytest.approx(1 / 3)
    assert token_jaccard("Acme Corp", "acme CORP") == 1.0
    assert token_jaccard("Acme", "Borealis") == 0.0
    assert token_jaccard("", "Acme") == 0.0
    assert token_jaccard("12 Vassar St", "Vassar Street 12") == pytest.approx(0.5)


def test_levenshtein_values():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("flaw", "lawn") == 2
    assert levenshtein("", "abc") == 3
    assert levenshtein("abc", "abc") == 0
    assert levenshtein("ab", "ba") == 2


def test_normalized_edit_similarity_values():
    assert normalized_edit_similarity("kitten", "sitting") == pytest.approx(4 / 7)
    assert normalized_edit_similarity("abc", "abc") == 1.0
    assert normalized_edit_similarity("", "abc") == 0.0


def test_exact_equality_values():
    assert exact_equality("a", "a") == 1.0
    assert exact_equality("a", "b") == 0.0
    assert exact_equality("", "") == 0.0


@given(text, text)
def test_functions_symmetric_and_bounded(a, b):
    for fn in (token_jaccard, normalized_edit_similarity, exact_equality):
        assert fn(a, b) == fn(b, a)
        assert 0.0 <= fn(a, b) <= 1.0


@given(text, text)
def test_levenshtein_bounds(a, b):
    d = levenshtein(a, b)
    assert d == levenshtein(b, a)
    assert abs(len(a) - len(b)) <= d <= max(len(a), len(b), 0) or (a == b and d == 0)
    assert (d == 0) == (a == b)


@given(text)
def test_identity(a):
    assert levenshtein(a, a) == 0
    if tokenize(a):
        assert token_jaccard(a, a) == 1.0


def test_spec_defaults_and_overrides():
    spec = SimilaritySpec({"code": "exact_equality"})
    assert spec.function_name("name") == "token_jaccard"
    assert spec.function_name("code") == "exact_equality"
    assert spec.compare("code", "42", "42") == 1.0
    assert spec.compare("name", "Acme Corp", "Acme Corporation") == pytest.approx(1 / 3)


def test_unknown_function_rejected():
    with pytest.raises(ValueError):
        similarity_function("soundex")
