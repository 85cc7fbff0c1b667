"""Attribute similarity functions and per-attribute configuration.

Three similarity functions are supported; a :class:`SimilaritySpec` assigns
one to each schema attribute.  All functions are symmetric, live in [0, 1],
and return 0.0 whenever either value is empty.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_TOKEN_RE = re.compile(r"[^0-9a-z]+")

SIMILARITY_FUNCTIONS = ("token_jaccard", "normalized_edit_similarity", "exact_equality")


def tokenize(value: str) -> list[str]:
    """Lowercase and split on any run of non-alphanumeric characters."""
    return [t for t in _TOKEN_RE.split(value.lower()) if t]


def token_set(value: str) -> frozenset[str]:
    return frozenset(tokenize(value))


def token_jaccard(a: str, b: str) -> float:
    """Jaccard similarity of the two values' token sets."""
    if not a or not b:
        return 0.0
    sa, sb = token_set(a), token_set(b)
    if not sa or not sb:
        return 0.0
    inter = len(sa & sb)
    if inter == 0:
        return 0.0
    return inter / (len(sa) + len(sb) - inter)


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_edit_similarity(a: str, b: str) -> float:
    """1 - edit_distance/max_length, or 0.0 if either value is empty."""
    if not a or not b:
        return 0.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def exact_equality(a: str, b: str) -> float:
    """1.0 for identical non-empty strings, else 0.0."""
    return 1.0 if a and a == b else 0.0


_FUNCTIONS = {
    "token_jaccard": token_jaccard,
    "normalized_edit_similarity": normalized_edit_similarity,
    "exact_equality": exact_equality,
}


def similarity_function(name: str):
    try:
        return _FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown similarity function: {name!r}") from None


@dataclass(frozen=True)
class SimilaritySpec:
    """Which similarity function scores each attribute.

    Attributes missing from ``functions`` default to ``token_jaccard``.
    """

    functions: dict[str, str] = field(default_factory=dict)

    def function_name(self, attribute: str) -> str:
        return self.functions.get(attribute, "token_jaccard")

    def function(self, attribute: str):
        return similarity_function(self.function_name(attribute))

    def compare(self, attribute: str, a: str, b: str) -> float:
        return self.function(attribute)(a, b)
