"""Mining and applying value transformation rules.

Within a cluster, variant spellings of the same attribute value differ in
short token runs ("50th" vs "50", "EE" vs "Electrical Engineering").  Token
sequences are aligned pairwise by their longest common subsequence; the
mismatched gaps between anchor tokens yield substitution pairs (v, v'),
oriented from the cluster-minority form to the majority form.

Pairs of the shape digits+ordinal-suffix vs the same digits collapse into a
single per-attribute ``numeric_suffix`` rule (strip th/st/nd/rd).  A rule's
frequency is the number of clusters exhibiting it, which is also its
question size.

Token layer note: mining and application split on whitespace and keep the
original casing, so an approved rule rewrites exactly the surface forms a
reviewer saw; rewritten values are re-joined with single spaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .data import Dataset

_SUFFIXED_RE = re.compile(r"^(\d+)(th|st|nd|rd)$")
_DIGIT_RE = re.compile(r"\d")

MAX_GAP_TOKENS = 2


@dataclass(frozen=True)
class TransformationRule:
    attribute: str
    kind: str  # "literal" | "numeric_suffix"
    source: str  # v (empty for numeric_suffix)
    target: str  # v' (empty for numeric_suffix)
    frequency: int

    def key(self) -> tuple:
        return ("transformation", self.attribute, self.kind, self.source, self.target)

    def describe(self) -> str:
        if self.kind == "numeric_suffix":
            return f"{self.attribute}: #th -> #"
        return f"{self.attribute}: {self.source} -> {self.target}"


def lcs_tokens(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    """Index pairs of one longest common subsequence of two token lists."""
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        row, nxt = dp[i], dp[i + 1]
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                row[j] = nxt[j] if nxt[j] >= row[j + 1] else row[j + 1]
    out = []
    i = j = 0
    while i < n and j < m:
        if a[i] == b[j]:
            out.append((i, j))
            i += 1
            j += 1
        elif dp[i + 1][j] >= dp[i][j + 1]:
            i += 1
        else:
            j += 1
    return out


def _gap_pairs(a: list[str], b: list[str]) -> list[tuple[str, str]]:
    """Mismatched gap substitutions between LCS anchors.

    Both gap sides must be non-empty runs of at most MAX_GAP_TOKENS tokens;
    pure insertions or deletions are not substitutions and are skipped.
    """
    anchors = lcs_tokens(a, b)
    slots = []
    prev_i = prev_j = 0
    for i, j in anchors + [(len(a), len(b))]:
        slots.append(((prev_i, i), (prev_j, j)))
        prev_i, prev_j = i + 1, j + 1
    pairs = []
    for (ai, aj), (bi, bj) in slots:
        ga = a[ai:aj]
        gb = b[bi:bj]
        if not ga or not gb:
            continue
        if len(ga) > MAX_GAP_TOKENS or len(gb) > MAX_GAP_TOKENS:
            continue
        va, vb = " ".join(ga), " ".join(gb)
        if va != vb:
            pairs.append((va, vb))
    return pairs


def _contains_run(tokens: list[str], form: str) -> bool:
    run = form.split()
    k = len(run)
    return any(tokens[i:i + k] == run for i in range(len(tokens) - k + 1))


def align_cluster_values(values: list[str]) -> list[tuple[str, str]]:
    """Oriented substitution pairs mined from one cluster's attribute values.

    Orientation runs minority form -> majority form, counting how many of
    the given values contain each form as a token run; ties prefer the
    shorter form as the source, then lexicographic order.
    """
    token_lists = [v.split() for v in values]
    distinct = sorted({tuple(t) for t in token_lists if t})
    raw: set[frozenset[str]] = set()
    for i in range(len(distinct)):
        for j in range(i + 1, len(distinct)):
            for va, vb in _gap_pairs(list(distinct[i]), list(distinct[j])):
                raw.add(frozenset((va, vb)))
    oriented = []
    for forms in raw:
        x, y = sorted(forms)
        cx = sum(1 for t in token_lists if _contains_run(t, x))
        cy = sum(1 for t in token_lists if _contains_run(t, y))
        if cx < cy:
            source, target = x, y
        elif cy < cx:
            source, target = y, x
        elif len(x.split()) != len(y.split()):
            source, target = (x, y) if len(x.split()) < len(y.split()) else (y, x)
        elif len(x) != len(y):
            source, target = (x, y) if len(x) < len(y) else (y, x)
        else:
            source, target = x, y
        oriented.append((source, target))
    return sorted(oriented)


def _is_suffix_pair(source: str, target: str) -> bool:
    m = _SUFFIXED_RE.match(source)
    return bool(m) and m.group(1) == target


def generate_rules(dataset: Dataset, clusters: list[frozenset[str]]
                   ) -> list[TransformationRule]:
    """Mine transformation rules from every multi-record cluster.

    Literal rules carry one (v, v') pair; all suffixed-number pairs per
    attribute collapse into one numeric_suffix rule.  Frequency counts the
    distinct clusters containing the pair (for the collapsed rule, any of
    its pairs).  Rules are ordered by frequency descending, then by key.
    """
    literal_clusters: dict[tuple[str, str, str], set[frozenset[str]]] = {}
    suffix_clusters: dict[str, set[frozenset[str]]] = {}
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        members = sorted(cluster)
        for attribute in dataset.schema:
            values = [dataset.value(r, attribute) for r in members]
            for source, target in align_cluster_values(values):
                if _is_suffix_pair(source, target) or _is_suffix_pair(target, source):
                    suffix_clusters.setdefault(attribute, set()).add(cluster)
                else:
                    key = (attribute, source, target)
                    literal_clusters.setdefault(key, set()).add(cluster)
    rules = [
        TransformationRule(attribute, "literal", source, target, len(cs))
        for (attribute, source, target), cs in literal_clusters.items()
    ]
    rules.extend(
        TransformationRule(attribute, "numeric_suffix", "", "", len(cs))
        for attribute, cs in suffix_clusters.items()
    )
    rules.sort(key=lambda r: (-r.frequency, r.key()))
    return rules


def _rewrite_value(value: str, rule: TransformationRule) -> str:
    if rule.kind == "numeric_suffix":
        # Suffixed numbers need a digit somewhere; most cells have none.
        if not _DIGIT_RE.search(value):
            return value
        out = []
        changed = False
        for t in value.split():
            m = _SUFFIXED_RE.match(t)
            if m:
                out.append(m.group(1))
                changed = True
            else:
                out.append(t)
        return " ".join(out) if changed else value
    run = rule.source.split()
    # The first source token must appear verbatim for the run to match, so
    # a substring miss rules the cell out without tokenizing it.
    if not run or run[0] not in value:
        return value
    tokens = value.split()
    k = len(run)
    out = []
    i = 0
    changed = False
    while i < len(tokens):
        if tokens[i:i + k] == run:
            out.extend(rule.target.split())
            i += k
            changed = True
        else:
            out.append(tokens[i])
            i += 1
    return " ".join(out) if changed else value


def affected_cells(dataset: Dataset, rule: TransformationRule
                   ) -> list[tuple[str, str, str]]:
    """Cell updates (record_id, attribute, new_value) the rule would make."""
    updates = []
    pos = dataset.attr_position(rule.attribute)
    for r in dataset:
        value = r.values[pos]
        rewritten = _rewrite_value(value, rule)
        if rewritten != value:
            updates.append((r.record_id, rule.attribute, rewritten))
    return updates


def affected_records(dataset: Dataset, rule: TransformationRule) -> list[str]:
    """Ids of records the rule would touch, sorted."""
    return sorted(u[0] for u in affected_cells(dataset, rule))


def apply_rule(dataset: Dataset, rule: TransformationRule
               ) -> tuple[Dataset, list[str]]:
    """Apply the rule to every affected cell; returns the new snapshot and
    the touched record ids."""
    return dataset.apply_cell_updates(affected_cells(dataset, rule))


def form_counts(dataset: Dataset, rule: TransformationRule) -> tuple[int, int]:
    """How many records carry the rule's source form vs its target form.

    Containment is by token run; the generalized numeral rule counts
    suffixed numerals on the source side and bare numerals on the target
    side.  A record carrying both forms counts on both sides.
    """
    pos = dataset.attr_position(rule.attribute)
    n_source = n_target = 0
    for r in dataset:
        tokens = r.values[pos].split()
        if not tokens:
            continue
        if rule.kind == "numeric_suffix":
            has_source = any(_SUFFIXED_RE.match(t) for t in tokens)
            has_target = any(t.isdigit() for t in tokens)
        else:
            has_source = _contains_run(tokens, rule.source)
            has_target = _contains_run(tokens, rule.target)
        n_source += has_source
        n_target += has_target
    return n_source, n_target
