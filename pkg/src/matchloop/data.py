"""Records, datasets, ground truth, and synthetic corpus generation.

A :class:`Dataset` is an immutable snapshot of a record table.  Cell edits
(for example an approved transformation) produce a new snapshot with a
monotonically increasing revision, so every cached artifact downstream can
be keyed by revision.

CSV layout for a dataset::

    record_id,source_id,<attr1>,<attr2>,...

Ground truth ships as two CSVs: memberships (``record_id,entity_id``) and
goldens (``entity_id,<attr1>,...``).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Record:
    record_id: str
    source_id: str
    values: tuple[str, ...]


class Dataset:
    """An immutable table of records over a fixed schema."""

    def __init__(self, schema: tuple[str, ...], records: list[Record], revision: int = 0):
        self.schema = tuple(schema)
        self.records = tuple(records)
        self.revision = revision
        self._index = {r.record_id: i for i, r in enumerate(self.records)}
        if len(self._index) != len(self.records):
            raise ValueError("duplicate record_id in dataset")
        for r in self.records:
            if not r.record_id:
                raise ValueError("empty record_id")
            if len(r.values) != len(self.schema):
                raise ValueError(f"record {r.record_id} has {len(r.values)} values "
                                 f"for a {len(self.schema)}-attribute schema")
        self._attr_index = {a: i for i, a in enumerate(self.schema)}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def record(self, record_id: str) -> Record:
        return self.records[self._index[record_id]]

    def index_of(self, record_id: str) -> int:
        return self._index[record_id]

    @property
    def record_ids(self) -> list[str]:
        return [r.record_id for r in self.records]

    def attr_position(self, attribute: str) -> int:
        try:
            return self._attr_index[attribute]
        except KeyError:
            raise ValueError(f"unknown attribute: {attribute!r}") from None

    def value(self, record_id: str, attribute: str) -> str:
        return self.record(record_id).values[self.attr_position(attribute)]

    def column(self, attribute: str) -> list[str]:
        pos = self.attr_position(attribute)
        return [r.values[pos] for r in self.records]

    def apply_cell_updates(self, updates: list[tuple[str, str, str]]) -> tuple["Dataset", list[str]]:
        """Return a new snapshot with the given (record_id, attribute, value)
        cell edits applied, plus the sorted ids of touched records.

        No-op updates (the new value equals the current one) are dropped.
        """
        touched: dict[str, dict[int, str]] = {}
        for record_id, attribute, new_value in updates:
            pos = self.attr_position(attribute)
            if self.record(record_id).values[pos] != new_value:
                touched.setdefault(record_id, {})[pos] = new_value
        if not touched:
            return self, []
        new_records = list(self.records)
        for record_id, cells in touched.items():
            i = self._index[record_id]
            old = new_records[i]
            values = list(old.values)
            for pos, new_value in cells.items():
                values[pos] = new_value
            new_records[i] = Record(old.record_id, old.source_id, tuple(values))
        return Dataset(self.schema, new_records, self.revision + 1), sorted(touched)


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset CSV (RFC-4180, header row required)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header[:2] != ["record_id", "source_id"]:
            raise ValueError(f"{path}: header must start with record_id,source_id")
        schema = tuple(header[2:])
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} "
                                 f"columns, got {len(row)}")
            records.append(Record(row[0], row[1], tuple(row[2:])))
    return Dataset(schema, records)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "source_id", *dataset.schema])
        for r in dataset.records:
            writer.writerow([r.record_id, r.source_id, *r.values])


class GroundTruth:
    """Entity memberships plus the true golden record per entity."""

    def __init__(self, entity_of: dict[str, str], golden_of: dict[str, tuple[str, ...]]):
        self.entity_of = dict(entity_of)
        self.golden_of = dict(golden_of)
        for record_id, entity_id in self.entity_of.items():
            if entity_id not in self.golden_of:
                raise ValueError(f"record {record_id}: entity {entity_id} has no golden record")

    @property
    def entity_ids(self) -> list[str]:
        return sorted(self.golden_of)

    def members(self, entity_id: str) -> frozenset[str]:
        return frozenset(r for r, e in self.entity_of.items() if e == entity_id)

    def entity_sets(self) -> set[frozenset[str]]:
        groups: dict[str, set[str]] = {}
        for record_id, entity_id in self.entity_of.items():
            groups.setdefault(entity_id, set()).add(record_id)
        return {frozenset(v) for v in groups.values()}

    def true_golden(self, record_id: str) -> tuple[str, ...]:
        return self.golden_of[self.entity_of[record_id]]


def load_truth(memberships_path: str | Path, goldens_path: str | Path) -> GroundTruth:
    memberships_path = Path(memberships_path)
    goldens_path = Path(goldens_path)
    entity_of: dict[str, str] = {}
    with memberships_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["record_id", "entity_id"]:
            raise ValueError(f"{memberships_path}: header must be record_id,entity_id")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ValueError(f"{memberships_path}: line {lineno}: expected 2 columns")
            entity_of[row[0]] = row[1]
    golden_of: dict[str, tuple[str, ...]] = {}
    with goldens_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:1] != ["entity_id"]:
            raise ValueError(f"{goldens_path}: header must start with entity_id")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(f"{goldens_path}: line {lineno}: expected {width} columns")
            golden_of[row[0]] = tuple(row[1:])
    return GroundTruth(entity_of, golden_of)


def save_truth(truth: GroundTruth, schema: tuple[str, ...],
               memberships_path: str | Path, goldens_path: str | Path) -> None:
    memberships_path = Path(memberships_path)
    goldens_path = Path(goldens_path)
    memberships_path.parent.mkdir(parents=True, exist_ok=True)
    with memberships_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "entity_id"])
        for record_id in sorted(truth.entity_of):
            writer.writerow([record_id, truth.entity_of[record_id]])
    with goldens_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_id", *schema])
        for entity_id in sorted(truth.golden_of):
            writer.writerow([entity_id, *truth.golden_of[entity_id]])


# --------------------------------------------------------------------------
# Synthetic corpora
# --------------------------------------------------------------------------

# Long forms come first in generated values; the corruptor may swap in the
# short form, so mined transformation rules run short -> long.
ABBREVIATIONS = {
    "Street": "St",
    "Avenue": "Ave",
    "Boulevard": "Blvd",
    "Drive": "Dr",
    "Road": "Rd",
    "Laboratories": "Labs",
    "Corporation": "Corp",
    "Incorporated": "Inc",
    "Industries": "Ind",
    "Technologies": "Tech",
    "Department": "Dept",
    "University": "Univ",
    "Institute": "Inst",
    "International": "Intl",
    "Associates": "Assoc",
}

_NAME_WORDS = [
    "Acme", "Borealis", "Cascade", "Delta", "Evergreen", "Falcon", "Granite",
    "Harbor", "Ionic", "Juniper", "Keystone", "Lakeside", "Meridian", "Northgate",
    "Orchard", "Pinnacle", "Quarry", "Redwood", "Summit", "Tidewater", "Umber",
    "Vanguard", "Westfield", "Yellowstone", "Zephyr", "Alder", "Basalt", "Cobalt",
    "Dune", "Ember", "Flint", "Gale", "Heron", "Iris", "Jade", "Kiln", "Larch",
    "Maple", "Nimbus", "Onyx", "Prairie", "Quill", "Raven", "Slate", "Thicket",
]

_ORG_SUFFIXES = ["Corporation", "Incorporated", "Laboratories", "Industries",
                 "Technologies", "Associates", "International"]

_STREET_WORDS = [
    "Vassar", "Oxford", "Gilman", "Amherst", "Birch", "Cedar", "Dover",
    "Elm", "Franklin", "Grove", "Hawthorn", "Ivy", "Jackson", "Kendall",
    "Linden", "Mason", "Norfolk", "Orchard", "Porter", "Quincy", "Ridge",
    "Spruce", "Tremont", "Union", "Walnut",
]

_STREET_SUFFIXES = ["Street", "Avenue", "Boulevard", "Drive", "Road"]

_CITIES = ["Cambridge", "Somerville", "Medford", "Arlington", "Belmont",
           "Waltham", "Newton", "Quincy"]


@dataclass(frozen=True)
class CorruptionSpec:
    """Parameters for a synthetic corpus.

    Rates are per-cell probabilities; at most one error kind is injected
    into any one cell, so cell provenance stays auditable.
    """

    n_entities: int = 50
    records_per_entity: tuple[int, int] = (2, 5)
    abbreviation_rate: float = 0.0
    numeric_suffix_rate: float = 0.0
    typo_rate: float = 0.0
    case_rate: float = 0.0
    drop_token_rate: float = 0.0
    # Fraction of entities that also get a same-name sibling entity at a
    # different address and code.  Siblings are easy to merge by mistake,
    # so they exercise cluster repair rather than the matcher alone.
    franchise_rate: float = 0.0
    # Record-count range for sibling entities; None means the same range
    # as everyone else.  Real branch offices tend to be thinner.
    franchise_records: tuple[int, int] | None = None
    seed: int = 0

    @classmethod
    def from_json(cls, path: str | Path) -> "CorruptionSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "records_per_entity" in raw:
            raw["records_per_entity"] = tuple(raw["records_per_entity"])
        if raw.get("franchise_records") is not None:
            raw["franchise_records"] = tuple(raw["franchise_records"])
        return cls(**raw)


SYNTH_SCHEMA = ("name", "address", "code")

_ORDINALS = {1: "st", 2: "nd", 3: "rd"}


def _ordinal_suffix(number: int) -> str:
    if number % 100 in (11, 12, 13):
        return "th"
    return _ORDINALS.get(number % 10, "th")


def _make_entities(spec: CorruptionSpec, rng: np.random.Generator):
    """Sample distinct clean entities: (name, address, code) tuples."""
    entities: list[tuple[str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    guard = 0
    while len(entities) < spec.n_entities:
        guard += 1
        if guard > spec.n_entities * 50:
            raise RuntimeError("could not sample enough distinct entities")
        w1, w2 = rng.choice(len(_NAME_WORDS), size=2, replace=False)
        suffix = _ORG_SUFFIXES[rng.integers(len(_ORG_SUFFIXES))]
        name = f"{_NAME_WORDS[w1]} {_NAME_WORDS[w2]} {suffix}"
        number = int(rng.integers(1, 999))
        street = _STREET_WORDS[rng.integers(len(_STREET_WORDS))]
        street_suffix = _STREET_SUFFIXES[rng.integers(len(_STREET_SUFFIXES))]
        city = _CITIES[rng.integers(len(_CITIES))]
        address = f"{number} {street} {street_suffix} {city}"
        code = f"{int(rng.integers(10000, 99999)):05d}"
        golden = (name, address, code)
        if golden in seen:
            continue
        seen.add(golden)
        entities.append(golden)
    if spec.franchise_rate > 0:
        n_extra = int(round(spec.franchise_rate * spec.n_entities))
        for base_name, _, _ in entities[:n_extra]:
            while True:
                number = int(rng.integers(1, 999))
                street = _STREET_WORDS[rng.integers(len(_STREET_WORDS))]
                street_suffix = _STREET_SUFFIXES[rng.integers(len(_STREET_SUFFIXES))]
                city = _CITIES[rng.integers(len(_CITIES))]
                address = f"{number} {street} {street_suffix} {city}"
                code = f"{int(rng.integers(10000, 99999)):05d}"
                golden = (base_name, address, code)
                if golden not in seen:
                    break
            seen.add(golden)
            entities.append(golden)
    return entities


def _corrupt_cell(value: str, attribute: str, spec: CorruptionSpec,
                  rng: np.random.Generator) -> str:
    """Inject at most one error kind into one cell.

    The error kind is drawn from the configured rates; a drawn kind that is
    not applicable to this value (no abbreviatable token, no digit token,
    and so on) leaves the cell clean.
    """
    u = rng.random()
    kinds = [
        ("abbreviation", spec.abbreviation_rate),
        ("numeric_suffix", spec.numeric_suffix_rate),
        ("typo", spec.typo_rate),
        ("case", spec.case_rate),
        ("drop_token", spec.drop_token_rate),
    ]
    chosen = None
    acc = 0.0
    for kind, rate in kinds:
        acc += rate
        if u < acc:
            chosen = kind
            break
    if chosen is None:
        return value

    tokens = value.split()
    if chosen == "abbreviation":
        slots = [i for i, t in enumerate(tokens) if t in ABBREVIATIONS]
        if not slots:
            return value
        i = slots[rng.integers(len(slots))]
        tokens[i] = ABBREVIATIONS[tokens[i]]
        return " ".join(tokens)
    if chosen == "numeric_suffix":
        slots = [i for i, t in enumerate(tokens) if t.isdigit()]
        if not slots:
            return value
        i = slots[rng.integers(len(slots))]
        number = int(tokens[i])
        tokens[i] = tokens[i] + _ordinal_suffix(number)
        return " ".join(tokens)
    if chosen == "typo":
        if not value:
            return value
        pos = int(rng.integers(len(value)))
        alphabet = "0123456789" if attribute == "code" else "abcdefghijklmnopqrstuvwxyz"
        op = rng.integers(3)
        if op == 0 and len(value) > 1:  # delete
            return value[:pos] + value[pos + 1:]
        if op == 1:  # insert
            return value[:pos] + alphabet[rng.integers(len(alphabet))] + value[pos:]
        replacement = alphabet[rng.integers(len(alphabet))]
        if replacement == value[pos]:
            replacement = alphabet[(alphabet.index(replacement) + 1) % len(alphabet)]
        return value[:pos] + replacement + value[pos + 1:]
    if chosen == "case":
        if value.lower() == value:
            return value
        return value.lower()
    if chosen == "drop_token":
        if len(tokens) < 2 or attribute == "code":
            return value
        i = int(rng.integers(len(tokens)))
        del tokens[i]
        return " ".join(tokens)
    return value


def generate_corpus(spec: CorruptionSpec) -> tuple[Dataset, GroundTruth]:
    """Generate a corrupted corpus plus its ground truth, deterministically."""
    lo, hi = spec.records_per_entity
    if lo < 1 or hi < lo:
        raise ValueError(f"bad records_per_entity range: {spec.records_per_entity}")
    rng = np.random.default_rng(spec.seed)
    entities = _make_entities(spec, rng)
    records: list[Record] = []
    entity_of: dict[str, str] = {}
    golden_of: dict[str, tuple[str, ...]] = {}
    counter = 0
    width = len(str(len(entities) * hi + 1))
    for e, golden in enumerate(entities):
        entity_id = f"e{e + 1:04d}"
        golden_of[entity_id] = golden
        if e >= spec.n_entities and spec.franchise_records is not None:
            f_lo, f_hi = spec.franchise_records
            n_copies = int(rng.integers(f_lo, f_hi + 1))
        else:
            n_copies = int(rng.integers(lo, hi + 1))
        for _ in range(n_copies):
            counter += 1
            record_id = f"r{counter:0{width}d}"
            source_id = f"s{int(rng.integers(1, 6))}"
            values = tuple(
                _corrupt_cell(golden[a], SYNTH_SCHEMA[a], spec, rng)
                for a in range(len(SYNTH_SCHEMA))
            )
            records.append(Record(record_id, source_id, values))
            entity_of[record_id] = entity_id
    dataset = Dataset(SYNTH_SCHEMA, records)
    return dataset, GroundTruth(entity_of, golden_of)
