"""Dataset snapshots, CSV round trips, and synthetic corpus generation."""

import json

import pytest

from matchloop.data import (SYNTH_SCHEMA, CorruptionSpec, Dataset, Record,
                            generate_corpus, load_dataset, load_truth,
                            save_dataset, save_truth)


def _dataset():
    return Dataset(("name", "code"), [
        Record("r1", "s1", ("Acme Corp", "101")),
        Record("r2", "s1", ("Acme", "101")),
        Record("r3", "s2", ("Borealis", "102")),
    ])


def test_dataset_accessors():
    ds = _dataset()
    assert len(ds) == 3
    assert ds.record_ids == ["r1", "r2", "r3"]
    assert ds.value("r2", "name") == "Acme"
    assert ds.column("code") == ["101", "101", "102"]
    assert ds.attr_position("code") == 1
    with pytest.raises(ValueError):
        ds.attr_position("missing")


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(("a",), [Record("r1", "s", ("x",)), Record("r1", "s", ("y",))])
    with pytest.raises(ValueError):
        Dataset(("a", "b"), [Record("r1", "s", ("x",))])
    with pytest.raises(ValueError):
        Dataset(("a",), [Record("", "s", ("x",))])


def test_apply_cell_updates():
    ds = _dataset()
    out, touched = ds.apply_cell_updates([("r1", "name", "Acme"),
                                          ("r3", "code", "102")])
    # The second update is a no-op and must not count as touched.
    assert touched == ["r1"]
    assert out.revision == ds.revision + 1
    assert out.value("r1", "name") == "Acme"
    assert ds.value("r1", "name") == "Acme Corp"
    same, none_touched = ds.apply_cell_updates([("r3", "code", "102")])
    assert same is ds and none_touched == []


def test_apply_cell_updates_last_write_wins():
    ds = _dataset()
    out, touched = ds.apply_cell_updates([("r1", "name", "X"),
                                          ("r1", "name", "Y")])
    assert touched == ["r1"]
    assert out.value("r1", "name") == "Y"


def test_dataset_csv_round_trip(tmp_path):
    ds = _dataset()
    path = tmp_path / "dataset.csv"
    save_dataset(ds, path)
    loaded = load_dataset(path)
    assert loaded.schema == ds.schema
    assert loaded.records == ds.records


def test_truth_csv_round_trip(tiny_corpus, tmp_path):
    _, truth = tiny_corpus
    save_truth(truth, SYNTH_SCHEMA, tmp_path / "m.csv", tmp_path / "g.csv")
    loaded = load_truth(tmp_path / "m.csv", tmp_path / "g.csv")
    assert loaded.entity_of == truth.entity_of
    assert loaded.golden_of == truth.golden_of


def test_load_dataset_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,name\n1,Acme\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_dataset(path)


def test_corruption_spec_from_json(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({
        "n_entities": 4, "records_per_entity": [2, 3],
        "typo_rate": 0.1, "franchise_rate": 0.5,
        "franchise_records": [1, 2], "seed": 3}), encoding="utf-8")
    spec = CorruptionSpec.from_json(path)
    assert spec.n_entities == 4
    assert spec.records_per_entity == (2, 3)
    assert spec.franchise_records == (1, 2)
    assert spec.typo_rate == 0.1


def test_generate_corpus_deterministic():
    spec = CorruptionSpec(n_entities=5, records_per_entity=(2, 3),
                          typo_rate=0.2, drop_token_rate=0.2, seed=4)
    d1, t1 = generate_corpus(spec)
    d2, t2 = generate_corpus(spec)
    assert d1.records == d2.records
    assert t1.entity_of == t2.entity_of
    assert t1.golden_of == t2.golden_of


def test_generate_corpus_structure(tiny_corpus):
    dataset, truth = tiny_corpus
    assert dataset.schema == SYNTH_SCHEMA
    assert set(truth.entity_of) == set(dataset.record_ids)
    for entity_id in truth.golden_of:
        assert len(truth.members(entity_id)) >= 1


def test_zero_noise_records_equal_goldens():
    spec = CorruptionSpec(n_entities=5, records_per_entity=(2, 4), seed=9)
    dataset, truth = generate_corpus(spec)
    for record in dataset:
        assert record.values == truth.true_golden(record.record_id)


def test_corruption_never_empties_cells():
    spec = CorruptionSpec(n_entities=20, records_per_entity=(3, 5),
                          abbreviation_rate=0.2, numeric_suffix_rate=0.2,
                          typo_rate=0.2, case_rate=0.2, drop_token_rate=0.2,
                          seed=13)
    dataset, _ = generate_corpus(spec)
    for record in dataset:
        for value in record.values:
            assert value.strip()


def test_codes_stay_numeric_under_typos():
    spec = CorruptionSpec(n_entities=20, records_per_entity=(3, 5),
                          typo_rate=0.5, seed=21)
    dataset, _ = generate_corpus(spec)
    for code in dataset.column("code"):
        assert code.isdigit()


def test_franchise_adds_same_name_entities():
    spec = CorruptionSpec(n_entities=10, records_per_entity=(2, 3),
                          franchise_rate=1.0, franchise_records=(1, 2),
                          seed=2)
    dataset, truth = generate_corpus(spec)
    names = {}
    for entity_id, golden in truth.golden_of.items():
        names.setdefault(golden[0], []).append(entity_id)
    siblings = [ids for ids in names.values() if len(ids) > 1]
    assert siblings, "franchise_rate=1.0 must produce shared-name entities"
    for ids in siblings:
        codes = {truth.golden_of[e][2] for e in ids}
        assert len(codes) == len(ids), "sibling entities must differ on code"
