import json

import pytest

from qdarray.campaign import (
    MANIFEST_NAME,
    TURN_ON_KINDS,
    load_entry,
    load_manifest,
    measure_sample,
    record_name,
    sample_dir,
    sample_seed,
    synthesize,
)
from qdarray.config import parse_config
from qdarray.exceptions import RecordFormatError, UnsupportedVersionError
from qdarray.reports import extract_sample
from tests.conftest import small_config

STUDY = {"sample": "A", "row": 2, "col": 2, "fridge_temperatures": [0.2, 0.6, 1.2]}


@pytest.fixture(scope="module")
def config():
    document = small_config(temperature_study=STUDY)
    document["samples"][1]["dead_columns"] = [2]
    return parse_config(json.dumps(document))


@pytest.fixture(scope="module")
def measured(config, tmp_path_factory):
    out = tmp_path_factory.mktemp("campaign")
    manifests = {spec.label: measure_sample(synthesize(spec, config), config, out) for spec in config.samples}
    return out, manifests


def test_seeds_and_names():
    assert sample_seed(1, "A") != sample_seed(1, "B")
    assert sample_seed(1, "A") == sample_seed(1, "A")
    assert record_name("barrier_map", 3) == "records/row3_barrier_map.dat"
    assert record_name("temperature", 2, col=4, index=1) == "records/row2_temperature_c4_1.dat"


def test_manifest_layout(measured):
    out, manifests = measured
    manifest = manifests["A"]
    assert manifest.n == 3
    assert [d.row for d in manifest.decisions] == [1, 2, 3]
    for row in (1, 2, 3):
        for kind in TURN_ON_KINDS.values():
            (entry,) = manifest.select(kind, row)
            record = load_entry(sample_dir(out, "A"), entry)
            assert record.ndim == 1
            assert record.spec.channels == [1, 2, 3]
            assert record.metadata.kind == kind
    assert load_manifest(sample_dir(out, "A") / MANIFEST_NAME) == manifest


def test_every_live_dot_is_accounted_for(measured):
    _, manifests = measured
    for decision in manifests["A"].decisions:
        assert decision.measured == [1, 2, 3]
    for decision in manifests["B"].decisions:
        assert decision.measured == [1, 3]


def test_dead_columns_are_skipped(measured):
    out, manifests = measured
    manifest = manifests["B"]
    assert [(s.row, s.col, s.reason) for s in manifest.skipped] == [(r, 2, "dead column") for r in (1, 2, 3)]
    for entry in manifest.entries:
        assert 2 not in entry.channels


def test_diamond_scans_follow_the_decision(measured):
    out, manifests = measured
    for label, manifest in manifests.items():
        for decision in manifest.decisions:
            shared = manifest.select("diamond_shared", decision.row)
            assert len(shared) == (1 if decision.shared_ok else 0)
            individual = {e.col for e in manifest.select("diamond_individual", decision.row)}
            assert individual == set(decision.individual_points)
            for entry in shared:
                record = load_entry(sample_dir(out, label), entry)
                assert record.spec.channels == decision.shared_ok
                assert [a.gate for a in record.spec.axes] == [f"P{decision.row}", "VSD"]


def test_temperature_traces(measured, config):
    _, manifests = measured
    traces = manifests["A"].select("temperature", 2, 2)
    if manifests["A"].temperature_dot is None:
        assert traces == []
    else:
        assert manifests["A"].temperature_dot == (2, 2)
        assert [e.index for e in traces] == [0, 1, 2]
    assert manifests["B"].temperature_dot is None


def test_measurement_is_reproducible(measured, config, tmp_path):
    out, manifests = measured
    spec = config.sample("B")
    again = measure_sample(synthesize(spec, config), config, tmp_path)
    assert again == manifests["B"]
    for entry in again.entries:
        assert (sample_dir(tmp_path, "B") / entry.path).read_bytes() == (sample_dir(out, "B") / entry.path).read_bytes()


def test_extraction(measured, config):
    out, manifests = measured
    report = extract_sample(config.sample("B"), config, out)
    assert report.sample_label == "B"
    assert report.t1 == 20.0
    assert sorted((d.row, d.col) for d in report.dots) == [(r, c) for r in (1, 2, 3) for c in (1, 3)]
    assert report.decisions == manifests["B"].decisions
    assert all(1 <= s.k <= 4 and s.col in (1, 3) for s in report.segments)
    for dot in report.dots:
        assert (dot.diamond is None) == (dot.diamond_error is not None)
        assert dot.bias_mode in ("shared", "individual", "failed")
        assert (dot.bias_point is None) == (dot.bias_mode == "failed")
    assert extract_sample(config.sample("B"), config, out) == report


def test_extraction_needs_a_manifest(config, tmp_path):
    with pytest.raises(RecordFormatError):
        extract_sample(config.sample("A"), config, tmp_path)


def test_manifest_version_is_checked(measured, tmp_path):
    out, _ = measured
    document = json.loads((sample_dir(out, "A") / MANIFEST_NAME).read_text())
    document["schema_version"] = 2
    path = tmp_path / MANIFEST_NAME
    path.write_text(json.dumps(document))
    with pytest.raises(UnsupportedVersionError):
        load_manifest(path)
