import json
from pathlib import Path

import pytest

from qdarray.config import OutputFormat, SigmaMethod, load_config, parse_config
from qdarray.exceptions import ConfigurationError
from tests.conftest import small_config


def test_defaults():
    config = parse_config(json.dumps(small_config()))
    assert config.master_seed == 20240601
    assert [s.label for s in config.samples] == ["A", "B"]
    assert config.sample("B").stack.t2 == pytest.approx(24.5)
    assert config.sweeps.barrier_map.barrier_window == (-0.25, 0.5)
    assert config.sweeps.diamond.v_sd_max == pytest.approx(10e-3)
    assert config.statistics.sigma_method is SigmaMethod.SLOPE
    assert config.statistics.central_filter
    assert config.statistics.regime_separation == 3.0
    assert config.temperature_study is None
    assert OutputFormat("vector-plot") is OutputFormat.VECTOR_PLOT


def test_json_syntax_error_reports_line_and_column():
    with pytest.raises(ConfigurationError) as info:
        parse_config('{\n  "master_seed": 1,\n  "samples": [\n}', source="broken.json")
    assert info.value.detail.startswith("broken.json:4:")
    assert info.value.exit_code == 2


@pytest.mark.parametrize(
    "document, fragment",
    [
        ({"master_seed": 1, "samples": []}, "samples"),
        ({"samples": [{"label": "A", "t1": 12}]}, "master_seed"),
        ({"master_seed": -1, "samples": [{"label": "A", "t1": 12}]}, "master_seed"),
        ({"master_seed": 1, "samples": [{"label": "A", "t1": 12, "colour": "red"}]}, "colour"),
        ({"master_seed": 1, "samples": [{"label": "A/B", "t1": 12}]}, "label"),
        ({"master_seed": 1, "samples": [{"label": "A", "t1": 12}, {"label": "A", "t1": 15}]}, "unique"),
        ({"master_seed": 1, "samples": [{"label": "A", "t1": 12, "dead_columns": [9]}]}, "dead columns"),
        ({"master_seed": 1, "samples": [{"label": "A", "t1": 12, "disorder_replica": -1}]}, "disorder_replica"),
        ({"master_seed": 1, "samples": [{"label": "A", "t1": 12}], "statistics": {"regime_separation": 0}}, "positive"),
    ],
)
def test_schema_errors(document, fragment):
    with pytest.raises(ConfigurationError) as info:
        parse_config(json.dumps(document))
    assert fragment in info.value.detail


def test_top_level_must_be_an_object():
    with pytest.raises(ConfigurationError):
        parse_config("[1, 2]")


def test_even_bias_points_are_rejected():
    document = small_config(sweeps={"diamond": {"v_sd_points": 60}})
    with pytest.raises(ConfigurationError):
        parse_config(json.dumps(document))


def test_temperature_study_must_name_a_dot_in_the_array():
    study = {"sample": "A", "row": 2, "col": 2}
    assert parse_config(json.dumps(small_config(temperature_study=study))).temperature_study.col == 2
    for bad in ({"sample": "Z", "row": 1, "col": 1}, {"sample": "A", "row": 4, "col": 1}):
        with pytest.raises(ConfigurationError):
            parse_config(json.dumps(small_config(temperature_study=bad)))


def test_sample_disorder_overrides(disorder):
    document = small_config()
    document["samples"][0]["disorder"] = {"spurious_rate_coeff": 0.0}
    config = parse_config(json.dumps(document))
    assert config.sample("A").disorder_config(disorder).spurious_rate_coeff == 0.0
    assert config.sample("B").disorder_config(disorder) == disorder
    document["samples"][0]["disorder"] = {"no_such_knob": 1.0}
    with pytest.raises(ConfigurationError):
        parse_config(json.dumps(document)).sample("A").disorder_config(disorder)


def test_seed_override(config_file):
    path = config_file()
    assert load_config(path, {"master_seed": 7}).master_seed == 7
    assert load_config(path, {"master_seed": None}).master_seed == 20240601


def test_unknown_sample_label(config_file):
    with pytest.raises(ConfigurationError):
        load_config(config_file()).sample("Z")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.json")


@pytest.mark.parametrize("name, count", [("table1.json", 8), ("quick.json", 2)])
def test_shipped_configurations(name, count):
    path = Path(__file__).resolve().parents[1] / "configs" / name
    config = load_config(path)
    assert len(config.samples) == count
    assert sorted({s.t1 for s in config.samples}) in ([8.0, 12.0, 15.0, 20.0], [8.0, 20.0])
