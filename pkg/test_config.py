#!/usr/bin/env python3
"""
Experiment YAML parsing, validation messages and env-var settings
"""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent / "src"))

from mf_config import (
    AnalysisConfig,
    ProcessSpec,
    experiment_from_dict,
    load_experiment,
    parse_delta,
    parse_range,
    worker_count,
)
from mf_errors import ConfigError, InvalidParameterError

CONFIG_DIR = Path(__file__).parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_presets_load(path):
    config = load_experiment(path)
    assert config.name == path.stem
    assert config.n_realizations >= 1
    assert 0.0 in config.analysis.gamma_set


def test_all_presets_present():
    names = {p.stem for p in CONFIG_DIR.glob("*.yaml")}
    assert names == {
        "homogeneous-mrw", "concat-mrw", "levy", "dwc", "dwc-thresholded",
        "concat-mrw-2d", "q-range-instability", "moffett-like",
    }


def test_moffett_like_parameters():
    a = load_experiment(CONFIG_DIR / "moffett-like.yaml").analysis
    assert a.gamma_set == [0.0, 100.0, 500.0, 750.0]
    assert a.q_grid[0] == -10.0 and a.q_grid[-1] == pytest.approx(10.0)
    assert a.delta[0] == pytest.approx(0.6) and a.delta[-1] == pytest.approx(1.2)


@pytest.mark.parametrize("name", ["dwc", "dwc-thresholded"])
def test_cascade_presets_reach_steep_ends(name):
    q = load_experiment(CONFIG_DIR / f"{name}.yaml").analysis.q_grid
    assert q[0] == -20.0 and q[-1] == pytest.approx(20.0)


def test_concat_2d_preset_dimension():
    config = load_experiment(CONFIG_DIR / "concat-mrw-2d.yaml")
    assert config.process.dim == 2
    assert len(config.process.pieces) == 2


def write(tmp_path, text):
    path = tmp_path / "exp.yaml"
    path.write_text(text)
    return path


def test_invalid_value_names_field_and_line(tmp_path):
    path = write(tmp_path, "name: bad\nprocess:\n  kind: mrw1d\n  n: 1024\n  H: 1.5\n  lambda2: 0.08\n")
    with pytest.raises(ConfigError) as err:
        load_experiment(path)
    assert err.value.field == "process.H"
    assert err.value.line == 5


def test_unknown_field(tmp_path):
    path = write(tmp_path, "process:\n  kind: dwc\n  w: 0.45\n  levels: 8\nanalysis:\n  gama_set: [0, 5]\n")
    with pytest.raises(ConfigError) as err:
        load_experiment(path)
    assert err.value.field == "analysis.gama_set"
    assert err.value.line == 6


def test_nested_piece_error(tmp_path):
    text = (
        "process:\n"
        "  kind: concat\n"
        "  pieces:\n"
        "    - {kind: mrw1d, n: 1024, H: 0.6, lambda2: 0.01}\n"
        "    - {kind: mrw1d, n: 1000, H: 0.75, lambda2: 0.01}\n"
    )
    with pytest.raises(ConfigError) as err:
        load_experiment(write(tmp_path, text))
    assert err.value.field == "process.pieces[1].n"


def test_yaml_syntax_error(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_experiment(write(tmp_path, "process: [unclosed\n"))
    assert err.value.line is not None


def test_missing_file_passes_through(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_experiment(tmp_path / "nope.yaml")


def test_missing_process_section():
    with pytest.raises(ConfigError):
        experiment_from_dict({"name": "x"})


def test_name_defaults_to_kind():
    config = experiment_from_dict({"process": {"kind": "dwc", "w": 0.4, "levels": 6}})
    assert config.name == "dwc"
    assert config.out_path == Path("results") / "dwc"


def test_analysis_ranges_and_delta():
    a = AnalysisConfig(q_range="-2:0.5:2", delta="0.5:0.1:0.9")
    assert a.q_grid.tolist() == [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]
    assert len(a.delta) == 5
    assert AnalysisConfig(delta="0.6, 0.8").delta == [0.6, 0.8]
    assert parse_delta("AUTO") == "auto"


@pytest.mark.parametrize("kwargs,param", [
    ({"gamma_set": [5.0, 10.0]}, "gamma_set"),
    ({"n_vanishing_moments": 0}, "n_vanishing_moments"),
    ({"q_range": "1:0:2"}, "q_range"),
    ({"delta": "a,b"}, "delta"),
    ({"g_shape": "cubic"}, "g_shape"),
    ({"j1": 9, "j2": 4}, "j1"),
])
def test_analysis_validation(kwargs, param):
    with pytest.raises(InvalidParameterError) as err:
        AnalysisConfig(**kwargs)
    assert err.value.param == param


def test_parse_range():
    assert parse_range("-4:0.25:4") == (-4.0, 0.25, 4.0)
    with pytest.raises(InvalidParameterError):
        parse_range("1:2")


def test_process_spec_to_dict_drops_unset():
    spec = ProcessSpec(kind="levy_brownian", n=1024, alpha=1.25)
    assert spec.to_dict() == {"kind": "levy_brownian", "n": 1024, "alpha": 1.25, "axis": 1, "seed": 0}


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("MFSPEC_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MFSPEC_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.delenv("MFSPEC_THREADS")
    assert worker_count() >= 1
