#!/usr/bin/env python3
"""
End-to-end Monte Carlo checks on the shipped experiment presets.

These run full-size realizations and are marked slow:
    pytest -m slow test_acceptance.py
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent / "src"))

from mf_classic import SpectrumCurve
from mf_config import AnalysisConfig, load_experiment
from mf_gmf import analyze, find_modes
from mf_harness import logscale_table, run_experiment
from mf_synth import gen_mrw

CONFIG_DIR = Path(__file__).parent / "configs"

pytestmark = pytest.mark.slow


def mean_curve(result, estimator):
    return SpectrumCurve(result.h, result.estimators[estimator].mean, estimator, result.dim)


def value_at(result, estimator, h):
    return result.estimators[estimator].mean[np.argmin(np.abs(result.h - h))]


def test_homogeneous_mrw_has_no_spurious_nonconcavity():
    result = run_experiment(load_experiment(CONFIG_DIR / "homogeneous-mrw.yaml"), progress=False)
    assert result.n_failed == 0

    classical = result.estimators["legendre"].mean
    envelope = result.estimators["envelope"].mean
    assert result.h[np.nanargmax(np.where(np.isfinite(classical), classical, np.nan))] == pytest.approx(0.76, abs=0.03)

    support = np.isfinite(classical) & np.isfinite(envelope) & (classical >= 0)
    assert np.max(np.abs(envelope[support] - classical[support])) <= 0.02

    mode = np.argmin(np.abs(result.h - 0.76))
    assert result.estimators["legendre"].rmse[mode] <= 0.1


def test_concatenated_mrw_shows_two_modes():
    result = run_experiment(load_experiment(CONFIG_DIR / "concat-mrw.yaml"), progress=False)
    modes = find_modes(mean_curve(result, "envelope"), min_prominence=0.05)
    assert len(modes) == 2
    (h1, d1), (h2, d2) = modes
    assert h1 == pytest.approx(0.605, abs=0.03)
    assert h2 == pytest.approx(0.755, abs=0.03)
    assert value_at(result, "envelope", 0.68) <= min(d1, d2) - 0.05

    classical = result.estimators["legendre"].mean
    finite = classical[np.isfinite(classical)]
    assert np.all(np.diff(finite, 2) <= 1e-6)


def test_levy_increasing_branch():
    config = load_experiment(CONFIG_DIR / "levy.yaml")
    result = run_experiment(config, progress=False)
    envelope = result.estimators["envelope"].mean
    branch = (result.h >= 0.1) & (result.h <= 0.35) & np.isfinite(envelope)
    slope = np.polyfit(result.h[branch], envelope[branch], 1)[0]
    assert slope == pytest.approx(config.process.alpha, abs=0.25)
    assert value_at(result, "envelope", 0.5) >= 0.9


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_mrw_logscale_is_linear(seed):
    x = gen_mrw(2 ** 16, 0.72, 0.08, seed=seed)
    probe = analyze(x, 1, AnalysisConfig(j1=7, j2=13, gamma_set=[0.0], delta=[0.0]))
    h_mode = probe.result.centering.h_mode
    config = AnalysisConfig(j1=7, j2=13, gamma_set=[0.0, 100.0], delta=[h_mode])
    table = logscale_table(analyze(x, 1, config), (-2.0, -1.0, 0.0, 1.0, 2.0))
    assert set(table["gamma"]) == {0.0, 100.0}
    assert table["r2"].min() >= 0.99


def test_concatenated_mrw_2d_shows_two_modes():
    result = run_experiment(load_experiment(CONFIG_DIR / "concat-mrw-2d.yaml"), progress=False)
    assert result.dim == 2
    modes = find_modes(mean_curve(result, "envelope"), min_prominence=0.05)
    assert len(modes) == 2
    for _, peak in modes:
        assert 1.8 <= peak <= 2.05
    h1, h2 = modes[0][0], modes[1][0]
    between = (result.h > h1) & (result.h < h2)
    assert np.min(result.estimators["envelope"].mean[between]) < min(p for _, p in modes) - 0.05
