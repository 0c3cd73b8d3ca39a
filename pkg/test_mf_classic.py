#!/usr/bin/env python3
"""
Classical formalism: structure functions, regression, Legendre spectrum,
binomial cascade oracle
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent / "src"))

from mf_classic import (
    ScalingFunction,
    SpectrumCurve,
    StructureFunctionTable,
    default_fit_range,
    default_q_grid,
    fit_lines,
    legendre_spectrum,
    log2_mean_exp2,
    parametric_spectrum,
    regression_weights,
    scaling_exponents,
    select_levels,
    structure_functions,
)
from mf_errors import InvalidRangeError
from mf_leaders import LeaderPyramid, compute_leaders
from mf_legendre import uniform_grid
from mf_synth import gen_dwc, gen_mrw, theory_dwc
from mf_transform import daubechies_filter, default_levels, dwt1d


def leaders_from(levels, fn):
    """LeaderPyramid with L_{j,k} = fn(j, k) on 2^j positions"""
    values = [np.array([fn(j, k) for k in range(2 ** j)], dtype=float) for j in levels]
    return LeaderPyramid(dim=1, levels=list(levels), values=values, valid=[v > 0 for v in values])


def test_structure_functions_power_law():
    leaders = leaders_from(range(8, 2, -1), lambda j, k: 2.0 ** (-0.5 * j))
    table = structure_functions(leaders, np.array([0.0, 2.0]))
    assert table.levels == [3, 4, 5, 6, 7, 8]
    assert np.allclose(table.log2_S[1], -np.asarray(table.levels, dtype=float))
    assert np.all(table.log2_S[0] == 0.0)
    assert table.n_j == [2 ** j for j in table.levels]


def test_empty_levels_are_dropped():
    leaders = leaders_from(range(6, 2, -1), lambda j, k: 0.0 if j == 4 else 1.0)
    table = structure_functions(leaders)
    assert 4 not in table.levels
    assert table.dropped == [4]


def test_log2_mean_exp2_extreme_exponents():
    e = np.array([[-800.0, -801.0], [900.0, 900.0]])
    out = log2_mean_exp2(e)
    assert out[0] == pytest.approx(-800.0 + math.log2(0.75))
    assert out[1] == pytest.approx(900.0)


def test_regression_weights_identities():
    j = np.arange(3, 12, dtype=float)
    for v in (None, np.linspace(1.0, 5.0, j.size)):
        w = regression_weights(j, v)
        assert np.sum(w) == pytest.approx(0.0, abs=1e-12)
        assert np.sum(j * w) == pytest.approx(-1.0)


def test_exact_line_recovers_zeta():
    q = default_q_grid()
    levels = list(range(3, 13))
    log2_S = -0.72 * q[:, None] * np.asarray(levels)[None, :]
    table = StructureFunctionTable(q, levels, log2_S, [100] * len(levels), [1.0] * len(levels))
    zeta = scaling_exponents(table, 3, 12)
    assert np.allclose(zeta.zeta, 0.72 * q)
    assert np.allclose(zeta.r2, 1.0)
    assert np.allclose(zeta.stderr, 0.0, atol=1e-12)


def test_weighted_fit_on_exact_line():
    q = np.array([1.0, 2.0])
    levels = [3, 4, 5, 6]
    log2_S = -np.outer(q, levels) * 0.6 + 1.0
    table = StructureFunctionTable(q, levels, log2_S, [8, 16, 32, 64], [0.5, 0.4, 0.3, 0.2])
    zeta = scaling_exponents(table, 3, 6, weighted=True)
    assert np.allclose(zeta.zeta, 0.6 * q)
    assert zeta.weighted


@pytest.mark.parametrize("j1,j2", [(5, 5), (6, 4), (1, 5), (3, 20), (3, 4)])
def test_select_levels_rejects_bad_ranges(j1, j2):
    with pytest.raises(InvalidRangeError):
        select_levels([3, 4, 5, 6, 7], j1, j2)


def test_fit_lines_intercept():
    levels = np.array([2.0, 3.0, 4.0])
    slope, intercept, _, r2 = fit_lines(levels, np.array([[1.0 - 2.0 * 0.5, 1.0 - 3.0 * 0.5, 1.0 - 4.0 * 0.5]]))
    assert slope[0] == pytest.approx(0.5)
    assert intercept[0] == pytest.approx(1.0)
    assert r2[0] == pytest.approx(1.0)


def _parabolic_zeta(c1=0.76, c2=0.08):
    q = default_q_grid()
    z = c1 * q - c2 * q ** 2 / 2.0
    return ScalingFunction(q, z, np.zeros_like(q), np.zeros_like(q), np.ones_like(q), 3, 12)


def test_legendre_spectrum_of_parabola():
    zeta = _parabolic_zeta()
    h = uniform_grid(0.6, 0.9, 0.01)
    curve = legendre_spectrum(zeta, h, 1)
    # parabola up to the q sampling (minimizer off-grid by <= 0.125)
    assert np.allclose(curve.D, 1.0 - (h - 0.76) ** 2 / (2 * 0.08), atol=1e-3)
    assert curve.max_finite() == pytest.approx(1.0, abs=1e-9)


def test_parametric_spectrum():
    zeta = _parabolic_zeta()
    h, D = parametric_spectrum(zeta, 1)
    # centered differences are exact on a quadratic away from the two ends
    inner = slice(1, -1)
    assert np.allclose(h[inner], 0.76 - 0.08 * zeta.q_grid[inner])
    assert np.allclose(D[inner], 1.0 - (h[inner] - 0.76) ** 2 / 0.16, atol=1e-9)


def test_spectrum_curve_json_form():
    curve = SpectrumCurve(np.array([0.0, 1.0]), np.array([-np.inf, 0.5]), "legendre", 1, {"j1": 3})
    out = curve.to_dict()
    assert out["D"] == [None, 0.5]
    assert out["d"] == 1 and out["params"] == {"j1": 3}


def test_default_fit_range():
    leaders = leaders_from(range(15, 2, -1), lambda j, k: 1.0)
    assert default_fit_range(leaders, 6) == (7, 13)
    short = leaders_from(range(6, 2, -1), lambda j, k: 1.0)
    assert default_fit_range(short, 6) == (3, 6)


def test_binomial_cascade_scaling_function():
    w = 0.45
    leaders = compute_leaders(gen_dwc(14, w))
    # D'(h) reaches about 17 where D = 0.2, so q has to go that far
    q = uniform_grid(-20.0, 20.0, 0.25)
    table = structure_functions(leaders, q)
    zeta = scaling_exponents(table, 3, 12)
    expected = 1.0 - np.log2(w ** q + (1 - w) ** q)
    moderate = np.abs(q) <= 4
    assert np.max(np.abs(zeta.zeta[moderate] - expected[moderate])) <= 0.05

    h = uniform_grid(0.8, 1.2, 0.0025)
    curve = legendre_spectrum(zeta, h, 1)
    theory = theory_dwc(w)(h)
    scored = np.isfinite(theory) & (theory >= 0.2)
    assert np.max(np.abs(curve.D[scored] - theory[scored])) <= 0.05


def mrw_zeta(n, H, lambda2, seed, q, j1, j2):
    f = daubechies_filter(3)
    x = gen_mrw(n, H, lambda2, seed=seed)
    leaders = compute_leaders(dwt1d(x, f, default_levels(n, f)))
    return scaling_exponents(structure_functions(leaders, q), j1, j2).zeta


def test_mrw_near_monofractal_limit():
    zeta = mrw_zeta(2 ** 14, 0.6, 1e-4, 5, np.array([1.0, 2.0]), 5, 11)
    assert zeta[0] == pytest.approx(0.6, abs=0.08)
    # curvature of zeta vanishes with lambda2
    assert zeta[1] - 2.0 * zeta[0] == pytest.approx(0.0, abs=0.05)


@pytest.mark.slow
def test_mrw_zeta2():
    # zeta(q) = (H + lambda2/2) q - lambda2 q^2 / 2, so zeta(2) = 1.36 for H = 0.72, lambda2 = 0.08
    estimates = [mrw_zeta(2 ** 16, 0.72, 0.08, seed, np.array([2.0]), 7, 13)[0] for seed in range(4)]
    assert np.mean(estimates) == pytest.approx(1.36, abs=0.08)
