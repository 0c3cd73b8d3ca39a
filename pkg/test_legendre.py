#!/usr/bin/env python3
"""
Legendre transforms on grids, the generalized transform and the analytic
two-parabola fixture
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent / "src"))

from mf_errors import InvalidInputError, InvalidParameterError
from mf_legendre import (
    GFunction,
    SampledFunction,
    analytic_double_parabola,
    double_legendre,
    double_parabola,
    legendre_transform,
    lifted_double_legendre,
    pointwise_envelope,
    uniform_grid,
)

H_FINE = uniform_grid(-2.0, 2.0, 1e-3)
Q_WIDE = uniform_grid(-50.0, 50.0, 0.01)


def test_uniform_grid_includes_end():
    g = uniform_grid(-4.0, 4.0, 0.25)
    assert g.size == 33
    assert g[0] == -4.0 and g[-1] == pytest.approx(4.0)
    with pytest.raises(InvalidParameterError):
        uniform_grid(0.0, 1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        uniform_grid(1.0, 0.0, 0.1)


def test_sampled_function_rejects_non_uniform_grid():
    with pytest.raises(InvalidInputError):
        SampledFunction([0.0, 0.1, 0.3], [0.0, 0.0, 0.0])
    with pytest.raises(InvalidInputError):
        SampledFunction([0.0, 0.1], [0.0])


def test_g_function_shapes():
    g = GFunction("parabola", 2.0, 0.5)
    assert g(np.array([0.5, 1.0]))[1] == pytest.approx(-0.5)
    a = GFunction("absolute_value", 2.0, 0.5)
    assert a(np.array([1.0]))[0] == pytest.approx(-1.0)
    assert GFunction().is_zero
    with pytest.raises(InvalidParameterError):
        GFunction("cubic", 1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        GFunction("parabola", -1.0, 0.0)


def test_legendre_of_concave_parabola():
    h = uniform_grid(0.0, 2.0, 1e-3)
    f = SampledFunction(h, 1.0 - (h - 1.0) ** 2 / 0.5)
    q = uniform_grid(-2.0, 2.0, 0.5)
    fstar = legendre_transform(f, q, 1.0)
    # min_h (1 + q h - f(h)) for D(h) = 1 - 2 (h - 1)^2: q - q^2 / 8
    assert np.allclose(fstar.values, q - q ** 2 / 8.0, atol=1e-5)


def test_double_transform_is_concave_hull():
    f = double_parabola(uniform_grid(-2.0, 2.0, 1e-2))
    hull = double_legendre(f, uniform_grid(-10.0, 10.0, 0.01), 1.0)
    finite = hull.finite
    # dominance
    assert np.all(hull.values[finite] >= f.values[finite] - 1e-9)
    # concavity: second differences non-positive
    second = np.diff(hull.values[finite], 2)
    assert np.all(second <= 1e-9)
    # flat bridge between the two modes
    mid = np.abs(hull.grid) <= 0.9
    assert np.allclose(hull.values[mid & finite], 1.0, atol=1e-3)
    # -inf outside the support
    assert hull.values[0] == -np.inf


@pytest.mark.parametrize("gamma", [0.0, 1.0, 3.0, 10.0])
def test_lifted_transform_matches_analytic(gamma):
    f = double_parabola(H_FINE)
    got = lifted_double_legendre(f, GFunction("parabola", gamma, 0.0), Q_WIDE, 1.0)
    want = analytic_double_parabola(gamma)(H_FINE)
    both = np.isfinite(got.values) & np.isfinite(want)
    assert both.sum() > 3000
    assert np.max(np.abs(got.values[both] - want[both])) <= 2e-2


def test_envelope_recovers_nonconcave_spectrum():
    f = double_parabola(H_FINE)
    members = [lifted_double_legendre(f, GFunction("parabola", g, 0.0), Q_WIDE, 1.0)
               for g in (0.0, 10.0, 1e2, 1e3, 1e4)]
    env = pointwise_envelope(members)
    inside = np.abs(H_FINE) <= 1.9
    assert np.max(np.abs(env.values[inside] - f.values[inside])) <= 5e-3


def test_analytic_double_parabola_values():
    D = analytic_double_parabola(3.0)
    assert D(np.array([0.0]))[0] == pytest.approx(0.25)
    assert D(np.array([0.5]))[0] == pytest.approx(0.75)
    assert D(np.array([-2.0]))[0] == -np.inf
    assert D(np.array([2.0]))[0] == pytest.approx(0.0)
    # gamma = 0 is the concave hull
    assert analytic_double_parabola(0.0)(np.array([0.3]))[0] == pytest.approx(1.0)


def test_envelope_needs_shared_grid():
    a = SampledFunction(uniform_grid(0.0, 1.0, 0.1), np.zeros(11))
    b = SampledFunction(uniform_grid(0.0, 2.0, 0.1), np.zeros(21))
    with pytest.raises(InvalidInputError):
        pointwise_envelope([a, b])
    with pytest.raises(InvalidInputError):
        pointwise_envelope([])


def test_legendre_transform_reverses_order():
    h = uniform_grid(-2.0, 2.0, 1e-2)
    q = uniform_grid(-10.0, 10.0, 0.1)
    low = double_parabola(h)
    high = SampledFunction(h, np.where(low.finite, low.values + 0.1 * np.exp(-h ** 2), -np.inf))
    assert np.all(legendre_transform(high, q, 1.0).values <= legendre_transform(low, q, 1.0).values + 1e-12)


@pytest.mark.parametrize("gamma", [1.0, 10.0])
def test_lifted_transform_between_function_and_hull(gamma):
    h = uniform_grid(-2.0, 2.0, 1e-2)
    q = uniform_grid(-50.0, 50.0, 0.05)
    f = double_parabola(h)
    hull = double_legendre(f, q, 1.0)
    lifted = lifted_double_legendre(f, GFunction("parabola", gamma, 0.0), q, 1.0)
    finite = f.finite
    assert np.all(lifted.values[finite] >= f.values[finite] - 1e-9)
    assert np.all(hull.values[finite] >= lifted.values[finite] - 2e-2)
