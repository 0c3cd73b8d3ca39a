#!/usr/bin/env python3
"""
Wavelet transform checks: filters, energy, octave sizes, vanishing moments
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent / "src"))

from mf_errors import InsufficientLengthError, InvalidInputError, UnsupportedFilterError
from mf_transform import (
    CoefficientPyramid,
    daubechies_filter,
    default_levels,
    dwt1d,
    dwt2d,
    idwt1d,
)


def test_daubechies_filter_taps():
    for n in range(1, 11):
        f = daubechies_filter(n)
        assert len(f) == 2 * n
        assert f.n_vanishing_moments == n
        assert np.isclose(np.sum(f.taps), np.sqrt(2.0))
        assert np.isclose(np.sum(np.square(f.taps)), 1.0)


def test_highpass_annihilates_polynomials():
    f = daubechies_filter(3)
    k = np.arange(len(f), dtype=float)
    for p in range(3):
        assert abs(np.sum(f.highpass * k ** p)) < 1e-8


@pytest.mark.parametrize("n", [0, 11, 2.5])
def test_unsupported_filter(n):
    with pytest.raises(UnsupportedFilterError):
        daubechies_filter(n)


@pytest.mark.parametrize("log_n", range(6, 13))
def test_energy_conservation_1d(log_n):
    rng = np.random.default_rng(log_n)
    x = rng.standard_normal(2 ** log_n)
    f = daubechies_filter(3)
    pyr = dwt1d(x, f, default_levels(x.size, f))
    assert abs(pyr.energy() - np.sum(x ** 2)) <= 1e-8 * np.sum(x ** 2)


def test_octave_sizes_and_levels():
    x = np.random.default_rng(0).standard_normal(1024)
    f = daubechies_filter(3)
    pyr = dwt1d(x, f, 7)
    assert [d.size for d in pyr.details] == [1024 // 2 ** o for o in range(1, 8)]
    assert pyr.sample_level == 10
    assert pyr.levels == [9, 8, 7, 6, 5, 4, 3]
    assert pyr.at_level(9).size == 512
    assert pyr.n_taps == 6
    with pytest.raises(InvalidInputError):
        pyr.at_level(2)


def test_l1_factor():
    pyr = CoefficientPyramid(dim=1, details=[np.ones(8)], shape=(16,), sample_level=4)
    assert pyr.finest_level == 3
    assert pyr.l1_factor(3) == pytest.approx(2.0 ** -0.5)
    l1 = CoefficientPyramid(dim=1, details=[np.ones(8)], shape=(16,), sample_level=4, normalization="l1")
    assert l1.l1_factor(3) == 1.0


def test_vanishing_moments_quadratic():
    n = 256
    t = np.arange(n) / n
    x = 0.3 + 2.0 * t - 1.5 * t ** 2
    pyr = dwt1d(x, daubechies_filter(3), 3)
    finest = pyr.details[0]
    # Only the few coefficients whose support wraps around see the jump
    small = np.abs(finest) < 1e-8
    assert small.mean() >= 0.9


def test_constant_signal_has_no_details():
    pyr = dwt1d(np.full(512, 3.7), daubechies_filter(2), 5)
    for d in pyr.details:
        assert np.max(np.abs(d)) < 1e-10


def test_inverse_round_trip():
    x = np.random.default_rng(3).standard_normal(512)
    pyr = dwt1d(x, daubechies_filter(4), 4)
    assert np.allclose(idwt1d(pyr), x, atol=1e-10)


def test_truncates_to_dyadic_multiple():
    x = np.random.default_rng(1).standard_normal(102)
    pyr = dwt1d(x, daubechies_filter(1), 2)
    assert pyr.shape == (100,)
    assert pyr.details[0].size == 50


def test_too_short_for_depth():
    with pytest.raises(InsufficientLengthError):
        dwt1d(np.ones(32), daubechies_filter(3), 3)


def test_rejects_non_finite():
    x = np.ones(64)
    x[5] = np.nan
    with pytest.raises(InvalidInputError):
        dwt1d(x, daubechies_filter(1), 2)
    with pytest.raises(InvalidInputError):
        dwt1d(np.ones((8, 8)), daubechies_filter(1), 2)


def test_dwt2d_shapes_and_energy():
    img = np.random.default_rng(2).standard_normal((128, 64))
    f = daubechies_filter(2)
    pyr = dwt2d(img, f, 3)
    assert pyr.dim == 2
    for o, d in enumerate(pyr.details, start=1):
        assert d.shape == (3, 128 // 2 ** o, 64 // 2 ** o)
    assert pyr.sample_level == 6
    assert abs(pyr.energy() - np.sum(img ** 2)) <= 1e-8 * np.sum(img ** 2)


def test_2d_subbands_of_separable_image():
    rng = np.random.default_rng(11)
    u, v = rng.normal(size=64), rng.normal(size=32)
    f = daubechies_filter(2)
    pyr = dwt2d(np.outer(u, v), f, 1)
    pu, pv = dwt1d(u, f, 1), dwt1d(v, f, 1)
    du, dv = pu.details[0], pv.details[0]
    bands = pyr.details[0]
    assert bands.shape == (3, 32, 16)
    assert np.allclose(bands[0], np.outer(du, pv.approx))
    assert np.allclose(bands[1], np.outer(pu.approx, dv))
    assert np.allclose(bands[2], np.outer(du, dv))
