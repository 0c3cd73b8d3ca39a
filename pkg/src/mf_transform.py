"""
mfspec: orthonormal discrete wavelet transform (1D signals, 2D images)

Periodic boundary (PyWavelets "periodization" mode) so every octave o holds
exactly N / 2^o samples per axis and total energy is conserved.

Scale bookkeeping: octave o = 1 is the finest. Downstream modules index by
resolution level j = finest_level - o + 1 (larger j = finer, ~2^{dj}
positions). For transformed data finest_level = sample_level - 1.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pywt

from mf_errors import (
    InsufficientLengthError,
    InvalidInputError,
    InvalidParameterError,
    UnsupportedFilterError,
)
from mf_logging import get_logger, log_event

logger = get_logger("transform")

MAX_VANISHING_MOMENTS = 10


@dataclass(frozen=True)
class WaveletFilter:
    """Lowpass Daubechies filter and its vanishing-moment count"""
    taps: Tuple[float, ...]
    n_vanishing_moments: int
    name: str

    @property
    def highpass(self) -> np.ndarray:
        """Quadrature-mirror highpass g[k] = (-1)^k h[L-1-k]"""
        h = np.asarray(self.taps)
        signs = np.where(np.arange(h.size) % 2 == 0, 1.0, -1.0)
        return signs * h[::-1]

    @property
    def wavelet(self) -> pywt.Wavelet:
        return pywt.Wavelet(self.name)

    def __len__(self) -> int:
        return len(self.taps)


@dataclass
class CoefficientPyramid:
    """
    Per-octave wavelet coefficients.

    details[o-1] is the octave-o array: shape (n,) in 1D, (3, n1, n2) in 2D
    with subbands ordered (detail-rows/approx-cols, approx-rows/detail-cols,
    detail-both).

    normalization:
        "l2" - orthonormal coefficients, leaders apply 2^{d(j - sample_level)/2}
        "l1" - values are already L1-normalized (prescribed cascades)
    """
    dim: int
    details: List[np.ndarray]
    shape: Tuple[int, ...]
    sample_level: int
    finest_level: Optional[int] = None
    normalization: str = "l2"
    approx: Optional[np.ndarray] = None
    wavelet: Optional[str] = None
    n_taps: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.finest_level is None:
            self.finest_level = self.sample_level - 1

    @property
    def n_octaves(self) -> int:
        return len(self.details)

    @property
    def levels(self) -> List[int]:
        """Resolution level j of every stored octave, finest first"""
        return [self.finest_level - o + 1 for o in range(1, self.n_octaves + 1)]

    def octave_of(self, j: int) -> int:
        o = self.finest_level - j + 1
        if not 1 <= o <= self.n_octaves:
            raise InvalidInputError(f"level j={j} outside pyramid levels {self.levels}")
        return o

    def at_level(self, j: int) -> np.ndarray:
        return self.details[self.octave_of(j) - 1]

    def l1_factor(self, j: int) -> float:
        if self.normalization == "l1":
            return 1.0
        return 2.0 ** (self.dim * (j - self.sample_level) / 2.0)

    def energy(self) -> float:
        total = sum(float(np.sum(d ** 2)) for d in self.details)
        if self.approx is not None:
            total += float(np.sum(self.approx ** 2))
        return total


def daubechies_filter(n_vanishing_moments: int) -> WaveletFilter:
    """Minimum-phase Daubechies filter with 2*Npsi taps"""
    n = int(n_vanishing_moments)
    if n != n_vanishing_moments or not 1 <= n <= MAX_VANISHING_MOMENTS:
        raise UnsupportedFilterError(
            f"Daubechies filter needs 1 <= Npsi <= {MAX_VANISHING_MOMENTS}, got {n_vanishing_moments}"
        )
    name = f"db{n}"
    return WaveletFilter(
        taps=tuple(float(t) for t in pywt.Wavelet(name).rec_lo),
        n_vanishing_moments=n,
        name=name,
    )


def default_levels(n: int, wavelet_filter: WaveletFilter) -> int:
    """Deepest octave free of full wrap-around: floor(log2 n) - ceil(log2 len(taps))"""
    return int(math.floor(math.log2(n)) - math.ceil(math.log2(len(wavelet_filter))))


def _check_depth(n: int, levels: int, wavelet_filter: WaveletFilter, axis: str):
    if levels < 1:
        raise InvalidParameterError("levels", f"must be >= 1, got {levels}")
    needed = (2 ** levels) * len(wavelet_filter)
    if n < needed:
        raise InsufficientLengthError(
            f"{axis} length {n} < 2^J * len(taps) = {needed} for J={levels}"
        )


def _as_finite(data, ndim: int) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != ndim:
        raise InvalidInputError(f"expected {ndim}D data, got shape {arr.shape}")
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise InvalidInputError("data must be non-empty and finite")
    return arr


def _truncate(arr: np.ndarray, levels: int) -> np.ndarray:
    """Keep a multiple of 2^J samples per axis so every octave stays dyadic"""
    block = 2 ** levels
    keep = tuple((n // block) * block for n in arr.shape)
    if keep != arr.shape:
        log_event(logger, "input_truncated", original_shape=list(arr.shape), kept_shape=list(keep))
        arr = arr[tuple(slice(0, k) for k in keep)]
    return arr


def dwt1d(signal, wavelet_filter: WaveletFilter, levels: int) -> CoefficientPyramid:
    """Periodized orthonormal DWT of a 1D signal down to octave `levels`"""
    x = _as_finite(signal, 1)
    _check_depth(x.size, levels, wavelet_filter, "signal")
    x = _truncate(x, levels)

    coeffs = pywt.wavedec(x, wavelet_filter.wavelet, mode="periodization", level=levels)
    # wavedec returns [cA_J, cD_J, ..., cD_1]
    details = [np.asarray(c) for c in coeffs[:0:-1]]

    return CoefficientPyramid(
        dim=1,
        details=details,
        shape=(x.size,),
        sample_level=int(math.floor(math.log2(x.size))),
        approx=np.asarray(coeffs[0]),
        wavelet=wavelet_filter.name,
        n_taps=len(wavelet_filter),
    )


def dwt2d(image, wavelet_filter: WaveletFilter, levels: int) -> CoefficientPyramid:
    """Separable periodized DWT of an image, 3 detail subbands per octave"""
    x = _as_finite(image, 2)
    for axis, n in zip(("rows", "columns"), x.shape):
        _check_depth(n, levels, wavelet_filter, axis)
    x = _truncate(x, levels)

    coeffs = pywt.wavedec2(x, wavelet_filter.wavelet, mode="periodization", level=levels)
    # wavedec2 returns [cA_J, (cH_J, cV_J, cD_J), ..., (cH_1, cV_1, cD_1)]
    details = [np.stack(bands) for bands in coeffs[:0:-1]]

    return CoefficientPyramid(
        dim=2,
        details=details,
        shape=tuple(x.shape),
        sample_level=int(math.floor(math.log2(min(x.shape)))),
        approx=np.asarray(coeffs[0]),
        wavelet=wavelet_filter.name,
        n_taps=len(wavelet_filter),
    )


def idwt1d(pyramid: CoefficientPyramid, approx: Optional[np.ndarray] = None) -> np.ndarray:
    """Inverse periodized transform of a 1D pyramid (L1 pyramids are renormalized first)"""
    if pyramid.dim != 1:
        raise InvalidInputError("idwt1d needs a 1D pyramid")
    if pyramid.wavelet is None:
        raise InvalidInputError("pyramid carries no wavelet name")

    details = []
    for j, d in zip(pyramid.levels, pyramid.details):
        scale = 2.0 ** (-(j - pyramid.sample_level) / 2.0) if pyramid.normalization == "l1" else 1.0
        details.append(np.asarray(d, dtype=float) * scale)

    if approx is None:
        approx = pyramid.approx if pyramid.approx is not None else np.zeros_like(details[-1])
    return pywt.waverec([approx] + details[::-1], pyramid.wavelet, mode="periodization")
