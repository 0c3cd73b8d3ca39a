"""
mfspec: wavelet leaders

A leader is the largest L1-normalized coefficient magnitude found in the
3-wide neighbourhood of a dyadic cube and in every finer cube below it.
Computed bottom-up: T_j = max(|c_j|, max over the two (or four) children of
T_{j+1}), then a periodic size-3 running max over T_j.
"""

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from mf_errors import InvalidInputError, InvalidParameterError
from mf_logging import get_logger
from mf_transform import CoefficientPyramid

logger = get_logger("leaders")


@dataclass
class LeaderPyramid:
    """Leaders and validity masks per level, finest first (same order as the pyramid)"""
    dim: int
    levels: List[int]
    values: List[np.ndarray]
    valid: List[np.ndarray]

    @property
    def n_valid(self) -> List[int]:
        return [int(np.count_nonzero(v)) for v in self.valid]

    def index_of(self, j: int) -> int:
        try:
            return self.levels.index(j)
        except ValueError:
            raise InvalidInputError(f"level j={j} outside leader levels {self.levels}") from None

    def valid_values(self, j: int) -> np.ndarray:
        """Flat array of the valid leaders at level j"""
        i = self.index_of(j)
        return self.values[i][self.valid[i]]

    def scaled(self, factor: float) -> "LeaderPyramid":
        return LeaderPyramid(self.dim, list(self.levels), [v * factor for v in self.values], list(self.valid))


def _border_mask(shape) -> np.ndarray:
    """True away from the edges whose 3-wide window wraps around"""
    mask = np.ones(shape, dtype=bool)
    for axis, n in enumerate(shape):
        if n <= 2:
            mask[:] = False
            break
        edge = [slice(None)] * len(shape)
        edge[axis] = [0, n - 1]
        mask[tuple(edge)] = False
    return mask


def _children_max(finer: np.ndarray) -> np.ndarray:
    """Max over the 2^d children of every parent cube"""
    if finer.ndim == 1:
        return finer.reshape(-1, 2).max(axis=1)
    n1, n2 = finer.shape
    return finer.reshape(n1 // 2, 2, n2 // 2, 2).max(axis=(1, 3))


def _compute(pyramid: CoefficientPyramid, dim: int, mask_border: bool) -> LeaderPyramid:
    if pyramid.n_octaves == 0:
        raise InvalidInputError("empty coefficient pyramid")
    if pyramid.dim != dim:
        raise InvalidInputError(f"expected a {dim}D pyramid, got {pyramid.dim}D")

    values, valid = [], []
    below = None
    for j, details in zip(pyramid.levels, pyramid.details):
        mag = np.abs(np.asarray(details, dtype=float))
        if dim == 2:
            mag = mag.max(axis=0)
        mag = mag * pyramid.l1_factor(j)

        if below is not None:
            if tuple(2 * s for s in mag.shape) != below.shape:
                raise InvalidInputError(f"level {j} is not dyadic with respect to level {j + 1}")
            mag = np.maximum(mag, _children_max(below))
        below = mag

        if dim == 1:
            lead = ndimage.maximum_filter1d(mag, size=3, mode="wrap")
        else:
            lead = ndimage.maximum_filter(mag, size=3, mode="wrap")

        ok = lead > 0
        if mask_border:
            ok &= _border_mask(lead.shape)
        values.append(lead)
        valid.append(ok)

    return LeaderPyramid(dim=dim, levels=list(pyramid.levels), values=values, valid=valid)


def leaders1d(pyramid: CoefficientPyramid, mask_border: bool = False) -> LeaderPyramid:
    return _compute(pyramid, 1, mask_border)


def leaders2d(pyramid: CoefficientPyramid, mask_border: bool = False) -> LeaderPyramid:
    """Leaders over the 3x3 neighbourhood, all 3 subbands and all finer levels"""
    return _compute(pyramid, 2, mask_border)


def compute_leaders(pyramid: CoefficientPyramid, mask_border: bool = False) -> LeaderPyramid:
    if pyramid.dim == 1:
        return leaders1d(pyramid, mask_border)
    return leaders2d(pyramid, mask_border)


def log_slopes(leaders: LeaderPyramid) -> List[np.ndarray]:
    """h(y, 2^-j) = log2 L / (-j) per level, NaN at invalid positions"""
    slopes = []
    for j, vals, ok in zip(leaders.levels, leaders.values, leaders.valid):
        h = np.full(vals.shape, np.nan)
        if j != 0:
            h[ok] = np.log2(vals[ok]) / (-j)
        slopes.append(h)
    return slopes


def ld_histogram(leaders: LeaderPyramid, j: int, epsilon: float, h_grid) -> np.ndarray:
    """
    Scale-j large deviation histogram log2(#{|h(y,2^-j) - h| <= eps}) / j.

    The divisor is +j, not -j: counts grow like 2^{jD}, so the histogram is
    non-negative and reads directly as a dimension.

    Empty counts give -inf. Diagnostic only: the double limit in (j, eps) is
    not taken.
    """
    if not epsilon > 0:
        raise InvalidParameterError("epsilon", f"must be > 0, got {epsilon}")
    if j == 0:
        raise InvalidParameterError("j", "level 0 has no log-slope")

    i = leaders.index_of(j)
    slopes = log_slopes(leaders)[i]
    slopes = np.sort(slopes[np.isfinite(slopes)])

    h = np.asarray(h_grid, dtype=float)
    counts = np.searchsorted(slopes, h + epsilon, side="right") - np.searchsorted(slopes, h - epsilon, side="left")

    out = np.full(h.shape, -np.inf)
    hit = counts > 0
    out[hit] = np.log2(counts[hit]) / j
    return out
