"""
mfspec: classical wavelet-leader multifractal formalism

structure functions -> scaling exponents (log-log regression) -> Legendre spectrum
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from mf_errors import InvalidInputError, InvalidRangeError
from mf_leaders import LeaderPyramid
from mf_legendre import affine_infimum, uniform_grid
from mf_logging import get_logger, log_event

logger = get_logger("classic")

LN2 = math.log(2.0)


def default_q_grid() -> np.ndarray:
    return uniform_grid(-4.0, 4.0, 0.25)


@dataclass
class StructureFunctionTable:
    """log2 S(q, j): rows follow q_grid, columns follow levels (ascending)"""
    q_grid: np.ndarray
    levels: List[int]
    log2_S: np.ndarray
    n_j: List[int]
    log2_var: List[float]
    dropped: List[int] = field(default_factory=list)

    def column(self, j: int) -> np.ndarray:
        return self.log2_S[:, self.levels.index(j)]


@dataclass
class ScalingFunction:
    """Regression estimates of zeta(q) (or zeta_g(q)) with per-q fit diagnostics"""
    q_grid: np.ndarray
    zeta: np.ndarray
    intercept: np.ndarray
    stderr: np.ndarray
    r2: np.ndarray
    j1: int
    j2: int
    weighted: bool = False
    tag: str = "zeta"


@dataclass
class SpectrumCurve:
    h: np.ndarray
    D: np.ndarray
    estimator: str
    dim: int
    params: Dict = field(default_factory=dict)

    def max_finite(self) -> float:
        finite = np.isfinite(self.D)
        return float(self.D[finite].max()) if finite.any() else -math.inf

    def to_dict(self) -> Dict:
        """JSON-ready form, -inf as None"""
        return {
            "estimator": self.estimator,
            "d": self.dim,
            "params": self.params,
            "h": [float(x) for x in self.h],
            "D": [float(x) if np.isfinite(x) else None for x in self.D],
        }


def level_log_leaders(leaders: LeaderPyramid) -> List[Tuple[int, np.ndarray]]:
    """(level, log2 of valid leaders) ascending in j; empty levels are dropped and logged"""
    rows = []
    for j in sorted(leaders.levels):
        vals = leaders.valid_values(j)
        if vals.size == 0:
            log_event(logger, "scale_dropped", level=logging.WARNING, j=j, reason="no valid leaders")
            continue
        rows.append((j, np.log2(vals)))
    return rows


def log2_mean_exp2(exponents: np.ndarray) -> np.ndarray:
    """
    log2( mean_k 2^{e[..., k]} ) along the last axis, max-shifted in the log
    domain so |e| in the hundreds neither overflows nor underflows.
    """
    n = exponents.shape[-1]
    return (logsumexp(exponents * LN2, axis=-1) - math.log(n)) / LN2


def structure_functions(leaders: LeaderPyramid, q_grid=None) -> StructureFunctionTable:
    """log2 S(q, j) = log2( (1/n_j) sum_k L_{j,k}^q ) over valid leaders"""
    q = default_q_grid() if q_grid is None else np.asarray(q_grid, dtype=float)
    rows = level_log_leaders(leaders)
    if not rows:
        raise InvalidInputError("no level holds a valid leader")

    dropped = sorted(set(leaders.levels) - {j for j, _ in rows})
    columns, n_j, log2_var = [], [], []
    for j, logl in rows:
        col = log2_mean_exp2(q[:, None] * logl[None, :])
        col[q == 0] = 0.0
        columns.append(col)
        n_j.append(int(logl.size))
        log2_var.append(float(np.var(logl)))

    return StructureFunctionTable(
        q_grid=q,
        levels=[j for j, _ in rows],
        log2_S=np.stack(columns, axis=1),
        n_j=n_j,
        log2_var=log2_var,
        dropped=dropped,
    )


def select_levels(levels: List[int], j1: int, j2: int) -> np.ndarray:
    """Indices of levels in [j1, j2]; at least 3 are required"""
    if j1 >= j2:
        raise InvalidRangeError(f"fit range needs j1 < j2, got ({j1}, {j2})")
    if j1 < min(levels) or j2 > max(levels):
        raise InvalidRangeError(f"fit range ({j1}, {j2}) outside available levels [{min(levels)}, {max(levels)}]")
    idx = np.array([i for i, j in enumerate(levels) if j1 <= j <= j2], dtype=int)
    if idx.size < 3:
        raise InvalidRangeError(f"fit range ({j1}, {j2}) holds {idx.size} usable levels, need >= 3")
    return idx


def regression_weights(j: np.ndarray, v: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Linear weights w with sum(w) = 0 and sum(j w) = -1, i.e. the (weighted)
    least-squares slope of y against -j is sum(w y).
    """
    j = np.asarray(j, dtype=float)
    v = np.ones_like(j) if v is None else np.asarray(v, dtype=float)
    x = -j
    xbar = np.sum(v * x) / np.sum(v)
    sxx = np.sum(v * (x - xbar) ** 2)
    return v * (x - xbar) / sxx


def fit_lines(levels: np.ndarray, Y: np.ndarray, v: Optional[np.ndarray] = None):
    """
    Regress every row of Y against -j.

    Returns (slope, intercept, stderr, r2); the line is y = intercept + slope * (-j).
    """
    levels = np.asarray(levels, dtype=float)
    v = np.ones_like(levels) if v is None else np.asarray(v, dtype=float)
    x = -levels
    w = regression_weights(levels, v)

    slope = Y @ w
    xbar = np.sum(v * x) / np.sum(v)
    ybar = (Y @ v) / np.sum(v)
    intercept = ybar - slope * xbar

    resid = Y - (intercept[:, None] + slope[:, None] * x[None, :])
    ss_res = np.sum(v * resid ** 2, axis=1)
    ss_tot = np.sum(v * (Y - ybar[:, None]) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, 1.0)
        sxx = np.sum(v * (x - xbar) ** 2)
        dof = max(levels.size - 2, 1)
        stderr = np.sqrt(ss_res / dof / sxx)
    return slope, intercept, stderr, r2


def inverse_variance(table: StructureFunctionTable, idx: np.ndarray) -> np.ndarray:
    """v_j = n_j / var_k(log2 L_{j,k}); unit weights when any variance vanishes"""
    n = np.asarray(table.n_j, dtype=float)[idx]
    var = np.asarray(table.log2_var, dtype=float)[idx]
    if np.any(var <= 0):
        return np.ones_like(n)
    return n / var


def scaling_exponents(
    table: StructureFunctionTable,
    j1: int,
    j2: int,
    weighted: bool = False,
) -> ScalingFunction:
    idx = select_levels(table.levels, j1, j2)
    levels = np.asarray(table.levels)[idx]
    v = inverse_variance(table, idx) if weighted else None

    slope, intercept, stderr, r2 = fit_lines(levels, table.log2_S[:, idx], v)
    return ScalingFunction(
        q_grid=table.q_grid,
        zeta=slope,
        intercept=intercept,
        stderr=stderr,
        r2=r2,
        j1=j1,
        j2=j2,
        weighted=weighted,
    )


def legendre_spectrum(zeta: ScalingFunction, h_grid, d: int, params: Optional[Dict] = None) -> SpectrumCurve:
    """L(h) = min_q (d + q h - zeta(q))"""
    if not np.all(np.isfinite(zeta.zeta)):
        raise InvalidInputError("scaling function has non-finite values")
    h = np.asarray(h_grid, dtype=float)
    D = affine_infimum(h, zeta.q_grid, zeta.zeta, d)
    return SpectrumCurve(h=h, D=D, estimator="legendre", dim=d, params=dict(params or {}))


def parametric_spectrum(zeta: ScalingFunction, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """(h(q), L(h(q))) with h(q) = dzeta/dq by centered differences"""
    h = np.gradient(zeta.zeta, zeta.q_grid)
    return h, d + zeta.q_grid * h - zeta.zeta


def default_fit_range(leaders: LeaderPyramid, n_taps: int) -> Tuple[int, int]:
    """
    Drop the two finest levels and the coarse levels dominated by filter
    wrap-around; fall back to the full range when that leaves < 3 levels.
    """
    levels = [j for j, n in zip(leaders.levels, leaders.n_valid) if n > 0]
    if len(levels) < 3:
        raise InvalidRangeError(f"only {len(levels)} levels carry valid leaders")
    j_min, j_max = min(levels), max(levels)
    j2 = j_max - 2
    j1 = j_min + int(math.ceil(math.log2(max(n_taps, 2)))) + 1
    if j2 - j1 < 2:
        return j_min, j_max
    return j1, j2
