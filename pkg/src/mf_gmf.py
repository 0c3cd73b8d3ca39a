"""
mfspec: generalized multifractal formalism

For a lift g (curvature gamma, shift delta), leaders are re-expressed as
log-slopes phi = (log2 L - c10) / (-j) and aggregated as

    log2 S_g(q, j) = log2 mean_k 2^{-j (q phi - g(phi))}

whose scaling exponents zeta_g give L_g(h) = min_q (d + q h - zeta_g(q)) - g(h).
The envelope estimate is the pointwise minimum of L_g over a (gamma, delta)
family. Generalized leaders are never formed at linear scale.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import find_peaks

from mf_classic import (
    ScalingFunction,
    SpectrumCurve,
    StructureFunctionTable,
    default_fit_range,
    default_q_grid,
    fit_lines,
    legendre_spectrum,
    level_log_leaders,
    log2_mean_exp2,
    scaling_exponents,
    select_levels,
    structure_functions,
)
from mf_config import AnalysisConfig
from mf_errors import InvalidInputError
from mf_leaders import LeaderPyramid, compute_leaders
from mf_legendre import GFunction, affine_infimum
from mf_logging import get_logger, log_event
from mf_transform import CoefficientPyramid, daubechies_filter, default_levels, dwt1d, dwt2d

logger = get_logger("gmf")


@dataclass
class CenteringEstimate:
    """mean_k log2 L_{j,k} ~ c10 - h_mode * j over [j1, j2]"""
    c10: float
    h_mode: float
    j1: int
    j2: int


@dataclass
class GmfParameterGrid:
    gamma_set: List[float]
    delta_grid: List[float]
    q_grid: np.ndarray
    shape: str = "parabola"

    def __post_init__(self):
        if 0.0 not in [float(g) for g in self.gamma_set]:
            raise InvalidInputError("parameter grid must contain gamma = 0")
        if len(self.delta_grid) == 0:
            raise InvalidInputError("parameter grid needs at least one delta")

    def members(self) -> List[GFunction]:
        """One lift per (gamma, delta); gamma = 0 appears once since delta is irrelevant there"""
        lifts = []
        for gamma in self.gamma_set:
            if gamma == 0:
                lifts.append(GFunction(self.shape, 0.0, float(self.delta_grid[len(self.delta_grid) // 2])))
                continue
            lifts.extend(GFunction(self.shape, float(gamma), float(delta)) for delta in self.delta_grid)
        return lifts


@dataclass
class Member:
    g: GFunction
    table: StructureFunctionTable
    zeta: ScalingFunction
    curve: SpectrumCurve


@dataclass
class EnvelopeResult:
    envelope: SpectrumCurve
    members: List[Member]
    centering: CenteringEstimate


def estimate_centering(leaders: LeaderPyramid, j1: int, j2: int) -> CenteringEstimate:
    rows = level_log_leaders(leaders)
    levels = [j for j, _ in rows]
    idx = select_levels(levels, j1, j2)
    means = np.array([rows[i][1].mean() for i in idx])
    slope, intercept, _, _ = fit_lines(np.asarray(levels)[idx], means[None, :])
    return CenteringEstimate(c10=float(intercept[0]), h_mode=float(slope[0]), j1=j1, j2=j2)


def generalized_log_structure(
    leaders: LeaderPyramid,
    centering: CenteringEstimate,
    q: Union[float, Sequence[float]],
    g: GFunction,
    level_range: Optional[Tuple[int, int]] = None,
) -> StructureFunctionTable:
    """
    log2 S_g(q, j) for every level with valid leaders (level 0 has no slope
    and is dropped). `level_range` restricts the work to [lo, hi].
    """
    q_grid = np.atleast_1d(np.asarray(q, dtype=float))
    columns, levels, n_j, log2_var, dropped = [], [], [], [], []

    for j, logl in level_log_leaders(leaders):
        if level_range is not None and not level_range[0] <= j <= level_range[1]:
            continue
        if j == 0:
            log_event(logger, "scale_dropped", level=logging.WARNING, j=j, reason="level 0")
            dropped.append(j)
            continue
        a = logl - centering.c10            # = -j * phi
        b = j * g(a / (-j))                 # = j * g(phi)
        col = log2_mean_exp2(q_grid[:, None] * a[None, :] + b[None, :])
        columns.append(col)
        levels.append(j)
        n_j.append(int(logl.size))
        log2_var.append(float(np.var(logl)))

    if not columns:
        raise InvalidInputError("no level holds a valid leader")
    in_range = [j for j in leaders.levels if level_range is None or level_range[0] <= j <= level_range[1]]
    dropped += sorted(set(in_range) - set(levels) - set(dropped))

    return StructureFunctionTable(
        q_grid=q_grid,
        levels=levels,
        log2_S=np.stack(columns, axis=1),
        n_j=n_j,
        log2_var=log2_var,
        dropped=dropped,
    )


def generalized_scaling_exponents(
    table: StructureFunctionTable,
    j1: int,
    j2: int,
    weighted: bool = False,
) -> ScalingFunction:
    zeta = scaling_exponents(table, j1, j2, weighted)
    zeta.tag = "zeta_g"
    return zeta


def generalized_spectrum(zeta_g: ScalingFunction, g: GFunction, h_grid, d: int,
                         params: Optional[Dict] = None) -> SpectrumCurve:
    """L_g(h) = min_q (d + q h - zeta_g(q)) - g(h)"""
    if not np.all(np.isfinite(zeta_g.zeta)):
        raise InvalidInputError("generalized scaling function has non-finite values")
    h = np.asarray(h_grid, dtype=float)
    D = affine_infimum(h, zeta_g.q_grid, zeta_g.zeta, d) - g(h)
    meta = {"gamma": g.gamma, "delta": g.delta, "shape": g.shape}
    meta.update(params or {})
    return SpectrumCurve(h=h, D=D, estimator="generalized", dim=d, params=meta)


def default_parameter_grid(centering: CenteringEstimate, q_grid=None, half_width: float = 0.3,
                           points: int = 21, shape: str = "parabola",
                           gamma_set: Sequence[float] = (0.0, 5.0, 10.0, 100.0, 200.0, 500.0)) -> GmfParameterGrid:
    deltas = np.linspace(centering.h_mode - half_width, centering.h_mode + half_width, points)
    return GmfParameterGrid(
        gamma_set=[float(g) for g in gamma_set],
        delta_grid=[float(x) for x in deltas],
        q_grid=default_q_grid() if q_grid is None else np.asarray(q_grid, dtype=float),
        shape=shape,
    )


def _member(leaders, centering, g, grid, j1, j2, h_grid, d, weighted, params) -> Member:
    table = generalized_log_structure(leaders, centering, grid.q_grid, g, level_range=(j1, j2))
    zeta = generalized_scaling_exponents(table, j1, j2, weighted)
    return Member(g=g, table=table, zeta=zeta, curve=generalized_spectrum(zeta, g, h_grid, d, params))


def envelope_estimate(
    leaders: LeaderPyramid,
    grid: GmfParameterGrid,
    j1: int,
    j2: int,
    h_grid,
    d: int,
    weighted: bool = False,
    centering: Optional[CenteringEstimate] = None,
    workers: int = 1,
) -> EnvelopeResult:
    """
    L_Upsilon(h) = min over the (gamma, delta) family of L_g(h).

    Members run on a thread pool (numpy releases the GIL in the heavy
    reductions); results keep the grid order whatever the scheduling.
    """
    if centering is None:
        centering = estimate_centering(leaders, j1, j2)
    h = np.asarray(h_grid, dtype=float)
    params = {"j1": j1, "j2": j2, "q_range": [float(grid.q_grid[0]), float(grid.q_grid[-1])]}
    lifts = grid.members()

    def run(g):
        return _member(leaders, centering, g, grid, j1, j2, h, d, weighted, params)

    if workers > 1 and len(lifts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(run, lifts))
    else:
        members = [run(g) for g in lifts]

    envelope = SpectrumCurve(
        h=h,
        D=np.min(np.stack([m.curve.D for m in members]), axis=0),
        estimator="envelope",
        dim=d,
        params={
            **params,
            "gamma": list(grid.gamma_set),
            "delta": [float(grid.delta_grid[0]), float(grid.delta_grid[-1]), len(grid.delta_grid)],
            "shape": grid.shape,
            "c10": centering.c10,
            "h_mode": centering.h_mode,
        },
    )
    return EnvelopeResult(envelope=envelope, members=members, centering=centering)


def find_modes(curve: SpectrumCurve, min_prominence: float = 0.0) -> List[Tuple[float, float]]:
    """Interior local maxima (h, D) of the finite part of a spectrum"""
    finite = np.isfinite(curve.D)
    if finite.sum() < 3:
        return []
    D = np.where(finite, curve.D, curve.D[finite].min() - 1.0)
    peaks, _ = find_peaks(D, prominence=min_prominence if min_prominence > 0 else None)
    return [(float(curve.h[i]), float(curve.D[i])) for i in peaks if finite[i]]


def nonconcavity_gap(classical: SpectrumCurve, envelope: SpectrumCurve) -> float:
    """max_h (L - L_Upsilon) over points where both are finite"""
    both = np.isfinite(classical.D) & np.isfinite(envelope.D)
    if not both.any():
        return 0.0
    return float(np.max(classical.D[both] - envelope.D[both]))


@dataclass
class Analysis:
    """Everything one analysis produces; shared by the CLI and the Monte Carlo harness"""
    dim: int
    pyramid: CoefficientPyramid
    leaders: LeaderPyramid
    j1: int
    j2: int
    table: StructureFunctionTable
    zeta: ScalingFunction
    classical: SpectrumCurve
    result: EnvelopeResult
    grid: GmfParameterGrid
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def envelope(self) -> SpectrumCurve:
        return self.result.envelope

    @property
    def members(self) -> List[Member]:
        return self.result.members

    def summary(self) -> Dict:
        return {
            "dim": self.dim,
            "j1": self.j1,
            "j2": self.j2,
            "c10": self.result.centering.c10,
            "h_mode": self.result.centering.h_mode,
            "n_members": len(self.members),
            "classical_modes": find_modes(self.classical, min_prominence=1e-6),
            "envelope_modes": find_modes(self.envelope, min_prominence=0.01),
            "nonconcavity_gap": nonconcavity_gap(self.classical, self.envelope),
            "timings": self.timings,
        }


def transform(data, dim: int, config: AnalysisConfig) -> CoefficientPyramid:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != dim:
        raise InvalidInputError(f"data has {arr.ndim} axes, analysis asked for d={dim}")
    wavelet = daubechies_filter(config.n_vanishing_moments)
    levels = config.levels or default_levels(min(arr.shape), wavelet)
    if dim == 1:
        return dwt1d(arr, wavelet, levels)
    return dwt2d(arr, wavelet, levels)


def analyze_pyramid(pyramid: CoefficientPyramid, config: AnalysisConfig, workers: int = 1) -> Analysis:
    """Leaders -> classical spectrum -> centering -> envelope over the (gamma, delta) family"""
    start = time.time()
    d = pyramid.dim
    leaders = compute_leaders(pyramid, mask_border=config.mask_border)

    if config.j1 is None or config.j2 is None:
        auto = default_fit_range(leaders, pyramid.n_taps)
        j1 = config.j1 if config.j1 is not None else auto[0]
        j2 = config.j2 if config.j2 is not None else auto[1]
    else:
        j1, j2 = config.j1, config.j2

    q_grid, h_grid = config.q_grid, config.h_grid
    table = structure_functions(leaders, q_grid)
    zeta = scaling_exponents(table, j1, j2, config.weighted)
    classical = legendre_spectrum(zeta, h_grid, d, params={"j1": j1, "j2": j2,
                                                            "q_range": [float(q_grid[0]), float(q_grid[-1])]})
    t_classic = time.time()

    cj1 = config.centering_j1 if config.centering_j1 is not None else j1
    cj2 = config.centering_j2 if config.centering_j2 is not None else j2
    centering = estimate_centering(leaders, cj1, cj2)

    if config.delta == "auto":
        grid = default_parameter_grid(centering, q_grid, config.delta_half_width, config.delta_points,
                                      config.g_shape, config.gamma_set)
    else:
        grid = GmfParameterGrid(list(config.gamma_set), list(config.delta), q_grid, config.g_shape)

    result = envelope_estimate(leaders, grid, j1, j2, h_grid, d, config.weighted, centering, workers)
    end = time.time()

    log_event(logger, "analysis_end", dim=d, j1=j1, j2=j2, n_members=len(result.members),
              h_mode=centering.h_mode, duration_sec=end - start)
    return Analysis(
        dim=d,
        pyramid=pyramid,
        leaders=leaders,
        j1=j1,
        j2=j2,
        table=table,
        zeta=zeta,
        classical=classical,
        result=result,
        grid=grid,
        timings={"classical_sec": t_classic - start, "generalized_sec": end - t_classic},
    )


def analyze(data, dim: int, config: Optional[AnalysisConfig] = None, workers: int = 1) -> Analysis:
    config = config or AnalysisConfig()
    log_event(logger, "analysis_start", dim=dim, shape=list(np.shape(data)),
              n_vanishing_moments=config.n_vanishing_moments)
    return analyze_pyramid(transform(data, dim, config), config, workers)
