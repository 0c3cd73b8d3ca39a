"""
mfspec: Monte Carlo experiment runner

Generates N realizations of a ProcessSpec, runs the classical and the
envelope estimators on each, then aggregates pointwise means, 95% quantile
bands and RMSE against the closed-form spectrum.

Realization i always uses child i of SeedSequence(master seed) and results
are placed by index, so the aggregate does not depend on the worker count.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from mf_config import AnalysisConfig, ExperimentConfig, ProcessSpec, worker_count
from mf_errors import MfspecError
from mf_gmf import Analysis, analyze, analyze_pyramid
from mf_logging import get_logger, log_event
from mf_synth import synthesize, theory_for
from mf_transform import CoefficientPyramid

logger = get_logger("harness")

ESTIMATORS = ("legendre", "envelope")
LOGSCALE_Q = (-2.0, -1.0, 0.0, 1.0, 2.0)
BAND = (2.5, 97.5)
CHAIN_TOLERANCE = 0.02
MEMBER_TOLERANCE = 1e-12


@dataclass
class RealizationResult:
    index: int
    spectra: Dict[str, np.ndarray]
    h_mode: float
    j1: int
    j2: int
    logscale: pd.DataFrame
    audit: Dict[str, float]


@dataclass
class EstimatorAggregate:
    mean: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    rmse: np.ndarray


@dataclass
class AggregateResult:
    name: str
    h: np.ndarray
    theory: np.ndarray
    estimators: Dict[str, EstimatorAggregate]
    n_ok: int
    failures: List[Dict] = field(default_factory=list)
    logscale: pd.DataFrame = field(default_factory=pd.DataFrame)
    audits: List[Dict] = field(default_factory=list)
    dim: int = 1

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def logscale_table(analysis: Analysis, q_values: Optional[Sequence[float]] = None) -> pd.DataFrame:
    """
    Scale-by-scale log2 S_g(q, j) for every envelope member, with the
    fitted line over [j1, j2] and its R^2.
    """
    rows = []
    for member in analysis.members:
        table, zeta = member.table, member.zeta
        for iq, q in enumerate(table.q_grid):
            if q_values is not None and not np.any(np.isclose(q, q_values)):
                continue
            slope, intercept, r2 = zeta.zeta[iq], zeta.intercept[iq], zeta.r2[iq]
            for ij, j in enumerate(table.levels):
                in_fit = zeta.j1 <= j <= zeta.j2
                rows.append({
                    "q": float(q),
                    "gamma": member.g.gamma,
                    "delta": member.g.delta,
                    "j": int(j),
                    "log2_S": float(table.log2_S[iq, ij]),
                    "fit": float(intercept - slope * j) if in_fit else np.nan,
                    "zeta": float(slope),
                    "r2": float(r2),
                })
    return pd.DataFrame(rows, columns=["q", "gamma", "delta", "j", "log2_S", "fit", "zeta", "r2"])


def classical_logscale_table(analysis: Analysis) -> pd.DataFrame:
    """log2 S(q, j) of the classical structure functions with the [j1, j2] fit"""
    table, zeta = analysis.table, analysis.zeta
    rows = []
    for iq, q in enumerate(table.q_grid):
        for ij, j in enumerate(table.levels):
            in_fit = zeta.j1 <= j <= zeta.j2
            rows.append({
                "q": float(q),
                "j": int(j),
                "n_j": int(table.n_j[ij]),
                "log2_S": float(table.log2_S[iq, ij]),
                "fit": float(zeta.intercept[iq] - zeta.zeta[iq] * j) if in_fit else np.nan,
                "zeta": float(zeta.zeta[iq]),
                "r2": float(zeta.r2[iq]),
            })
    return pd.DataFrame(rows, columns=["q", "j", "n_j", "log2_S", "fit", "zeta", "r2"])


def _analyze_data(data, analysis: AnalysisConfig) -> Analysis:
    if isinstance(data, CoefficientPyramid):
        return analyze_pyramid(data, analysis)
    return analyze(data, np.ndim(data), analysis)


def chain_audit(analysis: Analysis) -> Dict[str, float]:
    """Envelope <= every member, classical >= envelope (up to estimation noise)"""
    env = analysis.envelope.D
    member_gap = 0.0
    for m in analysis.members:
        both = np.isfinite(env) & np.isfinite(m.curve.D)
        if both.any():
            member_gap = max(member_gap, float(np.max(env[both] - m.curve.D[both])))
    both = np.isfinite(env) & np.isfinite(analysis.classical.D)
    classical_gap = float(np.max(env[both] - analysis.classical.D[both])) if both.any() else 0.0
    return {"envelope_above_member": member_gap, "envelope_above_classical": classical_gap}


def run_realization(index: int, process: ProcessSpec, analysis: AnalysisConfig,
                    seed: np.random.SeedSequence) -> RealizationResult:
    """One realization end to end; top-level so process pools can pickle it"""
    data = synthesize(process, seed)
    result = _analyze_data(data, analysis)
    logscale = logscale_table(result, LOGSCALE_Q)
    logscale.insert(0, "realization", index)

    audit = chain_audit(result)
    if audit["envelope_above_member"] > MEMBER_TOLERANCE or audit["envelope_above_classical"] > CHAIN_TOLERANCE:
        log_event(logger, "chain_audit_failed", level=logging.WARNING, realization=index, **audit)

    return RealizationResult(
        index=index,
        spectra={"legendre": result.classical.D, "envelope": result.envelope.D},
        h_mode=result.result.centering.h_mode,
        j1=result.j1,
        j2=result.j2,
        logscale=logscale,
        audit=audit,
    )


def aggregate(curves: np.ndarray, theory: np.ndarray) -> EstimatorAggregate:
    """
    Pointwise statistics over realizations (rows). A point that is -inf in
    any realization stays -inf; RMSE only where theory >= 0.
    """
    n_h = curves.shape[1]
    finite = np.all(np.isfinite(curves), axis=0)
    mean = np.full(n_h, -np.inf)
    low = np.full(n_h, -np.inf)
    high = np.full(n_h, -np.inf)
    rmse = np.full(n_h, np.nan)

    if finite.any():
        vals = curves[:, finite]
        mean[finite] = vals.mean(axis=0)
        q_low, q_high = np.percentile(vals, BAND, axis=0)
        low[finite] = np.minimum(q_low, mean[finite])
        high[finite] = np.maximum(q_high, mean[finite])

        scored = finite & np.isfinite(theory) & (theory >= 0)
        if scored.any():
            err = curves[:, scored] - theory[scored]
            rmse[scored] = np.sqrt(np.mean(err ** 2, axis=0))
    return EstimatorAggregate(mean=mean, band_low=low, band_high=high, rmse=rmse)


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   progress: bool = True) -> AggregateResult:
    """Run config.n_realizations realizations and aggregate them"""
    n = config.n_realizations
    workers = workers or config.workers or worker_count()
    workers = max(1, min(workers, n))
    seeds = np.random.SeedSequence(config.seed).spawn(n)
    h = config.analysis.h_grid
    theory = theory_for(config.process)(h)

    log_event(logger, "experiment_start", experiment=config.name, process_kind=config.process.kind,
              n_realizations=n, workers=workers, master_seed=config.seed)
    start = time.time()

    results: List[Optional[RealizationResult]] = [None] * n
    failures: List[Dict] = []

    def record_failure(i: int, err: Exception):
        failures.append({"realization": i, "error": f"{type(err).__name__}: {err}"})
        log_event(logger, "realization_failed", level=logging.WARNING, realization=i,
                  error_type=type(err).__name__, error=str(err))

    bar = tqdm(total=n, desc=config.name, disable=not progress)
    if workers == 1:
        for i in range(n):
            try:
                results[i] = run_realization(i, config.process, config.analysis, seeds[i])
            except Exception as e:
                record_failure(i, e)
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(run_realization, i, config.process, config.analysis, seeds[i]): i
                for i in range(n)
            }
            for future in as_completed(futures):
                i = futures[future]
                try:
                    results[i] = future.result()
                except Exception as e:
                    record_failure(i, e)
                bar.update(1)
    bar.close()

    done = [r for r in results if r is not None]
    failures.sort(key=lambda f: f["realization"])
    if not done:
        log_event(logger, "experiment_failed", level=logging.ERROR, experiment=config.name, n_failed=len(failures))
        raise MfspecError(f"all {n} realizations failed; first error: {failures[0]['error']}")

    estimators = {
        name: aggregate(np.stack([r.spectra[name] for r in done]), theory)
        for name in ESTIMATORS
    }
    audits = [{"realization": r.index, "h_mode": r.h_mode, "j1": r.j1, "j2": r.j2, **r.audit} for r in done]

    log_event(logger, "experiment_end", experiment=config.name, n_ok=len(done), n_failed=len(failures),
              duration_sec=time.time() - start)
    return AggregateResult(
        name=config.name,
        h=h,
        theory=theory,
        estimators=estimators,
        n_ok=len(done),
        failures=failures,
        logscale=pd.concat([r.logscale for r in done], ignore_index=True),
        audits=audits,
        dim=config.process.dim,
    )


def spectrum_frame(result: AggregateResult, estimator: str) -> pd.DataFrame:
    agg = result.estimators[estimator]
    return pd.DataFrame({
        "h": result.h,
        "mean": agg.mean,
        "band_low": agg.band_low,
        "band_high": agg.band_high,
        "rmse": agg.rmse,
        "theory": result.theory,
    })


def write_aggregate(result: AggregateResult, out_dir: Path) -> List[Path]:
    """Per-estimator spectrum CSVs, the logscale table and per-realization audits"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for estimator in result.estimators:
        path = out_dir / f"{estimator}_spectrum.csv"
        spectrum_frame(result, estimator).to_csv(path, index=False, float_format="%.17g")
        written.append(path)

    path = out_dir / "logscale.csv"
    result.logscale.to_csv(path, index=False, float_format="%.17g")
    written.append(path)

    path = out_dir / "realizations.csv"
    audits = pd.DataFrame(result.audits)
    if result.failures:
        audits = pd.concat([audits, pd.DataFrame(result.failures)], ignore_index=True)
    audits.sort_values("realization").to_csv(path, index=False, float_format="%.17g")
    written.append(path)

    path = out_dir / "summary.json"
    summary = {
        "name": result.name,
        "d": result.dim,
        "n_ok": result.n_ok,
        "n_failed": result.n_failed,
        "failures": result.failures,
        "max_rmse": {
            name: float(np.nanmax(agg.rmse)) if np.isfinite(agg.rmse).any() else None
            for name, agg in result.estimators.items()
        },
    }
    path.write_text(json.dumps(summary, indent=2) + "\n")
    written.append(path)

    for p in written:
        log_event(logger, "output_written", file=str(p))
    return written
