#!/usr/bin/env python3
"""
mfspec command line

    mf_cli.py analyze --input sig.csv --dim 1 --j1 3 --j2 12 --out out/
    mf_cli.py synth --process mrw1d --n 65536 --H 0.72 --lambda2 0.08 --seed 7 --out data/
    mf_cli.py mc configs/concat-mrw.yaml

Exit codes: 0 ok, 1 usage / parameter / config error, 2 unreadable or
ill-shaped data.
"""

import argparse
import hashlib
import json
import logging
import os
import platform
import socket
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pywt
import scipy

from mf_config import AnalysisConfig, ProcessSpec, load_experiment, parse_list, worker_count
from mf_errors import (
    ConfigError,
    InsufficientLengthError,
    InvalidInputError,
    InvalidParameterError,
    InvalidRangeError,
    MfspecError,
    UnsupportedFilterError,
)
from mf_gmf import Analysis, analyze
from mf_harness import classical_logscale_table, logscale_table, run_experiment, write_aggregate
from mf_legendre import uniform_grid
from mf_logging import get_logger, log_event, utc_timestamp
from mf_synth import synthesize, theory_for
from mf_transform import CoefficientPyramid, idwt1d

logger = get_logger("cli")

TOOL_VERSION = "0.3.0"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

FLOAT_FORMAT = "%.17g"

PROCESS_ALIASES = {"levy": "levy_brownian"}

RANGE_FLAGS = ("--q", "--h")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; usage errors map to 1 here"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- data files


def sha256sum(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def read_csv_signal(path: Path) -> np.ndarray:
    """Single-column CSV, optional header row"""
    try:
        df = pd.read_csv(path, header=None)
    except pd.errors.EmptyDataError as e:
        raise InvalidInputError(f"{path}: empty file") from e
    if df.shape[1] != 1:
        raise InvalidInputError(f"{path}: expected one column, found {df.shape[1]}")

    col = pd.to_numeric(df.iloc[:, 0], errors="coerce")
    if len(col) > 0 and np.isnan(col.iloc[0]):
        col = col.iloc[1:]
    if col.isna().any():
        bad = int(col.index[col.isna()][0]) + 1
        raise InvalidInputError(f"{path}: non-numeric value on line {bad}")
    if col.empty:
        raise InvalidInputError(f"{path}: no samples")
    return col.to_numpy(dtype=float)


def _pgm_header(raw: bytes, path: Path) -> Tuple[int, int, int, int]:
    """(width, height, maxval, offset of pixel data) of a binary P5 file"""
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidInputError(f"{path}: truncated PGM header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise InvalidInputError(f"{path}: only binary PGM (P5) is supported, got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as e:
        raise InvalidInputError(f"{path}: malformed PGM header") from e
    if not 0 < maxval < 65536:
        raise InvalidInputError(f"{path}: PGM maxval {maxval} outside 1..65535")
    return width, height, maxval, pos + 1


def read_pgm(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    width, height, maxval, offset = _pgm_header(raw, path)
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize
    if len(raw) - offset < expected:
        raise InvalidInputError(f"{path}: {len(raw) - offset} pixel bytes, header promises {expected}")
    pixels = np.frombuffer(raw, dtype=dtype, count=width * height, offset=offset)
    return pixels.reshape(height, width).astype(float)


def write_pgm(path: Path, image: np.ndarray):
    """16-bit P5, rescaled to the full 0..65535 range"""
    lo, hi = float(np.min(image)), float(np.max(image))
    span = hi - lo if hi > lo else 1.0
    pixels = np.round((image - lo) / span * 65535.0).astype(">u2")
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        f.write(pixels.tobytes())


def _manifest_shape(path: Path) -> Optional[Tuple[int, ...]]:
    """Shape recorded for a .f64 file by the manifest sitting next to it"""
    manifest = path.parent / "manifest.json"
    if not manifest.exists():
        return None
    meta = json.loads(manifest.read_text())
    for entry in meta.get("outputs", []):
        if Path(entry.get("file", "")).name == path.name and "shape" in entry:
            return tuple(int(s) for s in entry["shape"])
    return None


def read_f64(path: Path, shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Raw little-endian float64; shape from the flag or the sidecar manifest"""
    shape = tuple(shape) if shape else _manifest_shape(path)
    if shape is None:
        raise InvalidInputError(f"{path}: raw float64 input needs --shape or a manifest.json with its shape")
    data = np.fromfile(path, dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise InvalidInputError(f"{path}: {data.size} values do not fill shape {shape}")
    return data.reshape(shape)


def load_data(path: Path, shape: Optional[Sequence[int]] = None) -> np.ndarray:
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".f64":
        return read_f64(path, shape)
    return read_csv_signal(path)


def write_csv_signal(path: Path, x: np.ndarray):
    pd.DataFrame({"value": x}).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_json(path: Path, payload: Dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------- manifest


def versions() -> Dict[str, str]:
    return {
        "mfspec": TOOL_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pywt": pywt.__version__,
        "pandas": pd.__version__,
    }


def save_manifest(out_dir: Path, command: str, argv: Sequence[str], config: Dict,
                  inputs: Sequence[Path], outputs: List[Dict], started: str, duration: float) -> Path:
    """Everything needed to re-run the command, plus an inventory of what it wrote"""
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "inputs": [{"file": str(p), "sha256": sha256sum(p)} for p in inputs],
        "outputs": outputs,
        "started": started,
        "finished": utc_timestamp(),
        "duration_sec": duration,
        "versions": versions(),
        "environment": {
            "os": platform.system(),
            "hostname": socket.gethostname(),
            "threads": os.getenv("MFSPEC_THREADS"),
        },
    }
    path = out_dir / "manifest.json"
    write_json(path, manifest)
    log_event(logger, "metadata_saved", file=str(path))
    return path


def _inventory(paths: Sequence[Path], extra: Optional[Dict[str, Dict]] = None) -> List[Dict]:
    extra = extra or {}
    out = []
    for p in paths:
        entry = {"file": p.name, "sha256": sha256sum(p)}
        entry.update(extra.get(p.name, {}))
        out.append(entry)
    return out


# ---------------------------------------------------------------- analyze


def analysis_config(args: argparse.Namespace) -> AnalysisConfig:
    """Preset analysis section (if any) overridden by explicit flags"""
    base = load_experiment(args.preset).analysis.to_dict() if args.preset else {}
    flags = {
        "n_vanishing_moments": args.nvm,
        "levels": args.levels,
        "j1": args.j1,
        "j2": args.j2,
        "centering_j1": args.centering_j1,
        "centering_j2": args.centering_j2,
        "q_range": args.q,
        "h_range": args.h,
        "gamma_set": parse_list(args.gamma) if args.gamma else None,
        "delta": args.delta,
        "g_shape": args.g_shape,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.weighted:
        base["weighted"] = True
    if args.mask_border:
        base["mask_border"] = True
    return AnalysisConfig(**base)


def spectra_payload(analysis: Analysis, config: AnalysisConfig) -> Dict:
    nvm = {"nvm": config.n_vanishing_moments}

    def curve(c):
        out = c.to_dict()
        out["params"] = {**out["params"], **nvm}
        return out

    summary = analysis.summary()
    summary.pop("timings", None)
    return {
        "legendre": curve(analysis.classical),
        "envelope": curve(analysis.envelope),
        "members": [curve(m.curve) for m in analysis.members],
        "summary": summary,
    }


def cmd_analyze(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started, t0 = utc_timestamp(), time.time()
    config = analysis_config(args)
    path = Path(args.input)
    data = load_data(path, args.shape)
    if data.ndim != args.dim:
        raise InvalidInputError(f"{path}: data has {data.ndim} axes, --dim is {args.dim}")

    workers = args.threads or worker_count()
    analysis = analyze(data, args.dim, config, workers=workers)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / "spectra.json", out_dir / "logscale.csv", out_dir / "logscale_classical.csv"]
    write_json(written[0], spectra_payload(analysis, config))
    logscale_table(analysis).to_csv(written[1], index=False, float_format=FLOAT_FORMAT)
    classical_logscale_table(analysis).to_csv(written[2], index=False, float_format=FLOAT_FORMAT)
    for p in written:
        log_event(logger, "output_written", file=str(p))

    save_manifest(
        out_dir, "analyze", argv,
        {"dim": args.dim, "shape": list(data.shape), "analysis": config.to_dict(),
         "timings": analysis.timings},
        [path], _inventory(written), started, time.time() - t0,
    )
    summary = analysis.summary()
    print(f"analyzed {path} (d={args.dim}, j={analysis.j1}..{analysis.j2}): "
          f"max L={analysis.classical.max_finite():.4f}, max L_env={analysis.envelope.max_finite():.4f}, "
          f"envelope modes={len(summary['envelope_modes'])} -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- synth


def process_spec(args: argparse.Namespace) -> ProcessSpec:
    kind = PROCESS_ALIASES.get(args.process, args.process)
    return ProcessSpec(
        kind=kind,
        n=args.n,
        shape=tuple(args.shape) if args.shape else None,
        alpha=args.alpha,
        w=args.w,
        theta=args.theta,
        levels=args.levels,
        H=args.H,
        lambda2=args.lambda2,
        integral_scale=args.integral_scale,
        seed=args.seed,
    )


def _coefficient_frame(pyramid: CoefficientPyramid) -> pd.DataFrame:
    rows = [pd.DataFrame({"j": j, "k": np.arange(d.size), "c": np.ravel(d)})
            for j, d in zip(pyramid.levels, pyramid.details)]
    return pd.concat(rows, ignore_index=True).sort_values(["j", "k"], kind="stable")


def cmd_synth(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started, t0 = utc_timestamp(), time.time()
    spec = process_spec(args)
    h_lo, h_step, h_hi = args.h
    h_grid = uniform_grid(h_lo, h_hi, h_step)

    data = synthesize(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    extra: Dict[str, Dict] = {}

    if isinstance(data, CoefficientPyramid):
        coeffs = out_dir / "coefficients.csv"
        _coefficient_frame(data).to_csv(coeffs, index=False, float_format=FLOAT_FORMAT)
        written.append(coeffs)
        signal = out_dir / "data.csv"
        write_csv_signal(signal, idwt1d(data))
        written.append(signal)
    elif data.ndim == 1:
        signal = out_dir / "data.csv"
        write_csv_signal(signal, data)
        written.append(signal)
    elif args.format == "pgm":
        image = out_dir / "data.pgm"
        write_pgm(image, data)
        written.append(image)
    else:
        image = out_dir / "data.f64"
        data.astype("<f8").tofile(image)
        written.append(image)
        extra[image.name] = {"shape": list(data.shape)}

    theory = out_dir / "theory.json"
    write_json(theory, theory_for(spec).curve(h_grid).to_dict())
    written.append(theory)
    for p in written:
        log_event(logger, "output_written", file=str(p))

    save_manifest(out_dir, "synth", argv, {"process": spec.to_dict(), "h_range": list(args.h)},
                  [], _inventory(written, extra), started, time.time() - t0)
    print(f"synthesized {spec.kind} (seed {spec.seed}) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- mc


def cmd_mc(args: argparse.Namespace, argv: Sequence[str]) -> int:
    started, t0 = utc_timestamp(), time.time()
    path = Path(args.config)
    config = load_experiment(path)
    if args.out:
        config.output_dir = args.out
    if args.realizations is not None:
        if args.realizations < 1:
            raise InvalidParameterError("realizations", f"must be >= 1, got {args.realizations}")
        config.n_realizations = args.realizations

    result = run_experiment(config, workers=args.threads, progress=not args.no_progress)
    out_dir = config.out_path
    written = write_aggregate(result, out_dir)

    save_manifest(out_dir, "mc", argv, config.to_dict(), [path], _inventory(written),
                  started, time.time() - t0)
    print(f"{config.name}: {result.n_ok}/{config.n_realizations} realizations ok "
          f"({result.n_failed} failed) -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def _range(text: str) -> Tuple[float, float, float]:
    try:
        lo, step, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:step:hi, got {text!r}")
    return lo, step, hi


def attach_range_values(argv: Sequence[str]) -> List[str]:
    """
    `--q -4:0.25:4` -> `--q=-4:0.25:4`; argparse would otherwise read a
    range with a negative lower bound as an option.
    """
    out: List[str] = []
    tokens = list(argv)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in RANGE_FLAGS and i + 1 < len(tokens) and tokens[i + 1].startswith("-") and ":" in tokens[i + 1]:
            out.append(f"{tok}={tokens[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def _shape(text: str) -> Tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n1,n2, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Wavelet-leader multifractal spectrum estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="Classical and envelope spectra of a signal or image")
    a.add_argument("--input", required=True, help="CSV (1D), PGM or .f64 (2D)")
    a.add_argument("--dim", type=int, choices=(1, 2), required=True)
    a.add_argument("--out", required=True, help="Output directory")
    a.add_argument("--shape", type=_shape, help="Shape of a .f64 input, e.g. 512,512")
    a.add_argument("--preset", help="YAML experiment file whose analysis section is the baseline")
    a.add_argument("--nvm", type=int, help="Vanishing moments of the Daubechies wavelet")
    a.add_argument("--levels", type=int, help="Decomposition depth")
    a.add_argument("--j1", type=int)
    a.add_argument("--j2", type=int)
    a.add_argument("--centering-j1", type=int)
    a.add_argument("--centering-j2", type=int)
    a.add_argument("--q", type=_range, help="q grid lo:step:hi")
    a.add_argument("--h", type=_range, help="h grid lo:step:hi")
    a.add_argument("--gamma", help="Comma-separated gamma set (must contain 0)")
    a.add_argument("--delta", help="'auto', comma list, or lo:step:hi")
    a.add_argument("--g-shape", choices=("parabola", "absolute_value"))
    a.add_argument("--weighted", action="store_true", help="Inverse-variance regression weights")
    a.add_argument("--mask-border", action="store_true", help="Drop leaders whose window wraps around")

    s = sub.add_parser("synth", help="Generate a synthetic process and its theoretical spectrum")
    s.add_argument("--process", required=True,
                   choices=("levy", "levy_brownian", "dwc", "dwc_thresholded", "mrw1d", "mrw2d"))
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--shape", type=_shape)
    s.add_argument("--alpha", type=float)
    s.add_argument("--w", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--levels", type=int)
    s.add_argument("--H", type=float)
    s.add_argument("--lambda2", type=float)
    s.add_argument("--integral-scale", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=("f64", "pgm"), default="f64", help="2D output format")
    s.add_argument("--h", type=_range, default=AnalysisConfig.h_range, help="Theory h grid lo:step:hi")

    m = sub.add_parser("mc", help="Monte Carlo run of a YAML experiment")
    m.add_argument("config", help="Experiment YAML file")
    m.add_argument("--out", help="Override experiment.output_dir")
    m.add_argument("--realizations", type=int, help="Override experiment.n_realizations")
    m.add_argument("--no-progress", action="store_true")

    for p in (a, s, m):
        p.add_argument("--threads", type=int, default=None,
                       help="Worker cap (default: MFSPEC_THREADS or all cores)")
    return parser


COMMANDS = {"analyze": cmd_analyze, "synth": cmd_synth, "mc": cmd_mc}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = attach_range_values(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except (ConfigError, InvalidParameterError, InvalidRangeError, UnsupportedFilterError) as e:
        code, err = EXIT_USAGE, e
    except (OSError, InvalidInputError, InsufficientLengthError, MfspecError) as e:
        code, err = EXIT_DATA, e
    except Exception as e:
        # anything unclassified failed while processing the data
        code, err = EXIT_DATA, e
    log_event(logger, "command_failed", level=logging.ERROR, command=args.command,
              error_type=type(err).__name__, error=str(err), exit_code=code)
    print(f"error: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
