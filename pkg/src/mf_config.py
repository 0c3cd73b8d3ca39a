"""
mfspec: configuration dataclasses and YAML experiment files

An experiment file has three sections:

    name: concat-mrw
    process:   {kind: concat, pieces: [...], seed: 7}
    analysis:  {n_vanishing_moments: 3, j1: 7, j2: 13, gamma_set: [...]}
    experiment: {n_realizations: 10, seed: 0, output_dir: results/concat-mrw}

Validation errors name the offending field (and its line when known).
"""

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import psutil
import yaml

from mf_errors import ConfigError, InvalidParameterError
from mf_legendre import G_SHAPES, uniform_grid

PROCESS_KINDS = ("levy_brownian", "dwc", "dwc_thresholded", "mrw1d", "mrw2d", "concat")

DEFAULT_GAMMAS = (0.0, 5.0, 10.0, 100.0, 200.0, 500.0)


def worker_count() -> int:
    """Worker cap: MFSPEC_THREADS if set, else the machine's logical CPU count"""
    raw = os.getenv("MFSPEC_THREADS")
    if raw is None or raw.strip() == "":
        return psutil.cpu_count(logical=True) or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError("MFSPEC_THREADS", f"not an integer: {raw!r}") from None
    if value < 1:
        raise ConfigError("MFSPEC_THREADS", f"must be >= 1, got {value}")
    return value


def is_dyadic(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def parse_range(text: str) -> Tuple[float, float, float]:
    """'lo:step:hi' -> (lo, step, hi)"""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise InvalidParameterError("range", f"expected lo:step:hi, got {text!r}")
    try:
        lo, step, hi = (float(p) for p in parts)
    except ValueError:
        raise InvalidParameterError("range", f"non-numeric bound in {text!r}") from None
    uniform_grid(lo, hi, step)
    return lo, step, hi


def parse_list(text: str) -> List[float]:
    """'0,5,10' -> [0.0, 5.0, 10.0]"""
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise InvalidParameterError("list", f"non-numeric entry in {text!r}") from None


def parse_delta(value: Union[str, Sequence[float]]) -> Union[str, List[float]]:
    """'auto', 'lo:step:hi', '0.5,0.6' or a list of numbers"""
    if not isinstance(value, str):
        return [float(x) for x in value]
    text = value.strip().lower()
    if text == "auto":
        return "auto"
    if ":" in text:
        lo, step, hi = parse_range(text)
        return [float(x) for x in uniform_grid(lo, hi, step)]
    return parse_list(text)


def _require(cond: bool, param: str, message: str):
    if not cond:
        raise InvalidParameterError(param, message)


@dataclass
class ProcessSpec:
    """Synthetic process definition; `seed` must fit in 64 bits"""
    kind: str
    n: Optional[int] = None
    shape: Optional[Tuple[int, int]] = None
    alpha: Optional[float] = None
    w: Optional[float] = None
    theta: Optional[float] = None
    levels: Optional[int] = None
    H: Optional[float] = None
    lambda2: Optional[float] = None
    integral_scale: Optional[float] = None
    pieces: List["ProcessSpec"] = field(default_factory=list)
    axis: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.shape is not None:
            self.shape = tuple(int(s) for s in self.shape)
        self.pieces = [p if isinstance(p, ProcessSpec) else ProcessSpec(**p) for p in self.pieces]
        self.validate()

    @property
    def dim(self) -> int:
        if self.kind == "mrw2d":
            return 2
        if self.kind == "concat":
            return self.pieces[0].dim
        return 1

    @property
    def is_cascade(self) -> bool:
        return self.kind in ("dwc", "dwc_thresholded")

    def validate(self):
        _require(self.kind in PROCESS_KINDS, "kind", f"must be one of {PROCESS_KINDS}, got {self.kind!r}")
        _require(isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2 ** 64,
                 "seed", f"must be a 64-bit non-negative integer, got {self.seed!r}")

        if self.kind == "levy_brownian":
            _require(self.alpha is not None and 0 < self.alpha < 2, "alpha", f"must lie in (0, 2), got {self.alpha}")
            _require(is_dyadic(self.n), "n", f"must be a power of two, got {self.n}")
        elif self.is_cascade:
            _require(self.w is not None and 0 < self.w < 1, "w", f"must lie in (0, 1), got {self.w}")
            _require(isinstance(self.levels, (int, np.integer)) and self.levels >= 1,
                     "levels", f"must be an integer >= 1, got {self.levels}")
            if self.kind == "dwc_thresholded":
                _require(self.theta is not None and self.theta > 0, "theta", f"must be > 0, got {self.theta}")
        elif self.kind in ("mrw1d", "mrw2d"):
            _require(self.H is not None and 0 < self.H < 1, "H", f"must lie in (0, 1), got {self.H}")
            _require(self.lambda2 is not None and self.lambda2 > 0, "lambda2", f"must be > 0, got {self.lambda2}")
            if self.kind == "mrw1d":
                _require(is_dyadic(self.n), "n", f"must be a power of two, got {self.n}")
            else:
                _require(self.shape is not None and len(self.shape) == 2 and all(is_dyadic(s) for s in self.shape),
                         "shape", f"must be two powers of two, got {self.shape}")
            if self.integral_scale is not None:
                _require(self.integral_scale >= 1, "integral_scale", f"must be >= 1, got {self.integral_scale}")
        else:
            _require(len(self.pieces) >= 1, "pieces", "concat needs at least one piece")
            _require(all(p.kind in ("levy_brownian", "mrw1d", "mrw2d") for p in self.pieces),
                     "pieces", "only sampled processes can be concatenated")
            _require(len({p.dim for p in self.pieces}) == 1, "pieces", "pieces must share one dimension")
            _require(self.axis in (0, 1), "axis", f"must be 0 or 1, got {self.axis}")

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        return {k: v for k, v in out.items() if v is not None and v != []}


@dataclass
class AnalysisConfig:
    """Estimation settings shared by `analyze` and Monte Carlo runs"""
    n_vanishing_moments: int = 3
    levels: Optional[int] = None
    j1: Optional[int] = None
    j2: Optional[int] = None
    centering_j1: Optional[int] = None
    centering_j2: Optional[int] = None
    weighted: bool = False
    mask_border: bool = False
    q_range: Tuple[float, float, float] = (-4.0, 0.25, 4.0)
    h_range: Tuple[float, float, float] = (-0.2, 0.005, 2.0)
    gamma_set: List[float] = field(default_factory=lambda: list(DEFAULT_GAMMAS))
    delta: Union[str, List[float]] = "auto"
    delta_half_width: float = 0.3
    delta_points: int = 21
    g_shape: str = "parabola"

    def __post_init__(self):
        for name in ("q_range", "h_range"):
            value = getattr(self, name)
            try:
                value = parse_range(value) if isinstance(value, str) else value
            except InvalidParameterError as e:
                raise InvalidParameterError(name, str(e)) from e
            setattr(self, name, tuple(float(x) for x in value))
        self.gamma_set = [float(g) for g in self.gamma_set]
        try:
            self.delta = parse_delta(self.delta)
        except InvalidParameterError as e:
            raise InvalidParameterError("delta", str(e)) from e
        self.validate()

    def validate(self):
        _require(1 <= self.n_vanishing_moments <= 10, "n_vanishing_moments",
                 f"must lie in [1, 10], got {self.n_vanishing_moments}")
        for name in ("q_range", "h_range"):
            value = getattr(self, name)
            _require(len(value) == 3, name, "expected (lo, step, hi)")
            try:
                uniform_grid(value[0], value[2], value[1])
            except InvalidParameterError as e:
                raise InvalidParameterError(name, str(e)) from e
        _require(len(self.gamma_set) > 0 and all(g >= 0 for g in self.gamma_set),
                 "gamma_set", "needs at least one gamma, all >= 0")
        _require(0.0 in self.gamma_set, "gamma_set", "must contain 0 so the envelope stays below the classical spectrum")
        _require(self.delta == "auto" or (isinstance(self.delta, list) and len(self.delta) > 0),
                 "delta", f"must be 'auto' or a non-empty list, got {self.delta!r}")
        _require(self.delta_half_width > 0, "delta_half_width", f"must be > 0, got {self.delta_half_width}")
        _require(self.delta_points >= 1, "delta_points", f"must be >= 1, got {self.delta_points}")
        _require(self.g_shape in G_SHAPES, "g_shape", f"must be one of {G_SHAPES}, got {self.g_shape!r}")
        if self.j1 is not None and self.j2 is not None:
            _require(self.j1 < self.j2, "j1", f"fit range needs j1 < j2, got ({self.j1}, {self.j2})")

    @property
    def q_grid(self) -> np.ndarray:
        lo, step, hi = self.q_range
        return uniform_grid(lo, hi, step)

    @property
    def h_grid(self) -> np.ndarray:
        lo, step, hi = self.h_range
        return uniform_grid(lo, hi, step)

    def to_dict(self) -> Dict[str, Any]:
        out = dataclasses.asdict(self)
        out["q_range"] = list(self.q_range)
        out["h_range"] = list(self.h_range)
        return out


@dataclass
class ExperimentConfig:
    name: str
    process: ProcessSpec
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    n_realizations: int = 10
    seed: int = 0
    output_dir: Optional[str] = None
    workers: Optional[int] = None

    def __post_init__(self):
        _require(self.n_realizations >= 1, "n_realizations", f"must be >= 1, got {self.n_realizations}")
        _require(isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2 ** 64,
                 "seed", f"must be a 64-bit non-negative integer, got {self.seed!r}")
        if self.workers is not None:
            _require(self.workers >= 1, "workers", f"must be >= 1, got {self.workers}")

    @property
    def out_path(self) -> Path:
        return Path(self.output_dir) if self.output_dir else Path("results") / self.name

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "process": self.process.to_dict(),
            "analysis": self.analysis.to_dict(),
            "experiment": {
                "n_realizations": self.n_realizations,
                "seed": self.seed,
                "output_dir": str(self.out_path),
                "workers": self.workers,
            },
        }


def _key_lines(text: str) -> Dict[str, int]:
    """Dotted key path -> 1-based line, from the YAML node tree"""
    lines: Dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, f"{prefix}[{i}]")

    try:
        walk(yaml.compose(text), "")
    except yaml.YAMLError:
        pass
    return lines


def _build(cls, data: Any, prefix: str, lines: Dict[str, int]):
    if not isinstance(data, dict):
        raise ConfigError(prefix, f"expected a mapping, got {type(data).__name__}", lines.get(prefix))
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            path = f"{prefix}.{key}"
            raise ConfigError(path, "unknown field", lines.get(path))
    try:
        return cls(**data)
    except InvalidParameterError as e:
        path = f"{prefix}.{e.param}"
        raise ConfigError(path, str(e), lines.get(path, lines.get(prefix))) from e
    except TypeError as e:
        raise ConfigError(prefix, str(e), lines.get(prefix)) from e


def _build_process(data: Any, prefix: str, lines: Dict[str, int]) -> ProcessSpec:
    if isinstance(data, dict) and "pieces" in data:
        data = dict(data)
        data["pieces"] = [
            _build_process(p, f"{prefix}.pieces[{i}]", lines) for i, p in enumerate(data["pieces"] or [])
        ]
    return _build(ProcessSpec, data, prefix, lines)


def experiment_from_dict(raw: Dict[str, Any], lines: Optional[Dict[str, int]] = None) -> ExperimentConfig:
    lines = lines or {}
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "experiment file must hold a mapping")
    for key in raw:
        if key not in ("name", "process", "analysis", "experiment"):
            raise ConfigError(key, "unknown section", lines.get(key))
    if "process" not in raw:
        raise ConfigError("process", "missing section")

    process = _build_process(raw["process"], "process", lines)
    analysis = _build(AnalysisConfig, raw.get("analysis") or {}, "analysis", lines)
    experiment = raw.get("experiment") or {}
    if not isinstance(experiment, dict):
        raise ConfigError("experiment", "expected a mapping", lines.get("experiment"))
    for key in experiment:
        if key not in ("n_realizations", "seed", "output_dir", "workers"):
            path = f"experiment.{key}"
            raise ConfigError(path, "unknown field", lines.get(path))

    try:
        return ExperimentConfig(
            name=str(raw.get("name", process.kind)),
            process=process,
            analysis=analysis,
            **experiment,
        )
    except InvalidParameterError as e:
        path = f"experiment.{e.param}"
        raise ConfigError(path, str(e), lines.get(path)) from e


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    """Parse and validate a YAML experiment file (FileNotFoundError passes through)"""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError("<yaml>", str(e).splitlines()[0], mark.line + 1 if mark else None) from e
    return experiment_from_dict(raw, _key_lines(text))


def dump_yaml(data: Dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False)

