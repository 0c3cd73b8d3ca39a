"""
mfspec: synthetic multifractal processes and their theoretical spectra

Generators are pure functions of (parameters, seed). Seeds are ints or
numpy SeedSequences; independent components (noise, log-field, pieces)
draw from spawned children so changing one never shifts another.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import levy_stable

from mf_classic import SpectrumCurve
from mf_config import ProcessSpec, is_dyadic
from mf_errors import EmbeddingError, InvalidInputError, InvalidParameterError
from mf_logging import get_logger, log_event
from mf_transform import CoefficientPyramid

logger = get_logger("synth")

Seed = Union[int, np.random.SeedSequence]

# Negative circulant eigenvalues within this fraction of the largest are round-off
EIG_TOLERANCE = 1e-6
MAX_EMBEDDING_DOUBLINGS = 2


def seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawn() on a shared instance would advance its child counter
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2 ** 64:
        raise InvalidParameterError("seed", f"must be a 64-bit non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def piece_seed(seed: Seed, index: int) -> np.random.SeedSequence:
    """Sub-seed of piece `index`: fixed function of (master entropy, index)"""
    parent = seed_sequence(seed)
    return np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (index,))


def _check_dyadic(n: int, param: str = "n"):
    if not is_dyadic(n):
        raise InvalidParameterError(param, f"must be a power of two, got {n}")


# ---------------------------------------------------------------- Levy


def gen_levy_brownian(n: int, alpha: float, seed: Seed, stable_scale: float = 1.0) -> np.ndarray:
    """Symmetric alpha-stable Levy motion plus an independent Brownian path, both unit scale"""
    if not 0 < alpha < 2:
        raise InvalidParameterError("alpha", f"must lie in (0, 2), got {alpha}")
    _check_dyadic(n)

    stable_seq, brownian_seq = seed_sequence(seed).spawn(2)
    jumps = levy_stable.rvs(alpha, 0.0, size=n, random_state=np.random.default_rng(stable_seq))
    steps = np.random.default_rng(brownian_seq).standard_normal(n)
    return np.cumsum(stable_scale * jumps) + np.cumsum(steps)


# ---------------------------------------------------------------- cascades


def gen_dwc(levels: int, w: float, wavelet: str = "db3") -> CoefficientPyramid:
    """
    Binomial deterministic wavelet cascade, levels 1..J.

    Values are L1-normalized already; `wavelet` only matters for the
    inverse-transform round trip.
    """
    if not 0 < w < 1:
        raise InvalidParameterError("w", f"must lie in (0, 1), got {w}")
    if levels < 1:
        raise InvalidParameterError("levels", f"must be >= 1, got {levels}")

    per_level = []
    c = np.ones(1)
    for _ in range(levels):
        c = np.stack([w * c, (1.0 - w) * c], axis=1).reshape(-1)
        per_level.append(c)

    return CoefficientPyramid(
        dim=1,
        details=per_level[::-1],
        shape=(2 ** (levels + 1),),
        sample_level=levels + 1,
        finest_level=levels,
        normalization="l1",
        wavelet=wavelet,
        meta={"process": "dwc", "w": w},
    )


def threshold_dwc(pyramid: CoefficientPyramid, theta: float) -> CoefficientPyramid:
    """Hard threshold: keep c_{j,k} only where |c_{j,k}| >= 2^{-theta j}"""
    if not theta > 0:
        raise InvalidParameterError("theta", f"must be > 0, got {theta}")
    kept = [np.where(np.abs(d) >= 2.0 ** (-theta * j), d, 0.0) for j, d in zip(pyramid.levels, pyramid.details)]
    return CoefficientPyramid(
        dim=pyramid.dim,
        details=kept,
        shape=pyramid.shape,
        sample_level=pyramid.sample_level,
        finest_level=pyramid.finest_level,
        normalization=pyramid.normalization,
        wavelet=pyramid.wavelet,
        meta={**pyramid.meta, "theta": theta},
    )


# ---------------------------------------------------------------- MRW


def _log_covariance(distance: np.ndarray, lambda2: float, integral_scale: float) -> np.ndarray:
    return lambda2 * np.log(np.maximum(integral_scale / (distance + 1.0), 1.0))


def _circulant_eigenvalues(shape: Tuple[int, ...], lambda2: float, integral_scale: float) -> np.ndarray:
    """Eigenvalues of the periodic embedding of the log covariance on a torus of `shape`"""
    axes = [np.minimum(np.arange(m), m - np.arange(m)) for m in shape]
    if len(shape) == 1:
        distance = axes[0].astype(float)
    else:
        distance = np.hypot(axes[0][:, None], axes[1][None, :])
    return np.real(np.fft.fftn(_log_covariance(distance, lambda2, integral_scale)))


def gaussian_log_field(
    shape: Tuple[int, ...],
    lambda2: float,
    integral_scale: float,
    seed: Seed,
) -> np.ndarray:
    """
    Stationary Gaussian field, covariance lambda2 ln+(L / (|dx| + 1)), by
    circulant embedding. The embedding torus doubles while it has genuinely
    negative eigenvalues.
    """
    embed = tuple(2 * n for n in shape)
    for _ in range(MAX_EMBEDDING_DOUBLINGS + 1):
        eig = _circulant_eigenvalues(embed, lambda2, integral_scale)
        floor = -EIG_TOLERANCE * max(float(eig.max()), 0.0)
        if eig.min() >= floor:
            break
        log_event(logger, "embedding_resized", embed_shape=list(embed), min_eigenvalue=float(eig.min()))
        embed = tuple(2 * m for m in embed)
    else:
        raise EmbeddingError(f"circulant embedding not positive definite up to shape {embed}")

    rng = np.random.default_rng(seed_sequence(seed))
    z = rng.standard_normal(embed) + 1j * rng.standard_normal(embed)
    y = np.fft.fftn(np.sqrt(np.maximum(eig, 0.0) / eig.size) * z)
    return np.real(y)[tuple(slice(0, n) for n in shape)]


def fractional_integrate(x: np.ndarray, order: float) -> np.ndarray:
    """Multiply the spectrum by |k|^-order (zero mode removed), periodic"""
    freqs = np.meshgrid(*[np.fft.fftfreq(n) * n for n in x.shape], indexing="ij")
    radius = np.sqrt(sum(f ** 2 for f in freqs))
    gain = np.zeros_like(radius)
    nonzero = radius > 0
    gain[nonzero] = radius[nonzero] ** (-order)
    return np.real(np.fft.ifftn(np.fft.fftn(x) * gain))


def _mrw(shape: Tuple[int, ...], H: float, lambda2: float, seed: Seed,
         integral_scale: Optional[float] = None) -> np.ndarray:
    """Unchecked MRW core; lambda2 = 0 reduces to fractionally integrated white noise"""
    if integral_scale is None:
        integral_scale = min(shape) / 8.0

    noise_seq, field_seq = seed_sequence(seed).spawn(2)
    noise = np.random.default_rng(noise_seq).standard_normal(shape)
    omega = gaussian_log_field(shape, lambda2, integral_scale, field_seq) - lambda2 * math.log(integral_scale)
    modulated = noise * np.exp(omega)

    # Mode of the spectrum sits at H + lambda2/2 with this internal exponent
    h_int = H - lambda2 / 2.0
    if len(shape) == 1:
        return np.cumsum(fractional_integrate(modulated, h_int - 0.5))
    return fractional_integrate(modulated, h_int + 1.0)


def gen_mrw(size: Union[int, Sequence[int]], H: float, lambda2: float, seed: Seed,
            integral_scale: Optional[float] = None) -> np.ndarray:
    """Multifractal random walk (1D) or field (2D); integral scale defaults to n/8"""
    if not 0 < H < 1:
        raise InvalidParameterError("H", f"must lie in (0, 1), got {H}")
    if not lambda2 > 0:
        raise InvalidParameterError("lambda2", f"must be > 0, got {lambda2}")
    shape = (int(size),) if np.isscalar(size) else tuple(int(s) for s in size)
    if len(shape) not in (1, 2):
        raise InvalidParameterError("size", f"1D or 2D only, got {shape}")
    for n in shape:
        _check_dyadic(n, "size")
    return _mrw(shape, H, lambda2, seed, integral_scale)


# ---------------------------------------------------------------- theory


@dataclass
class TheorySpectrum:
    """Closed-form multifractal spectrum, picklable (kind + parameters)"""
    kind: str
    params: Dict[str, float]
    dim: int = 1
    members: List["TheorySpectrum"] = field(default_factory=list)

    @property
    def support(self) -> Tuple[float, float]:
        p = self.params
        if self.kind == "levy":
            return 0.0, 0.5
        if self.kind == "dwc":
            a, b = -math.log2(1.0 - p["w"]), -math.log2(p["w"])
            return min(a, b), max(a, b)
        if self.kind == "dwc_thresholded":
            lo, hi = theory_dwc(p["w"]).support
            return lo, max(hi, _omega(hi, p["w"], p["theta"]))
        if self.kind == "mrw":
            return -math.inf, math.inf
        spans = [m.support for m in self.members]
        return min(s[0] for s in spans), max(s[1] for s in spans)

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        p = self.params
        if self.kind == "levy":
            out = np.where((h >= 0) & (h < 0.5), p["alpha"] * h, -np.inf)
            return np.where(np.isclose(h, 0.5, rtol=0, atol=1e-9), 1.0, out)
        if self.kind == "dwc":
            return _binomial_spectrum(h, p["w"])
        if self.kind == "dwc_thresholded":
            return _thresholded_spectrum(h, p["w"], p["theta"])
        if self.kind == "mrw":
            mode = p["H"] + p["lambda2"] / 2.0
            return self.dim - (h - mode) ** 2 / (2.0 * p["lambda2"])
        return np.max(np.stack([m(h) for m in self.members]), axis=0)

    def curve(self, h_grid) -> SpectrumCurve:
        h = np.asarray(h_grid, dtype=float)
        return SpectrumCurve(h=h, D=self(h), estimator="theory", dim=self.dim, params={"kind": self.kind, **self.params})


def _binomial_spectrum(h: np.ndarray, w: float) -> np.ndarray:
    if w == 0.5:
        return np.where(np.isclose(h, 1.0, rtol=0, atol=1e-12), 1.0, -np.inf)
    lw, l1w = math.log2(w), math.log2(1.0 - w)
    a = (h + l1w) / (l1w - lw)
    inside = (a >= -1e-12) & (a <= 1 + 1e-12)
    a = np.clip(a, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.where(a > 0, a * np.log2(a), 0.0) - np.where(a < 1, (1 - a) * np.log2(1 - a), 0.0)
    return np.where(inside, ent, -np.inf)


def _omega(u, w: float, theta: float):
    """Increasing map u -> theta (u + log2(1-w)) / (theta + log2(1-w)) on [theta, h_max]"""
    l1w = math.log2(1.0 - w)
    return theta * (np.asarray(u, dtype=float) + l1w) / (theta + l1w)


def _thresholded_spectrum(h: np.ndarray, w: float, theta: float) -> np.ndarray:
    base = _binomial_spectrum(h, w)
    lo, hi = min(-math.log2(1.0 - w), -math.log2(w)), max(-math.log2(1.0 - w), -math.log2(w))
    if theta >= hi:
        return base
    l1w = math.log2(1.0 - w)
    # Inverse of the map above, restricted to its image of [theta, h_max]
    u = -l1w + h * (theta + l1w) / theta
    image = (u >= theta - 1e-12) & (u <= hi + 1e-12)
    branch = np.where(image, _binomial_spectrum(np.clip(u, lo, hi), w), -np.inf)
    return np.maximum(base, branch)


def theory_levy(alpha: float) -> TheorySpectrum:
    if not 0 < alpha < 2:
        raise InvalidParameterError("alpha", f"must lie in (0, 2), got {alpha}")
    return TheorySpectrum("levy", {"alpha": float(alpha)})


def theory_dwc(w: float) -> TheorySpectrum:
    if not 0 < w < 1:
        raise InvalidParameterError("w", f"must lie in (0, 1), got {w}")
    if w == 0.5:
        log_event(logger, "dwc_degenerate", w=w, note="single-point spectrum at h=1")
    return TheorySpectrum("dwc", {"w": float(w)})


def theory_dwc_thresholded(w: float, theta: float) -> TheorySpectrum:
    """
    Spectrum of the thresholded cascade: sup of the binomial spectrum and its
    image under the increasing map. The source writes the map as both Omega^-1
    and omega; the printed composition is used and the mismatch is logged.
    """
    theory_dwc(w)
    h_min = min(-math.log2(1.0 - w), -math.log2(w))
    if not theta > h_min:
        raise InvalidParameterError("theta", f"must exceed the smallest cascade exponent {h_min:.6f}, got {theta}")
    log_event(logger, "threshold_notation_flag", w=w, theta=theta,
              note="map applied as printed: sup(D(h), D(inverse map(h)))")
    return TheorySpectrum("dwc_thresholded", {"w": float(w), "theta": float(theta)})


def theory_mrw(H: float, lambda2: float, d: int = 1) -> TheorySpectrum:
    if not 0 < H < 1:
        raise InvalidParameterError("H", f"must lie in (0, 1), got {H}")
    if not lambda2 > 0:
        raise InvalidParameterError("lambda2", f"must be > 0, got {lambda2}")
    return TheorySpectrum("mrw", {"H": float(H), "lambda2": float(lambda2)}, dim=d)


def theory_sup(spectra: Sequence[TheorySpectrum]) -> TheorySpectrum:
    if not spectra:
        raise InvalidInputError("sup of an empty spectrum list")
    if len({s.dim for s in spectra}) != 1:
        raise InvalidInputError("spectra of different dimensions")
    return TheorySpectrum("sup", {}, dim=spectra[0].dim, members=list(spectra))


# ---------------------------------------------------------------- dispatch


def concat(specs: Sequence[ProcessSpec], axis: int = 1, seed: Seed = 0) -> np.ndarray:
    """Generate every piece from its derived sub-seed and join them"""
    if not specs:
        raise InvalidInputError("nothing to concatenate")
    parts = [synthesize(spec, piece_seed(seed, i)) for i, spec in enumerate(specs)]
    if any(not isinstance(p, np.ndarray) for p in parts):
        raise InvalidInputError("cascade pyramids cannot be concatenated")
    ndim = {p.ndim for p in parts}
    if len(ndim) != 1:
        raise InvalidInputError("pieces mix 1D and 2D data")
    if parts[0].ndim == 1:
        return np.concatenate(parts)
    other = 1 - axis
    if len({p.shape[other] for p in parts}) != 1:
        raise InvalidInputError(f"pieces disagree along axis {other}: {[p.shape for p in parts]}")
    return np.concatenate(parts, axis=axis)


def synthesize(spec: ProcessSpec, seed: Optional[Seed] = None) -> Union[np.ndarray, CoefficientPyramid]:
    """Data for a ProcessSpec: an array, or a coefficient pyramid for cascades"""
    seed = spec.seed if seed is None else seed
    if spec.kind == "levy_brownian":
        return gen_levy_brownian(spec.n, spec.alpha, seed)
    if spec.kind == "dwc":
        return gen_dwc(spec.levels, spec.w)
    if spec.kind == "dwc_thresholded":
        return threshold_dwc(gen_dwc(spec.levels, spec.w), spec.theta)
    if spec.kind == "mrw1d":
        return gen_mrw(spec.n, spec.H, spec.lambda2, seed, spec.integral_scale)
    if spec.kind == "mrw2d":
        return gen_mrw(spec.shape, spec.H, spec.lambda2, seed, spec.integral_scale)
    return concat(spec.pieces, spec.axis, seed)


def theory_for(spec: ProcessSpec) -> TheorySpectrum:
    if spec.kind == "levy_brownian":
        return theory_levy(spec.alpha)
    if spec.kind == "dwc":
        return theory_dwc(spec.w)
    if spec.kind == "dwc_thresholded":
        return theory_dwc_thresholded(spec.w, spec.theta)
    if spec.kind in ("mrw1d", "mrw2d"):
        return theory_mrw(spec.H, spec.lambda2, spec.dim)
    return theory_sup([theory_for(p) for p in spec.pieces])
