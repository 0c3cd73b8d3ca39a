"""
mfspec: Legendre-Fenchel transforms on sampled grids

All transforms are direct grid minimizations, chunked over the outer grid
so memory stays bounded. -inf marks points outside a function's support and
never enters arithmetic.
"""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from mf_errors import InvalidInputError, InvalidParameterError

# Max elements of one (outer chunk x inner grid) block
_BLOCK_ELEMENTS = 1 << 22

G_SHAPES = ("parabola", "absolute_value")


@dataclass
class SampledFunction:
    """Values of a function on a uniform grid (h or q); -inf allowed"""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise InvalidInputError(
                f"grid and values must be 1D of equal length, got {self.grid.shape} and {self.values.shape}"
            )
        if self.grid.size > 1:
            steps = np.diff(self.grid)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=0, atol=1e-12 + 1e-9 * abs(steps[0])):
                raise InvalidInputError("grid must be strictly increasing and uniform")

    @property
    def h_grid(self) -> np.ndarray:
        return self.grid

    @property
    def grid_step(self) -> float:
        return float(self.grid[1] - self.grid[0]) if self.grid.size > 1 else 0.0

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    def support(self):
        """(lo, hi) of the finite values, None when everything is -inf"""
        if not self.finite.any():
            return None
        pts = self.grid[self.finite]
        return float(pts[0]), float(pts[-1])


@dataclass(frozen=True)
class GFunction:
    """Admissible lift g(h) = -gamma (h - delta)^2 or -gamma |h - delta|"""
    shape: str = "parabola"
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.shape not in G_SHAPES:
            raise InvalidParameterError("shape", f"must be one of {G_SHAPES}, got {self.shape!r}")
        if not self.gamma >= 0:
            raise InvalidParameterError("gamma", f"must be >= 0, got {self.gamma}")

    def __call__(self, h) -> np.ndarray:
        x = np.asarray(h, dtype=float) - self.delta
        if self.shape == "parabola":
            return -self.gamma * x * x
        return -self.gamma * np.abs(x)

    @property
    def is_zero(self) -> bool:
        return self.gamma == 0


def uniform_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """lo, lo+step, ..., hi (hi included when it lies on the lattice)"""
    if not step > 0:
        raise InvalidParameterError("step", f"must be > 0, got {step}")
    if hi < lo:
        raise InvalidParameterError("range", f"upper bound {hi} below lower bound {lo}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def affine_infimum(outer: np.ndarray, inner: np.ndarray, inner_vals: np.ndarray, d: float) -> np.ndarray:
    """out[i] = min_k (d + outer[i] * inner[k] - inner_vals[k])"""
    out = np.empty(outer.size)
    chunk = max(1, _BLOCK_ELEMENTS // max(1, inner.size))
    for start in range(0, outer.size, chunk):
        block = outer[start:start + chunk, None] * inner[None, :] - inner_vals[None, :]
        out[start:start + chunk] = d + block.min(axis=1)
    return out


def legendre_transform(f: SampledFunction, q_grid, d: float) -> SampledFunction:
    """f*(q) = min_h (d + q h - f(h)) over the finite samples of f"""
    q = np.asarray(q_grid, dtype=float)
    ok = f.finite
    if not ok.any():
        raise InvalidInputError("function is -inf everywhere")
    return SampledFunction(q, affine_infimum(q, f.grid[ok], f.values[ok], d))


def double_legendre(f: SampledFunction, q_grid, d: float) -> SampledFunction:
    """
    Concave hull f**(h) = min_q (d + q h - f*(q)) on f's grid.

    Points outside the hull of f's finite support stay -inf.
    """
    fstar = legendre_transform(f, q_grid, d)
    values = affine_infimum(f.grid, fstar.grid, fstar.values, d)

    lo, hi = f.support()
    values[(f.grid < lo) | (f.grid > hi)] = -np.inf
    return SampledFunction(f.grid.copy(), values)


def lifted_double_legendre(f: SampledFunction, g: GFunction, q_grid, d: float) -> SampledFunction:
    """Generalized Legendre spectrum (f + g)** - g"""
    lift = g(f.grid)
    lifted = SampledFunction(f.grid, np.where(f.finite, f.values + lift, -np.inf))
    hull = double_legendre(lifted, q_grid, d)
    return SampledFunction(hull.grid, np.where(hull.finite, hull.values - lift, -np.inf))


def pointwise_envelope(curves: Sequence[SampledFunction]) -> SampledFunction:
    if len(curves) == 0:
        raise InvalidInputError("envelope of an empty family")
    grid = curves[0].grid
    for c in curves[1:]:
        if c.grid.shape != grid.shape or not np.allclose(c.grid, grid, rtol=0, atol=1e-12):
            raise InvalidInputError("envelope members must share one grid")
    return SampledFunction(grid.copy(), np.min(np.stack([c.values for c in curves]), axis=0))


def analytic_double_parabola(gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """
    Closed-form generalized spectrum of the two-parabola large deviation
    spectrum under g(h) = -gamma h^2; -inf outside (-2, 2].
    """
    if not gamma >= 0:
        raise InvalidParameterError("gamma", f"must be >= 0, got {gamma}")
    edge = 1.0 / (1.0 + gamma)

    def evaluate(h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        out = np.where(h < 0, 1.0 - (h + 1.0) ** 2, 1.0 - (h - 1.0) ** 2)
        out = np.where(np.abs(h) <= edge, edge + gamma * h * h, out)
        return np.where((h > -2.0) & (h <= 2.0), out, -np.inf)

    return evaluate


def double_parabola(h_grid) -> SampledFunction:
    """Nonconcave large deviation spectrum made of two unit parabolas"""
    h = np.asarray(h_grid, dtype=float)
    values = np.where(h < 0, 1.0 - (h + 1.0) ** 2, 1.0 - (h - 1.0) ** 2)
    return SampledFunction(h, np.where((h > -2.0) & (h <= 2.0), values, -np.inf))
