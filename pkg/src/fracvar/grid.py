"""Discrete domains, sampled fields and fractional normalization constants.

Two grid kinds are supported:

* ``periodic``: a uniform grid on the unit cell Q = (0,1)^n with periodic
  wrap-around; axis coordinates are i*h for i = 0..N-1, h = 1/N.
* ``box``: a uniform grid on the truncated box [-L, L)^n standing in for
  R^n; axis coordinates are -L + i*h, h = 2L/N.  The right endpoint is
  excluded so the box can double as one period of length 2L when a
  spectral backend periodifies it.

Quadrature throughout is the midpoint rule with weight h^n.

Field serialization
-------------------
``save_field``/``load_field`` write the raw sample values plus a JSON
sidecar describing the grid.  The binary layout is little-endian float64
(``<f8``), C order, spatial axes first (row-major) and the component axis
last.  The CSV layout flattens in the same order, one value per row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as gamma_fn

PERIODIC = "periodic"
BOX = "box"

DECAY_COMPACT = "compact-support"
DECAY_SCHWARTZ = "schwartz-like"
DECAY_UNKNOWN = "unknown"

# width (in cells) of the padding band on which compact-support fields
# must vanish on a truncated box
PAD_CELLS = 2


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n (2, 2*pi, 4*pi)."""
    return float(2.0 * np.pi ** (n / 2.0) / gamma_fn(n / 2.0))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid description.

    Attributes
    ----------
    n : spatial dimension (1, 2 or 3)
    kind : "periodic" (unit cell) or "box" (truncated [-L, L)^n)
    N : points per axis, even and >= 4
    half_extent : L for box grids, None for periodic grids
    """

    n: int
    kind: str
    N: int
    half_extent: Optional[float] = None

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension n must be 1, 2 or 3, got {self.n}")
        if self.kind not in (PERIODIC, BOX):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.N < 4 or self.N % 2 != 0:
            raise ValueError("N must be even and >= 4")
        if self.kind == BOX:
            if self.half_extent is None or self.half_extent <= 0:
                raise ValueError("box grids need a positive half_extent")
        elif self.half_extent is not None:
            raise ValueError("periodic grids live on the unit cell; "
                             "half_extent must be None")

    @property
    def cell_length(self) -> float:
        return 1.0 if self.kind == PERIODIC else 2.0 * self.half_extent

    @property
    def h(self) -> float:
        return self.cell_length / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def npoints(self) -> int:
        return self.N ** self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    def axis(self) -> np.ndarray:
        """Coordinates along one axis."""
        if self.kind == PERIODIC:
            return np.arange(self.N) * self.h
        return -self.half_extent + np.arange(self.N) * self.h

    def coords(self) -> np.ndarray:
        """All grid coordinates, shape (*shape, n)."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.n), indexing="ij")
        return np.stack(mesh, axis=-1)


def make_grid(n: int, kind: str, N: int, half_extent: Optional[float] = None) -> GridSpec:
    """Validate and build a :class:`GridSpec`."""
    return GridSpec(n=n, kind=kind, N=N, half_extent=half_extent)


@dataclass
class SampledField:
    """Values of a vector field u: R^n -> R^m on a grid.

    ``values`` has shape (*grid.shape, m).  ``decay`` records how the
    field behaves outside a truncated box; it drives the analytic
    truncation-error bounds of the quadrature backend.
    """

    grid: GridSpec
    values: np.ndarray
    decay: str = DECAY_UNKNOWN

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == self.grid.n:
            self.values = self.values[..., None]
        if self.values.shape[: self.grid.n] != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"shape {self.grid.shape}")
        if self.values.ndim != self.grid.n + 1:
            raise ValueError("values must have shape (*grid.shape, m)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")
        if self.decay not in (DECAY_COMPACT, DECAY_SCHWARTZ, DECAY_UNKNOWN):
            raise ValueError(f"unknown decay class {self.decay!r}")
        if self.decay == DECAY_COMPACT and self.grid.kind == BOX:
            band = _padding_band_mask(self.grid)
            if np.any(self.values[band] != 0.0):
                raise ValueError(
                    "compact-support fields must vanish on the outermost "
                    f"{PAD_CELLS}-cell padding band of a box grid")

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    def component(self, i: int) -> np.ndarray:
        return self.values[..., i]

    def with_values(self, values: np.ndarray) -> "SampledField":
        return SampledField(self.grid, values, decay=self.decay)

    def copy(self) -> "SampledField":
        return SampledField(self.grid, self.values.copy(), decay=self.decay)


def _padding_band_mask(grid: GridSpec) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.n):
        sl = [slice(None)] * grid.n
        sl[ax] = slice(0, PAD_CELLS)
        mask[tuple(sl)] = True
        sl[ax] = slice(-PAD_CELLS, None)
        mask[tuple(sl)] = True
    return mask


def field_from_function(grid: GridSpec, func: Callable, m: int = 1,
                        decay: str = DECAY_UNKNOWN) -> SampledField:
    """Sample ``func`` on the grid.

    ``func`` receives the coordinate array of shape (*shape, n) and must
    return either (*shape,) for scalar fields or (*shape, m).
    """
    x = grid.coords()
    vals = np.asarray(func(x), dtype=float)
    if vals.ndim == grid.n:
        vals = vals[..., None]
    if vals.shape[-1] != m:
        raise ValueError(f"function returned {vals.shape[-1]} components, expected {m}")
    return SampledField(grid, vals, decay=decay)


def zero_field(grid: GridSpec, m: int = 1, decay: str = DECAY_COMPACT) -> SampledField:
    return SampledField(grid, np.zeros(grid.shape + (m,)), decay=decay)


def lp_norm(u: SampledField, p: float, region: Optional[np.ndarray] = None) -> float:
    """Discrete L^p norm (sum |u|^p h^n)^(1/p); max-norm for p = inf.

    ``|u|`` is the pointwise Euclidean magnitude over components.  An
    optional boolean ``region`` mask restricts the quadrature domain.
    """
    if not (p >= 1.0):
        raise ValueError("p must be in [1, inf]")
    mag = np.sqrt(np.sum(u.values ** 2, axis=-1))
    if region is not None:
        mag = mag[region]
    if mag.size == 0:
        return 0.0
    if np.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag ** p) * u.grid.cell_volume) ** (1.0 / p))


def lp_inner(u: SampledField, v: SampledField) -> float:
    """Grid L^2 inner product h^n sum <u, v> (components contracted)."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return float(np.sum(u.values * v.values) * u.grid.cell_volume)


@dataclass(frozen=True)
class FractionalParams:
    """Order alpha in (0,1), exponent p in (1,inf) and the three
    normalization constants of the fractional operators."""

    alpha: float
    p: float = 2.0
    mu: float = dc_field(default=0.0)
    gamma: float = dc_field(default=0.0)
    nu: float = dc_field(default=0.0)


def riesz_gamma(n: int, alpha: float) -> float:
    """gamma_{n,alpha} = pi^{n/2} 2^alpha Gamma(alpha/2) / Gamma((n-alpha)/2),
    the Riesz potential normalization; valid for alpha in (0, n)."""
    if not 0.0 < alpha < n:
        raise ValueError(f"Riesz potential order must lie in (0, {n})")
    return float(np.pi ** (n / 2.0) * 2.0 ** alpha
                 * gamma_fn(alpha / 2.0) / gamma_fn((n - alpha) / 2.0))


def gradient_mu(n: int, alpha: float) -> float:
    """mu_{n,alpha} = 2^alpha pi^{-n/2} Gamma((n+alpha+1)/2) / Gamma((1-alpha)/2)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("fractional gradient order must lie in (0, 1)")
    return float(2.0 ** alpha * np.pi ** (-n / 2.0)
                 * gamma_fn((n + alpha + 1.0) / 2.0) / gamma_fn((1.0 - alpha) / 2.0))


def laplacian_nu(n: int, alpha: float) -> float:
    """nu_{n,alpha} = 2^alpha pi^{-n/2} Gamma((n+alpha)/2) / Gamma(-alpha/2).

    This is the constant for the kernel |h|^{-n-alpha}; it is negative
    for alpha in (0, 2).
    """
    if not 0.0 < alpha < 2.0:
        raise ValueError("fractional Laplacian kernel order must lie in (0, 2)")
    return float(2.0 ** alpha * np.pi ** (-n / 2.0)
                 * gamma_fn((n + alpha) / 2.0) / gamma_fn(-alpha / 2.0))


def compute_constants(n: int, alpha: float, p: float = 2.0) -> FractionalParams:
    """Evaluate the three normalization constants for order ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 1.0 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    return FractionalParams(
        alpha=alpha,
        p=p,
        mu=gradient_mu(n, alpha),
        gamma=riesz_gamma(n, alpha),
        nu=laplacian_nu(n, alpha),
    )


# ---------------------------------------------------------------------------
# serialization

def _grid_to_dict(grid: GridSpec) -> dict:
    return {"n": grid.n, "kind": grid.kind, "N": grid.N,
            "half_extent": grid.half_extent}


def _grid_from_dict(d: dict) -> GridSpec:
    return GridSpec(n=d["n"], kind=d["kind"], N=d["N"],
                    half_extent=d["half_extent"])


def save_field(field: SampledField, prefix, fmt: str = "bin") -> None:
    """Write ``prefix``.bin (or .csv) plus ``prefix``.json sidecar.

    Binary layout: little-endian float64, C order, spatial axes then the
    component axis.
    """
    prefix = Path(prefix)
    meta = {
        "grid": _grid_to_dict(field.grid),
        "m": field.m,
        "decay": field.decay,
        "format": fmt,
        "dtype": "<f8",
        "order": "row-major (spatial axes, then components)",
    }
    if fmt == "bin":
        field.values.astype("<f8").tofile(prefix.with_suffix(".bin"))
    elif fmt == "csv":
        np.savetxt(prefix.with_suffix(".csv"), field.values.reshape(-1),
                   fmt="%.17g")
    else:
        raise ValueError(f"unknown serialization format {fmt!r}")
    prefix.with_suffix(".json").write_text(json.dumps(meta, indent=2))


def load_field(prefix) -> SampledField:
    prefix = Path(prefix)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    grid = _grid_from_dict(meta["grid"])
    shape = grid.shape + (meta["m"],)
    if meta["format"] == "bin":
        vals = np.fromfile(prefix.with_suffix(".bin"), dtype="<f8").reshape(shape)
    else:
        vals = np.loadtxt(prefix.with_suffix(".csv")).reshape(shape)
    return SampledField(grid, vals, decay=meta["decay"])
