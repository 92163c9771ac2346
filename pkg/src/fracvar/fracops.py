"""Fractional operators on sampled fields.

Each operator comes with two backends:

* ``spectral``: Fourier multipliers on a periodic cell.  A truncated box
  is treated as one period of length 2L (periodification); this is
  accurate when the field decays inside the box.  Symbols:

  - Riesz potential of order a:      (2 pi |xi|)^(-a), zero mode -> 0
  - fractional gradient, order a:    (2 pi i xi_j)(2 pi |xi|)^(a-1)
  - fractional Laplacian (-Delta)^s: (2 pi |xi|)^(2 s)

  The symbols compose exactly: (-Delta)^((1-a)/2) grad^a = classical
  gradient symbol (2 pi i xi_j).  The Nyquist mode of the odd directional
  factor is zeroed so real fields map to real fields.

* ``quadrature``: direct singular-integral quadrature.  The kernel is
  tabulated on grid offsets (cell-averaged exactly in 1D, by oversampling
  near the singularity in 2D/3D), the lattice sum is evaluated as an FFT
  convolution, the cell containing the singularity is integrated by a
  first-order Taylor replacement over the inscribed ball of radius
  delta = h/2, and the far-field tail beyond the cutoff is either
  corrected analytically (the constant term) or reported as
  ``truncation_estimate``.

Matrix-valued results (the m x n fractional gradient) are stored as
fields with m*n components, component index i*n + j for row i, column j;
``as_matrix``/``from_matrix`` convert to and from (*shape, m, n) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .grid import (BOX, DECAY_COMPACT, DECAY_SCHWARTZ, DECAY_UNKNOWN,
                   PERIODIC, FractionalParams, GridSpec, SampledField,
                   laplacian_nu, riesz_gamma, sphere_area)

KIND_SPECTRAL = "spectral"
KIND_QUADRATURE = "quadrature"

# cells around the singularity whose kernel weights are cell-averaged by
# oversampling (2D/3D; in 1D every weight is an exact cell average)
NEAR_CELLS = 4
NEAR_SUBSAMPLES = 16


@dataclass(frozen=True)
class Backend:
    """Discretization backend selector.

    ``delta`` is the singular-ball radius of the quadrature backend
    (default h/2); ``far_cutoff`` the far-field truncation radius in
    physical units (default: the whole box, or a fixed number of periodic
    images).
    """

    kind: str = KIND_SPECTRAL
    delta: Optional[float] = None
    far_cutoff: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (KIND_SPECTRAL, KIND_QUADRATURE):
            raise ValueError(f"unknown backend kind {self.kind!r}")


SPECTRAL = Backend(KIND_SPECTRAL)
QUADRATURE = Backend(KIND_QUADRATURE)


@dataclass
class OperatorResult:
    field: SampledField
    truncation_estimate: float = 0.0


def as_matrix(field: SampledField, m: int, n: int) -> np.ndarray:
    """View an m*n-component field as an (*shape, m, n) array."""
    return field.values.reshape(field.grid.shape + (m, n))


def from_matrix(grid: GridSpec, arr: np.ndarray, decay: str = DECAY_UNKNOWN) -> SampledField:
    m, n = arr.shape[-2:]
    return SampledField(grid, arr.reshape(grid.shape + (m * n,)), decay=decay)


# ---------------------------------------------------------------------------
# spectral backend

# On truncated boxes the Fourier multiplier is applied on an enlarged
# period (zero-padded embedding).  The pad factor grows with the
# resolution, so refining the grid also pushes the periodic images
# away: the periodification error decays like N^-(1+alpha) instead of
# saturating at a resolution-independent floor.
BOX_PAD_MIN = 2
BOX_PAD_SCALE = 128


def _box_pad_factor(N: int) -> int:
    return max(BOX_PAD_MIN, N // BOX_PAD_SCALE)


def _spectral_grid(grid: GridSpec) -> GridSpec:
    """Grid on which the Fourier multiplier acts (identity for periodic
    grids, padded embedding for boxes)."""
    if grid.kind != BOX:
        return grid
    pad = _box_pad_factor(grid.N)
    return GridSpec(n=grid.n, kind=BOX, N=pad * grid.N,
                    half_extent=pad * grid.half_extent)


@lru_cache(maxsize=32)
def _freq_arrays(n: int, N: int, h: float):
    xi1 = np.fft.fftfreq(N, d=h)
    mesh = np.meshgrid(*([xi1] * n), indexing="ij")
    mag = np.sqrt(sum(x ** 2 for x in mesh))
    # odd directional factors must vanish at the (unpaired) Nyquist mode
    xi_odd = xi1.copy()
    xi_odd[N // 2] = 0.0
    mesh_odd = np.meshgrid(*([xi_odd] * n), indexing="ij")
    return tuple(mesh), mag, tuple(mesh_odd)


def _spectral_apply(vals: np.ndarray, grid: GridSpec, symbol: np.ndarray) -> np.ndarray:
    sgrid = _spectral_grid(grid)
    axes = tuple(range(grid.n))
    out = np.empty_like(vals)
    if sgrid.N == grid.N:
        for c in range(vals.shape[-1]):
            spec = np.fft.fftn(vals[..., c], axes=axes)
            out[..., c] = np.fft.ifftn(spec * symbol, axes=axes).real
        return out
    # centered zero-padded embedding; embedding and truncation are
    # mutual adjoints, so exact (skew-)symmetry of the multiplier
    # survives the round trip
    off = (sgrid.N - grid.N) // 2
    sl = tuple(slice(off, off + grid.N) for _ in range(grid.n))
    big = np.zeros(sgrid.shape)
    for c in range(vals.shape[-1]):
        big[...] = 0.0
        big[sl] = vals[..., c]
        spec = np.fft.fftn(big, axes=axes)
        out[..., c] = np.fft.ifftn(spec * symbol, axes=axes).real[sl]
    return out


def _symbol_potential(grid: GridSpec, alpha: float) -> np.ndarray:
    sg = _spectral_grid(grid)
    _, mag, _ = _freq_arrays(sg.n, sg.N, sg.h)
    sym = np.zeros_like(mag)
    nz = mag > 0
    sym[nz] = (2.0 * np.pi * mag[nz]) ** (-alpha)
    return sym


def _symbol_laplacian(grid: GridSpec, s: float) -> np.ndarray:
    sg = _spectral_grid(grid)
    _, mag, _ = _freq_arrays(sg.n, sg.N, sg.h)
    return (2.0 * np.pi * mag) ** (2.0 * s)


def _symbol_gradient(grid: GridSpec, alpha: float, j: int) -> np.ndarray:
    sg = _spectral_grid(grid)
    _, mag, mesh_odd = _freq_arrays(sg.n, sg.N, sg.h)
    sym = np.zeros(mag.shape, dtype=complex)
    nz = mag > 0
    sym[nz] = (2j * np.pi * mesh_odd[j][nz]) * (2.0 * np.pi * mag[nz]) ** (alpha - 1.0)
    return sym


def _symbol_classical(grid: GridSpec, j: int) -> np.ndarray:
    sg = _spectral_grid(grid)
    _, _, mesh_odd = _freq_arrays(sg.n, sg.N, sg.h)
    return 2j * np.pi * mesh_odd[j]


# ---------------------------------------------------------------------------
# quadrature backend: kernel weight tables

def _power_cell_avg_1d(order: float, odd: bool, centers: np.ndarray, h: float) -> np.ndarray:
    """Exact cell averages of |t|^(-order) (even) or sign(t)|t|^(-order)
    (odd) over 1D cells [c-h/2, c+h/2] not containing 0."""
    a = centers - h / 2.0
    b = centers + h / 2.0
    q = 1.0 - order
    if odd:
        # antiderivative of sign(t)|t|^(-order) is |t|^q / q
        prim = lambda t: np.abs(t) ** q / q
    else:
        # antiderivative of |t|^(-order) is sign(t) |t|^q / q
        prim = lambda t: np.sign(t) * np.abs(t) ** q / q
    return (prim(b) - prim(a)) / h


def _hat_weights_1d_odd(q: float, h: float, delta: float, w: int) -> np.ndarray:
    """Product-integration weights for the odd kernel sign(t)|t|^(-q) in 1D.

    Node d*h receives (1/h) integral of hat((t - d*h)/h) * kernel over
    |t| > delta; using the piecewise-linear interpolant of u makes the
    lattice sum second-order accurate even though the kernel blows up at
    the origin.  Returned table has offsets -w..w, exactly odd.
    """
    f1 = lambda t: t ** (1.0 - q) / (1.0 - q)
    f2 = lambda t: t ** (2.0 - q) / ((1.0 - q) * (2.0 - q))

    def seg(a, b, c):
        # integral of (t - c) t^(-q) over (a, b), 0 < a <= b
        if b <= a:
            return 0.0
        return (b - c) * f1(b) - (a - c) * f1(a) - (f2(b) - f2(a))

    weights = np.zeros(2 * w + 1)
    for d in range(1, w + 1):
        t0 = d * h
        lo = max(t0 - h, delta)
        acc = seg(lo, max(t0, lo), t0 - h) / h          # rising flank
        lo2 = max(t0, delta)
        acc -= seg(lo2, max(t0 + h, lo2), t0 + h) / h   # falling flank
        weights[w + d] = acc / h
        weights[w - d] = -acc / h
    return weights


def _kernel_values(kind: str, order: float, comp: Optional[int],
                   offsets: list[np.ndarray]) -> np.ndarray:
    """Pointwise kernel values at physical offsets (0 stays 0).

    kind "radial": |d|^(-order); kind "directional": d_comp |d|^(-order-1).
    """
    r2 = sum(d ** 2 for d in offsets)
    r = np.sqrt(r2)
    out = np.zeros_like(r)
    nz = r > 0
    if kind == "radial":
        out[nz] = r[nz] ** (-order)
    else:
        out[nz] = offsets[comp][nz] * r[nz] ** (-(order + 1.0))
    return out


@lru_cache(maxsize=128)
def _box_weights(n: int, N: int, h: float, kind: str, order: float,
                 comp: Optional[int], cutoff: Optional[float], delta: float):
    """Kernel weight table on the centered offset window of a box grid.

    Returns (weights, R, geometry) with weights shaped (2w+1,)^n (offset 0
    at the center, weight 0 there), R the truncation radius and geometry
    "cube" (full window) or "ball" (radial cutoff applied).

    Radial kernels use exact cell averages (1D) or oversampled cell
    averages near the singularity (2D/3D); their leading interpolation
    errors cancel between opposite cells.  Directional (odd) kernels use
    hat-filtered product-integration weights instead, which keep second
    order accuracy near the singularity and are exactly odd.
    """
    w = N - 1
    geometry = "cube"
    if cutoff is not None:
        w = min(w, int(np.ceil(cutoff / h)))
    idx = np.arange(-w, w + 1)
    if n == 1:
        if kind == "directional":
            # 1D directional kernel d |d|^(-(order+1)) = sign(t)|t|^(-order)
            weights = _hat_weights_1d_odd(order, h, delta, w)
        else:
            centers = idx * h
            weights = np.zeros_like(centers, dtype=float)
            nz = centers != 0
            weights[nz] = _power_cell_avg_1d(order, odd=False,
                                             centers=centers[nz], h=h)
    else:
        grids = np.meshgrid(*([idx * h] * n), indexing="ij")
        weights = _kernel_values(kind, order, comp, list(grids))
        _refine_near_cells(weights, n, h, kind, order, comp,
                           lambda ci: tuple(c + w for c in ci), w, delta)
        if kind == "directional":
            # enforce exact oddness (kills floating-point asymmetry from
            # the oversampled refinement)
            rev = weights
            for ax in range(n):
                rev = np.flip(rev, axis=ax)
            weights = 0.5 * (weights - rev)
    R = (w + 0.5) * h
    if cutoff is not None and w < N - 1:
        grids = np.meshgrid(*([idx * h] * n), indexing="ij")
        r = np.sqrt(sum(g ** 2 for g in grids))
        weights = np.where(r <= cutoff + 1e-12, weights, 0.0)
        R = cutoff
        geometry = "ball"
    return weights, R, geometry


def _refine_near_cells(weights: np.ndarray, n: int, h: float, kind: str,
                       order: float, comp: Optional[int], index_of,
                       max_cell: int, delta: float) -> None:
    """Refine the kernel weights of the cells within NEAR_CELLS of the
    singularity (2D/3D).  ``index_of`` maps a signed cell offset tuple to
    the array index.

    Radial kernels get oversampled cell averages.  Directional kernels
    get hat-filtered product-integration weights, sampled over the
    (2h)^n hat support with the singular ball |t| <= delta masked out, so
    the lattice sum integrates the piecewise-multilinear interpolant of u
    over the complement of the ball.
    """
    near = min(NEAR_CELLS, max_cell)
    hat = kind == "directional"
    span = 2.0 if hat else 1.0
    nsub = 2 * NEAR_SUBSAMPLES if hat else NEAR_SUBSAMPLES
    sub = ((np.arange(nsub) + 0.5) / nsub - 0.5) * span
    sub_mesh = np.meshgrid(*([sub * h] * n), indexing="ij")
    sub_off = [sm.ravel() for sm in sub_mesh]
    if hat:
        hat_w = np.ones(sub_off[0].shape)
        for a in range(n):
            hat_w *= np.maximum(0.0, 1.0 - np.abs(sub_off[a]) / h)
        hat_w *= span ** n  # midpoint cell volume factor (2h)^n / h^n
    rng = np.arange(-near, near + 1)
    for cell in np.ndindex(*((2 * near + 1,) * n)):
        ci = tuple(int(rng[c]) for c in cell)
        if all(c == 0 for c in ci) and not hat:
            continue
        pts = [ci[a] * h + sub_off[a] for a in range(n)]
        vals = _kernel_values(kind, order, comp, pts)
        if hat:
            r = np.sqrt(sum(p ** 2 for p in pts))
            vals = np.where(r > delta, vals * hat_w, 0.0)
        weights[index_of(ci)] = vals.mean()


@lru_cache(maxsize=128)
def _periodic_weights(n: int, N: int, h: float, kind: str, order: float,
                      comp: Optional[int], images: int, delta: float):
    """Lattice-periodized kernel weights, one period per axis, offset 0 at
    index 0 (FFT layout: offset d lives at index d mod N).  The kernel is
    summed over (2*images+1)^n periodic images.  Directional tables are
    exactly odd (weights at d and -d negate; Nyquist offsets zeroed) so
    the induced lattice operator is exactly skew-adjoint.
    """
    cell = N * h
    idx = np.arange(N)
    centered = (idx + N // 2) % N - N // 2  # signed offsets in cells
    total = np.zeros((N,) * n)
    base = [centered * h] * n
    for shift in np.ndindex(*((2 * images + 1,) * n)):
        sv = [(s - images) * cell for s in shift]
        grids = np.meshgrid(*[b + s for b, s in zip(base, sv)], indexing="ij")
        if all(s == 0 for s in sv):
            if n == 1:
                vals = np.zeros(N)
                if kind == "directional":
                    hatw = _hat_weights_1d_odd(order, h, delta, N // 2 - 1)
                    d = np.arange(1, N // 2)
                    vals[d] = hatw[N // 2 - 1 + d]
                    vals[N - d] = hatw[N // 2 - 1 - d]
                else:
                    nzmask = grids[0] != 0
                    vals[nzmask] = _power_cell_avg_1d(order, odd=False,
                                                      centers=grids[0][nzmask], h=h)
            else:
                vals = _kernel_values(kind, order, comp, list(grids))
                _refine_near_cells(vals, n, h, kind, order, comp,
                                   lambda ci: tuple(c % N for c in ci),
                                   N // 2 - 1, delta)
        else:
            vals = _kernel_values(kind, order, comp, list(grids))
        total += vals
    if kind == "directional":
        # Nyquist offsets are their own negatives; only a zero weight
        # there keeps the table exactly odd (the dropped kernel value
        # sits in the far tail)
        for ax in range(n):
            sl = [slice(None)] * n
            sl[ax] = N // 2
            total[tuple(sl)] = 0.0
        rev = total
        for ax in range(n):
            rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
        total = 0.5 * (total - rev)
    a = (images + 0.5) * cell  # inradius of the covered cube of offsets
    return total, a, "cube"


@lru_cache(maxsize=64)
def _cube_exterior_angular(n: int, two_s: float) -> float:
    """integral over S^{n-1} of ||omega||_inf^(2s), used for the exact tail
    of radial kernels outside a centered cube of inradius a:
    integral_{R^n \\ cube} |t|^(-n-2s) dt = a^(-2s)/(2s) * this."""
    if n == 1:
        return 2.0
    if n == 2:
        th = (np.arange(4096) + 0.5) * (2 * np.pi / 4096)
        return float(np.mean(np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th))) ** two_s) * 2 * np.pi)
    # n == 3: midpoint rule in spherical coordinates
    nth, nph = 512, 1024
    th = (np.arange(nth) + 0.5) * (np.pi / nth)
    ph = (np.arange(nph) + 0.5) * (2 * np.pi / nph)
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    wx = np.abs(np.sin(TH) * np.cos(PH))
    wy = np.abs(np.sin(TH) * np.sin(PH))
    wz = np.abs(np.cos(TH))
    f = np.maximum(np.maximum(wx, wy), wz) ** two_s
    return float(np.sum(f * np.sin(TH)) * (np.pi / nth) * (2 * np.pi / nph))


def _cube_tail_integral(n: int, two_s: float, a: float) -> float:
    """integral of |t|^(-n-2s) over the complement of the cube [-a, a]^n."""
    return a ** (-two_s) / two_s * _cube_exterior_angular(n, two_s)


@lru_cache(maxsize=64)
def _corner_moment_unit(n: int, order: float, moment: int) -> float:
    """integral of |t|^moment |t|^(-order) over the corner region of the
    unit cell, [-1/2,1/2]^n minus the inscribed ball (empty in 1D).

    Scaled to cell size h the integral is this value times
    h^(n + moment - order).
    """
    if n == 1:
        return 0.0
    sub = 200 if n == 2 else 60
    t = (np.arange(sub) + 0.5) / sub - 0.5
    mesh = np.meshgrid(*([t] * n), indexing="ij")
    r = np.sqrt(sum(g ** 2 for g in mesh))
    mask = r > 0.5
    vals = np.where(mask, r ** (moment - order), 0.0)
    return float(vals.sum() / sub ** n)


def _singular_cell_coeff(grid: GridSpec, delta: float, order: float,
                         moment: int) -> float:
    """Second piece of the singular-cell Taylor correction: the kernel
    |t|^(-order) weighted by |t|^moment over the corner of the center cell
    (only when delta is the inscribed-ball radius h/2)."""
    if abs(delta - grid.h / 2.0) > 1e-12 * grid.h:
        return 0.0
    return (_corner_moment_unit(grid.n, order, moment)
            * grid.h ** (grid.n + moment - order))


def _correlate(u: np.ndarray, weights: np.ndarray, grid: GridSpec) -> np.ndarray:
    """sum_d u[x + d] * weights[d], linear on a box, circular on a cell."""
    if grid.kind == BOX:
        flipped = np.flip(weights)
        return fftconvolve(u, flipped, mode="same")
    axes = tuple(range(grid.n))
    ker = np.fft.fftn(weights, axes=axes)
    return np.fft.ifftn(np.fft.fftn(u, axes=axes) * np.conj(ker), axes=axes).real


def _central_diff(u: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    """Central difference (u[i+1]-u[i-1])/(2h); periodic wrap on a cell,
    zero extension on a box (keeps the stencil exactly skew-adjoint)."""
    if grid.kind == PERIODIC:
        return (np.roll(u, -1, axis=axis) - np.roll(u, 1, axis=axis)) / (2.0 * grid.h)
    up = np.zeros_like(u)
    um = np.zeros_like(u)
    sl_all = [slice(None)] * u.ndim
    src, dst = sl_all.copy(), sl_all.copy()
    src[axis], dst[axis] = slice(1, None), slice(0, -1)
    up[tuple(dst)] = u[tuple(src)]
    src[axis], dst[axis] = slice(0, -1), slice(1, None)
    um[tuple(dst)] = u[tuple(src)]
    return (up - um) / (2.0 * grid.h)


def _second_diff(u: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    if grid.kind == PERIODIC:
        return (np.roll(u, -1, axis=axis) - 2 * u + np.roll(u, 1, axis=axis)) / grid.h ** 2
    up = np.zeros_like(u)
    um = np.zeros_like(u)
    sl_all = [slice(None)] * u.ndim
    src, dst = sl_all.copy(), sl_all.copy()
    src[axis], dst[axis] = slice(1, None), slice(0, -1)
    up[tuple(dst)] = u[tuple(src)]
    src[axis], dst[axis] = slice(0, -1), slice(1, None)
    um[tuple(dst)] = u[tuple(src)]
    return (up - 2 * u + um) / grid.h ** 2


def _default_images(grid: GridSpec) -> int:
    return 16 if grid.n == 1 else 4


def _quad_window(grid: GridSpec, backend: Backend, kind: str, order: float,
                 comp: Optional[int]):
    """Weight table plus effective truncation radius for either grid kind."""
    delta = _delta(grid, backend)
    if grid.kind == BOX:
        return _box_weights(grid.n, grid.N, grid.h, kind, order, comp,
                            backend.far_cutoff, delta)
    images = _default_images(grid)
    if backend.far_cutoff is not None:
        images = max(1, int(np.ceil(backend.far_cutoff / grid.cell_length)))
    return _periodic_weights(grid.n, grid.N, grid.h, kind, order, comp,
                             images, delta)


def _ball_excluded(weights: np.ndarray, grid: GridSpec, delta: float) -> np.ndarray:
    """Zero the weights of cells whose centers fall inside the singular
    ball (only relevant when delta exceeds the default h/2)."""
    if delta <= grid.h / 2.0 + 1e-12 * grid.h:
        return weights
    if grid.kind == BOX:
        w = (weights.shape[0] - 1) // 2
        idx = np.arange(-w, w + 1) * grid.h
    else:
        N = grid.N
        idx = ((np.arange(N) + N // 2) % N - N // 2) * grid.h
    mesh = np.meshgrid(*([idx] * grid.n), indexing="ij")
    r = np.sqrt(sum(g ** 2 for g in mesh))
    return np.where(r > delta, weights, 0.0)


def _band_amplitude(u: SampledField) -> float:
    """Max |u| on the outermost padding band (tail proxy for estimates)."""
    from .grid import _padding_band_mask
    band = _padding_band_mask(u.grid)
    mag = np.sqrt(np.sum(u.values ** 2, axis=-1))
    return float(np.max(mag[band]))


def _require_decay(u: SampledField, op: str) -> None:
    if u.grid.kind == BOX and u.decay == DECAY_UNKNOWN:
        raise ValueError(
            f"{op}: quadrature on a truncated box needs a declared decay "
            "class (compact-support or schwartz-like); the far-field tail "
            "is otherwise ill-defined")


def _delta(grid: GridSpec, backend: Backend) -> float:
    d = backend.delta if backend.delta is not None else grid.h / 2.0
    if d < grid.h / 2.0 - 1e-15:
        raise ValueError("singularity radius delta must be >= h/2")
    return d


# ---------------------------------------------------------------------------
# operators

def riesz_potential(u: SampledField, alpha: float,
                    backend: Backend = SPECTRAL) -> OperatorResult:
    """Riesz potential I_alpha u: convolution with |x|^(alpha-n)/gamma_{n,alpha}.

    Requires alpha in (0, n).  The quadrature backend works on truncated
    boxes with declared decay; on a periodic cell the defining integral
    diverges, so only the spectral backend (zero mode annihilated) applies
    there.
    """
    grid = u.grid
    gam = riesz_gamma(grid.n, alpha)
    if backend.kind == KIND_SPECTRAL:
        out = _spectral_apply(u.values, grid, _symbol_potential(grid, alpha))
        return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), 0.0)
    if grid.kind == PERIODIC:
        raise ValueError("riesz_potential: quadrature backend needs a "
                         "truncated box (the full-space integral of a "
                         "periodic field diverges)")
    _require_decay(u, "riesz_potential")
    weights, R, _ = _quad_window(grid, backend, "radial", grid.n - alpha, None)
    delta = _delta(grid, backend)
    weights = _ball_excluded(weights, grid, delta)
    sigma = sphere_area(grid.n)
    # exact integral of |y|^(alpha-n) over the delta-ball, plus the corner
    # of the singular cell
    ball = (sigma * delta ** alpha / alpha
            + _singular_cell_coeff(grid, delta, grid.n - alpha, 0))
    out = np.empty_like(u.values)
    for c in range(u.m):
        # potential kernel is symmetric: correlation == convolution
        out[..., c] = (grid.cell_volume * _correlate(u.values[..., c], weights, grid)
                       + ball * u.values[..., c]) / gam
    est = 0.0
    if u.decay == DECAY_SCHWARTZ:
        est = _band_amplitude(u) * sigma * R ** alpha / (gam * grid.n)
    return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), est)


def _out_decay(u: SampledField) -> str:
    if u.decay in (DECAY_COMPACT, DECAY_SCHWARTZ):
        return DECAY_SCHWARTZ
    return DECAY_UNKNOWN


def fractional_gradient(u: SampledField, params: FractionalParams,
                        backend: Backend = SPECTRAL) -> OperatorResult:
    """Riesz fractional gradient; output has m*n components (i*n + j)."""
    grid = u.grid
    alpha, mu = params.alpha, params.mu
    m = u.m
    if backend.kind == KIND_SPECTRAL:
        out = np.empty(grid.shape + (m * grid.n,))
        for j in range(grid.n):
            sym = _symbol_gradient(grid, alpha, j)
            g = _spectral_apply(u.values, grid, sym)
            for i in range(m):
                out[..., i * grid.n + j] = g[..., i]
        return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), 0.0)
    _require_decay(u, "fractional_gradient")
    delta = _delta(grid, backend)
    sigma = sphere_area(grid.n)
    cball = sigma * delta ** (1.0 - alpha) / ((1.0 - alpha) * grid.n)
    out = np.empty(grid.shape + (m * grid.n,))
    R = None
    for j in range(grid.n):
        weights, R, _ = _quad_window(grid, backend, "directional", grid.n + alpha, j)
        for i in range(m):
            comp = u.values[..., i]
            conv = _correlate(comp, weights, grid)
            # sum of the odd kernel over the symmetric window is exactly 0
            out[..., i * grid.n + j] = mu * (grid.cell_volume * conv
                                             + cball * _central_diff(comp, grid, j))
    est = 0.0
    if grid.kind == BOX and u.decay == DECAY_SCHWARTZ:
        est = abs(mu) * _band_amplitude(u) * sigma * R ** (-alpha) / alpha
    return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), est)


def fractional_laplacian(u: SampledField, s: float,
                         backend: Backend = SPECTRAL) -> OperatorResult:
    """Fractional Laplacian (-Delta)^s, s in (0,1), kernel exponent n+2s."""
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")
    grid = u.grid
    nu = laplacian_nu(grid.n, 2.0 * s)
    if backend.kind == KIND_SPECTRAL:
        out = _spectral_apply(u.values, grid, _symbol_laplacian(grid, s))
        return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), 0.0)
    _require_decay(u, "fractional_laplacian")
    weights, a, geom = _quad_window(grid, backend, "radial", grid.n + 2.0 * s, None)
    delta = _delta(grid, backend)
    weights = _ball_excluded(weights, grid, delta)
    sigma = sphere_area(grid.n)
    cball = (sigma * delta ** (2.0 - 2.0 * s) / ((2.0 - 2.0 * s) * 2.0 * grid.n)
             + _singular_cell_coeff(grid, delta, grid.n + 2.0 * s, 2) / (2.0 * grid.n))
    if geom == "cube":
        tail = _cube_tail_integral(grid.n, 2.0 * s, a)
    else:
        tail = sigma * a ** (-2.0 * s) / (2.0 * s)
    wsum = float(weights.sum()) * grid.cell_volume
    out = np.empty_like(u.values)
    lap = np.zeros_like(u.values)
    means = u.values.mean(axis=tuple(range(grid.n))) if grid.kind == PERIODIC else np.zeros(u.m)
    for c in range(u.m):
        comp = u.values[..., c]
        conv = _correlate(comp, weights, grid)
        for ax in range(grid.n):
            lap[..., c] += _second_diff(comp, grid, ax)
        ubar_c = means[c]
        out[..., c] = nu * (grid.cell_volume * conv - wsum * comp
                            + (ubar_c - comp) * tail
                            + cball * lap[..., c])
    est = 0.0
    if grid.kind == BOX and u.decay == DECAY_SCHWARTZ:
        est = abs(nu) * _band_amplitude(u) * tail
    elif grid.kind == PERIODIC:
        osc = float(np.max(np.abs(u.values - means)))
        est = abs(nu) * osc * tail
    return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), est)


def nonlocal_leibniz_remainder(u: SampledField, psi: SampledField,
                               params: FractionalParams,
                               backend: Backend = QUADRATURE) -> OperatorResult:
    """Bilinear remainder of the fractional Leibniz rule.

    Quadrature evaluates the defining double-difference kernel directly;
    the singular cell drops out (the integrand is second order there).
    The spectral backend realizes the remainder through the Leibniz
    identity itself, grad^a(psi u) - psi grad^a u - u grad^a psi.
    Output has m*n components.
    """
    grid = u.grid
    if psi.m != 1:
        raise ValueError("psi must be scalar")
    if psi.grid != grid:
        raise ValueError("fields live on different grids")
    alpha, mu = params.alpha, params.mu
    m = u.m
    psiv = psi.values[..., 0]
    if backend.kind == KIND_SPECTRAL:
        prod = SampledField(grid, u.values * psiv[..., None], decay=u.decay)
        g_prod = fractional_gradient(prod, params, backend).field.values
        g_u = fractional_gradient(u, params, backend).field.values
        g_psi = fractional_gradient(psi, params, backend).field.values
        out = np.empty(grid.shape + (m * grid.n,))
        for i in range(m):
            for j in range(grid.n):
                out[..., i * grid.n + j] = (g_prod[..., i * grid.n + j]
                                            - psiv * g_u[..., i * grid.n + j]
                                            - u.values[..., i] * g_psi[..., j])
        return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), 0.0)
    if grid.kind == BOX:
        _require_decay(u, "nonlocal_leibniz_remainder")
    out = np.empty(grid.shape + (m * grid.n,))
    R = None
    for j in range(grid.n):
        weights, R, _ = _quad_window(grid, backend, "directional", grid.n + alpha, j)
        conv_psi = _correlate(psiv, weights, grid)
        for i in range(m):
            comp = u.values[..., i]
            conv_up = _correlate(comp * psiv, weights, grid)
            conv_u = _correlate(comp, weights, grid)
            # (u(y)-u(x))(psi(y)-psi(x)) expanded; the sum of the odd
            # kernel over the symmetric window vanishes
            out[..., i * grid.n + j] = mu * grid.cell_volume * (
                conv_up - psiv * conv_u - comp * conv_psi)
    est = 0.0
    if grid.kind == BOX and u.decay == DECAY_SCHWARTZ:
        sigma = sphere_area(grid.n)
        est = (2.0 * abs(mu) * _band_amplitude(u)
               * float(np.max(np.abs(psiv))) * sigma * R ** (-alpha) / alpha)
    return OperatorResult(SampledField(grid, out, decay=_out_decay(u)), est)


def fractional_divergence(V: SampledField, params: FractionalParams,
                          backend: Backend = SPECTRAL, m: Optional[int] = None) -> SampledField:
    """Exact negative adjoint of :func:`fractional_gradient`.

    ``V`` carries m*n components (layout i*n + j); the result has m
    components and satisfies <grad^a u, V> + <u, div^a V> = 0 in the grid
    inner product, to machine precision, for both backends.
    """
    grid = V.grid
    n = grid.n
    if m is None:
        if V.m % n != 0:
            raise ValueError("component count is not a multiple of n")
        m = V.m // n
    alpha, mu = params.alpha, params.mu
    out = np.zeros(grid.shape + (m,))
    if backend.kind == KIND_SPECTRAL:
        for j in range(n):
            sym = _symbol_gradient(grid, alpha, j)
            for i in range(m):
                comp = V.values[..., i * n + j][..., None]
                out[..., i] += _spectral_apply(comp, grid, sym)[..., 0]
        return SampledField(grid, out, decay=DECAY_UNKNOWN)
    delta = _delta(grid, backend)
    sigma = sphere_area(grid.n)
    cball = sigma * delta ** (1.0 - alpha) / ((1.0 - alpha) * n)
    for j in range(n):
        weights, _, _ = _quad_window(grid, backend, "directional", n + alpha, j)
        for i in range(m):
            comp = V.values[..., i * n + j]
            out[..., i] += mu * (grid.cell_volume * _correlate(comp, weights, grid)
                                 + cball * _central_diff(comp, grid, j))
    return SampledField(grid, out, decay=DECAY_UNKNOWN)


def classical_gradient(u: SampledField, backend: Backend = SPECTRAL) -> SampledField:
    """Discretization-consistent classical gradient (m*n components):
    spectral derivative on the spectral backend, central differences on
    the quadrature backend."""
    grid = u.grid
    out = np.empty(grid.shape + (u.m * grid.n,))
    for j in range(grid.n):
        if backend.kind == KIND_SPECTRAL:
            sym = _symbol_classical(grid, j)
            g = _spectral_apply(u.values, grid, sym)
            for i in range(u.m):
                out[..., i * grid.n + j] = g[..., i]
        else:
            for i in range(u.m):
                out[..., i * grid.n + j] = _central_diff(u.values[..., i], grid, j)
    return SampledField(grid, out, decay=_out_decay(u))
