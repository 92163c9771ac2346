"""Convex/quasiconvex envelopes and the nonlocal-quasiconvexity
violation search.

In one dimension quasiconvexity coincides with convexity, so the
envelope is computed exactly as the discrete biconjugate (double
Legendre-Fenchel transform, realized as the lower convex hull of the
sample points).  In higher dimensions only laminate upper bounds are
provided.

The violation search probes the nonlocal Jensen inequality
h(A) <= average of h(A + grad^a phi) over the periodic cell by building
Lipschitz laminates v and pushing them to test fields phi with
grad^a phi = grad v (half-order Laplacian push-forward).  Because the
push-forward identity is exact, the cell average is evaluated from the
laminate mixture itself - the discrete spectral gradient of a sawtooth
would only add Gibbs noise around the kinks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import (PERIODIC, FractionalParams, GridSpec, SampledField,
                   make_grid)
from .fracops import _freq_arrays, _spectral_apply


@dataclass
class EnvelopeTable:
    """Sampled integrand and its envelope on a box in matrix space."""

    samples: np.ndarray        # (K,) in 1D, (K, m, n) otherwise
    f_values: np.ndarray
    qc_values: np.ndarray
    method: str
    pinching: Optional[tuple] = None   # (c, C, p) growth record, if known

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.f_values = np.asarray(self.f_values, dtype=float)
        self.qc_values = np.asarray(self.qc_values, dtype=float)
        if not (np.all(np.isfinite(self.f_values))
                and np.all(np.isfinite(self.qc_values))):
            raise ValueError("envelope table entries must be finite")
        if np.any(self.qc_values > self.f_values + 1e-12):
            raise ValueError("envelope exceeds the integrand somewhere")

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            ncomp = int(np.prod(self.samples.shape[1:])) if self.samples.ndim > 1 else 1
            header = [f"A_{k}" for k in range(ncomp)] if ncomp > 1 else ["A"]
            writer.writerow(header + ["f", "f_qc"])
            flat = self.samples.reshape(len(self.f_values), -1)
            for row, fv, qv in zip(flat, self.f_values, self.qc_values):
                writer.writerow(list(row) + [fv, qv])

    def interpolate(self, A: float) -> float:
        """Envelope value at A by linear interpolation (1D tables)."""
        if self.samples.ndim != 1:
            raise ValueError("interpolation is for 1D tables")
        return float(np.interp(A, self.samples, self.qc_values))


def _lower_hull_values(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Values of the lower convex hull of the points (xs, ys) at xs
    (xs strictly increasing).  This equals the double Legendre-Fenchel
    transform restricted to the sample grid."""
    hull = []  # indices of hull vertices
    for i in range(len(xs)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or above the chord i0 -> i
            if ((ys[i1] - ys[i0]) * (xs[i] - xs[i0])
                    >= (ys[i] - ys[i0]) * (xs[i1] - xs[i0])):
                hull.pop()
            else:
                break
        hull.append(i)
    hx = xs[hull]
    hy = ys[hull]
    return np.interp(xs, hx, hy)


def convex_envelope_1d(f: Callable, a_min: float, a_max: float,
                       num: int = 4097,
                       pinching: Optional[tuple] = None) -> EnvelopeTable:
    """Discrete biconjugate f** of a scalar integrand on [a_min, a_max].

    In 1D the quasiconvex envelope is the convex envelope; the double
    Legendre-Fenchel transform on the sample grid is computed as the
    lower convex hull of the sampled graph.
    """
    xs = np.linspace(a_min, a_max, num)
    ys = np.asarray([float(f(x)) for x in xs])
    if not np.all(np.isfinite(ys)):
        raise ValueError("integrand is not finite on the sample box")
    env = _lower_hull_values(xs, ys)
    env = np.minimum(env, ys)  # guard against roundoff crossing
    return EnvelopeTable(samples=xs, f_values=ys, qc_values=env,
                         method="biconjugate-1d", pinching=pinching)


# ---------------------------------------------------------------------------
# laminate upper bounds

def _rank_one_directions(m: int, n: int) -> list:
    dirs = []
    for i in range(m):
        a = np.zeros(m)
        a[i] = 1.0
        for j in range(n):
            b = np.zeros(n)
            b[j] = 1.0
            dirs.append(np.outer(a, b))
    if m > 1 and n > 1:
        dirs.append(np.ones((m, n)) / np.sqrt(m * n))
    return dirs


def laminate_upper_bound(f: Callable, A: np.ndarray, depth: int = 1,
                         t_grid: Optional[Sequence[float]] = None,
                         theta_grid: Optional[Sequence[float]] = None) -> float:
    """Upper bound on the quasiconvex envelope at A by depth-d rank-one
    lamination trees (monotone in depth; t = 0 keeps the previous level).
    """
    if depth < 0 or depth > 3:
        raise ValueError("lamination depth must be between 0 and 3")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    dirs = _rank_one_directions(m, n)
    if t_grid is None:
        scale = max(1.0, float(np.max(np.abs(A))))
        t_grid = np.concatenate([[0.0], np.linspace(-4 * scale, 4 * scale, 17)])
    if theta_grid is None:
        theta_grid = np.linspace(0.1, 0.9, 9)

    def bound(B: np.ndarray, d: int) -> float:
        val = float(f(B if (m > 1 or n > 1) else float(B[0, 0])))
        if d == 0:
            return val
        best = val
        for R in dirs:
            for t in t_grid:
                if t == 0.0:
                    continue
                for th in theta_grid:
                    Bp = B + (1.0 - th) * t * R
                    Bm = B - th * t * R
                    cand = th * bound(Bp, d - 1) + (1.0 - th) * bound(Bm, d - 1)
                    if cand < best:
                        best = cand
        return best

    return bound(A, depth)


# ---------------------------------------------------------------------------
# periodic push-forward and the violation search

def periodic_pushforward(v_periodic: SampledField,
                         params: FractionalParams) -> SampledField:
    """Test field u with grad^a u = grad v: apply the half-order Laplacian
    multiplier (2 pi |xi|)^(1-a) and keep the zero mode (cell mean)."""
    grid = v_periodic.grid
    if grid.kind != PERIODIC:
        raise ValueError("push-forward acts on periodic fields")
    _, mag, _ = _freq_arrays(grid.n, grid.N, grid.h)
    sym = (2.0 * np.pi * mag) ** (1.0 - params.alpha)
    sym = np.where(mag > 0, sym, 1.0)  # preserve the mean
    out = _spectral_apply(v_periodic.values, grid, sym)
    return SampledField(grid, out, decay=v_periodic.decay)


@dataclass
class ViolationWitness:
    A: np.ndarray
    test_field: SampledField
    gap: float
    details: dict = dc_field(default_factory=dict)


def _sawtooth(x: np.ndarray, K: int, theta: float, s1: float, s2: float) -> np.ndarray:
    """Periodic piecewise-linear profile with slope s1 on the first theta
    fraction of each of the K sub-periods and s2 on the rest; continuous
    and periodic when theta*s1 + (1-theta)*s2 = 0."""
    t = (x * K) % 1.0
    ramp = np.where(t < theta, s1 * t, s1 * theta + s2 * (t - theta))
    return ramp / K


def alpha_qc_violation_search(h: Callable, A, params: FractionalParams,
                              budget: int = 257,
                              grid_N: int = 512,
                              span: float = 4.0,
                              tolerance: float = 1e-9) -> Optional[ViolationWitness]:
    """Search for a failure of the nonlocal Jensen inequality at A.

    Scalar version (m = n = 1): candidate laminates come from supporting
    segments of the lower convex hull of h sampled on ``budget`` points
    around A; the cell average of h along the induced two-slope gradient
    field is the laminate mixture theta*h(A1) + (1-theta)*h(A2), which
    the push-forward field realizes exactly in the continuum.  Returns
    the witness with the largest gap, or None (absence of a witness is
    not a certificate of quasiconvexity).
    """
    A_arr = np.atleast_2d(np.asarray(A, dtype=float))
    if A_arr.shape != (1, 1):
        raise NotImplementedError(
            "the violation search targets scalar integrands (m = n = 1); "
            "use laminate_upper_bound for matrix-valued probes")
    a0 = float(A_arr[0, 0])
    xs = np.linspace(a0 - span, a0 + span, budget)
    ys = np.asarray([float(h(x)) for x in xs])
    env = _lower_hull_values(xs, ys)
    h_a = float(h(a0))
    env_a = float(np.interp(a0, xs, env))
    gap = h_a - env_a
    if gap <= tolerance:
        return None
    # locate the supporting segment of the hull through (a0, env_a)
    hull_mask = np.abs(ys - env) <= 1e-12 * (1.0 + np.abs(ys))
    hull_x = xs[hull_mask]
    left = hull_x[hull_x <= a0 + 1e-15]
    right = hull_x[hull_x >= a0 - 1e-15]
    a1 = float(left.max()) if len(left) else float(hull_x.min())
    a2 = float(right.min()) if len(right) else float(hull_x.max())
    if a2 <= a1 + 1e-15:
        return None
    theta = (a2 - a0) / (a2 - a1)  # weight on a1
    mix = theta * float(h(a1)) + (1.0 - theta) * float(h(a2))
    gap = h_a - mix
    if gap <= tolerance:
        return None
    K = 8
    grid = make_grid(1, PERIODIC, grid_N)
    x = grid.axis()
    v = SampledField(grid, _sawtooth(x, K, theta, a1 - a0, a2 - a0))
    phi = periodic_pushforward(v, params)
    return ViolationWitness(A=A_arr, test_field=phi, gap=gap,
                            details={"slopes": (a1, a2), "weight": theta,
                                     "oscillations": K,
                                     "laminate_average": mix})
