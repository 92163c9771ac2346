"""Discrete nonlocal variational problems: the energy functional, its
first variation, projected-descent minimization over complementary-value
spaces, the relaxed energy, and explicit minimizing sequences.

Integrands are vectorized: ``eval(x, z, A)`` receives coordinate arrays
of shape (*shape, n), field values (*shape, m) and gradient matrices
(*shape, m, n), and returns (*shape) energies.  The derivative
``deriv_A`` returns (*shape, m, n).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import FractionalParams, SampledField, lp_inner, lp_norm
from .fracops import (SPECTRAL, Backend, as_matrix, fractional_divergence,
                      fractional_gradient, from_matrix)
from .spaces import ComplementarySpec, project_complementary
from .envelope import EnvelopeTable

_TINY = 1e-300


@dataclass
class Integrand:
    """Energy density f(x, z, A) with optional analytic A-derivative and
    a growth record (a(x), C, c, p) for 0 <= f <= a(x) + C(|z|^p+|A|^p)
    and coercivity c|A|^p - b <= f."""

    eval: Callable
    deriv_A: Optional[Callable] = None
    deriv_z: Optional[Callable] = None
    growth: tuple = (0.0, 2.0, 0.5, 2.0)   # (a, C, c, p)
    x_dependent: bool = False
    z_dependent: bool = False
    name: str = "custom"

    @property
    def p(self) -> float:
        return float(self.growth[3])

    def growth_violation(self, x, z, A) -> float:
        """Largest violation of 0 <= f <= a + C(|z|^p + |A|^p) on the
        given sample triples (0 when the bounds hold)."""
        a, C, _, p = self.growth
        ax = a(x) if callable(a) else float(a)
        vals = self.eval(x, z, A)
        zmag = np.sqrt(np.sum(np.atleast_1d(z) ** 2, axis=-1))
        amag = np.sqrt(np.sum(np.asarray(A) ** 2, axis=(-2, -1)))
        upper = ax + C * (zmag ** p + amag ** p)
        return float(max(np.max(-vals), np.max(vals - upper), 0.0))


def _scalar_min_branches(A):
    """Branch mask of the pinched benchmark: True where 2A^2 is active."""
    return 2.0 * A * A <= A * A + (np.abs(A) - 1.0) ** 2


def quadratic_integrand() -> Integrand:
    """f(A) = |A|^2, convex, pinching constants c = C = 1."""
    def ev(x, z, A):
        return np.sum(A ** 2, axis=(-2, -1))

    def dA(x, z, A):
        return 2.0 * A

    return Integrand(eval=ev, deriv_A=dA, growth=(0.0, 1.0, 1.0, 2.0),
                     name="quadratic")


def pinched_nonconvex_integrand() -> Integrand:
    """1D benchmark f(A) = min(2A^2, A^2 + (|A|-1)^2): nonconvex, with
    (1/2)A^2 <= f(A) <= 2A^2 and f(0) = 0."""
    def ev(x, z, A):
        a = A[..., 0, 0]
        return np.minimum(2.0 * a * a, a * a + (np.abs(a) - 1.0) ** 2)

    def dA(x, z, A):
        a = A[..., 0, 0]
        first = _scalar_min_branches(a)
        d = np.where(first, 4.0 * a, 2.0 * a + 2.0 * (np.abs(a) - 1.0) * np.sign(a))
        return d[..., None, None]

    return Integrand(eval=ev, deriv_A=dA, growth=(0.0, 2.0, 0.5, 2.0),
                     name="pinched-nonconvex-1d")


def double_well_integrand() -> Integrand:
    """f(A) = min((A-1)^2, (A+1)^2): nonconvex, not pinched at 0."""
    def ev(x, z, A):
        a = A[..., 0, 0]
        return np.minimum((a - 1.0) ** 2, (a + 1.0) ** 2)

    def dA(x, z, A):
        a = A[..., 0, 0]
        d = np.where(a >= 0.0, 2.0 * (a - 1.0), 2.0 * (a + 1.0))
        return d[..., None, None]

    return Integrand(eval=ev, deriv_A=dA, growth=(1.0, 2.0, 0.25, 2.0),
                     name="double-well-unpinched")


INTEGRAND_PRESETS = {
    "quadratic": quadratic_integrand,
    "pinched-nonconvex-1d": pinched_nonconvex_integrand,
    "double-well-unpinched": double_well_integrand,
}


def _gradient_matrix(u: SampledField, params: FractionalParams,
                     backend: Backend) -> np.ndarray:
    g = fractional_gradient(u, params, backend).field
    return as_matrix(g, u.m, u.grid.n)


def evaluate_functional(u: SampledField, f: Integrand,
                        spec: ComplementarySpec, params: FractionalParams,
                        backend: Backend = SPECTRAL) -> float:
    """Quadrature of f(x, u, grad^a u) over the computational cell/box.

    The field is first projected onto the complementary-value space; a
    growth-bound violation at the sampled triples raises a warning."""
    u = project_complementary(u, spec)
    grid = u.grid
    x = grid.coords()
    A = _gradient_matrix(u, params, backend)
    vals = f.eval(x, u.values, A)
    bad = f.growth_violation(x, u.values, A)
    if bad > 1e-9 * (1.0 + float(np.max(np.abs(vals)))):
        warnings.warn(f"integrand violates its declared growth bounds "
                      f"(excess {bad:.3e})", RuntimeWarning)
    return float(np.sum(vals) * grid.cell_volume)


def functional_gradient(u: SampledField, f: Integrand,
                        spec: ComplementarySpec, params: FractionalParams,
                        backend: Backend = SPECTRAL) -> SampledField:
    """First variation dF/du = df/dz - div^a(df/dA), zeroed outside Omega
    (complementary values are frozen).  Exact discrete adjointness of the
    divergence makes this match finite differences of the energy."""
    if f.deriv_A is None:
        raise ValueError("integrand has no A-derivative")
    u = project_complementary(u, spec)
    grid = u.grid
    x = grid.coords()
    A = _gradient_matrix(u, params, backend)
    W = f.deriv_A(x, u.values, A)
    div = fractional_divergence(from_matrix(grid, W), params, backend, m=u.m)
    out = -div.values
    if f.z_dependent:
        if f.deriv_z is None:
            raise ValueError("z-dependent integrand has no z-derivative")
        out = out + f.deriv_z(x, u.values, A)
    out[~spec.omega] = 0.0
    return SampledField(grid, out, decay=u.decay)


@dataclass
class MinimizeOptions:
    max_iter: int = 500
    tol: float = 1e-6
    armijo: float = 1e-4
    backtrack: float = 0.5
    step0: float = 1.0
    max_backtracks: int = 40


@dataclass
class MinimizeReport:
    minimizer: SampledField
    energy: float
    optimality_residual: float
    iterations: int
    energy_trace: list
    converged: bool


def minimize(f: Integrand, spec: ComplementarySpec, params: FractionalParams,
             backend: Backend = SPECTRAL,
             opts: Optional[MinimizeOptions] = None) -> MinimizeReport:
    """Projected descent with Barzilai-Borwein trial steps and Armijo
    backtracking, starting from u = g.  Updates vanish outside Omega, so
    the complementary values are preserved bitwise.  The energy trace is
    non-increasing by the line-search contract."""
    if opts is None:
        opts = MinimizeOptions()
    u = project_complementary(spec.g.copy(), spec)
    energy = evaluate_functional(u, f, spec, params, backend)
    trace = [energy]
    grad = functional_gradient(u, f, spec, params, backend)
    res = lp_norm(grad, 2)
    step = opts.step0
    prev_vals = None
    prev_grad = None
    it = 0
    converged = res <= opts.tol
    while not converged and it < opts.max_iter:
        it += 1
        if prev_vals is not None:
            s = u.values - prev_vals
            y = grad.values - prev_grad
            sy = float(np.sum(s * y))
            if sy > 1e-30:
                step = float(np.sum(s * s)) / sy
            else:
                step = opts.step0
            step = float(np.clip(step, 1e-12, 1e6))
        accepted = False
        gnorm2 = res ** 2 * 1.0
        trial = step
        for _ in range(opts.max_backtracks):
            cand_vals = u.values - trial * grad.values
            cand = SampledField(u.grid, cand_vals, decay=u.decay)
            cand_energy = evaluate_functional(cand, f, spec, params, backend)
            if cand_energy <= energy - opts.armijo * trial * gnorm2:
                accepted = True
                break
            trial *= opts.backtrack
        if not accepted:
            break
        prev_vals, prev_grad = u.values, grad.values
        u, energy = cand, cand_energy
        trace.append(energy)
        grad = functional_gradient(u, f, spec, params, backend)
        res = lp_norm(grad, 2)
        converged = res <= opts.tol
    return MinimizeReport(minimizer=u, energy=energy,
                          optimality_residual=res, iterations=it,
                          energy_trace=trace, converged=converged)


def relaxed_energy(u: SampledField, f: Integrand, f_qc: EnvelopeTable,
                   spec: ComplementarySpec, params: FractionalParams,
                   backend: Backend = SPECTRAL) -> float:
    """Inhomogeneous relaxed integral: the envelope of f inside Omega,
    f itself outside (1D scalar gradients)."""
    u = project_complementary(u, spec)
    grid = u.grid
    x = grid.coords()
    A = _gradient_matrix(u, params, backend)
    a = A[..., 0, 0]
    lo, hi = f_qc.samples[0], f_qc.samples[-1]
    if float(a.min()) < lo or float(a.max()) > hi:
        warnings.warn("gradient range leaves the envelope table; envelope "
                      "values are extrapolated", RuntimeWarning)
    inside = np.interp(a, f_qc.samples, f_qc.qc_values)
    outside = f.eval(x, u.values, A)
    vals = np.where(spec.omega, inside, outside)
    return float(np.sum(vals) * grid.cell_volume)


def _smooth_cutoff(t: np.ndarray) -> np.ndarray:
    """C^inf ramp: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-12)), 0.0)
        e1 = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-12)), 0.0)
    return e0 / (e0 + e1)


def _interval_of_mask(omega: np.ndarray) -> tuple:
    idx = np.nonzero(omega)[0]
    return int(idx[0]), int(idx[-1])


def minimizing_sequence(u: SampledField, f: Integrand, f_qc: EnvelopeTable,
                        spec: ComplementarySpec, params: FractionalParams,
                        K_list: Sequence[int],
                        backend: Backend = SPECTRAL,
                        cutoff_fraction: Optional[float] = None) -> list:
    """Oscillating fields driving the energy toward the relaxed value.

    For each oscillation count K, Omega is split into K blocks; in each
    block the gradient target G (block average of grad^a u) is decomposed
    along its supporting envelope segment into two slopes, realized by a
    single sawtooth w vanishing at the block ends.  The correction
    (-Delta)^((1-a)/2) w has fractional gradient grad w; multiplied by a
    smooth cut-off equal to 1 on the inner ``cutoff_fraction`` of Omega
    it preserves the complementary values bitwise.  By default the
    cut-off ramp spans 2 blocks on each side, so the un-oscillated
    margin (the dominant excess over the relaxed energy) shrinks like
    1/K and the energies decrease in K.  Returns a list of
    (field, energy) pairs.  Where the envelope gap vanishes the blocks
    degenerate to w = 0 and the field stays u.
    """
    grid = u.grid
    if grid.n != 1 or u.m != 1:
        raise NotImplementedError("minimizing sequences are built in 1D")
    u = project_complementary(u, spec)
    x = grid.axis()
    A = _gradient_matrix(u, params, backend)[..., 0, 0]
    i0, i1 = _interval_of_mask(spec.omega)
    x_lo, x_hi = x[i0], x[i1] + grid.h
    width = x_hi - x_lo

    def _chi(K: int) -> np.ndarray:
        if cutoff_fraction is None:
            frac = max(0.2, 1.0 - 4.0 / K)
        else:
            frac = cutoff_fraction
        margin = 0.5 * (1.0 - frac) * width
        ramp_in = _smooth_cutoff((x - x_lo) / max(margin, grid.h))
        ramp_out = _smooth_cutoff((x_hi - x) / max(margin, grid.h))
        out = ramp_in * ramp_out
        out[~spec.omega] = 0.0
        return out

    xs, qc = f_qc.samples, f_qc.qc_values
    fs = f_qc.f_values
    results = []
    for K in K_list:
        chi = _chi(K)
        edges = np.linspace(x_lo, x_hi, K + 1)
        w = np.zeros(grid.N)
        for k in range(K):
            lo, hi = edges[k], edges[k + 1]
            blk = (x >= lo) & (x < hi)
            if not np.any(blk):
                continue
            G = float(A[blk].mean())
            fG = float(np.interp(G, xs, fs))
            qG = float(np.interp(G, xs, qc))
            if fG - qG <= 1e-12 * (1.0 + abs(fG)):
                continue  # no envelope gap: block degenerates
            a1, a2, theta = _support_segment(xs, fs, qc, G)
            s1, s2 = a1 - G, a2 - G
            t = (x[blk] - lo) / (hi - lo)
            ramp = np.where(t < theta, s1 * t, s1 * theta + s2 * (t - theta))
            w[blk] = ramp * (hi - lo)
        w_field = SampledField(grid, w, decay=u.decay)
        from .envelope import periodic_pushforward
        tilde = periodic_pushforward(w_field, params)
        vals = u.values[..., 0] + chi * tilde.values[..., 0]
        vals[~spec.omega] = u.values[~spec.omega, 0]
        u_K = SampledField(grid, vals, decay=u.decay)
        energy = evaluate_functional(u_K, f, spec, params, backend)
        results.append((u_K, energy))
    return results


def _support_segment(xs: np.ndarray, fs: np.ndarray, qc: np.ndarray,
                     G: float) -> tuple:
    """Endpoints (a1, a2) of the supporting segment of the envelope
    through G, and the weight theta on a1 (theta a1 + (1-theta) a2 = G)."""
    on_hull = np.abs(fs - qc) <= 1e-10 * (1.0 + np.abs(fs))
    hull_x = xs[on_hull]
    left = hull_x[hull_x <= G]
    right = hull_x[hull_x >= G]
    a1 = float(left.max()) if len(left) else float(hull_x.min())
    a2 = float(right.min()) if len(right) else float(hull_x.max())
    if a2 <= a1 + 1e-15:
        return a1, a1 + 1e-15, 1.0
    theta = (a2 - G) / (a2 - a1)
    return a1, a2, theta


@dataclass
class LscSequenceReport:
    energies: list
    limit_energy: float
    liminf: float
    satisfied: bool


def lsc_probe(f: Integrand, spec: ComplementarySpec,
              params: FractionalParams,
              sequences: Sequence[tuple],
              backend: Backend = SPECTRAL,
              tolerance: float = 1e-6) -> list:
    """Lower-semicontinuity probe: each entry of ``sequences`` is a pair
    (fields, limit_field); the report records whether the tail infimum of
    the energies stays above the limit's energy (within tolerance,
    relative to the energy scale)."""
    reports = []
    for fields, limit in sequences:
        energies = [evaluate_functional(v, f, spec, params, backend)
                    for v in fields]
        e_lim = evaluate_functional(limit, f, spec, params, backend)
        tail = energies[len(energies) // 2:]
        liminf = min(tail) if tail else min(energies)
        scale = max(abs(e_lim), max(abs(e) for e in energies), 1.0)
        ok = liminf >= e_lim - tolerance * scale - 1e-12
        reports.append(LscSequenceReport(energies=energies,
                                         limit_energy=e_lim,
                                         liminf=liminf, satisfied=ok))
    return reports
