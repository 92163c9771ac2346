"""Named, parameterized checks of the fractional calculus identities.

Every check returns an :class:`IdentityReport` carrying a relative
residual, the tolerance it was judged against and a reproducibility hash
of its inputs.  Reports serialize to JSON lines; ``summary_table``
renders a human-readable overview.

Checks whose statement asserts only the *existence* of a constant
(the norm bound of ``check_laplacian_push``, the Poincare inequality)
fit the constant on part of the input family and fold the relative
instability on the rest into the residual, normalized so the stated
stability budget saturates the tolerance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .grid import (BOX, PERIODIC, FractionalParams, SampledField, lp_inner,
                   lp_norm)
from .fracops import (KIND_SPECTRAL, QUADRATURE, SPECTRAL, Backend,
                      classical_gradient, fractional_gradient,
                      fractional_laplacian, nonlocal_leibniz_remainder,
                      riesz_potential)

TOL_SPECTRAL = 1e-10
TOL_QUADRATURE = 1e-3
_TINY = 1e-300


@dataclass
class IdentityReport:
    identity_name: str
    residual: float
    tolerance: float
    passed: bool
    inputs_digest: str
    details: dict = dc_field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "identity_name": self.identity_name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "inputs_digest": self.inputs_digest,
            "details": self.details,
        })


def _digest(name: str, backend: Optional[Backend], *arrays, **scalars) -> str:
    hsh = hashlib.sha256()
    hsh.update(name.encode())
    if backend is not None:
        hsh.update(repr((backend.kind, backend.delta, backend.far_cutoff)).encode())
    for key in sorted(scalars):
        hsh.update(f"{key}={scalars[key]!r}".encode())
    for arr in arrays:
        hsh.update(np.ascontiguousarray(arr).tobytes())
    return hsh.hexdigest()


def _report(name: str, residual: float, tolerance: float, digest: str,
            **details) -> IdentityReport:
    residual = float(residual)
    return IdentityReport(identity_name=name, residual=residual,
                          tolerance=float(tolerance),
                          passed=residual <= tolerance,
                          inputs_digest=digest, details=details)


def _default_tol(backend: Backend, tolerance: Optional[float]) -> float:
    if tolerance is not None:
        return tolerance
    return TOL_SPECTRAL if backend.kind == KIND_SPECTRAL else TOL_QUADRATURE


def check_duality_gradient(phi: SampledField, psi: SampledField,
                           params: FractionalParams,
                           backend: Backend = SPECTRAL,
                           tolerance: Optional[float] = None) -> IdentityReport:
    """Fractional integration by parts: the grid functional
    <grad^a phi, psi e_j> + <phi, (grad^a psi)_j> vanishes for every
    component j (the discrete gradient is exactly skew-adjoint)."""
    tol = _default_tol(backend, tolerance)
    g_phi = fractional_gradient(phi, params, backend).field
    g_psi = fractional_gradient(psi, params, backend).field
    n = phi.grid.n
    worst = 0.0
    scale = max(lp_norm(g_phi, 2) * lp_norm(psi, 2),
                lp_norm(phi, 2) * lp_norm(g_psi, 2), _TINY)
    vol = phi.grid.cell_volume
    for j in range(n):
        lhs = float(np.sum(g_phi.values[..., j] * psi.values[..., 0]) * vol)
        rhs = -float(np.sum(phi.values[..., 0] * g_psi.values[..., j]) * vol)
        worst = max(worst, abs(lhs - rhs))
    dig = _digest("duality_gradient", backend, phi.values, psi.values,
                  alpha=params.alpha)
    return _report("gradient-integration-by-parts", worst / scale, tol, dig)


def check_duality_laplacian(phi: SampledField, psi: SampledField, s: float,
                            backend: Backend = SPECTRAL,
                            tolerance: Optional[float] = None) -> IdentityReport:
    """Self-adjointness of the fractional Laplacian in the grid inner
    product: <(-Delta)^s phi, psi> = <phi, (-Delta)^s psi>."""
    tol = _default_tol(backend, tolerance)
    l_phi = fractional_laplacian(phi, s, backend).field
    l_psi = fractional_laplacian(psi, s, backend).field
    lhs = lp_inner(l_phi, psi)
    rhs = lp_inner(phi, l_psi)
    scale = max(abs(lhs), abs(rhs), lp_norm(l_phi, 2) * lp_norm(psi, 2), _TINY)
    dig = _digest("duality_laplacian", backend, phi.values, psi.values, s=s)
    return _report("laplacian-self-adjointness", abs(lhs - rhs) / scale, tol, dig)


def _diff4(vals: np.ndarray, grid, axis: int) -> np.ndarray:
    """Fourth-order central difference; periodic wrap on a cell, zero
    extension on a box."""
    h = grid.h
    if grid.kind == PERIODIC:
        sh = lambda k: np.roll(vals, -k, axis=axis)
    else:
        def sh(k):
            out = np.zeros_like(vals)
            sl_src = [slice(None)] * vals.ndim
            sl_dst = [slice(None)] * vals.ndim
            if k > 0:
                sl_src[axis], sl_dst[axis] = slice(k, None), slice(0, -k)
            elif k < 0:
                sl_src[axis], sl_dst[axis] = slice(0, k), slice(-k, None)
            else:
                return vals
            out[tuple(sl_dst)] = vals[tuple(sl_src)]
            return out
    return (-sh(2) + 8.0 * sh(1) - 8.0 * sh(-1) + sh(-2)) / (12.0 * h)


def _gradient_reference(phi: SampledField, backend: Backend) -> np.ndarray:
    """Backend-consistent classical gradient: spectral derivative for the
    spectral backend, fourth-order central differences for quadrature."""
    if backend.kind == KIND_SPECTRAL:
        return classical_gradient(phi, backend).values
    grid = phi.grid
    out = np.empty(grid.shape + (phi.m * grid.n,))
    for j in range(grid.n):
        for i in range(phi.m):
            out[..., i * grid.n + j] = _diff4(phi.values[..., i], grid, j)
    return out


def check_composition(phi: SampledField, alpha: float,
                      backend: Backend = SPECTRAL,
                      tolerance: Optional[float] = None,
                      params: Optional[FractionalParams] = None) -> IdentityReport:
    """Composition identity: applying (-Delta)^((1-a)/2) after (or before)
    the fractional gradient of order a recovers the classical gradient.

    The reference gradient is backend-consistent: the spectral derivative
    for the spectral backend, central differences for quadrature.  On a
    truncated box the residual is taken over the interior half (the
    outer region carries the truncation error of the chained operators)
    and the default tolerance is the quadrature one: truncating the
    intermediate field to the box breaks exact multiplier composition.
    """
    from .grid import compute_constants
    if tolerance is None and phi.grid.kind == BOX:
        tolerance = TOL_QUADRATURE
    tol = _default_tol(backend, tolerance)
    if params is None:
        params = compute_constants(phi.grid.n, alpha)
    s = (1.0 - alpha) / 2.0
    g = fractional_gradient(phi, params, backend).field
    first = fractional_laplacian(g, s, backend).field
    lap_phi = fractional_laplacian(phi, s, backend).field
    second = fractional_gradient(lap_phi, params, backend).field
    ref = _gradient_reference(phi, backend)
    if phi.grid.kind == BOX:
        mask = _interior_mask(phi.grid)
    else:
        mask = np.ones(phi.grid.shape, dtype=bool)
    r1 = float(np.max(np.abs(first.values - ref)[mask]))
    r2 = float(np.max(np.abs(second.values - ref)[mask]))
    sup_scale = max(float(np.max(np.abs(ref[mask]))), _TINY)
    res = max(r1, r2) / sup_scale
    dig = _digest("composition", backend, phi.values, alpha=alpha)
    return _report("gradient-composition-closure", res, tol, dig,
                   order_mismatch_first=r1 / sup_scale,
                   order_mismatch_second=r2 / sup_scale)


def check_leibniz(u: SampledField, psi: SampledField,
                  params: FractionalParams,
                  backend: Backend = QUADRATURE,
                  tolerance: Optional[float] = None) -> IdentityReport:
    """Four-term fractional Leibniz rule: grad^a(psi u) equals
    psi grad^a u + u grad^a psi plus the bilinear remainder."""
    tol = _default_tol(backend, tolerance)
    grid = u.grid
    psiv = psi.values[..., 0]
    prod = SampledField(grid, u.values * psiv[..., None], decay=u.decay)
    lhs = fractional_gradient(prod, params, backend).field.values
    g_u = fractional_gradient(u, params, backend).field.values
    g_psi = fractional_gradient(psi, params, backend).field.values
    rem = nonlocal_leibniz_remainder(u, psi, params, backend).field.values
    n, m = grid.n, u.m
    rhs = np.empty_like(lhs)
    for i in range(m):
        for j in range(n):
            rhs[..., i * n + j] = (psiv * g_u[..., i * n + j]
                                   + u.values[..., i] * g_psi[..., j]
                                   + rem[..., i * n + j])
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), _TINY)
    res = float(np.max(np.abs(lhs - rhs))) / scale
    dig = _digest("leibniz", backend, u.values, psi.values, alpha=params.alpha)
    return _report("four-term-product-rule", res, tol, dig)


def _interior_mask(grid, fraction: float = 0.5) -> np.ndarray:
    x = grid.coords()
    r = np.max(np.abs(x), axis=-1)
    return r <= fraction * grid.half_extent


def check_potential_lift(u: SampledField, params: FractionalParams,
                         tolerance: Optional[float] = None) -> IdentityReport:
    """Lifting by the Riesz potential: v = I_(1-a) u has classical
    gradient equal to grad^a u; compared on the interior half of the box
    via central differences of v."""
    tol = tolerance if tolerance is not None else TOL_QUADRATURE
    if u.grid.kind != BOX:
        raise ValueError("check_potential_lift expects a truncated-box field")
    v = riesz_potential(u, 1.0 - params.alpha, SPECTRAL).field
    grad_v = _gradient_reference(v, QUADRATURE)  # central differences
    g_u = fractional_gradient(u, params, SPECTRAL).field
    mask = _interior_mask(u.grid)
    diff = np.abs(grad_v - g_u.values)[mask]
    scale = max(float(np.max(np.abs(g_u.values[mask]))), _TINY)
    res = float(np.max(diff)) / scale
    dig = _digest("potential_lift", None, u.values, alpha=params.alpha)
    return _report("potential-lift-gradient-match", res, tol, dig)


def _dilate_box_samples(v: np.ndarray, lam: int) -> np.ndarray:
    """Sample v(lam * x) on the same box grid (exact for integer lam:
    lam * x_i lands on grid nodes; zero where it leaves the box)."""
    N = v.shape[0]
    n = v.ndim - 1
    idx1 = np.arange(N)
    src1 = lam * idx1 - (lam - 1) * (N // 2)
    ok1 = (src1 >= 0) & (src1 < N)
    out = np.zeros_like(v)
    grids = np.meshgrid(*([idx1] * n), indexing="ij")
    srcs = [lam * g - (lam - 1) * (N // 2) for g in grids]
    valid = np.ones(grids[0].shape, dtype=bool)
    for s in srcs:
        valid &= (s >= 0) & (s < N)
    srcs_clipped = [np.clip(s, 0, N - 1) for s in srcs]
    vals = v[tuple(srcs_clipped)]
    vals[~valid] = 0.0
    return vals


def check_laplacian_push(v: SampledField, params: FractionalParams,
                         tolerance: Optional[float] = None) -> IdentityReport:
    """Pushing through the half-order Laplacian: u = (-Delta)^((1-a)/2) v
    satisfies grad^a u = grad v, and ||u||_p <= C ||v||_p^a ||grad v||_p^(1-a)
    with one constant stable across integer dilations of v.

    The exponents (a, 1-a) are the scale-invariant pair for this chain;
    the 10% stability budget of the fitted constant saturates the
    tolerance.
    """
    tol = tolerance if tolerance is not None else 1e-6
    grid = v.grid
    alpha, p = params.alpha, params.p
    s = (1.0 - alpha) / 2.0
    u = fractional_laplacian(v, s, SPECTRAL).field
    g_u = fractional_gradient(u, params, SPECTRAL).field
    grad_v = classical_gradient(v, SPECTRAL)
    if grid.kind == BOX:
        # the outer region carries the box-truncation error of the
        # chained operators; compare on the interior half
        mask = _interior_mask(grid)
    else:
        mask = np.ones(grid.shape, dtype=bool)
    sup = max(float(np.max(np.abs(grad_v.values[mask]))), _TINY)
    identity_res = float(np.max(np.abs(g_u.values - grad_v.values)[mask])) / sup

    ratios = []
    for lam in (1, 2, 4):
        vals = v.values if lam == 1 else _dilate_box_samples(v.values, lam)
        v_lam = SampledField(grid, vals, decay=v.decay)
        u_lam = fractional_laplacian(v_lam, s, SPECTRAL).field
        num = lp_norm(u_lam, p)
        den = (lp_norm(v_lam, p) ** alpha
               * lp_norm(classical_gradient(v_lam, SPECTRAL), p) ** (1.0 - alpha))
        ratios.append(num / max(den, _TINY))
    spread = max(abs(r / ratios[0] - 1.0) for r in ratios)
    res = max(identity_res, spread * (tol / 0.1))
    dig = _digest("laplacian_push", None, v.values, alpha=alpha, p=p)
    return _report("half-laplacian-push-through", res, tol, dig,
                   identity_residual=identity_res,
                   fitted_constant=ratios[0], constant_spread=spread)


def check_periodic_mean_zero(u_periodic: SampledField,
                             params: FractionalParams,
                             tolerance: Optional[float] = None) -> IdentityReport:
    """Cell-mean of the fractional gradient of a periodic field is zero
    (the zero Fourier mode is annihilated)."""
    tol = tolerance if tolerance is not None else TOL_SPECTRAL
    if u_periodic.grid.kind != PERIODIC:
        raise ValueError("check_periodic_mean_zero expects a periodic field")
    g = fractional_gradient(u_periodic, params, SPECTRAL).field
    means = np.abs(g.values.mean(axis=tuple(range(u_periodic.grid.n))))
    scale = max(lp_norm(g, np.inf), _TINY)
    res = float(np.max(means)) / scale
    dig = _digest("periodic_mean_zero", None, u_periodic.values,
                  alpha=params.alpha)
    return _report("periodic-gradient-mean-zero", res, tol, dig)


def check_poincare(samples: Sequence[SampledField], params: FractionalParams,
                   omega: np.ndarray,
                   tolerance: Optional[float] = None) -> IdentityReport:
    """Empirical Poincare constant on the complementary-value space:
    sup ||u||_Lp(Omega) / ||grad^a u||_p over the samples, required to be
    finite and stable (within 20%) under doubling the sample count."""
    tol = tolerance if tolerance is not None else 0.2
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    ratios = []
    p = params.p
    for u in samples:
        if lp_norm(u, p) == 0.0:
            raise ValueError("zero sample gives a degenerate 0/0 ratio")
        if np.any(u.values[~omega] != 0.0):
            raise ValueError("sample does not vanish outside Omega")
        g = fractional_gradient(u, params, SPECTRAL).field
        denom = lp_norm(g, p)
        if denom == 0.0:
            raise ValueError("sample with vanishing fractional gradient")
        ratios.append(lp_norm(u, p, region=omega) / denom)
    half = max(ratios[: len(ratios) // 2])
    full = max(ratios)
    spread = abs(full / half - 1.0)
    dig = _digest("poincare", None, *[u.values for u in samples],
                  alpha=params.alpha, p=p)
    return _report("poincare-constant-stability", spread, tol, dig,
                   empirical_constant=full, half_sample_constant=half,
                   num_samples=len(samples))


# ---------------------------------------------------------------------------
# report emission

def emit_reports(reports: Sequence[IdentityReport], path) -> None:
    """Write one JSON object per line."""
    with open(path, "w") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")


def summary_table(reports: Sequence[IdentityReport]) -> str:
    """Fixed-width human-readable summary."""
    name_w = max([len(r.identity_name) for r in reports] + [8])
    lines = [f"{'identity':<{name_w}}  {'residual':>12}  {'tolerance':>12}  status"]
    lines.append("-" * (name_w + 38))
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.identity_name:<{name_w}}  {r.residual:>12.4e}  "
                     f"{r.tolerance:>12.4e}  {status}")
    return "\n".join(lines)
