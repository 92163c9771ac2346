"""Command-line driver for the fractional-variational toolkit.

Runs identity suites, envelope computations, minimizations, relaxation
experiments and lower-semicontinuity probes from JSON config files and
writes machine-readable artifacts (summary JSON, per-check JSON lines,
CSV tables and traces).

Usage::

    fracvar list-presets
    fracvar run --config cfg.json [--output DIR] [--seed N]
                [--override key=value ...]

Exit codes: 0 all checks passed, 1 a check failed, 2 config error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys

import numpy as np

from . import calculus_id as ci
from . import envelope as envmod
from . import varsolve as vs
from .grid import (BOX, DECAY_COMPACT, DECAY_SCHWARTZ, PERIODIC,
                   FractionalParams, SampledField, compute_constants,
                   field_from_function, lp_norm, make_grid, save_field)
from .fracops import (QUADRATURE, SPECTRAL, Backend, fractional_gradient,
                      fractional_laplacian, riesz_potential)
from .spaces import ComplementarySpec
from .varsolve import INTEGRAND_PRESETS

COMMANDS = ("ops", "verify", "envelope", "minimize", "relax", "lsc")


class ConfigError(Exception):
    """Raised for malformed or incomplete run configurations."""


# ---------------------------------------------------------------------------
# test-field presets

def _bump(r):
    """Smooth compactly supported bump of r in [0, 1), zero for r >= 1."""
    out = np.zeros_like(r)
    inside = np.abs(r) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out / np.exp(-1.0)


def _field_gaussian(grid):
    if grid.kind == PERIODIC:
        raise ConfigError("field preset 'gaussian-bump' needs a box grid")
    x = grid.coords()
    r2 = np.sum(x ** 2, axis=-1)
    return SampledField(grid, np.exp(-r2)[..., None], decay=DECAY_SCHWARTZ)


def _field_compact(grid):
    x = grid.coords()
    if grid.kind == PERIODIC:
        r = 4.0 * np.sqrt(np.sum((x - 0.5) ** 2, axis=-1))
    else:
        r = np.sqrt(np.sum(x ** 2, axis=-1)) / (0.5 * grid.half_extent)
    return SampledField(grid, _bump(r)[..., None], decay=DECAY_COMPACT)


def _field_sine(grid):
    if grid.kind != PERIODIC:
        raise ConfigError("field preset 'sine-mode' needs a periodic grid")
    x = grid.coords()
    vals = np.ones(grid.shape)
    for j in range(grid.n):
        vals = vals * np.sin(2.0 * np.pi * x[..., j])
    return SampledField(grid, vals[..., None])


FIELD_PRESETS = {
    "gaussian-bump": _field_gaussian,
    "compact-bump": _field_compact,
    "sine-mode": _field_sine,
}


# ---------------------------------------------------------------------------
# config handling

_DEFAULTS = {
    "grid": {"n": 1, "kind": "periodic", "N": 512, "half_extent": None},
    "params": {"alpha": 0.5, "p": 2.0},
    "backend": "spectral",
    "field": "compact-bump",
    "integrand": "quadratic",
    "complementary": {"omega": [0.25, 0.75]},
    "output_dir": "fracvar-out",
    "seed": 0,
    "tolerances": {},
    "K_list": [4, 8, 16, 32],
    "envelope_range": [-2.0, 2.0],
    "envelope_samples": 4097,
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _apply_override(cfg: dict, spec: str) -> None:
    if "=" not in spec:
        raise ConfigError(f"override {spec!r} is not of the form key=value")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a scalar")
    node[parts[-1]] = value


def load_config(path, overrides=(), output=None, seed=None) -> dict:
    try:
        with open(path) as fh:
            user = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(user, dict):
        raise ConfigError("config root must be a JSON object")
    if "params" in user and "alpha" not in user["params"]:
        raise ConfigError("missing required field 'params.alpha'")
    cfg = _merge(_DEFAULTS, user)
    for spec in overrides:
        _apply_override(cfg, spec)
    if output is not None:
        cfg["output_dir"] = output
    if seed is not None:
        cfg["seed"] = int(seed)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    cmd = cfg.get("command")
    if cmd is None:
        raise ConfigError("missing required field 'command'")
    if cmd not in COMMANDS:
        raise ConfigError(f"unknown command {cmd!r}; valid: {', '.join(COMMANDS)}")
    g = cfg["grid"]
    for key in ("n", "kind", "N"):
        if key not in g:
            raise ConfigError(f"missing required field 'grid.{key}'")
    p = cfg["params"]
    if "alpha" not in p:
        raise ConfigError("missing required field 'params.alpha'")
    alphas = p["alpha"] if isinstance(p["alpha"], list) else [p["alpha"]]
    for a in alphas:
        if not (0.0 < float(a) < 1.0):
            raise ConfigError(f"params.alpha must lie in (0, 1), got {a}")
    if not (float(p.get("p", 2.0)) >= 1.0):
        raise ConfigError("params.p must be >= 1")
    if cfg["backend"] not in ("spectral", "quadrature"):
        raise ConfigError(f"unknown backend {cfg['backend']!r}")
    if cfg["field"] not in FIELD_PRESETS:
        raise ConfigError(f"unknown field preset {cfg['field']!r}; "
                          f"valid: {', '.join(sorted(FIELD_PRESETS))}")
    if cfg["integrand"] not in INTEGRAND_PRESETS:
        raise ConfigError(f"unknown integrand preset {cfg['integrand']!r}; "
                          f"valid: {', '.join(sorted(INTEGRAND_PRESETS))}")


def _build_grid(cfg: dict):
    g = cfg["grid"]
    try:
        return make_grid(int(g["n"]), g["kind"], int(g["N"]),
                         g.get("half_extent"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid grid: {exc}")


def _alphas(cfg: dict):
    a = cfg["params"]["alpha"]
    return [float(x) for x in (a if isinstance(a, list) else [a])]


def _backend(cfg: dict) -> Backend:
    return SPECTRAL if cfg["backend"] == "spectral" else QUADRATURE


def _omega_mask(cfg: dict, grid) -> np.ndarray:
    bounds = cfg["complementary"]["omega"]
    if (not isinstance(bounds, (list, tuple))) or len(bounds) != 2:
        raise ConfigError("complementary.omega must be [lo, hi]")
    lo, hi = float(bounds[0]), float(bounds[1])
    x = grid.coords()
    mask = np.ones(grid.shape, dtype=bool)
    for j in range(grid.n):
        mask &= (x[..., j] > lo) & (x[..., j] < hi)
    if not mask.any():
        raise ConfigError(f"complementary.omega [{lo}, {hi}] is empty on the grid")
    return mask


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# commands

def _cmd_ops(cfg, outdir) -> dict:
    grid = _build_grid(cfg)
    backend = _backend(cfg)
    u = FIELD_PRESETS[cfg["field"]](grid)
    entries = {}
    for alpha in _alphas(cfg):
        params = compute_constants(grid.n, alpha, float(cfg["params"].get("p", 2.0)))
        tag = ("alpha%g" % alpha).replace(".", "p")
        grad = fractional_gradient(u, params, backend)
        lap = fractional_laplacian(u, alpha / 2.0, backend)
        save_field(grad.field, os.path.join(outdir, f"gradient-{tag}"))
        save_field(lap.field, os.path.join(outdir, f"laplacian-{tag}"))
        rec = {
            "gradient_l2": lp_norm(grad.field, 2),
            "gradient_truncation": grad.truncation_estimate,
            "laplacian_l2": lp_norm(lap.field, 2),
            "laplacian_truncation": lap.truncation_estimate,
        }
        if grid.kind == BOX and backend is SPECTRAL:
            pot = riesz_potential(u, alpha, backend)
            save_field(pot.field, os.path.join(outdir, f"potential-{tag}"))
            rec["potential_l2"] = lp_norm(pot.field, 2)
        entries[tag] = rec
    return {"field": cfg["field"], "operators": entries, "failed": 0}


def _verify_suite(cfg, grid, backend, rng):
    """Identity reports for one grid/backend; calibrated to pass at the
    module default tolerances."""
    tols = cfg["tolerances"]
    phi = FIELD_PRESETS[cfg["field"]](grid)
    if grid.kind == PERIODIC:
        x = grid.coords()
        psi_vals = np.ones(grid.shape)
        for j in range(grid.n):
            psi_vals = psi_vals * (1.0 + 0.5 * np.cos(2.0 * np.pi * x[..., j]))
        psi = SampledField(grid, psi_vals[..., None])
    else:
        x = grid.coords()
        r2 = np.sum((x - 0.25) ** 2, axis=-1)
        psi = SampledField(grid, np.exp(-2.0 * r2)[..., None],
                           decay=DECAY_SCHWARTZ)
    reports = []
    for alpha in _alphas(cfg):
        params = compute_constants(grid.n, alpha, float(cfg["params"].get("p", 2.0)))
        reports.append(ci.check_duality_gradient(
            phi, psi, params, backend, tols.get("duality")))
        reports.append(ci.check_duality_laplacian(
            phi, psi, alpha / 2.0, backend, tols.get("duality")))
        # chained operators on a truncated box carry the box-truncation
        # error of the intermediate field; the suite default reflects that
        chain_tol = None if grid.kind == PERIODIC else 5e-3
        reports.append(ci.check_composition(
            phi, alpha, backend, tols.get("composition", chain_tol), params))
        reports.append(ci.check_leibniz(
            phi, psi, params, backend, tols.get("leibniz")))
        if grid.kind == PERIODIC:
            reports.append(ci.check_periodic_mean_zero(
                phi, params, tols.get("mean_zero")))
        else:
            reports.append(ci.check_potential_lift(
                phi, params, tols.get("potential_lift")))
            reports.append(ci.check_laplacian_push(
                phi, params, tols.get("laplacian_push", 5e-3)))
    return reports


def _cmd_verify(cfg, outdir) -> dict:
    grid = _build_grid(cfg)
    backend = _backend(cfg)
    rng = np.random.default_rng(int(cfg["seed"]))
    reports = _verify_suite(cfg, grid, backend, rng)
    ci.emit_reports(reports, os.path.join(outdir, "checks.jsonl"))
    print(ci.summary_table(reports))
    failed = [r.identity_name for r in reports if not r.passed]
    for name in failed:
        print(f"FAILED identity check: {name}", file=sys.stderr)
    return {
        "checks": [{"identity": r.identity_name, "residual": r.residual,
                    "tolerance": r.tolerance, "passed": r.passed}
                   for r in reports],
        "failed": len(failed),
    }


def _cmd_envelope(cfg, outdir) -> dict:
    name = cfg["integrand"]
    f = INTEGRAND_PRESETS[name]()
    a_min, a_max = (float(v) for v in cfg["envelope_range"])
    num = int(cfg["envelope_samples"])

    def scalar_f(a):
        return float(f.eval(None, 0.0, np.array([[a]])))

    table = envmod.convex_envelope_1d(scalar_f, a_min, a_max, num=num,
                                      pinching=f.growth)
    table.save_csv(os.path.join(outdir, "envelope.csv"))
    gap = table.f_values - table.qc_values
    witnesses = []
    params = compute_constants(1, _alphas(cfg)[0],
                               float(cfg["params"].get("p", 2.0)))
    probes = np.linspace(a_min, a_max, 9)
    for a0 in probes:
        wit = envmod.alpha_qc_violation_search(scalar_f, a0, params)
        witnesses.append({"A": float(a0),
                          "gap": None if wit is None else wit.gap})
    _write_csv(os.path.join(outdir, "violation-gaps.csv"),
               ["A", "gap"],
               [[w["A"], "" if w["gap"] is None else w["gap"]]
                for w in witnesses])
    return {
        "integrand": name,
        "max_envelope_gap": float(gap.max()),
        "gap_support": [float(table.samples[gap > 1e-12].min()),
                        float(table.samples[gap > 1e-12].max())]
        if (gap > 1e-12).any() else None,
        "witnesses": witnesses,
        "failed": 0,
    }


def _datum_and_spec(cfg, grid, params):
    """Complementary-value setup: a compact-bump datum and the config mask."""
    omega = _omega_mask(cfg, grid)
    g = FIELD_PRESETS[cfg["field"]](grid)
    return ComplementarySpec(omega=omega, g=g)


def _cmd_minimize(cfg, outdir) -> dict:
    grid = _build_grid(cfg)
    backend = _backend(cfg)
    f = INTEGRAND_PRESETS[cfg["integrand"]]()
    tols = cfg["tolerances"]
    alpha = _alphas(cfg)[0]
    params = compute_constants(grid.n, alpha, float(cfg["params"].get("p", 2.0)))
    spec = _datum_and_spec(cfg, grid, params)
    opts = vs.MinimizeOptions(tol=float(tols.get("optimality", 1e-6)))
    report = vs.minimize(f, spec, params, backend, opts)
    save_field(report.minimizer, os.path.join(outdir, "minimizer"))
    _write_csv(os.path.join(outdir, "energy-trace.csv"),
               ["iteration", "energy"],
               list(enumerate(report.energy_trace)))
    complementary_ok = bool(np.array_equal(
        report.minimizer.values[~spec.omega], spec.g.values[~spec.omega]))
    if not report.converged:
        print("FAILED: minimize did not reach the optimality tolerance",
              file=sys.stderr)
    return {
        "integrand": cfg["integrand"],
        "energy": report.energy,
        "optimality_residual": report.optimality_residual,
        "iterations": report.iterations,
        "converged": report.converged,
        "complementary_values_exact": complementary_ok,
        "failed": 0 if (report.converged and complementary_ok) else 1,
    }


def _relax_initial_field(grid, params, spec):
    """Field whose fractional gradient is a smooth plateau inside Omega:
    the push-forward of the antiderivative of a mean-zero step profile."""
    x = grid.axis()
    idx = np.nonzero(spec.omega)[0]
    lo, hi = x[idx[0]], x[idx[-1]] + grid.h
    w = 0.1 * (hi - lo)
    d = -0.5 + vs._smooth_cutoff((x - (lo - w / 2)) / w) \
        * vs._smooth_cutoff(((hi + w / 2) - x) / w)
    d -= d.mean()
    dh = np.fft.fft(d)
    xi = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    with np.errstate(divide="ignore", invalid="ignore"):
        vh = np.where(xi != 0, dh / (2j * np.pi * xi), 0.0)
    v0 = SampledField(grid, np.fft.ifft(vh).real[..., None])
    return envmod.periodic_pushforward(v0, params)


def _cmd_relax(cfg, outdir) -> dict:
    grid = _build_grid(cfg)
    if grid.n != 1 or grid.kind != PERIODIC:
        raise ConfigError("the relax command runs on 1D periodic grids")
    name = cfg["integrand"]
    f = INTEGRAND_PRESETS[name]()
    tols = cfg["tolerances"]
    alpha = _alphas(cfg)[0]
    params = compute_constants(1, alpha, float(cfg["params"].get("p", 2.0)))
    omega = _omega_mask(cfg, grid)

    def scalar_f(a):
        return float(f.eval(None, 0.0, np.array([[a]])))

    a_min, a_max = (float(v) for v in cfg["envelope_range"])
    table = envmod.convex_envelope_1d(scalar_f, a_min, a_max,
                                      num=int(cfg["envelope_samples"]),
                                      pinching=f.growth)
    spec_stub = ComplementarySpec(omega=omega,
                                  g=SampledField(grid, np.zeros(grid.shape + (1,))))
    u = _relax_initial_field(grid, params, spec_stub)
    spec = ComplementarySpec(omega=omega, g=u)
    relaxed = vs.relaxed_energy(u, f, table, spec, params)
    original = vs.evaluate_functional(u, f, spec, params)
    K_list = [int(k) for k in cfg["K_list"]]
    seq = vs.minimizing_sequence(u, f, table, spec, params, K_list)
    energies = [e for _, e in seq]
    rows = []
    monotone = True
    prev = None
    for K, e in zip(K_list, energies):
        is_mono = (prev is None) or (e <= prev + 1e-12)
        monotone &= is_mono
        rows.append([K, e, int(is_mono)])
        prev = e
    _write_csv(os.path.join(outdir, "energy-vs-K.csv"),
               ["K", "energy", "monotone"], rows)
    gap_tol = float(tols.get("relax_gap", 0.05))
    rel_gap = abs(energies[-1] - relaxed) / max(abs(relaxed), 1e-300)
    ok = monotone and rel_gap <= gap_tol
    if not ok:
        print("FAILED: relaxation gap or monotonicity check", file=sys.stderr)
    return {
        "integrand": name,
        "original_energy": original,
        "relaxed_energy": relaxed,
        "sequence_energies": energies,
        "monotone": monotone,
        "relative_gap": rel_gap,
        "gap_tolerance": gap_tol,
        "failed": 0 if ok else 1,
    }


def _cmd_lsc(cfg, outdir) -> dict:
    grid = _build_grid(cfg)
    if grid.n != 1 or grid.kind != PERIODIC:
        raise ConfigError("the lsc command runs on 1D periodic grids")
    f = INTEGRAND_PRESETS[cfg["integrand"]]()
    tols = cfg["tolerances"]
    alpha = _alphas(cfg)[0]
    params = compute_constants(1, alpha, float(cfg["params"].get("p", 2.0)))
    omega = _omega_mask(cfg, grid)
    limit = FIELD_PRESETS["compact-bump"](grid)
    spec = ComplementarySpec(omega=omega, g=limit)
    x = grid.axis()
    chi = np.zeros(grid.N)
    chi[omega] = 1.0
    fields = []
    for j in range(1, 1 + int(cfg.get("lsc_modes", 8))):
        osc = np.sin(2.0 * np.pi * (4 * j) * x) / (4 * j) * chi
        fields.append(SampledField(grid, limit.values[..., 0][..., None]
                                   + osc[..., None]))
    reports = vs.lsc_probe(f, spec, params, [(fields, limit)],
                           tolerance=float(tols.get("lsc", 1e-6)))
    rep = reports[0]
    _write_csv(os.path.join(outdir, "lsc-energies.csv"),
               ["j", "energy"], list(enumerate(rep.energies, start=1)))
    if not rep.satisfied:
        print("FAILED: lower-semicontinuity violated for this integrand",
              file=sys.stderr)
    return {
        "integrand": cfg["integrand"],
        "limit_energy": rep.limit_energy,
        "liminf": rep.liminf,
        "satisfied": rep.satisfied,
        "failed": 0 if rep.satisfied else 1,
    }


_RUNNERS = {
    "ops": _cmd_ops,
    "verify": _cmd_verify,
    "envelope": _cmd_envelope,
    "minimize": _cmd_minimize,
    "relax": _cmd_relax,
    "lsc": _cmd_lsc,
}


def run(cfg: dict) -> int:
    """Execute a validated config; returns the exit status."""
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    np.random.seed(int(cfg["seed"]))
    summary = _RUNNERS[cfg["command"]](cfg, outdir)
    summary["command"] = cfg["command"]
    summary["seed"] = int(cfg["seed"])
    _write_json(os.path.join(outdir, "summary.json"), summary)
    return 0 if summary.get("failed", 0) == 0 else 1


def list_presets() -> str:
    lines = ["integrand presets:"]
    for name in sorted(INTEGRAND_PRESETS):
        f = INTEGRAND_PRESETS[name]()
        a, C, c, p = f.growth
        lines.append(f"  {name:<24} growth: {c:g}|A|^{p:g} <= f <= "
                     f"{a:g} + {C:g}(|z|^{p:g} + |A|^{p:g})")
    lines.append("test-field presets:")
    for name in sorted(FIELD_PRESETS):
        lines.append(f"  {name}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracvar",
        description="Fractional-variational toolkit driver")
    sub = parser.add_subparsers(dest="subcommand")
    runp = sub.add_parser("run", help="execute a config file")
    runp.add_argument("--config", required=True, help="path to a JSON config")
    runp.add_argument("--output", default=None, help="output directory")
    runp.add_argument("--seed", type=int, default=None, help="RNG seed")
    runp.add_argument("--override", action="append", default=[],
                      metavar="KEY=VALUE", help="override a config entry "
                      "(dotted keys, JSON values)")
    sub.add_parser("list-presets", help="print named integrands and fields")
    args = parser.parse_args(argv)
    if args.subcommand == "list-presets":
        print(list_presets())
        return 0
    if args.subcommand != "run":
        parser.print_help()
        return 2
    try:
        cfg = load_config(args.config, overrides=args.override,
                          output=args.output, seed=args.seed)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
