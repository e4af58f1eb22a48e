"""Command-line driver: ``relcrit {solve,branch,adequacy,verify,riemann}``.

JSON goes to standard output (schema 1, floats with 17 significant digits),
logs to standard error. Exit codes: 0 success, 1 solver non-convergence or
failed integration, 2 argument error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys

import numpy as np

from relcrit.critsolve import SOLVE_TOL, Sweep, analyze, newton_solve, trace_branch, xi_index
from relcrit.geometry import SO3, S2xS2
from relcrit.lie import random_rotation
from relcrit.systems import adequacy, body, pendulum, riemann, top
from relcrit import verify

SCHEMA = 1
log = logging.getLogger("relcrit")


class UsageError(Exception):
    """Bad or missing arguments; reported with exit code 2."""


class SolverFailure(Exception):
    """Solver did not converge; reported with exit code 1."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# --- output -------------------------------------------------------------------


def _plain(x):
    """Convert numpy containers and scalars into JSON-ready Python objects."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _dump(x, out, indent=0):
    pad = "  " * (indent + 1)
    if isinstance(x, dict):
        if not x:
            out.write("{}")
            return
        out.write("{\n")
        for i, (k, v) in enumerate(x.items()):
            out.write(pad + json.dumps(k) + ": ")
            _dump(v, out, indent + 1)
            out.write(",\n" if i < len(x) - 1 else "\n")
        out.write("  " * indent + "}")
    elif isinstance(x, list):
        if all(not isinstance(v, (dict, list)) for v in x):
            out.write("[")
            for i, v in enumerate(x):
                if i:
                    out.write(", ")
                _dump(v, out, indent)
            out.write("]")
            return
        out.write("[\n")
        for i, v in enumerate(x):
            out.write(pad)
            _dump(v, out, indent + 1)
            out.write(",\n" if i < len(x) - 1 else "\n")
        out.write("  " * indent + "]")
    elif isinstance(x, float):
        out.write(format(x, ".17g") if math.isfinite(x) else "null")
    else:
        out.write(json.dumps(x))


def to_json(obj) -> str:
    """Deterministic JSON text with floats at 17 significant digits."""
    buf = io.StringIO()
    _dump(_plain(obj), buf)
    buf.write("\n")
    return buf.getvalue()


def _envelope(system, command, params, results, diagnostics=None):
    return {
        "schema": SCHEMA,
        "system": system,
        "command": command,
        "params": params,
        "results": results,
        "diagnostics": diagnostics or {},
    }


# --- argument parsing ---------------------------------------------------------


def _pairs(text, what):
    """Parse ``k=v,k=v`` (or a dict from a config file) into floats."""
    if text is None:
        return {}
    if isinstance(text, dict):
        items = text.items()
    else:
        items = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise UsageError(f"{what}: expected key=value, got {part!r}")
            k, v = part.split("=", 1)
            items.append((k.strip(), v))
    out = {}
    for k, v in items:
        try:
            out[str(k)] = float(v)
        except (TypeError, ValueError):
            raise UsageError(f"{what}: value for {k!r} is not a number: {v!r}") from None
    return out


def _vector(text, what, n=None):
    if text is None:
        return None
    vals = text if isinstance(text, (list, tuple)) else str(text).split(",")
    try:
        v = np.array([float(x) for x in vals])
    except (TypeError, ValueError):
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and v.size != n:
        raise UsageError(f"{what}: expected {n} numbers, got {v.size}")
    return v


def _range(text, what):
    """``name=start:stop:count`` into ``(name, values)``."""
    if text is None:
        raise UsageError(f"{what} is required")
    try:
        name, spec = str(text).split("=", 1)
        a, b, n = spec.split(":")
        values = np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise UsageError(f"{what}: expected name=start:stop:count, got {text!r}") from None
    if values.size < 1:
        raise UsageError(f"{what}: count must be positive")
    return name.strip(), values


def _require(params, keys, system):
    missing = [k for k in keys if k not in params]
    if missing:
        raise UsageError(f"system {system!r} requires parameters {', '.join(missing)}")


def _unknown(params, allowed, system):
    extra = sorted(set(params) - set(allowed))
    if extra:
        raise UsageError(f"unknown parameters for {system!r}: {', '.join(extra)}")


COMMON_DEFAULTS = {"seed": 0, "tol": SOLVE_TOL, "format": "json"}


def _add_common(p):
    p.set_defaults(usage_parser=p)
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--tol", type=float, default=None, help=f"criticality tolerance (default {SOLVE_TOL:g})")
    p.add_argument("-v", "--verbose", action="store_true", default=None, help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relcrit", description="Relative critical points of invariant functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve for relative critical points")
    _add_common(p)
    p.add_argument("--system", choices=["top", "pendulum", "body"], default=None)
    p.add_argument("--param", help="system parameters as key=value,...")
    p.add_argument("--fix", help="frozen generator components as name=value,...")
    p.add_argument("--init", help="initial guess as key=value,... (top: iota, precession, spin, generator names)")
    p.add_argument("--variant", choices=list(pendulum.VARIANTS), default=None, help="pendulum scalar function")
    p.add_argument("--inertia", help="body inertia: three moments or nine entries")

    p = sub.add_parser("branch", help="continue a solution along a parameter sweep")
    _add_common(p)
    p.add_argument("--system", choices=["top", "pendulum"], default=None)
    p.add_argument("--param", help="system parameters as key=value,...")
    p.add_argument("--fix", help="top: generator components held at these values")
    p.add_argument("--init", help="top: initial tilt iota (and generator guesses)")
    p.add_argument("--sweep", help="name=start:stop:count (top: xil or xir; pendulum: gamma)")
    p.add_argument("--variant", choices=list(pendulum.VARIANTS), default=None)
    p.add_argument("--family", default=None, help="pendulum seed family (default generic)")
    p.add_argument("--index", type=int, default=None, help="pendulum seed index within the family")
    p.add_argument("--format", choices=["json", "csv"], default=None)

    p = sub.add_parser("adequacy", help="rank certificates on the catalogue strata")
    _add_common(p)
    p.add_argument(
        "--system", choices=["norm-squared", "body-axis", "top", "pendulum", "gram", "all"], default=None
    )
    p.add_argument("--samples", type=int, default=None, help="points per stratum (default 20)")

    p = sub.add_parser("verify", help="independent oracles (dynamics or grid search)")
    _add_common(p)
    p.add_argument("--system", choices=["body", "top", "pendulum"], default=None)
    p.add_argument("--mode", choices=["dynamics", "grid"], default=None, help="body default dynamics, others grid")
    p.add_argument("--inertia", help="body inertia: three moments or nine entries")
    p.add_argument("--generator", help="body generator xi (3 numbers)")
    p.add_argument("--attitude", choices=["identity", "random"], default=None, help="initial body attitude")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--param", help="top/pendulum parameters")
    p.add_argument("--fix", help="top/pendulum generator values for the grid function")
    p.add_argument("--variant", choices=list(pendulum.VARIANTS), default=None)
    p.add_argument("--grid", help="node counts per chart coordinate")

    p = sub.add_parser("riemann", help="Riemann ellipsoid structure checks")
    rsub = p.add_subparsers(dest="riemann_command", required=True)
    q = rsub.add_parser("krig", help="rigid-kernel covectors at a coplanar state")
    _add_common(q)
    q.add_argument("--axes", help="a1,a2,a3 with product 1")
    q.add_argument("--r", help="r1,r2")
    q.add_argument("--theta", help="theta1,theta2")
    q = rsub.add_parser("stype", help="slice-kernel covectors at an S-type state")
    _add_common(q)
    q.add_argument("--axes", help="a1,a2,a3 with product 1")
    q.add_argument("--j", type=int, default=None)
    q.add_argument("--r", type=float, default=None)
    q.add_argument("--theta", type=float, default=None)
    q = rsub.add_parser("remark-axes", help="axes making the kinetic direction rigid")
    _add_common(q)
    q.add_argument("--theta", help="theta1,theta2")
    q.add_argument("--r", help="r1,r2 for the residual check (default 1,1)")
    q = rsub.add_parser("coplanar-c", help="C at random coplanar states")
    _add_common(q)
    q.add_argument("--samples", type=int, default=None)
    return parser


def _merge_config(args):
    """Fill unset flags from ``--config``, then from built-in defaults."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
    known = set(vars(args)) - {"usage_parser", "command", "riemann_command"}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)
    for key, value in COMMON_DEFAULTS.items():
        if getattr(args, key, None) is None and key in known:
            setattr(args, key, value)
    return args


def _threads():
    text = os.environ.get("RELCRIT_THREADS", "1")
    try:
        n = int(text)
    except ValueError:
        raise UsageError(f"RELCRIT_THREADS must be a positive integer, got {text!r}") from None
    if n < 1:
        raise UsageError("RELCRIT_THREADS must be at least 1")
    return n


# --- system construction ------------------------------------------------------


def _top_params(params):
    _unknown(params, ("I1", "I3", "gm"), "top")
    _require(params, ("I1", "I3", "gm"), "top")
    try:
        return top.LagrangeTopParams(params["I1"], params["I3"], params["gm"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _pendulum_params(params):
    raw = ("m1", "m2", "l1", "l2", "g")
    try:
        if any(k in params for k in raw):
            _unknown(params, raw + ("gamma",), "pendulum")
            _require(params, raw, "pendulum")
            return pendulum.PendulumParams(*(params[k] for k in raw))
        _unknown(params, ("ell", "m", "gamma"), "pendulum")
        _require(params, ("ell", "m"), "pendulum")
        return pendulum.PendulumParams.from_ratios(params["ell"], params["m"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _inertia(text, params=None):
    if text is None and params:
        if {"I1", "I2", "I3"} <= set(params):
            text = [params["I1"], params["I2"], params["I3"]]
    if text is None:
        raise UsageError("body requires --inertia")
    v = _vector(text, "--inertia")
    if v.size not in (3, 9):
        raise UsageError("--inertia takes three moments or nine matrix entries")
    try:
        return body.RigidBodyParams(v if v.size == 3 else v.reshape(3, 3))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _generator_dict(model, xi):
    return {name: float(v) for name, v in zip(model.xi_names, xi)}


def _entry(model, point, xi, isotropy_class, tol, extra=None):
    rep = analyze(model, point, xi, tol=tol)
    y = model.iota(point, xi)
    state_dim = len(y) - model.algebra_dim
    entry = {
        "point": np.asarray(point),
        "generator": _generator_dict(model, xi),
        "iota": y[:state_dim],
        "residuals": rep.as_dict(),
        "isotropy_class": isotropy_class,
        "critical": bool(rep.full_residual < tol),
    }
    if extra:
        entry.update(extra)
    return entry


def _top_class(iota):
    return "sleeping" if abs(abs(iota) - 1.0) < 1e-9 else "tilted"


def _pendulum_class(q):
    iota = pendulum.pendulum_invariant(q[0], q[1])
    vertical = [abs(abs(v[2]) - 1.0) < 1e-12 for v in q]
    if all(vertical):
        return "both vertical"
    if any(vertical):
        return "one vertical"
    if abs(pendulum.dependence_defect(iota)) < 1e-10:
        return "common vertical plane"
    return "independent"


# --- solve --------------------------------------------------------------------


def _top_initial(params, fix, init):
    model = top.top_model(params)
    allowed = {"iota", "precession", "spin"} | set(model.xi_names)
    bad = sorted(set(init) - allowed)
    if bad:
        raise UsageError(f"unknown --init keys for top: {', '.join(bad)}")
    try:
        frozen = [xi_index(model, k) for k in fix]
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    xi = np.zeros(2)
    for k, v in init.items():
        if k in model.xi_names:
            xi[xi_index(model, k)] = v
    for k, v in fix.items():
        xi[xi_index(model, k)] = v
    iota = init.get("iota", 0.5)
    if abs(iota) > 1:
        raise UsageError("--init iota must lie in [-1, 1]")
    A = top.top_state(params, iota, init.get("precession", 0.0), init.get("spin", 0.0))
    return model, A, xi, frozen


def _solve_top(args, params, tol):
    p = _top_params(params)
    fix = _pairs(args.fix, "--fix")
    init = _pairs(args.init, "--init")
    if not fix:
        raise UsageError("top solve needs --fix for at least one generator component")
    model, A, xi, frozen = _top_initial(p, fix, init)
    sol = newton_solve(model, A, xi, frozen=frozen, tol=tol)
    diag = {"status": sol.status, "iterations": sol.iterations, "stages": sol.diagnostics.get("stages", [])}
    if not sol.converged:
        raise SolverFailure(f"newton_solve did not converge ({sol.status}, residual {sol.residual:.3e})", diag)
    iota = top.top_iota(p, sol.point.value)
    entry = _entry(model, sol.point.value, sol.xi, _top_class(iota), tol)
    return [entry], diag


def _solve_pendulum(args, params, tol):
    p = _pendulum_params(params)
    variant = args.variant or "reference"
    fix = _pairs(args.fix, "--fix")
    if "gamma" in params:
        gamma = params["gamma"]
    elif "xi" in fix:
        gamma = math.inf if fix["xi"] == 0 else p.gamma(fix["xi"])
    else:
        raise UsageError("pendulum solve needs gamma in --param or --fix xi=...")
    if not gamma > 0:
        raise UsageError("gamma must be positive")
    model = pendulum.pendulum_model(p, variant)
    results = []
    for rec in pendulum.pendulum_solve(p, gamma, variant, tol=tol):
        e = _entry(model, rec.q, [rec.xi], _pendulum_class(rec.q), tol, {"family": rec.family})
        e["residuals"]["normalized"] = rec.residual
        if rec.kappa is not None:
            e["kappa"] = rec.kappa
        if not e["critical"]:
            log.warning("dropping %s record with residual %.3e", rec.family, e["residuals"]["full"])
            continue
        results.append(e)
    return results, {"gamma": gamma, "variant": variant, "count": len(results)}


def _solve_body(args, params, tol):
    p = _inertia(args.inertia, params)
    speed = params.get("speed", 1.0)
    model = body.body_model(p)
    eq = body.body_relative_equilibria(p)
    results = []
    for ax in eq.axes:
        e = _entry(model, np.eye(3), speed * ax.axis, "free", tol, {"moment": ax.moment, "multiplicity": ax.multiplicity})
        results.append(e)
    return results, {"fully_degenerate": eq.fully_degenerate, "speed": speed}


def cmd_solve(args):
    params = _pairs(args.param, "--param")
    tol = args.tol
    if args.system is None:
        raise UsageError("--system is required")
    handler = {"top": _solve_top, "pendulum": _solve_pendulum, "body": _solve_body}[args.system]
    if args.system == "body":
        _unknown(params, ("I1", "I2", "I3", "speed"), "body")
    try:
        results, diag = handler(args, params, tol)
    except SolverFailure as exc:
        exc.report = _envelope(args.system, "solve", params, [], {"error": str(exc), **(exc.report or {})})
        raise
    return _envelope(args.system, "solve", params, results, diag)


# --- branch -------------------------------------------------------------------


def _branch_top(args, params, tol):
    p = _top_params(params)
    name, values = _range(args.sweep, "--sweep")
    fix = _pairs(args.fix, "--fix")
    init = _pairs(args.init, "--init")
    model = top.top_model(p)
    if name not in model.xi_names:
        raise UsageError(f"top sweeps one of {model.xi_names}, got {name!r}")
    fix[name] = values[0]
    model, A, xi, frozen = _top_initial(p, fix, init)
    seed = newton_solve(model, A, xi, frozen=frozen, tol=tol)
    if not seed.converged:
        raise SolverFailure(f"seed did not converge ({seed.status})")
    k = xi_index(model, name)

    def apply(v, x):
        x[k] = v
        return x

    sweep = Sweep(name, values, apply, frozen=frozen, hold_point=True)
    return model, trace_branch(model, seed, sweep, tol=tol), 1


def _branch_pendulum(args, params, tol):
    p = _pendulum_params({k: v for k, v in params.items() if k != "gamma"})
    variant = args.variant or "reference"
    name, values = _range(args.sweep, "--sweep")
    if name != "gamma":
        raise UsageError("pendulum sweeps gamma")
    if np.any(values <= 0):
        raise UsageError("gamma values must be positive")
    family = args.family or "generic"
    index = 0 if args.index is None else args.index
    recs = [r for r in pendulum.pendulum_solve(p, values[0], variant, tol=tol) if r.family == family]
    if not 0 <= index < len(recs):
        raise SolverFailure(f"no {family!r} solution #{index} at gamma = {values[0]:g} ({len(recs)} available)")
    model = pendulum.pendulum_model(p, variant)
    seed = newton_solve(model, recs[index].q, [recs[index].xi], frozen="all", tol=tol)
    if not seed.converged:
        raise SolverFailure("seed is not critical at the requested tolerance")
    sweep = Sweep("gamma", values, lambda g, x: np.array([p.xi(g)]), frozen="all", hold_point=False)
    return model, trace_branch(model, seed, sweep, tol=tol), 3


def _branch_csv(model, branch, state_dim):
    cols = ["param"] + [f"i{k + 1}" for k in range(state_dim)] + list(model.xi_names) + ["residual"]
    lines = [",".join(cols)]
    for e in branch.entries:
        row = [e.param, *e.iota[:state_dim], *e.xi, e.residual]
        lines.append(",".join(format(float(v), ".17g") for v in row))
    return "\n".join(lines) + "\n"


def cmd_branch(args):
    params = _pairs(args.param, "--param")
    if args.system is None:
        raise UsageError("--system is required")
    handler = {"top": _branch_top, "pendulum": _branch_pendulum}[args.system]
    try:
        model, branch, state_dim = handler(args, params, args.tol)
    except ValueError as exc:
        raise SolverFailure(str(exc)) from None
    if args.format == "csv":
        return _branch_csv(model, branch, state_dim)
    results = [
        {
            "param": e.param,
            "point": e.point.value,
            "generator": _generator_dict(model, e.xi),
            "iota": e.iota[:state_dim],
            "residuals": {"full": e.residual},
        }
        for e in branch.entries
    ]
    return _envelope(args.system, "branch", params, results, {"sweep": branch.name, "boundary": branch.boundary})


# --- adequacy -----------------------------------------------------------------

ADEQUACY_ITEMS = {"norm-squared": (1,), "body-axis": (2,), "top": (3,), "pendulum": (4,), "gram": (5,), "all": (1, 2, 3, 4, 5)}


def cmd_adequacy(args):
    if args.system is None:
        raise UsageError("--system is required")
    samples = 20 if args.samples is None else int(args.samples)
    if samples < 1:
        raise UsageError("--samples must be positive")
    runs = adequacy.run_catalogue(samples, args.seed, ADEQUACY_ITEMS[args.system], workers=_threads())
    results = []
    for r in runs:
        results.append(
            {
                "item": r.stratum.item,
                "stratum": r.stratum.name,
                "expected": {"rank_diota": r.stratum.expected[0], "orbit_union": r.stratum.expected[1]},
                "observed": [{"rank_diota": a, "orbit_union": b} for a, b in r.ranks],
                "matches": r.matches,
                "adequate": r.adequate,
                "samples": len(r.reports),
            }
        )
    diag = {"all_match": all(r.matches for r in runs), "all_adequate": all(r.adequate for r in runs)}
    return _envelope(args.system, "adequacy", {"samples": samples, "seed": args.seed}, results, diag)


# --- verify -------------------------------------------------------------------


def _verify_dynamics(args):
    p = _inertia(args.inertia)
    xi = _vector(args.generator, "--generator", 3)
    if xi is None:
        raise UsageError("--generator is required")
    T = 10.0 if args.horizon is None else float(args.horizon)
    dt = 1e-3 if args.dt is None else float(args.dt)
    if not dt > 0 or T < 0:
        raise UsageError("need --dt > 0 and --horizon >= 0")
    A0 = random_rotation(np.random.default_rng(args.seed)) if args.attitude == "random" else np.eye(3)
    model = body.body_model(p)
    rep = analyze(model, A0, xi, tol=args.tol)
    try:
        traj = verify.euler_integrate_check(p.inertia, A0, xi, T, dt)
    except verify.IntegrationError as exc:
        raise SolverFailure(str(exc)) from None
    result = {
        "point": A0,
        "generator": _generator_dict(model, xi),
        "residuals": rep.as_dict(),
        "relative_equilibrium": bool(rep.full_residual < args.tol),
        **traj.as_dict(),
    }
    params = {"inertia": p.inertia, "horizon": T, "dt": dt}
    return _envelope("body", "verify", params, [result], {"mode": "dynamics"})


def _grid_counts(text, default):
    if text is None:
        return default
    v = _vector(text, "--grid")
    if v.size != len(default) or np.any(v != np.round(v)):
        raise UsageError(f"--grid takes {len(default)} integers")
    return tuple(int(x) for x in v)


def _verify_grid(args):
    params = _pairs(args.param, "--param")
    fix = _pairs(args.fix, "--fix")
    if args.system == "top":
        p = _top_params(params)
        model = top.top_model(p)
        gen = np.array([fix.get("xil", 0.0), fix.get("xir", 0.0)])
        func, manifold, name = verify.top_locked_batch(p, tuple(gen)), SO3, "SO3"
        counts = _grid_counts(args.grid, (24, 24, 48))
    elif args.system == "pendulum":
        p = _pendulum_params({k: v for k, v in params.items() if k != "gamma"})
        variant = args.variant or "reference"
        model = pendulum.pendulum_model(p, variant)
        gen = np.array([fix.get("xi", 0.0)])
        func, manifold, name = verify.pendulum_locked_batch(p, gen[0], variant), S2xS2, "S2xS2"
        counts = _grid_counts(args.grid, (12, 24, 12, 24))
    else:
        p = _inertia(args.inertia)
        model = body.body_model(p)
        func, manifold, name = verify.body_energy_batch(p.inertia), verify.S2, "S2"
        counts = _grid_counts(args.grid, (40, 80))
    try:
        runs = verify.grid_oracle_cover(func, name, counts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = []
    for hit in verify.distinct_hits(runs, manifold):
        if args.system == "body":
            point, xi = np.eye(3), hit.point / np.linalg.norm(hit.point)
            sol = newton_solve(model, point, xi, frozen=[int(np.argmax(np.abs(xi)))], hold_point=True, tol=args.tol)
        else:
            sol = newton_solve(model, hit.point, gen, frozen="all", tol=args.tol)
        results.append(
            {
                "cell": hit.coords,
                "point": hit.point,
                "grad_norm": hit.grad_norm,
                "radius": hit.radius,
                "refined": {"point": sol.point.value, "generator": _generator_dict(model, sol.xi), "residual": sol.residual},
                "critical": bool(sol.converged),
            }
        )
    diag = {"charts": [r.chart for r in runs], "nodes": sum(r.nodes for r in runs), "counts": list(counts)}
    return _envelope(args.system, "verify", params, results, {"mode": "grid", **diag})


def cmd_verify(args):
    if args.system is None:
        raise UsageError("--system is required")
    mode = args.mode or ("dynamics" if args.system == "body" else "grid")
    if mode == "dynamics":
        if args.system != "body":
            raise UsageError("dynamics verification is available for the free rigid body only")
        return _verify_dynamics(args)
    return _verify_grid(args)


# --- riemann ------------------------------------------------------------------


def _axes(text):
    a = _vector(text, "--axes", 3)
    if a is None:
        raise UsageError("--axes is required")
    if abs(np.prod(a) - 1.0) > 1e-12:
        # Decimal input rarely multiplies to exactly one; normalize.
        a = a / np.cbrt(np.prod(a))
    return a


def _riemann_krig(args):
    a = _axes(args.axes)
    r = _vector(args.r if args.r is not None else "1,1", "--r", 2)
    th = _vector(args.theta, "--theta", 2)
    if th is None:
        raise UsageError("--theta is required")
    state = riemann.coplanar_state(a, r[0], r[1], th[0], th[1])
    axisymmetric = abs(a[0] - a[1]) <= 1e-12 * max(1.0, abs(a[0]))
    vecs = riemann.riemann_krig_axisymmetric(a[0]) if axisymmetric else riemann.riemann_krig_span(a, th[0], th[1])
    results = [{"covector": v, "membership": riemann.krig_membership(state, v)} for v in vecs]
    diag = {"kernel_dim": riemann.krig_dimension(state), "axisymmetric": axisymmetric, "C": riemann.riemann_iota(state)[6]}
    return {"axes": a, "r": r, "theta": th}, results, diag


def _riemann_stype(args):
    a = _axes(args.axes)
    if args.j is None or args.r is None or args.theta is None:
        raise UsageError("stype needs --j, --r and --theta")
    state = riemann.stype_state(a, int(args.j), args.r, args.theta)
    vecs = riemann.riemann_stype_kernel(a, int(args.j), args.r, args.theta)
    results = [{"covector": v, "membership": riemann.kernel_membership(state, v)} for v in vecs]
    model = riemann.kinetic_model()
    rep = analyze(model, state.A, state.xi, tol=args.tol)
    return {"axes": a, "j": int(args.j), "r": args.r, "theta": args.theta}, results, {"kinetic_residuals": rep.as_dict()}


def _riemann_remark(args):
    th = _vector(args.theta, "--theta", 2)
    if th is None:
        raise UsageError("--theta is required")
    r = _vector(args.r if args.r is not None else "1,1", "--r", 2)
    axes = riemann.riemann_remark_axes(th[0], th[1])
    state = riemann.coplanar_state(axes, r[0], r[1], th[0], th[1])
    rep = analyze(riemann.kinetic_model(), state.A, state.xi, tol=args.tol)
    result = {"axes": axes, "det": float(np.prod(axes)), "residuals": rep.as_dict()}
    return {"theta": th, "r": r}, [result], {}


def _riemann_coplanar(args):
    n = 1000 if args.samples is None else int(args.samples)
    if n < 1:
        raise UsageError("--samples must be positive")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(n):
        a = np.exp(rng.uniform(-0.7, 0.7, 3))
        a /= np.cbrt(np.prod(a))
        r1, r2 = rng.uniform(0.2, 2.0, 2)
        t1, t2 = rng.uniform(0.0, 2 * np.pi, 2)
        s = riemann.coplanar_state(a, r1, r2, t1, t2, random_rotation(rng), random_rotation(rng))
        worst = max(worst, abs(riemann.riemann_iota(s)[6]))
    return {"samples": n, "seed": args.seed}, [{"max_abs_C": worst}], {}


def cmd_riemann(args):
    handler = {
        "krig": _riemann_krig,
        "stype": _riemann_stype,
        "remark-axes": _riemann_remark,
        "coplanar-c": _riemann_coplanar,
    }[args.riemann_command]
    try:
        params, results, diag = handler(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return _envelope("riemann", f"riemann {args.riemann_command}", params, results, diag)


# --- entry point --------------------------------------------------------------

COMMANDS = {"solve": cmd_solve, "branch": cmd_branch, "adequacy": cmd_adequacy, "verify": cmd_verify, "riemann": cmd_riemann}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=stderr, force=True)
        out = COMMANDS[args.command](args)
    except UsageError as exc:
        getattr(args, "usage_parser", parser).print_usage(stderr)
        stderr.write(f"relcrit: error: {exc}\n")
        return 2
    except SolverFailure as exc:
        stderr.write(f"relcrit: {exc}\n")
        if exc.report is not None and isinstance(exc.report, dict) and "schema" in exc.report:
            stdout.write(to_json(exc.report))
        return 1
    stdout.write(out if isinstance(out, str) else to_json(out))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
