"""Relative criticality residuals, Newton solving and continuation.

A relative critical point of ``F = f o iota`` is a pair ``(m, xi)`` at which
``m`` is a critical point of ``F_xi = F(., xi)`` on the configuration
manifold ``M``. The gradient of ``F_xi`` splits into orbit directions (the
"rigid" part, equivalent to ``ad*_xi dF/dxi = 0``) and a complement (the
"internal" part).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from relcrit.geometry import (
    Action,
    Euclidean,
    Manifold,
    ManifoldPoint,
    Product,
    default_step,
    fd_jacobian,
    generator_coords,
    numerical_rank,
    orthonormal_range,
    rank_threshold,
)
from relcrit.invariants import InvariantMapSpec

log = logging.getLogger(__name__)

SOLVE_TOL = 1e-10
MAX_ITER = 50
ARMIJO_FACTOR = 0.5
MAX_BACKTRACKS = 20
XI_REL_STEP = 1e-4
# Relative singular-value cutoff for the finite-difference Jacobian; directions
# below it (symmetry orbits, noise) are left out of the step.
JACOBIAN_RCOND = 1e-8


@dataclass(frozen=True)
class ScalarModel:
    """``F(m, xi) = f(iota(m, xi))`` together with its symmetry data.

    Parameters
    ----------
    name : str
    map : InvariantMapSpec
        Defined on ``Product(M, Euclidean((k,)))``; generators are flat
        arrays of length ``k``.
    f, df : callable
        Scalar function on the codomain and its gradient. ``df`` may be
        ``None``, in which case it is finite-differenced.
    action : Action
        The group action on ``M``.
    Ad, coad : callable
        ``Ad(g, xi)`` and ``coad(xi, mu)`` on flat algebra vectors.
    xi_names : tuple of str
        Names of the generator components.
    locked : callable, optional
        ``locked(m, xi)``, the locked Lagrangian, for models that are one.
    """

    name: str
    map: InvariantMapSpec
    f: Callable
    df: Optional[Callable]
    action: Action
    Ad: Callable
    coad: Callable
    xi_names: tuple
    locked: Optional[Callable] = None
    system: str = ""

    @property
    def manifold(self) -> Manifold:
        return self.map.manifold.factors[0]

    @property
    def algebra_dim(self) -> int:
        return len(self.xi_names)

    def F(self, m, xi):
        return float(self.f(self.iota(m, xi)))

    def iota(self, m, xi):
        return self.map((_value(m), np.asarray(xi, dtype=float)))

    def codomain_gradient(self, y):
        y = np.asarray(y, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(y), dtype=float)
        g = np.empty_like(y)
        for i in range(y.size):
            h = 1e-6 * (1.0 + abs(y[i]))
            e = np.zeros_like(y)
            e[i] = h
            g[i] = (self.f(y + e) - self.f(y - e)) / (2 * h)
        return g

    def with_f(self, f, df=None, name=None):
        return replace(self, f=f, df=df, name=name or self.name, locked=None)


def _value(m):
    return m.value if isinstance(m, ManifoldPoint) else m


def _point(model: ScalarModel, m) -> ManifoldPoint:
    return m if isinstance(m, ManifoldPoint) else ManifoldPoint(model.manifold, m)


def xi_index(model: ScalarModel, key) -> int:
    if isinstance(key, (int, np.integer)):
        if not 0 <= key < model.algebra_dim:
            raise IndexError(f"generator index {key} out of range")
        return int(key)
    try:
        return model.xi_names.index(key)
    except ValueError:
        raise KeyError(f"unknown generator component {key!r}; known: {model.xi_names}") from None


# --- residuals ----------------------------------------------------------------


def manifold_differential(model: ScalarModel, m, xi, basis=None) -> np.ndarray:
    """``d_m iota_xi`` in the tangent basis of ``M`` (rows = codomain)."""
    p = _point(model, m)
    xi = np.asarray(xi, dtype=float)
    M = model.manifold
    if model.map.jacobian is not None:
        B = M.tangent_basis(p.value) if basis is None else basis
        J = np.asarray(model.map.jacobian((p.value, xi)), dtype=float)
        J = J.reshape(model.map.codomain_dim, -1)[:, : M.size]
        return J @ B.T
    return np.atleast_2d(fd_jacobian(lambda v: model.map((v, xi)), p))


def gradient(model: ScalarModel, m, xi, basis=None) -> np.ndarray:
    """Coordinates of ``grad F_xi(m)`` in the tangent basis."""
    D = manifold_differential(model, m, xi, basis)
    return D.T @ model.codomain_gradient(model.iota(m, xi))


def criticality_residual(model: ScalarModel, m, xi) -> float:
    """``|grad F_xi(m)|``."""
    return float(np.linalg.norm(gradient(model, m, xi)))


def xi_gradient(model: ScalarModel, m, xi, h=None) -> np.ndarray:
    """``dF/dxi`` by a fourth-order central stencil."""
    xi = np.asarray(xi, dtype=float)
    h = XI_REL_STEP * (1.0 + np.linalg.norm(xi)) if h is None else h
    return _stencil4(lambda x: model.F(m, x), xi, h)


def _stencil4(fun, x, h):
    g = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h
        g[k] = (8.0 * (fun(x + e) - fun(x - e)) - (fun(x + 2 * e) - fun(x - 2 * e))) / (12.0 * h)
    return g


def rigid_residual(model: ScalarModel, m, xi, h=None) -> float:
    """``|ad*_xi dF/dxi(m, xi)|`` with ``dF/dxi`` finite-differenced."""
    xi = np.asarray(xi, dtype=float)
    return float(np.linalg.norm(model.coad(xi, xi_gradient(model, m, xi, h))))


def _vint_coords(model: ScalarModel, p: ManifoldPoint, v_int) -> np.ndarray:
    """Tangent coordinates (as columns) of a caller-supplied complement."""
    v = np.atleast_2d(np.asarray(getattr(v_int, "vectors", v_int), dtype=float))
    M = p.manifold
    if v.shape[1] == M.dim and v.shape[1] != M.size:
        return v.T
    if v.shape[1] == M.size:
        return M.coords(p.value, v).T
    raise ValueError(f"v_int rows must have length {M.dim} (coordinates) or {M.size} (embedded)")


def default_complement(model: ScalarModel, m) -> np.ndarray:
    """Orthonormal complement of the orbit directions, as coordinate columns."""
    p = _point(model, m)
    C = generator_coords(p, model.action)
    Q = orthonormal_range(C)
    U, _, _ = np.linalg.svd(np.eye(p.manifold.dim) - Q @ Q.T)
    return U[:, : p.manifold.dim - Q.shape[1]]


def internal_residual(model: ScalarModel, m, xi, v_int=None) -> float:
    """Norm of ``grad F_xi(m)`` restricted to the span of ``v_int``.

    Raises
    ------
    ValueError
        If ``span(v_int) + g.m`` is not the whole tangent space.
    """
    p = _point(model, m)
    V = default_complement(model, p) if v_int is None else _vint_coords(model, p, v_int)
    C = generator_coords(p, model.action)
    if numerical_rank(np.concatenate([V, C], axis=1)) != p.manifold.dim:
        raise ValueError("v_int together with the orbit directions does not span the tangent space")
    Q = orthonormal_range(V)
    return float(np.linalg.norm(Q.T @ gradient(model, p, xi)))


@dataclass(frozen=True)
class CriticalityReport:
    full_residual: float
    rigid_residual: float
    internal_residual: float
    kernel_dim: int
    classification: str
    tol: float
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "full": self.full_residual,
            "rigid": self.rigid_residual,
            "internal": self.internal_residual,
        }


def classify(full, rigid, tol):
    if full < tol:
        return "critical"
    if rigid < tol:
        return "rigid-only"
    return "non-critical"


def analyze(model: ScalarModel, m, xi, v_int=None, tol=SOLVE_TOL) -> CriticalityReport:
    """All three residuals plus kernel and conditioning data at ``(m, xi)``."""
    p = _point(model, m)
    xi = np.asarray(xi, dtype=float)
    D = manifold_differential(model, p, xi)
    g = D.T @ model.codomain_gradient(model.iota(p, xi))
    full = float(np.linalg.norm(g))
    rigid = rigid_residual(model, p, xi)
    internal = internal_residual(model, p, xi, v_int)
    C = generator_coords(p, model.action)
    s = np.linalg.svd(C, compute_uv=False) if C.size else np.zeros(0)
    kept = s[s > rank_threshold(s, max(C.shape))] if s.size else s
    bound = max(1.0, 1.0 / kept[-1]) if kept.size else 1.0
    return CriticalityReport(
        full_residual=full,
        rigid_residual=rigid,
        internal_residual=internal,
        kernel_dim=int(D.shape[0] - numerical_rank(D)),
        classification=classify(full, rigid, tol),
        tol=tol,
        diagnostics={"decomposition_constant": bound, "orbit_dim": int(kept.size)},
    )


def locked_momentum(model: ScalarModel, m, xi, h=None) -> np.ndarray:
    """``I_xi(q) . zeta = d/de L_{xi + e zeta}(q)`` along the algebra basis."""
    if model.locked is None:
        raise TypeError(f"model {model.name!r} is not tagged as a locked Lagrangian")
    xi = np.asarray(xi, dtype=float)
    h = XI_REL_STEP * (1.0 + np.linalg.norm(xi)) if h is None else h
    q = _value(m)
    return _stencil4(lambda x: model.locked(q, x), xi, h)


def kernel_basis(M, tol=None) -> np.ndarray:
    """Orthonormal null-space basis (columns) of ``M`` via SVD."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if M.size == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(M)
    cut = rank_threshold(s, max(M.shape)) if tol is None else tol
    r = int(np.sum(s > cut))
    return Vt[r:].T


# --- Newton -------------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    point: ManifoldPoint
    xi: np.ndarray
    residual: float
    converged: bool
    iterations: int
    status: str
    diagnostics: dict = field(default_factory=dict)


def _free_indices(model: ScalarModel, frozen) -> list:
    if isinstance(frozen, str) and frozen == "all":
        return []
    fixed = {xi_index(model, k) for k in (frozen or ())}
    return [k for k in range(model.algebra_dim) if k not in fixed]


def _newton_stage(model, p, xi, free, move_point, tol, max_iter, factor, backtracks, h):
    M = p.manifold
    r = gradient(model, p, xi)
    nr = float(np.linalg.norm(r))
    it = 0
    cond = 1.0
    status = "converged" if nr < tol else "max_iter"
    while nr >= tol and it < max_iter:
        it += 1
        cols = []
        hp = default_step(p) if h is None else h
        if move_point:
            B = M.tangent_basis(p.value)
            for i in range(M.dim):
                e = np.zeros(M.dim)
                e[i] = 1.0
                ends = []
                for s in (hp, -hp):
                    y = M.retract(p.value, e, s)
                    ends.append(gradient(model, ManifoldPoint(M, y), xi, M.basis_near(y, B)))
                cols.append((ends[0] - ends[1]) / (2 * hp))
        hx = 1e-6 * (1.0 + np.linalg.norm(xi))
        for k in free:
            e = np.zeros_like(xi)
            e[k] = hx
            cols.append((gradient(model, p, xi + e) - gradient(model, p, xi - e)) / (2 * hx))
        J = np.stack(cols, axis=1)
        s = np.linalg.svd(J, compute_uv=False)
        if s[0] == 0.0:
            status = "singular"
            cond = np.inf
            break
        kept = s[s > s[0] * JACOBIAN_RCOND]
        cond = float(kept[0] / kept[-1])
        step = -np.linalg.lstsq(J, r, rcond=JACOBIAN_RCOND)[0]
        alpha = 1.0
        accepted = False
        for _ in range(backtracks + 1):
            dp = step[: M.dim] if move_point else None
            q = ManifoldPoint(M, M.retract(p.value, alpha * dp)) if move_point else p
            x = xi.copy()
            x[free] += alpha * step[M.dim if move_point else 0 :]
            try:
                rn = gradient(model, q, x)
            except (ValueError, np.linalg.LinAlgError, FloatingPointError):
                rn = None
            if rn is not None and np.all(np.isfinite(rn)):
                nn = float(np.linalg.norm(rn))
                if nn <= (1.0 - 1e-4 * alpha) * nr:
                    accepted = True
                    break
            alpha *= factor
        if not accepted:
            status = "stalled"
            break
        p, xi, r, nr = q, x, rn, nn
        if nr < tol:
            status = "converged"
    return p, xi, nr, it, status, cond


def newton_solve(
    model: ScalarModel,
    m0,
    xi0,
    *,
    frozen,
    hold_point: Optional[bool] = None,
    tol: float = SOLVE_TOL,
    max_iter: int = MAX_ITER,
    armijo: float = ARMIJO_FACTOR,
    backtracks: int = MAX_BACKTRACKS,
    h: Optional[float] = None,
) -> Solution:
    """Damped Gauss-Newton on ``grad F_xi(m) = 0``.

    Parameters
    ----------
    frozen : iterable of generator names/indices, or ``"all"``
        Generator components held fixed. Always explicit: with isotropy the
        generator is not unique, so the caller decides what to pin.
    hold_point : bool, optional
        ``True`` solves for the free generator components only, ``False``
        moves the configuration too. ``None`` (default) first tries with the
        configuration held and releases it only if that stalls.

    Returns
    -------
    Solution
        ``converged`` is ``False`` (with ``status`` in ``{"max_iter",
        "stalled", "singular"}``) when the tolerance was not reached.
    """
    p = _point(model, m0)
    xi = np.asarray(xi0, dtype=float).copy()
    if xi.shape != (model.algebra_dim,):
        raise ValueError(f"expected {model.algebra_dim} generator components, got {xi.shape}")
    free = _free_indices(model, frozen)
    r0 = criticality_residual(model, p, xi)
    if not np.isfinite(r0):
        raise ValueError("residual is not finite at the initial point")
    if r0 < tol:
        return Solution(p, xi, r0, True, 0, "converged", {"stages": []})

    stages = []
    if hold_point is None:
        plan = [False, True] if free else [True]
    else:
        plan = [not hold_point]
    total = 0
    best = (p, xi, r0)
    status, cond = "max_iter", 1.0
    for move_point in plan:
        if not move_point and not free:
            continue
        q, x, nr, it, status, cond = _newton_stage(
            model, best[0], best[1], free, move_point, tol, max_iter - total, armijo, backtracks, h
        )
        total += it
        stages.append({"move_point": move_point, "iterations": it, "status": status, "residual": nr})
        if nr < best[2]:
            best = (q, x, nr)
        if status == "converged" or total >= max_iter:
            break
    p, xi, nr = best
    nr = criticality_residual(model, p, xi)
    converged = nr < tol
    if converged:
        status = "converged"
    log.debug("newton_solve %s: %s after %d iterations, residual %.3e", model.name, status, total, nr)
    return Solution(p, xi, nr, converged, total, status, {"stages": stages, "condition": cond})


# --- continuation -------------------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    """Natural-parameter sweep over generator components.

    ``apply(value, xi)`` returns the generator guess for a parameter value;
    ``inside(point, xi)`` returns ``False`` once a boundary binds.
    """

    name: str
    values: Sequence[float]
    apply: Callable
    frozen: object
    hold_point: Optional[bool] = None
    inside: Optional[Callable] = None


@dataclass(frozen=True)
class BranchEntry:
    param: float
    point: ManifoldPoint
    xi: np.ndarray
    iota: np.ndarray
    residual: float


@dataclass(frozen=True)
class Branch:
    name: str
    entries: tuple
    boundary: Optional[dict] = None


def trace_branch(model: ScalarModel, seed: Solution, sweep: Sweep, tol: float = SOLVE_TOL, **newton_kw) -> Branch:
    """Continue ``seed`` along ``sweep`` using each solution as the next guess.

    Raises
    ------
    ValueError
        If the seed is not critical or the sweep values are not monotone.
    """
    values = np.asarray(sweep.values, dtype=float)
    d = np.diff(values)
    if values.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("sweep values must be strictly monotone")
    if criticality_residual(model, seed.point, seed.xi) >= tol:
        raise ValueError("seed is not a critical point at the solve tolerance")
    entries = []
    p, xi = seed.point, np.asarray(seed.xi, dtype=float)
    boundary = None
    for v in values:
        guess = np.asarray(sweep.apply(float(v), xi.copy()), dtype=float)
        sol = newton_solve(model, p, guess, frozen=sweep.frozen, hold_point=sweep.hold_point, tol=tol, **newton_kw)
        if not sol.converged:
            boundary = {"reason": f"newton {sol.status}", "param": float(v)}
            break
        if sweep.inside is not None and not sweep.inside(sol.point.value, sol.xi):
            boundary = {"reason": "manifold boundary", "param": float(v)}
            break
        p, xi = sol.point, sol.xi
        entries.append(BranchEntry(float(v), p, xi.copy(), model.iota(p, xi), sol.residual))
    if entries == [] and boundary is not None:
        raise ValueError(f"continuation failed at the first sweep value: {boundary['reason']}")
    return Branch(sweep.name, tuple(entries), boundary)


def algebra_product(M: Manifold, k: int) -> Product:
    """``M x R^k``, the domain of a relative invariant map."""
    return Product(M, Euclidean((k,)))
