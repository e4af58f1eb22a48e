"""Independent oracles: grid search for critical points and rigid-body dynamics.

The grid oracle evaluates a function on a coordinate chart, measures the
Riemannian gradient norm at every node from chart-coordinate finite
differences and the pulled-back metric, and reports nodes where that norm is
a local minimum over the surrounding cells and small compared with the
distance to the neighbouring nodes.

The dynamics oracle integrates the free rigid body (attitude plus body
angular momentum) with classical RK4 and compares the trajectory with the
steady rotation ``exp(t hat(xi)) A0``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from relcrit.geometry import SO3, S2xS2, Euclidean, Manifold
from relcrit.lie import exp_so3, exp_so3_batch, hat_batch
from relcrit.systems.pendulum import _kinetic
from relcrit.systems.top import E3

log = logging.getLogger(__name__)

CHART_MARGIN = 1e-3
GRID_CAP = 2_000_000
CHART_STEP = 1e-6
ENERGY_DRIFT_LIMIT = 1e-3

S2 = Euclidean((3,), name="S2")
_QUARTER_TURN_E1 = exp_so3(np.array([np.pi / 2, 0.0, 0.0]))


# --- charts -------------------------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """Vectorized coordinate chart.

    ``embed`` maps an ``(n, dim)`` array of coordinates to ``(n, size)``
    flattened embedded points. ``periodic[i]`` marks angle coordinates that
    wrap around.
    """

    name: str
    manifold: Manifold
    lower: tuple
    upper: tuple
    periodic: tuple
    embed: Callable

    @property
    def dim(self):
        return len(self.lower)


def _rz(t):
    c, s = np.cos(t), np.sin(t)
    R = np.zeros(t.shape + (3, 3))
    R[..., 0, 0], R[..., 0, 1], R[..., 1, 0], R[..., 1, 1], R[..., 2, 2] = c, -s, s, c, 1.0
    return R


def _rx(t):
    c, s = np.cos(t), np.sin(t)
    R = np.zeros(t.shape + (3, 3))
    R[..., 0, 0], R[..., 1, 1], R[..., 1, 2], R[..., 2, 1], R[..., 2, 2] = 1.0, c, -s, s, c
    return R


def euler_zxz(phi, theta, psi):
    """``Rz(phi) Rx(theta) Rz(psi)`` for arrays of angles."""
    return _rz(np.asarray(phi, float)) @ _rx(np.asarray(theta, float)) @ _rz(np.asarray(psi, float))


def euler_chart(rotated=False, margin=CHART_MARGIN) -> Chart:
    """Euler z-x-z angles on SO(3), optionally composed with a quarter turn about e1.

    The plain chart is singular where ``A e3 = +-e3``; the rotated chart
    (``A = E(angles) Q``) is singular where ``A e2 = +-e3`` instead.
    """
    Q = _QUARTER_TURN_E1 if rotated else np.eye(3)

    def embed(c):
        A = euler_zxz(c[:, 0], c[:, 1], c[:, 2]) @ Q
        return A.reshape(len(c), 9)

    return Chart(
        "euler-zxz" + ("-rotated" if rotated else ""),
        SO3,
        (0.0, margin, 0.0),
        (2 * np.pi, np.pi - margin, 2 * np.pi),
        (True, False, True),
        embed,
    )


def _sphere(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def sphere_chart(rotated=False, margin=CHART_MARGIN) -> Chart:
    """Polar angles on the unit sphere, optionally rotated a quarter turn about e1."""
    R = _QUARTER_TURN_E1 if rotated else np.eye(3)

    def embed(c):
        return _sphere(c[:, 0], c[:, 1]) @ R.T

    return Chart(
        "sphere" + ("-rotated" if rotated else ""),
        S2,
        (margin, 0.0),
        (np.pi - margin, 2 * np.pi),
        (False, True),
        embed,
    )


def sphere_pair_chart(rotated=(False, False), margin=CHART_MARGIN) -> Chart:
    """Product of two polar-angle charts on ``S^2 x S^2``."""
    R = [_QUARTER_TURN_E1 if r else np.eye(3) for r in rotated]

    def embed(c):
        q1 = _sphere(c[:, 0], c[:, 1]) @ R[0].T
        q2 = _sphere(c[:, 2], c[:, 3]) @ R[1].T
        return np.concatenate([q1, q2], axis=1)

    tag = "".join("r" if r else "p" for r in rotated)
    return Chart(
        f"sphere-pair-{tag}",
        S2xS2,
        (margin, 0.0, margin, 0.0),
        (np.pi - margin, 2 * np.pi, np.pi - margin, 2 * np.pi),
        (False, True, False, True),
        embed,
    )


def chart_cover(manifold_name: str, margin=CHART_MARGIN):
    """Charts whose union covers the manifold (plain plus rotated passes)."""
    if manifold_name == "SO3":
        return [euler_chart(False, margin), euler_chart(True, margin)]
    if manifold_name == "S2":
        return [sphere_chart(False, margin), sphere_chart(True, margin)]
    if manifold_name == "S2xS2":
        return [sphere_pair_chart(r, margin) for r in itertools.product((False, True), repeat=2)]
    raise ValueError(f"no chart cover for {manifold_name!r}")


# --- grid oracle --------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Node counts per chart coordinate, optionally over a sub-range."""

    counts: tuple
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    cap: int = GRID_CAP

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if any(n < 2 for n in counts):
            raise ValueError("every grid count must be at least 2")
        if int(np.prod(counts)) > self.cap:
            raise ValueError(f"grid has {int(np.prod(counts))} nodes, above the cap {self.cap}")
        object.__setattr__(self, "counts", counts)

    def axes(self, chart: Chart):
        if len(self.counts) != chart.dim:
            raise ValueError(f"chart {chart.name} has {chart.dim} coordinates, grid has {len(self.counts)}")
        lo = chart.lower if self.lower is None else self.lower
        hi = chart.upper if self.upper is None else self.upper
        out = []
        for n, a, b, per in zip(self.counts, lo, hi, chart.periodic):
            full = per and self.lower is None and self.upper is None
            out.append(a + (b - a) * np.arange(n) / n if full else np.linspace(a, b, n))
        return out


@dataclass(frozen=True)
class GridHit:
    coords: np.ndarray
    point: np.ndarray
    value: float
    grad_norm: float
    radius: float


@dataclass(frozen=True)
class GridResult:
    chart: str
    hits: tuple
    lipschitz: float
    nodes: int
    diagnostics: dict = field(default_factory=dict)


def batched(f: Callable, manifold: Manifold) -> Callable:
    """Wrap a single-point function as a function of ``(n, size)`` arrays."""

    def g(X):
        return np.array([f(manifold.unflatten(x)) for x in X])

    return g


def _neighbor_offsets(d):
    return [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]


def _shift(arr, offset, periodic, fill):
    """``out[i] = arr[i + offset]`` with wrap on periodic axes and ``fill`` elsewhere."""
    out = arr
    for ax, (o, per) in enumerate(zip(offset, periodic)):
        if o == 0:
            continue
        out = np.roll(out, -o, axis=ax)
        if not per:
            idx = [slice(None)] * out.ndim
            idx[ax] = slice(-1, None) if o > 0 else slice(0, 1)
            out = out.copy()
            out[tuple(idx)] = fill
    return out


def grid_oracle(
    func: Callable,
    chart: Chart,
    grid: GridSpec,
    tol: Optional[float] = None,
    h: float = CHART_STEP,
    tie_rtol: float = 1e-6,
) -> GridResult:
    """Approximate critical cells of ``func`` on a chart grid.

    Parameters
    ----------
    func : callable
        Maps an ``(n, size)`` array of flattened embedded points to ``n``
        values (see :func:`batched`).
    tol : float, optional
        Gradient-norm threshold. By default a node qualifies when its norm is
        below ``L * r`` with ``L`` the largest observed slope of the norm
        between neighbouring nodes and ``r`` the node's cell radius, which
        every node within one cell of a critical point satisfies.
    tie_rtol : float
        Relative slack when comparing with neighbours, so that nodes along a
        critical orbit (equal norms up to rounding) all count as minima.

    Raises
    ------
    ValueError
        If the grid exceeds its node cap or does not match the chart.
    """
    axes = grid.axes(chart)
    shape = tuple(len(a) for a in axes)
    d = chart.dim
    C = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    n = len(C)
    X = chart.embed(C)
    weight = chart.manifold.metric_weight

    partials = np.empty((n, d))
    tangents = np.empty((n, d, X.shape[1]))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        Xp, Xm = chart.embed(C + e), chart.embed(C - e)
        partials[:, i] = (np.asarray(func(Xp)) - np.asarray(func(Xm))) / (2 * h)
        tangents[:, i] = (Xp - Xm) / (2 * h)
    values = np.asarray(func(X), dtype=float)
    G = weight * np.einsum("nik,njk->nij", tangents, tangents)
    sol = np.linalg.solve(G, partials[..., None])[..., 0]
    norm = np.sqrt(np.maximum(np.einsum("ni,ni->n", partials, sol), 0.0))

    norm_g = norm.reshape(shape)
    X_g = X.reshape(shape + (X.shape[1],))
    best = np.full(shape, np.inf)
    radius = np.zeros(shape)
    slope = 0.0
    for off in _neighbor_offsets(d):
        nb = _shift(norm_g, off, chart.periodic, np.inf)
        nbx = _shift(X_g, off, chart.periodic, np.nan)
        dist = np.sqrt(weight) * np.linalg.norm(nbx - X_g, axis=-1)
        ok = np.isfinite(nb) & np.isfinite(dist) & (dist > 0)
        best = np.minimum(best, nb)
        radius = np.where(ok, np.maximum(radius, np.nan_to_num(dist)), radius)
        if np.any(ok):
            slope = max(slope, float(np.max(np.abs(nb[ok] - norm_g[ok]) / dist[ok])))
    is_min = norm_g <= best * (1.0 + tie_rtol) + 1e-14
    threshold = slope * radius if tol is None else np.full(shape, float(tol))
    mask = (is_min & (norm_g < threshold)).reshape(-1)
    rad = radius.reshape(-1)
    hits = tuple(
        GridHit(C[k].copy(), chart.manifold.unflatten(X[k]), float(values[k]), float(norm[k]), float(rad[k]))
        for k in np.flatnonzero(mask)
    )
    log.debug("grid_oracle %s: %d nodes, %d hits", chart.name, n, len(hits))
    return GridResult(chart.name, hits, slope, n, {"min_norm": float(norm.min()), "max_norm": float(norm.max())})


def grid_oracle_cover(func, manifold_name: str, counts: Sequence[int], tol=None, **kw):
    """Run :func:`grid_oracle` on every chart of :func:`chart_cover`."""
    return [grid_oracle(func, c, GridSpec(tuple(counts)), tol, **kw) for c in chart_cover(manifold_name)]


def within_one_cell(point, results, manifold: Manifold) -> bool:
    """True if ``point`` lies within the cell radius of some hit."""
    x = manifold.flatten(point)
    w = np.sqrt(manifold.metric_weight)
    for res in results:
        for hit in res.hits:
            if w * np.linalg.norm(manifold.flatten(hit.point) - x) <= hit.radius:
                return True
    return False


def distinct_hits(results, manifold: Manifold):
    """Greedy merge of hits (across charts) lying within each other's cell radius.

    Keeps the hit with the smallest gradient norm of every cluster.
    """
    pool = sorted((h for r in results for h in r.hits), key=lambda h: h.grad_norm)
    w = np.sqrt(manifold.metric_weight)
    kept = []
    for hit in pool:
        x = manifold.flatten(hit.point)
        if all(w * np.linalg.norm(manifold.flatten(k.point) - x) > max(k.radius, hit.radius) for k in kept):
            kept.append(hit)
    return kept


# --- batched model functions ---------------------------------------------------


def top_locked_batch(params, gen=(0.0, 0.0)):
    """Locked Lagrangian of the heavy top for flattened attitudes ``(n, 9)``."""
    xl, xr = gen
    I, s, gm = params.inertia, params.sigma, params.gm

    def f(X):
        A = X.reshape(-1, 3, 3)
        om = xl * np.einsum("nji,j->ni", A, E3) - xr * s
        return 0.5 * np.einsum("ni,ij,nj->n", om, I, om) - gm * np.einsum("i,nij,j->n", E3, A, s)

    return f


def pendulum_locked_batch(params, xi=0.0, variant="physical"):
    """Pendulum locked Lagrangian for flattened pairs ``(n, 6)``."""
    C, glen, m = params.scale, params.g / params.l1, params.m_ratio

    def f(X):
        q1, q2 = X[:, :3], X[:, 3:]
        iota = np.stack([q1[:, 2], q2[:, 2], q1[:, 0] * q2[:, 0] + q1[:, 1] * q2[:, 1]])
        return C * (xi**2 * _kinetic(params, iota, variant) - glen * (iota[0] + m * iota[1]))

    return f


def body_energy_batch(inertia, A=None):
    """Rigid-body energy as a function of unit generators ``(n, 3)`` at fixed attitude."""
    I = np.asarray(inertia, dtype=float)
    A = np.eye(3) if A is None else np.asarray(A, dtype=float)
    M = A @ I @ A.T

    def f(X):
        return 0.5 * np.einsum("ni,ij,nj->n", X, M, X)

    return f


# --- rigid-body dynamics ------------------------------------------------------


class IntegrationError(ValueError):
    """Raised when the relative energy drift exceeds the stability limit."""


@dataclass(frozen=True)
class TrajectoryReport:
    horizon: float
    dt: float
    max_deviation: float
    energy_drift: float
    momentum_drift: float

    def as_dict(self):
        return {
            "horizon": self.horizon,
            "dt": self.dt,
            "max_deviation": self.max_deviation,
            "energy_drift": self.energy_drift,
            "momentum_drift": self.momentum_drift,
        }


def _rhs(A, M, Iinv):
    Om = np.einsum("nij,nj->ni", Iinv, M)
    return A @ hat_batch(Om), np.cross(M, Om)


def euler_integrate_batch(inertia, A0, xi, T, dt, drift_limit=ENERGY_DRIFT_LIMIT):
    """Integrate several free rigid bodies at once; see :func:`euler_integrate_check`.

    ``inertia`` may be one ``3x3`` matrix or one per trajectory.

    Raises
    ------
    IntegrationError
        If any trajectory's relative energy drift exceeds ``drift_limit``.
    """
    A0 = np.asarray(A0, dtype=float).reshape(-1, 3, 3)
    xi = np.asarray(xi, dtype=float).reshape(-1, 3)
    n = len(A0)
    I = np.broadcast_to(np.asarray(inertia, dtype=float), (n, 3, 3)).copy()
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    if np.any(np.linalg.eigvalsh(I)[:, 0] <= 0):
        raise ValueError("inertia must be positive definite")
    Iinv = np.linalg.inv(I)
    steps = int(round(T / dt))
    A = A0.copy()
    Om0 = np.einsum("nji,nj->ni", A0, xi)
    M = np.einsum("nij,nj->ni", I, Om0)
    E0 = 0.5 * np.einsum("ni,ni->n", M, Om0)
    P0 = np.einsum("nij,nj->ni", A0, M)
    escale = np.where(E0 > 0, E0, 1.0)
    pscale = np.maximum(np.linalg.norm(P0, axis=1), 1.0)
    dev = np.zeros(n)
    edrift = np.zeros(n)
    pdrift = np.zeros(n)
    for k in range(1, steps + 1):
        k1a, k1m = _rhs(A, M, Iinv)
        k2a, k2m = _rhs(A + 0.5 * dt * k1a, M + 0.5 * dt * k1m, Iinv)
        k3a, k3m = _rhs(A + 0.5 * dt * k2a, M + 0.5 * dt * k2m, Iinv)
        k4a, k4m = _rhs(A + dt * k3a, M + dt * k3m, Iinv)
        A = A + dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        M = M + dt / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        ref = exp_so3_batch(k * dt * xi) @ A0
        dev = np.maximum(dev, np.linalg.norm(A - ref, axis=(1, 2)))
        Om = np.einsum("nij,nj->ni", Iinv, M)
        E = 0.5 * np.einsum("ni,ni->n", M, Om)
        edrift = np.maximum(edrift, np.abs(E - E0) / escale)
        pdrift = np.maximum(pdrift, np.linalg.norm(np.einsum("nij,nj->ni", A, M) - P0, axis=1) / pscale)
        if np.any(edrift > drift_limit):
            raise IntegrationError(f"energy drift {edrift.max():.3e} at t = {k * dt:.4g}; reduce dt")
    return [TrajectoryReport(float(T), float(dt), float(dev[i]), float(edrift[i]), float(pdrift[i])) for i in range(n)]


def euler_integrate_check(inertia, A0, xi, T, dt, drift_limit=ENERGY_DRIFT_LIMIT) -> TrajectoryReport:
    """RK4 for the free rigid body started on the steady rotation with generator ``xi``.

    The body angular velocity starts at ``A0^T xi``. The report records
    ``sup_t |A(t) - exp(t hat(xi)) A0|`` over all steps, together with the
    relative drift of kinetic energy and spatial angular momentum.

    Raises
    ------
    IntegrationError
        If the relative energy drift exceeds ``drift_limit``.
    """
    return euler_integrate_batch(inertia, A0, xi, T, dt, drift_limit)[0]
